use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Upper bound on the number of copies a repetition marker can produce.
pub const MAX_REPEAT: u64 = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyricsConfig {
    /// Bracketed annotations removed when they make up a whole line;
    /// matched case-insensitively.
    pub annotations: Vec<String>,
}

impl Default for LyricsConfig {
    fn default() -> Self {
        Self {
            annotations: vec!["Instrumental".into(), "Spoken".into(), "Guitar Solo".into()],
        }
    }
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(.*?)\s*\[x(\d+)\]$").expect("static regex"))
}

fn bracket_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]").expect("static regex"))
}

fn collapse_ws(line: &str) -> String {
    line.split([' ', '\t']).filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ")
}

/// Strips every trailing `[xN]` marker; returns the body and the
/// product of the counts, capped at [`MAX_REPEAT`].
fn strip_markers(line: &str) -> (String, u64) {
    let mut body = line.to_string();
    let mut copies: u64 = 1;
    while let Some(c) = marker_re().captures(&body) {
        let n = c[2].parse::<u64>().unwrap_or(MAX_REPEAT).clamp(1, MAX_REPEAT);
        copies = (copies * n).min(MAX_REPEAT);
        body = c[1].to_string();
    }
    (body, copies)
}

fn is_annotation_line(line: &str, cfg: &LyricsConfig) -> bool {
    let re = bracket_re();
    if !re.replace_all(line, "").trim().is_empty() {
        return false;
    }
    let mut any = false;
    for c in re.captures_iter(line) {
        any = true;
        let tag = collapse_ws(c[1].trim());
        if !cfg.annotations.iter().any(|a| a.eq_ignore_ascii_case(&tag)) {
            return false;
        }
    }
    any
}

/// Deterministic lyric clean-up.
///
/// Line endings become `\n`; spaces and tabs collapse and each line is
/// trimmed; a line ending in `[xN]` becomes N copies of itself; lines
/// made only of configured annotations are dropped; runs of blank lines
/// shrink to one and the text is trimmed. Applying it twice changes
/// nothing.
pub fn normalize_lyrics(text: &str, cfg: &LyricsConfig) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut out: Vec<String> = Vec::new();
    for raw in unified.split('\n') {
        let line = collapse_ws(raw);
        if line.is_empty() {
            if out.last().is_some_and(|l| !l.is_empty()) {
                out.push(String::new());
            }
            continue;
        }
        let (body, copies) = strip_markers(&line);
        if body.is_empty() || is_annotation_line(&body, cfg) {
            continue;
        }
        for _ in 0..copies {
            out.push(body.clone());
        }
    }
    while out.last().is_some_and(String::is_empty) {
        out.pop();
    }
    out.join("\n")
}
