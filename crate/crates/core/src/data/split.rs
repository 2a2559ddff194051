use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::table::create_parent;
use crate::error::{Error, Result};
use crate::nn::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub test_fraction: f64,
    pub bins: usize,
    /// Upper edges of bins `0..bins-1`; the last bin is unbounded.
    pub edges: Vec<f64>,
    pub bin: Vec<usize>,
    pub label: Vec<SplitLabel>,
}

impl SplitAssignment {
    pub fn indices(&self, which: SplitLabel) -> Vec<usize> {
        (0..self.label.len()).filter(|&i| self.label[i] == which).collect()
    }
}

/// Nearest-rank quantile edges at `k/bins` for `k = 1..bins`.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (1..bins)
        .map(|k| {
            let rank = (k * n).div_ceil(bins).max(1);
            sorted[rank - 1]
        })
        .collect()
}

/// Bin index of `v`: the number of edges strictly below it, so values on
/// an edge fall into the lower bin.
pub fn bin_of(v: f64, edges: &[f64]) -> usize {
    edges.iter().filter(|&&e| v > e).count()
}

/// Quantile-stratified train/test assignment.
///
/// Within every bin a seeded shuffle sends `round(test_fraction · n_bin)`
/// rows to test. The result depends only on the values, seed and fraction.
pub fn stratified_split(values: &[f64], bins: usize, test_fraction: f64, seed: u64) -> Result<SplitAssignment> {
    if bins == 0 {
        return Err(Error::Config("split needs at least one bin".into()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config(format!("test fraction must lie in [0,1), got {test_fraction}")));
    }
    if values.len() < bins {
        return Err(Error::InvalidInput(format!("{} rows cannot fill {bins} bins", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("split values".into()));
    }
    let edges = quantile_edges(values, bins);
    let bin: Vec<usize> = values.iter().map(|&v| bin_of(v, &edges)).collect();
    let mut label = vec![SplitLabel::Train; values.len()];
    let mut rng = seeded(seed);
    for b in 0..bins {
        let mut members: Vec<usize> = (0..values.len()).filter(|&i| bin[i] == b).collect();
        members.shuffle(&mut rng);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        for &i in &members[..n_test] {
            label[i] = SplitLabel::Test;
        }
    }
    Ok(SplitAssignment {
        seed,
        test_fraction,
        bins,
        edges,
        bin,
        label,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub track_id: String,
    pub bin: usize,
    pub split: SplitLabel,
}

pub fn write_split<W: Write>(ids: &[String], split: &SplitAssignment, sink: W) -> Result<()> {
    if ids.len() != split.label.len() {
        return Err(Error::dim("split rows", split.label.len(), ids.len()));
    }
    let mut w = csv::Writer::from_writer(sink);
    for (i, id) in ids.iter().enumerate() {
        w.serialize(SplitRow {
            track_id: id.clone(),
            bin: split.bin[i],
            split: split.label[i],
        })?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("writing split: {e}")))?;
    Ok(())
}

pub fn read_split<R: Read>(source: R) -> Result<Vec<SplitRow>> {
    let mut reader = csv::Reader::from_reader(source);
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::InvalidInput(format!("split row {}: {e}", i + 2))))
        .collect()
}

pub fn save_split(ids: &[String], split: &SplitAssignment, path: &Path) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_split(ids, split, BufWriter::new(file))
}

pub fn load_split(path: &Path) -> Result<Vec<SplitRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_split(BufReader::new(file))
}
