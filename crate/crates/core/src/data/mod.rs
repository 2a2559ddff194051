//! Track records, cleaning, splitting, scaling and synthetic corpora.

pub mod lyrics;
pub mod records;
pub mod scale;
pub mod split;
pub mod synth;
pub mod table;

pub use lyrics::{normalize_lyrics, LyricsConfig, MAX_REPEAT};
pub use records::{clean, load_records, read_records, reject_reason, save_records, write_records, CleaningConfig, CleaningTally, RejectReason, TrackRecord};
pub use scale::{Scaler, ScalerKind};
pub use split::{bin_of, load_split, quantile_edges, read_split, save_split, stratified_split, write_split, SplitAssignment, SplitLabel, SplitRow};
pub use synth::{write_dataset, SynthData, SynthDatasetSpec, SynthSpec, MODALITY_NAMES, SYNTH_FILES};
pub use table::FeatureTable;
