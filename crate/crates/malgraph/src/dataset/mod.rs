//! Manifests, dataset cleaning, splits, and the synthetic corpus
//! generator.

pub mod manifest;
pub mod split;
pub mod synth;

pub use manifest::{clean_manifest, load_manifest, write_manifest, CleanReport, ManifestEntry, RawLabel};
pub use split::{
    family_disjoint_split, five_fold, load_split, time_split, write_split, SplitSpec,
};
pub use synth::{generate_corpus, SynthConfig, SynthCorpus};
