//! Latinized stroke representation for Chinese text.
//!
//! Every Chinese character is decomposed into its stroke sequence, each of
//! the 25 stroke classes is mapped onto a lowercase Latin letter, and the
//! resulting "words" are fed through the usual Latin-script machinery:
//! joint BPE with a target language, substitution-cipher augmentation and
//! multi-source training data with a co-regularized loss.
//!
//! ```text
//! 布什和  --stroke_dict-->  [1,3,2,10,2] [3,2,1,2] ...
//!         --freq_mapping--> etasa taea teatoaie
//!         --bpe-----------> eta@@ sa taea teato@@ aie
//!         --cipher--------> (pseudo source for multi-source training)
//! ```

pub mod bpe;
pub mod cipher;
pub mod freq_mapping;
pub mod latinizer;
pub mod multisource;
pub mod pipeline;
pub mod stats;
pub mod stroke_dict;

mod io_util;

pub use bpe::{BpeModel, SubwordVocab};
pub use cipher::{CipherRing, CipherSpec};
pub use freq_mapping::{FreqTable, MappingMode, StrokeMapping};
pub use latinizer::{LatinizePolicy, LatinizedSentence, Token};
pub use multisource::{LossConfig, LossReport, MultiSourceSample, TokenDistributions};
pub use stroke_dict::{CharStrokeDict, StrokeClass, StrokeSequence};

/// Version string recorded in pipeline manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
