//! Ear-EEG subject identification.
//!
//! The crate covers the whole chain from raw multi-channel ear-EEG to a
//! closed-set identity prediction:
//!
//! ```text
//! EegRecording (.earg / CSV)
//!   ├─ preprocess   channel selection → Butterworth bandpass → 50 Hz notch → windows
//!   ├─ features     Welch PSD (20 bins) | Yule–Walker AR(10) | Hjorth | spectral entropy
//!   ├─ augment      noise, temporal shift (raw)  ·  MixUp, oversampling, class weights (features)
//!   ├─ model        272 → 256 → 128 → 64 → 32 → K MLP (BN, ReLU, dropout, softmax)
//!   └─ eval         stratified 80/10/10 split, confusion matrix, architecture ablation
//! ```
//!
//! Data-parallel loops (per channel, per segment, per matrix row block) run on
//! rayon when the `parallel` feature is enabled (the default) and sequentially
//! otherwise. Work is partitioned into fixed-size blocks so both builds give
//! bit-identical results.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod augment;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod seed;

pub use audit::{Audit, Split, SplitRole, Stage};
pub use dataio::{EegRecording, SyntheticSubjectSpec, IN_EAR_CHANNELS};
pub use error::{Error, Result};
pub use eval::{EvalReport, SplitSpec, SplitStrategy};
pub use features::{ClassMap, FeatureExtractor, FeatureVector, Standardizer, WelchConfig};
pub use model::{Mlp, ModelConfig, TrainHistory};
pub use pipeline::PipelineConfig;
pub use preprocess::{FilterSpec, Segment};
