//! Stratified splitting, test-set evaluation and the architecture ablation.

mod ablation;
mod report;
mod split;

pub use ablation::{
    default_ablation_dims, reference_accuracy, run_ablation, AblationRow, AblationTable, ExperimentData,
    REFERENCE_ACCURACY,
};
pub use report::{evaluate, evaluate_classifier, Classifier, EvalReport};
pub use split::{largest_remainder, split_dataset, split_items, SplitAssignment, SplitKey, SplitSpec, SplitStrategy};
