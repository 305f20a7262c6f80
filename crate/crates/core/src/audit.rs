//! Split-role tagging and data-access accounting.
//!
//! Train/validation/test data travel as [`Split`] values that carry their
//! role. Stages that must only see training data (augmentation, standardizer
//! fitting) check the role and record what they read in an [`Audit`].

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Augment,
    FitStandardizer,
    ApplyStandardizer,
    Train,
    Validate,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub role: SplitRole,
    pub items: Vec<T>,
}

impl<T> Split<T> {
    pub fn new(role: SplitRole, items: Vec<T>) -> Self {
        Split { role, items }
    }

    pub fn train(items: Vec<T>) -> Self {
        Split::new(SplitRole::Train, items)
    }

    pub fn validation(items: Vec<T>) -> Self {
        Split::new(SplitRole::Validation, items)
    }

    pub fn test(items: Vec<T>) -> Self {
        Split::new(SplitRole::Test, items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub(crate) fn require_role(&self, role: SplitRole, what: &str) -> Result<()> {
        if self.role != role {
            return Err(Error::config(format!(
                "{what} may only read the {role:?} split, got {:?}",
                self.role
            )));
        }
        Ok(())
    }
}

/// Counts items read per (stage, split role).
#[derive(Debug, Default)]
pub struct Audit {
    counts: Mutex<BTreeMap<(Stage, SplitRole), usize>>,
}

impl Audit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, stage: Stage, role: SplitRole, n_items: usize) {
        let mut counts = self.counts.lock().expect("audit lock poisoned");
        *counts.entry((stage, role)).or_insert(0) += n_items;
    }

    pub fn count(&self, stage: Stage, role: SplitRole) -> usize {
        let counts = self.counts.lock().expect("audit lock poisoned");
        counts.get(&(stage, role)).copied().unwrap_or(0)
    }

    pub fn snapshot(&self) -> BTreeMap<(Stage, SplitRole), usize> {
        self.counts.lock().expect("audit lock poisoned").clone()
    }
}

pub(crate) fn record(audit: Option<&Audit>, stage: Stage, role: SplitRole, n: usize) {
    if let Some(a) = audit {
        a.record(stage, role, n);
    }
}
