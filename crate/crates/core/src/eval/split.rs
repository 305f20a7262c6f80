use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{Split, SplitRole};
use crate::error::{Error, Result};
use crate::seed::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Shuffle each class's segments before cutting.
    RandomSegment,
    /// Cut each class's segments in (recording, offset) order, so each split
    /// is a contiguous stretch of signal.
    BlockContiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Train, validation, test.
    pub ratios: [f64; 3],
    pub strategy: SplitStrategy,
    /// Falls back to 0 outside a pipeline that derives it from the master seed.
    pub rng_seed: Option<u64>,
    /// Permit zero ratios (and hence empty splits).
    pub allow_empty: bool,
    pub min_per_class: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: [0.8, 0.1, 0.1],
            strategy: SplitStrategy::RandomSegment,
            rng_seed: None,
            allow_empty: false,
            min_per_class: 10,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::config("SplitSpec: ratios must be finite and non-negative"));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("SplitSpec: ratios sum to {sum}, expected 1")));
        }
        if !self.allow_empty && self.ratios.contains(&0.0) {
            return Err(Error::config(
                "SplitSpec: zero ratio needs allow_empty = true",
            ));
        }
        Ok(())
    }
}

/// What the splitter needs to know about an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitKey {
    pub class: usize,
    pub recording: usize,
    pub offset: usize,
}

/// Item indices per split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitAssignment {
    /// SHA-256 over the three index lists, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (tag, list) in [(b'T', &self.train), (b'V', &self.validation), (b'E', &self.test)] {
            h.update([tag]);
            h.update((list.len() as u64).to_le_bytes());
            for &i in list {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Splits `n` into parts proportional to `ratios`: floors first, then the
/// leftover units go to the largest fractional parts (lower index on ties).
pub fn largest_remainder(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut out = [0usize; 3];
    for (o, q) in out.iter_mut().zip(&quotas) {
        *o = q.floor() as usize;
    }
    let assigned: usize = out.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Stratified split: each class is divided to the ratios independently.
pub fn split_dataset(keys: &[SplitKey], spec: &SplitSpec) -> Result<SplitAssignment> {
    spec.validate()?;
    let n_classes = keys.iter().map(|k| k.class + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, k) in keys.iter().enumerate() {
        by_class[k.class].push(i);
    }
    let mut out = SplitAssignment {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < spec.min_per_class {
            return Err(Error::data(format!(
                "class {c} has {} items; splitting needs at least {}",
                members.len(),
                spec.min_per_class
            )));
        }
        match spec.strategy {
            SplitStrategy::RandomSegment => {
                let mut rng = seed::derived_rng(spec.rng_seed.unwrap_or(0), stream::SPLIT, c as u64);
                members.shuffle(&mut rng);
            }
            SplitStrategy::BlockContiguous => {
                members.sort_by_key(|&i| (keys[i].recording, keys[i].offset, i));
            }
        }
        let [a, b, _] = largest_remainder(members.len(), &spec.ratios);
        out.train.extend(&members[..a]);
        out.validation.extend(&members[a..a + b]);
        out.test.extend(&members[a + b..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Materialises the three role-tagged splits of `items`.
pub fn split_items<T: Clone>(items: &[T], a: &SplitAssignment) -> (Split<T>, Split<T>, Split<T>) {
    let take = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect();
    (
        Split::new(SplitRole::Train, take(&a.train)),
        Split::new(SplitRole::Validation, take(&a.validation)),
        Split::new(SplitRole::Test, take(&a.test)),
    )
}
