use std::fmt::Write as _;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::audit::{self, Audit, Split, SplitRole, Stage};
use crate::error::{Error, Result};
use crate::features::{argmax, FeatureVector, Standardizer};
use crate::model::Mlp;

/// Anything that maps a (standardized) feature vector to a class index.
pub trait Classifier {
    fn n_classes(&self) -> usize;
    fn classify(&self, values: &[f64]) -> Result<usize>;

    fn classify_all(&self, items: &[Vec<f64>]) -> Result<Vec<usize>> {
        items.iter().map(|v| self.classify(v)).collect()
    }
}

impl Classifier for Mlp {
    fn n_classes(&self) -> usize {
        Mlp::n_classes(self)
    }

    fn classify(&self, values: &[f64]) -> Result<usize> {
        Ok(self.predict(values)?.0)
    }

    fn classify_all(&self, items: &[Vec<f64>]) -> Result<Vec<usize>> {
        let d = self.input_dim();
        if let Some(v) = items.iter().find(|v| v.len() != d) {
            return Err(Error::data(format!("input has {} features, model expects {d}", v.len())));
        }
        let x = Array2::from_shape_vec((items.len(), d), items.concat())
            .map_err(|e| Error::data(e.to_string()))?;
        let mut out = Vec::with_capacity(items.len());
        for start in (0..items.len()).step_by(1024) {
            let end = (start + 1024).min(items.len());
            let p = self.predict_proba(x.slice(s![start..end, ..]))?;
            out.extend(p.rows().into_iter().map(|r| argmax(r.as_slice().expect("row-major"))));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub overall_accuracy: f64,
    /// Diagonal over row sum; 0 for classes absent from the test set.
    pub per_class_accuracy: Vec<f64>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::data("truth and prediction lengths differ"));
        }
        if truth.is_empty() {
            return Err(Error::data("empty test set"));
        }
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::data(format!("class index out of range ({t}, {p})")));
            }
            confusion[t][p] += 1;
        }
        let n_test = truth.len();
        let trace: usize = (0..n_classes).map(|k| confusion[k][k]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[k] as f64 / total as f64
                }
            })
            .collect();
        Ok(EvalReport {
            confusion,
            overall_accuracy: trace as f64 / n_test as f64,
            per_class_accuracy,
            n_test,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Confusion matrix with per-class accuracy in the last column.
    pub fn render_text(&self, class_names: &[String]) -> String {
        let k = self.confusion.len();
        let name = |i: usize| class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
        let width = (0..k)
            .map(|i| name(i).len())
            .chain(self.confusion.iter().flatten().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(4);
        let mut out = String::new();
        let _ = writeln!(out, "true \\ predicted");
        let _ = write!(out, "{:>width$}", "");
        for j in 0..k {
            let _ = write!(out, " {:>width$}", name(j));
        }
        let _ = writeln!(out, "  {:>7}", "acc");
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{:>width$}", name(i));
            for c in row {
                let _ = write!(out, " {c:>width$}");
            }
            let _ = writeln!(out, "  {:>6.2}%", 100.0 * self.per_class_accuracy[i]);
        }
        let _ = writeln!(
            out,
            "overall accuracy {:.2}% on {} test segments",
            100.0 * self.overall_accuracy,
            self.n_test
        );
        out
    }
}

/// Scores already-standardized feature vectors.
pub fn evaluate_classifier<C: Classifier + ?Sized>(clf: &C, items: &[FeatureVector]) -> Result<EvalReport> {
    let values: Vec<Vec<f64>> = items.iter().map(|fv| fv.values.clone()).collect();
    let predicted = clf.classify_all(&values)?;
    let truth: Vec<usize> = items.iter().map(FeatureVector::hard_class).collect();
    EvalReport::from_predictions(&truth, &predicted, clf.n_classes())
}

/// Standardizes the raw test features and scores them with `model`.
pub fn evaluate(
    model: &Mlp,
    standardizer: &Standardizer,
    test: &Split<FeatureVector>,
    audit: Option<&Audit>,
) -> Result<EvalReport> {
    test.require_role(SplitRole::Test, "evaluation")?;
    audit::record(audit, Stage::Evaluate, test.role, test.len());
    let z = test.items.iter().map(|fv| standardizer.apply(fv)).collect::<Result<Vec<_>>>()?;
    evaluate_classifier(model, &z)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Always(usize, usize);

    impl Classifier for Always {
        fn n_classes(&self) -> usize {
            self.1
        }
        fn classify(&self, _: &[f64]) -> Result<usize> {
            Ok(self.0)
        }
    }

    fn balanced(k: usize, per: usize) -> Vec<FeatureVector> {
        (0..k * per)
            .map(|i| {
                let mut soft_label = vec![0.0; k];
                soft_label[i % k] = 1.0;
                FeatureVector {
                    values: vec![(i % k) as f64],
                    soft_label,
                    subject_id: (i % k) as u16,
                }
            })
            .collect()
    }

    struct Oracle(usize);

    impl Classifier for Oracle {
        fn n_classes(&self) -> usize {
            self.0
        }
        fn classify(&self, v: &[f64]) -> Result<usize> {
            Ok(v[0] as usize)
        }
    }

    #[test]
    fn constant_classifier() {
        let items = balanced(6, 10);
        let r = evaluate_classifier(&Always(0, 6), &items).unwrap();
        assert!((r.overall_accuracy - 1.0 / 6.0).abs() < 1e-15);
        assert!(r.confusion.iter().all(|row| row[0] == 10 && row[1..].iter().all(|&c| c == 0)));
        assert_eq!(r.per_class_accuracy[0], 1.0);
        assert_eq!(r.confusion.iter().flatten().sum::<usize>(), r.n_test);
    }

    #[test]
    fn perfect_classifier() {
        let items = balanced(4, 7);
        let r = evaluate_classifier(&Oracle(4), &items).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        for (i, row) in r.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), 7);
            assert_eq!(row[i], 7);
        }
        let text = r.render_text(&[]);
        assert!(text.contains("overall accuracy 100.00% on 28 test segments"));
        let json = r.to_json().unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_test_set() {
        assert!(evaluate_classifier(&Oracle(2), &[]).is_err());
    }
}
