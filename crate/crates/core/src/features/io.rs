//! Feature-set CSV: `f000..`, then one `label_k` column per class, then `subject_id`.

use std::path::Path;

use super::FeatureVector;
use crate::error::{Error, Result};

fn feature_column(j: usize, dim: usize) -> String {
    let width = dim.saturating_sub(1).to_string().len().max(3);
    format!("f{j:0width$}")
}

pub fn write_features_csv(path: impl AsRef<Path>, items: &[FeatureVector]) -> Result<()> {
    let (dim, k) = items
        .first()
        .map(|fv| (fv.dim(), fv.soft_label.len()))
        .unwrap_or((0, 0));
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = (0..dim).map(|j| feature_column(j, dim)).collect();
    header.extend((0..k).map(|c| format!("label_{c}")));
    header.push("subject_id".into());
    w.write_record(&header)?;
    for fv in items {
        if fv.dim() != dim || fv.soft_label.len() != k {
            return Err(Error::data("feature vectors differ in shape"));
        }
        let mut row: Vec<String> = fv.values.iter().map(|v| v.to_string()).collect();
        row.extend(fv.soft_label.iter().map(|v| v.to_string()));
        row.push(fv.subject_id.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let header = r.headers()?.clone();
    let dim = header.iter().filter(|h| h.starts_with('f')).count();
    let k = header.iter().filter(|h| h.starts_with("label_")).count();
    if header.len() != dim + k + 1 || header.get(header.len() - 1) != Some("subject_id") {
        return Err(Error::data("feature CSV header is not f…, label_…, subject_id"));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| Error::data(format!("row {}: bad number {:?}", i + 1, &rec[j])))
        };
        let values = (0..dim).map(num).collect::<Result<Vec<_>>>()?;
        let soft_label = (dim..dim + k).map(num).collect::<Result<Vec<_>>>()?;
        let subject_id = rec[dim + k]
            .parse::<u16>()
            .map_err(|_| Error::data(format!("row {}: bad subject id", i + 1)))?;
        let fv = FeatureVector {
            values,
            soft_label,
            subject_id,
        };
        fv.validate()?;
        out.push(fv);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let items = vec![
            FeatureVector {
                values: (0..272).map(|j| j as f64 * 0.1 + 1e-17).collect(),
                soft_label: vec![0.3, 0.7, 0.0],
                subject_id: 1,
            },
            FeatureVector {
                values: (0..272).map(|j| -(j as f64) / 3.0).collect(),
                soft_label: vec![0.0, 0.0, 1.0],
                subject_id: 2,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_features_csv(&p, &items).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("f000,f001,"));
        assert!(header.ends_with("f271,label_0,label_1,label_2,subject_id"));
        assert_eq!(read_features_csv(&p).unwrap(), items);
    }
}
