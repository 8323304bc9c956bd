use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{predict, ForestError, ForestModel, N_CLASSES};
use crate::features::LabeledDataset;
use crate::spectra::HydrationLabel;

/// Multiclass metrics. `confusion[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: [f64; N_CLASSES],
    pub recall: [f64; N_CLASSES],
    pub f1: [f64; N_CLASSES],
    pub support: [u32; N_CLASSES],
    pub confusion: [[u32; N_CLASSES]; N_CLASSES],
}

impl EvalReport {
    pub fn from_confusion(confusion: [[u32; N_CLASSES]; N_CLASSES]) -> Result<Self, ForestError> {
        let total: u32 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(ForestError::EmptyTestSet);
        }
        let ratio = |num: u32, den: u32| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let mut precision = [0.0; N_CLASSES];
        let mut recall = [0.0; N_CLASSES];
        let mut f1 = [0.0; N_CLASSES];
        let mut support = [0; N_CLASSES];
        let mut trace = 0;
        for c in 0..N_CLASSES {
            let tp = confusion[c][c];
            trace += tp;
            let predicted: u32 = (0..N_CLASSES).map(|r| confusion[r][c]).sum();
            support[c] = confusion[c].iter().sum();
            precision[c] = ratio(tp, predicted);
            recall[c] = ratio(tp, support[c]);
            let pr = precision[c] + recall[c];
            f1[c] = if pr == 0.0 {
                0.0
            } else {
                2.0 * precision[c] * recall[c] / pr
            };
        }
        Ok(Self {
            accuracy: trace as f64 / total as f64,
            precision,
            recall,
            f1,
            support,
            confusion,
        })
    }

    pub fn from_labels(
        truth: &[HydrationLabel],
        predicted: &[HydrationLabel],
    ) -> Result<Self, ForestError> {
        let mut confusion = [[0u32; N_CLASSES]; N_CLASSES];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.code() as usize][p.code() as usize] += 1;
        }
        Self::from_confusion(confusion)
    }

    /// Plain-text table with `Class Prec Rec F1` columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>6}{:>6}{:>6}{:>9}", "Class", "Prec", "Rec", "F1", "Support");
        for label in HydrationLabel::ALL {
            let c = label.code() as usize;
            let _ = writeln!(
                out,
                "{:<16}{:>6.2}{:>6.2}{:>6.2}{:>9}",
                label.name(),
                self.precision[c],
                self.recall[c],
                self.f1[c],
                self.support[c]
            );
        }
        let _ = writeln!(out, "Accuracy {:.4}", self.accuracy);
        out
    }
}

/// Scores `model` on every row of `test`.
pub fn evaluate(model: &ForestModel, test: &LabeledDataset) -> Result<EvalReport, ForestError> {
    if test.is_empty() {
        return Err(ForestError::EmptyTestSet);
    }
    let predicted = test
        .rows
        .iter()
        .map(|x| predict(model, x).map(|p| p.label))
        .collect::<Result<Vec<_>, _>>()?;
    EvalReport::from_labels(&test.labels, &predicted)
}

/// Parses a `row_index,predicted_label` CSV with header.
pub fn read_predictions_csv<R: Read>(reader: R) -> Result<Vec<(usize, HydrationLabel)>, ForestError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| ForestError::Predictions(e.to_string()))?
        .clone();
    if header.len() != 2 || &header[0] != "row_index" || &header[1] != "predicted_label" {
        return Err(ForestError::Predictions(
            "header must be row_index,predicted_label".into(),
        ));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| ForestError::Predictions(e.to_string()))?;
        let row: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| ForestError::Predictions(format!("bad row index {:?}", &rec[0])))?;
        let label = rec[1]
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(HydrationLabel::from_code)
            .ok_or_else(|| ForestError::Predictions(format!("bad label {:?}", &rec[1])))?;
        out.push((row, label));
    }
    Ok(out)
}

/// Scores externally produced predictions against `test`. Every row must be
/// predicted exactly once.
pub fn evaluate_predictions(
    test: &LabeledDataset,
    predictions: &[(usize, HydrationLabel)],
) -> Result<EvalReport, ForestError> {
    if test.is_empty() {
        return Err(ForestError::EmptyTestSet);
    }
    let mut predicted: Vec<Option<HydrationLabel>> = vec![None; test.len()];
    for &(row, label) in predictions {
        let slot = predicted
            .get_mut(row)
            .ok_or_else(|| ForestError::Predictions(format!("row index {row} out of range")))?;
        if slot.replace(label).is_some() {
            return Err(ForestError::Predictions(format!("row {row} predicted twice")));
        }
    }
    let predicted = predicted
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| ForestError::Predictions(format!("row {i} has no prediction"))))
        .collect::<Result<Vec<_>, _>>()?;
    EvalReport::from_labels(&test.labels, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use HydrationLabel::*;

    #[test]
    fn hand_built_confusion() {
        let r = EvalReport::from_confusion([[8, 1, 1], [2, 7, 1], [0, 2, 8]]).unwrap();
        // by hand: 8 / (8 + 2 + 0)
        assert!((r.precision[0] - 0.8).abs() < 1e-15);
        assert!((r.recall[0] - 0.8).abs() < 1e-15);
        // 7 / (1 + 7 + 2), 7 / 10
        assert!((r.precision[1] - 0.7).abs() < 1e-15);
        // 8 / (1 + 1 + 8)
        assert!((r.precision[2] - 0.8).abs() < 1e-15);
        assert!((r.accuracy - 23.0 / 30.0).abs() < 1e-15);
        assert_eq!(r.support, [10, 10, 10]);
    }

    #[test]
    fn perfect_and_constant() {
        let truth = [FullyHydrated, MidHydrated, Dehydrated, Dehydrated];
        let r = EvalReport::from_labels(&truth, &truth).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1, [1.0; 3]);

        let truth = [FullyHydrated, MidHydrated, Dehydrated].repeat(4);
        let r = EvalReport::from_labels(&truth, &[MidHydrated; 12]).unwrap();
        assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-15);
        // never-predicted classes get zero precision and F1
        assert_eq!(r.precision[0], 0.0);
        assert_eq!(r.f1[0], 0.0);
        assert_eq!(r.recall[1], 1.0);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(EvalReport::from_labels(&[], &[]), Err(ForestError::EmptyTestSet));
    }

    #[test]
    fn confusion_invariants() {
        let r = EvalReport::from_confusion([[3, 0, 2], [1, 1, 1], [0, 0, 9]]).unwrap();
        for c in 0..3 {
            assert_eq!(r.confusion[c].iter().sum::<u32>(), r.support[c]);
        }
        assert!((r.accuracy - 13.0 / 17.0).abs() < 1e-15);
        let table = r.to_table();
        assert!(table.starts_with("Class"));
        assert!(table.contains("Prec") && table.contains("Rec") && table.contains("F1"));
    }

    #[test]
    fn external_predictions() {
        let ds = LabeledDataset::new(
            vec![vec![0.0]; 3],
            vec![FullyHydrated, MidHydrated, Dehydrated],
            vec![0; 3],
        )
        .unwrap();
        let csv = "row_index,predicted_label\n2,2\n0,0\n1,0\n";
        let preds = read_predictions_csv(csv.as_bytes()).unwrap();
        let r = evaluate_predictions(&ds, &preds).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        let missing = read_predictions_csv("row_index,predicted_label\n0,0\n".as_bytes()).unwrap();
        assert!(evaluate_predictions(&ds, &missing).is_err());
        assert!(read_predictions_csv("row,label\n0,0\n".as_bytes()).is_err());
        assert!(read_predictions_csv("row_index,predicted_label\n0,7\n".as_bytes()).is_err());
    }
}
