use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate, train_forest, EvalReport, ForestError, ForestParams, N_CLASSES};
use crate::features::LabeledDataset;
use crate::seed::{derived_rng, sub_seed};

const FOLD_STREAM: u64 = 0xF01D;
const TRAIN_STREAM: u64 = 0x7EA1;
const SPLIT_STREAM: u64 = 0x5B17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub test_rows: usize,
    pub train_accuracy: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub grouped: bool,
    pub mean_accuracy: f64,
    /// Population standard deviation over fold accuracies.
    pub std_accuracy: f64,
    pub mean_train_accuracy: f64,
    pub folds: Vec<FoldResult>,
}

impl CvResult {
    /// Mean train accuracy minus mean validation accuracy.
    pub fn generalization_gap(&self) -> f64 {
        self.mean_train_accuracy - self.mean_accuracy
    }
}

/// Fold index for every row.
///
/// Ungrouped: rows are shuffled within each class, classes are concatenated
/// and positions dealt round-robin, which stratifies the folds. Grouped:
/// subjects are shuffled and dealt round-robin, so each subject lands in
/// exactly one fold.
pub fn fold_assignment(
    data: &LabeledDataset,
    k: usize,
    grouped: bool,
    seed: u64,
) -> Result<Vec<usize>, ForestError> {
    let n = data.len();
    if k < 2 || k > n {
        return Err(ForestError::InvalidFolds { k, n });
    }
    let mut rng = derived_rng(sub_seed(seed, FOLD_STREAM), 0);
    let mut folds = vec![0; n];
    if grouped {
        let mut subjects = data.subjects();
        if subjects.len() < k {
            return Err(ForestError::TooFewGroups {
                k,
                found: subjects.len(),
            });
        }
        subjects.shuffle(&mut rng);
        let fold_of: BTreeMap<u32, usize> = subjects
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i % k))
            .collect();
        for (f, s) in folds.iter_mut().zip(&data.subject_ids) {
            *f = fold_of[s];
        }
    } else {
        let mut position = 0;
        for class in 0..N_CLASSES as u8 {
            let mut rows: Vec<usize> = (0..n)
                .filter(|&i| data.labels[i].code() == class)
                .collect();
            rows.shuffle(&mut rng);
            for i in rows {
                folds[i] = position % k;
                position += 1;
            }
        }
    }
    Ok(folds)
}

/// k-fold cross-validation, stratified or grouped by subject.
pub fn cross_validate(
    data: &LabeledDataset,
    k: usize,
    grouped: bool,
    params: &ForestParams,
    seed: u64,
) -> Result<CvResult, ForestError> {
    let assignment = fold_assignment(data, k, grouped, seed)?;
    let train_seed = sub_seed(seed, TRAIN_STREAM);
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
            (0..data.len()).partition(|&i| assignment[i] == fold);
        let train = data.subset(&train_idx);
        let test = data.subset(&test_idx);
        let model = train_forest(&train, params, train_seed ^ fold as u64)?;
        let train_accuracy = evaluate(&model, &train)?.accuracy;
        let report = evaluate(&model, &test)?;
        folds.push(FoldResult {
            test_rows: test.len(),
            train_accuracy,
            report,
        });
    }
    let accs: Vec<f64> = folds.iter().map(|f| f.report.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / k as f64;
    let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / k as f64;
    let mean_train = folds.iter().map(|f| f.train_accuracy).sum::<f64>() / k as f64;
    Ok(CvResult {
        k,
        grouped,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        mean_train_accuracy: mean_train,
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerSubjectResult {
    pub accuracies: BTreeMap<u32, f64>,
    /// Subjects without enough rows or classes, with the reason.
    pub skipped: BTreeMap<u32, String>,
}

impl PerSubjectResult {
    pub fn mean_accuracy(&self) -> Option<f64> {
        if self.accuracies.is_empty() {
            None
        } else {
            Some(self.accuracies.values().sum::<f64>() / self.accuracies.len() as f64)
        }
    }
}

/// Stratified 80/20 split of `indices` into `(train, test)`:
/// `round(0.2 * n_class)` test rows per class, at least one whenever the
/// class has two or more rows.
pub fn stratified_split(
    data: &LabeledDataset,
    indices: &[usize],
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = derived_rng(seed, 0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..N_CLASSES as u8 {
        let mut rows: Vec<usize> = indices
            .iter()
            .copied()
            .filter(|&i| data.labels[i].code() == class)
            .collect();
        rows.shuffle(&mut rng);
        let mut n_test = (0.2 * rows.len() as f64).round() as usize;
        if rows.len() >= 2 {
            n_test = n_test.max(1);
        }
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// [`stratified_split`] over every row of `data`.
pub fn holdout_split(data: &LabeledDataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..data.len()).collect();
    stratified_split(data, &all, sub_seed(seed, SPLIT_STREAM))
}

/// Trains and scores one model per subject on that subject's rows only.
pub fn per_subject_evaluate(
    data: &LabeledDataset,
    params: &ForestParams,
    seed: u64,
) -> Result<PerSubjectResult, ForestError> {
    let mut out = PerSubjectResult::default();
    for subject in data.subjects() {
        let rows: Vec<usize> = (0..data.len())
            .filter(|&i| data.subject_ids[i] == subject)
            .collect();
        let split_seed = sub_seed(seed, SPLIT_STREAM) ^ subject as u64;
        let (train_idx, test_idx) = stratified_split(data, &rows, split_seed);
        let train = data.subset(&train_idx);
        let test = data.subset(&test_idx);
        if test.is_empty() {
            out.skipped
                .insert(subject, format!("TooFewRows: {} rows", rows.len()));
            continue;
        }
        match train_forest(&train, params, sub_seed(seed, TRAIN_STREAM) ^ subject as u64) {
            Ok(model) => {
                out.accuracies.insert(subject, evaluate(&model, &test)?.accuracy);
            }
            Err(ForestError::DegenerateData(why)) => {
                out.skipped.insert(subject, format!("TooFewRows: {why}"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
