//! Random forest training, prediction and evaluation.

mod metrics;
mod tree;
mod validation;

pub use metrics::{evaluate, evaluate_predictions, read_predictions_csv, EvalReport};
pub use tree::{
    bootstrap_indices, find_best_split, grow_tree, split_threshold, Split, TreeNode, TreeParams,
    N_CLASSES,
};
pub use validation::{
    cross_validate, fold_assignment, holdout_split, per_subject_evaluate, stratified_split,
    CvResult, FoldResult, PerSubjectResult,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{LabeledDataset, FEATURE_VERSION};
use crate::seed::derived_rng;
use crate::spectra::HydrationLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("feature version {found} does not match extractor version {expected}")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("need at least {k} subjects for grouped {k}-fold CV, found {found}")]
    TooFewGroups { k: usize, found: usize },
    #[error("invalid fold count {k} for {n} rows")]
    InvalidFolds { k: usize, n: usize },
    #[error("predictions: {0}")]
    Predictions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Features examined per node; `None` means `round(sqrt(n_features))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 80,
            max_depth: 5,
            max_features: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_estimators == 0 {
            return Err(ForestError::InvalidParams("n_estimators must be > 0".into()));
        }
        if self.max_depth == 0 {
            return Err(ForestError::InvalidParams("max_depth must be > 0".into()));
        }
        if self.max_features == Some(0) {
            return Err(ForestError::InvalidParams("max_features must be > 0".into()));
        }
        Ok(())
    }

    pub fn features_per_node(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| ((n_features as f64).sqrt().round() as usize).max(1))
            .min(n_features)
    }
}

/// Trained ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub n_features: usize,
    pub feature_version: u16,
    pub label_codes: [u8; N_CLASSES],
    pub rng_seed: u64,
}

/// Class label with the averaged leaf distribution it was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: HydrationLabel,
    pub probabilities: [f64; N_CLASSES],
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T; N_CLASSES]) -> usize {
    let mut best = 0;
    for c in 1..N_CLASSES {
        if values[c] > values[best] {
            best = c;
        }
    }
    best
}

/// Bootstrap-aggregated Gini trees. Each tree draws its own RNG from
/// `(seed, tree index)` so results do not depend on scheduling.
pub fn train_forest(
    data: &LabeledDataset,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ForestError> {
    params.validate()?;
    if data.len() < 10 {
        return Err(ForestError::DegenerateData(format!(
            "need at least 10 rows, got {}",
            data.len()
        )));
    }
    let classes = data.class_counts().iter().filter(|&&c| c > 0).count();
    if classes < 2 {
        return Err(ForestError::DegenerateData(
            "need at least two classes".into(),
        ));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        max_features: params.features_per_node(data.n_features()),
    };
    let build = |t: usize| {
        let mut rng = derived_rng(seed, t as u64);
        let sample = bootstrap_indices(data.len(), &mut rng);
        grow_tree(data, &sample, &tree_params, &mut rng)
    };
    #[cfg(feature = "parallel")]
    let trees = {
        use rayon::prelude::*;
        (0..params.n_estimators).into_par_iter().map(build).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees = (0..params.n_estimators).map(build).collect();
    Ok(ForestModel {
        trees,
        n_estimators: params.n_estimators,
        max_depth: params.max_depth,
        n_features: data.n_features(),
        feature_version: FEATURE_VERSION,
        label_codes: [0, 1, 2],
        rng_seed: seed,
    })
}

impl ForestModel {
    /// Mean of per-tree leaf class distributions, without version checks.
    pub fn probabilities(&self, x: &[f64]) -> [f64; N_CLASSES] {
        let mut acc = [0.0; N_CLASSES];
        for tree in &self.trees {
            let counts = tree.leaf(x);
            let total: u32 = counts.iter().sum();
            for c in 0..N_CLASSES {
                acc[c] += counts[c] as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        acc.map(|v| v / n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

/// Averaged leaf distribution and its argmax label.
pub fn predict(model: &ForestModel, x: &[f64]) -> Result<Prediction, ForestError> {
    if model.feature_version != FEATURE_VERSION {
        return Err(ForestError::VersionMismatch {
            expected: FEATURE_VERSION,
            found: model.feature_version,
        });
    }
    if x.len() != model.n_features {
        return Err(ForestError::DimensionMismatch {
            expected: model.n_features,
            found: x.len(),
        });
    }
    let probabilities = model.probabilities(x);
    let label = HydrationLabel::from_code(argmax(&probabilities) as u8).expect("3 classes");
    Ok(Prediction {
        label,
        probabilities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::HydrationLabel::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn model_with(trees: Vec<TreeNode>, n_features: usize) -> ForestModel {
        ForestModel {
            n_estimators: trees.len(),
            trees,
            max_depth: 1,
            n_features,
            feature_version: FEATURE_VERSION,
            label_codes: [0, 1, 2],
            rng_seed: 0,
        }
    }

    pub(crate) fn clusters(n_per: usize, seed: u64) -> LabeledDataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, (cx, cy)) in centers.iter().enumerate() {
            for _ in 0..n_per {
                rows.push(vec![cx + rng.random_range(-1.0..1.0), cy + rng.random_range(-1.0..1.0)]);
                labels.push(HydrationLabel::from_code(c as u8).unwrap());
            }
        }
        let n = rows.len();
        LabeledDataset::new(rows, labels, vec![0; n]).unwrap()
    }

    #[test]
    fn single_leaf_forest() {
        let m = model_with(vec![TreeNode::Leaf { class_counts: [5, 0, 0] }], 1);
        let p = predict(&m, &[0.3]).unwrap();
        assert_eq!(p.probabilities, [1.0, 0.0, 0.0]);
        assert_eq!(p.label, FullyHydrated);
    }

    #[test]
    fn ties_go_to_lower_code() {
        let m = model_with(
            vec![
                TreeNode::Leaf { class_counts: [1, 0, 0] },
                TreeNode::Leaf { class_counts: [0, 1, 0] },
            ],
            1,
        );
        let p = predict(&m, &[0.0]).unwrap();
        assert_eq!(p.probabilities, [0.5, 0.5, 0.0]);
        assert_eq!(p.label, FullyHydrated);
        let m = model_with(
            vec![
                TreeNode::Leaf { class_counts: [0, 0, 3] },
                TreeNode::Leaf { class_counts: [0, 2, 0] },
            ],
            1,
        );
        assert_eq!(predict(&m, &[0.0]).unwrap().label, MidHydrated);
    }

    #[test]
    fn version_and_dimension_checks() {
        let mut m = model_with(vec![TreeNode::Leaf { class_counts: [1, 0, 0] }], 2);
        assert!(matches!(predict(&m, &[0.0]), Err(ForestError::DimensionMismatch { .. })));
        m.feature_version += 1;
        assert!(matches!(predict(&m, &[0.0, 0.0]), Err(ForestError::VersionMismatch { .. })));
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let data = clusters(30, 3);
        let m = train_forest(&data, &ForestParams::default(), 11).unwrap();
        let report = evaluate(&m, &data).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!(m.trees.iter().all(|t| t.depth() <= 5));
        assert_eq!(m.trees.len(), 80);
    }

    #[test]
    fn stumps_follow_majority_side() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels = (0..40).map(|i| if i < 20 { FullyHydrated } else { Dehydrated }).collect();
        let data = LabeledDataset::new(rows, labels, vec![0; 40]).unwrap();
        let params = ForestParams { n_estimators: 15, max_depth: 1, max_features: None };
        let m = train_forest(&data, &params, 5).unwrap();
        for t in &m.trees {
            assert!(t.depth() <= 1);
        }
        assert_eq!(predict(&m, &[0.0]).unwrap().label, FullyHydrated);
        assert_eq!(predict(&m, &[39.0]).unwrap().label, Dehydrated);
    }

    #[test]
    fn training_is_deterministic() {
        let data = clusters(20, 8);
        let a = train_forest(&data, &ForestParams::default(), 42).unwrap();
        let b = train_forest(&data, &ForestParams::default(), 42).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = train_forest(&data, &ForestParams::default(), 43).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn degenerate_inputs() {
        let data = clusters(20, 1);
        let one_class = data.subset(&(0..20).collect::<Vec<_>>());
        assert!(matches!(
            train_forest(&one_class, &ForestParams::default(), 0),
            Err(ForestError::DegenerateData(_))
        ));
        let tiny = data.subset(&[0, 1, 2, 25, 26, 45]);
        assert!(matches!(
            train_forest(&tiny, &ForestParams::default(), 0),
            Err(ForestError::DegenerateData(_))
        ));
        let bad = ForestParams { max_depth: 0, ..Default::default() };
        assert!(matches!(train_forest(&data, &bad, 0), Err(ForestError::InvalidParams(_))));
    }

    #[test]
    fn bootstrap_unique_fraction() {
        let n = 500;
        let mut total = 0.0;
        let runs = 200;
        for s in 0..runs {
            let mut rng = derived_rng(s, 0);
            let mut idx = bootstrap_indices(n, &mut rng);
            assert_eq!(idx.len(), n);
            idx.sort_unstable();
            idx.dedup();
            total += idx.len() as f64 / n as f64;
        }
        let mean = total / runs as f64;
        assert!((mean - (1.0 - (-1.0f64).exp())).abs() < 0.03, "{mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn probabilities_are_distributions(seed in 0u64..1000, x in -2.0f64..12.0, y in -2.0f64..12.0) {
            let data = clusters(10, seed);
            let params = ForestParams { n_estimators: 7, ..Default::default() };
            let m = train_forest(&data, &params, seed).unwrap();
            let p = predict(&m, &[x, y]).unwrap();
            prop_assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert_eq!(argmax(&p.probabilities), p.label.code() as usize);
        }

        #[test]
        fn relabeling_permutes_predictions(seed in 0u64..500, perm_idx in 0usize..6) {
            const PERMS: [[u8; 3]; 6] = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
            let perm = PERMS[perm_idx];
            let data = clusters(12, seed);
            let mut relabeled = data.clone();
            for l in relabeled.labels.iter_mut() {
                *l = HydrationLabel::from_code(perm[l.code() as usize]).unwrap();
            }
            let params = ForestParams { n_estimators: 9, ..Default::default() };
            let a = train_forest(&data, &params, seed).unwrap();
            let b = train_forest(&relabeled, &params, seed).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let x = [rng.random_range(-2.0..12.0), rng.random_range(-2.0..12.0)];
                let pa = predict(&a, &x).unwrap();
                let pb = predict(&b, &x).unwrap();
                let max = pa.probabilities.iter().cloned().fold(f64::MIN, f64::max);
                let unique = pa.probabilities.iter().filter(|&&p| p == max).count() == 1;
                if unique {
                    prop_assert_eq!(pb.label.code(), perm[pa.label.code() as usize]);
                }
            }
        }
    }
}
