//! Flattened, quantized binary forest.
//!
//! Layout (little-endian):
//!
//! ```text
//! header  "HTRK" | format u16 | feature_version u16 | n_trees u16 | n_classes u8 | reserved u8
//! tree    node_count u16 | node_count x 8-byte nodes in preorder
//! node    feature u8 (255 = leaf) | threshold f32, or majority class in the low byte
//!         | link u16 (right child index for internal nodes, probability row for leaves)
//!         | reserved u8
//! probs   n_leaves x n_classes Q1.15 u16, each row summing to 32768
//! ```
//!
//! The left child of an internal node is always the next node.

use serde::{Deserialize, Serialize};

use super::EdgeError;
use crate::features::FEATURE_VERSION;
use crate::forest::{argmax, ForestModel, Prediction, TreeNode, N_CLASSES};
use crate::spectra::HydrationLabel;

pub const MAGIC: [u8; 4] = *b"HTRK";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 12;
pub const NODE_LEN: usize = 8;
pub const LEAF_TAG: u8 = 255;
pub const MAX_MODEL_BYTES: usize = 65_536;
/// 1.0 in Q1.15.
pub const Q15_ONE: u32 = 1 << 15;

/// Largest-remainder quantization of a count vector to Q1.15; rows sum to
/// exactly 32768 and each entry is within one unit of the exact value.
pub fn quantize_q15(counts: &[u32; N_CLASSES]) -> [u16; N_CLASSES] {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    assert!(total > 0, "leaf with no samples");
    let mut q = [0u64; N_CLASSES];
    let mut rem = [0u64; N_CLASSES];
    for c in 0..N_CLASSES {
        let num = counts[c] as u64 * Q15_ONE as u64;
        q[c] = num / total;
        rem[c] = num % total;
    }
    let mut missing = Q15_ONE as u64 - q.iter().sum::<u64>();
    while missing > 0 {
        let mut best = 0;
        for c in 1..N_CLASSES {
            if rem[c] > rem[best] {
                best = c;
            }
        }
        q[best] += 1;
        rem[best] = 0;
        missing -= 1;
    }
    q.map(|v| v as u16)
}

/// Validated binary model. Immutable; safe to share between readers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactModel {
    bytes: Vec<u8>,
    feature_version: u16,
    n_trees: usize,
    /// Byte offset of each tree's first node.
    tree_starts: Vec<usize>,
    prob_start: usize,
    n_leaves: usize,
    /// Smallest feature-vector length the model can read.
    min_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Internal { feature: u8, threshold: f32, right: u16 },
    Leaf { majority: u8, prob_row: u16 },
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn decode_node(raw: &[u8]) -> Node {
    let link = u16::from_le_bytes([raw[5], raw[6]]);
    if raw[0] == LEAF_TAG {
        Node::Leaf {
            majority: raw[1],
            prob_row: link,
        }
    } else {
        Node::Internal {
            feature: raw[0],
            threshold: f32::from_le_bytes([raw[1], raw[2], raw[3], raw[4]]),
            right: link,
        }
    }
}

fn encode_node(node: Node, out: &mut Vec<u8>) {
    match node {
        Node::Internal {
            feature,
            threshold,
            right,
        } => {
            out.push(feature);
            out.extend_from_slice(&threshold.to_le_bytes());
            out.extend_from_slice(&right.to_le_bytes());
        }
        Node::Leaf { majority, prob_row } => {
            out.push(LEAF_TAG);
            out.extend_from_slice(&[majority, 0, 0, 0]);
            out.extend_from_slice(&prob_row.to_le_bytes());
        }
    }
    out.push(0);
}

fn flatten(
    node: &TreeNode,
    nodes: &mut Vec<Node>,
    probs: &mut Vec<[u16; N_CLASSES]>,
) -> Result<(), EdgeError> {
    match node {
        TreeNode::Leaf { class_counts } => {
            if class_counts.iter().sum::<u32>() == 0 {
                return Err(EdgeError::InvalidModel("empty leaf".into()));
            }
            let q = quantize_q15(class_counts);
            let row = u16::try_from(probs.len())
                .map_err(|_| EdgeError::InvalidModel("more than 65535 leaves".into()))?;
            probs.push(q);
            nodes.push(Node::Leaf {
                majority: argmax(&q) as u8,
                prob_row: row,
            });
        }
        TreeNode::Internal {
            feature_index,
            threshold,
            left,
            right,
        } => {
            let feature = u8::try_from(*feature_index)
                .ok()
                .filter(|&f| f != LEAF_TAG)
                .ok_or_else(|| {
                    EdgeError::InvalidModel(format!("feature index {feature_index} exceeds 254"))
                })?;
            let at = nodes.len();
            nodes.push(Node::Leaf {
                majority: 0,
                prob_row: 0,
            });
            flatten(left, nodes, probs)?;
            let right_index = u16::try_from(nodes.len())
                .map_err(|_| EdgeError::InvalidModel("tree has more than 65535 nodes".into()))?;
            flatten(right, nodes, probs)?;
            nodes[at] = Node::Internal {
                feature,
                threshold: *threshold as f32,
                right: right_index,
            };
        }
    }
    Ok(())
}

/// Encodes `model` into the binary layout and validates the result.
pub fn compile_model(model: &ForestModel) -> Result<CompactModel, EdgeError> {
    if model.label_codes != [0, 1, 2] {
        return Err(EdgeError::InvalidModel("expected class codes 0, 1, 2".into()));
    }
    let n_trees = u16::try_from(model.trees.len())
        .map_err(|_| EdgeError::InvalidModel("more than 65535 trees".into()))?;
    if n_trees == 0 {
        return Err(EdgeError::InvalidModel("model has no trees".into()));
    }
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&model.feature_version.to_le_bytes());
    bytes.extend_from_slice(&n_trees.to_le_bytes());
    bytes.push(N_CLASSES as u8);
    bytes.push(0);

    let mut probs = Vec::new();
    for tree in &model.trees {
        let mut nodes = Vec::new();
        flatten(tree, &mut nodes, &mut probs)?;
        bytes.extend_from_slice(&(nodes.len() as u16).to_le_bytes());
        for node in nodes {
            encode_node(node, &mut bytes);
        }
    }
    for row in &probs {
        for q in row {
            bytes.extend_from_slice(&q.to_le_bytes());
        }
    }
    if bytes.len() > MAX_MODEL_BYTES {
        return Err(EdgeError::ModelTooLarge {
            size: bytes.len(),
            limit: MAX_MODEL_BYTES,
        });
    }
    CompactModel::from_bytes(bytes)
}

impl CompactModel {
    /// Parses and bounds-checks a serialized model.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, EdgeError> {
        let corrupt = |why: String| EdgeError::CorruptModel(why);
        if bytes.len() > MAX_MODEL_BYTES {
            return Err(EdgeError::ModelTooLarge {
                size: bytes.len(),
                limit: MAX_MODEL_BYTES,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[0..4] != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let format = read_u16(&bytes, 4);
        if format != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported format version {format}")));
        }
        let feature_version = read_u16(&bytes, 6);
        let n_trees = read_u16(&bytes, 8) as usize;
        if bytes[10] as usize != N_CLASSES {
            return Err(corrupt(format!("expected {N_CLASSES} classes, found {}", bytes[10])));
        }
        if n_trees == 0 {
            return Err(corrupt("no trees".into()));
        }

        let mut at = HEADER_LEN;
        let mut tree_starts = Vec::with_capacity(n_trees);
        let mut leaf_rows = Vec::new();
        let mut min_features = 0;
        for t in 0..n_trees {
            if at + 2 > bytes.len() {
                return Err(corrupt(format!("tree {t} header out of bounds")));
            }
            let count = read_u16(&bytes, at) as usize;
            at += 2;
            if count == 0 || at + count * NODE_LEN > bytes.len() {
                return Err(corrupt(format!("tree {t} nodes out of bounds")));
            }
            tree_starts.push(at);
            // Each index must be reached exactly once from the root.
            let mut reached = vec![false; count];
            reached[0] = true;
            for i in 0..count {
                if !reached[i] {
                    return Err(corrupt(format!("tree {t} node {i} unreachable")));
                }
                match decode_node(&bytes[at + i * NODE_LEN..at + (i + 1) * NODE_LEN]) {
                    Node::Internal {
                        feature,
                        threshold,
                        right,
                    } => {
                        let right = right as usize;
                        if !threshold.is_finite() {
                            return Err(corrupt(format!("tree {t} node {i} threshold")));
                        }
                        if right <= i + 1 || right >= count || reached[right] {
                            return Err(corrupt(format!(
                                "tree {t} node {i} right child {right} out of bounds"
                            )));
                        }
                        reached[i + 1] = true;
                        reached[right] = true;
                        min_features = min_features.max(feature as usize + 1);
                    }
                    Node::Leaf { majority, prob_row } => {
                        if majority as usize >= N_CLASSES {
                            return Err(corrupt(format!("tree {t} node {i} majority class")));
                        }
                        leaf_rows.push(prob_row as usize);
                    }
                }
            }
            // structural check: the preorder layout closes exactly at `count`
            if subtree_end(&bytes, at, 0)? != count {
                return Err(corrupt(format!("tree {t} has trailing nodes")));
            }
            at += count * NODE_LEN;
        }
        let n_leaves = leaf_rows.len();
        let prob_len = n_leaves * N_CLASSES * 2;
        if bytes.len() != at + prob_len {
            return Err(corrupt(format!(
                "expected {} bytes of probabilities, found {}",
                prob_len,
                bytes.len().saturating_sub(at)
            )));
        }
        if leaf_rows.iter().any(|&r| r >= n_leaves) {
            return Err(corrupt("leaf probability row out of range".into()));
        }
        for row in 0..n_leaves {
            let sum: u32 = (0..N_CLASSES)
                .map(|c| read_u16(&bytes, at + (row * N_CLASSES + c) * 2) as u32)
                .sum();
            if sum.abs_diff(Q15_ONE) > N_CLASSES as u32 {
                return Err(corrupt(format!("probability row {row} sums to {sum}")));
            }
        }
        Ok(Self {
            bytes,
            feature_version,
            n_trees,
            tree_starts,
            prob_start: at,
            n_leaves,
            min_features,
        })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn feature_version(&self) -> u16 {
        self.feature_version
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn min_features(&self) -> usize {
        self.min_features
    }

    fn node(&self, tree: usize, index: usize) -> Node {
        let at = self.tree_starts[tree] + index * NODE_LEN;
        decode_node(&self.bytes[at..at + NODE_LEN])
    }

    fn prob(&self, row: usize, class: usize) -> u16 {
        read_u16(&self.bytes, self.prob_start + (row * N_CLASSES + class) * 2)
    }

    fn leaf_row(&self, tree: usize, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.node(tree, i) {
                Node::Leaf { prob_row, .. } => return prob_row as usize,
                Node::Internal {
                    feature,
                    threshold,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold as f64 {
                        i + 1
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    /// Sum of Q1.15 leaf rows over all trees.
    fn accumulate(&self, x: &[f64]) -> [u32; N_CLASSES] {
        let mut acc = [0u32; N_CLASSES];
        for t in 0..self.n_trees {
            let row = self.leaf_row(t, x);
            for (c, a) in acc.iter_mut().enumerate() {
                *a += self.prob(row, c) as u32;
            }
        }
        acc
    }

    /// Rebuilds an equivalent [`ForestModel`]; leaf counts are the Q1.15
    /// values, so recompiling reproduces the same bytes.
    pub fn decode(&self) -> ForestModel {
        let trees: Vec<TreeNode> = (0..self.n_trees).map(|t| self.decode_tree(t, 0)).collect();
        let max_depth = trees.iter().map(TreeNode::depth).max().unwrap_or(0);
        ForestModel {
            n_estimators: trees.len(),
            trees,
            max_depth,
            n_features: self.min_features,
            feature_version: self.feature_version,
            label_codes: [0, 1, 2],
            rng_seed: 0,
        }
    }

    fn decode_tree(&self, tree: usize, index: usize) -> TreeNode {
        match self.node(tree, index) {
            Node::Leaf { prob_row, .. } => TreeNode::Leaf {
                class_counts: std::array::from_fn(|c| self.prob(prob_row as usize, c) as u32),
            },
            Node::Internal {
                feature,
                threshold,
                right,
            } => TreeNode::Internal {
                feature_index: feature as usize,
                threshold: threshold as f64,
                left: Box::new(self.decode_tree(tree, index + 1)),
                right: Box::new(self.decode_tree(tree, right as usize)),
            },
        }
    }
}

/// Index one past the subtree rooted at `index`, or an error if the subtree
/// is not laid out contiguously in preorder.
fn subtree_end(bytes: &[u8], start: usize, index: usize) -> Result<usize, EdgeError> {
    let raw = &bytes[start + index * NODE_LEN..start + (index + 1) * NODE_LEN];
    match decode_node(raw) {
        Node::Leaf { .. } => Ok(index + 1),
        Node::Internal { right, .. } => {
            let left_end = subtree_end(bytes, start, index + 1)?;
            if left_end != right as usize {
                return Err(EdgeError::CorruptModel(format!(
                    "node {index}: right child {right} does not follow left subtree ending at {left_end}"
                )));
            }
            subtree_end(bytes, start, right as usize)
        }
    }
}

/// Integer-accumulated forest vote. Performs no heap allocation.
pub fn infer(compact: &CompactModel, x: &[f64]) -> Result<Prediction, EdgeError> {
    if compact.feature_version != FEATURE_VERSION {
        return Err(EdgeError::VersionMismatch {
            expected: FEATURE_VERSION,
            found: compact.feature_version,
        });
    }
    if x.len() < compact.min_features {
        return Err(EdgeError::DimensionMismatch {
            expected: compact.min_features,
            found: x.len(),
        });
    }
    let acc = compact.accumulate(x);
    let label = HydrationLabel::from_code(argmax(&acc) as u8).expect("3 classes");
    let scale = (compact.n_trees as f64) * Q15_ONE as f64;
    Ok(Prediction {
        label,
        probabilities: acc.map(|a| a as f64 / scale),
    })
}

/// Rows where the compiled model's label differs from the source model's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxAudit {
    pub checked: usize,
    pub disagreements: Vec<usize>,
}

impl ArgmaxAudit {
    pub fn agreement(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            1.0 - self.disagreements.len() as f64 / self.checked as f64
        }
    }
}

pub fn audit_argmax(
    model: &ForestModel,
    compact: &CompactModel,
    rows: &[Vec<f64>],
) -> Result<ArgmaxAudit, EdgeError> {
    let mut disagreements = Vec::new();
    for (i, x) in rows.iter().enumerate() {
        let reference = crate::forest::predict(model, x)?;
        if infer(compact, x)?.label != reference.label {
            disagreements.push(i);
        }
    }
    Ok(ArgmaxAudit {
        checked: rows.len(),
        disagreements,
    })
}

/// [`compile_model`] followed by a hard argmax audit over `corpus`.
pub fn compile_audited(
    model: &ForestModel,
    corpus: &[Vec<f64>],
) -> Result<(CompactModel, ArgmaxAudit), EdgeError> {
    let compact = compile_model(model)?;
    let audit = audit_argmax(model, &compact, corpus)?;
    if !audit.disagreements.is_empty() {
        return Err(EdgeError::ArgmaxFlip {
            rows: audit.disagreements,
        });
    }
    Ok((compact, audit))
}
