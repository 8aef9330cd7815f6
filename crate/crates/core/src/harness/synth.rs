//! Random trees and depth-targeted queries.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::compare::CompareMode;
use crate::tree::{Attribute, AttributeKind, AttributeSchema, FeatureVector, TreeModel, TreeNode};

#[derive(Debug, Clone, Copy)]
pub struct TreeShape {
    /// Number of levels; at least one path reaches the last level.
    pub depth: usize,
    pub numeric: usize,
    pub categorical: usize,
    /// Categories per categorical attribute.
    pub categories: u64,
    pub classes: usize,
    /// Chance that a node above the last level is a leaf.
    pub leaf_probability: f64,
    pub t: u32,
}

impl TreeShape {
    pub fn mixed(depth: usize, t: u32) -> Self {
        Self { depth, numeric: 3, categorical: 3, categories: 4, classes: 3, leaf_probability: 0.3, t }
    }
}

pub fn schema_for(shape: &TreeShape) -> AttributeSchema {
    let mut attributes: Vec<Attribute> = (0..shape.numeric).map(|i| Attribute::numeric(format!("n{i}"))).collect();
    attributes.extend(
        (0..shape.categorical)
            .map(|i| Attribute::categorical(format!("c{i}"), (0..shape.categories).map(|c| format!("v{c}")))),
    );
    AttributeSchema { attributes, classes: (0..shape.classes.max(1)).map(|c| format!("class{c}")).collect() }
}

/// Builds a random valid tree by recursion from the root.
pub fn random_tree<R: Rng>(shape: &TreeShape, rng: &mut R) -> TreeModel {
    let schema = schema_for(shape);
    let mut levels: Vec<Vec<TreeNode>> = vec![Vec::new(); shape.depth.max(1)];
    grow(&schema, shape, 0, true, &mut levels, rng);
    TreeModel { schema, levels }
}

fn grow<R: Rng>(
    schema: &AttributeSchema,
    shape: &TreeShape,
    level: usize,
    deep: bool,
    levels: &mut Vec<Vec<TreeNode>>,
    rng: &mut R,
) -> usize {
    let index = levels[level].len();
    let last = level + 1 >= levels.len();
    if last || schema.attributes.is_empty() || (!deep && rng.gen_bool(shape.leaf_probability)) {
        levels[level].push(TreeNode::leaf(rng.gen_range(0..schema.classes.len())));
        return index;
    }
    levels[level].push(TreeNode::leaf(0));
    let attribute = rng.gen_range(0..schema.attributes.len());
    let attr = &schema.attributes[attribute];
    let (mode, threshold) = match attr.kind {
        AttributeKind::Numeric => (CompareMode::Numeric, rng.gen_range(0..1u64 << shape.t)),
        AttributeKind::Categorical => {
            let codes: Vec<u64> = attr.encoding.values().copied().collect();
            (CompareMode::Equality, *codes.choose(rng).expect("categories"))
        }
    };
    let deep_true = deep && rng.gen_bool(0.5);
    let true_child = grow(schema, shape, level + 1, deep_true, levels, rng);
    let false_child = grow(schema, shape, level + 1, deep && !deep_true, levels, rng);
    levels[level][index] = TreeNode::internal(attribute, threshold, mode, true_child, false_child);
    index
}

/// A tall sparse tree: a spine of `depth − 1` internal nodes, each with a
/// leaf on its false side, ending in two leaves on the last level. A query
/// can end at any level from 1 to `depth − 1`. Needs `7·depth < 2^t`.
pub fn spine_tree(depth: usize, attributes: usize, t: u32) -> TreeModel {
    assert!(depth >= 2 && attributes >= 1);
    let schema = AttributeSchema {
        attributes: (0..attributes).map(|i| Attribute::numeric(format!("x{i}"))).collect(),
        classes: (0..depth).map(|l| format!("exit{l}")).collect(),
    };
    // Thresholds rise with the level so every exit is reachable whichever
    // attributes repeat along the spine.
    let threshold = |l: usize| (l as u64 * 7 + 3).min((1u64 << t) - 1);
    let mut levels = Vec::with_capacity(depth);
    for l in 0..depth {
        let spine = TreeNode::internal(l % attributes, threshold(l), CompareMode::Numeric, 0, 1);
        levels.push(match l {
            0 => vec![spine],
            l if l + 1 == depth => vec![TreeNode::leaf(l), TreeNode::leaf(l)],
            l => vec![spine, TreeNode::leaf(l)],
        });
    }
    TreeModel { schema, levels }
}

/// Uniformly random encoded feature vector.
pub fn random_features<R: Rng>(schema: &AttributeSchema, t: u32, rng: &mut R) -> FeatureVector {
    schema
        .attributes
        .iter()
        .map(|a| match a.kind {
            AttributeKind::Numeric => rng.gen_range(0..1u64 << t),
            AttributeKind::Categorical => *a.encoding.values().collect::<Vec<_>>().choose(rng).copied().unwrap_or(&0),
        })
        .collect()
}

/// Nodes `(level, index)` of all leaves on `level`.
pub fn leaves_at(model: &TreeModel, level: usize) -> Vec<(usize, usize)> {
    model.levels.get(level).map_or_else(Vec::new, |nodes| {
        nodes.iter().enumerate().filter(|(_, n)| n.is_leaf()).map(|(k, _)| (level, k)).collect()
    })
}

/// Root-to-node path as `(level, index, branch taken)` for each ancestor.
fn path_to(model: &TreeModel, level: usize, index: usize) -> Option<Vec<(usize, usize, bool)>> {
    let mut parent: HashMap<(usize, usize), (usize, bool)> = HashMap::new();
    for (l, nodes) in model.levels.iter().enumerate() {
        for (k, node) in nodes.iter().enumerate() {
            if let TreeNode::Internal { true_child, false_child, .. } = node {
                if let Some(c) = true_child {
                    parent.insert((l + 1, *c), (k, true));
                }
                if let Some(c) = false_child {
                    parent.insert((l + 1, *c), (k, false));
                }
            }
        }
    }
    let mut path = Vec::new();
    let (mut l, mut k) = (level, index);
    while l > 0 {
        let &(pk, branch) = parent.get(&(l, k))?;
        path.push((l - 1, pk, branch));
        l -= 1;
        k = pk;
    }
    path.reverse();
    Some(path)
}

/// Finds a feature vector whose plaintext walk ends at leaf `(level,
/// index)` by inverting each branch predicate on the path. Inclusive
/// boundaries `x = T` are chosen half the time a lower bound is active.
pub fn query_for_leaf<R: Rng>(
    model: &TreeModel,
    level: usize,
    index: usize,
    t: u32,
    rng: &mut R,
) -> Option<FeatureVector> {
    let path = path_to(model, level, index)?;
    let top = (1u64 << t) - 1;
    let n = model.schema.attributes.len();
    let mut lo = vec![0u64; n];
    let mut hi = vec![top; n];
    let mut fixed: Vec<Option<u64>> = vec![None; n];
    let mut excluded: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); n];
    for (l, k, branch) in path {
        let TreeNode::Internal { attribute, threshold, mode, .. } = &model.levels[l][k] else { return None };
        let (a, thr) = (*attribute, *threshold);
        match (mode, branch) {
            (CompareMode::Numeric, true) => lo[a] = lo[a].max(thr),
            (CompareMode::Numeric, false) => hi[a] = hi[a].min(thr.checked_sub(1)?),
            (CompareMode::Equality, true) => {
                if fixed[a].is_some_and(|f| f != thr) {
                    return None;
                }
                fixed[a] = Some(thr);
            }
            (CompareMode::Equality, false) => {
                excluded[a].insert(thr);
            }
        }
    }
    let mut fv = Vec::with_capacity(n);
    for a in 0..n {
        if lo[a] > hi[a] {
            return None;
        }
        let value = if let Some(f) = fixed[a] {
            if excluded[a].contains(&f) || f < lo[a] || f > hi[a] {
                return None;
            }
            f
        } else if model.schema.attributes[a].kind == AttributeKind::Categorical {
            let allowed: Vec<u64> = model.schema.attributes[a]
                .encoding
                .values()
                .copied()
                .filter(|c| !excluded[a].contains(c) && (lo[a]..=hi[a]).contains(c))
                .collect();
            *allowed.choose(rng)?
        } else {
            let mut v = if lo[a] > 0 && rng.gen_bool(0.5) { lo[a] } else { rng.gen_range(lo[a]..=hi[a]) };
            let mut tries = 0;
            while excluded[a].contains(&v) {
                v = rng.gen_range(lo[a]..=hi[a]);
                tries += 1;
                if tries > 64 {
                    return None;
                }
            }
            v
        };
        fv.push(value);
    }
    Some(fv)
}

/// A query ending at some leaf of `level`, if one is reachable.
pub fn query_for_level<R: Rng>(model: &TreeModel, level: usize, t: u32, rng: &mut R) -> Option<FeatureVector> {
    let mut leaves = leaves_at(model, level);
    leaves.shuffle(rng);
    leaves.into_iter().find_map(|(l, k)| query_for_leaf(model, l, k, t, rng))
}
