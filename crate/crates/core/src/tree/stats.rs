use serde::Serialize;

use super::{FeatureVector, TreeError, TreeModel};

/// Distribution of the level at which rows reach a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthStats {
    pub average: f64,
    pub median: usize,
    pub third_quartile: usize,
    pub max: usize,
    pub size: usize,
}

pub fn termination_levels(model: &TreeModel, dataset: &[FeatureVector]) -> Vec<usize> {
    dataset.iter().map(|fv| model.plaintext_classify(fv).1).collect()
}

/// Median and quartile use the nearest-rank method: the value at 1-based
/// rank `⌈p·n⌉` of the sorted levels.
pub fn depth_stats(model: &TreeModel, dataset: &[FeatureVector]) -> Result<DepthStats, TreeError> {
    if dataset.is_empty() {
        return Err(TreeError::Parameter("depth statistics need a non-empty dataset".into()));
    }
    let mut levels = termination_levels(model, dataset);
    levels.sort_unstable();
    let n = levels.len();
    let rank = |num: usize, den: usize| levels[(num * n).div_ceil(den).max(1) - 1];
    Ok(DepthStats {
        average: levels.iter().sum::<usize>() as f64 / n as f64,
        median: rank(1, 2),
        third_quartile: rank(3, 4),
        max: levels[n - 1],
        size: n,
    })
}
