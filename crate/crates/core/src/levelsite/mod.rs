//! Level-site service logic: find the in-scope node of this level, run one
//! comparison with the client (or return the encrypted leaf), and pass the
//! traversal on to the next level.

mod daemon;
mod telemetry;

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compare::{CompareError, CompareMode, SessionId};
use crate::he::{Ciphertext, HeError};
use crate::tree::{EncNode, LevelSlice, TreeError};
use crate::wire::WireError;

pub use daemon::{run_site_comparison, LevelSite};
pub use telemetry::{Telemetry, Trace};

/// What travels from one level-site to the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversalToken {
    pub session: SessionId,
    /// Node index within the receiving level. Arbitrary on bogus hops.
    pub next_index: usize,
    /// The client's encrypted feature vector `⟦x⟧`.
    pub enc_features: Vec<Ciphertext>,
    /// Where comparison rounds and the result go.
    pub client_endpoint: String,
    /// Dummy continuation after the real query already reached a leaf.
    pub bogus: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteConfig {
    pub level: usize,
    /// Endpoint of the next level; absent on the last level.
    pub downstream: Option<String>,
    /// Uniform random delay in milliseconds before a result or traversal
    /// leaves the site.
    pub padding: Option<(u64, u64)>,
    pub bogus_continuation: bool,
}

impl SiteConfig {
    pub fn new(level: usize, downstream: Option<String>) -> Self {
        Self { level, downstream, padding: None, bogus_continuation: false }
    }
}

#[derive(Debug, Error)]
pub enum SiteError {
    #[error("node index {index} outside level of {len} nodes")]
    BadIndex { index: usize, len: usize },
    #[error("token carries {got} features, slice expects {expected}")]
    FeatureCount { expected: usize, got: usize },
    #[error("no slice installed")]
    NotReady,
    #[error("setup rejected: {0}")]
    Setup(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("downstream {endpoint} unreachable: {source}")]
    Downstream { endpoint: String, source: std::io::Error },
    #[error("client {endpoint} unreachable: {source}")]
    Client { endpoint: String, source: std::io::Error },
    #[error("peer reported error {code}: {text}")]
    Remote { code: u16, text: String },
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// What a level-site does with one traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step<'a> {
    /// In-scope node is a leaf: send the encrypted class to the client.
    Reply { enc_class: &'a Ciphertext },
    /// In-scope node is internal: compare, then forward.
    Compare {
        attribute: usize,
        enc_neg_threshold: &'a Ciphertext,
        mode: CompareMode,
        true_child: usize,
        false_child: usize,
    },
    /// Dummy traversal: do a comparison's worth of local work and forward.
    Bogus { mode: CompareMode },
}

/// Locates the node a token addresses. Every node of the level is visited
/// whatever the index, so the scan takes the same time for any node.
pub fn plan_traversal<'a>(slice: &'a LevelSlice, token: &TraversalToken) -> Result<Step<'a>, SiteError> {
    if token.enc_features.len() != slice.attributes {
        return Err(SiteError::FeatureCount { expected: slice.attributes, got: token.enc_features.len() });
    }
    let len = slice.nodes.len();
    let target = if token.bogus { token.next_index % len } else { token.next_index };
    let mut selected = None;
    for (k, node) in slice.nodes.iter().enumerate() {
        if k == target {
            selected = Some(node);
        }
    }
    let node = selected.ok_or(SiteError::BadIndex { index: token.next_index, len })?;
    Ok(match (token.bogus, node) {
        (true, EncNode::Internal { mode, .. }) => Step::Bogus { mode: *mode },
        (true, EncNode::Leaf { .. }) => Step::Bogus { mode: CompareMode::Numeric },
        (false, EncNode::Leaf { enc_class }) => Step::Reply { enc_class },
        (false, EncNode::Internal { attribute, enc_neg_threshold, mode, true_child, false_child }) => Step::Compare {
            attribute: *attribute,
            enc_neg_threshold,
            mode: *mode,
            true_child: *true_child,
            false_child: *false_child,
        },
    })
}

/// Draws one padding delay, uniform over `[min, max]` milliseconds.
pub fn padding_delay<R: Rng>(padding: Option<(u64, u64)>, rng: &mut R) -> Duration {
    match padding {
        None | Some((0, 0)) => Duration::ZERO,
        Some((lo, hi)) => Duration::from_millis(rng.gen_range(lo.min(hi)..=hi.max(lo))),
    }
}

/// Sleeps for one freshly drawn padding delay and returns it.
pub fn apply_padding(config: &SiteConfig) -> Duration {
    let delay = padding_delay(config.padding, &mut rand::thread_rng());
    if !delay.is_zero() {
        std::thread::sleep(delay);
    }
    delay
}

#[cfg(test)]
mod tests;
