//! Test rigs and benchmarks shared by the command line and the test suites.

pub mod bench;
pub mod synth;
pub mod topology;

use std::sync::Arc;

use rand::{CryptoRng, RngCore};

use crate::compare::{run_local, CompareError, CompareMode};
use crate::he::ClientKeys;

pub use bench::{bench_latency, BenchConfig, BenchRecord, BenchReport, LevelSummary};
pub use topology::{deploy_slice, Topology, TopologyError, TopologyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveResult {
    pub mode: CompareMode,
    pub t: u32,
    pub passed: u64,
    pub total: u64,
}

impl ExhaustiveResult {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

/// Runs the comparison on every `(x, T)` pair of `t`-bit values and counts
/// agreements with the plaintext predicate.
pub fn exhaustive_comparison<R: RngCore + CryptoRng>(
    keys: &Arc<ClientKeys>,
    mode: CompareMode,
    rng: &mut R,
) -> Result<ExhaustiveResult, CompareError> {
    let t = keys.params.t;
    let top = 1u64 << t;
    let mut passed = 0;
    for x in 0..top {
        for threshold in 0..top {
            let run = run_local(keys, x, threshold, mode, None, rng)?;
            passed += u64::from(run.beta == mode.evaluate(threshold, x));
        }
    }
    Ok(ExhaustiveResult { mode, t, passed, total: top * top })
}
