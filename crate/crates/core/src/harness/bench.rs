//! Latency benchmark over depth-targeted queries.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use super::synth::query_for_level;
use super::topology::Topology;
use crate::he::ProtocolParams;
use crate::net::Network;
use crate::tree::TreeModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRecord {
    pub termination_level: usize,
    pub wall_ms: f64,
    pub hop_count: u32,
    pub comparison_count: u32,
    /// Label matched the plaintext walk.
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchConfig {
    pub t: u32,
    pub kappa: u32,
    pub paillier_bits: u32,
    pub dgk_bits: u32,
    pub hop_delay_ms: u64,
    pub depth: usize,
    pub bogus_continuation: bool,
}

impl BenchConfig {
    pub fn new(params: &ProtocolParams, hop_delay_ms: u64, depth: usize, bogus_continuation: bool) -> Self {
        Self {
            t: params.t,
            kappa: params.kappa,
            paillier_bits: params.paillier_bits,
            dgk_bits: params.dgk_bits,
            hop_delay_ms,
            depth,
            bogus_continuation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub runs: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub records: Vec<BenchRecord>,
    /// Set when the run stopped early; `records` holds what completed.
    pub aborted: Option<String>,
}

impl BenchReport {
    /// Mean and median wall time per termination level, ascending.
    pub fn per_level(&self) -> Vec<LevelSummary> {
        let mut levels: Vec<usize> = self.records.iter().map(|r| r.termination_level).collect();
        levels.sort_unstable();
        levels.dedup();
        levels
            .into_iter()
            .map(|level| {
                let mut times: Vec<f64> =
                    self.records.iter().filter(|r| r.termination_level == level).map(|r| r.wall_ms).collect();
                times.sort_by(f64::total_cmp);
                let runs = times.len();
                LevelSummary {
                    level,
                    runs,
                    mean_ms: times.iter().sum::<f64>() / runs as f64,
                    median_ms: times[runs.div_ceil(2) - 1],
                }
            })
            .collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.per_level().windows(2).all(|w| w[0].mean_ms <= w[1].mean_ms)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("termination_level,wall_ms,hop_count,comparison_count,correct\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.3},{},{},{}",
                r.termination_level, r.wall_ms, r.hop_count, r.comparison_count, r.correct
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# t={} kappa={} paillier={} dgk={} hop_delay_ms={} depth={} bogus_continuation={}",
            c.t, c.kappa, c.paillier_bits, c.dgk_bits, c.hop_delay_ms, c.depth, c.bogus_continuation
        );
        let _ = writeln!(
            out,
            "# Absolute times depend on this machine and key sizes; only the ratios between levels and their ordering are meaningful."
        );
        let levels = self.per_level();
        let deepest = levels.last().map_or(f64::NAN, |l| l.mean_ms);
        let _ = writeln!(out, "{:>6} {:>5} {:>10} {:>10} {:>8}", "level", "runs", "mean_ms", "median_ms", "ratio");
        for l in &levels {
            let _ = writeln!(
                out,
                "{:>6} {:>5} {:>10.1} {:>10.1} {:>8.3}",
                l.level,
                l.runs,
                l.mean_ms,
                l.median_ms,
                l.mean_ms / deepest
            );
        }
        let wrong = self.records.iter().filter(|r| !r.correct).count();
        let _ = writeln!(out, "monotone in level: {}", if self.is_monotone() { "yes" } else { "no" });
        let _ = writeln!(out, "label mismatches: {wrong}");
        if let Some(reason) = &self.aborted {
            let _ = writeln!(out, "aborted: {reason}");
        }
        out
    }
}

/// Runs `runs` queries ending at each of `levels`, one at a time. Queries
/// come from inverting the plaintext path to a leaf of the target level.
pub fn bench_latency<N: Network + Clone, R: Rng>(
    topology: &Topology<N>,
    model: &TreeModel,
    levels: &[usize],
    runs: usize,
    config: BenchConfig,
    rng: &mut R,
) -> BenchReport {
    let mut report = BenchReport { config, records: Vec::new(), aborted: None };
    let t = config.t;
    for &level in levels {
        for _ in 0..runs {
            let Some(fv) = query_for_level(model, level, t, rng) else {
                report.aborted = Some(format!("no query reaches a leaf on level {level}"));
                return report;
            };
            let (expected, expected_level) = model.plaintext_classify(&fv);
            debug_assert_eq!(expected_level, level);
            match topology.classify(&fv) {
                Ok((result, trace)) => report.records.push(BenchRecord {
                    termination_level: expected_level,
                    wall_ms: result.wall.as_secs_f64() * 1000.0,
                    hop_count: trace.forwards,
                    comparison_count: result.comparisons,
                    correct: result.class_id == expected,
                }),
                Err(e) => {
                    report.aborted = Some(e.to_string());
                    return report;
                }
            }
        }
    }
    report
}
