//! Batches of random appendix problems and their active-set statistics.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::OptimizerConfig;
use crate::driver::optimize;
use crate::error::{PgdError, Result};
use crate::problem::AppendixProblem;

pub const DEFAULT_TRIALS: usize = 500;
/// Trial count for full-size statistics runs.
pub const FULL_TRIALS: usize = 30_000;

pub const CSV_HEADER: &str =
    "k,m,trials,pgd_iterations,projections,step6_failures,step6c_failures,mean_as_iters,max_as_iters,errored_trials";

/// Stopping rule used for every trial: `‖Δφ‖/α < 1e-6` or 2000 iterations.
pub fn bench_optimizer_config() -> OptimizerConfig {
    OptimizerConfig {
        max_iterations: 2000,
        cost_rel_tol: None,
        pg_tol: Some(1e-6),
        ..OptimizerConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialError {
    pub trial: u64,
    pub message: String,
}

/// Counters summed over trials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchStats {
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub trials: usize,
    pub pgd_iterations: u64,
    /// Multiplier solves (step 5 or step 6b).
    pub projections: u64,
    pub step6_failures: u64,
    pub step6c_failures: u64,
    /// Most solves needed by a single projection.
    pub max_as_iters: u64,
    /// Trials that stopped on the iteration cap.
    pub unconverged: u64,
    pub errors: Vec<TrialError>,
}

impl BenchStats {
    pub fn empty(k: usize, m: usize, seed: u64) -> Self {
        Self {
            k,
            m,
            seed,
            trials: 0,
            pgd_iterations: 0,
            projections: 0,
            step6_failures: 0,
            step6c_failures: 0,
            max_as_iters: 0,
            unconverged: 0,
            errors: Vec::new(),
        }
    }

    /// Mean solves per projection, i.e. per PGD iteration.
    pub fn mean_as_iters(&self) -> f64 {
        if self.pgd_iterations == 0 {
            0.0
        } else {
            self.projections as f64 / self.pgd_iterations as f64
        }
    }

    pub fn step6_fraction(&self) -> f64 {
        if self.projections == 0 {
            0.0
        } else {
            self.step6_failures as f64 / self.projections as f64
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{},{}",
            self.k,
            self.m,
            self.trials,
            self.pgd_iterations,
            self.projections,
            self.step6_failures,
            self.step6c_failures,
            self.mean_as_iters(),
            self.max_as_iters,
            self.errors.len()
        )
    }
}

/// Counter-wise sum of two batches of the same configuration.
pub fn merge(a: &BenchStats, b: &BenchStats) -> Result<BenchStats> {
    if (a.k, a.m, a.seed) != (b.k, b.m, b.seed) {
        return Err(PgdError::InvalidParameter {
            name: "stats",
            reason: format!(
                "cannot merge (k={}, m={}, seed={}) with (k={}, m={}, seed={})",
                a.k, a.m, a.seed, b.k, b.m, b.seed
            ),
        });
    }
    let mut errors = a.errors.clone();
    errors.extend(b.errors.iter().cloned());
    errors.sort_by_key(|e| e.trial);
    Ok(BenchStats {
        k: a.k,
        m: a.m,
        seed: a.seed,
        trials: a.trials + b.trials,
        pgd_iterations: a.pgd_iterations + b.pgd_iterations,
        projections: a.projections + b.projections,
        step6_failures: a.step6_failures + b.step6_failures,
        step6c_failures: a.step6c_failures + b.step6c_failures,
        max_as_iters: a.max_as_iters.max(b.max_as_iters),
        unconverged: a.unconverged + b.unconverged,
        errors,
    })
}

/// Runs one trial of the batch seeded by `seed`.
pub fn run_trial(k: usize, m: usize, seed: u64, trial: u64, config: &OptimizerConfig) -> BenchStats {
    let mut s = BenchStats::empty(k, m, seed);
    s.trials = 1;
    let run = AppendixProblem::for_trial(k, m, seed, trial)
        .to_problem()
        .and_then(|p| optimize(&p, &vec![0.0; k], config));
    match run {
        Ok(h) => {
            s.pgd_iterations = h.records.len() as u64;
            for r in &h.records {
                s.projections += r.solves as u64;
                s.step6_failures += r.fallback_6 as u64;
                s.step6c_failures += r.fallback_6c as u64;
                s.max_as_iters = s.max_as_iters.max(r.solves as u64);
            }
            if h.stop == crate::driver::StopReason::MaxIterations {
                s.unconverged = 1;
            }
        }
        Err(e) => s.errors.push(TrialError {
            trial,
            message: e.to_string(),
        }),
    }
    s
}

/// Trials `range` of the batch, in parallel; independent of scheduling.
pub fn run_range(k: usize, m: usize, seed: u64, range: Range<u64>, config: &OptimizerConfig) -> BenchStats {
    let per_trial: Vec<BenchStats> = range
        .into_par_iter()
        .map(|t| run_trial(k, m, seed, t, config))
        .collect();
    per_trial
        .iter()
        .try_fold(BenchStats::empty(k, m, seed), |acc, s| merge(&acc, s))
        .expect("trials share one configuration")
}

pub fn run_batch(k: usize, m: usize, trials: usize, seed: u64, config: &OptimizerConfig) -> Result<BenchStats> {
    if trials == 0 {
        return Err(PgdError::InvalidParameter {
            name: "trials",
            reason: "must be at least 1".into(),
        });
    }
    if k == 0 {
        return Err(PgdError::InvalidParameter {
            name: "k",
            reason: "must be at least 1".into(),
        });
    }
    Ok(run_range(k, m, seed, 0..trials as u64, config))
}

pub fn emit_csv(stats: &[BenchStats]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in stats {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

/// One text table per metric: rows are constraint counts, columns DOF counts.
pub fn emit_table(stats: &[BenchStats]) -> String {
    let ks: BTreeSet<usize> = stats.iter().map(|s| s.k).collect();
    let ms: BTreeSet<usize> = stats.iter().map(|s| s.m).collect();
    let metrics: [(&str, fn(&BenchStats) -> String); 4] = [
        ("Total number of PGD iterations", |s| s.pgd_iterations.to_string()),
        ("Total number of projections (step 5 or step 6b)", |s| s.projections.to_string()),
        ("Step 6 failures", |s| s.step6_failures.to_string()),
        ("Step 6c failures", |s| s.step6c_failures.to_string()),
    ];
    let mut out = String::new();
    for (title, value) in metrics {
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:>8}", "m \\ k");
        for k in &ks {
            let _ = write!(out, "{k:>12}");
        }
        out.push('\n');
        for m in &ms {
            let _ = write!(out, "{m:>8}");
            for k in &ks {
                let cell = stats
                    .iter()
                    .find(|s| s.k == *k && s.m == *m)
                    .map(value)
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, "{cell:>12}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> OptimizerConfig {
        let mut c = bench_optimizer_config();
        c.max_iterations = 300;
        c
    }

    #[test]
    fn merge_identity_and_commutation() {
        let a = run_range(4, 2, 9, 0..5, &quick());
        let b = run_range(4, 2, 9, 5..9, &quick());
        assert_eq!(merge(&a, &BenchStats::empty(4, 2, 9)).unwrap(), a);
        assert_eq!(merge(&a, &b).unwrap(), merge(&b, &a).unwrap());
        assert_eq!(merge(&a, &b).unwrap(), run_range(4, 2, 9, 0..9, &quick()));
        assert!(merge(&a, &BenchStats::empty(5, 2, 9)).is_err());
    }

    #[test]
    fn bounds_only_has_no_fallbacks() {
        let s = run_batch(5, 0, 20, 1, &quick()).unwrap();
        assert_eq!(s.step6_failures, 0);
        assert_eq!(s.step6c_failures, 0);
        assert!(s.errors.is_empty());
    }

    #[test]
    fn deterministic() {
        let a = run_batch(5, 5, 12, 7, &quick()).unwrap();
        let b = run_batch(5, 5, 12, 7, &quick()).unwrap();
        assert_eq!(emit_csv(&[a]), emit_csv(&[b]));
    }

    #[test]
    fn tables() {
        assert_eq!(emit_csv(&[]), format!("{CSV_HEADER}\n"));
        let mut s = BenchStats::empty(5, 5, 0);
        s.pgd_iterations = 10;
        s.projections = 25;
        let t = emit_table(&[s.clone()]);
        assert!(t.contains("       5          10"));
        let mut grid = Vec::new();
        for (k, m) in [(5, 5), (10, 5), (5, 10), (10, 10)] {
            let mut x = BenchStats::empty(k, m, 0);
            x.pgd_iterations = (k * 100 + m) as u64;
            grid.push(x);
        }
        let t = emit_table(&grid);
        let first: Vec<&str> = t.lines().take(4).collect();
        assert_eq!(first[2].split_whitespace().collect::<Vec<_>>(), ["5", "505", "1005"]);
        assert_eq!(first[3].split_whitespace().collect::<Vec<_>>(), ["10", "510", "1010"]);
        assert_eq!(s.csv_row(), "5,5,0,10,25,0,0,2.500000,0,0");
    }
}
