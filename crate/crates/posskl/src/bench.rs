//! Randomized projection benchmark: repeated KL projections onto
//! possibility-induced sets with per-tolerance aggregate statistics.
//!
//! Sampling laws: the possibility vector is n iid Uniform(0,1] values divided
//! by their maximum; the reference probability vector is n iid standard
//! exponentials normalized (flat Dirichlet). The same instances are reused
//! for every tolerance, and each repetition draws from its own stream of the
//! seed, so aggregation is order-independent and runs may execute in
//! parallel.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antipignistic::PossVec;
use crate::dykstra::kl_project;
use crate::error::{Error, Result};
use crate::feasible::{build_feasible_set, GapPolicy};
use crate::simplex::{normalize, PosVec, ProbVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub tolerances: Vec<f64>,
    pub max_cycles: usize,
    pub runs: usize,
    pub seed: u64,
}

/// Aggregates of one tolerance level; the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub tolerance: f64,
    pub convergence_rate: f64,
    pub mean_cycles: f64,
    pub p90_cycles: f64,
    pub mean_final_violation: f64,
    pub mean_time_s: f64,
}

/// One random instance of the benchmark distribution.
pub fn sample_instance(rng: &mut ChaCha8Rng, n: usize) -> Result<(PossVec, ProbVec)> {
    let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pi = PossVec::new(raw.iter().map(|v| v / max).collect())?;
    let exps: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let q = normalize(&PosVec::new(exps)?)?;
    Ok((pi, q))
}

/// Percentile with linear interpolation between closest ranks.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Run the benchmark and return one aggregate row per tolerance.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.n < 2 {
        return Err(Error::InvalidParameter("n must be >= 2".into()));
    }
    if config.runs == 0 || config.max_cycles == 0 {
        return Err(Error::InvalidParameter(
            "runs and max_cycles must be >= 1".into(),
        ));
    }
    for &tol in &config.tolerances {
        if !(tol > 0.0 && tol <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance {tol} outside (0, 1]"
            )));
        }
    }

    let mut rows = Vec::with_capacity(config.tolerances.len());
    for &tol in &config.tolerances {
        let results: Vec<(bool, usize, f64, f64)> = (0..config.runs)
            .into_par_iter()
            .map(|run| -> Result<(bool, usize, f64, f64)> {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(run as u64);
                let (pi, q) = sample_instance(&mut rng, config.n)?;
                let fs = build_feasible_set(&pi, &GapPolicy::default())?;
                let report = kl_project(&q, &fs, tol, config.max_cycles)?;
                Ok((
                    report.converged,
                    report.cycles_used,
                    report.final_violation,
                    report.wall_time,
                ))
            })
            .collect::<Result<_>>()?;

        let runs = results.len() as f64;
        let convergence_rate = results.iter().filter(|r| r.0).count() as f64 / runs;
        let mut cycles: Vec<f64> = results.iter().map(|r| r.1 as f64).collect();
        let mean_cycles = cycles.iter().sum::<f64>() / runs;
        cycles.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let p90_cycles = percentile(&cycles, 0.9);
        let mean_final_violation = results.iter().map(|r| r.2).sum::<f64>() / runs;
        let mean_time_s = results.iter().map(|r| r.3).sum::<f64>() / runs;
        rows.push(BenchRow {
            tolerance: tol,
            convergence_rate,
            mean_cycles,
            p90_cycles,
            mean_final_violation,
            mean_time_s,
        });
    }
    Ok(rows)
}

/// Write benchmark rows as CSV, with the sampling law and configuration
/// recorded in `#` metadata lines so cycle counts can be qualified.
pub fn write_csv<W: Write>(mut w: W, config: &BenchConfig, rows: &[BenchRow]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::MalformedData(e.to_string());
    writeln!(
        w,
        "# possibility sampling: n iid Uniform(0,1] divided by their max; \
         reference sampling: n iid Exp(1) normalized (flat Dirichlet)"
    )
    .map_err(io_err)?;
    writeln!(
        w,
        "# n={} runs={} max_cycles={} seed={} (chacha8 stream per run)",
        config.n, config.runs, config.max_cycles, config.seed
    )
    .map_err(io_err)?;
    writeln!(
        w,
        "tolerance,convergence_rate,mean_cycles,p90_cycles,mean_final_violation,mean_time_s"
    )
    .map_err(io_err)?;
    for r in rows {
        writeln!(
            w,
            "{:e},{},{},{},{:e},{}",
            r.tolerance,
            r.convergence_rate,
            r.mean_cycles,
            r.p90_cycles,
            r.mean_final_violation,
            r.mean_time_s
        )
        .map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (pi, q) = sample_instance(&mut rng, 12).unwrap();
            assert_eq!(pi.len(), 12);
            assert_eq!(q.len(), 12);
            assert!(pi.as_slice().iter().cloned().fold(f64::MIN, f64::max) == 1.0);
            assert!(q.strictly_positive());
        }
    }

    #[test]
    fn percentile_interpolates_linearly() {
        let xs: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        assert!((percentile(&xs, 0.9) - 90.1).abs() < 1e-12);
        assert_eq!(percentile(&[5.0], 0.9), 5.0);
    }

    #[test]
    fn loose_tolerance_converges_in_one_cycle() {
        let config = BenchConfig {
            n: 10,
            tolerances: vec![1.0],
            max_cycles: 10,
            runs: 20,
            seed: 3,
        };
        let rows = run_benchmark(&config).unwrap();
        assert_eq!(rows[0].convergence_rate, 1.0);
        assert_eq!(rows[0].mean_cycles, 1.0);
        assert_eq!(rows[0].p90_cycles, 1.0);
    }

    #[test]
    fn benchmark_rows_are_deterministic_up_to_timing() {
        let config = BenchConfig {
            n: 8,
            tolerances: vec![1e-2, 1e-3],
            max_cycles: 200,
            runs: 10,
            seed: 11,
        };
        let a = run_benchmark(&config).unwrap();
        let b = run_benchmark(&config).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.convergence_rate, y.convergence_rate);
            assert_eq!(x.mean_cycles, y.mean_cycles);
            assert_eq!(x.p90_cycles, y.p90_cycles);
            assert_eq!(x.mean_final_violation, y.mean_final_violation);
        }
        // mean violation bounded by the tolerance on converged sweeps
        for row in &a {
            assert_eq!(row.convergence_rate, 1.0);
            assert!(row.mean_final_violation <= row.tolerance);
        }
    }

    #[test]
    fn csv_schema_is_stable() {
        let config = BenchConfig {
            n: 5,
            tolerances: vec![1e-2],
            max_cycles: 50,
            runs: 3,
            seed: 0,
        };
        let rows = run_benchmark(&config).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &config, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(
            header,
            "tolerance,convergence_rate,mean_cycles,p90_cycles,mean_final_violation,mean_time_s"
        );
    }
}
