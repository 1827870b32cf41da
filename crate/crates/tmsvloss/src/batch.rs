//! Parallel drivers over trials, bootstrap replicas and crossover rays.
//! Each work item owns its RNG stream, so results do not depend on the
//! number of threads or their scheduling.

use rayon::prelude::*;
use serde::Serialize;
use tmsvloss_core::fisher::{self, CrossoverCurve, GridSpec, InformationSource};
use tmsvloss_core::mle::{self, default_init};
use tmsvloss_core::sim::{self, BootstrapMode, TrialSet};
use tmsvloss_core::{Cutoff, FitOptions, Histogram, MleResult, Param, ParamSet};

use crate::error::{Error, Result};

/// Runs `f` on a pool of `jobs` threads; zero means one per core.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn simulate(
    theta: &ParamSet,
    n_trials: usize,
    shots_per_trial: u64,
    cutoff: Cutoff,
    seed: u64,
) -> Result<TrialSet> {
    let histograms = (0..n_trials as u64)
        .into_par_iter()
        .map(|k| sim::simulate_trial(theta, shots_per_trial, cutoff, seed, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialSet {
        histograms,
        shots_per_trial,
        seed,
        theta_true: Some(*theta),
    })
}

pub fn bootstrap(
    hist: &Histogram,
    mode: BootstrapMode,
    n_resamples: usize,
    resample_size: u64,
    seed: u64,
) -> Result<Vec<Histogram>> {
    Ok((0..n_resamples as u64)
        .into_par_iter()
        .map(|k| sim::bootstrap_replica(hist, mode, resample_size, seed, k))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Fits every histogram, from `init` or the moment estimate of each.
pub fn fit_all(hists: &[Histogram], init: Option<&ParamSet>, opts: &FitOptions) -> Vec<Result<MleResult>> {
    hists
        .par_iter()
        .map(|h| {
            let start = init.copied().unwrap_or_else(|| default_init(h));
            Ok(mle::fit(h, &start, opts)?)
        })
        .collect()
}

pub fn crossover(r: f64, source: InformationSource, grid: &GridSpec) -> Result<CrossoverCurve> {
    let half = (0..grid.rays.div_ceil(2))
        .into_par_iter()
        .map(|k| fisher::crossover_on_ray(r, source, grid.angle(k), grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CrossoverCurve {
        r,
        source,
        points: fisher::mirror_rays(&half, grid.rays),
    })
}

/// Serialized form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub theta_hat: ParamSet,
    /// Row-major 5×5 in the order `eta1, eta2, r, nu1, nu2`.
    pub covariance: Option<Vec<f64>>,
    pub covariance_condition: Option<f64>,
    pub objective_nats: f64,
    pub rms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

impl From<&MleResult> for FitReport {
    fn from(r: &MleResult) -> Self {
        FitReport {
            theta_hat: r.theta_hat,
            covariance: r
                .covariance
                .as_ref()
                .map(|c| c.matrix.transpose().iter().copied().collect()),
            covariance_condition: r.covariance.as_ref().map(|c| c.condition),
            objective_nats: r.objective,
            rms: r.rms_error,
            converged: r.converged,
            iterations: r.iterations,
            evaluations: r.evaluations,
        }
    }
}

/// Per-coordinate sample mean and standard deviation (n − 1 normalized).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: [f64; 5],
    pub stddev: [f64; 5],
}

pub fn summarize(estimates: &[ParamSet]) -> Summary {
    let n = estimates.len();
    let mut mean = [0.0; 5];
    let mut stddev = [0.0; 5];
    if n == 0 {
        return Summary { n, mean, stddev };
    }
    for (i, p) in Param::ALL.iter().enumerate() {
        let xs: Vec<f64> = estimates.iter().map(|t| t.get(*p)).collect();
        mean[i] = xs.iter().sum::<f64>() / n as f64;
        if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean[i]).powi(2)).sum();
            stddev[i] = (ss / (n - 1) as f64).sqrt();
        }
    }
    Summary { n, mean, stddev }
}

/// Batch table: one row per fit, then `mean` and `stddev` rows over the
/// fits that converged.
pub fn batch_csv(rows: &[(String, MleResult)]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["trial".to_string()];
    header.extend(Param::ALL.iter().map(|p| p.name().to_string()));
    header.extend(["objective_nats", "rms", "converged", "iterations"].map(String::from));
    w.write_record(&header).expect("in-memory write");
    for (name, r) in rows {
        let mut rec = vec![name.clone()];
        rec.extend(r.theta_hat.to_array().iter().map(|v| v.to_string()));
        rec.extend([
            r.objective.to_string(),
            r.rms_error.to_string(),
            r.converged.to_string(),
            r.iterations.to_string(),
        ]);
        w.write_record(&rec).expect("in-memory write");
    }
    let converged: Vec<ParamSet> = rows.iter().filter(|(_, r)| r.converged).map(|(_, r)| r.theta_hat).collect();
    let s = summarize(&converged);
    for (label, values) in [("mean", s.mean), ("stddev", s.stddev)] {
        let mut rec = vec![label.to_string()];
        rec.extend(values.iter().map(|v| v.to_string()));
        rec.extend([String::new(), String::new(), s.n.to_string(), String::new()]);
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_constant_estimates() {
        let t = ParamSet::new(0.4, 0.5, 1.0, 0.01, 0.02);
        let s = summarize(&[t, t, t]);
        for i in 0..5 {
            assert!((s.mean[i] - t.to_array()[i]).abs() < 1e-15);
            assert!(s.stddev[i] < 1e-15);
        }
        assert_eq!(summarize(&[]).n, 0);
    }

    #[test]
    fn parallel_simulation_matches_sequential() {
        let theta = ParamSet::new(0.4, 0.5, 1.0, 0.01, 0.02);
        let c = Cutoff::square(15);
        let par = with_jobs(3, || simulate(&theta, 5, 2000, c, 9)).unwrap().unwrap();
        let seq = sim::simulate_trials(&theta, 5, 2000, c, 9).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn parallel_crossover_matches_sequential() {
        let grid = GridSpec { rays: 7, ..GridSpec::default() };
        let source = InformationSource::PnrdFim { cutoff: 8 };
        let par = with_jobs(4, || crossover(0.5, source, &grid)).unwrap().unwrap();
        assert_eq!(par, fisher::crossover_curve(0.5, source, &grid).unwrap());
    }
}
