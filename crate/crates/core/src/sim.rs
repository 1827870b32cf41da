//! Synthetic shot generation, trial grouping, bootstrap resampling and
//! data-versus-model diagnostics.
//!
//! Every stochastic routine draws from a ChaCha8 stream keyed by
//! `(seed, stream)`. Trial `k` and bootstrap replica `k` use stream `k`, so
//! results do not depend on the order in which they are produced.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Hypergeometric};

use crate::error::{Error, Result};
use crate::fisher::P_FLOOR;
use crate::mle::Histogram;
use crate::model::{self, JointPnd, DEFAULT_SERIES_TOL};
use crate::params::{Cutoff, ParamSet};

/// Tail mass above which sampling warns that the cutoff is too low.
pub const SAMPLING_TAIL_WARNING: f64 = 1e-6;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampler over the flattened grid; draws past the grid total
/// land in the overflow outcome.
struct GridSampler {
    cdf: Vec<f64>,
}

impl GridSampler {
    fn new(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cdf = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        GridSampler { cdf }
    }

    /// Index into the grid, or `None` for the overflow outcome.
    fn draw(&self, u: f64) -> Option<usize> {
        let idx = self.cdf.partition_point(|&c| c <= u);
        (idx < self.cdf.len()).then_some(idx)
    }

    fn fill<R: Rng + ?Sized>(&self, hist: &mut Histogram, n: u64, scale: f64, rng: &mut R) {
        let (_, cols) = hist.shape();
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * scale;
            match self.draw(u) {
                Some(i) => hist.increment(i / cols, i % cols),
                None => hist.increment(usize::MAX, usize::MAX),
            }
        }
    }
}

/// Multinomial draw of `n_shots` outcomes from a model grid plus its tail.
pub fn sample_from_pnd<R: Rng + ?Sized>(pnd: &JointPnd, n_shots: u64, rng: &mut R) -> Histogram {
    let mut hist = Histogram::zeros(pnd.cutoff());
    GridSampler::new(pnd.probs().iter().copied()).fill(&mut hist, n_shots, 1.0, rng);
    hist
}

pub fn sample_shots(
    theta: &ParamSet,
    n_shots: u64,
    cutoff: Cutoff,
    seed: u64,
    stream: u64,
) -> Result<Histogram> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("n_shots must be at least 1"));
    }
    let pnd = model::model_pnd(theta, cutoff, DEFAULT_SERIES_TOL)?;
    if pnd.tail_mass() > SAMPLING_TAIL_WARNING {
        log::warn!(
            "tail mass {:.3e} beyond cutoff {:?}; overflow shots will be frequent",
            pnd.tail_mass(),
            cutoff
        );
    }
    Ok(sample_from_pnd(&pnd, n_shots, &mut stream_rng(seed, stream)))
}

/// Independent trials, all on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub histograms: Vec<Histogram>,
    pub shots_per_trial: u64,
    pub seed: u64,
    pub theta_true: Option<ParamSet>,
}

/// `n_trials` synthetic trials; trial `k` uses stream `k`.
pub fn simulate_trials(
    theta: &ParamSet,
    n_trials: usize,
    shots_per_trial: u64,
    cutoff: Cutoff,
    seed: u64,
) -> Result<TrialSet> {
    let histograms = (0..n_trials as u64)
        .map(|k| simulate_trial(theta, shots_per_trial, cutoff, seed, k))
        .collect::<Result<_>>()?;
    Ok(TrialSet {
        histograms,
        shots_per_trial,
        seed,
        theta_true: Some(*theta),
    })
}

/// Trial `k` of [`simulate_trials`], for callers that schedule trials
/// themselves.
pub fn simulate_trial(
    theta: &ParamSet,
    shots_per_trial: u64,
    cutoff: Cutoff,
    seed: u64,
    k: u64,
) -> Result<Histogram> {
    sample_shots(theta, shots_per_trial, cutoff, seed, k)
}

/// Sums consecutive groups of `group_size` trials; a remainder that does
/// not fill a group is dropped.
pub fn group_trials(trials: &TrialSet, group_size: usize) -> Result<TrialSet> {
    if group_size == 0 {
        return Err(Error::InvalidArgument("group size must be at least 1"));
    }
    let remainder = trials.histograms.len() % group_size;
    if remainder != 0 {
        log::warn!("dropping {remainder} trials that do not fill a group of {group_size}");
    }
    let mut histograms = Vec::with_capacity(trials.histograms.len() / group_size);
    for group in trials.histograms.chunks_exact(group_size) {
        let mut sum = group[0].clone();
        for h in &group[1..] {
            sum.add(h)?;
        }
        histograms.push(sum);
    }
    Ok(TrialSet {
        histograms,
        shots_per_trial: trials.shots_per_trial * group_size as u64,
        seed: trials.seed,
        theta_true: trials.theta_true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BootstrapMode {
    /// Nonparametric, shots drawn with replacement.
    WithReplacement,
    /// Nonparametric, shots drawn without replacement.
    WithoutReplacement,
    /// Fresh shots from the model at the given estimate.
    Parametric(ParamSet),
}

/// `n_resamples` resampled histograms of `resample_size` shots each;
/// replica `k` uses stream `k`. Overflow shots take part in resampling.
pub fn bootstrap(
    hist: &Histogram,
    mode: BootstrapMode,
    n_resamples: usize,
    resample_size: u64,
    seed: u64,
) -> Result<Vec<Histogram>> {
    (0..n_resamples as u64)
        .map(|k| bootstrap_replica(hist, mode, resample_size, seed, k))
        .collect()
}

/// Replica `k` of [`bootstrap`].
pub fn bootstrap_replica(
    hist: &Histogram,
    mode: BootstrapMode,
    resample_size: u64,
    seed: u64,
    k: u64,
) -> Result<Histogram> {
    let available = hist.shots();
    if available == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut rng = stream_rng(seed, k);
    match mode {
        BootstrapMode::WithReplacement => {
            let mut out = Histogram::zeros(hist.cutoff());
            let sampler = GridSampler::new(hist.counts().iter().map(|&c| c as f64));
            sampler.fill(&mut out, resample_size, available as f64, &mut rng);
            Ok(out)
        }
        BootstrapMode::WithoutReplacement => {
            if resample_size > available {
                return Err(Error::ResampleTooLarge {
                    requested: resample_size,
                    available,
                });
            }
            // Multivariate hypergeometric as a chain of univariate draws.
            let mut remaining_pop = available;
            let mut remaining_draws = resample_size;
            let mut counts = Vec::with_capacity(hist.counts().len());
            for &c in hist.counts() {
                let x = if remaining_draws == 0 || c == 0 {
                    0
                } else if c == remaining_pop {
                    remaining_draws
                } else {
                    Hypergeometric::new(remaining_pop, c, remaining_draws)
                        .map_err(|_| Error::InvalidArgument("invalid hypergeometric parameters"))?
                        .sample(&mut rng)
                };
                counts.push(x);
                remaining_pop -= c;
                remaining_draws -= x;
            }
            Histogram::from_counts(hist.cutoff(), counts, remaining_draws)
        }
        BootstrapMode::Parametric(theta) => {
            let pnd = model::model_pnd(&theta, hist.cutoff(), DEFAULT_SERIES_TOL)?;
            Ok(sample_from_pnd(&pnd, resample_size, &mut rng))
        }
    }
}

/// Resamples whole trials with replacement and sums each draw of
/// `trials.len()` trials into one histogram.
pub fn bootstrap_trials(trials: &TrialSet, n_resamples: usize, seed: u64) -> Result<Vec<Histogram>> {
    let n = trials.histograms.len();
    if n == 0 {
        return Err(Error::EmptyHistogram);
    }
    (0..n_resamples as u64)
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let mut sum = Histogram::zeros(trials.histograms[0].cutoff());
            for _ in 0..n {
                sum.add(&trials.histograms[rng.random_range(0..n)])?;
            }
            Ok(sum)
        })
        .collect()
}

/// Per-bin relative error `ε(m,n) = |μ_mn/μ - p| / p`; `None` where the
/// model probability is below the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeErrorMap {
    pub cutoff: Cutoff,
    pub values: Vec<Option<f64>>,
}

impl RelativeErrorMap {
    pub fn get(&self, m: usize, n: usize) -> Option<f64> {
        self.values[m * (self.cutoff.b + 1) + n]
    }

    pub fn mean(&self) -> f64 {
        let defined: Vec<f64> = self.values.iter().flatten().copied().collect();
        if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        }
    }
}

fn frequencies_and_model(hist: &Histogram, theta: &ParamSet) -> Result<(Vec<f64>, JointPnd)> {
    let shots = hist.shots();
    if shots == 0 {
        return Err(Error::EmptyHistogram);
    }
    let pnd = model::model_pnd(theta, hist.cutoff(), DEFAULT_SERIES_TOL)?;
    let q = hist.counts().iter().map(|&c| c as f64 / shots as f64).collect();
    Ok((q, pnd))
}

pub fn relative_error_map(hist: &Histogram, theta_hat: &ParamSet) -> Result<RelativeErrorMap> {
    let (q, pnd) = frequencies_and_model(hist, theta_hat)?;
    let values = q
        .iter()
        .zip(pnd.probs())
        .map(|(&qi, &p)| (p > P_FLOOR).then(|| (qi - p).abs() / p))
        .collect();
    Ok(RelativeErrorMap {
        cutoff: hist.cutoff(),
        values,
    })
}

/// Root-mean-square of `q - p` over the whole grid.
pub fn rms_error(hist: &Histogram, theta_hat: &ParamSet) -> Result<f64> {
    let (q, pnd) = frequencies_and_model(hist, theta_hat)?;
    let sq: f64 = q.iter().zip(pnd.probs()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / q.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_samples_are_diagonal() {
        let theta = ParamSet::new(1.0, 1.0, 1.0, 0.0, 0.0);
        let h = sample_shots(&theta, 100_000, Cutoff::square(40), 3, 0).unwrap();
        assert!(h.iter().all(|(m, n, c)| m == n || c == 0));
        assert_eq!(h.shots(), 100_000);
    }

    #[test]
    fn same_seed_same_histogram() {
        let theta = ParamSet::new(0.4, 0.5, 1.0, 0.03, 0.05);
        let a = sample_shots(&theta, 20_000, Cutoff::square(20), 11, 4).unwrap();
        let b = sample_shots(&theta, 20_000, Cutoff::square(20), 11, 4).unwrap();
        let c = sample_shots(&theta, 20_000, Cutoff::square(20), 11, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn low_cutoff_fills_overflow() {
        let theta = ParamSet::new(0.9, 0.9, 1.5, 0.0, 0.0);
        let h = sample_shots(&theta, 10_000, Cutoff::square(1), 1, 0).unwrap();
        assert!(h.overflow() > 0);
        assert_eq!(h.shots(), 10_000);
    }

    #[test]
    fn grouping_extremes() {
        let theta = ParamSet::new(0.4, 0.5, 1.0, 0.03, 0.05);
        let trials = simulate_trials(&theta, 6, 1000, Cutoff::square(15), 9).unwrap();
        assert_eq!(group_trials(&trials, 1).unwrap().histograms, trials.histograms);
        let all = group_trials(&trials, 6).unwrap();
        assert_eq!(all.histograms.len(), 1);
        assert_eq!(all.histograms[0].shots(), 6000);
        let partial = group_trials(&trials, 4).unwrap();
        assert_eq!(partial.histograms.len(), 1);
        assert!(group_trials(&trials, 0).is_err());
    }

    #[test]
    fn without_replacement_full_size_is_a_copy() {
        let theta = ParamSet::new(0.4, 0.5, 1.0, 0.03, 0.05);
        let h = sample_shots(&theta, 5000, Cutoff::square(12), 2, 0).unwrap();
        let copies = bootstrap(&h, BootstrapMode::WithoutReplacement, 3, h.shots(), 8).unwrap();
        assert!(copies.iter().all(|c| *c == h));
        let half = bootstrap(&h, BootstrapMode::WithoutReplacement, 3, 2500, 8).unwrap();
        assert!(half.iter().all(|c| c.shots() == 2500));
        assert!(half
            .iter()
            .all(|c| c.counts().iter().zip(h.counts()).all(|(a, b)| a <= b)));
        assert!(matches!(
            bootstrap(&h, BootstrapMode::WithoutReplacement, 1, 5001, 8),
            Err(Error::ResampleTooLarge { .. })
        ));
    }

    #[test]
    fn with_replacement_mean_tracks_original() {
        let theta = ParamSet::new(0.4, 0.5, 1.0, 0.03, 0.05);
        let h = sample_shots(&theta, 20_000, Cutoff::square(15), 2, 0).unwrap();
        let reps = bootstrap(&h, BootstrapMode::WithReplacement, 200, h.shots(), 5).unwrap();
        let n = reps.len() as f64;
        for (bin, &orig) in h.counts().iter().enumerate() {
            let mean = reps.iter().map(|r| r.counts()[bin] as f64).sum::<f64>() / n;
            let p = orig as f64 / h.shots() as f64;
            let sd = (h.shots() as f64 * p * (1.0 - p) / n).sqrt();
            assert!((mean - orig as f64).abs() <= 5.0 * sd + 1e-9, "bin {bin}");
        }
    }

    #[test]
    fn vacuum_relative_error_is_zero() {
        let theta = ParamSet::new(1.0, 1.0, 0.0, 0.0, 0.0);
        let h = Histogram::from_counts(Cutoff::square(2), alloc::vec![7, 0, 0, 0, 0, 0, 0, 0, 0], 0)
            .unwrap();
        let map = relative_error_map(&h, &theta).unwrap();
        assert_eq!(map.get(0, 0), Some(0.0));
        assert_eq!(map.get(1, 1), None);
        assert_eq!(rms_error(&h, &theta).unwrap(), 0.0);
    }

    #[test]
    fn trial_bootstrap_conserves_shots() {
        let theta = ParamSet::new(0.4, 0.5, 1.0, 0.03, 0.05);
        let trials = simulate_trials(&theta, 5, 1000, Cutoff::square(15), 9).unwrap();
        let reps = bootstrap_trials(&trials, 4, 1).unwrap();
        assert!(reps.iter().all(|r| r.shots() == 5000));
    }
}
