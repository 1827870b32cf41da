//! Five-parameter maximum-likelihood estimation from count histograms.
//!
//! Maximizing the likelihood of i.i.d. shots is the same as minimizing the
//! Kullback–Leibler divergence from the observed frequencies `q` to the
//! model `p`. Model probabilities are renormalized over the occupied bins
//! (extended maximum likelihood) before the divergence is taken.

mod histogram;
pub mod simplex;

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use histogram::Histogram;
pub use simplex::{SimplexOptions, SimplexResult};

use crate::error::{Error, Result};
use crate::fisher::{self, FimOptions, P_FLOOR};
use crate::model::{self, DEFAULT_SERIES_TOL};
use crate::numeric::{logistic, logit, softplus, softplus_inv};
use crate::params::{Cutoff, Param, ParamSet};
use crate::sim;

/// `D_KL(q || p̂)` over the support of `q`, with `p̂ = p / Σ_{q>0} p`.
/// Returns `+∞` when `p̂` vanishes on an occupied outcome.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    debug_assert_eq!(q.len(), p.len());
    let mut norm = 0.0;
    let mut cross = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi > 0.0 {
            if !(pi > P_FLOOR) {
                return f64::INFINITY;
            }
            norm += pi;
            cross += qi * (qi / pi).ln();
        }
    }
    cross + norm.ln()
}

/// The divergence as a function of θ for a fixed histogram, with the
/// occupied bins and data entropy precomputed.
#[derive(Debug, Clone)]
pub struct KlObjective {
    cutoff: Cutoff,
    occupied: Vec<(usize, f64)>,
    neg_entropy: f64,
    series_tol: f64,
}

impl KlObjective {
    pub fn new(hist: &Histogram) -> Result<Self> {
        let total = hist.total();
        if total == 0 {
            return Err(Error::EmptyHistogram);
        }
        let occupied: Vec<(usize, f64)> = hist
            .counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c as f64 / total as f64))
            .collect();
        let neg_entropy = occupied.iter().map(|&(_, q)| q * q.ln()).sum();
        Ok(KlObjective {
            cutoff: hist.cutoff(),
            occupied,
            neg_entropy,
            series_tol: DEFAULT_SERIES_TOL,
        })
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// Objective in nats; `+∞` for out-of-domain θ or unexplained bins.
    pub fn eval(&self, theta: &ParamSet) -> f64 {
        let pnd = match model::model_pnd(theta, self.cutoff, self.series_tol) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let probs = pnd.probs();
        let mut norm = 0.0;
        let mut cross = 0.0;
        for &(i, q) in &self.occupied {
            let p = probs[i];
            if !(p > P_FLOOR) {
                return f64::INFINITY;
            }
            norm += p;
            cross += q * p.ln();
        }
        self.neg_entropy - cross + norm.ln()
    }
}

/// Divergence between the histogram frequencies and the model at `theta`.
pub fn kl_objective(hist: &Histogram, theta: &ParamSet) -> Result<f64> {
    Ok(KlObjective::new(hist)?.eval(theta))
}

/// Log-likelihood `ℓ = Σ μ_mn ln p̂(m,n|θ)` with extended-ML normalization.
pub fn log_likelihood(hist: &Histogram, theta: &ParamSet) -> Result<f64> {
    let pnd = model::model_pnd(theta, hist.cutoff(), DEFAULT_SERIES_TOL)?;
    let norm: f64 = hist
        .iter()
        .zip(pnd.probs())
        .filter(|((_, _, c), _)| *c > 0)
        .map(|(_, p)| p)
        .sum();
    Ok(hist
        .iter()
        .zip(pnd.probs())
        .filter(|((_, _, c), _)| *c > 0)
        .map(|((_, _, c), p)| c as f64 * (p / norm).ln())
        .sum())
}

/// Coordinates the optimizer works in for the transmission parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parametrization {
    /// Amplitudes η.
    #[default]
    Amplitude,
    /// Transmission probabilities q = η².
    Probability,
}

impl Parametrization {
    /// Unconstrained coordinates → parameters.
    pub fn to_params(self, x: &[f64], phi: f64) -> ParamSet {
        let eta = |v: f64| match self {
            Parametrization::Amplitude => logistic(v),
            Parametrization::Probability => logistic(v).sqrt(),
        };
        ParamSet {
            eta1: eta(x[0]),
            eta2: eta(x[1]),
            r: softplus(x[2]),
            nu1: x[3].exp(),
            nu2: x[4].exp(),
            phi,
        }
    }

    /// Parameters → unconstrained coordinates, nudging boundary values
    /// inwards.
    pub fn to_unconstrained(self, theta: &ParamSet) -> [f64; 5] {
        let eta = |v: f64| {
            let v = v.clamp(1e-9, 1.0 - 1e-9);
            match self {
                Parametrization::Amplitude => logit(v),
                Parametrization::Probability => logit(v * v),
            }
        };
        [
            eta(theta.eta1),
            eta(theta.eta2),
            softplus_inv(theta.r.max(1e-9)),
            theta.nu1.max(1e-9).ln(),
            theta.nu2.max(1e-9).ln(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Number of starts; the first is the supplied initial point.
    pub starts: usize,
    /// Standard deviation of the start jitter in unconstrained coordinates.
    pub jitter: f64,
    pub seed: u64,
    pub parametrization: Parametrization,
    pub simplex: SimplexOptions,
    /// Restarts of the simplex from the best point after the multi-start.
    pub polish_rounds: usize,
    pub fim: FimOptions,
    /// Fill the covariance from the observed information at the optimum.
    pub covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: 4,
            jitter: 0.2,
            seed: 0,
            parametrization: Parametrization::Amplitude,
            simplex: SimplexOptions::default(),
            polish_rounds: 3,
            fim: FimOptions::default(),
            covariance: true,
        }
    }
}

/// Inverse observed information with its condition number.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub theta_hat: ParamSet,
    /// Final divergence, nats.
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// 5×5 in the order of [`Param::ALL`]; `None` if the observed
    /// information was singular or not requested.
    pub covariance: Option<CovarianceEstimate>,
    pub rms_error: f64,
}

/// Method-of-moments starting point: `r` from the mean photon number
/// assuming η = 0.5, each η from its marginal mean, ν = 0.02.
pub fn default_init(hist: &Histogram) -> ParamSet {
    const NU: f64 = 0.02;
    let ma = (hist.mean_a() - NU).max(1e-3);
    let mb = (hist.mean_b() - NU).max(1e-3);
    let sinh2 = 0.5 * (ma + mb) / 0.25;
    let r = sinh2.sqrt().asinh();
    let eta = |m: f64| (m / sinh2).sqrt().clamp(0.05, 0.95);
    ParamSet::new(eta(ma), eta(mb), r, NU, NU)
}

/// Maximum-likelihood fit of all five parameters.
pub fn fit(hist: &Histogram, init: &ParamSet, opts: &FitOptions) -> Result<MleResult> {
    init.validate()?;
    // Data-driven cutoff: the largest photon numbers actually observed.
    let hist = hist.trimmed();
    let objective = KlObjective::new(&hist)?;
    let param = opts.parametrization;
    let phi = init.phi;
    let f = |x: &[f64]| objective.eval(&param.to_params(x, phi));

    let x0 = param.to_unconstrained(init);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, opts.jitter.max(0.0))
        .map_err(|_| Error::InvalidArgument("jitter must be finite"))?;

    let mut best: Option<SimplexResult> = None;
    let mut iterations = 0;
    let mut evaluations = 0;
    for start in 0..opts.starts.max(1) {
        let mut x = x0;
        if start > 0 {
            for xi in x.iter_mut() {
                *xi += normal.sample(&mut rng);
            }
        }
        let res = simplex::minimize(f, &x, &opts.simplex);
        iterations += res.iterations;
        evaluations += res.evaluations;
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one start");
    let mut polish = opts.simplex;
    polish.initial_step = (opts.simplex.initial_step * 0.1).max(1e-6);
    for _ in 0..opts.polish_rounds {
        // The restart includes the current best vertex, so it never worsens.
        let res = simplex::minimize(f, &best.x, &polish);
        iterations += res.iterations;
        evaluations += res.evaluations;
        let done = res.converged && best.value - res.value < opts.simplex.ftol;
        best = res;
        if done {
            break;
        }
    }

    let theta_hat = param.to_params(&best.x, phi);
    let covariance = if opts.covariance {
        match covariance_estimate(&hist, &theta_hat, &opts.fim) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("no covariance at the optimum: {e}");
                None
            }
        }
    } else {
        None
    };
    let rms_error = sim::rms_error(&hist, &theta_hat)?;
    Ok(MleResult {
        theta_hat,
        objective: best.value,
        iterations,
        evaluations,
        converged: best.converged,
        covariance,
        rms_error,
    })
}

/// Inverse of the observed Fisher information over all five parameters.
pub fn covariance_estimate(
    hist: &Histogram,
    theta_hat: &ParamSet,
    opts: &FimOptions,
) -> Result<CovarianceEstimate> {
    let f = fisher::observed_fim(hist, theta_hat, &Param::ALL, opts)?;
    let (matrix, condition) = f.inverse()?;
    Ok(CovarianceEstimate { matrix, condition })
}
