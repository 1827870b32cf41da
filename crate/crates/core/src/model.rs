//! Joint photon-number distribution of two-mode squeezed vacuum after
//! independent loss on each arm, optionally followed by Poissonian spurious
//! counts on each detector.
//!
//! With `λᵢ = (1-ηᵢ²)/ηᵢ²` and `|f|² = η₁²η₂² tanh²r` the lossy state is a
//! mixture whose photon-number diagonal collapses to a single series
//!
//! ```text
//! p(k,l) = cosh⁻²r · Σ_{N ≥ max(k,l)} λ₁^{N-k} λ₂^{N-l} |f|^{2N} C(N,k) C(N,l)
//! ```
//!
//! The ratio of consecutive terms decreases monotonically towards
//! `ρ = (1-η₁²)(1-η₂²) tanh²r < 1`, so the remainder after any term is bounded
//! by a geometric series in the next ratio.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numeric::{ln_choose, poisson_pmf, poisson_upper_tail, stable_sum};
use crate::params::{Cutoff, ParamSet};

/// Default relative truncation tolerance of each inner series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-16;

/// Default bound on the probability mass left outside an adaptive cutoff.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-12;

const MAX_ADAPTIVE_CUTOFF: usize = 400;

/// Truncated joint photon-number distribution, row index `m` (mode a),
/// column index `n` (mode b).
#[derive(Debug, Clone, PartialEq)]
pub struct JointPnd {
    cutoff: Cutoff,
    probs: Vec<f64>,
    tail_mass: f64,
}

impl JointPnd {
    /// Builds a grid from row-major probabilities; the tail mass is
    /// `1 - Σ probs`, clamped at zero.
    pub fn from_probs(cutoff: Cutoff, probs: Vec<f64>) -> Result<Self> {
        let (rows, cols) = cutoff.shape();
        if probs.len() != rows * cols {
            return Err(Error::InvalidArgument("probability grid has the wrong length"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]"));
        }
        let tail_mass = (1.0 - grid_sum(&probs)).max(0.0);
        Ok(JointPnd {
            cutoff,
            probs,
            tail_mass,
        })
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn shape(&self) -> (usize, usize) {
        self.cutoff.shape()
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.probs[m * (self.cutoff.b + 1) + n]
    }

    /// Row-major probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn total(&self) -> f64 {
        grid_sum(&self.probs)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.cutoff.b + 1;
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i / cols, i % cols, p))
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        let cols = self.cutoff.b + 1;
        self.probs
            .chunks(cols)
            .map(|row| stable_sum(row.iter().copied()))
            .collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let cols = self.cutoff.b + 1;
        (0..cols)
            .map(|n| stable_sum(self.probs.iter().skip(n).step_by(cols).copied()))
            .collect()
    }

    pub fn mean_a(&self) -> f64 {
        stable_sum(self.marginal_a().iter().enumerate().map(|(m, p)| m as f64 * p))
    }

    pub fn mean_b(&self) -> f64 {
        stable_sum(self.marginal_b().iter().enumerate().map(|(n, p)| n as f64 * p))
    }

    pub fn transposed(&self) -> JointPnd {
        let (rows, cols) = self.shape();
        let mut probs = vec![0.0; rows * cols];
        for m in 0..rows {
            for n in 0..cols {
                probs[n * rows + m] = self.probs[m * cols + n];
            }
        }
        JointPnd {
            cutoff: Cutoff::new(self.cutoff.b, self.cutoff.a),
            probs,
            tail_mass: self.tail_mass,
        }
    }
}

/// Compensated sum in ascending order, independent of the grid layout.
fn grid_sum(probs: &[f64]) -> f64 {
    let mut sorted = probs.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    stable_sum(sorted)
}

/// Photon-number distribution of the lossy two-mode squeezed vacuum.
/// Spurious-count rates in `theta` are ignored.
pub fn lossy_tmsv_pnd(theta: &ParamSet, cutoff: Cutoff, tol: f64) -> Result<JointPnd> {
    theta.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("series tolerance must be positive"));
    }
    let (rows, cols) = cutoff.shape();
    let mut probs = vec![0.0; rows * cols];

    let t = theta.r.tanh();
    let f2 = (theta.eta1 * theta.eta1) * (theta.eta2 * theta.eta2) * (t * t);
    let weight = 1.0 / theta.r.cosh().powi(2);

    if f2 == 0.0 {
        probs[0] = weight;
        return JointPnd::from_probs(cutoff, probs);
    }

    let lambda1 = (1.0 - theta.eta1 * theta.eta1) / (theta.eta1 * theta.eta1);
    let lambda2 = (1.0 - theta.eta2 * theta.eta2) / (theta.eta2 * theta.eta2);
    let rho = f2 * (lambda1 * lambda2);
    let (ln_f2, ln_l1, ln_l2) = (f2.ln(), lambda1.ln(), lambda2.ln());

    for k in 0..rows {
        for l in 0..cols {
            // λᵢ = 0 (ηᵢ = 1) only admits the N = k (or N = l) term.
            if (lambda1 == 0.0 && l > k) || (lambda2 == 0.0 && k > l) {
                continue;
            }
            let n0 = k.max(l);
            let side = |c: usize, ln_lambda: f64| {
                let mut v = ln_choose(n0, c);
                if n0 > c {
                    v += (n0 - c) as f64 * ln_lambda;
                }
                v
            };
            let ln_first = n0 as f64 * ln_f2 + (side(k, ln_l1) + side(l, ln_l2));
            let mut term = ln_first.exp();
            let mut sum = term;
            if rho > 0.0 {
                let mut n = n0;
                loop {
                    let step = |n: usize| {
                        let next = (n + 1) as f64;
                        rho * next * next / (((n + 1 - k) as f64) * ((n + 1 - l) as f64))
                    };
                    term *= step(n);
                    sum += term;
                    n += 1;
                    let ratio = step(n);
                    if term == 0.0 || (ratio < 1.0 && term * ratio / (1.0 - ratio) <= tol * sum) {
                        break;
                    }
                }
            }
            probs[k * cols + l] = weight * sum;
        }
    }
    JointPnd::from_probs(cutoff, probs)
}

/// Convolves each mode with independent Poissonian spurious counts.
/// The cutoff is preserved; mass pushed past it moves into the tail.
pub fn apply_dark_counts(pnd: &JointPnd, nu1: f64, nu2: f64) -> Result<JointPnd> {
    for (name, v) in [("nu1", nu1), ("nu2", nu2)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                name,
                value: v,
                domain: "[0, inf)",
            });
        }
    }
    if nu1 == 0.0 && nu2 == 0.0 {
        return Ok(pnd.clone());
    }
    let (rows, cols) = pnd.shape();
    let pois_a = poisson_pmf(nu1, rows - 1);
    let pois_b = poisson_pmf(nu2, cols - 1);

    // Both orders of the separable convolution, averaged, so that swapping
    // the modes transposes the result bit for bit.
    let mut b_first = vec![0.0; rows * cols];
    let mut a_first = vec![0.0; rows * cols];
    for m in 0..rows {
        for n in 0..cols {
            b_first[m * cols + n] = (0..=n).map(|l| pois_b[n - l] * pnd.get(m, l)).sum();
            a_first[m * cols + n] = (0..=m).map(|k| pois_a[m - k] * pnd.get(k, n)).sum();
        }
    }
    let mut probs = vec![0.0; rows * cols];
    for m in 0..rows {
        for n in 0..cols {
            let x: f64 = (0..=m).map(|k| pois_a[m - k] * b_first[k * cols + n]).sum();
            let y: f64 = (0..=n).map(|l| pois_b[n - l] * a_first[m * cols + l]).sum();
            probs[m * cols + n] = 0.5 * (x + y);
        }
    }
    JointPnd::from_probs(pnd.cutoff(), probs)
}

/// Full model: lossy TMSV followed by spurious counts.
pub fn model_pnd(theta: &ParamSet, cutoff: Cutoff, tol: f64) -> Result<JointPnd> {
    let lossy = lossy_tmsv_pnd(theta, cutoff, tol)?;
    apply_dark_counts(&lossy, theta.nu1, theta.nu2)
}

/// Model evaluated at an adaptive cutoff with the default tolerances.
pub fn model_pnd_auto(theta: &ParamSet) -> Result<JointPnd> {
    let cutoff = adaptive_cutoff(theta, DEFAULT_TAIL_BOUND)?;
    model_pnd(theta, cutoff, DEFAULT_SERIES_TOL)
}

/// `P(M > c)` for the single-mode marginal: thermal light with mean
/// `η² sinh²r` plus Poisson(ν) spurious counts.
fn marginal_upper_tail(eta: f64, r: f64, nu: f64, c: usize) -> f64 {
    let mean = eta * eta * r.sinh().powi(2);
    let q = mean / (1.0 + mean);
    if q == 0.0 {
        return poisson_upper_tail(nu, c);
    }
    let pois = poisson_pmf(nu, c);
    let head: f64 = pois
        .iter()
        .enumerate()
        .map(|(j, p)| p * q.powi((c - j + 1) as i32))
        .sum();
    head + poisson_upper_tail(nu, c)
}

/// Smallest per-mode cutoff whose combined marginal tails stay below `bound`.
pub fn adaptive_cutoff(theta: &ParamSet, bound: f64) -> Result<Cutoff> {
    theta.validate()?;
    if !(bound > 0.0) {
        return Err(Error::InvalidArgument("tail bound must be positive"));
    }
    let per_mode = |eta: f64, nu: f64| -> Result<usize> {
        (0..=MAX_ADAPTIVE_CUTOFF)
            .find(|&c| marginal_upper_tail(eta, theta.r, nu, c) < 0.5 * bound)
            .ok_or(Error::InvalidArgument(
                "adaptive cutoff exceeds the supported maximum; reduce r or nu",
            ))
    };
    Ok(Cutoff::new(
        per_mode(theta.eta1, theta.nu1)?,
        per_mode(theta.eta2, theta.nu2)?,
    ))
}

/// Three-outcome probabilities `(p₀₀, p₁₀, p₀₁)` of the low-loss expansion.
pub fn lowloss_three_outcome(eta1: f64, eta2: f64, r: f64) -> Result<(f64, f64, f64)> {
    ParamSet::new(eta1, eta2, r, 0.0, 0.0).validate()?;
    if !(r > 0.0) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            domain: "(0, inf)",
        });
    }
    let t = r.tanh();
    let f2 = eta1 * eta1 * eta2 * eta2 * t * t;
    let c2 = r.cosh().powi(2);
    let lambda1 = (1.0 - eta1 * eta1) / (eta1 * eta1);
    let lambda2 = (1.0 - eta2 * eta2) / (eta2 * eta2);
    let denom = c2 * (1.0 - f2) * (1.0 - f2);
    Ok((
        1.0 / (c2 * (1.0 - f2)),
        lambda1 * f2 / denom,
        lambda2 * f2 / denom,
    ))
}
