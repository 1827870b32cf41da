//! Classical and quantum Fisher information for loss estimation.
//!
//! Classical information of photon counting is obtained from central
//! finite differences of the model distribution, with the probability mass
//! beyond the cutoff kept as one aggregated outcome so the information
//! always belongs to a genuine measurement. Benchmarks for coherent, Fock
//! and lossy two-mode squeezed probes are closed forms.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::gaussian::qfim_inverse_analytic;
use crate::linalg;
use crate::mle::Histogram;
use crate::model::{self, JointPnd, DEFAULT_SERIES_TOL};
use crate::params::{Cutoff, Param, ParamSet};

/// Bins with probability below this contribute no information.
pub const P_FLOOR: f64 = 1e-300;

/// The aggregated beyond-cutoff outcome is kept only above this mass; below
/// it the finite-difference noise of `1 - Σp` dominates its true
/// contribution (which is at most of order the mass itself).
pub const TAIL_OUTCOME_FLOOR: f64 = 1e-10;

/// Labeled symmetric information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    labels: Vec<String>,
    entries: DMatrix<f64>,
}

impl FisherMatrix {
    pub fn new(labels: Vec<String>, entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() != labels.len() {
            return Err(Error::InvalidArgument("labels and matrix dimensions disagree"));
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        if linalg::max_asymmetry(&entries) > 1e-12 * scale {
            return Err(Error::InvalidArgument("information matrix must be symmetric"));
        }
        Ok(FisherMatrix {
            labels,
            entries: linalg::symmetrize(entries),
        })
    }

    pub fn from_params(params: &[Param], entries: DMatrix<f64>) -> Result<Self> {
        Self::new(params.iter().map(|p| p.name().to_string()).collect(), entries)
    }

    pub fn diagonal(labels: Vec<String>, diag: &[f64]) -> Result<Self> {
        let entries = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag));
        Self::new(labels, entries)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Entry by label pair.
    pub fn entry(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.entries[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn scaled(&self, factor: f64) -> FisherMatrix {
        FisherMatrix {
            labels: self.labels.clone(),
            entries: &self.entries * factor,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }

    pub fn condition_number(&self) -> f64 {
        linalg::condition_number(&self.entries)
    }

    /// Positive semidefinite up to `-tol` on the smallest eigenvalue.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Restriction to the given labels, in that order.
    pub fn submatrix(&self, labels: &[&str]) -> Result<FisherMatrix> {
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or(Error::InvalidArgument("unknown information-matrix label"))
            })
            .collect::<Result<_>>()?;
        let entries = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])]);
        Ok(FisherMatrix {
            labels: labels.iter().map(|l| l.to_string()).collect(),
            entries,
        })
    }

    /// Covariance bound `F⁻¹` with the condition number of `F`.
    pub fn inverse(&self) -> Result<(DMatrix<f64>, f64)> {
        linalg::spd_inverse(&self.entries)
    }
}

/// Finite-difference settings for classical and observed information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimOptions {
    /// Relative step: `hᵢ = step · max(|θᵢ|, 0.1)`.
    pub step: f64,
    pub series_tol: f64,
}

impl Default for FimOptions {
    fn default() -> Self {
        FimOptions {
            step: 1e-5,
            series_tol: DEFAULT_SERIES_TOL,
        }
    }
}

impl FimOptions {
    pub fn with_step(step: f64) -> Self {
        FimOptions {
            step,
            ..Default::default()
        }
    }
}

/// Model probabilities and their parameter derivatives on a grid.
struct Sensitivities {
    pnd: JointPnd,
    /// `grads[i][bin]`, bins row-major.
    grads: Vec<Vec<f64>>,
}

enum Stencil {
    Central,
    Forward,
    Backward,
}

fn stencil_for(theta: &ParamSet, p: Param, h: f64) -> Stencil {
    let (lo, hi) = ParamSet::bounds(p);
    let v = theta.get(p);
    // η must stay strictly positive; the other lower bounds are attainable.
    let lo_ok = if matches!(p, Param::Eta1 | Param::Eta2) {
        v - h > lo
    } else {
        v - h >= lo
    };
    if lo_ok && v + h <= hi {
        Stencil::Central
    } else if lo_ok {
        Stencil::Backward
    } else {
        Stencil::Forward
    }
}

fn shifted(theta: &ParamSet, p: Param, delta: f64) -> ParamSet {
    let mut t = *theta;
    t.set(p, theta.get(p) + delta);
    t
}

fn sensitivities(
    theta: &ParamSet,
    params: &[Param],
    cutoff: Cutoff,
    opts: &FimOptions,
) -> Result<Sensitivities> {
    if !(opts.step > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive"));
    }
    let eval = |t: &ParamSet| model::model_pnd(t, cutoff, opts.series_tol);
    let pnd = eval(theta)?;
    let cols = cutoff.b + 1;
    let mut grads = Vec::with_capacity(params.len());
    for &p in params {
        let h = opts.step * theta.get(p).abs().max(0.1);
        let grad: Vec<f64> = match stencil_for(theta, p, h) {
            Stencil::Central => {
                let plus = eval(&shifted(theta, p, h))?;
                let minus = eval(&shifted(theta, p, -h))?;
                plus.probs()
                    .iter()
                    .zip(minus.probs())
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect()
            }
            Stencil::Forward => {
                let p1 = eval(&shifted(theta, p, h))?;
                let p2 = eval(&shifted(theta, p, 2.0 * h))?;
                pnd.probs()
                    .iter()
                    .zip(p1.probs().iter().zip(p2.probs()))
                    .map(|(f0, (f1, f2))| (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h))
                    .collect()
            }
            Stencil::Backward => {
                let p1 = eval(&shifted(theta, p, -h))?;
                let p2 = eval(&shifted(theta, p, -2.0 * h))?;
                pnd.probs()
                    .iter()
                    .zip(p1.probs().iter().zip(p2.probs()))
                    .map(|(f0, (f1, f2))| (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h))
                    .collect()
            }
        };
        if let Some(bad) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteDerivative {
                param: p,
                m: bad / cols,
                n: bad % cols,
            });
        }
        grads.push(grad);
    }
    Ok(Sensitivities { pnd, grads })
}

/// Classical Fisher information of photon-number-resolved counting at
/// `theta`, over the parameters in `params`, on a `cutoff` grid plus the
/// aggregated overflow outcome.
pub fn classical_fim(
    theta: &ParamSet,
    params: &[Param],
    cutoff: Cutoff,
    opts: &FimOptions,
) -> Result<FisherMatrix> {
    let sens = sensitivities(theta, params, cutoff, opts)?;
    let k = params.len();
    let mut h = DMatrix::zeros(k, k);
    for (bin, &p) in sens.pnd.probs().iter().enumerate() {
        if p <= P_FLOOR {
            continue;
        }
        for i in 0..k {
            let gi = sens.grads[i][bin];
            for j in i..k {
                h[(i, j)] += gi * sens.grads[j][bin] / p;
            }
        }
    }
    let tail = sens.pnd.tail_mass();
    if tail >= TAIL_OUTCOME_FLOOR {
        let tail_grads: Vec<f64> = sens.grads.iter().map(|g| -g.iter().sum::<f64>()).collect();
        for i in 0..k {
            for j in i..k {
                h[(i, j)] += tail_grads[i] * tail_grads[j] / tail;
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    FisherMatrix::from_params(params, h)
}

/// [`classical_fim`] at the adaptive cutoff with default options.
pub fn classical_fim_auto(theta: &ParamSet, params: &[Param]) -> Result<FisherMatrix> {
    let cutoff = model::adaptive_cutoff(theta, model::DEFAULT_TAIL_BOUND)?;
    classical_fim(theta, params, cutoff, &FimOptions::default())
}

/// Observed Fisher information `F_jk = Σ μ_mn ∂_j ln p ∂_k ln p` at
/// `theta_hat`, evaluated on the histogram grid. Overflow counts, when
/// present, are scored against the model mass beyond the grid.
pub fn observed_fim(
    hist: &Histogram,
    theta_hat: &ParamSet,
    params: &[Param],
    opts: &FimOptions,
) -> Result<FisherMatrix> {
    if hist.shots() == 0 {
        return Err(Error::EmptyHistogram);
    }
    let cutoff = hist.cutoff();
    let sens = sensitivities(theta_hat, params, cutoff, opts)?;
    let k = params.len();
    let mut f = DMatrix::zeros(k, k);
    let mut score = vec![0.0; k];
    let mut accumulate = |count: u64, p: f64, grads: &dyn Fn(usize) -> f64, f: &mut DMatrix<f64>| {
        for (i, s) in score.iter_mut().enumerate() {
            *s = grads(i) / p;
        }
        let w = count as f64;
        for i in 0..k {
            for j in i..k {
                f[(i, j)] += w * score[i] * score[j];
            }
        }
    };
    for (bin, (m, n, count)) in hist.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let p = sens.pnd.probs()[bin];
        if p <= P_FLOOR {
            return Err(Error::UnexplainedBin {
                m,
                n,
                count,
                probability: p,
            });
        }
        accumulate(count, p, &|i| sens.grads[i][bin], &mut f);
    }
    if hist.overflow() > 0 {
        let tail = sens.pnd.tail_mass();
        if tail <= P_FLOOR {
            return Err(Error::UnexplainedBin {
                m: usize::MAX,
                n: usize::MAX,
                count: hist.overflow(),
                probability: tail,
            });
        }
        let tail_grads: Vec<f64> = sens.grads.iter().map(|g| -g.iter().sum::<f64>()).collect();
        accumulate(hist.overflow(), tail, &|i| tail_grads[i], &mut f);
    }
    for i in 0..k {
        for j in 0..i {
            f[(i, j)] = f[(j, i)];
        }
    }
    FisherMatrix::from_params(params, f)
}

/// `Jᵀ F J` with `J_ij = ∂θᵢ/∂ϑⱼ`; the result is labeled by `new_labels`.
pub fn reparametrize_fim(
    f: &FisherMatrix,
    jacobian: &DMatrix<f64>,
    new_labels: Vec<String>,
) -> Result<FisherMatrix> {
    let d = f.dim();
    if jacobian.nrows() != d || jacobian.ncols() != d || new_labels.len() != d {
        return Err(Error::InvalidArgument("jacobian must be square and match the matrix"));
    }
    let lu = jacobian.clone().lu();
    let det = lu.determinant();
    let scale = jacobian.amax().powi(d as i32);
    if !(det.abs() > 1e-14 * scale) {
        return Err(Error::InvalidArgument("jacobian is singular"));
    }
    let entries = jacobian.transpose() * f.entries() * jacobian;
    FisherMatrix::new(new_labels, entries)
}

fn eta_labels() -> Vec<String> {
    vec![Param::Eta1.name().to_string(), Param::Eta2.name().to_string()]
}

/// Coherent probes `|α⟩|β⟩`: `diag(4|α|², 4|β|²)`.
pub fn qfim_coherent(alpha_sq: f64, beta_sq: f64) -> Result<FisherMatrix> {
    for (name, v) in [("alpha_sq", alpha_sq), ("beta_sq", beta_sq)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                name,
                value: v,
                domain: "[0, inf)",
            });
        }
    }
    FisherMatrix::diagonal(eta_labels(), &[4.0 * alpha_sq, 4.0 * beta_sq])
}

/// Fock probes `|m⟩|n⟩`: `diag(4m/(1-η₁²), 4n/(1-η₂²))`.
pub fn qfim_fock(m: f64, n: f64, eta1: f64, eta2: f64) -> Result<FisherMatrix> {
    for (name, v) in [("m", m), ("n", n)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                name,
                value: v,
                domain: "[0, inf)",
            });
        }
    }
    for (name, v) in [("eta1", eta1), ("eta2", eta2)] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Domain {
                name,
                value: v,
                domain: "[0, 1)",
            });
        }
    }
    FisherMatrix::diagonal(
        eta_labels(),
        &[4.0 * m / (1.0 - eta1 * eta1), 4.0 * n / (1.0 - eta2 * eta2)],
    )
}

/// Two-parameter QFIM of lossy TMSV to leading order in `1 - ηᵢ`.
/// Only meaningful close to η = 1; a warning is logged below 0.9.
pub fn qfim_lowloss_tmsv(eta1: f64, eta2: f64, r: f64) -> Result<FisherMatrix> {
    if eta1 < 0.9 || eta2 < 0.9 {
        log::warn!("low-loss QFIM evaluated at eta1={eta1}, eta2={eta2}, outside its validity range");
    }
    lowloss_entries(eta1, eta2, r)
}

fn lowloss_entries(eta1: f64, eta2: f64, r: f64) -> Result<FisherMatrix> {
    for (name, v) in [("eta1", eta1), ("eta2", eta2)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain {
                name,
                value: v,
                domain: "(0, 1)",
            });
        }
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            domain: "[0, inf)",
        });
    }
    let e = probe_energy(r);
    let diag = |eta: f64| e * (1.0 / (1.0 - eta) - (1.5 + 5.0 * e));
    let off = -e * (4.0 + 3.0 * e);
    FisherMatrix::new(
        eta_labels(),
        DMatrix::from_row_slice(2, 2, &[diag(eta1), off, off, diag(eta2)]),
    )
}

/// Total probe energy `E = 2 sinh²r`.
pub fn probe_energy(r: f64) -> f64 {
    2.0 * r.sinh().powi(2)
}

/// `Var η₁ + Var η₂` from the `(η₁, η₂)` block of `F⁻¹`; any further
/// parameters are treated as nuisance parameters.
pub fn total_variance(f: &FisherMatrix) -> Result<f64> {
    let i1 = f
        .index_of(Param::Eta1.name())
        .ok_or(Error::InvalidArgument("information matrix has no eta1 entry"))?;
    let i2 = f
        .index_of(Param::Eta2.name())
        .ok_or(Error::InvalidArgument("information matrix has no eta2 entry"))?;
    let (inv, _) = f.inverse()?;
    Ok(inv[(i1, i1)] + inv[(i2, i2)])
}

/// Reciprocal of [`total_variance`].
pub fn sensitivity(f: &FisherMatrix) -> Result<f64> {
    Ok(1.0 / total_variance(f)?)
}

/// Which information quantity represents the TMSV probe in a crossover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InformationSource {
    /// Classical information of photon counting on both modes, `r` known,
    /// no spurious counts, detectors resolving up to `cutoff` photons.
    PnrdFim { cutoff: usize },
    /// Leading-order low-loss QFIM.
    LowlossQfim,
    /// `(η₁, η₂)` block of the three-parameter QFIM with `r` unknown.
    ThreeParamQfim,
}

impl InformationSource {
    pub fn name(&self) -> &'static str {
        match self {
            InformationSource::PnrdFim { .. } => "pnrd-fim",
            InformationSource::LowlossQfim => "lowloss-qfim",
            InformationSource::ThreeParamQfim => "three-param-qfim",
        }
    }
}

/// Sensitivity of an equal-energy coherent probe split evenly over the two
/// modes: `F = diag(2E, 2E)`, so the total variance is `1/E`.
pub fn coherent_sensitivity(r: f64) -> f64 {
    probe_energy(r)
}

/// TMSV sensitivity for the given information source. Where the low-loss
/// approximation stops being positive definite it carries no usable
/// information and the sensitivity is reported as zero.
pub fn tmsv_sensitivity(eta1: f64, eta2: f64, r: f64, source: InformationSource) -> Result<f64> {
    match source {
        InformationSource::PnrdFim { cutoff } => {
            let theta = ParamSet::new(eta1, eta2, r, 0.0, 0.0);
            let f = classical_fim(
                &theta,
                &[Param::Eta1, Param::Eta2],
                Cutoff::square(cutoff),
                &FimOptions::default(),
            )?;
            sensitivity(&f)
        }
        InformationSource::LowlossQfim => {
            let f = lowloss_entries(eta1, eta2, r)?;
            match sensitivity(&f) {
                Ok(s) if f.min_eigenvalue() > 0.0 => Ok(s),
                Ok(_) | Err(Error::Singular { .. }) => Ok(0.0),
                Err(e) => Err(e),
            }
        }
        InformationSource::ThreeParamQfim => {
            Ok(1.0 / qfim_inverse_analytic(eta1, eta2, r)?.total_variance())
        }
    }
}

/// Ray layout and accuracy of a crossover search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Number of rays from the origin, at angles symmetric about the diagonal.
    pub rays: usize,
    /// Smallest radius searched along each ray.
    pub radius_min: f64,
    /// Bisection stops once the bracket is narrower than this (in η).
    pub tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rays: 31,
            radius_min: 0.02,
            tol: 1e-10,
        }
    }
}

impl GridSpec {
    /// Ray angle `k`, measured from the η₁ axis. Odd ray counts include the
    /// diagonal.
    pub fn angle(&self, k: usize) -> f64 {
        if 2 * k + 1 == self.rays {
            return FRAC_PI_4;
        }
        FRAC_PI_2 * (k as f64 + 0.5) / self.rays as f64
    }
}

/// Locus in (η₁, η₂) where TMSV and equal-energy coherent probes are
/// equally sensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverCurve {
    pub r: f64,
    pub source: InformationSource,
    pub points: Vec<(f64, f64)>,
}

/// Crossover point along the ray at `angle`, or `None` when the sign of
/// `sens_TMSV - sens_coherent` does not change on it.
pub fn crossover_on_ray(
    r: f64,
    source: InformationSource,
    angle: f64,
    grid: &GridSpec,
) -> Result<Option<(f64, f64)>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            domain: "(0, inf)",
        });
    }
    let (s, c) = if angle == FRAC_PI_4 {
        (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
    } else {
        angle.sin_cos()
    };
    let reference = coherent_sensitivity(r);
    let advantage =
        |radius: f64| -> Result<f64> { Ok(tmsv_sensitivity(radius * c, radius * s, r, source)? - reference) };
    // Stop short of η = 1, where the lossy information diverges.
    let radius_max = (1.0 - 1e-6) / c.max(s);
    let mut lo = grid.radius_min.max(1e-6 / c.min(s).max(1e-12));
    let mut hi = radius_max;
    if lo >= hi {
        return Ok(None);
    }
    let f_lo = advantage(lo)?;
    let f_hi = advantage(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Ok(None);
    }
    while hi - lo > grid.tol {
        let mid = 0.5 * (lo + hi);
        if advantage(mid)?.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let radius = 0.5 * (lo + hi);
    Ok(Some((radius * c, radius * s)))
}

/// Crossover curve over the rays of `grid`, ordered by angle. Every source
/// is symmetric under swapping the modes, so rays above the diagonal are
/// mirrored from those below it.
pub fn crossover_curve(r: f64, source: InformationSource, grid: &GridSpec) -> Result<CrossoverCurve> {
    let half: Vec<Option<(f64, f64)>> = (0..grid.rays.div_ceil(2))
        .map(|k| crossover_on_ray(r, source, grid.angle(k), grid))
        .collect::<Result<_>>()?;
    Ok(CrossoverCurve {
        r,
        source,
        points: mirror_rays(&half, grid.rays),
    })
}

/// Completes the lower half of a symmetric ray layout, `rays.div_ceil(2)`
/// results, by reflection about the diagonal.
pub fn mirror_rays(half: &[Option<(f64, f64)>], rays: usize) -> Vec<(f64, f64)> {
    (0..rays)
        .filter_map(|k| {
            if k < half.len() {
                half[k]
            } else {
                half[rays - 1 - k].map(|(a, b)| (b, a))
            }
        })
        .collect()
}
