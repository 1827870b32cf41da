//! Small scalar helpers shared across modules.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Compensated (Neumaier) summation.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Poisson probabilities for counts `0..=max`.
pub fn poisson_pmf(mean: f64, max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut p = (-mean).exp();
    out.push(p);
    for k in 1..=max {
        p *= mean / k as f64;
        out.push(p);
    }
    out
}

/// `P(X > c)` for `X ~ Poisson(mean)`, summed directly over the upper tail.
pub fn poisson_upper_tail(mean: f64, c: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean + (c + 1) as f64 * mean.ln() - ln_factorial(c + 1)).exp();
    let mut sum = 0.0;
    let mut k = c + 1;
    loop {
        sum += term;
        k += 1;
        let ratio = mean / k as f64;
        term *= ratio;
        if term == 0.0 || (ratio < 1.0 && term / (1.0 - ratio) <= 1e-17 * sum) {
            return sum;
        }
    }
}

/// Logistic sigmoid and its inverse.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}
