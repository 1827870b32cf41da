//! Nelder–Mead simplex minimization with dimension-adaptive coefficients
//! (reflection 1, expansion 1 + 2/n, contraction 3/4 - 1/(2n),
//! shrink 1 - 1/n).

use alloc::vec;
use alloc::vec::Vec;


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Converged once `f_worst - f_best` falls below this...
    pub ftol: f64,
    /// ...and every vertex lies within this distance (max norm) of the best.
    pub xtol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            ftol: 1e-12,
            xtol: 1e-9,
            max_iter: 20_000,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Coefficients {
    reflect: f64,
    expand: f64,
    contract: f64,
    shrink: f64,
}

impl Coefficients {
    fn adaptive(n: usize) -> Self {
        let n = n as f64;
        Coefficients {
            reflect: 1.0,
            expand: 1.0 + 2.0 / n,
            contract: 0.75 - 0.5 / n,
            shrink: 1.0 - 1.0 / n,
        }
    }
}

/// Minimizes `f` starting from `x0`. Non-finite values are treated as `+∞`,
/// so the simplex retreats from regions where the objective is undefined.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let coef = Coefficients::adaptive(n.max(2));
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let point = |c: &[f64], worst: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(worst).map(|(ci, wi)| ci + t * (ci - wi)).collect()
    };

    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = vertices[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.is_finite() && spread < opts.ftol && diameter < opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        for (j, c) in centroid.iter_mut().enumerate() {
            *c = vertices[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64;
        }
        let worst = vertices[n].clone();

        let reflected = point(&centroid, &worst, coef.reflect);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = point(&centroid, &worst, coef.expand);
            let f_e = eval(&expanded);
            if f_e < f_r {
                vertices[n] = expanded;
                values[n] = f_e;
            } else {
                vertices[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            vertices[n] = reflected;
            values[n] = f_r;
            continue;
        }
        let (candidate, f_c, accept) = if f_r < values[n] {
            let outside = point(&centroid, &worst, coef.reflect * coef.contract);
            let f_o = eval(&outside);
            (outside, f_o, f_o <= f_r)
        } else {
            let inside = point(&centroid, &worst, -coef.contract);
            let f_i = eval(&inside);
            (inside, f_i, f_i < values[n])
        };
        if accept {
            vertices[n] = candidate;
            values[n] = f_c;
            continue;
        }
        let best = vertices[0].clone();
        for i in 1..=n {
            let shrunk: Vec<f64> = best
                .iter()
                .zip(&vertices[i])
                .map(|(b, v)| b + coef.shrink * (v - b))
                .collect();
            values[i] = eval(&shrunk);
            vertices[i] = shrunk;
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    SimplexResult {
        x: vertices[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}
