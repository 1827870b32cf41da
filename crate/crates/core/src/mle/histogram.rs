use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::Cutoff;

/// Joint photon-count histogram `μ_mn` over a rectangular grid, plus the
/// number of shots that landed beyond the grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Histogram {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    overflow: u64,
}

impl Histogram {
    pub fn zeros(cutoff: Cutoff) -> Self {
        let (rows, cols) = cutoff.shape();
        Histogram {
            rows,
            cols,
            counts: vec![0; rows * cols],
            overflow: 0,
        }
    }

    /// Row-major counts on a `(cutoff.a + 1) × (cutoff.b + 1)` grid.
    pub fn from_counts(cutoff: Cutoff, counts: Vec<u64>, overflow: u64) -> Result<Self> {
        let (rows, cols) = cutoff.shape();
        if counts.len() != rows * cols {
            return Err(Error::InvalidArgument("count grid has the wrong length"));
        }
        Ok(Histogram {
            rows,
            cols,
            counts,
            overflow,
        })
    }

    /// Bins a list of per-shot `(m, n)` outcomes on the smallest grid that
    /// holds them.
    pub fn from_shots<I: IntoIterator<Item = (usize, usize)>>(shots: I) -> Result<Self> {
        let shots: Vec<(usize, usize)> = shots.into_iter().collect();
        if shots.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        let a = shots.iter().map(|s| s.0).max().unwrap_or(0);
        let b = shots.iter().map(|s| s.1).max().unwrap_or(0);
        let mut h = Histogram::zeros(Cutoff::new(a, b));
        for (m, n) in shots {
            h.increment(m, n);
        }
        Ok(h)
    }

    pub fn cutoff(&self) -> Cutoff {
        Cutoff::new(self.rows - 1, self.cols - 1)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, m: usize, n: usize) -> u64 {
        self.counts[m * self.cols + n]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Shots beyond the grid.
    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// `μ = Σ μ_mn` over the grid.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Grid total plus overflow.
    pub fn shots(&self) -> u64 {
        self.total() + self.overflow
    }

    pub fn increment(&mut self, m: usize, n: usize) {
        if m < self.rows && n < self.cols {
            self.counts[m * self.cols + n] += 1;
        } else {
            self.overflow += 1;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let cols = self.cols;
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i / cols, i % cols, c))
    }

    /// Largest photon numbers observed in each mode.
    pub fn max_observed(&self) -> Option<(usize, usize)> {
        let mut out: Option<(usize, usize)> = None;
        for (m, n, c) in self.iter() {
            if c > 0 {
                let (a, b) = out.unwrap_or((0, 0));
                out = Some((a.max(m), b.max(n)));
            }
        }
        out
    }

    /// The same counts on the smallest grid holding every occupied bin.
    pub fn trimmed(&self) -> Histogram {
        match self.max_observed() {
            Some((a, b)) => self.resized(Cutoff::new(a, b)),
            None => self.resized(Cutoff::square(0)),
        }
    }

    /// Re-grids to `cutoff`; counts falling outside move into the overflow.
    pub fn resized(&self, cutoff: Cutoff) -> Histogram {
        let mut out = Histogram::zeros(cutoff);
        out.overflow = self.overflow;
        for (m, n, c) in self.iter() {
            if m <= cutoff.a && n <= cutoff.b {
                out.counts[m * out.cols + n] += c;
            } else {
                out.overflow += c;
            }
        }
        out
    }

    /// Element-wise sum; grids must agree.
    pub fn add(&mut self, other: &Histogram) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn scaled(&self, factor: u64) -> Histogram {
        Histogram {
            counts: self.counts.iter().map(|c| c * factor).collect(),
            overflow: self.overflow * factor,
            ..*self
        }
    }

    /// Observed frequencies `q(m,n) = μ_mn / μ` on the grid.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyHistogram);
        }
        Ok(self.counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn mean_a(&self) -> f64 {
        let total = self.total().max(1) as f64;
        self.iter().map(|(m, _, c)| m as f64 * c as f64).sum::<f64>() / total
    }

    pub fn mean_b(&self) -> f64 {
        let total = self.total().max(1) as f64;
        self.iter().map(|(_, n, c)| n as f64 * c as f64).sum::<f64>() / total
    }
}
