use core::fmt;

use crate::error::{Error, Result};

/// One of the five estimated parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Param {
    Eta1,
    Eta2,
    R,
    Nu1,
    Nu2,
}

impl Param {
    pub const ALL: [Param; 5] = [Param::Eta1, Param::Eta2, Param::R, Param::Nu1, Param::Nu2];

    pub fn name(self) -> &'static str {
        match self {
            Param::Eta1 => "eta1",
            Param::Eta2 => "eta2",
            Param::R => "r",
            Param::Nu1 => "nu1",
            Param::Nu2 => "nu2",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Transmission amplitudes, effective squeezing, spurious-count rates and
/// the (fixed, unidentifiable) squeezing phase.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSet {
    pub eta1: f64,
    pub eta2: f64,
    pub r: f64,
    pub nu1: f64,
    pub nu2: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub phi: f64,
}

impl ParamSet {
    pub fn new(eta1: f64, eta2: f64, r: f64, nu1: f64, nu2: f64) -> Self {
        ParamSet {
            eta1,
            eta2,
            r,
            nu1,
            nu2,
            phi: 0.0,
        }
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn without_dark_counts(mut self) -> Self {
        self.nu1 = 0.0;
        self.nu2 = 0.0;
        self
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Eta1 => self.eta1,
            Param::Eta2 => self.eta2,
            Param::R => self.r,
            Param::Nu1 => self.nu1,
            Param::Nu2 => self.nu2,
        }
    }

    pub fn set(&mut self, p: Param, value: f64) {
        match p {
            Param::Eta1 => self.eta1 = value,
            Param::Eta2 => self.eta2 = value,
            Param::R => self.r = value,
            Param::Nu1 => self.nu1 = value,
            Param::Nu2 => self.nu2 = value,
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.eta1, self.eta2, self.r, self.nu1, self.nu2]
    }

    /// Mode swap: (η₁,ν₁) ↔ (η₂,ν₂).
    pub fn swapped(&self) -> Self {
        ParamSet {
            eta1: self.eta2,
            eta2: self.eta1,
            nu1: self.nu2,
            nu2: self.nu1,
            ..*self
        }
    }

    /// Lower and upper bounds of the closed domain of `p`.
    pub fn bounds(p: Param) -> (f64, f64) {
        match p {
            Param::Eta1 | Param::Eta2 => (0.0, 1.0),
            Param::R | Param::Nu1 | Param::Nu2 => (0.0, f64::INFINITY),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [Param::Eta1, Param::Eta2] {
            let v = self.get(p);
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Domain {
                    name: p.name(),
                    value: v,
                    domain: "(0, 1]",
                });
            }
        }
        for p in [Param::R, Param::Nu1, Param::Nu2] {
            let v = self.get(p);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name: p.name(),
                    value: v,
                    domain: "[0, inf)",
                });
            }
        }
        if !self.phi.is_finite() {
            return Err(Error::Domain {
                name: "phi",
                value: self.phi,
                domain: "finite",
            });
        }
        Ok(())
    }
}

/// Largest photon index kept per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cutoff {
    pub a: usize,
    pub b: usize,
}

impl Cutoff {
    pub fn new(a: usize, b: usize) -> Self {
        Cutoff { a, b }
    }

    pub fn square(c: usize) -> Self {
        Cutoff { a: c, b: c }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.a + 1, self.b + 1)
    }
}
