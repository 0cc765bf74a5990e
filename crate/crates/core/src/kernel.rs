//! Gaussian RBF kernel and kernel-power helpers.

use serde::{Deserialize, Serialize};

use crate::sparse::{squared_distance, SparseVector};

/// Gaussian kernel `k(a, b) = exp(-gamma * ||a - b||^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub gamma: f64,
}

impl Kernel {
    pub fn new(gamma: f64) -> Self {
        assert!(gamma > 0.0, "gamma must be positive");
        Kernel { gamma }
    }

    /// Kernel value in (0, 1]; underflow is clamped to the smallest positive
    /// normal so downstream logarithms stay finite.
    pub fn eval(&self, a: &SparseVector, b: &SparseVector) -> f64 {
        let v = (-self.gamma * squared_distance(a, b)).exp();
        if v < f64::MIN_POSITIVE {
            f64::MIN_POSITIVE
        } else {
            v
        }
    }
}

/// `kappa^exponent` for `kappa` in (0, 1], computed as `exp(exponent * ln kappa)`.
/// Exactly 1 at exponent 0; underflow is clamped like the kernel itself.
pub fn kappa_power(kappa: f64, exponent: f64) -> f64 {
    let v = (exponent * kappa.ln()).exp();
    if v < f64::MIN_POSITIVE {
        f64::MIN_POSITIVE
    } else {
        v
    }
}
