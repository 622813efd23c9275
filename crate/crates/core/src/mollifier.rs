//! Compactly supported smoothings of the Dirac delta and the Heaviside step.
//!
//! Both have a transition band `[-eps, eps]`. `heaviside_eps` is C2 and its
//! derivative is exactly `delta_eps`, which is C1 with derivative
//! `delta_eps_prime`.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Width of the mollifier transition band, in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierParams {
    epsilon: f64,
}

impl MollifierParams {
    pub const DEFAULT_EPSILON: f64 = 0.15;

    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self { epsilon })
        } else {
            Err(Error::domain(format!("epsilon must be positive, got {epsilon}")))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self, x: f64) -> f64 {
        delta_eps(x, self.epsilon)
    }

    pub fn heaviside(&self, x: f64) -> f64 {
        heaviside_eps(x, self.epsilon)
    }

    pub fn delta_prime(&self, x: f64) -> f64 {
        delta_eps_prime(x, self.epsilon)
    }
}

impl Default for MollifierParams {
    fn default() -> Self {
        Self {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

#[inline]
pub fn delta_eps(x: f64, eps: f64) -> f64 {
    if x.abs() <= eps {
        (1.0 + (PI * x / eps).cos()) / (2.0 * eps)
    } else {
        0.0
    }
}

#[inline]
pub fn heaviside_eps(x: f64, eps: f64) -> f64 {
    if x > eps {
        1.0
    } else if x < -eps {
        0.0
    } else {
        0.5 * (1.0 + x / eps + (PI * x / eps).sin() / PI)
    }
}

#[inline]
pub fn delta_eps_prime(x: f64, eps: f64) -> f64 {
    if x.abs() <= eps {
        -(PI / (2.0 * eps * eps)) * (PI * x / eps).sin()
    } else {
        0.0
    }
}
