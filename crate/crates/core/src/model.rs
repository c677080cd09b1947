//! Parameter sets of the Gaussian hidden Markov random field.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Parameters of the spatial model: Gaussian emissions `N(mu_plus, sigma2)`
/// for `z = +1` and `N(mu_minus, sigma2)` for `z = -1`, coupling `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmrfParams<T> {
    pub mu_plus: T,
    pub mu_minus: T,
    pub sigma2: T,
    pub beta: T,
}

/// Spatio-temporal parameters: the spatial set plus temporal coupling `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StHmrfParams<T> {
    pub mu_plus: T,
    pub mu_minus: T,
    pub sigma2: T,
    pub beta: T,
    pub alpha: T,
}

/// Coupling parameters of the Gibbs prior. `alpha` is ignored on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling<T> {
    pub beta: T,
    pub alpha: T,
}

impl<T: Real> Coupling<T> {
    pub fn spatial(beta: T) -> Self {
        Self { beta, alpha: T::zero() }
    }

    pub fn new(beta: T, alpha: T) -> Self {
        Self { beta, alpha }
    }
}

/// Emission parameters only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emission<T> {
    pub mu_plus: T,
    pub mu_minus: T,
    pub sigma2: T,
}

impl<T: Real> Emission<T> {
    pub fn new(mu_plus: T, mu_minus: T, sigma2: T) -> Result<Self> {
        let e = Self { mu_plus, mu_minus, sigma2 };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > T::zero()) || !self.sigma2.is_finite() {
            return Err(invalid(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !self.mu_plus.is_finite() || !self.mu_minus.is_finite() {
            return Err(invalid("emission means must be finite"));
        }
        Ok(())
    }

    /// `-(y - mu_z)^2 / (2 sigma2)`; the shared normalising term is dropped.
    #[inline]
    pub fn log_kernel(&self, y: T, spin: i8) -> T {
        let mu = if spin > 0 { self.mu_plus } else { self.mu_minus };
        let d = y - mu;
        -(d * d) / (self.sigma2 + self.sigma2)
    }

    /// Full Gaussian log density of `y` given the spin.
    pub fn log_density(&self, y: T, spin: i8) -> T {
        let two = T::lit(2.0);
        self.log_kernel(y, spin) - (two * T::PI() * self.sigma2).ln() / two
    }

    /// `P(z = +1 | y)` with equal prior weight on both classes.
    pub fn responsibility(&self, y: T) -> T {
        let d = self.log_kernel(y, 1) - self.log_kernel(y, -1);
        T::one() / (T::one() + (-d).exp())
    }
}

impl<T: Real> HmrfParams<T> {
    pub fn new(mu_plus: T, mu_minus: T, sigma2: T, beta: T) -> Result<Self> {
        Emission::new(mu_plus, mu_minus, sigma2)?;
        Ok(Self { mu_plus, mu_minus, sigma2, beta })
    }

    pub fn emission(&self) -> Emission<T> {
        Emission { mu_plus: self.mu_plus, mu_minus: self.mu_minus, sigma2: self.sigma2 }
    }

    pub fn coupling(&self) -> Coupling<T> {
        Coupling::spatial(self.beta)
    }

    pub fn with_alpha(&self, alpha: T) -> StHmrfParams<T> {
        StHmrfParams { mu_plus: self.mu_plus, mu_minus: self.mu_minus, sigma2: self.sigma2, beta: self.beta, alpha }
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.mu_plus, self.mu_minus, self.sigma2, self.beta]
    }
}

impl<T: Real> StHmrfParams<T> {
    pub fn new(mu_plus: T, mu_minus: T, sigma2: T, beta: T, alpha: T) -> Result<Self> {
        Emission::new(mu_plus, mu_minus, sigma2)?;
        Ok(Self { mu_plus, mu_minus, sigma2, beta, alpha })
    }

    pub fn emission(&self) -> Emission<T> {
        Emission { mu_plus: self.mu_plus, mu_minus: self.mu_minus, sigma2: self.sigma2 }
    }

    pub fn coupling(&self) -> Coupling<T> {
        Coupling::new(self.beta, self.alpha)
    }

    pub fn spatial(&self) -> HmrfParams<T> {
        HmrfParams { mu_plus: self.mu_plus, mu_minus: self.mu_minus, sigma2: self.sigma2, beta: self.beta }
    }

    pub fn from_parts(e: Emission<T>, c: Coupling<T>) -> Self {
        Self { mu_plus: e.mu_plus, mu_minus: e.mu_minus, sigma2: e.sigma2, beta: c.beta, alpha: c.alpha }
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.mu_plus, self.mu_minus, self.sigma2, self.beta, self.alpha]
    }
}

impl<T: Real> From<HmrfParams<T>> for StHmrfParams<T> {
    fn from(p: HmrfParams<T>) -> Self {
        p.with_alpha(T::zero())
    }
}
