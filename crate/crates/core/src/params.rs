use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nondimensional constants of the bubble-liquid system.
///
/// The liquid obeys `p = (Ca/2) rho^gamma`, the gas inside the bubble obeys
/// `p_b = (Ca/2 + 2/We) R^(-3 gamma0)`, and the equilibrium is
/// `rho = 1, u = 0, R = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    /// Cavitation number.
    #[serde(rename = "Ca")]
    pub ca: f64,
    /// Weber number.
    #[serde(rename = "We")]
    pub we: f64,
    /// Viscosity.
    pub mu: f64,
    /// Adiabatic exponent of the liquid.
    pub gamma: f64,
    /// Polytropic exponent of the bubble gas.
    pub gamma0: f64,
}

impl Parameters {
    pub fn new(ca: f64, we: f64, mu: f64, gamma: f64, gamma0: f64) -> Result<Self> {
        let p = Self {
            ca,
            we,
            mu,
            gamma,
            gamma0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(name: &'static str, value: f64, ok: bool, what: &str) -> Result<()> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} must be {what}"),
                })
            }
        }
        check("Ca", self.ca, self.ca > 0.0, "positive")?;
        check("We", self.we, self.we > 0.0, "positive")?;
        check("mu", self.mu, self.mu > 0.0, "positive")?;
        check("gamma", self.gamma, self.gamma > 1.0, "greater than 1")?;
        check("gamma0", self.gamma0, self.gamma0 > 1.0, "greater than 1")?;
        Ok(())
    }

    /// `Ca/2 + 2/We`, the bubble pressure at `R = 1`.
    #[inline]
    pub fn bubble_coefficient(&self) -> f64 {
        0.5 * self.ca + 2.0 / self.we
    }

    /// Same parameters with a different viscosity.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }
}

impl Default for Parameters {
    /// The reference configuration used throughout the test-suite.
    fn default() -> Self {
        Self {
            ca: 1.0,
            we: 10.0,
            mu: 0.5,
            gamma: 1.4,
            gamma0: 1.4,
        }
    }
}
