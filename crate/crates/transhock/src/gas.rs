//! Isentropic polytropic gas relations.
//!
//! Equation of state P = A rho^gamma with A fixed to one, sound speed
//! c^2 = gamma rho^(gamma-1), Bernoulli function
//! B = |u|^2/2 + gamma P / ((gamma-1) rho) - Phi.

use crate::error::{Error, Result};

/// Adiabatic exponent and the (fixed) pressure constant.
#[derive(Debug, Clone, Copy)]
pub struct GasParams {
    pub gamma: f64,
    /// Pressure constant in P = A rho^gamma; fixed to 1.
    pub a: f64,
}

impl GasParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::Config { message: format!("gamma must exceed 1, got {gamma}") });
        }
        Ok(Self { gamma, a: 1.0 })
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    pub fn sound_speed_sq(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 1.0)
    }

    /// Specific enthalpy gamma/(gamma-1) rho^(gamma-1) = c^2/(gamma-1).
    pub fn enthalpy(&self, rho: f64) -> f64 {
        self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
    }
}

/// Pressure and squared sound speed of a density.
pub fn thermo(rho: f64, gas: &GasParams) -> Result<(f64, f64)> {
    if !(rho > 0.0) {
        return Err(Error::NonPositiveDensity { rho });
    }
    Ok((gas.pressure(rho), gas.sound_speed_sq(rho)))
}

/// Bernoulli function of a full state.
pub fn bernoulli(u: [f64; 3], rho: f64, phi: f64, gas: &GasParams) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::NonPositiveDensity { rho });
    }
    let q2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    Ok(0.5 * q2 + gas.enthalpy(rho) - phi)
}

/// Invert the Bernoulli function for the density:
/// rho = ((gamma-1)/gamma)^(1/(gamma-1)) (B - |u|^2/2 + Phi)^(1/(gamma-1)).
/// The argument must stay positive (no vacuum).
pub fn bernoulli_density(b: f64, speed_sq: f64, phi: f64, gas: &GasParams) -> Option<f64> {
    let arg = b - 0.5 * speed_sq + phi;
    if arg <= 0.0 {
        return None;
    }
    let e = 1.0 / (gas.gamma - 1.0);
    Some(((gas.gamma - 1.0) / gas.gamma * arg).powf(e))
}

/// Point state of the 1-D background flow.
#[derive(Debug, Clone, Copy)]
pub struct State1D {
    pub x1: f64,
    pub rho: f64,
    pub u: f64,
}

impl State1D {
    pub fn pressure(&self, gas: &GasParams) -> f64 {
        gas.pressure(self.rho)
    }

    pub fn sound_speed_sq(&self, gas: &GasParams) -> f64 {
        gas.sound_speed_sq(self.rho)
    }

    pub fn mach_sq(&self, gas: &GasParams) -> f64 {
        self.u * self.u / self.sound_speed_sq(gas)
    }

    pub fn is_supersonic(&self, gas: &GasParams) -> bool {
        self.u * self.u > self.sound_speed_sq(gas)
    }

    /// Relative distance from sonic, |u^2 - c^2| / c^2.
    pub fn sonic_gap(&self, gas: &GasParams) -> f64 {
        let c2 = self.sound_speed_sq(gas);
        (self.u * self.u - c2).abs() / c2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gas(gamma: f64) -> GasParams {
        GasParams::new(gamma).unwrap()
    }

    #[test]
    fn thermo_examples() {
        let (p, c2) = thermo(1.0, &gas(1.4)).unwrap();
        assert_abs_diff_eq!(p, 1.0);
        assert_abs_diff_eq!(c2, 1.4);
        let (p, c2) = thermo(1.0, &gas(2.0)).unwrap();
        assert_abs_diff_eq!(p, 1.0);
        assert_abs_diff_eq!(c2, 2.0);
        let (p, c2) = thermo(2.0, &gas(2.0)).unwrap();
        assert_abs_diff_eq!(p, 4.0);
        assert_abs_diff_eq!(c2, 4.0);
    }

    #[test]
    fn thermo_rejects_nonpositive_density() {
        assert!(thermo(0.0, &gas(1.4)).is_err());
        assert!(thermo(-1.0, &gas(1.4)).is_err());
    }

    #[test]
    fn bernoulli_examples() {
        // gamma = 2, rho = 1: enthalpy = 2
        let b = bernoulli([1.0, 0.0, 0.0], 1.0, 0.0, &gas(2.0)).unwrap();
        assert_abs_diff_eq!(b, 2.5);
        let b = bernoulli([0.0, 0.0, 0.0], 1.0, 1.0, &gas(2.0)).unwrap();
        assert_abs_diff_eq!(b, 1.0);
    }

    #[test]
    fn bernoulli_density_round_trips() {
        // property: rho(B(u, rho, phi), |u|^2, phi) == rho over sampled states
        for &gamma in &[1.4, 2.0, 1.1, 3.0] {
            let g = gas(gamma);
            for i in 0..40 {
                let rho = 0.2 + 0.17 * i as f64;
                let u = [0.3 + 0.05 * i as f64, -0.2 + 0.01 * i as f64, 0.1];
                let phi = -1.0 + 0.09 * i as f64;
                let b = bernoulli(u, rho, phi, &g).unwrap();
                let q2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
                let back = bernoulli_density(b, q2, phi, &g).unwrap();
                assert_abs_diff_eq!(back, rho, epsilon = 1e-12 * rho);
            }
        }
    }
}
