//! External force profile f(x1) > 0 and its potential Phi(x1), Phi(L0) = 0.

use crate::error::{Error, Result};
use crate::linalg::cubic4;

#[derive(Debug, Clone)]
enum Profile {
    Constant(f64),
    /// Uniformly sampled values on [l0, l1] with per-interval cubic
    /// interpolation; potential accumulated exactly from the cubics.
    Table { h: f64, values: Vec<f64>, potential: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct ForceProfile {
    l0: f64,
    l1: f64,
    profile: Profile,
}

impl ForceProfile {
    pub fn constant(value: f64, l0: f64, l1: f64) -> Result<Self> {
        if !(value > 0.0) {
            return Err(Error::Config {
                message: format!("force profile must be strictly positive, got constant {value}"),
            });
        }
        if !(l1 > l0) {
            return Err(Error::Config { message: format!("need L1 > L0, got [{l0}, {l1}]") });
        }
        Ok(Self { l0, l1, profile: Profile::Constant(value) })
    }

    /// Build from uniformly sampled values on [l0, l1]. Positivity is
    /// validated at every sample.
    pub fn from_table(values: Vec<f64>, l0: f64, l1: f64) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Config { message: "force table needs at least 4 samples".into() });
        }
        if !(l1 > l0) {
            return Err(Error::Config { message: format!("need L1 > L0, got [{l0}, {l1}]") });
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Config {
                message: format!("force profile must be strictly positive, table contains {bad}"),
            });
        }
        let h = (l1 - l0) / (values.len() - 1) as f64;
        let potential = crate::linalg::cumulative_integral(&values, h);
        Ok(Self { l0, l1, profile: Profile::Table { h, values, potential } })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.l0, self.l1)
    }

    /// f(x1); clamped evaluation at the domain ends.
    pub fn f(&self, x1: f64) -> f64 {
        match &self.profile {
            Profile::Constant(v) => *v,
            Profile::Table { h, values, .. } => {
                let n = values.len();
                let t = ((x1 - self.l0) / h).clamp(0.0, (n - 1) as f64);
                let i = (t.floor() as usize).min(n - 2);
                let s = i.saturating_sub(1).min(n - 4);
                let w = [values[s], values[s + 1], values[s + 2], values[s + 3]];
                cubic4(&w, t - s as f64)
            }
        }
    }

    /// Phi(x1) = integral of f from L0.
    pub fn phi(&self, x1: f64) -> f64 {
        match &self.profile {
            Profile::Constant(v) => v * (x1 - self.l0),
            Profile::Table { h, values, potential } => {
                let n = values.len();
                let t = ((x1 - self.l0) / h).clamp(0.0, (n - 1) as f64);
                let i = (t.floor() as usize).min(n - 2);
                // potential at node i plus the partial cubic panel
                let s = i.saturating_sub(1).min(n - 4);
                let w = [values[s], values[s + 1], values[s + 2], values[s + 3]];
                let ti = i as f64 - s as f64;
                potential[i] + partial_panel(&w, ti, t - s as f64) * h
            }
        }
    }
}

/// Integral of the Lagrange cubic through w at nodes 0..4, from a to b.
fn partial_panel(w: &[f64; 4], a: f64, b: f64) -> f64 {
    let int = |t: f64| -> [f64; 4] {
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        [
            -(t4 / 4.0 - 2.0 * t3 + 11.0 * t2 / 2.0 - 6.0 * t) / 6.0,
            (t4 / 4.0 - 5.0 * t3 / 3.0 + 3.0 * t2) / 2.0,
            -(t4 / 4.0 - 4.0 * t3 / 3.0 + 3.0 * t2 / 2.0) / 2.0,
            (t4 / 4.0 - t3 + t2) / 6.0,
        ]
    };
    let ia = int(a);
    let ib = int(b);
    (0..4).map(|k| w[k] * (ib[k] - ia[k])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_profile() {
        let f = ForceProfile::constant(0.1, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(f.f(0.3), 0.1);
        assert_abs_diff_eq!(f.phi(0.0), 0.0);
        assert_abs_diff_eq!(f.phi(0.6), 0.06);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(ForceProfile::constant(0.0, 0.0, 1.0).is_err());
        assert!(ForceProfile::from_table(vec![0.1, 0.2, -0.1, 0.2, 0.1], 0.0, 1.0).is_err());
    }

    #[test]
    fn table_matches_smooth_function() {
        // f(x) = 0.1 + 0.05 sin(pi x); Phi(x) = 0.1 x + 0.05 (1-cos(pi x))/pi
        let n = 201;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 / (n - 1) as f64;
                0.1 + 0.05 * (std::f64::consts::PI * x).sin()
            })
            .collect();
        let f = ForceProfile::from_table(vals, 0.0, 1.0).unwrap();
        for &x in &[0.013, 0.25, 0.5, 0.731, 1.0] {
            let fe = 0.1 + 0.05 * (std::f64::consts::PI * x).sin();
            let pe = 0.1 * x + 0.05 * (1.0 - (std::f64::consts::PI * x).cos()) / std::f64::consts::PI;
            assert_abs_diff_eq!(f.f(x), fe, epsilon = 1e-8);
            assert_abs_diff_eq!(f.phi(x), pe, epsilon = 1e-8);
        }
        // Phi' = f to integrator tolerance
        let h = 1e-5;
        for &x in &[0.2, 0.55, 0.9] {
            let dphi = (f.phi(x + h) - f.phi(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(dphi, f.f(x), epsilon = 1e-7);
        }
    }
}
