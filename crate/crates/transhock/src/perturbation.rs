//! The built-in compatibility-respecting perturbation family.
//!
//! Inflow data, exit-pressure data and the force perturbation are finite
//! trigonometric sums. The wall compatibility conditions restrict which
//! factors each component may use:
//!   u10, P0, P_ex, Phi0 : cos(m pi y2) cos(n pi y3)
//!   u20                 : sin(k pi y2) cos(n pi y3)
//!   u30                 : cos(m pi y2) sin(k pi y3)
//! Phi0 carries an additional polynomial axial profile p(x1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Cos,
    Sin,
}

/// One product mode amp * f2(k2 pi y2) * f3(k3 pi y3).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub fn2: TrigKind,
    pub k2: u32,
    pub fn3: TrigKind,
    pub k3: u32,
    pub amp: f64,
}

impl Mode {
    fn factor(kind: TrigKind, k: u32, y: f64) -> f64 {
        match kind {
            TrigKind::Cos => (k as f64 * PI * y).cos(),
            TrigKind::Sin => (k as f64 * PI * y).sin(),
        }
    }

    fn dfactor(kind: TrigKind, k: u32, y: f64) -> f64 {
        let kp = k as f64 * PI;
        match kind {
            TrigKind::Cos => -kp * (kp * y).sin(),
            TrigKind::Sin => kp * (kp * y).cos(),
        }
    }

    pub fn eval(&self, y2: f64, y3: f64) -> f64 {
        self.amp * Self::factor(self.fn2, self.k2, y2) * Self::factor(self.fn3, self.k3, y3)
    }

    pub fn d_dy2(&self, y2: f64, y3: f64) -> f64 {
        self.amp * Self::dfactor(self.fn2, self.k2, y2) * Self::factor(self.fn3, self.k3, y3)
    }

    pub fn d_dy3(&self, y2: f64, y3: f64) -> f64 {
        self.amp * Self::factor(self.fn2, self.k2, y2) * Self::dfactor(self.fn3, self.k3, y3)
    }
}

/// Sum of product modes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeSum {
    pub modes: Vec<Mode>,
}

impl ModeSum {
    pub fn eval(&self, y2: f64, y3: f64) -> f64 {
        self.modes.iter().map(|m| m.eval(y2, y3)).sum()
    }

    pub fn d_dy2(&self, y2: f64, y3: f64) -> f64 {
        self.modes.iter().map(|m| m.d_dy2(y2, y3)).sum()
    }

    pub fn d_dy3(&self, y2: f64, y3: f64) -> f64 {
        self.modes.iter().map(|m| m.d_dy3(y2, y3)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// Force perturbation Phi0 = sum of transverse modes times a shared
/// polynomial axial profile p(x1) = poly[0] + poly[1] x1 + ...
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcePerturbation {
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub poly: Vec<f64>,
}

impl ForcePerturbation {
    fn p(&self, x1: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.poly.iter().rev() {
            acc = acc * x1 + c;
        }
        acc
    }

    fn dp(&self, x1: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.poly.iter().enumerate().skip(1).rev() {
            acc = acc * x1 + k as f64 * c;
        }
        acc
    }

    pub fn eval(&self, x1: f64, y2: f64, y3: f64) -> f64 {
        let p = self.p(x1);
        self.modes.iter().map(|m| m.eval(y2, y3)).sum::<f64>() * p
    }

    pub fn d_dx1(&self, x1: f64, y2: f64, y3: f64) -> f64 {
        let dp = self.dp(x1);
        self.modes.iter().map(|m| m.eval(y2, y3)).sum::<f64>() * dp
    }

    pub fn d_dy2(&self, x1: f64, y2: f64, y3: f64) -> f64 {
        self.modes.iter().map(|m| m.d_dy2(y2, y3)).sum::<f64>() * self.p(x1)
    }

    pub fn d_dy3(&self, x1: f64, y2: f64, y3: f64) -> f64 {
        self.modes.iter().map(|m| m.d_dy3(y2, y3)).sum::<f64>() * self.p(x1)
    }
}

/// The full perturbation data set scaled by eps at evaluation sites.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub eps: f64,
    #[serde(default)]
    pub u10: ModeSum,
    #[serde(default)]
    pub u20: ModeSum,
    #[serde(default)]
    pub u30: ModeSum,
    #[serde(default)]
    pub p0: ModeSum,
    #[serde(default)]
    pub p_ex: ModeSum,
    #[serde(default)]
    pub phi0: ForcePerturbation,
}

fn require(cond: bool, field: &'static str, mode: &Mode, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::CompatibilityViolation {
            field,
            detail: format!(
                "mode (fn2 = {:?}, k2 = {}, fn3 = {:?}, k3 = {}): {what}",
                mode.fn2, mode.k2, mode.fn3, mode.k3
            ),
        })
    }
}

impl PerturbationSpec {
    /// Enforce the wall compatibility of every mode. The trigonometric
    /// families make the conditions hold identically, so the check is a set
    /// of structural rules on the factor kinds.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) {
            return Err(Error::Config { message: format!("eps must be >= 0, got {}", self.eps) });
        }
        let cc = |field: &'static str, ms: &ModeSum| -> Result<()> {
            for m in &ms.modes {
                require(m.fn2 == TrigKind::Cos, field, m, "y2 factor must be cos (normal derivative vanishes at y2 walls)")?;
                require(m.fn3 == TrigKind::Cos, field, m, "y3 factor must be cos (normal derivative vanishes at y3 walls)")?;
            }
            Ok(())
        };
        cc("u10", &self.u10)?;
        cc("p0", &self.p0)?;
        cc("p_ex", &self.p_ex)?;
        for m in &self.u20.modes {
            require(m.fn2 == TrigKind::Sin && m.k2 >= 1, "u20", m, "y2 factor must be sin(k pi y2), k >= 1 (value and second derivative vanish at y2 walls)")?;
            require(m.fn3 == TrigKind::Cos, "u20", m, "y3 factor must be cos")?;
        }
        for m in &self.u30.modes {
            require(m.fn2 == TrigKind::Cos, "u30", m, "y2 factor must be cos")?;
            require(m.fn3 == TrigKind::Sin && m.k3 >= 1, "u30", m, "y3 factor must be sin(k pi y3), k >= 1")?;
        }
        for m in &self.phi0.modes {
            require(m.fn2 == TrigKind::Cos, "phi0", m, "y2 factor must be cos")?;
            require(m.fn3 == TrigKind::Cos, "phi0", m, "y3 factor must be cos")?;
        }
        self.validate_numerically()
    }

    /// Belt-and-braces numerical check of the compatibility conditions at
    /// sampled wall points.
    fn validate_numerically(&self) -> Result<()> {
        let tol = 1e-12;
        for s in 0..9 {
            let t = -1.0 + 0.25 * s as f64;
            let checks = [
                ("u20", self.u20.eval(1.0, t).abs()),
                ("u20", self.u20.eval(-1.0, t).abs()),
                ("u30", self.u30.eval(t, 1.0).abs()),
                ("u30", self.u30.eval(t, -1.0).abs()),
                ("u10", self.u10.d_dy2(1.0, t).abs()),
                ("u10", self.u10.d_dy2(-1.0, t).abs()),
                ("u10", self.u10.d_dy3(t, 1.0).abs()),
                ("p0", self.p0.d_dy2(1.0, t).abs()),
                ("p0", self.p0.d_dy3(t, -1.0).abs()),
                ("p_ex", self.p_ex.d_dy2(1.0, t).abs()),
                ("p_ex", self.p_ex.d_dy3(t, 1.0).abs()),
                ("phi0", self.phi0.d_dy2(0.3, 1.0, t).abs()),
                ("phi0", self.phi0.d_dy3(0.3, t, -1.0).abs()),
            ];
            for (field, v) in checks {
                if v > tol {
                    return Err(Error::CompatibilityViolation {
                        field: match field {
                            "u20" => "u20",
                            "u30" => "u30",
                            "u10" => "u10",
                            "p0" => "p0",
                            "p_ex" => "p_ex",
                            _ => "phi0",
                        },
                        detail: format!("numerical wall check failed with residual {v:.2e}"),
                    });
                }
            }
        }
        Ok(())
    }
}
