//! The 1-D transonic shock background: branch integration, the
//! Rankine-Hugoniot jump, the monotone shock-position/exit-pressure map and
//! the derived iteration coefficients.
//!
//! With constant mass flux m = rho u the momentum equation reduces to the
//! scalar ODE u' = f u / (u^2 - c^2(m/u)), singular at sonic. The supersonic
//! branch is integrated from the inflow state, the subsonic branch from the
//! jump state at the shock, both extended over the whole nozzle.

use crate::error::{Error, Result};
use crate::force::ForceProfile;
use crate::gas::{GasParams, State1D};

/// Relative sonic gap below which a branch integration aborts.
pub const SONIC_GUARD: f64 = 1e-6;
/// Nodes in each full-length branch tabulation.
pub const BG_TABLE_NODES: usize = 2049;
/// Shock-position bisection budget.
pub const MAX_BISECT: usize = 200;

fn u_prime(x1: f64, u: f64, m: f64, force: &ForceProfile, gas: &GasParams) -> Result<f64> {
    let rho = m / u;
    let c2 = gas.sound_speed_sq(rho);
    let gap = (u * u - c2).abs() / c2;
    if gap < SONIC_GUARD {
        return Err(Error::SonicEncountered { x1, gap });
    }
    Ok(force.f(x1) * u / (u * u - c2))
}

/// Uniform tabulation of one branch with cubic Hermite dense output.
#[derive(Debug, Clone)]
pub struct BranchTable {
    pub x0: f64,
    pub h: f64,
    pub m: f64,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl BranchTable {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.h * (self.u.len() - 1) as f64
    }

    pub fn u_at(&self, x1: f64) -> f64 {
        let n = self.u.len();
        let t = (x1 - self.x0) / self.h;
        let tc = t.clamp(0.0, (n - 1) as f64);
        let i = (tc.floor() as usize).min(n - 2);
        let s = tc - i as f64;
        // cubic Hermite on [i, i+1]
        let (u0, u1) = (self.u[i], self.u[i + 1]);
        let (d0, d1) = (self.du[i] * self.h, self.du[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        u0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d0 * (s3 - 2.0 * s2 + s)
            + u1 * (-2.0 * s3 + 3.0 * s2)
            + d1 * (s3 - s2)
    }

    pub fn state_at(&self, x1: f64) -> State1D {
        let u = self.u_at(x1);
        State1D { x1, rho: self.m / u, u }
    }
}

/// RK4 tabulation of the branch ODE from `start` at `xa` to `xb` over `n`
/// uniform nodes (xb may be on either side of xa). Nodes are returned in
/// integration order.
pub fn integrate_branch(
    start: State1D,
    xa: f64,
    xb: f64,
    n: usize,
    force: &ForceProfile,
    gas: &GasParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    assert!(n >= 2);
    if start.sonic_gap(gas) < SONIC_GUARD {
        return Err(Error::SonicEncountered { x1: xa, gap: start.sonic_gap(gas) });
    }
    let m = start.rho * start.u;
    let h = (xb - xa) / (n - 1) as f64;
    let mut us = Vec::with_capacity(n);
    let mut dus = Vec::with_capacity(n);
    let mut u = start.u;
    us.push(u);
    dus.push(u_prime(xa, u, m, force, gas)?);
    for i in 0..n - 1 {
        let x = xa + h * i as f64;
        let k1 = u_prime(x, u, m, force, gas)?;
        let k2 = u_prime(x + 0.5 * h, u + 0.5 * h * k1, m, force, gas)?;
        let k3 = u_prime(x + 0.5 * h, u + 0.5 * h * k2, m, force, gas)?;
        let k4 = u_prime(x + h, u + h * k3, m, force, gas)?;
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        us.push(u);
        dus.push(u_prime(x + h, u, m, force, gas)?);
    }
    Ok((us, dus))
}

fn branch_table(
    start: State1D,
    xa: f64,
    xb: f64,
    n: usize,
    force: &ForceProfile,
    gas: &GasParams,
) -> Result<BranchTable> {
    let m = start.rho * start.u;
    let (mut u, mut du) = integrate_branch(start, xa, xb, n, force, gas)?;
    let (x0, h) = if xb >= xa {
        (xa, (xb - xa) / (n - 1) as f64)
    } else {
        u.reverse();
        du.reverse();
        (xb, (xa - xb) / (n - 1) as f64)
    };
    Ok(BranchTable { x0, h, m, u, du })
}

/// Subsonic state sharing mass and momentum flux with a supersonic state.
///
/// Roots of m u + (m/u)^gamma = const: bracketed bisection on (0, u_sonic)
/// followed by Newton polish.
pub fn rh_jump_1d(upstream: &State1D, gas: &GasParams) -> Result<State1D> {
    let c2 = upstream.sound_speed_sq(gas);
    if upstream.sonic_gap(gas) < SONIC_GUARD {
        return Err(Error::SonicEncountered { x1: upstream.x1, gap: upstream.sonic_gap(gas) });
    }
    if upstream.u * upstream.u < c2 {
        return Err(Error::Config {
            message: format!("rh_jump_1d needs a supersonic upstream state at x1 = {}", upstream.x1),
        });
    }
    let m = upstream.rho * upstream.u;
    let flux = m * upstream.u + upstream.pressure(gas);
    let g = |u: f64| m * u + (m / u).powf(gas.gamma) - flux;
    let dg = |u: f64| m * (1.0 - gas.sound_speed_sq(m / u) / (u * u));
    // sonic speed from u^(gamma+1) = gamma m^(gamma-1)
    let u_sonic = (gas.gamma * m.powf(gas.gamma - 1.0)).powf(1.0 / (gas.gamma + 1.0));
    let mut lo = 1e-8 * u_sonic;
    let mut hi = u_sonic * (1.0 - 1e-12);
    if !(g(lo) > 0.0 && g(hi) < 0.0) {
        return Err(Error::NoSubsonicRoot { flux, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * u_sonic {
            break;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..3 {
        u -= g(u) / dg(u);
    }
    if !(u > 0.0 && u < u_sonic) {
        return Err(Error::NoSubsonicRoot { flux, lo, hi });
    }
    Ok(State1D { x1: upstream.x1, rho: m / u, u })
}

/// Subsonic branch tabulated on both sides of the shock.
#[derive(Debug, Clone)]
pub struct SubsonicBranch {
    pub ls: f64,
    left: BranchTable,
    right: BranchTable,
}

impl SubsonicBranch {
    pub fn state_at(&self, x1: f64) -> State1D {
        if x1 <= self.ls {
            self.left.state_at(x1)
        } else {
            self.right.state_at(x1)
        }
    }
}

/// The complete 1-D background transonic shock.
#[derive(Debug, Clone)]
pub struct BackgroundSolution {
    pub gas: GasParams,
    pub force: ForceProfile,
    pub l0: f64,
    pub l1: f64,
    pub ls: f64,
    /// Mass flux rho u, shared by both branches.
    pub m: f64,
    pub supersonic: BranchTable,
    pub subsonic: SubsonicBranch,
    /// Exit pressure actually attained by the subsonic branch at L1.
    pub pe: f64,
    /// Bernoulli constants of the two branches.
    pub b_plus: f64,
    pub b_minus: f64,
}

impl BackgroundSolution {
    pub fn sup_state(&self, x1: f64) -> State1D {
        self.supersonic.state_at(x1)
    }

    pub fn sub_state(&self, x1: f64) -> State1D {
        self.subsonic.state_at(x1)
    }

    pub fn u_plus(&self, x1: f64) -> f64 {
        self.sub_state(x1).u
    }

    pub fn rho_plus(&self, x1: f64) -> f64 {
        self.m / self.u_plus(x1)
    }

    pub fn p_plus(&self, x1: f64) -> f64 {
        self.gas.pressure(self.rho_plus(x1))
    }

    pub fn c2_plus(&self, x1: f64) -> f64 {
        self.gas.sound_speed_sq(self.rho_plus(x1))
    }

    /// du/dx on the subsonic branch, evaluated through the ODE itself.
    pub fn u_plus_prime(&self, x1: f64) -> f64 {
        let s = self.sub_state(x1);
        self.force.f(x1) * s.u / (s.u * s.u - s.sound_speed_sq(&self.gas))
    }

    pub fn u_minus(&self, x1: f64) -> f64 {
        self.sup_state(x1).u
    }

    pub fn rho_minus(&self, x1: f64) -> f64 {
        self.m / self.u_minus(x1)
    }

    pub fn p_minus(&self, x1: f64) -> f64 {
        self.gas.pressure(self.rho_minus(x1))
    }

    pub fn phi(&self, x1: f64) -> f64 {
        self.force.phi(x1)
    }

    pub fn f(&self, x1: f64) -> f64 {
        self.force.f(x1)
    }

    /// Pressure jump [P](Ls) > 0.
    pub fn pressure_jump(&self) -> f64 {
        self.p_plus(self.ls) - self.p_minus(self.ls)
    }

    pub fn mach_sq_plus(&self, x1: f64) -> f64 {
        self.sub_state(x1).mach_sq(&self.gas)
    }

    pub fn d1(&self, x1: f64) -> f64 {
        1.0 - self.mach_sq_plus(x1)
    }

    pub fn d1_prime(&self, x1: f64) -> f64 {
        let s = self.sub_state(x1);
        let m2 = s.mach_sq(&self.gas);
        -(self.gas.gamma + 1.0) * m2 * self.u_plus_prime(x1) / s.u
    }

    pub fn d2(&self, x1: f64) -> f64 {
        let s = self.sub_state(x1);
        let c2 = s.sound_speed_sq(&self.gas);
        (self.force.f(x1) - (self.gas.gamma + 1.0) * s.u * self.u_plus_prime(x1)) / c2
    }

    pub fn d3(&self, x1: f64) -> f64 {
        let s = self.sub_state(x1);
        (self.gas.gamma - 1.0) * self.u_plus_prime(x1) / s.sound_speed_sq(&self.gas)
    }

    pub fn d6(&self, x1: f64) -> f64 {
        -self.d1_prime(x1) + self.d2(x1)
    }

    /// Checks the constructive invariants; used at construction and in tests.
    pub fn validate(&self) -> Result<()> {
        let n = 257;
        for i in 0..n {
            let x = self.l0 + (self.l1 - self.l0) * i as f64 / (n - 1) as f64;
            let sup = self.sup_state(x);
            let sub = self.sub_state(x);
            if !sup.is_supersonic(&self.gas) {
                return Err(Error::SupersonicLost { x1: x, min_margin: -sup.sonic_gap(&self.gas) });
            }
            if sub.is_supersonic(&self.gas) {
                return Err(Error::Config {
                    message: format!("subsonic branch went supersonic at x1 = {x}"),
                });
            }
        }
        // Rankine-Hugoniot residuals at the shock
        let a = self.sup_state(self.ls);
        let b = self.sub_state(self.ls);
        let mass = (b.rho * b.u - a.rho * a.u).abs();
        let mom = ((b.rho * b.u * b.u + b.pressure(&self.gas))
            - (a.rho * a.u * a.u + a.pressure(&self.gas)))
        .abs();
        if mass > 1e-10 * self.m || mom > 1e-9 * (self.m * a.u) {
            return Err(Error::Config {
                message: format!("RH residuals too large at shock: mass {mass:.3e}, momentum {mom:.3e}"),
            });
        }
        if self.pressure_jump() <= 0.0 {
            return Err(Error::EntropyViolated { margin: self.pressure_jump() });
        }
        if !(self.l0 < self.ls && self.ls < self.l1) {
            return Err(Error::Config { message: "shock position outside nozzle".into() });
        }
        Ok(())
    }
}

fn bernoulli_of_branch(state: &State1D, phi: f64, gas: &GasParams) -> f64 {
    0.5 * state.u * state.u + gas.enthalpy(state.rho) - phi
}

/// Exit pressure produced by placing the shock at `ls`.
fn exit_pressure_for(
    ls: f64,
    sup: &BranchTable,
    l1: f64,
    force: &ForceProfile,
    gas: &GasParams,
) -> Result<f64> {
    let upstream = sup.state_at(ls);
    let jump = rh_jump_1d(&upstream, gas)?;
    let n = 513;
    let (u, _) = integrate_branch(jump, ls, l1, n, force, gas)?;
    let rho_exit = sup.m / u[n - 1];
    Ok(gas.pressure(rho_exit))
}

/// Exit pressures for shocks one table step inside each nozzle end,
/// returned as (P1, P0) with P1 < P0.
pub fn admissible_pressure_range(
    inflow: State1D,
    force: &ForceProfile,
    gas: &GasParams,
    l0: f64,
    l1: f64,
) -> Result<(f64, f64)> {
    if !inflow.is_supersonic(gas) {
        return Err(Error::Config { message: "inflow state must be supersonic".into() });
    }
    let sup = branch_table(inflow, l0, l1, BG_TABLE_NODES, force, gas)?;
    let delta = sup.h;
    let p0 = exit_pressure_for(l0 + delta, &sup, l1, force, gas)?;
    let p1 = exit_pressure_for(l1 - delta, &sup, l1, force, gas)?;
    if !(p1 < p0) {
        return Err(Error::Config {
            message: format!("exit-pressure map is not decreasing: P1 = {p1}, P0 = {p0}"),
        });
    }
    Ok((p1, p0))
}

/// Locate the shock position whose downstream branch attains exit pressure
/// `pe`, by bisection on the monotone map, and assemble the background.
pub fn find_shock_position(
    pe: f64,
    inflow: State1D,
    force: &ForceProfile,
    gas: &GasParams,
    l0: f64,
    l1: f64,
) -> Result<BackgroundSolution> {
    if !inflow.is_supersonic(gas) {
        return Err(Error::Config { message: "inflow state must be supersonic".into() });
    }
    let sup = branch_table(inflow, l0, l1, BG_TABLE_NODES, force, gas)?;
    let delta = sup.h;
    let p0 = exit_pressure_for(l0 + delta, &sup, l1, force, gas)?;
    let p1 = exit_pressure_for(l1 - delta, &sup, l1, force, gas)?;
    if !(pe > p1 && pe < p0) {
        return Err(Error::PressureOutOfRange { pe, p1, p0 });
    }
    let tol = 1e-9 * p0;
    let mut lo = l0 + delta; // Pe(lo) = p0 >= pe
    let mut hi = l1 - delta; // Pe(hi) = p1 <= pe
    let mut ls = 0.5 * (lo + hi);
    let mut best = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_BISECT {
        ls = 0.5 * (lo + hi);
        let p = exit_pressure_for(ls, &sup, l1, force, gas)?;
        best = p;
        if (p - pe).abs() <= tol {
            converged = true;
            break;
        }
        if p > pe {
            lo = ls;
        } else {
            hi = ls;
        }
    }
    if !converged {
        return Err(Error::BisectionStalled { target: pe, best, iters: MAX_BISECT });
    }

    let m = inflow.rho * inflow.u;
    let upstream = sup.state_at(ls);
    let jump = rh_jump_1d(&upstream, gas)?;
    let frac_left = ((ls - l0) / (l1 - l0)).max(1e-3);
    let n_left = ((BG_TABLE_NODES as f64 * frac_left) as usize).max(8);
    let n_right = ((BG_TABLE_NODES as f64 * (1.0 - frac_left)) as usize).max(8);
    let left = branch_table(jump, ls, l0, n_left, force, gas)?;
    let right = branch_table(jump, ls, l1, n_right, force, gas)?;
    let pe_attained = gas.pressure(m / right.u_at(l1));
    let sub = SubsonicBranch { ls, left, right };
    let b_plus = bernoulli_of_branch(&jump, force.phi(ls), gas);
    let b_minus = bernoulli_of_branch(&inflow, force.phi(l0), gas);
    let bg = BackgroundSolution {
        gas: *gas,
        force: force.clone(),
        l0,
        l1,
        ls,
        m,
        supersonic: sup,
        subsonic: sub,
        pe: pe_attained,
        b_plus,
        b_minus,
    };
    bg.validate()?;
    Ok(bg)
}

/// Scalar coefficients and coefficient tables of the linearized iteration.
#[derive(Debug, Clone)]
pub struct IterationCoeffs {
    pub a0: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    /// R1 = b11 R01 + b12 R02.
    pub b11: f64,
    pub b12: f64,
    /// R2 = b21 R01 + b22 R02 + R03.
    pub b21: f64,
    pub b22: f64,
    /// Tables on the solver y1 grid [Ls, L1].
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub d4: Vec<f64>,
    pub d5: Vec<f64>,
    pub d6: Vec<f64>,
    /// d1 at midpoints y1_(i-1/2), i = 0..n1, for the divergence-form solve.
    pub d1_half: Vec<f64>,
}

/// Evaluate all iteration coefficients on the given y1 grid.
pub fn iteration_coefficients(bg: &BackgroundSolution, n1: usize) -> Result<IterationCoeffs> {
    let gas = bg.gas;
    let ls = bg.ls;
    let up = bg.u_plus(ls);
    let rp = bg.rho_plus(ls);
    let c2 = gas.sound_speed_sq(rp);
    let rm = bg.rho_minus(ls);
    let f_ls = bg.f(ls);
    let jump_p = bg.pressure_jump();
    let drho = rp - rm;
    let denom = c2 - up * up;

    let a0 = bg.m / jump_p;
    let b0 = -drho * f_ls / denom;
    let b1 = up * drho * f_ls / (rp * denom);
    let b2 = -drho * f_ls / rp;
    let b11 = (up * up + c2) / (rp * denom);
    let b12 = -up / (rp * denom);
    let b21 = -up / rp;
    let b22 = 1.0 / rp;

    let h = (bg.l1 - ls) / (n1 - 1) as f64;
    let y1 = |i: usize| ls + h * i as f64;
    let d1: Vec<f64> = (0..n1).map(|i| bg.d1(y1(i))).collect();
    let d2: Vec<f64> = (0..n1).map(|i| bg.d2(y1(i))).collect();
    let d3: Vec<f64> = (0..n1).map(|i| bg.d3(y1(i))).collect();
    let d4: Vec<f64> = (0..n1).map(|i| b2 / (b1 * bg.u_plus(y1(i)))).collect();
    let d5: Vec<f64> = (0..n1)
        .map(|i| {
            let x = y1(i);
            let u = bg.u_plus(x);
            2.0 * b2 * bg.f(x) / (b1 * u * (bg.c2_plus(x) - u * u))
        })
        .collect();
    let d6: Vec<f64> = (0..n1).map(|i| bg.d6(y1(i))).collect();
    let d1_half: Vec<f64> = (0..=n1).map(|i| bg.d1(ls + h * (i as f64 - 0.5))).collect();

    let b3 = 1.0 - b2 / (b1 * up);
    let b4 = a0 * b1 * b3;

    let checks: [(&'static str, f64, bool); 6] = [
        ("a0", a0, a0 > 0.0),
        ("b0", b0, b0 < 0.0),
        ("b1", b1, b1 > 0.0),
        ("b2", b2, b2 < 0.0),
        ("b3", b3, b3 > 0.0),
        ("b4", b4, b4 > 0.0),
    ];
    for (name, value, ok) in checks {
        if !ok {
            return Err(Error::CoefficientSignViolation { name, value });
        }
    }
    if let Some(v) = d1.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::CoefficientSignViolation { name: "d1", value: *v });
    }
    if let Some(v) = d5.iter().find(|v| !(**v < 0.0)) {
        return Err(Error::CoefficientSignViolation { name: "d5", value: *v });
    }

    Ok(IterationCoeffs { a0, b0, b1, b2, b3, b4, b11, b12, b21, b22, d1, d2, d3, d4, d5, d6, d1_half })
}
