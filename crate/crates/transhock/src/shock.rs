//! Rankine-Hugoniot data on the shock plane.
//!
//! All jump relations are reduced to algebra in the downstream traces
//! (v1..v4 at y1 = Ls), the shock perturbation v5, and the upstream state
//! sampled at the perturbed shock position x1 = Ls + v5(y'). The slope
//! relations use the bracket determinants
//!
//!   J  = [rho u2^2 + P][rho u3^2 + P] - [rho u2 u3]^2,
//!   J2 = [rho u3^2 + P][rho u1 u2] - [rho u1 u3][rho u2 u3],
//!   J3 = [rho u2^2 + P][rho u1 u3] - [rho u1 u2][rho u2 u3],
//!
//! and the mass/momentum jumps linearized at the background produce the
//! remainders R01, R02 and the Bernoulli remainder R03. All of them vanish
//! identically at the unperturbed background and are quadratically small in
//! the perturbation.

use crate::background::{BackgroundSolution, IterationCoeffs};
use crate::error::{Error, Result};
use crate::field::{
    trace_d2dy2, trace_d2dy3, trace_ddy2, trace_ddy3, Field2, Parity,
};
use crate::grid::Grid;
use crate::perturbation::PerturbationSpec;
use crate::upstream::SupersonicField;

/// |J| floor as a fraction of its background value [P]^2(Ls).
pub const J_FLOOR_FRACTION: f64 = 0.5;

/// Downstream traces at the shock plane plus the current shock perturbation.
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub v1: Field2,
    pub v2: Field2,
    pub v3: Field2,
    pub v4: Field2,
    pub v5: Field2,
}

impl TraceSet {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            v1: Field2::zeros(grid),
            v2: Field2::zeros(grid),
            v3: Field2::zeros(grid),
            v4: Field2::zeros(grid),
            v5: Field2::zeros(grid),
        }
    }
}

/// Upstream state sampled on E at x1 = Ls + v5(y').
#[derive(Debug, Clone)]
pub struct UpstreamTrace {
    pub u1: Field2,
    pub u2: Field2,
    pub u3: Field2,
    pub p: Field2,
    pub rho: Field2,
}

pub fn upstream_at_shock(
    upstream: &SupersonicField,
    grid: &Grid,
    v5: &Field2,
) -> Result<UpstreamTrace> {
    let mut out = UpstreamTrace {
        u1: Field2::zeros(grid),
        u2: Field2::zeros(grid),
        u3: Field2::zeros(grid),
        p: Field2::zeros(grid),
        rho: Field2::zeros(grid),
    };
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let s = upstream.sample(grid.ls + v5[(j, k)], grid.y2(j), grid.y3(k))?;
            out.u1[(j, k)] = s.u1;
            out.u2[(j, k)] = s.u2;
            out.u3[(j, k)] = s.u3;
            out.p[(j, k)] = s.p;
            out.rho[(j, k)] = s.rho;
        }
    }
    Ok(out)
}

/// Downstream density and pressure closures on the shock plane.
///
/// rho = ((g-1)/g)^(1/(g-1)) (v4 + B - (v1+u(xi))^2/2 - (v2^2+v3^2)/2
///        + eps Phi0(xi, y') + Phi(xi))^(1/(g-1)),  P = rho^gamma.
pub fn tilde_thermo(
    traces: &TraceSet,
    bg: &BackgroundSolution,
    pert: &PerturbationSpec,
    grid: &Grid,
) -> Result<(Field2, Field2)> {
    let gas = &bg.gas;
    let e = 1.0 / (gas.gamma - 1.0);
    let front = ((gas.gamma - 1.0) / gas.gamma).powf(e);
    let mut rho = Field2::zeros(grid);
    let mut p = Field2::zeros(grid);
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let xi = grid.ls + traces.v5[(j, k)];
            let speed2 = (traces.v1[(j, k)] + bg.u_plus(xi)).powi(2)
                + traces.v2[(j, k)].powi(2)
                + traces.v3[(j, k)].powi(2);
            let phi0 = pert.eps * pert.phi0.eval(xi, grid.y2(j), grid.y3(k));
            let arg = traces.v4[(j, k)] + bg.b_plus - 0.5 * speed2 + phi0 + bg.phi(xi);
            if !(arg > 0.0) {
                return Err(Error::VacuumBernoulli { y2: grid.y2(j), y3: grid.y3(k), value: arg });
            }
            let r = front * arg.powf(e);
            rho[(j, k)] = r;
            p[(j, k)] = gas.pressure(r);
        }
    }
    Ok((rho, p))
}

/// Bracket determinants J, J2, J3 of the tangential jump relations.
pub fn eval_j(
    traces: &TraceSet,
    rho_t: &Field2,
    p_t: &Field2,
    up: &UpstreamTrace,
    bg: &BackgroundSolution,
    grid: &Grid,
) -> Result<(Field2, Field2, Field2)> {
    let mut j_f = Field2::zeros(grid);
    let mut j2_f = Field2::zeros(grid);
    let mut j3_f = Field2::zeros(grid);
    let floor = J_FLOOR_FRACTION * bg.pressure_jump().powi(2);
    let mut min_abs = f64::INFINITY;
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let xi = grid.ls + traces.v5[(j, k)];
            let u1p = traces.v1[(j, k)] + bg.u_plus(xi);
            let (v2, v3) = (traces.v2[(j, k)], traces.v3[(j, k)]);
            let (rt, pt) = (rho_t[(j, k)], p_t[(j, k)]);
            let (rm, pm) = (up.rho[(j, k)], up.p[(j, k)]);
            let (w1, w2, w3) = (up.u1[(j, k)], up.u2[(j, k)], up.u3[(j, k)]);
            let b22 = rt * v2 * v2 + pt - (rm * w2 * w2 + pm);
            let b33 = rt * v3 * v3 + pt - (rm * w3 * w3 + pm);
            let b23 = rt * v2 * v3 - rm * w2 * w3;
            let b12 = rt * u1p * v2 - rm * w1 * w2;
            let b13 = rt * u1p * v3 - rm * w1 * w3;
            let jj = b22 * b33 - b23 * b23;
            j_f[(j, k)] = jj;
            j2_f[(j, k)] = b33 * b12 - b13 * b23;
            j3_f[(j, k)] = b22 * b13 - b12 * b23;
            min_abs = min_abs.min(jj.abs());
        }
    }
    if min_abs < floor {
        return Err(Error::DegenerateJ { min_abs, floor });
    }
    Ok((j_f, j2_f, j3_f))
}

/// Slope error terms g2 = J2/J - a0 v2, g3 = J3/J - a0 v3.
pub fn eval_g(
    traces: &TraceSet,
    j_f: &Field2,
    j2_f: &Field2,
    j3_f: &Field2,
    co: &IterationCoeffs,
    grid: &Grid,
) -> (Field2, Field2) {
    let mut g2 = Field2::zeros(grid);
    let mut g3 = Field2::zeros(grid);
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            g2[(j, k)] = j2_f[(j, k)] / j_f[(j, k)] - co.a0 * traces.v2[(j, k)];
            g3[(j, k)] = j3_f[(j, k)] / j_f[(j, k)] - co.a0 * traces.v3[(j, k)];
        }
    }
    (g2, g3)
}

/// Quadratic remainders of the linearized mass/momentum jumps and of the
/// Bernoulli relation.
#[allow(clippy::too_many_arguments)]
pub fn eval_r0(
    traces: &TraceSet,
    rho_t: &Field2,
    p_t: &Field2,
    j_f: &Field2,
    j2_f: &Field2,
    j3_f: &Field2,
    up: &UpstreamTrace,
    bg: &BackgroundSolution,
    pert: &PerturbationSpec,
    grid: &Grid,
) -> (Field2, Field2, Field2) {
    let gas = &bg.gas;
    let ls = grid.ls;
    let u_ls = bg.u_plus(ls);
    let rho_ls = bg.rho_plus(ls);
    let c2_ls = gas.sound_speed_sq(rho_ls);
    let m = bg.m;
    let drho_f_ls = (bg.rho_plus(ls) - bg.rho_minus(ls)) * bg.f(ls);
    let mut r01 = Field2::zeros(grid);
    let mut r02 = Field2::zeros(grid);
    let mut r03 = Field2::zeros(grid);
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let v5 = traces.v5[(j, k)];
            let xi = ls + v5;
            let v1 = traces.v1[(j, k)];
            let (v2, v3) = (traces.v2[(j, k)], traces.v3[(j, k)]);
            let rt = rho_t[(j, k)];
            let pt = p_t[(j, k)];
            let u_xi = bg.u_plus(xi);
            let rho_xi = bg.rho_plus(xi);
            let p_xi = gas.pressure(rho_xi);
            let um_xi = bg.u_minus(xi);
            let rhom_xi = bg.rho_minus(xi);
            let pm_xi = gas.pressure(rhom_xi);
            let (w1, w2, w3) = (up.u1[(j, k)], up.u2[(j, k)], up.u3[(j, k)]);
            let (rm, pm) = (up.rho[(j, k)], up.p[(j, k)]);
            let jr2 = j2_f[(j, k)] / j_f[(j, k)];
            let jr3 = j3_f[(j, k)] / j_f[(j, k)];
            let w0 = rt - rho_xi;

            // mass jump remainder
            let bracket_mass_bg = rho_xi * u_xi - rhom_xi * um_xi;
            r01[(j, k)] = -bracket_mass_bg + (rm * w1 - rhom_xi * um_xi)
                + (rt * v2 - rm * w2) * jr2
                + (rt * v3 - rm * w3) * jr3
                - (v1 + u_xi - u_ls) * w0
                - (rho_xi - rho_ls) * v1;

            // axial momentum jump remainder; the linear part at Ls is
            // subtracted exactly so the result is quadratic
            let bracket_mom_bg = (rho_xi * u_xi * u_xi + p_xi)
                - (rhom_xi * um_xi * um_xi + pm_xi);
            let q_plus = rt * (v1 + u_xi) * (v1 + u_xi) + pt;
            let q_plus_bg = rho_xi * u_xi * u_xi + p_xi;
            r02[(j, k)] = -(bracket_mom_bg - drho_f_ls * v5)
                + (rm * w1 * w1 + pm) - (rhom_xi * um_xi * um_xi + pm_xi)
                - (q_plus - q_plus_bg - (u_ls * u_ls + c2_ls) * w0 - 2.0 * m * v1)
                + (rt * (v1 + u_xi) * v2 - rm * w1 * w2) * jr2
                + (rt * (v1 + u_xi) * v3 - rm * w1 * w3) * jr3;

            // Bernoulli remainder
            let phi0 = pert.eps * pert.phi0.eval(xi, grid.y2(j), grid.y3(k));
            let g1 = gas.gamma / (gas.gamma - 1.0);
            r03[(j, k)] = (u_xi - u_ls) * v1 - c2_ls / rho_ls * w0
                + g1 * (rt.powf(gas.gamma - 1.0) - rho_xi.powf(gas.gamma - 1.0))
                + 0.5 * (v1 * v1 + v2 * v2 + v3 * v3)
                - phi0;
        }
    }
    (r01, r02, r03)
}

/// Linear combinations R1, R2, R3 of the remainders.
pub fn eval_r(
    r01: &Field2,
    r02: &Field2,
    r03: &Field2,
    co: &IterationCoeffs,
) -> (Field2, Field2, Field2) {
    let mut r1 = r01.clone();
    let mut r2 = r01.clone();
    let mut r3 = r01.clone();
    for i in 0..r01.data.len() {
        r1.data[i] = co.b11 * r01.data[i] + co.b12 * r02.data[i];
        r2.data[i] = co.b21 * r01.data[i] + co.b22 * r02.data[i] + r03.data[i];
        r3.data[i] = -co.b2 / co.b1 * r1.data[i] + r2.data[i];
    }
    (r1, r2, r3)
}

/// Shock perturbation from the axial velocity trace: v5 = (v1 - R1)/b1.
pub fn shock_update(v1_trace: &Field2, r1: &Field2, co: &IterationCoeffs) -> Field2 {
    let mut v5 = v1_trace.clone();
    for i in 0..v5.data.len() {
        v5.data[i] = (v1_trace.data[i] - r1.data[i]) / co.b1;
    }
    v5
}

/// Consistency residuals of the slope relations:
/// F2 = d2 v5 - a0 v2 - g2, F3 = d3 v5 - a0 v3 - g3.
pub fn shock_slope_residual(
    v5: &Field2,
    v2_trace: &Field2,
    v3_trace: &Field2,
    g2: &Field2,
    g3: &Field2,
    co: &IterationCoeffs,
    grid: &Grid,
) -> (Field2, Field2) {
    let dv5_2 = trace_ddy2(v5, grid.h2(), Parity::Even);
    let dv5_3 = trace_ddy3(v5, grid.h3(), Parity::Even);
    let mut f2 = Field2::zeros(grid);
    let mut f3 = Field2::zeros(grid);
    for i in 0..f2.data.len() {
        f2.data[i] = dv5_2.data[i] - co.a0 * v2_trace.data[i] - g2.data[i];
        f3.data[i] = dv5_3.data[i] - co.a0 * v3_trace.data[i] - g3.data[i];
    }
    (f2, f3)
}

/// Second-order shock boundary datum
/// q1 = b1 (d2 g2 + d3 g3) + (d2^2 + d3^2) R1.
pub fn q1_of(g2: &Field2, g3: &Field2, r1: &Field2, co: &IterationCoeffs, grid: &Grid) -> Field2 {
    let dg2 = trace_ddy2(g2, grid.h2(), Parity::Odd);
    let dg3 = trace_ddy3(g3, grid.h3(), Parity::Odd);
    let lr1 = {
        let a = trace_d2dy2(r1, grid.h2(), Parity::Even);
        let b = trace_d2dy3(r1, grid.h3(), Parity::Even);
        let mut out = a;
        for i in 0..out.data.len() {
            out.data[i] += b.data[i];
        }
        out
    };
    let mut q1 = Field2::zeros(grid);
    for i in 0..q1.data.len() {
        q1.data[i] = co.b1 * (dg2.data[i] + dg3.data[i]) + lr1.data[i];
    }
    q1
}

/// Vorticity trace on the shock plane:
/// R6 = (d2 g3 - d3 g2)/a0 + g4, with the coordinate-change correction
/// g4 = -(L1-Ls)/(L1-v5-Ls) [d2 v5 d1 v3(Ls,.) - d3 v5 d1 v2(Ls,.)].
pub fn r6_of(
    g2: &Field2,
    g3: &Field2,
    v5: &Field2,
    d1v2_ls: &Field2,
    d1v3_ls: &Field2,
    co: &IterationCoeffs,
    grid: &Grid,
) -> Field2 {
    let dg3_2 = trace_ddy2(g3, grid.h2(), Parity::Even);
    let dg2_3 = trace_ddy3(g2, grid.h3(), Parity::Even);
    let dv5_2 = trace_ddy2(v5, grid.h2(), Parity::Even);
    let dv5_3 = trace_ddy3(v5, grid.h3(), Parity::Even);
    let mut out = Field2::zeros(grid);
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let depth = grid.l1 - v5[(j, k)] - grid.ls;
            let g4 = -(grid.l1 - grid.ls) / depth
                * (dv5_2[(j, k)] * d1v3_ls[(j, k)] - dv5_3[(j, k)] * d1v2_ls[(j, k)]);
            out[(j, k)] = (dg3_2[(j, k)] - dg2_3[(j, k)]) / co.a0 + g4;
        }
    }
    out
}

/// Wall diagnostics q2 at y2 = -1, +1: d2 R1 + b1 g2 restricted to the wall
/// rows; zero for compatible traces.
pub fn q2_walls(r1: &Field2, g2: &Field2, co: &IterationCoeffs, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let dr1 = trace_ddy2(r1, grid.h2(), Parity::Even);
    let lo: Vec<f64> = (0..grid.n3).map(|k| dr1[(0, k)] + co.b1 * g2[(0, k)]).collect();
    let hi: Vec<f64> =
        (0..grid.n3).map(|k| dr1[(grid.n2 - 1, k)] + co.b1 * g2[(grid.n2 - 1, k)]).collect();
    (lo, hi)
}

pub fn q3_walls(r1: &Field2, g3: &Field2, co: &IterationCoeffs, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let dr1 = trace_ddy3(r1, grid.h3(), Parity::Even);
    let lo: Vec<f64> = (0..grid.n2).map(|j| dr1[(j, 0)] + co.b1 * g3[(j, 0)]).collect();
    let hi: Vec<f64> =
        (0..grid.n2).map(|j| dr1[(j, grid.n3 - 1)] + co.b1 * g3[(j, grid.n3 - 1)]).collect();
    (lo, hi)
}

/// Everything the iteration consumes from the shock plane, evaluated at one
/// trace set.
#[derive(Debug, Clone)]
pub struct ShockTerms {
    pub rho_t: Field2,
    pub p_t: Field2,
    pub j: Field2,
    pub j2: Field2,
    pub j3: Field2,
    pub g2: Field2,
    pub g3: Field2,
    pub r01: Field2,
    pub r02: Field2,
    pub r03: Field2,
    pub r1: Field2,
    pub r2: Field2,
    pub r3: Field2,
    pub q1: Field2,
    pub r6: Field2,
    pub upstream: UpstreamTrace,
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_shock_terms(
    traces: &TraceSet,
    d1v2_ls: &Field2,
    d1v3_ls: &Field2,
    bg: &BackgroundSolution,
    co: &IterationCoeffs,
    pert: &PerturbationSpec,
    upstream: &SupersonicField,
    grid: &Grid,
) -> Result<ShockTerms> {
    let up = upstream_at_shock(upstream, grid, &traces.v5)?;
    let (rho_t, p_t) = tilde_thermo(traces, bg, pert, grid)?;
    let (j_f, j2_f, j3_f) = eval_j(traces, &rho_t, &p_t, &up, bg, grid)?;
    let (g2, g3) = eval_g(traces, &j_f, &j2_f, &j3_f, co, grid);
    let (r01, r02, r03) =
        eval_r0(traces, &rho_t, &p_t, &j_f, &j2_f, &j3_f, &up, bg, pert, grid);
    let (r1, r2, r3) = eval_r(&r01, &r02, &r03, co);
    let q1 = q1_of(&g2, &g3, &r1, co, grid);
    let r6 = r6_of(&g2, &g3, &traces.v5, d1v2_ls, d1v3_ls, co, grid);
    Ok(ShockTerms {
        rho_t,
        p_t,
        j: j_f,
        j2: j2_f,
        j3: j3_f,
        g2,
        g3,
        r01,
        r02,
        r03,
        r1,
        r2,
        r3,
        q1,
        r6,
        upstream: up,
    })
}
