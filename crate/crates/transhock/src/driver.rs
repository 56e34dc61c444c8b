//! The outer fixed-point iteration: one application of the iteration map
//! runs the shock algebra, the two transport solves, the source assembly
//! and the elliptic stack, then finalizes the Bernoulli disturbance and the
//! shock perturbation. The solve loop monitors contraction and stops at a
//! fixed point of the discrete map.

use std::path::Path;

use crate::background::{iteration_coefficients, BackgroundSolution, IterationCoeffs};
use crate::elliptic::{
    grad_dirichlet, interior_div_linf, solve_divcurl, solve_m1, solve_pi, solve_potential,
    NeumannBasis,
};
use crate::error::{Error, Result};
use crate::field::{ddy1, ddy2, ddy3, Field2, Field3, Parity};
use crate::grid::Grid;
use crate::io::{BinReader, BinWriter};
use crate::mapping::ShockMap;
use crate::perturbation::PerturbationSpec;
use crate::shock::{evaluate_shock_terms, shock_slope_residual, shock_update, TraceSet};
use crate::sources::assemble_sources;
use crate::state::IterState;
use crate::transport::{
    bernoulli_remainder, build_advection_field, build_mu_h0, solve_vorticity,
    trace_characteristics, GridAdvection,
};
use crate::upstream::{analytic_supersonic, march_supersonic, SupersonicField};

/// How the supersonic region is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpstreamMode {
    March,
    Analytic,
}

/// Immutable data shared by all iterations of one solve.
pub struct SolveContext {
    pub bg: BackgroundSolution,
    pub co: IterationCoeffs,
    pub grid: Grid,
    pub pert: PerturbationSpec,
    pub upstream: SupersonicField,
    pub upstream_mode: UpstreamMode,
    pub u_floor: f64,
    pub basis2: NeumannBasis,
    pub basis3: NeumannBasis,
}

impl SolveContext {
    pub fn new(
        bg: BackgroundSolution,
        grid: Grid,
        pert: PerturbationSpec,
        upstream_mode: UpstreamMode,
    ) -> Result<Self> {
        pert.validate()?;
        let co = iteration_coefficients(&bg, grid.n1)?;
        let mut u_min = f64::INFINITY;
        for i in 0..grid.n1 {
            u_min = u_min.min(bg.u_plus(grid.y1(i)));
        }
        let u_floor = 0.1 * u_min;
        let upstream = match upstream_mode {
            UpstreamMode::March => march_supersonic(&pert, &bg, grid.n2, grid.n3, grid.h1())?,
            UpstreamMode::Analytic => {
                analytic_supersonic(&pert, &bg, grid.n2, grid.n3, grid.h1())?
            }
        };
        let basis2 = NeumannBasis::new(grid.n2);
        let basis3 = NeumannBasis::new(grid.n3);
        Ok(Self { bg, co, grid, pert, upstream, upstream_mode, u_floor, basis2, basis3 })
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Default)]
pub struct StepDiagnostics {
    pub pi_linf: f64,
    pub div_gt_linf: f64,
    pub source_scale: f64,
    pub f2_linf: f64,
    pub f3_linf: f64,
    pub omega_wall_linf: f64,
    pub beta_wall_defect: f64,
}

/// One application of the iteration map.
pub fn step(hat: &IterState, ctx: &SolveContext) -> Result<(IterState, StepDiagnostics)> {
    let grid = &ctx.grid;
    let co = &ctx.co;
    let stage = Error::at_stage;

    if !hat.is_finite() {
        return Err(Error::NonFinite { what: "input iterate".into() });
    }
    let map = ShockMap::new(grid, &hat.v5).map_err(stage("shock map"))?;

    // 1. shock-plane algebra at the previous iterate
    let traces = TraceSet {
        v1: hat.v1.shock_trace(),
        v2: hat.v2.shock_trace(),
        v3: hat.v3.shock_trace(),
        v4: hat.v4.shock_trace(),
        v5: hat.v5.clone(),
    };
    let d1v2_ls = ddy1(&hat.v2, grid.h1(), Parity::None).shock_trace();
    let d1v3_ls = ddy1(&hat.v3, grid.h1(), Parity::None).shock_trace();
    let terms = evaluate_shock_terms(
        &traces, &d1v2_ls, &d1v3_ls, &ctx.bg, co, &ctx.pert, &ctx.upstream, grid,
    )
    .map_err(stage("shock conditions"))?;

    // 2. characteristics, Bernoulli remainder, axial vorticity
    let (i2, i3) = build_advection_field(&hat.v1, &hat.v2, &hat.v3, &map, &ctx.bg, grid, ctx.u_floor)
        .map_err(stage("advection field"))?;
    let adv = GridAdvection { i2: &i2, i3: &i3, grid: *grid };
    let bundle = trace_characteristics(&adv, grid).map_err(stage("characteristics"))?;
    let r4 = bernoulli_remainder(&bundle, &hat.v5, &terms.r3, co.b2);
    let (mu, h0) = build_mu_h0(&hat.v1, &hat.v2, &hat.v3, &hat.v4, &map, &ctx.bg, grid, ctx.u_floor)
        .map_err(stage("vorticity coefficients"))?;
    let omega1 = solve_vorticity(&bundle, &mu, &h0, &terms.r6);

    // 3. sources
    let srcs = assemble_sources(
        &hat.v1, &hat.v2, &hat.v3, &hat.v4, &map, &omega1, &r4, &ctx.bg, co, &ctx.pert, grid,
        ctx.u_floor,
    )
    .map_err(stage("source assembly"))?;

    // 4. auxiliary Poisson projection and div-curl reconstruction
    let pi = solve_pi(&srcs.g1, &srcs.g2, &srcs.g3, grid);
    let (dp1, dp2, dp3) = grad_dirichlet(&pi, grid);
    let mut gt1 = srcs.g1.clone();
    gt1.axpy(-1.0, &dp1);
    let mut gt2 = srcs.g2.clone();
    gt2.axpy(-1.0, &dp2);
    let mut gt3 = srcs.g3.clone();
    gt3.axpy(-1.0, &dp3);
    let div_gt = interior_div_linf(&gt1, &gt2, &gt3, grid);
    let source_scale = srcs.g1.linf().max(srcs.g2.linf()).max(srcs.g3.linf());
    if div_gt > (1e-8f64).max(1e-10 * source_scale) {
        return Err(Error::DivergenceResidualTooLarge { value: div_gt, tol: 1e-8 });
    }
    let (vt1, vt2, vt3) = solve_divcurl(&gt1, &gt2, &gt3, grid);

    // 5. Neumann problem on the shock plane and the nonlocal potential
    let dvt2 = ddy2(&vt2, grid.h2(), Parity::Odd).shock_trace();
    let dvt3 = ddy3(&vt3, grid.h3(), Parity::Odd).shock_trace();
    let mut m1_rhs = Field2::zeros(grid);
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let q5 = terms.q1[(j, k)] + co.a0 * co.b1 * (dvt2[(j, k)] + dvt3[(j, k)]);
            m1_rhs[(j, k)] = co.b3 * q5;
        }
    }
    let m1 = solve_m1(&m1_rhs, &ctx.basis2, &ctx.basis3, grid).map_err(stage("m1 problem"))?;

    let d1vt1 = ddy1(&vt1, grid.h1(), Parity::None);
    let vt1_ls = vt1.shock_trace();
    let mut g5 = srcs.g0.clone();
    for i in 0..grid.n1 {
        let m2bar = 1.0 - co.d1[i];
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                g5[(i, j, k)] += m2bar * d1vt1[(i, j, k)]
                    - co.d2[i] * vt1[(i, j, k)]
                    - co.b2 / co.b1 * co.d3[i] * vt1_ls[(j, k)]
                    - co.d5[i] / co.b3 * m1[(j, k)];
            }
        }
    }
    let pot = solve_potential(&g5, &m1, &srcs.q4, co, &ctx.basis2, &ctx.basis3, grid)
        .map_err(stage("potential problem"))?;
    let (v1, v2, v3) = crate::elliptic::reconstruct_velocity(&vt1, &vt2, &vt3, &pot, co, grid);

    // 6. finalize the Bernoulli disturbance and the shock perturbation
    let v1_ls = v1.shock_trace();
    let v5 = shock_update(&v1_ls, &terms.r1, co);
    let mut v4 = r4.clone();
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                v4[(i, j, k)] += co.b2 / co.b1 * v1_ls[(j, k)];
            }
        }
    }

    let out = IterState { v1, v2, v3, v4, v5 };
    if !out.is_finite() {
        return Err(Error::NonFinite { what: "iteration output".into() });
    }

    // diagnostics
    let (f2, f3) = shock_slope_residual(
        &out.v5,
        &out.v2.shock_trace(),
        &out.v3.shock_trace(),
        &terms.g2,
        &terms.g3,
        co,
        grid,
    );
    let mut omega_wall = 0.0f64;
    for i in 0..grid.n1 {
        for k in 0..grid.n3 {
            omega_wall = omega_wall
                .max(omega1[(i, 0, k)].abs())
                .max(omega1[(i, grid.n2 - 1, k)].abs());
        }
        for j in 0..grid.n2 {
            omega_wall = omega_wall
                .max(omega1[(i, j, 0)].abs())
                .max(omega1[(i, j, grid.n3 - 1)].abs());
        }
    }
    let mut beta_defect = 0.0f64;
    for i in 0..grid.n1 {
        for k in 0..grid.n3 {
            beta_defect = beta_defect
                .max((bundle.beta2[(i, 0, k)] + 1.0).abs())
                .max((bundle.beta2[(i, grid.n2 - 1, k)] - 1.0).abs());
        }
        for j in 0..grid.n2 {
            beta_defect = beta_defect
                .max((bundle.beta3[(i, j, 0)] + 1.0).abs())
                .max((bundle.beta3[(i, j, grid.n3 - 1)] - 1.0).abs());
        }
    }
    let diag = StepDiagnostics {
        pi_linf: pi.linf(),
        div_gt_linf: div_gt,
        source_scale,
        f2_linf: f2.linf(),
        f3_linf: f3.linf(),
        omega_wall_linf: omega_wall,
        beta_wall_defect: beta_defect,
    };
    Ok((out, diag))
}

#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub iteration: usize,
    pub delta_w: f64,
    pub delta_v5: f64,
    pub ratio: f64,
    pub pi_linf: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    pub fp_tol: f64,
    pub max_outer: usize,
    pub under_relax: Option<f64>,
    pub checkpoint_every: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { fp_tol: 1e-9, max_outer: 60, under_relax: None, checkpoint_every: 10 }
    }
}

pub struct SolveOutcome {
    pub state: IterState,
    pub history: Vec<HistoryRow>,
    pub last_diag: StepDiagnostics,
    pub converged_at: usize,
    /// Worst wall-compatibility entry over all accepted iterates.
    pub worst_compat: f64,
}

/// Iterate the map from `start` (zero when none) to its fixed point.
pub fn solve(
    ctx: &SolveContext,
    params: &SolverParams,
    start: Option<(IterState, usize)>,
    checkpoint_dir: Option<&Path>,
) -> Result<SolveOutcome> {
    let (mut current, first_iter) = match start {
        Some((s, it)) => (s, it),
        None => (IterState::zeros(&ctx.grid), 0),
    };
    let mut history: Vec<HistoryRow> = Vec::new();
    let mut last_diag = StepDiagnostics::default();
    let mut prev_delta: Option<f64> = None;
    let mut ball_radius: Option<f64> = None;
    let mut worst_compat = 0.0f64;

    for it in first_iter + 1..=params.max_outer {
        let (mut next, diag) = step(&current, ctx)?;
        if let Some(w) = params.under_relax {
            next = current.relax_toward(&next, w);
        }
        let delta_state = next.diff(&current);
        let delta_w = delta_state.w_norm(&ctx.grid);
        let delta_v5 = delta_state.v5.linf();
        let ratio = prev_delta.map(|p| delta_w / p).unwrap_or(f64::NAN);
        history.push(HistoryRow { iteration: it, delta_w, delta_v5, ratio, pi_linf: diag.pi_linf });
        last_diag = diag;
        for (_, v) in next.compat_report(&ctx.grid) {
            worst_compat = worst_compat.max(v);
        }
        current = next;

        // trust ball around the background, calibrated off the first iterate
        if it == 1 && ctx.pert.eps > 0.0 {
            ball_radius = Some(10.0 * current.w_norm(&ctx.grid).max(1e-300));
        }
        if let Some(r) = ball_radius {
            let norm = current.w_norm(&ctx.grid);
            if norm > r {
                return Err(Error::Diverged { norm, radius: r, iteration: it });
            }
        }

        if let Some(dir) = checkpoint_dir {
            if params.checkpoint_every > 0 && it % params.checkpoint_every == 0 {
                save_state(&dir.join(format!("checkpoint_{it:04}.bin")), &current, it)?;
            }
        }

        if delta_w <= params.fp_tol {
            return Ok(SolveOutcome {
                state: current,
                history,
                last_diag,
                converged_at: it,
                worst_compat,
            });
        }
        prev_delta = Some(delta_w);
    }
    Err(Error::NotConverged {
        iterations: params.max_outer,
        last_delta: history.last().map(|h| h.delta_w).unwrap_or(f64::NAN),
    })
}

/// The reconstructed physical subsonic flow.
pub struct Solution {
    pub grid: Grid,
    /// Physical axial coordinate of every box node.
    pub x1: Field3,
    pub u1: Field3,
    pub u2: Field3,
    pub u3: Field3,
    pub rho: Field3,
    pub p: Field3,
    /// Shock surface xi(y') = Ls + v5.
    pub xi: Field2,
    pub entropy_margin: f64,
    pub state: IterState,
}

/// Map the converged disturbances back to physical flow quantities and
/// check the entropy condition on the shock.
pub fn finalize(state: &IterState, ctx: &SolveContext) -> Result<Solution> {
    let grid = &ctx.grid;
    let gas = &ctx.bg.gas;
    let map = ShockMap::new(grid, &state.v5)?;
    let e = 1.0 / (gas.gamma - 1.0);
    let front = ((gas.gamma - 1.0) / gas.gamma).powf(e);
    let mut x1 = Field3::zeros(grid);
    let mut u1 = Field3::zeros(grid);
    let mut u2 = Field3::zeros(grid);
    let mut u3 = Field3::zeros(grid);
    let mut rho = Field3::zeros(grid);
    let mut p = Field3::zeros(grid);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                let x = map.x1(i, j, k);
                x1[(i, j, k)] = x;
                let ub = ctx.bg.u_plus(x);
                let vel1 = ub + state.v1[(i, j, k)];
                u1[(i, j, k)] = vel1;
                u2[(i, j, k)] = state.v2[(i, j, k)];
                u3[(i, j, k)] = state.v3[(i, j, k)];
                let phi0 =
                    ctx.pert.eps * ctx.pert.phi0.eval(x, grid.y2(j), grid.y3(k));
                let arg = state.v4[(i, j, k)] + ctx.bg.b_plus
                    - 0.5
                        * (vel1 * vel1
                            + state.v2[(i, j, k)].powi(2)
                            + state.v3[(i, j, k)].powi(2))
                    + phi0
                    + ctx.bg.phi(x);
                if !(arg > 0.0) {
                    return Err(Error::VacuumBernoulli {
                        y2: grid.y2(j),
                        y3: grid.y3(k),
                        value: arg,
                    });
                }
                let r = front * arg.powf(e);
                rho[(i, j, k)] = r;
                p[(i, j, k)] = gas.pressure(r);
            }
        }
    }
    let mut xi = state.v5.clone();
    for v in &mut xi.data {
        *v += grid.ls;
    }
    // entropy margin: min over the shock of P+ - P-
    let mut margin = f64::INFINITY;
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let up = ctx.upstream.sample(xi[(j, k)], grid.y2(j), grid.y3(k))?;
            margin = margin.min(p[(0, j, k)] - up.p);
        }
    }
    if margin <= 0.0 {
        return Err(Error::EntropyViolated { margin });
    }
    Ok(Solution {
        grid: *grid,
        x1,
        u1,
        u2,
        u3,
        rho,
        p,
        xi,
        entropy_margin: margin,
        state: state.clone(),
    })
}

/// Binary checkpoint of an iterate.
pub fn save_state(path: &Path, state: &IterState, iteration: usize) -> Result<()> {
    let mut w = BinWriter::create(path)?;
    w.write_u32(iteration as u32)?;
    w.write_field3(&state.v1)?;
    w.write_field3(&state.v2)?;
    w.write_field3(&state.v3)?;
    w.write_field3(&state.v4)?;
    w.write_field2(&state.v5)?;
    w.finish()
}

pub fn load_state(path: &Path) -> Result<(IterState, usize)> {
    let mut r = BinReader::open(path)?;
    let iteration = r.read_u32()? as usize;
    let v1 = r.read_field3()?;
    let v2 = r.read_field3()?;
    let v3 = r.read_field3()?;
    let v4 = r.read_field3()?;
    let v5 = r.read_field2()?;
    Ok((IterState { v1, v2, v3, v4, v5 }, iteration))
}
