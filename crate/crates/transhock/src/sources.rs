//! Right-hand sides of the velocity system, assembled at the previous
//! iterate: the quadratic interior form, the coordinate-change corrections
//! H1..H3, the curl sources G1..G3, the divergence source G0 and the exit
//! datum q4.

use crate::background::{BackgroundSolution, IterationCoeffs};
use crate::error::{Error, Result};
use crate::field::{ddy1, ddy2, ddy3, Field2, Field3, Parity};
use crate::grid::Grid;
use crate::mapping::ShockMap;
use crate::perturbation::PerturbationSpec;

/// Sources of the enlarged deformation-curl system.
pub struct SourceBundle {
    pub g0: Field3,
    pub g1: Field3,
    pub g2: Field3,
    pub g3: Field3,
    pub q4: Field2,
}

/// Everything is evaluated at the hatted iterate; background coefficients
/// at the mapped axial position D0(y), derivatives through the transformed
/// operators.
#[allow(clippy::too_many_arguments)]
pub fn assemble_sources(
    v1: &Field3,
    v2: &Field3,
    v3: &Field3,
    v4: &Field3,
    map: &ShockMap,
    omega1: &Field3,
    r4: &Field3,
    bg: &BackgroundSolution,
    co: &IterationCoeffs,
    pert: &PerturbationSpec,
    grid: &Grid,
    u_floor: f64,
) -> Result<SourceBundle> {
    let gas = &bg.gas;
    let gamma = gas.gamma;
    let eps = pert.eps;

    // plain axial derivatives, shared by the D-operators
    let d1v1 = ddy1(v1, grid.h1(), Parity::None);
    let d1v2 = ddy1(v2, grid.h1(), Parity::None);
    let d1v3 = ddy1(v3, grid.h1(), Parity::None);
    let d1v4 = ddy1(v4, grid.h1(), Parity::None);
    // tangential derivatives with the wall parities of each unknown
    let d2v1 = ddy2(v1, grid.h2(), Parity::Even);
    let d3v1 = ddy3(v1, grid.h3(), Parity::Even);
    let d2v2 = ddy2(v2, grid.h2(), Parity::Odd);
    let d3v2 = ddy3(v2, grid.h3(), Parity::Even);
    let d2v3 = ddy2(v3, grid.h2(), Parity::Even);
    let d3v3 = ddy3(v3, grid.h3(), Parity::Odd);
    let d2v4 = ddy2(v4, grid.h2(), Parity::Even);
    let d3v4 = ddy3(v4, grid.h3(), Parity::Even);
    let d2r4 = ddy2(r4, grid.h2(), Parity::Even);
    let d3r4 = ddy3(r4, grid.h3(), Parity::Even);

    let mut g0 = Field3::zeros(grid);
    let mut g1 = Field3::zeros(grid);
    let mut g2f = Field3::zeros(grid);
    let mut g3f = Field3::zeros(grid);

    for i in 0..grid.n1 {
        let y1 = grid.y1(i);
        let u_bar_y1 = bg.u_plus(y1);
        let d1_y1 = co.d1[i];
        let d2_y1 = co.d2[i];
        let d3_y1 = co.d3[i];
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                let at = (i, j, k);
                let x = map.x1(i, j, k);
                let kappa = map.kappa(j, k);
                let s2 = map.slope(2, i, j, k);
                let s3 = map.slope(3, i, j, k);
                let depth = grid.l1 - map.v5[(j, k)] - grid.ls;
                let u_bar = bg.u_plus(x);
                let du_bar = bg.u_plus_prime(x);
                let c2 = bg.c2_plus(x);
                let u = u_bar + v1[at];
                if u <= u_floor {
                    return Err(Error::VelocityFloor { min_speed: u, floor: u_floor });
                }
                let inv_u = 1.0 / u;
                let inv_u_bar = 1.0 / u_bar_y1;

                // transformed derivatives
                let dd1 = |p: &Field3| kappa * p[at];
                let dd2 = |t: &Field3, p: &Field3| t[at] + s2 * p[at];
                let dd3 = |t: &Field3, p: &Field3| t[at] + s3 * p[at];
                let d1v1t = dd1(&d1v1);
                let d1v2t = dd1(&d1v2);
                let d1v3t = dd1(&d1v3);
                let d2v1t = dd2(&d2v1, &d1v1);
                let d3v1t = dd3(&d3v1, &d1v1);
                let d2v2t = dd2(&d2v2, &d1v2);
                let d3v2t = dd3(&d3v2, &d1v2);
                let d2v3t = dd2(&d2v3, &d1v3);
                let d3v3t = dd3(&d3v3, &d1v3);

                let (y2, y3) = (grid.y2(j), grid.y3(k));
                let phi0 = eps * pert.phi0.eval(x, y2, y3);
                let dphi0 = [
                    eps * pert.phi0.d_dx1(x, y2, y3),
                    eps * pert.phi0.d_dy2(x, y2, y3),
                    eps * pert.phi0.d_dy3(x, y2, y3),
                ];

                // interior quadratic form
                let q23 = v2[at] * v2[at] + v3[at] * v3[at];
                let f_quad = (gamma + 1.0) * u_bar / c2 * v1[at] * d1v1t
                    + u / c2 * (v2[at] * d1v2t + v3[at] * d1v3t - dphi0[0])
                    + v2[at] / c2 * (u * d2v1t + v3[at] * d2v3t - dphi0[1])
                    + v3[at] / c2 * (u * d3v1t + v2[at] * d3v2t - dphi0[2])
                    - du_bar / c2
                        * ((gamma - 1.0) * phi0
                            - 0.5 * (gamma + 1.0) * v1[at] * v1[at]
                            - 0.5 * (gamma - 1.0) * q23)
                    - d1v1t / c2
                        * ((gamma - 1.0) * (v4[at] + phi0)
                            - 0.5 * (gamma + 1.0) * v1[at] * v1[at]
                            - 0.5 * (gamma - 1.0) * q23)
                    - d2v2t / c2
                        * ((gamma - 1.0) * (u_bar * v1[at] + v4[at] + phi0)
                            - 0.5 * (gamma - 1.0) * (v1[at] * v1[at] + v3[at] * v3[at])
                            - 0.5 * (gamma + 1.0) * v2[at] * v2[at])
                    - d3v3t / c2
                        * ((gamma - 1.0) * (u_bar * v1[at] + v4[at] + phi0)
                            - 0.5 * (gamma - 1.0) * (v1[at] * v1[at] + v2[at] * v2[at])
                            - 0.5 * (gamma + 1.0) * v3[at] * v3[at]);

                // subtract the coefficient/operator differences so the left
                // side keeps the background-frozen linear operator
                let d1_x = 1.0 - u_bar * u_bar / c2;
                let d2_x = (bg.f(x) - (gamma + 1.0) * u_bar * du_bar) / c2;
                let d3_x = (gamma - 1.0) * du_bar / c2;
                let calg0 = f_quad
                    - (d1_x * kappa - d1_y1) * d1v1[at]
                    - s2 * d1v2[at]
                    - s3 * d1v3[at]
                    - (d2_x - d2_y1) * v1[at]
                    - (d3_x - d3_y1) * v4[at];
                g0[at] = calg0 - d3_y1 * r4[at];

                // coordinate-change corrections of the curl relations
                let yfac = grid.y1(i) - grid.l1;
                let h1c = yfac * (map.dv5_dy3[(j, k)] * d1v2[at] - map.dv5_dy2[(j, k)] * d1v3[at])
                    / depth;
                let h2c = -yfac * map.dv5_dy3[(j, k)] * d1v1[at] / depth
                    + map.v5[(j, k)] * d1v3[at] / depth
                    + (inv_u - inv_u_bar) * (d3v4[at] + s3 * d1v4[at])
                    + yfac * map.dv5_dy3[(j, k)] * inv_u * d1v4[at] / depth;
                let h3c = -map.v5[(j, k)] * d1v2[at] / depth
                    + yfac * map.dv5_dy2[(j, k)] * d1v1[at] / depth
                    - (inv_u - inv_u_bar) * (d2v4[at] + s2 * d1v4[at])
                    - yfac * map.dv5_dy2[(j, k)] * inv_u * d1v4[at] / depth;

                g1[at] = omega1[at] + h1c;
                g2f[at] = v2[at] * omega1[at] * inv_u + h2c + inv_u_bar * d3r4[at];
                g3f[at] = v3[at] * omega1[at] * inv_u + h3c - inv_u_bar * d2r4[at];
            }
        }
    }

    let q4 = exit_datum(v1, v2, v3, v4, r4, bg, pert, grid)?;
    Ok(SourceBundle { g0, g1, g2: g2f, g3: g3f, q4 })
}

/// Exit boundary datum
/// q4 = R4(L1,.)/u(L1) - eps P_ex/(rho u)(L1) - sum v_i^2/(2 u(L1))
///      - E(v(L1,.))/u(L1).
fn exit_datum(
    v1: &Field3,
    v2: &Field3,
    v3: &Field3,
    v4: &Field3,
    r4: &Field3,
    bg: &BackgroundSolution,
    pert: &PerturbationSpec,
    grid: &Grid,
) -> Result<Field2> {
    let gas = &bg.gas;
    let gamma = gas.gamma;
    let l1 = grid.l1;
    let u_exit = bg.u_plus(l1);
    let rho_exit = bg.rho_plus(l1);
    let p_exit = gas.pressure(rho_exit);
    let b_exit = bg.b_plus;
    let phi_exit = bg.phi(l1);
    let e = 1.0 / (gamma - 1.0);
    let front = ((gamma - 1.0) / gamma).powf(e);
    let i = grid.n1 - 1;
    let mut q4 = Field2::zeros(grid);
    for j in 0..grid.n2 {
        for k in 0..grid.n3 {
            let (y2, y3) = (grid.y2(j), grid.y3(k));
            let phi0 = pert.eps * pert.phi0.eval(l1, y2, y3);
            let sq = (v1[(i, j, k)] + u_exit).powi(2)
                + v2[(i, j, k)].powi(2)
                + v3[(i, j, k)].powi(2);
            let arg = v4[(i, j, k)] + b_exit - 0.5 * sq + phi0 + phi_exit;
            if !(arg > 0.0) {
                return Err(Error::VacuumBernoulli { y2, y3, value: arg });
            }
            let rho_t = front * arg.powf(e);
            let p_t = gas.pressure(rho_t);
            // enthalpy linearization error of the closure pressure
            let e_term = gamma / (gamma - 1.0)
                * (rho_t.powf(gamma - 1.0) - rho_exit.powf(gamma - 1.0))
                - (p_t - p_exit) / rho_exit
                - phi0;
            let v_sq = v1[(i, j, k)].powi(2) + v2[(i, j, k)].powi(2) + v3[(i, j, k)].powi(2);
            q4[(j, k)] = r4[(i, j, k)] / u_exit
                - pert.eps * pert.p_ex.eval(y2, y3) / (bg.m)
                - 0.5 * v_sq / u_exit
                - e_term / u_exit;
        }
    }
    Ok(q4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{admissible_pressure_range, find_shock_position, iteration_coefficients};
    use crate::force::ForceProfile;
    use crate::gas::{GasParams, State1D};
    use crate::perturbation::{Mode, ModeSum, TrigKind};
    use approx::assert_abs_diff_eq;

    fn fixture() -> (BackgroundSolution, IterationCoeffs, Grid) {
        let gas = GasParams::new(2.0).unwrap();
        let force = ForceProfile::constant(0.1, 0.0, 1.0).unwrap();
        let inflow = State1D { x1: 0.0, rho: 1.0, u: 2.0 };
        let (p1, p0) = admissible_pressure_range(inflow, &force, &gas, 0.0, 1.0).unwrap();
        let bg = find_shock_position(0.5 * (p1 + p0), inflow, &force, &gas, 0.0, 1.0).unwrap();
        let grid = Grid::new(17, 13, 13, bg.ls, bg.l1).unwrap();
        let co = iteration_coefficients(&bg, grid.n1).unwrap();
        (bg, co, grid)
    }

    #[test]
    fn background_state_produces_zero_sources() {
        let (bg, co, grid) = fixture();
        let z = Field3::zeros(&grid);
        let map = ShockMap::identity(&grid);
        let pert = PerturbationSpec { eps: 0.0, ..Default::default() };
        let s = assemble_sources(&z, &z, &z, &z, &map, &z, &z, &bg, &co, &pert, &grid, 0.1)
            .unwrap();
        assert_eq!(s.g0.linf(), 0.0);
        assert_eq!(s.g1.linf(), 0.0);
        assert_eq!(s.g2.linf(), 0.0);
        assert_eq!(s.g3.linf(), 0.0);
        // the exit closure evaluates to the exact background values
        assert!(s.q4.linf() < 1e-13, "q4 = {:.3e}", s.q4.linf());
    }

    #[test]
    fn exit_pressure_mode_dominates_q4() {
        // only eps P_ex nonzero: q4 = -eps P_ex / (rho u)(L1) exactly
        let (bg, co, grid) = fixture();
        let z = Field3::zeros(&grid);
        let map = ShockMap::identity(&grid);
        let pert = PerturbationSpec {
            eps: 1e-3,
            p_ex: ModeSum {
                modes: vec![Mode { fn2: TrigKind::Cos, k2: 1, fn3: TrigKind::Cos, k3: 1, amp: 0.8 }],
            },
            ..Default::default()
        };
        let s = assemble_sources(&z, &z, &z, &z, &map, &z, &z, &bg, &co, &pert, &grid, 0.1)
            .unwrap();
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                let expect =
                    -1e-3 * pert.p_ex.eval(grid.y2(j), grid.y3(k)) / bg.m;
                assert_abs_diff_eq!(s.q4[(j, k)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wall_values_of_curl_sources_vanish() {
        // compatible nonzero iterate: G1 and G3 vanish on the y2 walls,
        // G1 and G2 on the y3 walls, exactly
        let (bg, co, grid) = fixture();
        let pi = std::f64::consts::PI;
        let v1 = Field3::from_fn(&grid, |y1, y2, y3| {
            1e-2 * (pi * y2).cos() * (pi * y3).cos() * (1.0 + y1)
        });
        let v2 = Field3::from_fn(&grid, |y1, y2, y3| {
            1e-2 * (pi * y2).sin() * (pi * y3).cos() * (2.0 - y1)
        });
        let v3 = Field3::from_fn(&grid, |y1, y2, y3| {
            1e-2 * (pi * y2).cos() * (pi * y3).sin() * y1
        });
        let v4 = Field3::from_fn(&grid, |_, y2, y3| 1e-2 * (pi * y2).cos() * (pi * y3).cos());
        let v5 = Field2::from_fn(&grid, |y2, y3| 5e-3 * (pi * y2).cos() * (pi * y3).cos());
        let omega1 = Field3::from_fn(&grid, |_, y2, y3| {
            1e-2 * (pi * y2).sin() * (pi * y3).sin()
        });
        let r4 = Field3::from_fn(&grid, |_, y2, y3| 1e-2 * (pi * y2).cos() * (pi * y3).cos());
        let map = ShockMap::new(&grid, &v5).unwrap();
        let pert = PerturbationSpec { eps: 0.0, ..Default::default() };
        let s = assemble_sources(&v1, &v2, &v3, &v4, &map, &omega1, &r4, &bg, &co, &pert, &grid, 0.1)
            .unwrap();
        for i in 0..grid.n1 {
            for k in 0..grid.n3 {
                assert_abs_diff_eq!(s.g1[(i, 0, k)], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s.g1[(i, grid.n2 - 1, k)], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s.g3[(i, 0, k)], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s.g3[(i, grid.n2 - 1, k)], 0.0, epsilon = 1e-15);
            }
            for j in 0..grid.n2 {
                assert_abs_diff_eq!(s.g1[(i, j, 0)], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s.g1[(i, j, grid.n3 - 1)], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s.g2[(i, j, 0)], 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!(s.g2[(i, j, grid.n3 - 1)], 0.0, epsilon = 1e-15);
            }
        }
    }
}
