//! Characteristic transport machinery.
//!
//! The Bernoulli quantity and the first vorticity component are conserved
//! resp. damped along the trajectories of the transverse advection field
//! (I2, I3) induced by the transformed transport operator
//!
//!   D1 + v2/U D2 + v3/U D3,  U = u(D0) + v1,
//!
//! which after division by the d/dy1 coefficient gives
//!
//!   I_j = (L1 - v5 - Ls) v_j / [U (L1 - Ls) + (y1 - L1)(v2 d2v5 + v3 d3v5)].
//!
//! Trajectories are traced backward to the shock plane with RK4 and cached;
//! both transport solves reuse the same paths.

use rayon::prelude::*;

use crate::background::BackgroundSolution;
use crate::error::{Error, Result};
use crate::field::{Field2, Field3, Parity};
use crate::grid::Grid;
use crate::linalg::{cumulative_integral, simpson_weights};
use crate::mapping::ShockMap;

/// Trajectories may leave the cross-section by at most this much.
pub const CLAMP_TOL: f64 = 1e-9;

/// Transverse advection field sampled by the tracer.
pub trait AdvectionField: Sync {
    fn eval(&self, tau: f64, y2: f64, y3: f64) -> (f64, f64);
}

/// Grid-backed advection: linear in tau between slices, bilinear in y'.
pub struct GridAdvection<'a> {
    pub i2: &'a Field3,
    pub i3: &'a Field3,
    pub grid: Grid,
}

impl GridAdvection<'_> {
    fn slice_bilinear(f: &Field3, i: usize, t2: f64, t3: f64) -> f64 {
        let (n2, n3) = (f.n2, f.n3);
        let j = (t2.floor() as usize).min(n2 - 2);
        let k = (t3.floor() as usize).min(n3 - 2);
        let (a, b) = (t2 - j as f64, t3 - k as f64);
        f[(i, j, k)] * (1.0 - a) * (1.0 - b)
            + f[(i, j + 1, k)] * a * (1.0 - b)
            + f[(i, j, k + 1)] * (1.0 - a) * b
            + f[(i, j + 1, k + 1)] * a * b
    }
}

impl AdvectionField for GridAdvection<'_> {
    fn eval(&self, tau: f64, y2: f64, y3: f64) -> (f64, f64) {
        let g = &self.grid;
        let s = ((tau - g.ls) / g.h1()).clamp(0.0, (g.n1 - 1) as f64);
        let i0 = (s.floor() as usize).min(g.n1 - 2);
        let w = s - i0 as f64;
        let t2 = ((y2 + 1.0) / g.h2()).clamp(0.0, (g.n2 - 1) as f64);
        let t3 = ((y3 + 1.0) / g.h3()).clamp(0.0, (g.n3 - 1) as f64);
        let a2 = Self::slice_bilinear(self.i2, i0, t2, t3);
        let b2 = Self::slice_bilinear(self.i2, i0 + 1, t2, t3);
        let a3 = Self::slice_bilinear(self.i3, i0, t2, t3);
        let b3 = Self::slice_bilinear(self.i3, i0 + 1, t2, t3);
        ((1.0 - w) * a2 + w * b2, (1.0 - w) * a3 + w * b3)
    }
}

/// The advection components built from the previous iterate.
pub fn build_advection_field(
    v1: &Field3,
    v2: &Field3,
    v3: &Field3,
    map: &ShockMap,
    bg: &BackgroundSolution,
    grid: &Grid,
    u_floor: f64,
) -> Result<(Field3, Field3)> {
    let mut i2 = Field3::zeros(grid);
    let mut i3 = Field3::zeros(grid);
    let span = grid.l1 - grid.ls;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                let u = bg.u_plus(map.x1(i, j, k)) + v1[(i, j, k)];
                if u <= u_floor {
                    return Err(Error::VelocityFloor { min_speed: u, floor: u_floor });
                }
                let depth = grid.l1 - map.v5[(j, k)] - grid.ls;
                let denom = u * span
                    + (grid.y1(i) - grid.l1)
                        * (v2[(i, j, k)] * map.dv5_dy2[(j, k)]
                            + v3[(i, j, k)] * map.dv5_dy3[(j, k)]);
                i2[(i, j, k)] = depth * v2[(i, j, k)] / denom;
                i3[(i, j, k)] = depth * v3[(i, j, k)] / denom;
            }
        }
    }
    Ok((i2, i3))
}

/// A single backward trace from (y1_start, y') down to tau_end with `n`
/// RK4 steps; returns positions after each step.
fn trace_path(
    adv: &impl AdvectionField,
    y1_start: f64,
    y2: f64,
    y3: f64,
    tau_end: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    let h = (tau_end - y1_start) / n.max(1) as f64;
    let mut p = (y2, y3);
    let mut out = Vec::with_capacity(n + 1);
    out.push(p);
    for s in 0..n {
        let tau = y1_start + h * s as f64;
        let k1 = adv.eval(tau, p.0, p.1);
        let k2 = adv.eval(tau + 0.5 * h, p.0 + 0.5 * h * k1.0, p.1 + 0.5 * h * k1.1);
        let k3 = adv.eval(tau + 0.5 * h, p.0 + 0.5 * h * k2.0, p.1 + 0.5 * h * k2.1);
        let k4 = adv.eval(tau + h, p.0 + h * k3.0, p.1 + h * k3.1);
        p.0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p.1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        for v in [p.0, p.1] {
            let exc = (v.abs() - 1.0).max(0.0);
            if exc > CLAMP_TOL {
                return Err(Error::TrajectoryEscape { excursion: exc, tol: CLAMP_TOL });
            }
        }
        p.0 = p.0.clamp(-1.0, 1.0);
        p.1 = p.1.clamp(-1.0, 1.0);
        out.push(p);
    }
    Ok(out)
}

/// Backward characteristics from every grid node with cached per-slice
/// positions (ascending in tau: index s corresponds to tau = y1_s).
pub struct CharacteristicBundle {
    pub grid: Grid,
    pub beta2: Field3,
    pub beta3: Field3,
    paths: Vec<Vec<(f64, f64)>>,
}

impl CharacteristicBundle {
    /// Positions of the path launched at node (i, j, k); entry s is the
    /// location at tau = y1_s, s = 0..=i.
    pub fn path(&self, i: usize, j: usize, k: usize) -> &[(f64, f64)] {
        &self.paths[(i * self.grid.n2 + j) * self.grid.n3 + k]
    }
}

pub fn trace_characteristics(
    adv: &impl AdvectionField,
    grid: &Grid,
) -> Result<CharacteristicBundle> {
    let nodes: Vec<usize> = (0..grid.n1 * grid.n2 * grid.n3).collect();
    let paths: Vec<Result<Vec<(f64, f64)>>> = nodes
        .par_iter()
        .map(|&at| {
            let i = at / (grid.n2 * grid.n3);
            let j = (at / grid.n3) % grid.n2;
            let k = at % grid.n3;
            let mut back =
                trace_path(adv, grid.y1(i), grid.y2(j), grid.y3(k), grid.ls, i)?;
            back.reverse();
            Ok(back)
        })
        .collect();
    let mut stored = Vec::with_capacity(paths.len());
    for p in paths {
        stored.push(p?);
    }
    let mut beta2 = Field3::zeros(grid);
    let mut beta3 = Field3::zeros(grid);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                let p = stored[(i * grid.n2 + j) * grid.n3 + k][0];
                beta2[(i, j, k)] = p.0;
                beta3[(i, j, k)] = p.1;
            }
        }
    }
    Ok(CharacteristicBundle { grid: *grid, beta2, beta3, paths: stored })
}

/// Forward re-integration used by the reversal property tests.
pub fn trace_forward(
    adv: &impl AdvectionField,
    y1_target: f64,
    foot: (f64, f64),
    ls: f64,
    n: usize,
) -> Result<(f64, f64)> {
    let path = trace_path(adv, ls, foot.0, foot.1, y1_target, n)?;
    Ok(*path.last().unwrap())
}

/// Bernoulli remainder field
/// R4(y) = b2 (v5(beta(y)) - v5(y')) + R3(beta(y)),
/// with trace fields sampled bicubically at the foot points.
pub fn bernoulli_remainder(
    bundle: &CharacteristicBundle,
    v5_hat: &Field2,
    r3_trace: &Field2,
    b2: f64,
) -> Field3 {
    let g = &bundle.grid;
    let mut out = Field3::zeros(&Grid { ..*g });
    for i in 0..g.n1 {
        for j in 0..g.n2 {
            for k in 0..g.n3 {
                let (b2c, b3c) = (bundle.beta2[(i, j, k)], bundle.beta3[(i, j, k)]);
                out[(i, j, k)] = b2 * (v5_hat.sample(b2c, b3c) - v5_hat[(j, k)])
                    + r3_trace.sample(b2c, b3c);
            }
        }
    }
    out
}

/// Damped transport solve along the cached trajectories:
/// w(y) = R6(beta(y)) exp(-M(y1)) + int the source with the partial damping,
/// M the cumulative integral of mu along the path.
pub fn solve_vorticity(
    bundle: &CharacteristicBundle,
    mu: &Field3,
    h0: &Field3,
    r6: &Field2,
) -> Field3 {
    let g = bundle.grid;
    let h1 = g.h1();
    let values: Vec<f64> = (0..g.n1 * g.n2 * g.n3)
        .into_par_iter()
        .map(|at| {
            let i = at / (g.n2 * g.n3);
            let j = (at / g.n3) % g.n2;
            let k = at % g.n3;
            let path = bundle.path(i, j, k);
            let n = path.len(); // i + 1 samples
            let sample = |f: &Field3, s: usize| {
                let t2 = ((path[s].0 + 1.0) / g.h2()).clamp(0.0, (g.n2 - 1) as f64);
                let t3 = ((path[s].1 + 1.0) / g.h3()).clamp(0.0, (g.n3 - 1) as f64);
                GridAdvection::slice_bilinear(f, s, t2, t3)
            };
            let mus: Vec<f64> = (0..n).map(|s| sample(mu, s)).collect();
            let cumulative = cumulative_integral(&mus, h1);
            let total = cumulative[n - 1];
            let foot = path[0];
            let mut w = r6.sample(foot.0, foot.1) * (-total).exp();
            if n > 1 {
                let wts = simpson_weights(n, h1);
                for s in 0..n {
                    w += wts[s] * sample(h0, s) * (-(total - cumulative[s])).exp();
                }
            }
            w
        })
        .collect();
    Field3 { n1: g.n1, n2: g.n2, n3: g.n3, data: values }
}

/// Decay coefficient mu = D2(v2/U) + D3(v3/U) and the vorticity source
/// H0 = D3(1/U) D2 v4 - D2(1/U) D3 v4, all at the previous iterate.
pub fn build_mu_h0(
    v1: &Field3,
    v2: &Field3,
    v3: &Field3,
    v4: &Field3,
    map: &ShockMap,
    bg: &BackgroundSolution,
    grid: &Grid,
    u_floor: f64,
) -> Result<(Field3, Field3)> {
    let mut a2 = Field3::zeros(grid);
    let mut a3 = Field3::zeros(grid);
    let mut inv_u = Field3::zeros(grid);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            for k in 0..grid.n3 {
                let u = bg.u_plus(map.x1(i, j, k)) + v1[(i, j, k)];
                if u <= u_floor {
                    return Err(Error::VelocityFloor { min_speed: u, floor: u_floor });
                }
                a2[(i, j, k)] = v2[(i, j, k)] / u;
                a3[(i, j, k)] = v3[(i, j, k)] / u;
                inv_u[(i, j, k)] = 1.0 / u;
            }
        }
    }
    let d2a2 = map.apply_d(2, &a2, Parity::Odd);
    let d3a3 = map.apply_d(3, &a3, Parity::Odd);
    let mut mu = d2a2;
    mu.axpy(1.0, &d3a3);
    let d2v4 = map.apply_d(2, v4, Parity::Even);
    let d3v4 = map.apply_d(3, v4, Parity::Even);
    let d2iu = map.apply_d(2, &inv_u, Parity::Even);
    let d3iu = map.apply_d(3, &inv_u, Parity::Even);
    let mut h0 = Field3::zeros(grid);
    for at in 0..h0.data.len() {
        h0.data[at] = d3iu.data[at] * d2v4.data[at] - d2iu.data[at] * d3v4.data[at];
    }
    Ok((mu, h0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        Grid::new(17, 13, 13, 0.5, 1.0).unwrap()
    }

    struct ZeroAdvection;
    impl AdvectionField for ZeroAdvection {
        fn eval(&self, _: f64, _: f64, _: f64) -> (f64, f64) {
            (0.0, 0.0)
        }
    }

    struct ConstAdvection(f64);
    impl AdvectionField for ConstAdvection {
        fn eval(&self, _: f64, _: f64, _: f64) -> (f64, f64) {
            (self.0, 0.0)
        }
    }

    struct SeparableAdvection;
    impl AdvectionField for SeparableAdvection {
        fn eval(&self, tau: f64, y2: f64, _: f64) -> (f64, f64) {
            (y2 * (1.0 + (3.0 * tau).sin()), 0.0)
        }
    }

    #[test]
    fn zero_advection_is_identity() {
        let g = grid();
        let b = trace_characteristics(&ZeroAdvection, &g).unwrap();
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    assert_eq!(b.beta2[(i, j, k)], g.y2(j));
                    assert_eq!(b.beta3[(i, j, k)], g.y3(k));
                }
            }
        }
    }

    #[test]
    fn constant_advection_is_linear() {
        let g = grid();
        let alpha = 0.1;
        // launch from an interior node so the path stays inside E
        let path = trace_path(&ConstAdvection(alpha), g.y1(16), 0.25, 0.0, g.ls, 16).unwrap();
        let foot = path.last().unwrap();
        assert_abs_diff_eq!(foot.0, 0.25 - alpha * (g.y1(16) - g.ls), epsilon = 1e-14);
    }

    #[test]
    fn separable_advection_fourth_order() {
        // dy/dtau = y (1 + sin 3 tau): y(Ls)/y(y1) = exp(-(F(y1) - F(Ls))),
        // F(t) = t - cos(3t)/3
        let anti = |t: f64| t - (3.0 * t).cos() / 3.0;
        let y1 = 1.0;
        let ls = 0.5;
        let y2 = 0.4;
        let exact = y2 * (-(anti(y1) - anti(ls))).exp();
        let mut errs = Vec::new();
        for n in [8usize, 16] {
            let path = trace_path(&SeparableAdvection, y1, y2, 0.0, ls, n).unwrap();
            errs.push((path.last().unwrap().0 - exact).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.8, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn reversal_recovers_launch_point() {
        // round trip error bounded by twice the one-way error against the
        // analytic foot point of the separable field
        let g = grid();
        let adv = SeparableAdvection;
        let anti = |t: f64| t - (3.0 * t).cos() / 3.0;
        for &(j, k) in &[(3usize, 4usize), (6, 6), (9, 2)] {
            let i = g.n1 - 1;
            let back = trace_path(&adv, g.y1(i), g.y2(j), g.y3(k), g.ls, i).unwrap();
            let foot = *back.last().unwrap();
            let exact_foot = g.y2(j) * (-(anti(g.y1(i)) - anti(g.ls))).exp();
            let one_way = (foot.0 - exact_foot).abs().max(1e-14);
            let fwd = trace_forward(&adv, g.y1(i), foot, g.ls, i).unwrap();
            assert!(
                (fwd.0 - g.y2(j)).abs() <= 2.0 * one_way,
                "round trip {:.3e} vs one-way {:.3e}",
                (fwd.0 - g.y2(j)).abs(),
                one_way
            );
            assert_abs_diff_eq!(fwd.1, g.y3(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn conservation_along_recomputed_trajectories() {
        // the foot point map is constant along a trajectory: re-launching
        // from any intermediate path point gives the same foot point
        let g = grid();
        let adv = SeparableAdvection;
        let i = g.n1 - 1;
        let back = trace_path(&adv, g.y1(i), 0.37, -0.21, g.ls, i).unwrap();
        let foot = *back.last().unwrap();
        for s in [4usize, 8, 12] {
            // path index s counts steps from the launch; tau = y1_i - s h1
            let tau = g.y1(i) - s as f64 * g.h1();
            let p = back[s];
            let re = trace_path(&adv, tau, p.0, p.1, g.ls, i - s).unwrap();
            let foot2 = *re.last().unwrap();
            assert_abs_diff_eq!(foot2.0, foot.0, epsilon = 1e-9);
            assert_abs_diff_eq!(foot2.1, foot.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn escape_is_detected() {
        let g = grid();
        // strong outward drift from a wall-adjacent node
        struct Outward;
        impl AdvectionField for Outward {
            fn eval(&self, _: f64, _: f64, _: f64) -> (f64, f64) {
                (10.0, 0.0)
            }
        }
        let r = trace_path(&Outward, g.y1(16), -0.9, 0.0, g.ls, 16);
        assert!(matches!(r, Err(Error::TrajectoryEscape { .. })));
    }

    #[test]
    fn vorticity_closed_forms() {
        let g = grid();
        let bundle = trace_characteristics(&ZeroAdvection, &g).unwrap();
        // mu = m, H0 = 0, R6 = r: w = r exp(-m (y1 - Ls))
        let m = 0.7;
        let r = 1.3;
        let mu = Field3::from_fn(&g, |_, _, _| m);
        let h0 = Field3::zeros(&g);
        let r6 = Field2::from_fn(&g, |_, _| r);
        let w = solve_vorticity(&bundle, &mu, &h0, &r6);
        for i in 0..g.n1 {
            let exact = r * (-m * (g.y1(i) - g.ls)).exp();
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    assert_abs_diff_eq!(w[(i, j, k)], exact, epsilon = 1e-9);
                }
            }
        }
        // mu = 0, H0 = h, R6 = 0: w = h (y1 - Ls)
        let h = -0.4;
        let mu0 = Field3::zeros(&g);
        let h0c = Field3::from_fn(&g, |_, _, _| h);
        let r60 = Field2::zeros(&g);
        let w2 = solve_vorticity(&bundle, &mu0, &h0c, &r60);
        for i in 0..g.n1 {
            let exact = h * (g.y1(i) - g.ls);
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    assert_abs_diff_eq!(w2[(i, j, k)], exact, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn bernoulli_remainder_trivial_cases() {
        let g = grid();
        let bundle = trace_characteristics(&ZeroAdvection, &g).unwrap();
        let z2 = Field2::zeros(&g);
        let r4 = bernoulli_remainder(&bundle, &z2, &z2, -0.5);
        assert_eq!(r4.linf(), 0.0);
        // identity feet: R4 = R3 broadcast in y1
        let r3 = Field2::from_fn(&g, |y2, y3| {
            (std::f64::consts::PI * y2).cos() * (std::f64::consts::PI * y3).cos()
        });
        let r4b = bernoulli_remainder(&bundle, &z2, &r3, -0.5);
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    assert_abs_diff_eq!(r4b[(i, j, k)], r3[(j, k)], epsilon = 1e-12);
                }
            }
        }
    }
}
