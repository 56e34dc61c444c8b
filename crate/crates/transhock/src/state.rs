//! The iteration unknowns and their norms and compatibility tables.

use crate::field::{d2dy2, d2dy3, ddy2, ddy3, trace_ddy2, trace_ddy3, Field2, Field3, Parity};
use crate::grid::Grid;

/// The unknowns of one outer iterate: velocity/Bernoulli disturbances on
/// the box and the shock perturbation on the cross-section.
#[derive(Debug, Clone)]
pub struct IterState {
    pub v1: Field3,
    pub v2: Field3,
    pub v3: Field3,
    pub v4: Field3,
    pub v5: Field2,
}

impl IterState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            v1: Field3::zeros(grid),
            v2: Field3::zeros(grid),
            v3: Field3::zeros(grid),
            v4: Field3::zeros(grid),
            v5: Field2::zeros(grid),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v1.is_finite()
            && self.v2.is_finite()
            && self.v3.is_finite()
            && self.v4.is_finite()
            && self.v5.is_finite()
    }

    /// Max norm over all unknowns.
    pub fn linf(&self) -> f64 {
        self.v1
            .linf()
            .max(self.v2.linf())
            .max(self.v3.linf())
            .max(self.v4.linf())
            .max(self.v5.linf())
    }

    /// Discrete analogue of the iteration norm: max norms of the values and
    /// of their first divided differences.
    pub fn w_norm(&self, grid: &Grid) -> f64 {
        let mut total = 0.0;
        for f in [&self.v1, &self.v2, &self.v3, &self.v4] {
            total += f.linf() + grad_linf3(f, grid);
        }
        total += self.v5.linf() + grad_linf2(&self.v5, grid);
        total
    }

    /// Difference of two states as a new state.
    pub fn diff(&self, other: &IterState) -> IterState {
        let mut out = self.clone();
        for (a, b) in [
            (&mut out.v1, &other.v1),
            (&mut out.v2, &other.v2),
            (&mut out.v3, &other.v3),
            (&mut out.v4, &other.v4),
        ] {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x -= y;
            }
        }
        for (x, y) in out.v5.data.iter_mut().zip(&other.v5.data) {
            *x -= y;
        }
        out
    }

    /// Blend toward another state: self + w (other - self).
    pub fn relax_toward(&self, other: &IterState, w: f64) -> IterState {
        let mut out = other.clone();
        if w == 1.0 {
            return out;
        }
        for (a, b) in [
            (&mut out.v1, &self.v1),
            (&mut out.v2, &self.v2),
            (&mut out.v3, &self.v3),
            (&mut out.v4, &self.v4),
        ] {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x = y + w * (*x - y);
            }
        }
        for (x, y) in out.v5.data.iter_mut().zip(&self.v5.data) {
            *x = y + w * (*x - y);
        }
        out
    }

    /// Wall compatibility table: the class conditions on v, the shock-slope
    /// conditions on v5 and the output conditions of one iteration map.
    /// Value conditions are measured directly; wall-normal derivatives use
    /// the solver's mirror-node stencils.
    pub fn compat_report(&self, grid: &Grid) -> Vec<(&'static str, f64)> {
        let mut rows = Vec::new();
        let wall2 = |f: &Field3| -> f64 {
            let mut worst = 0.0f64;
            for i in 0..grid.n1 {
                for k in 0..grid.n3 {
                    worst = worst.max(f[(i, 0, k)].abs()).max(f[(i, grid.n2 - 1, k)].abs());
                }
            }
            worst
        };
        let wall3 = |f: &Field3| -> f64 {
            let mut worst = 0.0f64;
            for i in 0..grid.n1 {
                for j in 0..grid.n2 {
                    worst = worst.max(f[(i, j, 0)].abs()).max(f[(i, j, grid.n3 - 1)].abs());
                }
            }
            worst
        };
        rows.push(("v2 on y2 walls", wall2(&self.v2)));
        rows.push(("v3 on y3 walls", wall3(&self.v3)));
        rows.push(("d2 v2^2 on y2 walls", wall2(&d2dy2(&self.v2, grid.h2(), Parity::Odd))));
        rows.push(("d3 v3^2 on y3 walls", wall3(&d2dy3(&self.v3, grid.h3(), Parity::Odd))));
        for (name, f, parity) in [
            ("d2 v1 on y2 walls", &self.v1, Parity::Even),
            ("d2 v3 on y2 walls", &self.v3, Parity::Even),
            ("d2 v4 on y2 walls", &self.v4, Parity::Even),
        ] {
            rows.push((name, wall2(&ddy2(f, grid.h2(), parity))));
        }
        for (name, f, parity) in [
            ("d3 v1 on y3 walls", &self.v1, Parity::Even),
            ("d3 v2 on y3 walls", &self.v2, Parity::Even),
            ("d3 v4 on y3 walls", &self.v4, Parity::Even),
        ] {
            rows.push((name, wall3(&ddy3(f, grid.h3(), parity))));
        }
        let dv5_2 = trace_ddy2(&self.v5, grid.h2(), Parity::Even);
        let dv5_3 = trace_ddy3(&self.v5, grid.h3(), Parity::Even);
        let mut w2 = 0.0f64;
        let mut w3 = 0.0f64;
        for k in 0..grid.n3 {
            w2 = w2.max(dv5_2[(0, k)].abs()).max(dv5_2[(grid.n2 - 1, k)].abs());
        }
        for j in 0..grid.n2 {
            w3 = w3.max(dv5_3[(j, 0)].abs()).max(dv5_3[(j, grid.n3 - 1)].abs());
        }
        rows.push(("d2 v5 on y2 walls", w2));
        rows.push(("d3 v5 on y3 walls", w3));
        // third derivatives of v5 at the walls under the mirror convention
        let d3v5_2 = trace_ddy2(&trace_d2_even(&self.v5, grid, 2), grid.h2(), Parity::Even);
        let d3v5_3 = trace_ddy3(&trace_d2_even(&self.v5, grid, 3), grid.h3(), Parity::Even);
        let mut w23 = 0.0f64;
        let mut w33 = 0.0f64;
        for k in 0..grid.n3 {
            w23 = w23.max(d3v5_2[(0, k)].abs()).max(d3v5_2[(grid.n2 - 1, k)].abs());
        }
        for j in 0..grid.n2 {
            w33 = w33.max(d3v5_3[(j, 0)].abs()).max(d3v5_3[(j, grid.n3 - 1)].abs());
        }
        rows.push(("d2^3 v5 on y2 walls", w23));
        rows.push(("d3^3 v5 on y3 walls", w33));
        rows
    }
}

fn trace_d2_even(f: &Field2, grid: &Grid, dir: usize) -> Field2 {
    match dir {
        2 => crate::field::trace_d2dy2(f, grid.h2(), Parity::Even),
        _ => crate::field::trace_d2dy3(f, grid.h3(), Parity::Even),
    }
}

fn grad_linf3(f: &Field3, grid: &Grid) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..f.n1 {
        for j in 0..f.n2 {
            for k in 0..f.n3 {
                if i + 1 < f.n1 {
                    worst = worst.max((f[(i + 1, j, k)] - f[(i, j, k)]).abs() / grid.h1());
                }
                if j + 1 < f.n2 {
                    worst = worst.max((f[(i, j + 1, k)] - f[(i, j, k)]).abs() / grid.h2());
                }
                if k + 1 < f.n3 {
                    worst = worst.max((f[(i, j, k + 1)] - f[(i, j, k)]).abs() / grid.h3());
                }
            }
        }
    }
    worst
}

fn grad_linf2(f: &Field2, grid: &Grid) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..f.n2 {
        for k in 0..f.n3 {
            if j + 1 < f.n2 {
                worst = worst.max((f[(j + 1, k)] - f[(j, k)]).abs() / grid.h2());
            }
            if k + 1 < f.n3 {
                worst = worst.max((f[(j, k + 1)] - f[(j, k)]).abs() / grid.h3());
            }
        }
    }
    worst
}
