//! Shock-fitted coordinates: the affine map from the fixed box onto the
//! physical subsonic region behind the shock, and the transformed derivative
//! operators it induces.
//!
//!   x1 = y1 + (L1 - y1)/(L1 - Ls) v5(y'),
//!   D1 = (L1 - Ls)/(L1 - v5 - Ls) d/dy1,
//!   Dj = d/dyj + (y1 - L1) dj v5 / (L1 - v5 - Ls) d/dy1,  j = 2, 3.

use crate::error::{Error, Result};
use crate::field::{ddy1, ddy2, ddy3, trace_ddy2, trace_ddy3, Field2, Field3, Parity};
use crate::grid::Grid;

/// Fraction of the box depth below which the map counts as degenerate.
pub const MAP_FLOOR_FRACTION: f64 = 0.5;

/// Precomputed map data for one shock perturbation v5.
#[derive(Debug, Clone)]
pub struct ShockMap {
    pub grid: Grid,
    pub v5: Field2,
    pub dv5_dy2: Field2,
    pub dv5_dy3: Field2,
}

impl ShockMap {
    /// Build the map; v5 wall-normal derivatives use even reflection.
    pub fn new(grid: &Grid, v5: &Field2) -> Result<Self> {
        let depth_floor = MAP_FLOOR_FRACTION * (grid.l1 - grid.ls);
        let mut min_depth = f64::INFINITY;
        for v in &v5.data {
            min_depth = min_depth.min(grid.l1 - grid.ls - v);
        }
        if !(min_depth > depth_floor) {
            return Err(Error::DegenerateMap { min_depth, floor: depth_floor });
        }
        Ok(Self {
            grid: *grid,
            v5: v5.clone(),
            dv5_dy2: trace_ddy2(v5, grid.h2(), Parity::Even),
            dv5_dy3: trace_ddy3(v5, grid.h3(), Parity::Even),
        })
    }

    /// Identity map (background shock position).
    pub fn identity(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            v5: Field2::zeros(grid),
            dv5_dy2: Field2::zeros(grid),
            dv5_dy3: Field2::zeros(grid),
        }
    }

    /// Physical axial coordinate of the node (i, j, k).
    pub fn x1(&self, i: usize, j: usize, k: usize) -> f64 {
        let g = &self.grid;
        let y1 = g.y1(i);
        y1 + (g.l1 - y1) / (g.l1 - g.ls) * self.v5[(j, k)]
    }

    /// Stretch factor (L1 - Ls)/(L1 - v5 - Ls) of the axial derivative.
    pub fn kappa(&self, j: usize, k: usize) -> f64 {
        let g = &self.grid;
        (g.l1 - g.ls) / (g.l1 - self.v5[(j, k)] - g.ls)
    }

    /// Coefficient of d/dy1 inside D2 (dir = 2) or D3 (dir = 3).
    pub fn slope(&self, dir: usize, i: usize, j: usize, k: usize) -> f64 {
        let g = &self.grid;
        let dv5 = match dir {
            2 => self.dv5_dy2[(j, k)],
            3 => self.dv5_dy3[(j, k)],
            _ => unreachable!(),
        };
        (g.y1(i) - g.l1) * dv5 / (g.l1 - self.v5[(j, k)] - g.ls)
    }

    /// Transformed derivative of a box field. `parity` controls the wall
    /// ghosts of the tangential part (use `Parity::None` for plain one-sided
    /// stencils, e.g. on manufactured fields).
    pub fn apply_d(&self, dir: usize, f: &Field3, parity: Parity) -> Field3 {
        let g = &self.grid;
        let df1 = ddy1(f, g.h1(), Parity::None);
        match dir {
            1 => {
                let mut out = df1;
                for i in 0..g.n1 {
                    for j in 0..g.n2 {
                        for k in 0..g.n3 {
                            out[(i, j, k)] *= self.kappa(j, k);
                        }
                    }
                }
                out
            }
            2 | 3 => {
                let mut out = if dir == 2 {
                    ddy2(f, g.h2(), parity)
                } else {
                    ddy3(f, g.h3(), parity)
                };
                for i in 0..g.n1 {
                    for j in 0..g.n2 {
                        for k in 0..g.n3 {
                            out[(i, j, k)] += self.slope(dir, i, j, k) * df1[(i, j, k)];
                        }
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }
}
