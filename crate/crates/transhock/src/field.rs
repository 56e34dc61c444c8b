//! Grid functions on the box and on its cross-section, with the finite
//! difference stencils used throughout: second-order centered in the
//! interior, second-order one-sided at y1 ends, and mirror-node (even/odd
//! reflection) ghosts at the y2/y3 walls where a field has a definite
//! parity.

use crate::grid::Grid;
use crate::linalg::cubic4;

/// Wall reflection behaviour of a field at y2 = +-1 or y3 = +-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Normal derivative vanishes at the wall; ghost = mirror.
    Even,
    /// Value vanishes at the wall; ghost = -mirror.
    Odd,
    /// No wall information; one-sided stencils.
    None,
}

/// Scalar field on the full 3-D grid, row-major (i, j, k).
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(g: &Grid) -> Self {
        Self { n1: g.n1, n2: g.n2, n3: g.n3, data: vec![0.0; g.n1 * g.n2 * g.n3] }
    }

    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(g);
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    out[(i, j, k)] = f(g.y1(i), g.y2(j), g.y3(k));
                }
            }
        }
        out
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n2 + j) * self.n3 + k
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn axpy(&mut self, a: f64, other: &Field3) {
        for (v, w) in self.data.iter_mut().zip(&other.data) {
            *v += a * w;
        }
    }

    /// Trace at y1 = Ls (i = 0).
    pub fn shock_trace(&self) -> Field2 {
        self.slice_i(0)
    }

    pub fn slice_i(&self, i: usize) -> Field2 {
        let mut out = Field2::zeros_dims(self.n2, self.n3);
        for j in 0..self.n2 {
            for k in 0..self.n3 {
                out[(j, k)] = self[(i, j, k)];
            }
        }
        out
    }

    /// Largest |difference| against another field.
    pub fn linf_diff(&self, other: &Field3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
    }
}

impl std::ops::Index<(usize, usize, usize)> for Field3 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[(i * self.n2 + j) * self.n3 + k]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Field3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(i * self.n2 + j) * self.n3 + k]
    }
}

/// Scalar field on the cross-section E, row-major (j, k).
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    pub n2: usize,
    pub n3: usize,
    pub data: Vec<f64>,
}

impl Field2 {
    pub fn zeros(g: &Grid) -> Self {
        Self::zeros_dims(g.n2, g.n3)
    }

    pub fn zeros_dims(n2: usize, n3: usize) -> Self {
        Self { n2, n3, data: vec![0.0; n2 * n3] }
    }

    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(g);
        for j in 0..g.n2 {
            for k in 0..g.n3 {
                out[(j, k)] = f(g.y2(j), g.y3(k));
            }
        }
        out
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn linf_diff(&self, other: &Field2) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
    }

    pub fn mean(&self) -> f64 {
        // trapezoid mean over E (half weights on walls)
        let mut sum = 0.0;
        let mut wsum = 0.0;
        for j in 0..self.n2 {
            let wj = if j == 0 || j == self.n2 - 1 { 0.5 } else { 1.0 };
            for k in 0..self.n3 {
                let wk = if k == 0 || k == self.n3 - 1 { 0.5 } else { 1.0 };
                sum += wj * wk * self[(j, k)];
                wsum += wj * wk;
            }
        }
        sum / wsum
    }

    /// Bicubic (tensor 4-point Lagrange) sample at a point of E.
    /// Exact at grid nodes and for bicubic polynomials.
    pub fn sample(&self, y2: f64, y3: f64) -> f64 {
        let h2 = 2.0 / (self.n2 - 1) as f64;
        let h3 = 2.0 / (self.n3 - 1) as f64;
        let t2 = ((y2 + 1.0) / h2).clamp(0.0, (self.n2 - 1) as f64);
        let t3 = ((y3 + 1.0) / h3).clamp(0.0, (self.n3 - 1) as f64);
        let s2 = window_start(t2, self.n2);
        let s3 = window_start(t3, self.n3);
        let mut col = [0.0; 4];
        for (a, c) in col.iter_mut().enumerate() {
            let j = s2 + a;
            let w = [
                self[(j, s3)],
                self[(j, s3 + 1)],
                self[(j, s3 + 2)],
                self[(j, s3 + 3)],
            ];
            *c = cubic4(&w, t3 - s3 as f64);
        }
        cubic4(&col, t2 - s2 as f64)
    }
}

impl std::ops::Index<(usize, usize)> for Field2 {
    type Output = f64;
    #[inline]
    fn index(&self, (j, k): (usize, usize)) -> &f64 {
        &self.data[j * self.n3 + k]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Field2 {
    #[inline]
    fn index_mut(&mut self, (j, k): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.n3 + k]
    }
}

pub(crate) fn window_start(t: f64, n: usize) -> usize {
    let i = t.floor() as usize;
    i.saturating_sub(1).min(n - 4)
}

/// Value at index `idx + off` along an axis of length `n`, with ghost values
/// by reflection about the end nodes per the field's parity. For
/// `Parity::None` the index is expected to stay inside (callers use
/// one-sided formulas there).
#[inline]
fn ghosted(get: impl Fn(isize) -> f64, n: isize, at: isize, parity: Parity) -> f64 {
    if at >= 0 && at < n {
        return get(at);
    }
    match parity {
        Parity::Even => {
            if at < 0 {
                get(-at)
            } else {
                get(2 * (n - 1) - at)
            }
        }
        Parity::Odd => {
            if at < 0 {
                -get(-at)
            } else {
                -get(2 * (n - 1) - at)
            }
        }
        Parity::None => panic!("stencil out of range without parity"),
    }
}

macro_rules! axis_derivs {
    ($name_d:ident, $name_dd:ident, $axis:tt) => {
        /// First derivative along one axis: centered with parity ghosts, or
        /// second-order one-sided at ends when no parity is available.
        pub fn $name_d(f: &Field3, h: f64, parity: Parity) -> Field3 {
            let (n1, n2, n3) = (f.n1, f.n2, f.n3);
            let mut out = f.clone();
            let n = axis_len!(f, $axis) as isize;
            for i in 0..n1 {
                for j in 0..n2 {
                    for k in 0..n3 {
                        let at = axis_idx!(i, j, k, $axis) as isize;
                        let get = |q: isize| value_at!(f, i, j, k, q, $axis);
                        let v = if parity == Parity::None && (at == 0 || at == n - 1) {
                            if at == 0 {
                                (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
                            } else {
                                (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
                            }
                        } else {
                            (ghosted(&get, n, at + 1, parity) - ghosted(&get, n, at - 1, parity))
                                / (2.0 * h)
                        };
                        out[(i, j, k)] = v;
                    }
                }
            }
            out
        }

        /// Second derivative along one axis, same ghost conventions.
        pub fn $name_dd(f: &Field3, h: f64, parity: Parity) -> Field3 {
            let (n1, n2, n3) = (f.n1, f.n2, f.n3);
            let mut out = f.clone();
            let n = axis_len!(f, $axis) as isize;
            for i in 0..n1 {
                for j in 0..n2 {
                    for k in 0..n3 {
                        let at = axis_idx!(i, j, k, $axis) as isize;
                        let get = |q: isize| value_at!(f, i, j, k, q, $axis);
                        let v = if parity == Parity::None && (at == 0 || at == n - 1) {
                            if at == 0 {
                                (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / (h * h)
                            } else {
                                (2.0 * get(n - 1) - 5.0 * get(n - 2) + 4.0 * get(n - 3)
                                    - get(n - 4))
                                    / (h * h)
                            }
                        } else {
                            (ghosted(&get, n, at + 1, parity) - 2.0 * get(at)
                                + ghosted(&get, n, at - 1, parity))
                                / (h * h)
                        };
                        out[(i, j, k)] = v;
                    }
                }
            }
            out
        }
    };
}

macro_rules! axis_len {
    ($f:expr, 1) => {
        $f.n1
    };
    ($f:expr, 2) => {
        $f.n2
    };
    ($f:expr, 3) => {
        $f.n3
    };
}

macro_rules! axis_idx {
    ($i:expr, $j:expr, $k:expr, 1) => {
        $i
    };
    ($i:expr, $j:expr, $k:expr, 2) => {
        $j
    };
    ($i:expr, $j:expr, $k:expr, 3) => {
        $k
    };
}

macro_rules! value_at {
    ($f:expr, $i:expr, $j:expr, $k:expr, $q:expr, 1) => {
        $f[($q as usize, $j, $k)]
    };
    ($f:expr, $i:expr, $j:expr, $k:expr, $q:expr, 2) => {
        $f[($i, $q as usize, $k)]
    };
    ($f:expr, $i:expr, $j:expr, $k:expr, $q:expr, 3) => {
        $f[($i, $j, $q as usize)]
    };
}

axis_derivs!(ddy1, d2dy1, 1);
axis_derivs!(ddy2, d2dy2, 2);
axis_derivs!(ddy3, d2dy3, 3);

/// Derivatives of a cross-section field along y2.
pub fn trace_ddy2(f: &Field2, h: f64, parity: Parity) -> Field2 {
    let mut out = f.clone();
    let n = f.n2 as isize;
    for j in 0..f.n2 {
        for k in 0..f.n3 {
            let get = |q: isize| f[(q as usize, k)];
            let at = j as isize;
            out[(j, k)] = if parity == Parity::None && (at == 0 || at == n - 1) {
                if at == 0 {
                    (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
                } else {
                    (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
                }
            } else {
                (ghosted(&get, n, at + 1, parity) - ghosted(&get, n, at - 1, parity)) / (2.0 * h)
            };
        }
    }
    out
}

pub fn trace_ddy3(f: &Field2, h: f64, parity: Parity) -> Field2 {
    let mut out = f.clone();
    let n = f.n3 as isize;
    for j in 0..f.n2 {
        for k in 0..f.n3 {
            let get = |q: isize| f[(j, q as usize)];
            let at = k as isize;
            out[(j, k)] = if parity == Parity::None && (at == 0 || at == n - 1) {
                if at == 0 {
                    (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
                } else {
                    (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
                }
            } else {
                (ghosted(&get, n, at + 1, parity) - ghosted(&get, n, at - 1, parity)) / (2.0 * h)
            };
        }
    }
    out
}

pub fn trace_d2dy2(f: &Field2, h: f64, parity: Parity) -> Field2 {
    let mut out = f.clone();
    let n = f.n2 as isize;
    for j in 0..f.n2 {
        for k in 0..f.n3 {
            let get = |q: isize| f[(q as usize, k)];
            let at = j as isize;
            out[(j, k)] = (ghosted(&get, n, at + 1, parity) - 2.0 * get(at)
                + ghosted(&get, n, at - 1, parity))
                / (h * h);
        }
    }
    out
}

pub fn trace_d2dy3(f: &Field2, h: f64, parity: Parity) -> Field2 {
    let mut out = f.clone();
    let n = f.n3 as isize;
    for j in 0..f.n2 {
        for k in 0..f.n3 {
            let get = |q: isize| f[(j, q as usize)];
            let at = k as isize;
            out[(j, k)] = (ghosted(&get, n, at + 1, parity) - 2.0 * get(at)
                + ghosted(&get, n, at - 1, parity))
                / (h * h);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        Grid::new(17, 17, 17, 0.5, 1.0).unwrap()
    }

    #[test]
    fn centered_derivatives_second_order() {
        let g = grid();
        let f = Field3::from_fn(&g, |y1, y2, y3| (2.0 * y1).sin() * (1.5 * y2).cos() + y3 * y3);
        let d = ddy1(&f, g.h1(), Parity::None);
        let exact = Field3::from_fn(&g, |y1, y2, _| 2.0 * (2.0 * y1).cos() * (1.5 * y2).cos());
        // interior error O(h^2)
        let mut err = 0.0f64;
        for i in 1..g.n1 - 1 {
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    err = err.max((d[(i, j, k)] - exact[(i, j, k)]).abs());
                }
            }
        }
        assert!(err < 4.0 * g.h1() * g.h1());
    }

    #[test]
    fn parity_derivative_exact_zero_for_even_fields() {
        let g = grid();
        let f = Field3::from_fn(&g, |_, y2, y3| (std::f64::consts::PI * y2).cos() + y3 * y3);
        let d = ddy2(&f, g.h2(), Parity::Even);
        for i in 0..g.n1 {
            for k in 0..g.n3 {
                assert_eq!(d[(i, 0, k)], 0.0);
                assert_eq!(d[(i, g.n2 - 1, k)], 0.0);
            }
        }
    }

    #[test]
    fn bicubic_sample_exact_on_nodes_and_cubics() {
        let g = grid();
        let p = |y2: f64, y3: f64| 1.0 + y2 - 0.5 * y3 + y2 * y2 * y3 - y3 * y3 * y3;
        let f = Field2::from_fn(&g, p);
        for j in 0..g.n2 {
            for k in 0..g.n3 {
                assert_abs_diff_eq!(f.sample(g.y2(j), g.y3(k)), p(g.y2(j), g.y3(k)), epsilon = 1e-13);
            }
        }
        for &(a, b) in &[(0.231, -0.57), (-0.99, 0.99), (0.5, 0.125)] {
            assert_abs_diff_eq!(f.sample(a, b), p(a, b), epsilon = 1e-12);
        }
    }
}
