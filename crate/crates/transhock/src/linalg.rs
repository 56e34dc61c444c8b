//! Small dense/banded linear algebra used by the 1-D solvers and test oracles.

use crate::error::{Error, Result};

/// Solve a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` multiplies x[i-1] in row i, `diag[i]` multiplies x[i],
/// `upper[i]` multiplies x[i+1]. No pivoting; callers must supply
/// diagonally reasonable systems (ours are).
pub fn solve_tridiag(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(Error::Config { message: "tridiagonal pivot zero".into() });
    }
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        if m == 0.0 {
            return Err(Error::Config { message: "tridiagonal pivot zero".into() });
        }
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let xi = x[i] - c[i] * x[i + 1];
        x[i] = xi;
    }
    Ok(x)
}

/// Dense LU solve with partial pivoting. Used as the oracle against the
/// banded/bordered fast paths and as the fallback for nearly singular
/// bordered systems.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut piv = vec![0usize; n];
        for col in 0..n {
            let mut pmax = col;
            let mut vmax = lu[col * n + col].abs();
            for r in col + 1..n {
                let v = lu[r * n + col].abs();
                if v > vmax {
                    vmax = v;
                    pmax = r;
                }
            }
            if vmax == 0.0 {
                return Err(Error::Config { message: "singular dense matrix".into() });
            }
            piv[col] = pmax;
            if pmax != col {
                for c in 0..n {
                    lu.swap(col * n + c, pmax * n + c);
                }
            }
            let pivot = lu[col * n + col];
            for r in col + 1..n {
                let f = lu[r * n + col] / pivot;
                lu[r * n + col] = f;
                for c in col + 1..n {
                    lu[r * n + c] -= f * lu[col * n + c];
                }
            }
        }
        Ok(Self { n, lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            x.swap(i, self.piv[i]);
            for j in 0..i {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Composite Simpson weights for a uniform grid with `n` nodes (n >= 1).
///
/// Odd interval counts get a trailing 3/8 panel so accuracy stays O(h^4).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n.max(1)];
    if n <= 1 {
        return w;
    }
    if n == 2 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let intervals = n - 1;
    // Even interval count: plain composite Simpson. Odd: Simpson on the
    // leading part, 3/8 rule on the last three intervals (n >= 4), or
    // 3/8 alone (n == 4 handled by the same split with zero leading part).
    let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
    if intervals % 2 == 1 && n < 4 {
        // n == 3 with ... cannot happen (3 nodes = 2 intervals, even);
        // n == 2 handled above.
        unreachable!();
    }
    if simpson_end > 0 {
        w[0] += h / 3.0;
        w[simpson_end] += h / 3.0;
        let mut i = 1;
        while i < simpson_end {
            w[i] += 4.0 * h / 3.0;
            i += 2;
        }
        let mut i = 2;
        while i < simpson_end {
            w[i] += 2.0 * h / 3.0;
            i += 2;
        }
    }
    if intervals % 2 == 1 {
        let s = n - 4;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Cumulative integral of uniformly sampled values, O(h^4) via local cubic
/// fits: each step uses the 4-point Newton-Cotes weights of the cubic through
/// the nearest nodes.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
        }
        return out;
    }
    for i in 1..n {
        // integrate values over [i-1, i] with a cubic through 4 nearby nodes
        let (s, t0) = if i == 1 {
            (0, 0.0)
        } else if i == n - 1 {
            (n - 4, (i - 1 - (n - 4)) as f64)
        } else {
            (i - 2, 1.0)
        };
        let f = &values[s..s + 4];
        // antiderivative of the Lagrange cubic on nodes 0,1,2,3 evaluated
        // between t0 and t0+1 (in units of h)
        let seg = cubic_panel(f, t0, t0 + 1.0) * h;
        out[i] = out[i - 1] + seg;
    }
    out
}

/// Integral of the Lagrange cubic through f[0..4] at nodes t = 0,1,2,3,
/// taken from a to b (t-units).
fn cubic_panel(f: &[f64], a: f64, b: f64) -> f64 {
    // Lagrange basis integrals: L_k(t) coefficients worked out once.
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
    (0..4).map(|k| f[k] * (ib[k] - ia[k])).sum()
}

/// 4-point Lagrange (cubic) interpolation at parameter `t` measured in node
/// units from window[0]. Exact for cubic polynomials.
pub fn cubic4(window: &[f64; 4], t: f64) -> f64 {
    let t1 = t - 1.0;
    let t2 = t - 2.0;
    let t3 = t - 3.0;
    let l0 = -t1 * t2 * t3 / 6.0;
    let l1 = t * t2 * t3 / 2.0;
    let l2 = -t * t1 * t3 / 2.0;
    let l3 = t * t1 * t2 / 6.0;
    window[0] * l0 + window[1] * l1 + window[2] * l2 + window[3] * l3
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tridiag_solves_known_system() {
        // [2 1 0; 1 2 1; 0 1 2] x = [4, 8, 6] -> x = [0.5, 3, 1.5]
        let x = solve_tridiag(
            &[0.0, 1.0, 1.0],
            &[2.0, 2.0, 2.0],
            &[1.0, 1.0, 0.0],
            &[4.0, 8.0, 6.0],
        )
        .unwrap();
        assert_abs_diff_eq!(2.0 * x[0] + x[1], 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(x[0] + 2.0 * x[1] + x[2], 8.0, epsilon = 1e-13);
        assert_abs_diff_eq!(x[1] + 2.0 * x[2], 6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn dense_lu_matches_tridiag() {
        let n = 6;
        let mut a = vec![0.0; n * n];
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            diag[i] = 3.0 + i as f64;
            a[i * n + i] = diag[i];
            if i > 0 {
                lower[i] = -1.0 + 0.1 * i as f64;
                a[i * n + i - 1] = lower[i];
            }
            if i + 1 < n {
                upper[i] = 0.7;
                a[i * n + i + 1] = 0.7;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let x1 = solve_tridiag(&lower, &diag, &upper, &rhs).unwrap();
        let x2 = DenseLu::factor(&a, n).unwrap().solve(&rhs);
        for i in 0..n {
            assert_abs_diff_eq!(x1[i], x2[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn simpson_exact_for_cubics() {
        for n in [3usize, 5, 9, 4, 6, 8] {
            let h = 1.0 / (n - 1) as f64;
            let w = simpson_weights(n, h);
            let integral: f64 =
                (0..n).map(|i| { let x = i as f64 * h; w[i] * (x * x * x - 2.0 * x + 1.0) }).sum();
            // exact integral of x^3 - 2x + 1 on [0,1] is 1/4 - 1 + 1 = 0.25
            assert_abs_diff_eq!(integral, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn cumulative_integral_fourth_order() {
        let f = |x: f64| (2.5 * x).sin() + x * x;
        let exact = |x: f64| (1.0 - (2.5 * x).cos()) / 2.5 + x * x * x / 3.0;
        let mut errs = Vec::new();
        for n in [17usize, 33] {
            let h = 1.0 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
            let cum = cumulative_integral(&vals, h);
            let err = (0..n)
                .map(|i| (cum[i] - exact(i as f64 * h)).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn cubic4_reproduces_cubics() {
        let p = |x: f64| 2.0 - x + 0.5 * x * x - 0.25 * x * x * x;
        let w = [p(0.0), p(1.0), p(2.0), p(3.0)];
        for &t in &[0.0, 0.3, 1.5, 2.9, 3.0] {
            assert_abs_diff_eq!(cubic4(&w, t), p(t), epsilon = 1e-13);
        }
    }
}
