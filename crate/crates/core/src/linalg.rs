//! Matrix-free Krylov solver and a banded direct solve used as its preconditioner.

/// General tridiagonal system, factored once with partial pivoting.
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal {
    // LU with row interchanges, as in LAPACK gttrf: upper factor has two superdiagonals.
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    dl: Vec<f64>,
    swapped: Vec<bool>,
}

impl Tridiagonal {
    /// `lower[i]` is `A[i+1][i]`, `upper[i]` is `A[i][i+1]`. Returns `None` if singular.
    pub(crate) fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut d = diag.to_vec();
        let mut du = upper.to_vec();
        let mut dl = lower.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            return None;
        }
        Some(Tridiagonal { d, du, du2, dl, swapped })
    }

    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i + 1];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.du2[i] * b[i + 2];
            }
            b[i] = s / self.d[i];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GmresStats {
    pub(crate) iterations: usize,
    pub(crate) relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b` from `x = 0`. `apply` computes `A v`,
/// `precond` overwrites its argument with `P^{-1} v`.
pub(crate) fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&mut [f64]),
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, GmresStats) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return (x, GmresStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut total = 0;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let mut rel = beta / b_norm;
        if rel <= rel_tol {
            break;
        }
        let m = restart.min(max_iter - total).max(1);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let mut z = basis[j].clone();
            precond(&mut z);
            let mut w = apply(&z);
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    h[i][j] += hij;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= hij * vk;
                    }
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let temp = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = temp;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / b_norm;
            if rel <= rel_tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s = g[i] - ((i + 1)..used).map(|k| h[i][k] * y[k]).sum::<f64>();
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        precond(&mut update);
        for (xi, u) in x.iter_mut().zip(&update) {
            *xi += u;
        }
        if rel <= rel_tol || used == 0 {
            break;
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    (x, GmresStats { iterations: total, relative_residual: norm(&r) / b_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, v)).collect()
    }

    #[test]
    fn tridiagonal_with_zero_leading_pivot() {
        let (lower, diag, upper) = (vec![2.0, 3.0], vec![0.0, 1.0, 4.0], vec![1.0, 1.0]);
        let a = vec![vec![0.0, 1.0, 0.0], vec![2.0, 1.0, 1.0], vec![0.0, 3.0, 4.0]];
        let x_true = [0.5, -1.25, 2.0];
        let mut b = dense_apply(&a, &x_true);
        Tridiagonal::factor(&lower, &diag, &upper).unwrap().solve(&mut b);
        for (x, t) in b.iter().zip(x_true) {
            assert!((x - t).abs() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_random_against_dense_product() {
        let n = 50;
        let lower: Vec<f64> = (0..n - 1).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let upper: Vec<f64> = (0..n - 1).map(|i| ((i * 5 % 13) as f64 - 6.0) / 4.0).collect();
        let diag: Vec<f64> = (0..n).map(|i| ((i * 3 % 7) as f64 - 3.0) / 2.0 + 0.1).collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = diag[i] * x_true[i];
            if i > 0 {
                b[i] += lower[i - 1] * x_true[i - 1];
            }
            if i + 1 < n {
                b[i] += upper[i] * x_true[i + 1];
            }
        }
        Tridiagonal::factor(&lower, &diag, &upper).unwrap().solve(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-9, "{x} vs {t}");
        }
    }

    #[test]
    fn singular_tridiagonal_rejected() {
        assert!(Tridiagonal::factor(&[0.0], &[0.0, 1.0], &[0.0]).is_none());
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 40;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 3.0 } else { 1.0 / (1.0 + (i as f64 - 2.0 * j as f64).abs()) }).collect())
            .collect();
        let x_true: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let b = dense_apply(&a, &x_true);
        let (x, stats) = gmres(|v| dense_apply(&a, v), |_| {}, &b, 1e-13, 15, 500);
        assert!(stats.relative_residual < 1e-12);
        for (xi, t) in x.iter().zip(&x_true) {
            assert!((xi - t).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_zero_rhs() {
        let (x, stats) = gmres(|v| v.to_vec(), |_| {}, &[0.0; 5], 1e-12, 5, 10);
        assert_eq!(x, vec![0.0; 5]);
        assert_eq!(stats.iterations, 0);
    }
}
