//! Traveling fronts `u(t, x) = U(x - ct)` with `U(-inf) = 0`, `U(+inf) = 1`:
//!
//! ```text
//! c U' + J*U - U - f(U) = 0
//! ```
//!
//! solved on `[-l, l]` with `U` clamped at the ends, continued by 0 and 1 outside for the
//! convolution, and pinned by `U(0) = alpha`. The unknowns are the free nodal values and `c`,
//! which occupies the pinned node's slot.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernels::{build_kernel, convolve, convolve_extended, kernel_transform, ConvolutionPath, DiscreteKernel, KernelSpec};
use crate::linalg::{gmres, Tridiagonal};
use crate::numerics::{bisect_root, linear_fit};
use crate::reaction::Nonlinearity;

/// Monotonicity slack for converged profiles.
pub const MONOTONE_TOLERANCE: f64 = 1e-8;
/// Largest allowed `U(-l)` and `1 - U(l)`, measured one node in from each end.
pub const TAIL_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct FrontOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed per iteration.
    pub max_halvings: usize,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// Starting profile on the front grid; the logistic ramp if `None`.
    pub init: Option<Field>,
    /// Starting speed; estimated from the initial profile if `None`.
    pub init_speed: Option<f64>,
}

impl Default for FrontOptions {
    fn default() -> Self {
        FrontOptions {
            tol: 1e-9,
            max_iter: 60,
            max_halvings: 30,
            gmres_tol: 1e-12,
            gmres_restart: 200,
            gmres_max_iter: 2000,
            init: None,
            init_speed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrontSolution {
    pub profile: Field,
    pub speed: f64,
    /// Pointwise residual, zero at the clamped ends.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// `U(0) - alpha`.
    pub phase: f64,
    /// Sup-norm residual before each iteration and at the end.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Largest drop `U_j - U_{j+1}`; zero for a nondecreasing profile.
    pub monotone_defect: f64,
    /// `(lambda_1, lambda_2)` fitted from the tails, when the fit windows allow it.
    pub tail_rates: Option<(f64, f64)>,
}

impl FrontSolution {
    pub fn grid(&self) -> &Grid {
        self.profile.grid()
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone_defect <= MONOTONE_TOLERANCE
    }

    /// `dxi sum_j (U'_j)^2` with central differences inside and one-sided at the ends.
    pub fn gradient_energy(&self) -> f64 {
        let du = derivative(self.profile.values(), self.grid().dx());
        let sq: Vec<f64> = du.iter().map(|d| d * d).collect();
        self.grid().integrate(&sq)
    }
}

fn derivative(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len() - 1;
    (0..=n)
        .map(|j| {
            if j == 0 {
                (u[1] - u[0]) / h
            } else if j == n {
                (u[n] - u[n - 1]) / h
            } else {
                (u[j + 1] - u[j - 1]) / (2.0 * h)
            }
        })
        .collect()
}

struct Problem<'a> {
    grid: Grid,
    kernel: DiscreteKernel,
    nl: &'a Nonlinearity,
    alpha: f64,
}

impl Problem<'_> {
    /// Residual on all nodes, zero at the ends.
    fn residual(&self, u: &[f64], c: f64) -> Result<Vec<f64>> {
        let h = self.grid.dx();
        let field = Field::new(self.grid, u.to_vec(), 0.0)?;
        let ju = convolve_extended(&self.kernel, &field, 0.0, 1.0, ConvolutionPath::Fast)?;
        let n = self.grid.intervals();
        let mut r = vec![0.0; n + 1];
        for j in 1..n {
            let du = (u[j + 1] - u[j - 1]) / (2.0 * h);
            r[j] = c * du + ju.values()[j] - u[j] - self.nl.f(u[j]);
        }
        Ok(r)
    }

    /// Unknown vector: `u` with the pinned slot replaced by `c`, ends zero.
    fn pack(&self, u: &[f64], c: f64) -> Vec<f64> {
        let mut z = u.to_vec();
        let n = self.grid.intervals();
        z[0] = 0.0;
        z[n] = 1.0;
        z[self.grid.center()] = c;
        z
    }

    fn unpack(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let mut u = z.to_vec();
        let n = self.grid.intervals();
        u[0] = 0.0;
        u[n] = 1.0;
        let c = z[self.grid.center()];
        u[self.grid.center()] = self.alpha;
        (u, c)
    }
}

/// Logistic ramp `1 / (1 + ((1-alpha)/alpha) e^{-xi})`, which equals `alpha` at `xi = 0`.
pub fn logistic_guess(grid: &Grid, alpha: f64) -> Field {
    let a = (1.0 - alpha) / alpha;
    Field::from_fn(*grid, |x| 1.0 / (1.0 + a * (-x).exp()))
}

/// Solve for `(U, c)` on `[-half_width, half_width]` with spacing `dxi`.
pub fn front_solve(spec: &KernelSpec, nl: &Nonlinearity, half_width: f64, dxi: f64, opts: &FrontOptions) -> Result<FrontSolution> {
    let grid = Grid::with_spacing(half_width, dxi)?;
    let kernel = build_kernel(spec, &grid)?;
    let alpha = nl.alpha();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Hypothesis(format!("front solve needs an interior zero alpha in (0, 1), got {alpha}")));
    }
    let problem = Problem { grid, kernel, nl, alpha };
    let n = grid.intervals();
    let center = grid.center();
    let h = grid.dx();

    let init = match &opts.init {
        Some(f) if f.grid().same_as(&grid) => f.values().to_vec(),
        Some(_) => return Err(Error::Dimension("front initial profile is not on the front grid".into())),
        None => logistic_guess(&grid, alpha).into_values(),
    };
    let mut u0 = init;
    u0[0] = 0.0;
    u0[n] = 1.0;
    u0[center] = alpha;
    let c0 = match opts.init_speed {
        Some(c) => c,
        None => {
            let du = derivative(&u0, h);
            let g = grid.integrate(&du.iter().map(|d| d * d).collect::<Vec<_>>());
            nl.total_integral() / g
        }
    };
    let mut z = problem.pack(&u0, c0);
    let mut r = problem.residual(&u0, c0)?;
    let mut rnorm = sup(&r);
    let mut history = vec![rnorm];
    let mut iterations = 0;
    let mut polished = false;

    while iterations < opts.max_iter {
        if rnorm < opts.tol {
            if polished {
                break;
            }
            polished = true;
        }
        iterations += 1;
        let (u, c) = problem.unpack(&z);
        let delta = newton_direction(&problem, &u, c, &r, opts)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            let (tu, tc) = problem.unpack(&trial);
            let tr = problem.residual(&tu, tc)?;
            let tn = sup(&tr);
            if tn.is_finite() && (tn < rnorm || (polished && tn <= rnorm)) {
                accepted = Some((trial, tr, tn));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, tr, tn)) => {
                z = trial;
                r = tr;
                rnorm = tn;
                history.push(rnorm);
            }
            None if rnorm < opts.tol => break,
            None => return Err(Error::SolverFailure { iterations, history }),
        }
    }
    if !(rnorm < opts.tol) {
        return Err(Error::SolverFailure { iterations, history });
    }

    let (u, c) = problem.unpack(&z);
    let monotone_defect = u.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    if u[1] > TAIL_LIMIT || 1.0 - u[n - 1] > TAIL_LIMIT {
        return Err(Error::DomainTooSmall(format!(
            "front tails at the ends are {:e} and {:e}; widen the xi domain",
            u[1],
            1.0 - u[n - 1]
        )));
    }
    let profile = Field::new(grid, u, 0.0)?;
    let mut fs = FrontSolution {
        phase: profile.center_value() - alpha,
        profile,
        speed: c,
        residual: r,
        residual_norm: rnorm,
        history,
        iterations,
        monotone_defect,
        tail_rates: None,
    };
    fs.tail_rates = measure_tail_rates(&fs).ok();
    Ok(fs)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Solve `A delta = -r`, `A` the linearization in `(u, c)`.
fn newton_direction(p: &Problem<'_>, u: &[f64], c: f64, r: &[f64], opts: &FrontOptions) -> Result<Vec<f64>> {
    let grid = p.grid;
    let n = grid.intervals();
    let center = grid.center();
    let h = grid.dx();
    let du = derivative(u, h);
    let dfu: Vec<f64> = u.iter().map(|&s| p.nl.df(s)).collect();
    let k = &p.kernel;

    let apply = |z: &[f64]| -> Vec<f64> {
        let mut v = z.to_vec();
        let dc = v[center];
        v[0] = 0.0;
        v[n] = 0.0;
        v[center] = 0.0;
        let field = Field::new(grid, v, 0.0).expect("length matches grid");
        let jv = convolve(k, &field, ConvolutionPath::Fast).expect("same grid");
        let v = field.values();
        let mut out = vec![0.0; n + 1];
        out[0] = z[0];
        out[n] = z[n];
        for j in 1..n {
            out[j] = c * (v[j + 1] - v[j - 1]) / (2.0 * h) + jv.values()[j] - v[j] - dfu[j] * v[j] + dc * du[j];
        }
        out
    };

    // Local part of A: drops the convolution and keeps only the diagonal of the c column.
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n + 1];
    let mut upper = vec![0.0; n];
    let a = c / (2.0 * h);
    for j in 1..n {
        diag[j] = -1.0 - dfu[j];
        if j > 1 {
            lower[j - 1] = -a;
        }
        if j < n - 1 {
            upper[j] = a;
        }
    }
    diag[center] = du[center];
    // rows center -/+ 1 do not depend on the pinned value
    upper[center - 1] = 0.0;
    lower[center] = 0.0;
    let tri = Tridiagonal::factor(&lower, &diag, &upper)
        .ok_or_else(|| Error::SolverFailure { iterations: 0, history: vec![sup(r)] })?;

    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let (delta, stats) = gmres(apply, |v| tri.solve(v), &rhs, opts.gmres_tol, opts.gmres_restart, opts.gmres_max_iter);
    if !stats.relative_residual.is_finite() {
        return Err(Error::SolverFailure { iterations: stats.iterations, history: vec![sup(r)] });
    }
    Ok(delta)
}

/// `|c dxi sum (U')^2 - int_0^1 f|`.
pub fn speed_identity_residual(fs: &FrontSolution, nl: &Nonlinearity) -> f64 {
    (fs.speed * fs.gradient_energy() - nl.total_integral()).abs()
}

/// Roots of `c lambda + J^(lambda) - 1 - f'(s) = 0`: `lambda_1 < 0` at `s = 1` and
/// `lambda_2 > 0` at `s = 0`, each to `1e-10`.
pub fn char_roots(spec: &KernelSpec, nl: &Nonlinearity, c: f64) -> Result<(f64, f64)> {
    let l1 = char_root(spec, c, nl.df(1.0), -1.0)?;
    let l2 = char_root(spec, c, nl.df(0.0), 1.0)?;
    Ok((l1, l2))
}

fn char_root(spec: &KernelSpec, c: f64, slope: f64, direction: f64) -> Result<f64> {
    let g = |lambda: f64| match kernel_transform(spec, lambda) {
        Ok(t) => c * lambda + t - 1.0 - slope,
        Err(_) => f64::NAN,
    };
    if !(slope > 0.0) {
        return Err(Error::RootNotFound(format!("rest state is not stable (f' = {slope})")));
    }
    let mut far = direction * 0.5;
    for _ in 0..60 {
        let v = g(far);
        if !v.is_finite() {
            break;
        }
        if v > 0.0 {
            let (lo, hi) = if direction < 0.0 { (far, 0.0) } else { (0.0, far) };
            return bisect_root(g, lo, hi, 1e-10);
        }
        far *= 2.0;
    }
    Err(Error::RootNotFound(format!(
        "characteristic function has no sign change on the {} half-line",
        if direction < 0.0 { "negative" } else { "positive" }
    )))
}

/// Tail rates by least squares: `log(1 - U)` on `[l/4, l/2]` and `log U` on `[-l/2, -l/4]`.
pub fn measure_tail_rates(fs: &FrontSolution) -> Result<(f64, f64)> {
    tail_rates(&fs.profile)
}

pub fn tail_rates(profile: &Field) -> Result<(f64, f64)> {
    let grid = profile.grid();
    let l = grid.half_width();
    let (mut xr, mut yr, mut xl, mut yl) = (vec![], vec![], vec![], vec![]);
    for (x, &u) in grid.nodes().zip(profile.values()) {
        if x >= 0.25 * l && x <= 0.5 * l {
            xr.push(x);
            yr.push(1.0 - u);
        } else if x >= -0.5 * l && x <= -0.25 * l {
            xl.push(x);
            yl.push(u);
        }
    }
    let fit = |xs: &[f64], ys: &[f64], side: &str| -> Result<f64> {
        if xs.len() < 2 {
            return Err(Error::FitWindow(format!("{side} window has fewer than two nodes")));
        }
        if let Some(v) = ys.iter().find(|&&v| !(v >= 1e-14)) {
            return Err(Error::FitWindow(format!("{side} tail value {v:e} is below 1e-14")));
        }
        if let Some(v) = ys.iter().find(|&&v| v > 1e-2) {
            return Err(Error::FitWindow(format!("{side} tail value {v:e} is above 1e-2")));
        }
        let logs: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
        Ok(linear_fit(xs, &logs).0)
    };
    Ok((fit(&xr, &yr, "right")?, fit(&xl, &yl, "left")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_tails() {
        let g = Grid::with_spacing(40.0, 0.05).unwrap();
        let u = Field::from_fn(g, |x| 1.0 / (1.0 + (-x).exp()));
        let (l1, l2) = tail_rates(&u).unwrap();
        assert!((l1 + 1.0).abs() < 1e-4, "{l1}");
        assert!((l2 - 1.0).abs() < 1e-4, "{l2}");
    }

    #[test]
    fn tail_windows_rejected() {
        let g = Grid::with_spacing(200.0, 0.5).unwrap();
        let u = Field::from_fn(g, |x| 1.0 / (1.0 + (-x).exp()));
        assert!(matches!(tail_rates(&u), Err(Error::FitWindow(_))));
        let g = Grid::with_spacing(4.0, 0.05).unwrap();
        let u = Field::from_fn(g, |x| 1.0 / (1.0 + (-x).exp()));
        assert!(matches!(tail_rates(&u), Err(Error::FitWindow(_))));
    }

    #[test]
    fn balanced_roots_closed_form() {
        let nl = Nonlinearity::cubic(0.5).unwrap();
        let (l1, l2) = char_roots(&KernelSpec::gaussian(1.0), &nl, 0.0).unwrap();
        let expected = (2.0 * 1.5f64.ln()).sqrt();
        assert!((l1 + expected).abs() < 1e-9);
        assert!((l2 - expected).abs() < 1e-9);
        assert!((expected - 0.90052).abs() < 1e-5);
    }

    #[test]
    fn guess_is_pinned() {
        let g = Grid::with_spacing(10.0, 0.1).unwrap();
        assert!((logistic_guess(&g, 0.4).center_value() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn balanced_front_is_stationary() {
        let nl = Nonlinearity::cubic(0.5).unwrap();
        let fs = front_solve(&KernelSpec::gaussian(1.0), &nl, 30.0, 0.05, &FrontOptions::default()).unwrap();
        assert!(fs.speed.abs() < 1e-8, "c = {}", fs.speed);
        assert!(fs.residual_norm < 1e-9);
        assert!(fs.is_monotone());
        assert!(speed_identity_residual(&fs, &nl) < 1e-8);
        assert_eq!(fs.phase, 0.0);
    }

    #[test]
    fn perturbed_speed_breaks_identity() {
        let nl = Nonlinearity::cubic(0.4).unwrap();
        let mut fs = front_solve(&KernelSpec::gaussian(1.0), &nl, 30.0, 0.05, &FrontOptions::default()).unwrap();
        assert!(fs.speed < 0.0);
        fs.speed += 0.01;
        assert!(speed_identity_residual(&fs, &nl) > 1e-3);
    }

    #[test]
    fn wrong_init_grid() {
        let nl = Nonlinearity::cubic(0.4).unwrap();
        let opts = FrontOptions { init: Some(Field::zeros(Grid::new(5.0, 10).unwrap())), ..Default::default() };
        assert!(matches!(front_solve(&KernelSpec::gaussian(1.0), &nl, 30.0, 0.05, &opts), Err(Error::Dimension(_))));
    }
}
