//! Convolution kernels: continuous descriptions, grid sampling, hypothesis checks and the
//! two quadrature paths for `J*u`.
//!
//! Both paths evaluate the trapezoid rule over the grid nodes,
//!
//! ```text
//! (J*u)_i = dx [ 1/2 J(x_0 - x_i) u_0 + sum_{m=1}^{M-1} J(x_m - x_i) u_m + 1/2 J(x_M - x_i) u_M ]
//! ```
//!
//! so `u` is implicitly zero outside `[-X, X]`. A constant field therefore loses mass within a
//! kernel width of either boundary; callers that know the far-field state can use
//! [`convolve_extended`] to add the missing tails back.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{same_spacing, Field, Grid};
use crate::numerics::fft_friendly_len;
use crate::validation::ValidationReport;

/// Default tolerance on the discrete mass.
pub const DEFAULT_TAU_MASS: f64 = 1e-6;

/// Radial density table: nonnegative offsets in increasing order with their densities.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    offsets: Vec<f64>,
    density: Vec<f64>,
}

impl KernelTable {
    /// Accepts either one-sided (offsets >= 0) or two-sided tables; a two-sided table must be
    /// mirror symmetric.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpec("kernel table is empty".into()));
        }
        if points.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidSpec("kernel table has non-finite entries".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSpec("kernel table has repeated offsets".into()));
        }
        let (neg, nonneg): (Vec<_>, Vec<_>) = points.into_iter().partition(|p| p.0 < 0.0);
        if nonneg.is_empty() {
            return Err(Error::InvalidSpec("kernel table has no nonnegative offsets".into()));
        }
        for &(x, v) in &neg {
            let mirror = nonneg.iter().find(|p| (p.0 + x).abs() <= 1e-12 * x.abs().max(1.0));
            match mirror {
                Some(&(_, w)) if (w - v).abs() <= 1e-12 * w.abs().max(v.abs()).max(1e-300) => {}
                _ => {
                    return Err(Error::Hypothesis(format!(
                        "kernel table is not even: no matching density at offset {}",
                        -x
                    )))
                }
            }
        }
        Ok(KernelTable {
            offsets: nonneg.iter().map(|p| p.0).collect(),
            density: nonneg.iter().map(|p| p.1).collect(),
        })
    }

    /// Two whitespace- or comma-separated columns: offset, density. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::ConfigParse {
                    line: n + 1,
                    message: format!("kernel table rows need 2 columns, found {}", cols.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::ConfigParse {
                    line: n + 1,
                    message: format!("bad number {s:?}: {e}"),
                })
            };
            points.push((parse(cols[0])?, parse(cols[1])?));
        }
        KernelTable::new(points)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KernelTable::parse(&text)
    }

    fn density(&self, x: f64) -> f64 {
        let a = x.abs();
        let last = self.offsets.len() - 1;
        if a > self.offsets[last] {
            return 0.0;
        }
        if a <= self.offsets[0] {
            return self.density[0];
        }
        let k = self.offsets.partition_point(|&o| o <= a);
        let (x0, x1) = (self.offsets[k - 1], self.offsets[k]);
        let (v0, v1) = (self.density[k - 1], self.density[k]);
        v0 + (v1 - v0) * (a - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// `exp(-x^2 / 2 sigma^2) / (sigma sqrt(2 pi))`.
    Gaussian { sigma: f64 },
    /// Biweight bump `15/(16 r) (1 - (x/r)^2)^2` on `|x| < r`.
    Bump { radius: f64 },
    Table(KernelTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Rescale the samples to unit discrete mass. Off by default so validation sees the raw
    /// discretization.
    pub normalize: bool,
    pub tau_mass: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::gaussian(1.0)
    }
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec { family: KernelFamily::Gaussian { sigma }, normalize: false, tau_mass: DEFAULT_TAU_MASS }
    }

    pub fn bump(radius: f64) -> Self {
        KernelSpec { family: KernelFamily::Bump { radius }, normalize: false, tau_mass: DEFAULT_TAU_MASS }
    }

    pub fn table(table: KernelTable) -> Self {
        KernelSpec { family: KernelFamily::Table(table), normalize: false, tau_mass: DEFAULT_TAU_MASS }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            KernelFamily::Gaussian { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                Err(Error::InvalidSpec(format!("Gaussian width must be positive, got {sigma}")))
            }
            KernelFamily::Bump { radius } if !(radius.is_finite() && *radius > 0.0) => {
                Err(Error::InvalidSpec(format!("bump half-width must be positive, got {radius}")))
            }
            KernelFamily::Table(t) => match t.density.iter().position(|&v| v < 0.0) {
                Some(k) => Err(Error::Hypothesis(format!(
                    "kernel density must be nonnegative: J({}) = {}",
                    t.offsets[k], t.density[k]
                ))),
                None => Ok(()),
            },
            _ if !(self.tau_mass.is_finite() && self.tau_mass > 0.0) => {
                Err(Error::InvalidSpec(format!("tau_mass must be positive, got {}", self.tau_mass)))
            }
            _ => Ok(()),
        }
    }

    /// Continuous density `J(x)`; always evaluated at `|x|`.
    pub fn density(&self, x: f64) -> f64 {
        let a = x.abs();
        match &self.family {
            KernelFamily::Gaussian { sigma } => {
                let s = a / sigma;
                (-0.5 * s * s).exp() / (sigma * (2.0 * PI).sqrt())
            }
            KernelFamily::Bump { radius } => {
                if a >= *radius {
                    0.0
                } else {
                    let s = a / radius;
                    let q = 1.0 - s * s;
                    15.0 / (16.0 * radius) * q * q
                }
            }
            KernelFamily::Table(t) => t.density(a),
        }
    }
}

/// Grid-sampled kernel `J_m = J(m dx)`, `m = -K..=K`.
pub struct DiscreteKernel {
    dx: f64,
    samples: Vec<f64>,
    mass: f64,
    first_moment: f64,
    tau_mass: f64,
    plans: Mutex<Vec<Arc<SpectralPlan>>>,
    suffix: OnceLock<Vec<f64>>,
}

impl Clone for DiscreteKernel {
    fn clone(&self) -> Self {
        DiscreteKernel {
            dx: self.dx,
            samples: self.samples.clone(),
            mass: self.mass,
            first_moment: self.first_moment,
            tau_mass: self.tau_mass,
            plans: Mutex::new(Vec::new()),
            suffix: OnceLock::new(),
        }
    }
}

impl fmt::Debug for DiscreteKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteKernel")
            .field("dx", &self.dx)
            .field("max_offset", &self.max_offset())
            .field("mass", &self.mass)
            .field("first_moment", &self.first_moment)
            .finish()
    }
}

/// Sample `spec` on offsets covering the full width of `grid` (`K = M`).
pub fn build_kernel(spec: &KernelSpec, grid: &Grid) -> Result<DiscreteKernel> {
    spec.validate()?;
    let k_max = grid.intervals();
    let dx = grid.dx();
    let half: Vec<f64> = (0..=k_max).map(|m| spec.density(m as f64 * dx)).collect();
    let mut samples = Vec::with_capacity(2 * k_max + 1);
    samples.extend(half.iter().rev());
    samples.extend(&half[1..]);
    let mut kernel = DiscreteKernel::from_samples(dx, samples, spec.tau_mass)?;
    if spec.normalize {
        let mass = kernel.mass;
        if mass <= 0.0 {
            return Err(Error::Hypothesis("kernel has zero discrete mass".into()));
        }
        kernel.samples.iter_mut().for_each(|v| *v /= mass);
        kernel.recompute_moments();
    }
    Ok(kernel)
}

impl DiscreteKernel {
    /// Wrap raw samples (odd length, centered). No hypothesis checks beyond shape; see
    /// [`validate_kernel`].
    pub fn from_samples(dx: f64, samples: Vec<f64>, tau_mass: f64) -> Result<Self> {
        if samples.len() % 2 == 0 {
            return Err(Error::Dimension(format!(
                "kernel sample count must be odd (centered), got {}",
                samples.len()
            )));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::InvalidSpec(format!("kernel spacing must be positive, got {dx}")));
        }
        let mut k = DiscreteKernel {
            dx,
            samples,
            mass: 0.0,
            first_moment: 0.0,
            tau_mass,
            plans: Mutex::new(Vec::new()),
            suffix: OnceLock::new(),
        };
        k.recompute_moments();
        Ok(k)
    }

    fn recompute_moments(&mut self) {
        let k_max = self.max_offset();
        let last = self.samples.len() - 1;
        let w = |idx: usize| if idx == 0 || idx == last { 0.5 } else { 1.0 };
        let mut mass = 0.0;
        let mut moment = 0.0;
        for (idx, &v) in self.samples.iter().enumerate() {
            let offset = (idx as f64 - k_max as f64).abs() * self.dx;
            mass += w(idx) * v;
            moment += w(idx) * offset * v;
        }
        self.mass = self.dx * mass;
        self.first_moment = self.dx * moment;
        self.plans = Mutex::new(Vec::new());
        self.suffix = OnceLock::new();
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Largest sampled offset index `K`.
    pub fn max_offset(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// `J_m` for `m` in `-K..=K`.
    pub fn sample(&self, m: isize) -> f64 {
        self.samples[(m + self.max_offset() as isize) as usize]
    }

    /// Trapezoid sum `dx sum_m J_m`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Trapezoid sum of `|x| J`.
    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }

    pub fn tau_mass(&self) -> f64 {
        self.tau_mass
    }

    /// `sum_m |J_{m+1} - J_m|`, including the jumps to zero past both ends. Approximates the
    /// Lipschitz constant `int |J'|`.
    pub fn total_variation(&self) -> f64 {
        let s = &self.samples;
        let inner: f64 = s.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        inner + s[0].abs() + s[s.len() - 1].abs()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if !same_spacing(self.dx, grid.dx()) {
            return Err(Error::Dimension(format!(
                "kernel spacing {} differs from grid spacing {}",
                self.dx,
                grid.dx()
            )));
        }
        if grid.intervals() > self.max_offset() {
            return Err(Error::Dimension(format!(
                "kernel covers {} offsets but the grid needs {}",
                self.max_offset(),
                grid.intervals()
            )));
        }
        Ok(())
    }

    fn plan(&self, len: usize) -> Arc<SpectralPlan> {
        let mut plans = self.plans.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = plans.iter().find(|p| p.len == len) {
            return Arc::clone(p);
        }
        let plan = Arc::new(SpectralPlan::new(self, len));
        plans.push(Arc::clone(&plan));
        plan
    }

    /// `(J*1)_i` on a grid of `len` nodes: the quadrature mass seen from each node.
    pub fn row_mass(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        let plan = self.plan(grid.len());
        Ok(plan.row_mass(self).to_vec())
    }

    /// Suffix sums `S_d = sum_{q >= d} J_q` over nonnegative offsets, accumulated from the far end.
    fn suffix_sums(&self) -> &[f64] {
        self.suffix.get_or_init(|| {
            let k_max = self.max_offset();
            let mut s = vec![0.0; k_max + 2];
            for d in (0..=k_max).rev() {
                s[d] = s[d + 1] + self.sample(d as isize);
            }
            s
        })
    }

    /// Quadrature mass that a node sees beyond a boundary at offset `d` (the missing half of the
    /// boundary node plus everything farther out).
    pub fn tail_mass(&self, d: usize) -> f64 {
        let s = self.suffix_sums();
        if d > self.max_offset() {
            return 0.0;
        }
        self.dx * (0.5 * self.sample(d as isize) + s[d + 1])
    }
}

/// Per-length FFT state for the spectral path.
struct SpectralPlan {
    len: usize,
    nfft: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
    row_mass: OnceLock<Vec<f64>>,
}

impl SpectralPlan {
    fn new(kernel: &DiscreteKernel, len: usize) -> Self {
        let m = len - 1;
        // kernel segment has 2m+1 taps; linear convolution length is 3m+1
        let nfft = fft_friendly_len(3 * m + 1);
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(nfft);
        let inverse = planner.plan_fft_inverse(nfft);
        let mut kernel_hat = vec![Complex64::new(0.0, 0.0); nfft];
        for (slot, off) in kernel_hat.iter_mut().zip(-(m as isize)..=(m as isize)) {
            slot.re = kernel.sample(off);
        }
        forward.process(&mut kernel_hat);
        SpectralPlan { len, nfft, forward, inverse, kernel_hat, row_mass: OnceLock::new() }
    }

    fn apply(&self, dx: f64, u: &[f64]) -> Vec<f64> {
        let m = self.len - 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nfft];
        for (slot, &v) in buf.iter_mut().zip(u) {
            slot.re = v;
        }
        buf[0].re *= 0.5;
        buf[m].re *= 0.5;
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= *k;
        }
        self.inverse.process(&mut buf);
        let scale = dx / self.nfft as f64;
        buf[m..=2 * m].iter().map(|c| c.re * scale).collect()
    }

    fn row_mass(&self, kernel: &DiscreteKernel) -> &[f64] {
        self.row_mass.get_or_init(|| self.apply(kernel.dx, &vec![1.0; self.len]))
    }
}

/// Which quadrature path evaluates `J*u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionPath {
    /// Direct summation, ascending index order.
    Direct,
    /// Zero-padded FFT linear convolution.
    #[default]
    Fast,
}

/// Hypothesis checks on a sampled kernel.
pub fn validate_kernel(k: &DiscreteKernel) -> ValidationReport {
    let mut report = ValidationReport::new("kernel");
    let s = k.samples();
    let negatives = s.iter().filter(|&&v| v < 0.0).count();
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    report.check("nonnegative", negatives == 0, format!("min sample {min:e}, {negatives} negative"));

    let k_max = k.max_offset() as isize;
    let asym = (1..=k_max)
        .map(|m| (k.sample(m) - k.sample(-m)).abs())
        .fold(0.0, f64::max);
    let even = (1..=k_max).all(|m| k.sample(m).to_bits() == k.sample(-m).to_bits());
    report.check("even", even, format!("max |J_m - J_-m| = {asym:e}"));

    let mass_err = (k.mass() - 1.0).abs();
    report.check(
        "unit_mass",
        mass_err <= k.tau_mass(),
        format!("mass {:.15}, |mass - 1| = {mass_err:e} (tol {:e})", k.mass(), k.tau_mass()),
    );
    report.check(
        "finite_first_moment",
        k.first_moment().is_finite(),
        format!("int |x| J = {}", k.first_moment()),
    );
    report.constant("mass", k.mass());
    report.constant("first_moment", k.first_moment());
    report.constant("lipschitz_l1", k.total_variation());
    report
}

fn check_field(k: &DiscreteKernel, u: &Field) -> Result<()> {
    k.check_grid(u.grid())
}

/// Direct trapezoid quadrature; each output sums in ascending node order.
pub fn convolve_direct(k: &DiscreteKernel, u: &Field) -> Result<Field> {
    check_field(k, u)?;
    let values = direct_values(k, u.values());
    Field::new(*u.grid(), values, u.time())
}

fn direct_values(k: &DiscreteKernel, u: &[f64]) -> Vec<f64> {
    let m = u.len() - 1;
    let row = |i: usize| {
        let mut acc = 0.0;
        for (j, &v) in u.iter().enumerate() {
            let w = if j == 0 || j == m { 0.5 } else { 1.0 };
            acc += w * k.sample(j as isize - i as isize) * v;
        }
        k.dx * acc
    };
    if u.len() >= 512 {
        (0..u.len()).into_par_iter().map(row).collect()
    } else {
        (0..u.len()).map(row).collect()
    }
}

/// Spectral evaluation of the same quadrature as [`convolve_direct`].
pub fn convolve_fast(k: &DiscreteKernel, u: &Field) -> Result<Field> {
    check_field(k, u)?;
    let plan = k.plan(u.grid().len());
    Field::new(*u.grid(), plan.apply(k.dx, u.values()), u.time())
}

pub fn convolve(k: &DiscreteKernel, u: &Field, path: ConvolutionPath) -> Result<Field> {
    match path {
        ConvolutionPath::Direct => convolve_direct(k, u),
        ConvolutionPath::Fast => convolve_fast(k, u),
    }
}

/// `J*u` with `u` continued by the constant `left` below `-X` and `right` above `X`, instead of 0.
pub fn convolve_extended(
    k: &DiscreteKernel,
    u: &Field,
    left: f64,
    right: f64,
    path: ConvolutionPath,
) -> Result<Field> {
    let mut out = convolve(k, u, path)?;
    if left == 0.0 && right == 0.0 {
        return Ok(out);
    }
    let m = u.grid().intervals();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        *v += left * k.tail_mass(i) + right * k.tail_mass(m - i);
    }
    Ok(out)
}

/// Two-sided Laplace transform `int J(y) e^{-lambda y} dy`.
pub fn kernel_transform(spec: &KernelSpec, lambda: f64) -> Result<f64> {
    spec.validate()?;
    let value = match &spec.family {
        KernelFamily::Gaussian { sigma } => (0.5 * sigma * sigma * lambda * lambda).exp(),
        KernelFamily::Bump { radius } => {
            // even integrand: 2 int_0^r J(y) cosh(lambda y) dy by composite Simpson
            let panels = 4096;
            let h = radius / panels as f64;
            let g = |y: f64| spec.density(y) * (lambda * y).cosh();
            let mut acc = g(0.0) + g(*radius);
            for j in 1..panels {
                acc += if j % 2 == 1 { 4.0 } else { 2.0 } * g(j as f64 * h);
            }
            2.0 * acc * h / 3.0
        }
        KernelFamily::Table(t) => {
            let g = |y: f64, v: f64| v * (lambda * y).cosh();
            // flat segment [0, a_0] carries the innermost density
            let a0 = t.offsets[0];
            let mut acc = 0.5 * a0 * (g(0.0, t.density[0]) + g(a0, t.density[0]));
            for w in 0..t.offsets.len() - 1 {
                let (y0, y1) = (t.offsets[w], t.offsets[w + 1]);
                acc += 0.5 * (y1 - y0) * (g(y0, t.density[w]) + g(y1, t.density[w + 1]));
            }
            let total = 2.0 * acc;
            let n = t.offsets.len();
            let spacing = if n > 1 { t.offsets[n - 1] - t.offsets[n - 2] } else { t.offsets[0] };
            let last = g(t.offsets[n - 1], t.density[n - 1]) * spacing.max(f64::MIN_POSITIVE);
            if last > 1e-8 * total.abs() {
                return Err(Error::Divergence { lambda });
            }
            total
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence { lambda })
    }
}
