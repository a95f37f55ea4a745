//! Explicit time marching of `u_t = J*u - u - f(u)`:
//!
//! ```text
//! u_i^{k+1} = u_i^k + dt [ (J*u^k)_i - u_i^k - f(u_i^k) ]
//! ```
//!
//! The update is order preserving (and keeps values in `[0, 1]`) when
//! `dt (1 + M_f) <= 1`; larger steps are refused.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernels::{build_kernel, convolve, validate_kernel, ConvolutionPath, DiscreteKernel, KernelSpec};
use crate::reaction::{validate_hypotheses, Nonlinearity};

/// Fraction of nodes at each end watched for boundary contamination.
const BOUNDARY_FRACTION: f64 = 0.05;
/// Above this, the truncated domain is judged too small for the run.
pub const BOUNDARY_LIMIT: f64 = 1e-3;
/// Tolerance used by [`center_trace_shape`].
pub const TRACE_TOLERANCE: f64 = 1e-9;

/// How the indicator `1_{[-L, L]}` is put on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitProfile {
    /// `u_i = 1` iff `|x_i| <= L`.
    #[default]
    Nodal,
    /// `u_i` is the fraction of the cell `[x_i - dx/2, x_i + dx/2]` covered by `[-L, L]`;
    /// continuous in `L`, so near-threshold data can be tuned below the grid spacing.
    CellAverage,
}

impl fmt::Display for InitProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitProfile::Nodal => "nodal",
            InitProfile::CellAverage => "cell_average",
        })
    }
}

impl FromStr for InitProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodal" => Ok(InitProfile::Nodal),
            "cell_average" => Ok(InitProfile::CellAverage),
            other => Err(Error::Config(format!("unknown init profile {other:?}"))),
        }
    }
}

/// `u_i = 1_{|x_i| <= L}`. Nodes within rounding (`1e-9 dx`) of the edge count as inside.
pub fn initial_indicator(grid: &Grid, half_length: f64) -> Result<Field> {
    initial_profile(grid, half_length, InitProfile::Nodal)
}

pub fn initial_profile(grid: &Grid, half_length: f64, profile: InitProfile) -> Result<Field> {
    if !(half_length > 0.0) {
        return Err(Error::InvalidSpec(format!("indicator half-length must be positive, got {half_length}")));
    }
    if half_length >= grid.half_width() {
        return Err(Error::DomainTooSmall(format!(
            "indicator half-length {half_length} must be below the domain half-width {}",
            grid.half_width()
        )));
    }
    let dx = grid.dx();
    let edge = half_length + 1e-9 * dx;
    let field = match profile {
        InitProfile::Nodal => Field::from_fn(*grid, |x| if x.abs() <= edge { 1.0 } else { 0.0 }),
        InitProfile::CellAverage => Field::from_fn(*grid, |x| {
            let lo = (x - 0.5 * dx).max(-half_length);
            let hi = (x + 0.5 * dx).min(half_length);
            ((hi - lo) / dx).clamp(0.0, 1.0)
        }),
    };
    Ok(field)
}

/// Forward-Euler right-hand side `J*u - u - f(u)`.
pub fn rhs(u: &Field, k: &DiscreteKernel, nl: &Nonlinearity, path: ConvolutionPath) -> Result<Field> {
    let mut out = convolve(k, u, path)?;
    for (r, &v) in out.values_mut().iter_mut().zip(u.values()) {
        *r = *r - v - nl.f(v);
    }
    Ok(out)
}

fn check_step(nl: &Nonlinearity, dt: f64) -> Result<()> {
    let bound = nl.max_stable_step();
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepSize { dt, bound });
    }
    Ok(())
}

/// One explicit step on the spectral path.
pub fn step(u: &Field, k: &DiscreteKernel, nl: &Nonlinearity, dt: f64) -> Result<Field> {
    step_with(u, k, nl, dt, ConvolutionPath::Fast)
}

pub fn step_with(
    u: &Field,
    k: &DiscreteKernel,
    nl: &Nonlinearity,
    dt: f64,
    path: ConvolutionPath,
) -> Result<Field> {
    check_step(nl, dt)?;
    let r = rhs(u, k, nl, path)?;
    Ok(advance(u, &r, dt))
}

fn advance(u: &Field, r: &Field, dt: f64) -> Field {
    let mut next = u.clone();
    for (v, &d) in next.values_mut().iter_mut().zip(r.values()) {
        *v += dt * d;
    }
    next.with_time(u.time() + dt)
}

/// `T` and `N`; the step is `T / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeSpec {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            if horizon != 0.0 {
                return Err(Error::Config(format!("time.N = 0 is inconsistent with time.T = {horizon}")));
            }
        } else if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("time.T must be positive, got {horizon}")));
        }
        Ok(TimeSpec { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.horizon / self.steps as f64
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

/// Which steps keep a full copy of the field.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SnapshotSchedule {
    /// `0`, `N/2^j` for `j >= 1` (while at least 1), and `N`.
    #[default]
    Geometric,
    Every(usize),
    Steps(Vec<usize>),
    All,
    EndpointsOnly,
}

impl SnapshotSchedule {
    pub fn includes(&self, k: usize, n: usize) -> bool {
        if k == 0 || k == n {
            return true;
        }
        match self {
            SnapshotSchedule::Geometric => {
                let mut s = n >> 1;
                while s >= 1 {
                    if s == k {
                        return true;
                    }
                    s >>= 1;
                }
                false
            }
            SnapshotSchedule::Every(stride) => *stride > 0 && k % stride == 0,
            SnapshotSchedule::Steps(list) => list.contains(&k),
            SnapshotSchedule::All => true,
            SnapshotSchedule::EndpointsOnly => false,
        }
    }
}

impl fmt::Display for SnapshotSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotSchedule::Geometric => f.write_str("geometric"),
            SnapshotSchedule::Every(s) => write!(f, "every:{s}"),
            SnapshotSchedule::Steps(list) => {
                let parts: Vec<String> = list.iter().map(|k| k.to_string()).collect();
                write!(f, "steps:{}", parts.join(","))
            }
            SnapshotSchedule::All => f.write_str("all"),
            SnapshotSchedule::EndpointsOnly => f.write_str("endpoints"),
        }
    }
}

impl FromStr for SnapshotSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad snapshot schedule {s:?}"));
        match s {
            "geometric" => Ok(SnapshotSchedule::Geometric),
            "all" => Ok(SnapshotSchedule::All),
            "endpoints" => Ok(SnapshotSchedule::EndpointsOnly),
            _ => {
                if let Some(rest) = s.strip_prefix("every:") {
                    let stride: usize = rest.parse().map_err(|_| bad())?;
                    if stride == 0 {
                        return Err(bad());
                    }
                    Ok(SnapshotSchedule::Every(stride))
                } else if let Some(rest) = s.strip_prefix("steps:") {
                    let mut list = rest
                        .split(',')
                        .filter(|t| !t.is_empty())
                        .map(|t| t.parse::<usize>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>>>()?;
                    list.sort_unstable();
                    list.dedup();
                    Ok(SnapshotSchedule::Steps(list))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// Per-step record written to `trace.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub k: usize,
    pub t: f64,
    pub u_center: f64,
    pub max_u: f64,
    pub min_u: f64,
    pub sym_defect: f64,
    pub mono_defect: f64,
    /// `dx sum_i w_i (u_t)_i^2` with `u_t` the forward-Euler rate at this step.
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub time: TimeSpec,
    pub half_length: f64,
    pub center: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Largest value seen over the outer 5% of nodes at any step.
    pub boundary_max: f64,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.time.dt()
    }

    pub fn steps(&self) -> usize {
        self.time.steps
    }

    pub fn final_snapshot(&self) -> Option<&Field> {
        self.snapshots.last().filter(|f| (f.time() - self.time.horizon).abs() <= 1e-9 * self.time.horizon.max(1.0))
    }

    pub fn snapshot_near(&self, t: f64) -> Option<&Field> {
        self.snapshots.iter().find(|f| (f.time() - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// Boundary contamination above [`BOUNDARY_LIMIT`]: the domain is too small for this run.
    pub fn domain_too_small(&self) -> bool {
        self.boundary_max > BOUNDARY_LIMIT
    }

    /// Largest `|u|` excursion outside `[0, 1]` over the run.
    pub fn range_violation(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| (d.max_u - 1.0).max(-d.min_u).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// A grid, kernel and nonlinearity, validated once and shared by many runs.
#[derive(Debug, Clone)]
pub struct Simulation {
    grid: Grid,
    kernel: Arc<DiscreteKernel>,
    nl: Arc<Nonlinearity>,
    path: ConvolutionPath,
}

impl Simulation {
    pub fn new(grid: Grid, kernel: &KernelSpec, nl: Nonlinearity) -> Result<Self> {
        let k = build_kernel(kernel, &grid)?;
        Simulation::from_parts(grid, Arc::new(k), Arc::new(nl))
    }

    /// Fails if the kernel or the bistability/monotonicity checks on `f` fail. The threshold
    /// level check is left to consumers that need `beta`.
    pub fn from_parts(grid: Grid, kernel: Arc<DiscreteKernel>, nl: Arc<Nonlinearity>) -> Result<Self> {
        let report = validate_kernel(&kernel);
        if !report.passed() {
            let names: Vec<&str> = report.failures().map(|c| c.name).collect();
            return Err(Error::Hypothesis(format!("kernel checks failed: {}", names.join(", "))));
        }
        let report = validate_hypotheses(&nl);
        let failed: Vec<&str> = report.failures().map(|c| c.name).filter(|n| *n != "threshold_level").collect();
        if !failed.is_empty() {
            return Err(Error::Hypothesis(format!("reaction checks failed: {}", failed.join(", "))));
        }
        Ok(Simulation { grid, kernel, nl, path: ConvolutionPath::Fast })
    }

    pub fn with_path(mut self, path: ConvolutionPath) -> Self {
        self.path = path;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &Arc<DiscreteKernel> {
        &self.kernel
    }

    pub fn nonlinearity(&self) -> &Arc<Nonlinearity> {
        &self.nl
    }

    pub fn path(&self) -> ConvolutionPath {
        self.path
    }

    pub fn indicator(&self, half_length: f64, profile: InitProfile) -> Result<Field> {
        initial_profile(&self.grid, half_length, profile)
    }

    pub fn run(&self, init: Field, time: TimeSpec, schedule: &SnapshotSchedule) -> Result<Trajectory> {
        self.run_observed(init, time, schedule, |_| {})
    }

    /// As [`Simulation::run`], calling `observe` on the state at every step `k = 0..=N`.
    pub fn run_observed(
        &self,
        init: Field,
        time: TimeSpec,
        schedule: &SnapshotSchedule,
        mut observe: impl FnMut(&Field),
    ) -> Result<Trajectory> {
        if !init.grid().same_as(&self.grid) {
            return Err(Error::Dimension("initial field is not on the simulation grid".into()));
        }
        let n = time.steps;
        let dt = time.dt();
        if n > 0 {
            check_step(&self.nl, dt)?;
        }
        let half_length = estimate_half_length(&init);
        let len = self.grid.len();
        let band = ((len as f64 * BOUNDARY_FRACTION).ceil() as usize).max(1);

        let mut u = init.with_time(0.0);
        let mut traj = Trajectory {
            grid: self.grid,
            time,
            half_length,
            center: Vec::with_capacity(n + 1),
            snapshots: Vec::new(),
            diagnostics: Vec::with_capacity(n + 1),
            boundary_max: 0.0,
        };
        for k in 0..=n {
            let r = rhs(&u, &self.kernel, &self.nl, self.path)?;
            let values = u.values();
            let boundary = values[..band]
                .iter()
                .chain(&values[len - band..])
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            traj.boundary_max = traj.boundary_max.max(boundary);
            let rates: Vec<f64> = r.values().iter().map(|v| v * v).collect();
            traj.diagnostics.push(StepDiagnostics {
                k,
                t: time.time(k),
                u_center: u.center_value(),
                max_u: u.max(),
                min_u: u.min(),
                sym_defect: check_symmetry(&u),
                mono_defect: check_radial_monotonicity(&u),
                dissipation: self.grid.integrate(&rates),
            });
            traj.center.push(u.center_value());
            observe(&u);
            if schedule.includes(k, n) {
                traj.snapshots.push(u.clone());
            }
            if k == n {
                break;
            }
            let next = advance(&u, &r, dt).with_time(time.time(k + 1));
            if !next.is_finite() {
                return Err(Error::NonFinite { step: k + 1, last_valid: Box::new(u) });
            }
            u = next;
        }
        Ok(traj)
    }
}

fn estimate_half_length(init: &Field) -> f64 {
    let g = init.grid();
    let c = g.center();
    let v = init.values();
    let mut i = c;
    while i < g.intervals() && v[i + 1] > 0.0 {
        i += 1;
    }
    g.x(i)
}

/// Build everything from a resolved config and run it.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    let sim = config.simulation()?;
    let init = sim.indicator(config.init.half_length, config.init.profile)?;
    let mut traj = sim.run(init, config.time, &config.output.snapshots)?;
    traj.half_length = config.init.half_length;
    Ok(traj)
}

/// `max_i |u_i - u_{M-i}|`.
pub fn check_symmetry(u: &Field) -> f64 {
    let v = u.values();
    let m = v.len() - 1;
    (0..=m / 2).map(|i| (v[i] - v[m - i]).abs()).fold(0.0, f64::max)
}

/// Largest increase of `u` when moving away from the origin on either side; 0 means the profile
/// is nonincreasing in `|x|`.
pub fn check_radial_monotonicity(u: &Field) -> f64 {
    let v = u.values();
    let c = u.grid().center();
    let right = v[c..].windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let left = v[..=c].windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    right.max(left)
}

/// Dip-then-rise pattern of the center trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceShape {
    /// Time at which the trace starts rising; `None` if it never does.
    pub switch_time: Option<f64>,
    /// Decreases beyond the tolerance after the switch.
    pub violations: usize,
}

pub fn center_trace_shape(traj: &Trajectory) -> TraceShape {
    trace_shape(&traj.center, traj.dt(), TRACE_TOLERANCE)
}

pub fn trace_shape(trace: &[f64], dt: f64, tol: f64) -> TraceShape {
    let diffs: Vec<f64> = trace.windows(2).map(|w| w[1] - w[0]).collect();
    match diffs.iter().position(|&d| d > tol) {
        None => TraceShape { switch_time: None, violations: 0 },
        Some(p) => TraceShape {
            switch_time: Some(p as f64 * dt),
            violations: diffs[p + 1..].iter().filter(|&&d| d < -tol).count(),
        },
    }
}

/// Uniform Lipschitz-in-x constant `2 + L_1 / L_0`, with `L_1` the total variation of the
/// kernel samples.
pub fn modulus_bound(nl: &Nonlinearity, k: &DiscreteKernel) -> Result<f64> {
    let l0 = nl.monotonicity_floor();
    if !(l0 > 0.0) {
        return Err(Error::Hypothesis(format!("inf (1 + f') = {l0} is not positive")));
    }
    Ok(2.0 + k.total_variation() / l0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sim(x: f64, m: usize) -> Simulation {
        let grid = Grid::new(x, m).unwrap();
        Simulation::new(grid, &KernelSpec::gaussian(1.0), Nonlinearity::cubic(0.4).unwrap()).unwrap()
    }

    #[test]
    fn indicator_node_count_reference_grid() {
        let g = Grid::new(120.0, 48000).unwrap();
        let u = initial_indicator(&g, 1.605).unwrap();
        assert_eq!(u.values().iter().filter(|&&v| v == 1.0).count(), 643);
        assert_eq!(u.values().iter().filter(|&&v| v == 0.0).count(), g.len() - 643);
        assert_eq!(check_symmetry(&u), 0.0);
        assert_eq!(check_radial_monotonicity(&u), 0.0);
    }

    #[test]
    fn indicator_below_half_spacing_is_single_node() {
        let g = Grid::new(1.0, 100).unwrap();
        let u = initial_indicator(&g, 0.5 * g.dx()).unwrap();
        assert_eq!(u.values().iter().sum::<f64>(), 1.0);
        assert_eq!(u.center_value(), 1.0);
        assert!(matches!(initial_indicator(&g, 1.0), Err(Error::DomainTooSmall(_))));
    }

    #[test]
    fn cell_average_is_continuous_in_length() {
        let g = Grid::new(4.0, 80).unwrap();
        let a = initial_profile(&g, 1.02, InitProfile::CellAverage).unwrap();
        let b = initial_profile(&g, 1.0200001, InitProfile::CellAverage).unwrap();
        let mass_a = g.integrate(a.values());
        assert!((mass_a - 2.04).abs() < 1e-12);
        let diff: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff < 1e-5);
        assert_eq!(check_symmetry(&a), 0.0);
    }

    #[test]
    fn zero_stays_zero() {
        let sim = small_sim(8.0, 256);
        let u = Field::zeros(*sim.grid());
        let next = step(&u, sim.kernel(), sim.nonlinearity(), 0.5).unwrap();
        assert!(next.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn three_node_hand_step() {
        // dx = 1, samples {0.25, 0.5, 0.25}: (J*u)_center = 0.5 for a unit spike
        let g = Grid::new(1.0, 2).unwrap();
        let k = DiscreteKernel::from_samples(1.0, vec![0.0, 0.25, 0.5, 0.25, 0.0], 1e-6).unwrap();
        let nl = Nonlinearity::cubic(0.4).unwrap();
        let u = Field::new(g, vec![0.0, 1.0, 0.0], 0.0).unwrap();
        for path in [ConvolutionPath::Direct, ConvolutionPath::Fast] {
            let next = step_with(&u, &k, &nl, 0.5, path).unwrap();
            assert!((next.values()[1] - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn oversized_step_refused() {
        let sim = small_sim(8.0, 256);
        let u = Field::zeros(*sim.grid());
        let err = step(&u, sim.kernel(), sim.nonlinearity(), 0.7).unwrap_err();
        assert!(matches!(err, Error::StepSize { bound, .. } if (bound - 0.625).abs() < 1e-15));
    }

    #[test]
    fn constant_one_center_stays_near_one() {
        let sim = small_sim(120.0, 48000);
        let u = Field::constant(*sim.grid(), 1.0);
        let next = step(&u, sim.kernel(), sim.nonlinearity(), 0.5).unwrap();
        let tau = sim.kernel().tau_mass();
        assert!(next.center_value() >= 1.0 - 0.5 * tau);
    }

    #[test]
    fn zero_steps_keeps_initial_field() {
        let sim = small_sim(8.0, 256);
        let init = sim.indicator(1.0, InitProfile::Nodal).unwrap();
        let traj = sim.run(init.clone(), TimeSpec::new(0.0, 0).unwrap(), &SnapshotSchedule::Geometric).unwrap();
        assert_eq!(traj.center.len(), 1);
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0], init);
    }

    #[test]
    fn inconsistent_time_spec() {
        assert!(TimeSpec::new(200.0, 0).is_err());
        assert_eq!(TimeSpec::new(200.0, 400).unwrap().dt(), 0.5);
    }

    #[test]
    fn geometric_schedule() {
        let s = SnapshotSchedule::Geometric;
        let picked: Vec<usize> = (0..=400).filter(|&k| s.includes(k, 400)).collect();
        assert_eq!(picked, vec![0, 1, 3, 6, 12, 25, 50, 100, 200, 400]);
        for text in ["geometric", "all", "endpoints", "every:7", "steps:1,5,9"] {
            let parsed: SnapshotSchedule = text.parse().unwrap();
            assert_eq!(parsed.to_string(), text);
        }
        assert!("every:0".parse::<SnapshotSchedule>().is_err());
    }

    #[test]
    fn perturbed_field_defects() {
        let g = Grid::new(10.0, 400).unwrap();
        let mut u = initial_indicator(&g, 2.0).unwrap();
        u.values_mut()[10] += 1e-3;
        assert!(check_symmetry(&u) >= 1e-3);

        let mut bump = Field::from_fn(g, |x| (-x * x).exp());
        let i5 = g.center() + (5.0 / g.dx()) as usize;
        bump.values_mut()[i5] = 1.5;
        assert!(check_radial_monotonicity(&bump) > 0.0);
    }

    #[test]
    fn trace_shapes() {
        let flat = vec![0.3; 10];
        assert_eq!(trace_shape(&flat, 0.5, 1e-9), TraceShape { switch_time: None, violations: 0 });
        let dip = [1.0, 0.8, 0.7, 0.75, 0.9, 0.95];
        assert_eq!(trace_shape(&dip, 0.5, 1e-9), TraceShape { switch_time: Some(1.0), violations: 0 });
        let wobble = [1.0, 0.8, 0.9, 0.85, 0.95];
        assert_eq!(trace_shape(&wobble, 1.0, 1e-9).violations, 1);
    }

    #[test]
    fn modulus_bound_gaussian() {
        let g = Grid::new(20.0, 4000).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0), &g).unwrap();
        let nl = Nonlinearity::cubic(0.4).unwrap();
        let l1 = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((k.total_variation() - 0.797_884_56).abs() < 1e-8);
        let bound = modulus_bound(&nl, &k).unwrap();
        assert!((bound - (2.0 + l1 / (1.0 + 0.4 - 1.96 / 3.0))).abs() < 1e-10);
        assert!((bound - 3.0686).abs() < 1e-4);
    }

    #[test]
    fn nan_aborts_with_last_valid_state() {
        // a kernel with an infinite sample poisons the first step
        let g = Grid::new(1.0, 2).unwrap();
        let k = Arc::new(DiscreteKernel::from_samples(1.0, vec![0.0, 0.25, 0.5, 0.25, 0.0], 1e-6).unwrap());
        let nl = Nonlinearity::cubic(0.4).unwrap();
        let sim = Simulation { grid: g, kernel: k, nl: Arc::new(nl), path: ConvolutionPath::Direct };
        let init = Field::new(g, vec![0.0, f64::MAX, 0.0], 0.0).unwrap();
        let err = sim.run(init, TimeSpec::new(1.0, 2).unwrap(), &SnapshotSchedule::All).unwrap_err();
        match err {
            Error::NonFinite { step, last_valid } => {
                assert_eq!(step, 1);
                assert_eq!(last_valid.values()[1], f64::MAX);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
