//! Energy and Lyapunov functionals evaluated on grid fields.
//!
//! ```text
//! E[u]  = 1/4 iint J(x-y) (u(x)-u(y))^2 dx dy + int F(u) dx
//! V(t)  = int [ 1/2 (J*w - w) w - F(w) + H(x) F(1) ] dx
//! Q(t)  = int (J*w - w - f(w))^2 dx
//! ```
//!
//! where `w` is the left truncation of `u` built from a cutoff `eta`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{rhs, Simulation, SnapshotSchedule, TimeSpec, Trajectory};
use crate::grid::Field;
use crate::kernels::{convolve, convolve_extended, ConvolutionPath, DiscreteKernel};
use crate::reaction::Nonlinearity;

/// Smooth step from 1 (for `x <= 0`) to 0 (for `x >= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffProfile {
    /// `1 - (10 s^3 - 15 s^4 + 6 s^5)`, twice continuously differentiable.
    #[default]
    Quintic,
}

impl CutoffProfile {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if x >= 1.0 {
            return 0.0;
        }
        match self {
            CutoffProfile::Quintic => 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x)),
        }
    }

    /// Samples at the nodes of `grid`.
    pub fn sample(&self, field: &Field) -> Vec<f64> {
        field.grid().nodes().map(|x| self.eval(x)).collect()
    }
}

/// `(E, E_1)` for one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyValue {
    pub total: f64,
    pub dirichlet: f64,
}

/// `E_1` values this far below zero are rounding and are clamped; anything lower is kept so the
/// violation shows.
fn roundoff_floor(scale: f64, len: usize) -> f64 {
    -(len as f64) * f64::EPSILON * scale
}

pub fn energy(u: &Field, k: &DiscreteKernel, nl: &Nonlinearity) -> Result<EnergyValue> {
    energy_with(u, k, nl, ConvolutionPath::Fast)
}

/// `E_1 = 1/2 dx sum_i w_i u_i [m_i u_i - (J*u)_i]` with `m_i = (J*1)_i`, which equals the
/// double sum over grid pairs; `E = E_1 + dx sum_i w_i F(u_i)`.
pub fn energy_with(u: &Field, k: &DiscreteKernel, nl: &Nonlinearity, path: ConvolutionPath) -> Result<EnergyValue> {
    let grid = u.grid();
    let ju = convolve(k, u, path)?;
    let mass = k.row_mass(grid)?;
    let v = u.values();
    let pair: Vec<f64> = (0..v.len()).map(|i| v[i] * (mass[i] * v[i] - ju.values()[i])).collect();
    let mut dirichlet = 0.5 * grid.integrate(&pair);
    if dirichlet < 0.0 {
        let scale = 0.5 * grid.integrate(&v.iter().zip(&mass).map(|(a, m)| a * a * m).collect::<Vec<_>>());
        if dirichlet >= roundoff_floor(scale, v.len()) {
            dirichlet = 0.0;
        }
    }
    let potential: Vec<f64> = v.iter().map(|&s| nl.antiderivative(s)).collect();
    Ok(EnergyValue { total: dirichlet + grid.integrate(&potential), dirichlet })
}

fn check_truncation(u: &Field, t: f64) -> Result<()> {
    let x = u.grid().half_width();
    if !(t >= 0.0) {
        return Err(Error::InvalidSpec(format!("truncation time must be nonnegative, got {t}")));
    }
    if t + 1.0 >= x {
        return Err(Error::DomainTooSmall(format!("truncation needs t + 1 < X, got t = {t}, X = {x}")));
    }
    Ok(())
}

/// `w = eta(-x-t) u` for `x < 0` and `w = 1 - eta(x)(1 - u)` for `x >= 0`.
pub fn truncate_left(u: &Field, t: f64, eta: &CutoffProfile) -> Result<Field> {
    check_truncation(u, t)?;
    let grid = *u.grid();
    let values = grid
        .nodes()
        .zip(u.values())
        .map(|(x, &ui)| {
            if x < 0.0 {
                eta.eval(-x - t) * ui
            } else {
                // written as u + (1 - eta)(1 - u) so that w >= u survives rounding
                let e = eta.eval(x);
                if e == 0.0 {
                    1.0
                } else {
                    ui + (1.0 - e) * (1.0 - ui)
                }
            }
        })
        .collect();
    Field::new(grid, values, u.time())
}

/// `V` and `Q` at one time, plus the part of `V` that comes from continuing `w` by 1 past the
/// right edge of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    pub v: f64,
    pub q: f64,
    /// `1/2 dx sum_i w_i tail_i`, with `tail_i` the kernel mass beyond the right edge seen from
    /// node `i`. It would be lost on a zero-extended grid and shrinks as the domain grows.
    pub right_collar: f64,
}

pub fn lyapunov(u: &Field, t: f64, k: &DiscreteKernel, nl: &Nonlinearity, eta: &CutoffProfile) -> Result<LyapunovValue> {
    lyapunov_with(u, t, k, nl, eta, ConvolutionPath::Fast)
}

/// `J*w` is taken with `w` continued by 0 on the left and by 1 on the right, as on the line.
pub fn lyapunov_with(
    u: &Field,
    t: f64,
    k: &DiscreteKernel,
    nl: &Nonlinearity,
    eta: &CutoffProfile,
    path: ConvolutionPath,
) -> Result<LyapunovValue> {
    let w = truncate_left(u, t, eta)?;
    let grid = *w.grid();
    let jw = convolve_extended(k, &w, 0.0, 1.0, path)?;
    let f1 = nl.antiderivative(1.0);
    let m = grid.intervals();
    let wv = w.values();
    let mut vdens = Vec::with_capacity(wv.len());
    let mut qdens = Vec::with_capacity(wv.len());
    let mut collar = Vec::with_capacity(wv.len());
    for (i, (&wi, &ji)) in wv.iter().zip(jw.values()).enumerate() {
        let heaviside = if grid.x(i) >= 0.0 { f1 } else { 0.0 };
        vdens.push(0.5 * (ji - wi) * wi - nl.antiderivative(wi) + heaviside);
        let r = ji - wi - nl.f(wi);
        qdens.push(r * r);
        collar.push(0.5 * wi * k.tail_mass(m - i));
    }
    Ok(LyapunovValue {
        v: grid.integrate(&vdens),
        q: grid.integrate(&qdens),
        right_collar: grid.integrate(&collar),
    })
}

/// One evaluation time in an [`EnergyReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub energy: f64,
    pub dirichlet: f64,
    /// `None` when `t + 1 >= X`.
    pub lyapunov: Option<LyapunovValue>,
    /// `dx sum_i w_i (u_t)_i^2` at this time.
    pub dissipation: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    /// Per-step `dx sum_i w_i (u_t)_i^2`, when the trajectory recorded it.
    pub step_dissipation: Vec<f64>,
}

impl EnergyReport {
    /// `V'(t)` by centered (three-point, nonuniform) differences of consecutive rows; one-sided
    /// at the ends. `None` where a neighbor lacks `V`.
    pub fn v_prime(&self) -> Vec<Option<f64>> {
        let n = self.rows.len();
        let v = |j: usize| self.rows[j].lyapunov.map(|l| l.v);
        (0..n)
            .map(|j| {
                if n < 2 {
                    return None;
                }
                let t = |j: usize| self.rows[j].t;
                if j == 0 {
                    Some((v(1)? - v(0)?) / (t(1) - t(0)))
                } else if j == n - 1 {
                    Some((v(j)? - v(j - 1)?) / (t(j) - t(j - 1)))
                } else {
                    let (h0, h1) = (t(j) - t(j - 1), t(j + 1) - t(j));
                    let (a, b, c) = (v(j - 1)?, v(j)?, v(j + 1)?);
                    Some((-h1 / (h0 * (h0 + h1))) * a + ((h1 - h0) / (h0 * h1)) * b + (h0 / (h1 * (h0 + h1))) * c)
                }
            })
            .collect()
    }

    /// `V'(t) - Q(t)` per row.
    pub fn lyapunov_defect(&self) -> Vec<Option<f64>> {
        self.v_prime()
            .into_iter()
            .zip(&self.rows)
            .map(|(vp, row)| Some(vp? - row.lyapunov?.q))
            .collect()
    }
}

/// All functionals at one field.
pub fn evaluate(u: &Field, k: &DiscreteKernel, nl: &Nonlinearity, eta: &CutoffProfile) -> Result<EnergyRow> {
    let e = energy(u, k, nl)?;
    let t = u.time();
    let lyapunov = match lyapunov(u, t, k, nl, eta) {
        Ok(l) => Some(l),
        Err(Error::DomainTooSmall(_)) => None,
        Err(e) => return Err(e),
    };
    let r = rhs(u, k, nl, ConvolutionPath::Fast)?;
    let sq: Vec<f64> = r.values().iter().map(|v| v * v).collect();
    Ok(EnergyRow { t, energy: e.total, dirichlet: e.dirichlet, lyapunov, dissipation: u.grid().integrate(&sq) })
}

/// Functionals at a set of fields, in parallel, sorted by time.
pub fn monitor_fields(fields: &[Field], k: &DiscreteKernel, nl: &Nonlinearity, eta: &CutoffProfile) -> Result<EnergyReport> {
    let mut rows = fields.par_iter().map(|u| evaluate(u, k, nl, eta)).collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(EnergyReport { rows, step_dissipation: Vec::new() })
}

/// Functionals at the trajectory's snapshots whose step index is in `schedule`.
pub fn monitor(
    traj: &Trajectory,
    k: &DiscreteKernel,
    nl: &Nonlinearity,
    eta: &CutoffProfile,
    schedule: &SnapshotSchedule,
) -> Result<EnergyReport> {
    let dt = traj.dt();
    let n = traj.steps();
    let picked: Vec<Field> = traj
        .snapshots
        .iter()
        .filter(|f| {
            let step = if dt > 0.0 { (f.time() / dt).round() as usize } else { 0 };
            schedule.includes(step, n)
        })
        .cloned()
        .collect();
    let mut report = monitor_fields(&picked, k, nl, eta)?;
    report.step_dissipation = traj.diagnostics.iter().map(|d| d.dissipation).collect();
    Ok(report)
}

/// Step-by-step energy record of a run, for the descent check.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentRecord {
    pub energy: Vec<f64>,
    pub dirichlet: Vec<f64>,
    /// `dx sum_i w_i (u^{k+1}_i - u^k_i)^2` for each step.
    pub update_sq: Vec<f64>,
    pub dt: f64,
}

impl DescentRecord {
    /// Allowed rise `10 dt^2 dx sum_i w_i (du_i)^2` for step `k -> k+1`.
    pub fn budget(&self, k: usize) -> f64 {
        10.0 * self.dt * self.dt * self.update_sq[k]
    }

    /// Steps where `E(t_{k+1}) > E(t_k) + budget`.
    pub fn violations(&self) -> Vec<usize> {
        (0..self.update_sq.len())
            .filter(|&k| self.energy[k + 1] > self.energy[k] + self.budget(k))
            .collect()
    }

    /// Largest `E(t_{k+1}) - E(t_k) - budget` over the run; nonpositive means descent held.
    pub fn worst_excess(&self) -> f64 {
        (0..self.update_sq.len())
            .map(|k| self.energy[k + 1] - self.energy[k] - self.budget(k))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Run `init` and evaluate `E` at every step without storing the states.
pub fn track_descent(sim: &Simulation, init: Field, time: TimeSpec) -> Result<(Trajectory, DescentRecord)> {
    let k = sim.kernel().clone();
    let nl = sim.nonlinearity().clone();
    let grid = *sim.grid();
    let mut energies = Vec::with_capacity(time.steps + 1);
    let mut dirichlet = Vec::with_capacity(time.steps + 1);
    let mut update_sq = Vec::with_capacity(time.steps);
    let mut prev: Option<Vec<f64>> = None;
    let mut failure = None;
    let traj = sim.run_observed(init, time, &SnapshotSchedule::EndpointsOnly, |u| {
        if failure.is_some() {
            return;
        }
        match energy_with(u, &k, &nl, sim.path()) {
            Ok(e) => {
                energies.push(e.total);
                dirichlet.push(e.dirichlet);
            }
            Err(e) => failure = Some(e),
        }
        if let Some(p) = &prev {
            let sq: Vec<f64> = p.iter().zip(u.values()).map(|(a, b)| (b - a) * (b - a)).collect();
            update_sq.push(grid.integrate(&sq));
        }
        prev = Some(u.values().to_vec());
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((traj, DescentRecord { energy: energies, dirichlet, update_sq, dt: time.dt() }))
}
