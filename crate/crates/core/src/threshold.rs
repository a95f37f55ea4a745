//! Finite-horizon classification of runs and bisection on the indicator half-length `L`.
//!
//! A run is judged by the center trace `u(t, 0)` over a late window: its mean against the
//! level `beta` (with a dead zone of half-width `delta_cls`) and the sign of its least-squares
//! slope. This stands in for the `t -> infinity` limit, which no finite run can observe.

use std::fmt;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolve::{InitProfile, Simulation, SnapshotSchedule, TimeSpec, Trajectory};
use crate::grid::Field;
use crate::kernels::DiscreteKernel;
use crate::numerics::linear_fit;
use crate::reaction::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Dead zone half-width around `beta`.
    pub delta_cls: f64,
    /// Slope tolerance, per unit time.
    pub delta_slope: f64,
    /// Number of final steps in the window.
    pub window: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { delta_cls: 0.02, delta_slope: 1e-6, window: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Extinction,
    Propagation,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Extinction => "extinction",
            Verdict::Propagation => "propagation",
            Verdict::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    /// `u(T, 0)`.
    pub terminal_center: f64,
    /// Mean of the center trace over the window.
    pub window_mean: f64,
    /// Least-squares slope over the window, per unit time.
    pub slope: f64,
    /// `window_mean - beta`.
    pub distance_to_beta: f64,
}

pub fn classify(traj: &Trajectory, beta: f64, opts: &ClassifyOptions) -> Classification {
    classify_trace(&traj.center, traj.dt(), beta, opts)
}

pub fn classify_trace(center: &[f64], dt: f64, beta: f64, opts: &ClassifyOptions) -> Classification {
    let n = center.len();
    let w = opts.window.clamp(1, n);
    let tail = &center[n - w..];
    let mean = tail.iter().sum::<f64>() / w as f64;
    let slope = if w >= 2 && dt > 0.0 {
        let ts: Vec<f64> = (0..w).map(|j| j as f64 * dt).collect();
        linear_fit(&ts, tail).0
    } else {
        0.0
    };
    let verdict = if mean < beta - opts.delta_cls && slope <= opts.delta_slope {
        Verdict::Extinction
    } else if mean > beta + opts.delta_cls && slope >= -opts.delta_slope {
        Verdict::Propagation
    } else {
        Verdict::Undecided
    };
    Classification {
        verdict,
        terminal_center: center[n - 1],
        window_mean: mean,
        slope,
        distance_to_beta: mean - beta,
    }
}

/// Shared inputs for a family of probes that differ only in `L`.
#[derive(Debug, Clone)]
pub struct ProbeSetup {
    pub simulation: Simulation,
    pub time: TimeSpec,
    pub profile: InitProfile,
    pub beta: f64,
    pub classify: ClassifyOptions,
}

impl ProbeSetup {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let simulation = config.simulation()?;
        let beta = simulation.nonlinearity().compute_beta()?;
        Ok(ProbeSetup {
            simulation,
            time: config.time,
            profile: config.init.profile,
            beta,
            classify: config.classify,
        })
    }

    /// Run and classify one `L`. If the window slope exceeds `10 delta_slope` in magnitude the
    /// run is repeated once with the horizon (and step count) doubled.
    pub fn probe(&self, half_length: f64) -> Result<Probe> {
        let mut time = self.time;
        let mut rerun = false;
        loop {
            let init = self.simulation.indicator(half_length, self.profile)?;
            let traj = self.simulation.run(init, time, &SnapshotSchedule::EndpointsOnly)?;
            let classification = classify(&traj, self.beta, &self.classify);
            if !rerun && classification.slope.abs() > 10.0 * self.classify.delta_slope {
                time = TimeSpec::new(2.0 * time.horizon, 2 * time.steps)?;
                rerun = true;
                continue;
            }
            return Ok(Probe { half_length, classification, horizon: time.horizon, trajectory: traj });
        }
    }
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub half_length: f64,
    pub classification: Classification,
    /// Horizon actually used (doubled if the first window was still moving).
    pub horizon: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRecord {
    pub iteration: usize,
    pub half_length: f64,
    pub classification: Classification,
    /// Side the probe was assigned to; differs from the verdict only for undecided probes.
    pub assigned: Verdict,
    pub provisional: bool,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BisectionOutcome {
    /// Bracket width reached the tolerance.
    Converged,
    /// Iteration budget used up.
    MaxIterations,
    /// Budget used up while the latest probes were undecided.
    Inconclusive,
}

impl fmt::Display for BisectionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BisectionOutcome::Converged => "converged",
            BisectionOutcome::MaxIterations => "max_iterations",
            BisectionOutcome::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub lo: f64,
    pub hi: f64,
    pub log: Vec<ProbeRecord>,
    pub outcome: BisectionOutcome,
    pub beta: f64,
    pub provenance: String,
}

impl ThresholdResult {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bisection from a resolved config.
pub fn bisect(template: &RunConfig, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<ThresholdResult> {
    let setup = ProbeSetup::from_config(template)?;
    let mut result = bisect_with(&setup, lo, hi, tol, max_iter)?;
    result.provenance = format!(
        "grid.X={} grid.M={} time.T={} time.N={} alpha={} init.profile={}",
        template.grid.half_width,
        template.grid.intervals,
        template.time.horizon,
        template.time.steps,
        template.reaction.alpha,
        template.init.profile
    );
    Ok(result)
}

pub fn bisect_with(setup: &ProbeSetup, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<ThresholdResult> {
    if !(lo < hi) {
        return Err(Error::Bracket(format!("need L_lo < L_hi, got [{lo}, {hi}]")));
    }
    let (p_lo, p_hi) = rayon::join(|| setup.probe(lo), || setup.probe(hi));
    let (p_lo, p_hi) = (p_lo?, p_hi?);
    let mut log = vec![
        record(0, &p_lo, p_lo.classification.verdict, false),
        record(0, &p_hi, p_hi.classification.verdict, false),
    ];
    let v_lo = p_lo.classification.verdict;
    let v_hi = p_hi.classification.verdict;
    if v_lo != Verdict::Extinction || v_hi != Verdict::Propagation {
        return Err(Error::Bracket(format!("L_lo = {lo} classified {v_lo}, L_hi = {hi} classified {v_hi}")));
    }

    let mut iteration = 0;
    let mut last_undecided = false;
    while hi - lo > tol && iteration < max_iter {
        iteration += 1;
        let mid = 0.5 * (lo + hi);
        let p = setup.probe(mid)?;
        let verdict = p.classification.verdict;
        let (assigned, provisional) = match verdict {
            Verdict::Undecided if p.classification.terminal_center < setup.beta => (Verdict::Extinction, true),
            Verdict::Undecided => (Verdict::Propagation, true),
            v => (v, false),
        };
        last_undecided = provisional;
        log.push(record(iteration, &p, assigned, provisional));
        if assigned == Verdict::Extinction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let outcome = if hi - lo <= tol {
        BisectionOutcome::Converged
    } else if last_undecided {
        BisectionOutcome::Inconclusive
    } else {
        BisectionOutcome::MaxIterations
    };
    Ok(ThresholdResult { lo, hi, log, outcome, beta: setup.beta, provenance: String::new() })
}

fn record(iteration: usize, p: &Probe, assigned: Verdict, provisional: bool) -> ProbeRecord {
    ProbeRecord {
        iteration,
        half_length: p.half_length,
        classification: p.classification,
        assigned,
        provisional,
        horizon: p.horizon,
    }
}

/// Final snapshot and its stationary residual `max |J*u - u - f(u)|` over the interior 90% of
/// nodes: a candidate for the limit profile when the run sits near the threshold.
pub fn extract_limit_profile(traj: &Trajectory, k: &DiscreteKernel, nl: &Nonlinearity) -> Result<(Field, f64)> {
    let last = traj
        .final_snapshot()
        .ok_or_else(|| Error::InvalidSpec("trajectory did not store its final snapshot".into()))?;
    let r = crate::evolve::rhs(last, k, nl, crate::kernels::ConvolutionPath::Fast)?;
    Ok((last.clone(), interior_sup(r.values())))
}

pub(crate) fn interior_sup(values: &[f64]) -> f64 {
    let n = values.len();
    let skip = (n as f64 * 0.05).floor() as usize;
    values[skip..n - skip].iter().map(|v| v.abs()).fold(0.0, f64::max)
}
