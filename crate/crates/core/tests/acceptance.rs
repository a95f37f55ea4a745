//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero if
//! any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threshlab::config::RunConfig;
use threshlab::energy::{monitor, track_descent, CutoffProfile};
use threshlab::evolve::{center_trace_shape, step, InitProfile, SnapshotSchedule, Trajectory};
use threshlab::fronts::{char_roots, front_solve, measure_tail_rates, speed_identity_residual, FrontOptions};
use threshlab::kernels::{build_kernel, convolve_direct, convolve_fast};
use threshlab::output::trace_csv;
use threshlab::threshold::{bisect, classify, BisectionOutcome, ProbeSetup, Verdict};
use threshlab::{Field, Grid, KernelSpec, Nonlinearity};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference_config() -> RunConfig {
    RunConfig::default()
}

fn reference_run(l: f64, schedule: SnapshotSchedule) -> Trajectory {
    let mut cfg = reference_config();
    cfg.init.half_length = l;
    cfg.output.snapshots = schedule;
    threshlab::evolve::run(&cfg).expect("reference run")
}

fn beta() -> Outcome {
    let b = Nonlinearity::cubic(0.4).map_err(|e| e.to_string())?.compute_beta().map_err(|e| e.to_string())?;
    check((b - 2.0 / 3.0).abs() <= 1e-12, format!("beta = {b:.17}"))
}

fn regime(sub: &Trajectory, super_: &Trajectory) -> Outcome {
    let beta = 2.0 / 3.0;
    let opts = reference_config().classify;
    let c_lo = classify(sub, beta, &opts);
    let c_hi = classify(super_, beta, &opts);
    let s_lo = center_trace_shape(sub);
    let s_hi = center_trace_shape(super_);
    let ok = c_lo.verdict == Verdict::Extinction
        && s_lo.switch_time.is_none()
        && c_hi.verdict == Verdict::Propagation
        && s_hi.switch_time.is_some()
        && s_hi.violations == 0;
    check(
        ok,
        format!(
            "L=1.605: {} (u(T,0) = {:.3e}, increases > 1e-9: {}); L=1.610: {} (u(T,0) = {:.7}, t* = {:?}, later decreases: {})",
            c_lo.verdict,
            c_lo.terminal_center,
            if s_lo.switch_time.is_none() { 0 } else { 1 },
            c_hi.verdict,
            c_hi.terminal_center,
            s_hi.switch_time,
            s_hi.violations
        ),
    )
}

fn bracket() -> Outcome {
    let full = bisect(&reference_config(), 1.0, 3.0, 0.005, 30).map_err(|e| e.to_string())?;
    let mut quarter_cfg = reference_config();
    quarter_cfg.grid.intervals = 12000;
    let quarter = bisect(&quarter_cfg, 1.0, 3.0, 0.005, 30).map_err(|e| e.to_string())?;
    let intersects = full.lo < 1.610 && full.hi > 1.605;
    let ok = full.outcome == BisectionOutcome::Converged
        && full.width() <= 0.005
        && intersects
        && quarter.lo > 1.55
        && quarter.hi < 1.67;
    check(
        ok,
        format!(
            "M=48000: [{:.6}, {:.6}] width {:.6} after {} probes ({}); M=12000: [{:.6}, {:.6}]",
            full.lo,
            full.hi,
            full.width(),
            full.log.len(),
            full.outcome,
            quarter.lo,
            quarter.hi
        ),
    )
}

fn convolution_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for m in [64usize, 512, 2000] {
        let grid = Grid::new(10.0, m).map_err(|e| e.to_string())?;
        let k = build_kernel(&KernelSpec::gaussian(1.0), &grid).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = Field::new(grid, values, 0.0).map_err(|e| e.to_string())?;
            let a = convolve_fast(&k, &u).map_err(|e| e.to_string())?;
            let b = convolve_direct(&k, &u).map_err(|e| e.to_string())?;
            for (x, y) in a.values().iter().zip(b.values()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    check(worst < 1e-10, format!("max |fast - direct| = {worst:.3e} over 600 fields"))
}

fn comparison() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = Grid::new(16.0, 512).map_err(|e| e.to_string())?;
    let nl = Nonlinearity::cubic(0.4).map_err(|e| e.to_string())?;
    let k = build_kernel(&KernelSpec::gaussian(1.0), &grid).map_err(|e| e.to_string())?;
    let dt = 1.0 / (1.0 + nl.max_abs_slope());
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let lower: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|&a| a + rng.gen_range(0.0..=1.0 - a)).collect();
        let mut u = Field::new(grid, lower, 0.0).map_err(|e| e.to_string())?;
        let mut v = Field::new(grid, upper, 0.0).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            u = step(&u, &k, &nl, dt).map_err(|e| e.to_string())?;
            v = step(&v, &k, &nl, dt).map_err(|e| e.to_string())?;
            let gap = v.values().iter().zip(u.values()).map(|(b, a)| b - a).fold(f64::INFINITY, f64::min);
            worst = worst.min(gap);
        }
    }
    check(worst >= -1e-12, format!("dt = {dt}, min over steps of min_i (v - u) = {worst:.3e}"))
}

fn fronts() -> Result<(String, f64), String> {
    let spec = KernelSpec::gaussian(1.0);
    let opts = FrontOptions::default();
    let solve = |alpha: f64| -> Result<(f64, f64, threshlab::fronts::FrontSolution), String> {
        let nl = Nonlinearity::cubic(alpha).map_err(|e| e.to_string())?;
        let fs = front_solve(&spec, &nl, 40.0, 0.02, &opts).map_err(|e| format!("alpha = {alpha}: {e}"))?;
        Ok((fs.speed, speed_identity_residual(&fs, &nl), fs))
    };
    let (c3, r3, _) = solve(0.3)?;
    let (c4, r4, _) = solve(0.4)?;
    let (c5, r5, fs5) = solve(0.5)?;
    let (c6, r6, _) = solve(0.6)?;
    let ok = r3 < 1e-5 && r4 < 1e-5 && r5 < 1e-5 && c5.abs() <= 1e-8 && (c4 + c6).abs() <= 1e-6;
    let detail = format!(
        "identity residuals {r3:.2e}, {r4:.2e}, {r5:.2e} (alpha 0.3, 0.4, 0.5), {r6:.2e} (0.6); c(0.3) = {c3:.8}, c(0.4) = {c4:.8}, c(0.5) = {c5:.2e}, c(0.4) + c(0.6) = {:.2e}",
        c4 + c6
    );
    let lambda_hat = measure_tail_rates(&fs5).map_err(|e| e.to_string())?.0;
    if ok {
        Ok((detail, lambda_hat))
    } else {
        Err(detail)
    }
}

fn tail_rate(lambda_hat: f64) -> Outcome {
    let nl = Nonlinearity::cubic(0.5).map_err(|e| e.to_string())?;
    let (l1, _) = char_roots(&KernelSpec::gaussian(1.0), &nl, 0.0).map_err(|e| e.to_string())?;
    let closed = -(2.0 * 1.5f64.ln()).sqrt();
    let rel = ((lambda_hat - closed) / closed).abs();
    check(
        rel <= 0.02 && (l1 - closed).abs() < 1e-9,
        format!("fitted {lambda_hat:.6}, root {l1:.6}, closed form {closed:.6}, relative gap {:.3}%", 100.0 * rel),
    )
}

fn energy_descent(sub: &Trajectory) -> Outcome {
    let cfg = {
        let mut c = reference_config();
        c.init.half_length = 1.605;
        c
    };
    let sim = cfg.simulation().map_err(|e| e.to_string())?;
    let init = sim.indicator(1.605, InitProfile::Nodal).map_err(|e| e.to_string())?;
    let (_, rec) = track_descent(&sim, init, cfg.time).map_err(|e| e.to_string())?;
    let report = monitor(sub, sim.kernel(), sim.nonlinearity(), &CutoffProfile::Quintic, &SnapshotSchedule::All)
        .map_err(|e| e.to_string())?;
    let violations = rec.violations();
    let min_e1 = rec.dirichlet.iter().chain(report.rows.iter().map(|r| &r.dirichlet)).copied().fold(f64::INFINITY, f64::min);
    let qs: Vec<f64> = report.rows.iter().filter_map(|r| r.lyapunov.map(|l| l.q)).collect();
    let min_q = qs.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        violations.is_empty() && min_e1 >= 0.0 && min_q >= 0.0,
        format!(
            "{} steps, {} budget violations, worst excess {:.3e}, E: {:.6e} -> {:.6e}; min E1 = {:.3e}; min Q = {:.3e} over {} evaluations",
            rec.update_sq.len(),
            violations.len(),
            rec.worst_excess(),
            rec.energy[0],
            rec.energy[rec.energy.len() - 1],
            min_e1,
            min_q,
            qs.len()
        ),
    )
}

fn properties(sub: &Trajectory, super_: &Trajectory) -> Outcome {
    let sym = sub
        .diagnostics
        .iter()
        .chain(&super_.diagnostics)
        .map(|d| d.sym_defect)
        .fold(0.0, f64::max);
    let mono = sub
        .diagnostics
        .iter()
        .chain(&super_.diagnostics)
        .map(|d| d.mono_defect)
        .fold(0.0, f64::max);

    let setup = ProbeSetup::from_config(&reference_config()).map_err(|e| e.to_string())?;
    let ls = [1.0, 1.5, 1.6, 1.605, 1.61, 1.7, 2.0];
    let verdicts = {
        use rayon::prelude::*;
        ls.par_iter()
            .map(|&l| setup.probe(l).map(|p| p.classification.verdict))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?
    };
    let rank = |v: &Verdict| match v {
        Verdict::Extinction => 0,
        Verdict::Undecided => 1,
        Verdict::Propagation => 2,
    };
    let monotone = verdicts.windows(2).all(|w| rank(&w[0]) <= rank(&w[1]));

    let mut cfg = reference_config();
    cfg.init.half_length = 1.61;
    let first = trace_csv(&threshlab::evolve::run(&cfg).map_err(|e| e.to_string())?, 17);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let second = pool.install(|| threshlab::evolve::run(&cfg)).map_err(|e| e.to_string())?;
    let identical = first == trace_csv(&second, 17);

    let summary: Vec<String> = ls.iter().zip(&verdicts).map(|(l, v)| format!("{l}:{v}")).collect();
    check(
        sym <= 1e-12 && mono <= 1e-10 && monotone && identical,
        format!(
            "symmetry {sym:.2e}, monotonicity {mono:.2e}, sweep [{}], byte-identical rerun (1 thread vs pool): {identical}",
            summary.join(" ")
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {n}. {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failures += 1;
                println!("FAIL {n}. {name} ({secs:.1}s): {d}");
            }
        }
    };

    let t = Instant::now();
    report(1, "beta level", t, beta());

    let t = Instant::now();
    let (sub, super_) = rayon::join(
        || reference_run(1.605, SnapshotSchedule::Geometric),
        || reference_run(1.610, SnapshotSchedule::Geometric),
    );
    report(2, "reference regime at L = 1.605 and 1.610", t, regime(&sub, &super_));

    let t = Instant::now();
    report(3, "threshold bracket", t, bracket());

    let t = Instant::now();
    report(4, "fast vs direct convolution", t, convolution_oracle());

    let t = Instant::now();
    report(5, "discrete comparison principle", t, comparison());

    let t = Instant::now();
    let front = fronts();
    let lambda_hat = front.as_ref().ok().map(|(_, l)| *l);
    report(6, "front speed identity and symmetry", t, front.map(|(d, _)| d));

    let t = Instant::now();
    let tail = match lambda_hat {
        Some(l) => tail_rate(l),
        None => Err("alpha = 0.5 front unavailable".to_string()),
    };
    report(7, "tail rate at alpha = 0.5", t, tail);

    let t = Instant::now();
    report(8, "energy descent on the L = 1.605 run", t, energy_descent(&sub));

    let t = Instant::now();
    report(9, "property suites", t, properties(&sub, &super_));

    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
