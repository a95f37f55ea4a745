use threshlab::config::RunConfig;
use threshlab::evolve::{InitProfile, Simulation, SnapshotSchedule, TimeSpec};
use threshlab::threshold::{bisect, bisect_with, extract_limit_profile, BisectionOutcome, ProbeSetup, Verdict};
use threshlab::{Error, Field, Grid, KernelSpec, Nonlinearity};

fn coarse_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.grid.intervals = 12000;
    cfg
}

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::Extinction => 0,
        Verdict::Undecided => 1,
        Verdict::Propagation => 2,
    }
}

#[test]
fn verdicts_sorted_in_l() {
    let setup = ProbeSetup::from_config(&coarse_config()).unwrap();
    let ls = [0.5, 1.0, 1.5, 1.6, 1.7, 2.0, 3.0];
    let verdicts: Vec<Verdict> = ls.iter().map(|&l| setup.probe(l).unwrap().classification.verdict).collect();
    assert!(verdicts.windows(2).all(|w| rank(w[0]) <= rank(w[1])), "{verdicts:?}");
    assert_eq!(verdicts[0], Verdict::Extinction);
    assert_eq!(verdicts[6], Verdict::Propagation);
}

#[test]
fn bracket_integrity_and_sharpness() {
    let tol = 0.005;
    let result = bisect(&coarse_config(), 1.0, 3.0, tol, 30).unwrap();
    assert_eq!(result.outcome, BisectionOutcome::Converged);
    assert!(result.width() <= tol);
    for record in &result.log {
        match record.assigned {
            Verdict::Extinction => assert!(record.half_length <= result.lo),
            Verdict::Propagation => assert!(record.half_length >= result.hi),
            Verdict::Undecided => panic!("probes are always assigned a side"),
        }
        if record.classification.verdict == Verdict::Undecided {
            assert!(record.provisional);
            assert!(record.half_length >= result.lo - tol && record.half_length <= result.hi + tol);
        }
    }
}

#[test]
fn extinct_bracket_is_rejected() {
    let err = bisect(&coarse_config(), 0.1, 0.2, 0.005, 30).unwrap_err();
    assert!(matches!(err, Error::Bracket(_)), "{err}");
}

#[test]
fn loose_tolerance_returns_initial_bracket() {
    let result = bisect(&coarse_config(), 1.0, 3.0, 5.0, 30).unwrap();
    assert_eq!((result.lo, result.hi), (1.0, 3.0));
    assert_eq!(result.log.len(), 2);
    assert_eq!(result.outcome, BisectionOutcome::Converged);
}

#[test]
fn limit_profile_of_trivial_and_extinct_runs() {
    let grid = Grid::new(30.0, 3000).unwrap();
    let sim = Simulation::new(grid, &KernelSpec::gaussian(1.0), Nonlinearity::cubic(0.4).unwrap()).unwrap();
    let time = TimeSpec::new(100.0, 200).unwrap();
    let zero = sim.run(Field::zeros(grid), time, &SnapshotSchedule::EndpointsOnly).unwrap();
    let (u, r) = extract_limit_profile(&zero, sim.kernel(), sim.nonlinearity()).unwrap();
    assert_eq!(r, 0.0);
    assert_eq!(u.max(), 0.0);
    let extinct = sim.run(sim.indicator(0.5, InitProfile::Nodal).unwrap(), time, &SnapshotSchedule::EndpointsOnly).unwrap();
    let (u, r) = extract_limit_profile(&extinct, sim.kernel(), sim.nonlinearity()).unwrap();
    assert!(u.max() < 1e-10 && r < 1e-10, "max {}, residual {r}", u.max());
}

#[test]
fn near_threshold_profile_hovers_at_beta() {
    let grid = Grid::with_spacing(120.0, 0.02).unwrap();
    let sim = Simulation::new(grid, &KernelSpec::gaussian(1.0), Nonlinearity::cubic(0.4).unwrap()).unwrap();
    let setup = ProbeSetup {
        simulation: sim.clone(),
        time: TimeSpec::new(200.0, 400).unwrap(),
        profile: InitProfile::CellAverage,
        beta: 2.0 / 3.0,
        classify: Default::default(),
    };
    let result = bisect_with(&setup, 1.0, 3.0, 1e-12, 80).unwrap();
    let init = sim.indicator(result.midpoint(), InitProfile::CellAverage).unwrap();
    let traj = sim.run(init, setup.time, &SnapshotSchedule::EndpointsOnly).unwrap();
    let (u, residual) = extract_limit_profile(&traj, sim.kernel(), sim.nonlinearity()).unwrap();
    assert!((u.center_value() - 2.0 / 3.0).abs() < 0.05, "u(200, 0) = {}", u.center_value());
    assert!(residual < 1e-2, "stationary residual {residual}");
}
