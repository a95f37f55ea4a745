use proptest::prelude::*;
use threshlab::evolve::{
    check_radial_monotonicity, check_symmetry, initial_indicator, modulus_bound, step, InitProfile, Simulation,
    SnapshotSchedule, TimeSpec,
};
use threshlab::kernels::build_kernel;
use threshlab::{ConvolutionPath, Field, Grid, KernelSpec, Nonlinearity};

fn small_sim(x: f64, m: usize) -> Simulation {
    let grid = Grid::new(x, m).unwrap();
    Simulation::new(grid, &KernelSpec::gaussian(1.0), Nonlinearity::cubic(0.4).unwrap()).unwrap()
}

/// Even field, nonincreasing in `|x|`, built from sorted random levels.
fn radial_field(grid: Grid, mut levels: Vec<f64>) -> Field {
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let c = grid.center();
    let values = (0..grid.len()).map(|i| levels[i.abs_diff(c)]).collect();
    Field::new(grid, values, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn comparison_principle(pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 129)) {
        let grid = Grid::new(8.0, 128).unwrap();
        let nl = Nonlinearity::cubic(0.4).unwrap();
        let k = build_kernel(&KernelSpec::gaussian(1.0), &grid).unwrap();
        let dt = nl.max_stable_step();
        let lower: Vec<f64> = pairs.iter().map(|&(a, b)| a.min(b)).collect();
        let upper: Vec<f64> = pairs.iter().map(|&(a, b)| a.max(b)).collect();
        let mut u = Field::new(grid, lower, 0.0).unwrap();
        let mut v = Field::new(grid, upper, 0.0).unwrap();
        for _ in 0..20 {
            u = step(&u, &k, &nl, dt).unwrap();
            v = step(&v, &k, &nl, dt).unwrap();
            for (a, b) in u.values().iter().zip(v.values()) {
                prop_assert!(*a <= b + 1e-12);
            }
            prop_assert!(u.min() >= 0.0 && v.max() <= 1.0);
        }
    }

    #[test]
    fn symmetry_and_radial_monotonicity(levels in prop::collection::vec(0.0f64..=1.0, 129), alpha in 0.2f64..0.45) {
        let grid = Grid::new(16.0, 256).unwrap();
        let sim = Simulation::new(grid, &KernelSpec::gaussian(1.0), Nonlinearity::cubic(alpha).unwrap()).unwrap();
        let init = radial_field(grid, levels);
        let dt = sim.nonlinearity().max_stable_step();
        let traj = sim.run(init, TimeSpec::new(20.0 * dt, 20).unwrap(), &SnapshotSchedule::All).unwrap();
        for d in &traj.diagnostics {
            prop_assert!(d.sym_defect <= 1e-12, "symmetry defect {}", d.sym_defect);
        }
        for s in &traj.snapshots {
            prop_assert!(check_radial_monotonicity(s) <= 1e-10);
        }
    }

    #[test]
    fn center_trace_monotone_in_l(l_small in 0.3f64..2.5, gap in 0.05f64..1.0) {
        let sim = small_sim(16.0, 640);
        let time = TimeSpec::new(20.0, 40).unwrap();
        let run = |l: f64| sim.run(sim.indicator(l, InitProfile::CellAverage).unwrap(), time, &SnapshotSchedule::EndpointsOnly).unwrap();
        let a = run(l_small);
        let b = run(l_small + gap);
        for (x, y) in a.center.iter().zip(&b.center) {
            prop_assert!(*x <= y + 1e-12);
        }
    }
}

#[test]
fn translation_covariance_is_bit_exact() {
    let grid = Grid::new(16.0, 512).unwrap();
    let sim = Simulation::new(grid, &KernelSpec::bump(1.0), Nonlinearity::cubic(0.4).unwrap())
        .unwrap()
        .with_path(ConvolutionPath::Direct);
    let base = Field::from_fn(grid, |x| if (-2.0..=1.5).contains(&x) { 0.5 + 0.4 * (x * 1.7).sin() } else { 0.0 });
    let time = TimeSpec::new(5.0, 10).unwrap();
    let plain = sim.run(base.clone(), time, &SnapshotSchedule::EndpointsOnly).unwrap();
    for shift in [-24isize, 7, 16] {
        let moved = sim.run(base.shifted(shift), time, &SnapshotSchedule::EndpointsOnly).unwrap();
        let expected = plain.final_snapshot().unwrap().shifted(shift);
        let got = moved.final_snapshot().unwrap();
        for (a, b) in got.values().iter().zip(expected.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn translation_covariance_fast_path() {
    let grid = Grid::new(16.0, 512).unwrap();
    let sim = Simulation::new(grid, &KernelSpec::bump(1.0), Nonlinearity::cubic(0.4).unwrap()).unwrap();
    let base = initial_indicator(&grid, 1.2).unwrap();
    let time = TimeSpec::new(5.0, 10).unwrap();
    let plain = sim.run(base.clone(), time, &SnapshotSchedule::EndpointsOnly).unwrap();
    let moved = sim.run(base.shifted(32), time, &SnapshotSchedule::EndpointsOnly).unwrap();
    let expected = plain.final_snapshot().unwrap().shifted(32);
    for (a, b) in moved.final_snapshot().unwrap().values().iter().zip(expected.values()) {
        assert!((a - b).abs() <= 1e-13);
    }
}

#[test]
fn monotone_in_l_reference_pair() {
    let sim = small_sim(40.0, 8000);
    let time = TimeSpec::new(200.0, 400).unwrap();
    let run = |l: f64| sim.run(sim.indicator(l, InitProfile::Nodal).unwrap(), time, &SnapshotSchedule::EndpointsOnly).unwrap();
    let a = run(0.8);
    let b = run(1.0);
    assert_eq!(a.center.len(), 401);
    for (x, y) in a.center.iter().zip(&b.center) {
        assert!(*x <= y + 1e-12);
    }
}

#[test]
fn range_and_symmetry_for_indicator_runs() {
    let sim = small_sim(60.0, 6000);
    for l in [0.5, 1.2, 2.5] {
        let traj = sim
            .run(sim.indicator(l, InitProfile::Nodal).unwrap(), TimeSpec::new(100.0, 200).unwrap(), &SnapshotSchedule::Every(20))
            .unwrap();
        assert!(traj.range_violation() <= 1e-15, "{}", traj.range_violation());
        assert!(traj.diagnostics.iter().all(|d| d.sym_defect <= 1e-12));
        for s in &traj.snapshots {
            assert!(check_symmetry(s) <= 1e-12);
            assert!(check_radial_monotonicity(s) <= 1e-10);
        }
    }
}

#[test]
fn lipschitz_modulus_holds_on_supercritical_run() {
    let mut cfg = threshlab::config::RunConfig::default();
    cfg.init.half_length = 1.610;
    cfg.output.snapshots = SnapshotSchedule::Steps(vec![100, 200]);
    let traj = threshlab::evolve::run(&cfg).unwrap();
    let sim = cfg.simulation().unwrap();
    let bound = modulus_bound(sim.nonlinearity(), sim.kernel()).unwrap();
    assert!((bound - 3.0686).abs() < 1e-3, "{bound}");
    let stride = (0.1 / traj.grid.dx()).round() as usize;
    for t in [50.0, 100.0, 200.0] {
        let u = traj.snapshot_near(t).unwrap();
        let v = u.values();
        let worst = (0..v.len() - stride).map(|i| (v[i + stride] - v[i]).abs()).fold(0.0, f64::max);
        assert!(worst <= bound * 0.1, "t = {t}: {worst}");
    }
}
