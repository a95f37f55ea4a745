use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use threshlab::config::{parse_config, RunConfig};
use threshlab::energy::{monitor_fields, CutoffProfile};
use threshlab::evolve::{center_trace_shape, modulus_bound, Trajectory};
use threshlab::fronts::{char_roots, front_solve, speed_identity_residual, FrontOptions};
use threshlab::kernels::validate_kernel;
use threshlab::output::{self, fmt_num, write_atomic, RunManifest};
use threshlab::reaction::validate_hypotheses;
use threshlab::threshold::{bisect, classify, BisectionOutcome};
use threshlab::{Error, ValidationReport};

/// Environment variable that overrides `output.dir` (the `--out` flag wins over both).
const OUTPUT_ENV: &str = "THRESHLAB_OUTPUT_DIR";

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_INCONCLUSIVE: u8 = 5;

#[derive(Parser)]
#[command(name = "threshlab", version, about = "Nonlocal bistable reaction-diffusion laboratory")]
struct Cli {
    /// Config file of dotted `key = value` lines; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides THRESHLAB_OUTPUT_DIR and output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the kernel and nonlinearity hypotheses and the step-size bound.
    Validate,
    /// Run one evolution and write its trace and snapshots.
    Evolve,
    /// Bracket the critical half-length by bisection.
    Threshold(ThresholdArgs),
    /// Solve for a traveling front and its speed.
    Front(FrontArgs),
    /// Evaluate energy and Lyapunov functionals over a run directory's snapshots.
    Energy(EnergyArgs),
    /// Evolve a list of (alpha, L) cells concurrently.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long = "l-lo", default_value_t = 1.0)]
    l_lo: f64,
    #[arg(long = "l-hi", default_value_t = 3.0)]
    l_hi: f64,
    #[arg(long = "tol-l", default_value_t = 0.005)]
    tol_l: f64,
    #[arg(long = "max-iter", default_value_t = 30)]
    max_iter: usize,
}

#[derive(Args)]
struct FrontArgs {
    /// Cubic zero; defaults to reaction.alpha from the config.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "xi-half-width", default_value_t = 40.0)]
    xi_half_width: f64,
    #[arg(long, default_value_t = 0.02)]
    dxi: f64,
}

#[derive(Args)]
struct EnergyArgs {
    /// Directory written by `evolve`.
    run_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated `alpha:L` cells, e.g. `0.4:1.605,0.4:1.61`.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    /// Alpha values, crossed with `--l`.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Half-lengths, crossed with `--alpha`.
    #[arg(long = "l", value_delimiter = ',')]
    half_lengths: Vec<f64>,
    /// Concurrent workers; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Hypothesis(_)
        | Error::BalancedBoundary { .. }
        | Error::InvalidSpec(_)
        | Error::StepSize { .. }
        | Error::DomainTooSmall(_) => EXIT_VALIDATION,
        Error::SolverFailure { .. }
        | Error::NonFinite { .. }
        | Error::RootNotFound(_)
        | Error::Divergence { .. }
        | Error::FitWindow(_) => EXIT_SOLVER,
        Error::Bracket(_) => EXIT_INCONCLUSIVE,
        _ => EXIT_FAILURE,
    }
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let base = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    let mut config = base.with_overrides(&cli.overrides)?;
    if let Some(dir) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        config.output.dir = PathBuf::from(dir);
    }
    if let Some(dir) = &cli.out {
        config.output.dir = dir.clone();
    }
    Ok(config)
}

fn log(msg: impl AsRef<str>) {
    eprintln!("threshlab: {}", msg.as_ref());
}

fn reports(config: &RunConfig) -> CliResult<Vec<ValidationReport>> {
    let nl = config.nonlinearity()?;
    let mut out = vec![validate_hypotheses(&nl)];
    let grid = config.grid()?;
    let kernel = threshlab::kernels::build_kernel(&config.kernel_spec()?, &grid)?;
    out.insert(0, validate_kernel(&kernel));
    let mut step = ValidationReport::new("time step");
    let bound = nl.max_stable_step();
    let dt = config.time.dt();
    step.check("order_preserving_step", dt <= bound * (1.0 + 1e-12), format!("dt = {dt}, bound 1/(1+M_f) = {bound}"));
    if let Ok(m) = modulus_bound(&nl, &kernel) {
        step.constant("lipschitz_modulus", m);
    }
    out.push(step);
    Ok(out)
}

fn cmd_validate(config: &RunConfig) -> CliResult {
    let reports = reports(config)?;
    for r in &reports {
        print!("{r}");
    }
    if reports.iter().all(|r| r.passed()) {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure { code: EXIT_VALIDATION, message: "validation failed".into() })
    }
}

fn summarize_run(manifest: &mut RunManifest, config: &RunConfig, traj: &Trajectory) {
    let sym = traj.diagnostics.iter().map(|d| d.sym_defect).fold(0.0, f64::max);
    let mono = traj.diagnostics.iter().map(|d| d.mono_defect).fold(0.0, f64::max);
    let digits = config.output.precision;
    manifest.entry("u_center_final", fmt_num(*traj.center.last().unwrap_or(&f64::NAN), digits));
    manifest.entry("max_symmetry_defect", fmt_num(sym, digits));
    manifest.entry("max_monotonicity_defect", fmt_num(mono, digits));
    manifest.entry("range_violation", fmt_num(traj.range_violation(), digits));
    manifest.entry("boundary_max", fmt_num(traj.boundary_max, digits));
    manifest.entry("domain_too_small", traj.domain_too_small());
    let shape = center_trace_shape(traj);
    manifest.entry(
        "center_switch_time",
        shape.switch_time.map(|t| t.to_string()).unwrap_or_else(|| "none".into()),
    );
    match config.nonlinearity().and_then(|nl| nl.compute_beta()) {
        Ok(beta) => {
            let c = classify(traj, beta, &config.classify);
            manifest.entry("beta", fmt_num(beta, digits));
            manifest.entry("verdict", c.verdict);
            manifest.entry("window_mean", fmt_num(c.window_mean, digits));
            manifest.entry("window_slope", fmt_num(c.slope, digits));
        }
        Err(e) => {
            manifest.entry("verdict", format!("unavailable ({e})"));
        }
    }
}

fn evolve_into(config: &RunConfig, dir: &Path, command: &str) -> CliResult<Trajectory> {
    let start = Instant::now();
    let reports = reports(config)?;
    let traj = threshlab::evolve::run(config)?;
    output::write_run(dir, config, &traj)?;
    let mut manifest = RunManifest::new(command);
    manifest.config = Some(config.clone());
    manifest.reports = reports;
    summarize_run(&mut manifest, config, &traj);
    if traj.domain_too_small() {
        log(format!("{}: boundary values reached {:e}; the domain may be too small", dir.display(), traj.boundary_max));
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(dir)?;
    Ok(traj)
}

fn cmd_evolve(config: &RunConfig) -> CliResult {
    let dir = config.output.dir.clone();
    log(format!("evolving L = {} into {}", config.init.half_length, dir.display()));
    evolve_into(config, &dir, "evolve")?;
    println!("{}", dir.join(output::MANIFEST_FILE).display());
    Ok(())
}

fn cmd_threshold(config: &RunConfig, args: &ThresholdArgs) -> CliResult {
    let start = Instant::now();
    let dir = config.output.dir.clone();
    log(format!("bisecting on [{}, {}] to width {}", args.l_lo, args.l_hi, args.tol_l));
    let result = bisect(config, args.l_lo, args.l_hi, args.tol_l, args.max_iter)?;
    let digits = config.output.precision;
    write_atomic(&dir.join(output::THRESHOLD_FILE), output::threshold_csv(&result, digits).as_bytes())?;
    write_atomic(&dir.join(output::CONFIG_FILE), config.emit().as_bytes())?;
    let mut manifest = RunManifest::new("threshold");
    manifest.config = Some(config.clone());
    manifest
        .entry("l_lo", fmt_num(result.lo, digits))
        .entry("l_hi", fmt_num(result.hi, digits))
        .entry("width", fmt_num(result.width(), digits))
        .entry("outcome", result.outcome)
        .entry("probes", result.log.len())
        .entry("provisional_probes", result.log.iter().filter(|r| r.provisional).count())
        .entry("beta", fmt_num(result.beta, digits))
        .entry("provenance", &result.provenance);
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    println!("L* in [{}, {}] ({})", result.lo, result.hi, result.outcome);
    match result.outcome {
        BisectionOutcome::Converged => Ok(()),
        other => Err(Failure { code: EXIT_INCONCLUSIVE, message: format!("threshold bisection ended {other}") }),
    }
}

fn cmd_front(config: &RunConfig, args: &FrontArgs) -> CliResult {
    let start = Instant::now();
    let mut config = config.clone();
    if let Some(a) = args.alpha {
        config.reaction.alpha = a;
    }
    let dir = config.output.dir.clone();
    let spec = config.kernel_spec()?;
    let nl = config.nonlinearity()?;
    let fs = front_solve(&spec, &nl, args.xi_half_width, args.dxi, &FrontOptions::default())?;
    let digits = config.output.precision;
    write_atomic(&dir.join(output::FRONT_FILE), output::front_csv(&fs, digits).as_bytes())?;
    write_atomic(&dir.join(output::CONFIG_FILE), config.emit().as_bytes())?;
    let mut manifest = RunManifest::new("front");
    manifest.config = Some(config.clone());
    manifest
        .entry("alpha", nl.alpha())
        .entry("xi_half_width", args.xi_half_width)
        .entry("dxi", args.dxi)
        .entry("speed", fmt_num(fs.speed, digits))
        .entry("residual_norm", fmt_num(fs.residual_norm, digits))
        .entry("phase", fmt_num(fs.phase, digits))
        .entry("speed_identity_residual", fmt_num(speed_identity_residual(&fs, &nl), digits))
        .entry("monotone_defect", fmt_num(fs.monotone_defect, digits))
        .entry("monotone", fs.is_monotone())
        .entry("iterations", fs.iterations);
    let history: Vec<String> = fs.history.iter().map(|h| format!("{h:.3e}")).collect();
    manifest.entry("residual_history", history.join(" "));
    match char_roots(&spec, &nl, fs.speed) {
        Ok((l1, l2)) => {
            manifest.entry("lambda_1", fmt_num(l1, digits)).entry("lambda_2", fmt_num(l2, digits));
        }
        Err(e) => {
            manifest.entry("lambda", format!("unavailable ({e})"));
        }
    }
    match fs.tail_rates {
        Some((m1, m2)) => {
            manifest.entry("lambda_1_fit", fmt_num(m1, digits)).entry("lambda_2_fit", fmt_num(m2, digits));
        }
        None => {
            manifest.entry("lambda_fit", "unavailable");
        }
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    println!("c = {}", fs.speed);
    if !fs.is_monotone() {
        log(format!("front is not monotone (largest drop {:e})", fs.monotone_defect));
    }
    Ok(())
}

fn cmd_energy(cli_out: Option<&Path>, args: &EnergyArgs) -> CliResult {
    let start = Instant::now();
    let (config, fields) = output::load_run(&args.run_dir)?;
    if fields.is_empty() {
        return Err(Failure { code: EXIT_FAILURE, message: format!("no snapshots in {}", args.run_dir.display()) });
    }
    let env_dir = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let dir = cli_out.map(Path::to_path_buf).or(env_dir).unwrap_or_else(|| args.run_dir.join("energy"));
    let sim = config.simulation()?;
    let report = monitor_fields(&fields, sim.kernel(), sim.nonlinearity(), &CutoffProfile::Quintic)?;
    let digits = config.output.precision;
    write_atomic(&dir.join(output::ENERGY_FILE), output::energy_csv(&report, digits).as_bytes())?;
    let min_e1 = report.rows.iter().map(|r| r.dirichlet).fold(f64::INFINITY, f64::min);
    let min_q = report.rows.iter().filter_map(|r| r.lyapunov.map(|l| l.q)).fold(f64::INFINITY, f64::min);
    let max_rise = report.rows.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
    let mut manifest = RunManifest::new("energy");
    manifest.config = Some(config);
    manifest
        .entry("run_dir", args.run_dir.display())
        .entry("snapshots", report.rows.len())
        .entry("min_E1", fmt_num(min_e1, digits))
        .entry("min_Q", fmt_num(min_q, digits))
        .entry("max_energy_change_between_snapshots", fmt_num(max_rise, digits));
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    println!("{}", dir.join(output::ENERGY_FILE).display());
    Ok(())
}

fn parse_pairs(args: &SweepArgs) -> CliResult<Vec<(f64, f64)>> {
    let mut cells = Vec::new();
    for p in &args.pairs {
        let parsed = p
            .split_once(':')
            .and_then(|(a, l)| Some((a.trim().parse::<f64>().ok()?, l.trim().parse::<f64>().ok()?)));
        match parsed {
            Some(c) => cells.push(c),
            None => return Err(Failure { code: EXIT_FAILURE, message: format!("bad sweep cell {p:?}; expected alpha:L") }),
        }
    }
    for &a in &args.alpha {
        for &l in &args.half_lengths {
            cells.push((a, l));
        }
    }
    if cells.is_empty() {
        return Err(Failure { code: EXIT_FAILURE, message: "sweep needs --pairs or both --alpha and --l".into() });
    }
    Ok(cells)
}

fn cmd_sweep(config: &RunConfig, args: &SweepArgs) -> CliResult {
    let start = Instant::now();
    let cells = parse_pairs(args)?;
    let root = config.output.dir.clone();
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure { code: EXIT_FAILURE, message: e.to_string() })?;
    log(format!("sweeping {} cells with {} workers", cells.len(), jobs));
    let outcomes: Vec<(f64, f64, String, CliResult<String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(alpha, l)| {
                let name = format!("alpha_{alpha}_L_{l}");
                let dir = root.join(&name);
                let run = || -> CliResult<String> {
                    let mut cell = config.clone();
                    cell.reaction.alpha = alpha;
                    cell.init.half_length = l;
                    cell.output.dir = dir.clone();
                    cell.validate()?;
                    let traj = evolve_into(&cell, &dir, "sweep cell")?;
                    let beta = cell.nonlinearity()?.compute_beta()?;
                    let c = classify(&traj, beta, &cell.classify);
                    log(format!("{name}: {}", c.verdict));
                    Ok(format!("{},{}", c.verdict, fmt_num(c.terminal_center, cell.output.precision)))
                };
                let result = run();
                (alpha, l, name, result)
            })
            .collect()
    });
    let mut text = String::from("alpha,L,verdict,terminal_center,dir\n");
    let mut first_failure = None;
    for (alpha, l, name, r) in &outcomes {
        match r {
            Ok(s) => text.push_str(&format!("{alpha},{l},{s},{name}\n")),
            Err(f) => {
                log(format!("{name}: {}", f.message));
                text.push_str(&format!("{alpha},{l},error,,{name}\n"));
                first_failure.get_or_insert(f.code);
            }
        }
    }
    write_atomic(&root.join("sweep.csv"), text.as_bytes())?;
    let mut manifest = RunManifest::new("sweep");
    manifest.config = Some(config.clone());
    manifest.entry("cells", outcomes.len()).entry("jobs", jobs);
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&root)?;
    match first_failure {
        None => Ok(()),
        Some(code) => Err(Failure { code, message: "some sweep cells failed".into() }),
    }
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Energy(args) => cmd_energy(cli.out.as_deref(), args),
        command => {
            let config = load_config(cli)?;
            match command {
                Command::Validate => cmd_validate(&config),
                Command::Evolve => cmd_evolve(&config),
                Command::Threshold(args) => cmd_threshold(&config, args),
                Command::Front(args) => cmd_front(&config, args),
                Command::Sweep(args) => cmd_sweep(&config, args),
                Command::Energy(_) => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("threshlab: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
