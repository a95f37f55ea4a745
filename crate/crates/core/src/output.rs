//! CSV artifacts and the run manifest.
//!
//! Every file is written to a temporary sibling and renamed into place. Numbers are printed in
//! scientific notation with a configurable number of significant digits (17 round-trips any
//! `f64`).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{parse_config, RunConfig};
use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::fronts::FrontSolution;
use crate::grid::Field;
use crate::threshold::ThresholdResult;
use crate::validation::ValidationReport;

pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const THRESHOLD_FILE: &str = "threshold.csv";
pub const FRONT_FILE: &str = "front.csv";
pub const ENERGY_FILE: &str = "energy.csv";

pub fn fmt_num(x: f64, digits: usize) -> String {
    let digits = digits.clamp(1, 17);
    if x == 0.0 {
        // avoid "-0e0" and keep a uniform look
        return format!("{:.*e}", digits - 1, 0.0);
    }
    format!("{:.*e}", digits - 1, x)
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `k,t,u_center,max_u,sym_defect,mono_defect`.
pub fn trace_csv(traj: &Trajectory, digits: usize) -> String {
    csv(
        &["k", "t", "u_center", "max_u", "sym_defect", "mono_defect"],
        traj.diagnostics.iter().map(|d| {
            vec![
                d.k.to_string(),
                fmt_num(d.t, digits),
                fmt_num(d.u_center, digits),
                fmt_num(d.max_u, digits),
                fmt_num(d.sym_defect, digits),
                fmt_num(d.mono_defect, digits),
            ]
        }),
    )
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t}.csv")
}

/// `x,u`.
pub fn snapshot_csv(u: &Field, digits: usize) -> String {
    csv(
        &["x", "u"],
        u.grid().nodes().zip(u.values()).map(|(x, &v)| vec![fmt_num(x, digits), fmt_num(v, digits)]),
    )
}

/// `iteration,L,verdict,terminal_center`, plus the assignment used for undecided probes.
pub fn threshold_csv(result: &ThresholdResult, digits: usize) -> String {
    csv(
        &["iteration", "L", "verdict", "terminal_center", "assigned", "provisional", "horizon"],
        result.log.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                fmt_num(r.half_length, digits),
                r.classification.verdict.to_string(),
                fmt_num(r.classification.terminal_center, digits),
                r.assigned.to_string(),
                r.provisional.to_string(),
                fmt_num(r.horizon, digits),
            ]
        }),
    )
}

/// `xi,U,residual`.
pub fn front_csv(fs: &FrontSolution, digits: usize) -> String {
    csv(
        &["xi", "U", "residual"],
        fs.grid()
            .nodes()
            .zip(fs.profile.values())
            .zip(&fs.residual)
            .map(|((x, &u), &r)| vec![fmt_num(x, digits), fmt_num(u, digits), fmt_num(r, digits)]),
    )
}

/// `t,E,E1,V,Q,dissipation`; `V` and `Q` are empty where the truncation does not fit the grid.
pub fn energy_csv(report: &EnergyReport, digits: usize) -> String {
    let opt = |v: Option<f64>| v.map(|x| fmt_num(x, digits)).unwrap_or_default();
    csv(
        &["t", "E", "E1", "V", "Q", "dissipation"],
        report.rows.iter().map(|r| {
            vec![
                fmt_num(r.t, digits),
                fmt_num(r.energy, digits),
                fmt_num(r.dirichlet, digits),
                opt(r.lyapunov.map(|l| l.v)),
                opt(r.lyapunov.map(|l| l.q)),
                fmt_num(r.dissipation, digits),
            ]
        }),
    )
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Resolved config, tool version, timing, validation reports and a checksummed file list.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<RunConfig>,
    pub entries: Vec<(String, String)>,
    pub reports: Vec<ValidationReport>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest { command: command.into(), ..Default::default() }
    }

    pub fn entry(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Render with checksums of every regular file currently in `dir` except the manifest.
    pub fn render(&self, dir: &Path) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "tool: {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "wall_clock_seconds: {:.3}", self.wall_clock_seconds);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}: {v}");
        }
        if let Some(c) = &self.config {
            s.push_str("\n[config]\n");
            s.push_str(&c.emit());
        }
        for report in &self.reports {
            let _ = write!(s, "\n[validation]\n{report}");
            if !s.ends_with('\n') {
                s.push('\n');
            }
        }
        s.push_str("\n[files]\n");
        for name in list_files(dir)? {
            if name == MANIFEST_FILE {
                continue;
            }
            let _ = writeln!(s, "{name}: sha256={}", sha256_file(&dir.join(&name))?);
        }
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = self.render(dir)?;
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

/// Regular, non-hidden files in `dir`, sorted by name.
pub fn list_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let ft = entry.file_type().map_err(|e| Error::io(entry.path(), e))?;
        if !ft.is_file() {
            continue;
        }
        if let Some(name) = entry.file_name().to_str() {
            if !name.starts_with('.') {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Parse the `[files]` section of a manifest and compare each checksum against the file on disk.
/// Returns the names whose checksum does not match or whose file is missing.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut bad = Vec::new();
    let mut in_files = false;
    let mut listed = Vec::new();
    for line in text.lines() {
        if line.starts_with('[') {
            in_files = line == "[files]";
            continue;
        }
        if !in_files || line.trim().is_empty() {
            continue;
        }
        let Some((name, sum)) = line.split_once(": sha256=") else {
            bad.push(line.to_string());
            continue;
        };
        listed.push(name.to_string());
        match sha256_file(&dir.join(name)) {
            Ok(actual) if actual == sum => {}
            _ => bad.push(name.to_string()),
        }
    }
    for name in list_files(dir)? {
        if name != MANIFEST_FILE && !listed.contains(&name) {
            bad.push(name);
        }
    }
    Ok(bad)
}

/// Artifacts of an `evolve` run: config, trace and snapshots.
pub fn write_run(dir: &Path, config: &RunConfig, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    let digits = config.output.precision;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
        Ok(())
    };
    put(CONFIG_FILE.into(), config.emit())?;
    put(TRACE_FILE.into(), trace_csv(traj, digits))?;
    for snap in &traj.snapshots {
        put(snapshot_name(snap.time()), snapshot_csv(snap, digits))?;
    }
    Ok(written)
}

fn parse_csv_rows(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::ConfigParse { line: n + 1, message: format!("{}: {e}", path.display()) })?;
        if row.len() != columns {
            return Err(Error::ConfigParse {
                line: n + 1,
                message: format!("{}: expected {columns} columns, found {}", path.display(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Read back a run directory written by [`write_run`]: its config and snapshots sorted by time.
pub fn load_run(dir: &Path) -> Result<(RunConfig, Vec<Field>)> {
    let config = parse_config(&dir.join(CONFIG_FILE))?;
    let grid = config.grid()?;
    let mut fields = Vec::new();
    for name in list_files(dir)? {
        let Some(t) = name.strip_prefix("snapshot_").and_then(|r| r.strip_suffix(".csv")) else {
            continue;
        };
        let t: f64 = t
            .parse()
            .map_err(|_| Error::Config(format!("cannot read a time from snapshot file name {name:?}")))?;
        let rows = parse_csv_rows(&dir.join(&name), 2)?;
        let values: Vec<f64> = rows.into_iter().map(|r| r[1]).collect();
        fields.push(Field::new(grid, values, t)?);
    }
    fields.sort_by(|a, b| a.time().total_cmp(&b.time()));
    Ok((config, fields))
}
