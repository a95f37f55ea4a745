//! Bistable reaction term `f`, its derivative, its antiderivative `F(u) = int_0^u f`, and the
//! derived constants `alpha` (interior zero), `beta` (zero of `F` in `(alpha, 1]`),
//! `M_f = max |f'|` and `L_0 = inf (1 + f')` over `[0, 1]`.
//!
//! Sign convention: the equation carries `-f(u)`, so `f > 0` on `(0, alpha)` and `f < 0` on
//! `(alpha, 1)`. The cubic prototype is `f(s) = s (s - alpha) (s - 1)`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::bisect_root;
use crate::validation::ValidationReport;

/// Sampling density for `M_f` and `L_0`.
const SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eval {
    pub f: f64,
    pub df: f64,
    /// `F(s) = int_0^s f`.
    pub antiderivative: f64,
}

/// Tabulated `f` on `[s_0, s_n]`, interpolated by piecewise cubic Hermite polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionTable {
    s: Vec<f64>,
    f: Vec<f64>,
    slopes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ReactionTable {
    /// `(s, f(s))` rows; slopes come from the Fritsch-Carlson monotone limiter.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let (s, f): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        check_abscissae(&s, &f)?;
        let slopes = monotone_slopes(&s, &f);
        Ok(Self::assemble(s, f, slopes))
    }

    /// `(s, f(s), f'(s))` rows with exact derivative samples.
    pub fn with_derivatives(points: Vec<(f64, f64, f64)>) -> Result<Self> {
        let mut s = Vec::with_capacity(points.len());
        let mut f = Vec::with_capacity(points.len());
        let mut d = Vec::with_capacity(points.len());
        for (a, b, c) in points {
            s.push(a);
            f.push(b);
            d.push(c);
        }
        check_abscissae(&s, &f)?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("reaction table has non-finite slopes".into()));
        }
        Ok(Self::assemble(s, f, d))
    }

    fn assemble(s: Vec<f64>, f: Vec<f64>, slopes: Vec<f64>) -> Self {
        // F accumulated by the trapezoid rule on the table nodes, anchored so F(0) = 0
        let mut cumulative = vec![0.0; s.len()];
        for k in 1..s.len() {
            cumulative[k] = cumulative[k - 1] + 0.5 * (s[k] - s[k - 1]) * (f[k] + f[k - 1]);
        }
        let mut table = ReactionTable { s, f, slopes, cumulative };
        let offset = table.trapezoid_antiderivative(0.0);
        table.cumulative.iter_mut().for_each(|c| *c -= offset);
        table
    }

    /// Two or three columns (s, f, optionally f'), whitespace or comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::ConfigParse {
                        line: n + 1,
                        message: format!("bad number {t:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != 2 && row.len() != 3 {
                return Err(Error::ConfigParse {
                    line: n + 1,
                    message: format!("reaction table rows need 2 or 3 columns, found {}", row.len()),
                });
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::ConfigParse {
                        line: n + 1,
                        message: "inconsistent column count".into(),
                    });
                }
            }
            rows.push(row);
        }
        match rows.first().map(Vec::len) {
            Some(3) => ReactionTable::with_derivatives(rows.iter().map(|r| (r[0], r[1], r[2])).collect()),
            _ => ReactionTable::new(rows.iter().map(|r| (r[0], r[1])).collect()),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ReactionTable::parse(&text)
    }

    fn interval(&self, x: f64) -> usize {
        let k = self.s.partition_point(|&v| v <= x);
        k.clamp(1, self.s.len() - 1) - 1
    }

    fn hermite(&self, x: f64) -> (f64, f64) {
        let k = self.interval(x);
        let h = self.s[k + 1] - self.s[k];
        let t = (x - self.s[k]) / h;
        let (y0, y1) = (self.f[k], self.f[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let deriv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (value, deriv)
    }

    fn trapezoid_antiderivative(&self, x: f64) -> f64 {
        let k = self.interval(x);
        let fx = self.hermite(x).0;
        self.cumulative[k] + 0.5 * (x - self.s[k]) * (self.f[k] + fx)
    }
}

fn check_abscissae(s: &[f64], f: &[f64]) -> Result<()> {
    if s.len() < 3 {
        return Err(Error::InvalidSpec("reaction table needs at least 3 rows".into()));
    }
    if s.iter().chain(f).any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("reaction table has non-finite entries".into()));
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("reaction table abscissae must increase strictly".into()));
    }
    if s[0] > 0.0 || s[s.len() - 1] < 1.0 {
        return Err(Error::InvalidSpec("reaction table must cover [0, 1]".into()));
    }
    Ok(())
}

/// Fritsch-Carlson slopes: shape preserving on monotone stretches.
fn monotone_slopes(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = s.len();
    let secant: Vec<f64> = (0..n - 1).map(|k| (f[k + 1] - f[k]) / (s[k + 1] - s[k])).collect();
    let mut d = vec![0.0; n];
    d[0] = secant[0];
    d[n - 1] = secant[n - 2];
    for k in 1..n - 1 {
        d[k] = if secant[k - 1] * secant[k] <= 0.0 { 0.0 } else { 0.5 * (secant[k - 1] + secant[k]) };
    }
    for k in 0..n - 1 {
        if secant[k] == 0.0 {
            d[k] = 0.0;
            d[k + 1] = 0.0;
            continue;
        }
        let a = d[k] / secant[k];
        let b = d[k + 1] / secant[k];
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            d[k] = tau * a * secant[k];
            d[k + 1] = tau * b * secant[k];
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReactionFamily {
    Cubic { alpha: f64 },
    Table(ReactionTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    family: ReactionFamily,
    alpha: f64,
    max_abs_slope: f64,
    monotonicity_floor: f64,
}

impl Nonlinearity {
    pub fn cubic(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidSpec(format!("cubic alpha must lie in (0, 1), got {alpha}")));
        }
        let mut nl = Nonlinearity {
            family: ReactionFamily::Cubic { alpha },
            alpha,
            max_abs_slope: 0.0,
            monotonicity_floor: 0.0,
        };
        nl.cache_slope_constants(&[(1.0 + alpha) / 3.0]);
        Ok(nl)
    }

    /// The interior zero is located by root finding; if there is no unique one, `alpha` is NaN
    /// and [`validate_hypotheses`] reports it.
    pub fn table(table: ReactionTable) -> Self {
        let mut nl = Nonlinearity {
            family: ReactionFamily::Table(table),
            alpha: f64::NAN,
            max_abs_slope: 0.0,
            monotonicity_floor: 0.0,
        };
        let zeros = nl.interior_zeros();
        if let [alpha] = zeros[..] {
            nl.alpha = alpha;
        }
        nl.cache_slope_constants(&[]);
        nl
    }

    fn cache_slope_constants(&mut self, critical: &[f64]) {
        let mut max_abs = 0.0f64;
        let mut min_df = f64::INFINITY;
        let points = (0..=SAMPLES).map(|j| j as f64 / SAMPLES as f64).chain(critical.iter().copied());
        for s in points {
            let df = self.evaluate(s).df;
            max_abs = max_abs.max(df.abs());
            min_df = min_df.min(df);
        }
        self.max_abs_slope = max_abs;
        self.monotonicity_floor = 1.0 + min_df;
    }

    pub fn family(&self) -> &ReactionFamily {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `M_f = max_{[0,1]} |f'|`.
    pub fn max_abs_slope(&self) -> f64 {
        self.max_abs_slope
    }

    /// `L_0 = inf_{[0,1]} (1 + f')`.
    pub fn monotonicity_floor(&self) -> f64 {
        self.monotonicity_floor
    }

    /// Largest forward-Euler step for which the update map is order preserving.
    pub fn max_stable_step(&self) -> f64 {
        1.0 / (1.0 + self.max_abs_slope)
    }

    pub fn evaluate(&self, s: f64) -> Eval {
        match &self.family {
            ReactionFamily::Cubic { alpha } => {
                let a = *alpha;
                let s2 = s * s;
                Eval {
                    f: s * s2 - (1.0 + a) * s2 + a * s,
                    df: 3.0 * s2 - 2.0 * (1.0 + a) * s + a,
                    antiderivative: s2 * s2 / 4.0 - (1.0 + a) * s2 * s / 3.0 + a * s2 / 2.0,
                }
            }
            ReactionFamily::Table(t) => {
                let (f, df) = t.hermite(s);
                Eval { f, df, antiderivative: t.trapezoid_antiderivative(s) }
            }
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match &self.family {
            ReactionFamily::Cubic { alpha } => s * (s - alpha) * (s - 1.0),
            ReactionFamily::Table(t) => t.hermite(s).0,
        }
    }

    pub fn df(&self, s: f64) -> f64 {
        self.evaluate(s).df
    }

    pub fn antiderivative(&self, s: f64) -> f64 {
        self.evaluate(s).antiderivative
    }

    /// `F(1) = int_0^1 f`; `(2 alpha - 1) / 12` for the cubic.
    pub fn total_integral(&self) -> f64 {
        match &self.family {
            ReactionFamily::Cubic { alpha } => (2.0 * alpha - 1.0) / 12.0,
            ReactionFamily::Table(_) => self.antiderivative(1.0),
        }
    }

    fn interior_zeros(&self) -> Vec<f64> {
        let n = SAMPLES;
        let mut zeros = Vec::new();
        let edge = 1e-6;
        let mut prev_s = edge;
        let mut prev = self.f(prev_s);
        for j in 1..=n {
            let s = edge + (1.0 - 2.0 * edge) * j as f64 / n as f64;
            let v = self.f(s);
            if prev == 0.0 {
                zeros.push(prev_s);
            } else if prev.signum() != v.signum() && v != 0.0 {
                if let Ok(r) = bisect_root(|x| self.f(x), prev_s, s, 1e-14) {
                    zeros.push(r);
                }
            }
            prev_s = s;
            prev = v;
        }
        zeros
    }

    /// The unique `beta` in `(alpha, 1]` with `F(beta) = 0`.
    pub fn compute_beta(&self) -> Result<f64> {
        let total = self.total_integral();
        if total.abs() <= 1e-15 {
            return Err(Error::BalancedBoundary { beta: 1.0 });
        }
        if total > 0.0 {
            return Err(Error::Hypothesis(format!(
                "F(1) = {total:e} >= 0: no threshold level beta in (alpha, 1]"
            )));
        }
        match &self.family {
            ReactionFamily::Cubic { alpha } => {
                let a = *alpha;
                Ok((-(2.0 * (2.0 * a - 1.0) * (a - 2.0)).sqrt() + 2.0 * a + 2.0) / 3.0)
            }
            ReactionFamily::Table(_) => {
                if !self.alpha.is_finite() {
                    return Err(Error::RootNotFound("no unique interior zero alpha".into()));
                }
                bisect_root(|s| self.antiderivative(s), self.alpha, 1.0, 1e-12)
            }
        }
    }
}

/// Bistability, monotonicity and threshold-level checks, with the computed constants.
pub fn validate_hypotheses(nl: &Nonlinearity) -> ValidationReport {
    let mut report = ValidationReport::new("reaction");
    let tol = 1e-12;
    let f0 = nl.f(0.0);
    let f1 = nl.f(1.0);
    report.check(
        "zeros_at_0_and_1",
        f0.abs() <= tol && f1.abs() <= tol,
        format!("f(0) = {f0:e}, f(1) = {f1:e}"),
    );
    let zeros = nl.interior_zeros();
    report.check(
        "unique_interior_zero",
        zeros.len() == 1,
        format!("{} interior zero(s), alpha = {}", zeros.len(), nl.alpha()),
    );

    let alpha = nl.alpha();
    let sign_ok = alpha.is_finite()
        && (1..SAMPLES).all(|j| {
            let s = j as f64 / SAMPLES as f64;
            let v = nl.f(s);
            if (s - alpha).abs() < 1e-9 {
                true
            } else if s < alpha {
                v > 0.0
            } else {
                v < 0.0
            }
        });
    report.check("sign_pattern", sign_ok, "f > 0 on (0, alpha), f < 0 on (alpha, 1)");

    let d0 = nl.df(0.0);
    let d1 = nl.df(1.0);
    report.check("stable_at_0", d0 > 0.0, format!("f'(0) = {d0}"));
    report.check("stable_at_1", d1 > 0.0, format!("f'(1) = {d1}"));
    let l0 = nl.monotonicity_floor();
    report.check("monotone_1_plus_df", l0 > 0.0, format!("inf (1 + f') = {l0}"));
    let total = nl.total_integral();
    report.check("threshold_level", total < 0.0, format!("F(1) = {total:e}"));

    report.constant("alpha", alpha);
    if let Ok(beta) = nl.compute_beta() {
        report.constant("beta", beta);
    }
    report.constant("M_f", nl.max_abs_slope());
    report.constant("L_0", l0);
    report.constant("F(1)", total);
    report
}
