use std::fmt;

/// Outcome of one hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail list plus the constants computed along the way.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub subject: String,
    pub checks: Vec<Check>,
    pub constants: Vec<(&'static str, f64)>,
}

impl ValidationReport {
    pub fn new(subject: impl Into<String>) -> Self {
        ValidationReport { subject: subject.into(), ..Default::default() }
    }

    pub fn check(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name, passed, detail: detail.into() });
    }

    pub fn constant(&mut self, name: &'static str, value: f64) {
        self.constants.push((name, value));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn constant_value(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.subject)?;
        for c in &self.checks {
            let tag = if c.passed { "pass" } else { "FAIL" };
            writeln!(f, "  {tag}  {:<24} {}", c.name, c.detail)?;
        }
        for (name, value) in &self.constants {
            writeln!(f, "  {name} = {value:.17e}")?;
        }
        Ok(())
    }
}
