use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::Args;

/// Output flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// File for the command's CSV (or JSON for `cost`) output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the generation timestamp so reruns are byte-identical.
    #[arg(long)]
    pub reproducible: bool,
}

/// One embedded assertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured value against the bound it was held to.
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub summary: Vec<String>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for line in &self.summary {
            let _ = writeln!(s, "{line}");
        }
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "[{tag}] {}: {}", c.name, c.detail);
        }
        s
    }
}

/// Rows of strings under a header, written as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CSV text. Unless `reproducible`, a `# generated_at_unix=` comment
    /// line precedes the header.
    pub fn to_csv(&self, reproducible: bool) -> Result<String> {
        let mut buf = Vec::new();
        if !reproducible {
            writeln!(buf, "# generated_at_unix={}", unix_time())?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(buf)?)
    }

    pub fn write(&self, path: &Path, reproducible: bool) -> Result<()> {
        let text = self.to_csv(reproducible)?;
        File::create(path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .with_context(|| format!("writing {}", path.display()))
    }
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `table` to `--out` when given.
pub fn emit(table: &Table, out: &OutputArgs, report: &mut Report) -> Result<()> {
    if let Some(path) = &out.out {
        table.write(path, out.reproducible)?;
        report.line(format!(
            "wrote {} rows to {}",
            table.rows.len(),
            path.display()
        ));
    }
    Ok(())
}

/// Argument parser for integers that must be at least 1.
pub fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Upper confidence bound `p + zσ` for a binomial rate with `n` trials.
pub fn binomial_upper(p: f64, n: u64, z: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    p + z * (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.to_csv(true).unwrap(), "a,b\n1,\"x,y\"\n");
        let stamped = t.to_csv(false).unwrap();
        assert!(stamped.starts_with("# generated_at_unix="));
        assert!(stamped.ends_with("a,b\n1,\"x,y\"\n"));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        assert!((linear_slope(&pts).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(linear_slope(&pts[..1]), None);
    }

    #[test]
    fn report_status() {
        let mut r = Report::default();
        r.check("a", true, "ok");
        assert!(r.passed());
        r.check("b", false, "3 > 2");
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        assert!(r.render().contains("[FAIL] b: 3 > 2"));
    }
}
