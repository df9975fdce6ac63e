//! Report rows and bundles.

use std::fmt;
use std::path::Path;
use std::time::Duration;

use spde_core::io::{fmt_f64, Csv};

/// Where a target value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    PaperFormula,
    DerivedOracle,
    Trivial,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::PaperFormula => "paper-formula",
            Provenance::DerivedOracle => "derived-oracle",
            Provenance::Trivial => "trivial",
        }
    }
}

/// How `empirical` is compared with `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `|empirical - target| ≤ tolerance`.
    Within,
    /// `empirical ≤ target + tolerance`.
    AtMost,
    /// `empirical ≥ target - tolerance`.
    AtLeast,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Within => "within",
            Relation::AtMost => "at-most",
            Relation::AtLeast => "at-least",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub empirical: f64,
    pub target: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub provenance: Provenance,
}

impl Row {
    pub fn new(name: impl Into<String>, empirical: f64, target: f64, tolerance: f64, relation: Relation, provenance: Provenance) -> Self {
        let pass = match relation {
            Relation::Within => (empirical - target).abs() <= tolerance,
            Relation::AtMost => empirical <= target + tolerance,
            Relation::AtLeast => empirical >= target - tolerance,
        };
        Self {
            name: name.into(),
            empirical,
            target,
            tolerance,
            relation,
            pass,
            provenance,
        }
    }

    pub fn within(name: impl Into<String>, empirical: f64, target: f64, tolerance: f64, provenance: Provenance) -> Self {
        Self::new(name, empirical, target, tolerance, Relation::Within, provenance)
    }

    pub fn at_most(name: impl Into<String>, empirical: f64, bound: f64, provenance: Provenance) -> Self {
        Self::new(name, empirical, bound, 0.0, Relation::AtMost, provenance)
    }

    pub fn at_least(name: impl Into<String>, empirical: f64, bound: f64, provenance: Provenance) -> Self {
        Self::new(name, empirical, bound, 0.0, Relation::AtLeast, provenance)
    }

    /// A yes/no fact recorded as `1`/`0` against the expected value.
    pub fn flag(name: impl Into<String>, holds: bool, provenance: Provenance) -> Self {
        Self::within(name, f64::from(u8::from(holds)), 1.0, 0.0, provenance)
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::Within => "≈",
            Relation::AtMost => "≤",
            Relation::AtLeast => "≥",
        };
        write!(
            f,
            "{} {}: {:.6e} {op} {:.6e} (tol {:.3e}, {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.empirical,
            self.target,
            self.tolerance,
            self.provenance.as_str()
        )
    }
}

/// Everything one experiment run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub kind: String,
    /// Canonical configuration text.
    pub config_echo: String,
    pub rows: Vec<Row>,
    /// Additional deterministic outputs as `(file name, contents)`.
    pub extra_files: Vec<(String, String)>,
    pub wall_clock: Duration,
}

impl ReportBundle {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Rows as CSV; deterministic for a given configuration.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["name", "empirical", "target", "tolerance", "relation", "pass", "provenance"]);
        for r in &self.rows {
            csv.row(&[
                r.name.clone(),
                fmt_f64(r.empirical),
                fmt_f64(r.target),
                fmt_f64(r.tolerance),
                r.relation.as_str().to_string(),
                r.pass.to_string(),
                r.provenance.as_str().to_string(),
            ]);
        }
        csv.into_string()
    }

    /// Human-readable bundle: config echo, rows, timing and versions.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# configuration\n");
        out.push_str(&self.config_echo);
        out.push_str("# results\n");
        for r in &self.rows {
            out.push_str(&format!("{r}\n"));
        }
        out.push_str(&format!(
            "# overall {}\n# wall-clock {:.3} s\n# spde-cli {} / spde-core {}\n",
            if self.pass() { "PASS" } else { "FAIL" },
            self.wall_clock.as_secs_f64(),
            env!("CARGO_PKG_VERSION"),
            spde_core::VERSION
        ));
        out
    }
}

/// Writes `report.csv`, `bundle.txt` and the extra files into `dir`.
pub fn write_outputs(bundle: &ReportBundle, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), bundle.to_csv())?;
    std::fs::write(dir.join("bundle.txt"), bundle.to_text())?;
    for (name, contents) in &bundle.extra_files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}
