//! Result emission: a JSON verdict per run plus CSV tables, every file
//! carrying the effective config so results are self-describing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use ergodic_counts::error::{Error, Result};

/// One named check with its verdict.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub check: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: Vec<(String, Value)>,
}

impl CheckOutcome {
    pub fn new(check: &str, pass: bool, value: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            pass,
            value,
            tolerance,
            detail: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.detail.push((key.into(), value));
        self
    }

    fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("check".into(), json!(self.check));
        obj.insert("pass".into(), json!(self.pass));
        obj.insert("value".into(), json!(self.value));
        obj.insert("tolerance".into(), json!(self.tolerance));
        for (k, v) in &self.detail {
            obj.insert(k.clone(), v.clone());
        }
        Value::Object(obj)
    }
}

/// One row of the tabular results CSV.
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub statistic: String,
    pub parameters: String,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Collected output of one CLI run.
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub checks: Vec<CheckOutcome>,
    pub rows: Vec<ResultRow>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            command: command.into(),
            seed,
            config,
            checks: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Print one line per check and write `verdict.json` (plus
    /// `results.csv` when rows were collected).
    pub fn emit(&self, out_dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(out_dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
        for check in &self.checks {
            println!(
                "{}: {} (value {:.6e}, tolerance {:.6e})",
                check.check,
                if check.pass { "PASS" } else { "FAIL" },
                check.value,
                check.tolerance
            );
        }
        let verdict = json!({
            "command": self.command,
            "seed": self.seed,
            "pass": self.all_pass(),
            "checks": Value::Array(self.checks.iter().map(|c| c.to_json()).collect()),
            "config": self.config,
        });
        let path = out_dir.join("verdict.json");
        write_text(
            &path,
            &format!("{}\n", serde_json::to_string_pretty(&verdict).unwrap()),
        )?;
        if !self.rows.is_empty() {
            self.write_rows(&out_dir.join("results.csv"))?;
        }
        Ok(path)
    }

    fn write_rows(&self, path: &Path) -> Result<()> {
        let mut text = format!(
            "# config={}\n",
            serde_json::to_string(&self.config).unwrap()
        );
        text.push_str("statistic,parameters,value,std_error,n_samples\n");
        for row in &self.rows {
            text.push_str(&format!(
                "{},{},{:.16e},{:.16e},{}\n",
                row.statistic, row.parameters, row.value, row.std_error, row.n_samples
            ));
        }
        write_text(path, &text)
    }
}

/// Two-column CSV (spectra, autocovariance tables) with the config header.
pub fn write_pairs_csv(
    path: &Path,
    config: &Value,
    col_a: &str,
    col_b: &str,
    rows: &[(f64, f64)],
) -> Result<()> {
    let mut text = format!("# config={}\n", serde_json::to_string(config).unwrap());
    text.push_str(&format!("{col_a},{col_b}\n"));
    for &(a, b) in rows {
        text.push_str(&format!("{a:.16e},{b:.16e}\n"));
    }
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
