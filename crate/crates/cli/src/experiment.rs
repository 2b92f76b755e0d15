use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{to_json, write_text, Table, SCHEMA_VERSION};

/// What a subcommand produces.
pub struct Report {
    /// `(file stem, table)` pairs, written as `<stem>.csv`.
    pub tables: Vec<(String, Table)>,
    pub summary: serde_json::Value,
    /// Set when a post-hoc check failed; the run still writes its outputs.
    pub failure: Option<String>,
}

pub trait Experiment: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;

    /// Cross-field checks that serde cannot express.
    fn validate(&self) -> Result<(), CliError> {
        Ok(())
    }

    /// Applies `--seed`. Analytic commands have nothing to seed.
    fn set_seed(&mut self, _seed: u64) {}

    fn run(&self) -> Result<Report, CliError>;
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses a config, reporting the path of the offending field.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    de.end().map_err(|e| CliError::Config(format!("trailing input: {e}")))?;
    Ok(value)
}

pub struct Invocation {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

pub fn execute<T: Experiment>(inv: &Invocation) -> Result<(), CliError> {
    let mut cfg: T = match &inv.config {
        Some(p) => load(p)?,
        None => T::default(),
    };
    if let Some(seed) = inv.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    let report = cfg.run()?;
    fs::create_dir_all(&inv.out).map_err(|e| CliError::Io(format!("{}: {e}", inv.out.display())))?;
    write_text(&inv.out.join(format!("{}.config.json", T::NAME)), &to_json(&cfg))?;
    for (stem, table) in &report.tables {
        write_text(&inv.out.join(format!("{stem}.csv")), &table.render())?;
    }
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": T::NAME,
        "passed": report.failure.is_none(),
        "result": report.summary,
    });
    write_text(&inv.out.join(format!("{}.json", T::NAME)), &to_json(&summary))?;
    match report.failure {
        Some(m) => Err(CliError::Assertion(m)),
        None => Ok(()),
    }
}
