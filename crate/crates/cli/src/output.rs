use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use supstop_core::distribution::FORMAT_VERSION;
use supstop_core::ModelParams;

use crate::CliError;

pub const BUILD_ID: &str = env!("SUPSTOP_BUILD_ID");

/// Wrapper carried by every JSON artifact.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub format_version: u32,
    pub build: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub params: Option<ModelParams>,
    pub result: T,
}

pub fn json<T: Serialize>(command: &str, seed: Option<u64>, params: Option<ModelParams>, result: T) -> Result<String, CliError> {
    let env = Envelope { format_version: FORMAT_VERSION, build: BUILD_ID, command, seed, params, result };
    let mut text = serde_json::to_string_pretty(&env).map_err(supstop_core::Error::from)?;
    text.push('\n');
    Ok(text)
}

/// CSV with `#` provenance lines ahead of the header row.
pub struct Csv {
    head: String,
    columns: String,
    body: String,
}

impl Csv {
    pub fn new(command: &str, seed: Option<u64>, params: Option<&ModelParams>, columns: &[&str]) -> Self {
        let mut head = format!("# format_version={FORMAT_VERSION} build={BUILD_ID} command={command}\n");
        if let Some(seed) = seed {
            let _ = writeln!(head, "# seed={seed}");
        }
        if let Some(p) = params {
            let _ = writeln!(head, "# alpha={} c={} p={} T={}", p.alpha, p.c, p.p, p.horizon);
        }
        Csv { head, columns: columns.join(","), body: String::new() }
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.head, "# {line}");
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    pub fn finish(self) -> String {
        format!("{}{}\n{}", self.head, self.columns, self.body)
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Write to `path`, or stdout when `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(supstop_core::Error::from)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(supstop_core::Error::from)?;
        }
    }
    Ok(())
}
