//! Output plumbing shared by the subcommands.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Print a JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Also write the rows as CSV to this path.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

/// Seed and worker count for Monte Carlo commands. The worker count is left
/// out of reports so that output does not depend on it.
#[derive(Debug, Clone, Args, Serialize)]
pub struct McArgs {
    /// Random seed; one is generated and reported when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo (0 = all cores).
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub workers: usize,
}

impl McArgs {
    /// Fixes the seed, generating and announcing one if needed.
    pub fn resolve(&mut self) -> refwalk::McConfig {
        let seed = *self.seed.get_or_insert_with(|| {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        });
        refwalk::McConfig::new(seed).with_workers(self.workers)
    }
}

#[derive(Serialize)]
pub struct Report<'a, C: Serialize, B: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a C,
    #[serde(flatten)]
    pub body: B,
}

pub fn print_json<C: Serialize, B: Serialize>(command: &str, config: &C, body: B) -> Result<()> {
    let report = Report { command, version: refwalk_version(), config, body };
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

pub fn refwalk_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn write_file(path: &Path, fill: impl FnOnce(&mut File) -> refwalk::Result<()>) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    fill(&mut f)?;
    Ok(())
}

/// Left-aligned text table.
pub fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        println!("{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
}

pub fn print_pairs(pairs: &[(&str, String)]) {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in pairs {
        println!("{k:<width$}  {v}");
    }
}

pub fn sci(x: f64) -> String {
    format!("{x:.6e}")
}
