//! The four subcommands. Each returns the process exit code on success.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use sepspec::clt::{Contour, LssModel, OUTER_SCALE};
use sepspec::func::Polynomial;
use sepspec::lsd::SpectralSystem;
use sepspec::montecarlo::run_plan;
use sepspec::whitenoise::{run_test, Centering, MomentSource, TestConfig};

use crate::config::{ModelConfig, PlanConfig};
use crate::error::CliError;
use crate::input::read_matrix;
use crate::output::{fmt_sig, table_rows, write_csv, RunManifest, TABLE_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 3;

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::data(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| CliError::usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TestOptions {
    pub q: usize,
    pub level: f64,
    pub header: bool,
    pub transpose: bool,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub centering: Centering,
    pub alpha_x: f64,
    pub kappa_x: f64,
}

pub fn cmd_test(input: &Path, opts: &TestOptions, seed: u64) -> Result<i32, CliError> {
    let moment_source = match (opts.m1, opts.m2) {
        (Some(m1), Some(m2)) => MomentSource::Known { m1, m2 },
        (None, None) => MomentSource::PlugIn,
        _ => return Err(CliError::usage("--m1 and --m2 must be given together")),
    };
    let data = read_matrix(input, opts.header, opts.transpose)?;
    let cfg = TestConfig {
        q: opts.q,
        level: opts.level,
        moment_source,
        centering: opts.centering,
        alpha_x: opts.alpha_x,
        kappa_x: opts.kappa_x,
    };
    cfg.validate(data.ncols()).map_err(|e| CliError::usage(e.to_string()))?;
    let report = run_test(&data, &cfg)?;

    let bytes = std::fs::read(input)?;
    let digest_input = json!({ "input_sha256": hex::encode(Sha256::digest(&bytes)), "options": opts });
    let manifest = RunManifest::new("test", &digest_input, seed);
    print_json(&json!({ "manifest": manifest, "report": report }))?;
    Ok(if report.decision { EXIT_REJECT } else { EXIT_OK })
}

/// `lo:hi:count`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::usage(format!("grid `{text}` must look like lo:hi:count"));
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite()) || count == 0 || (count > 1 && !(lo < hi)) {
        return Err(bad());
    }
    Ok(linspace(lo, hi, count))
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

pub fn cmd_lsd(config: &Path, grid: Option<&str>, vmin: f64, out: Option<&Path>, seed: u64) -> Result<i32, CliError> {
    let model = ModelConfig::load(config)?;
    if !(vmin > 0.0) {
        return Err(CliError::usage("--vmin must be positive"));
    }
    let system = SpectralSystem::new(model.h1()?, model.h2()?, model.c())?;
    let grid = match grid {
        Some(g) => parse_grid(g)?,
        None => {
            let s = sepspec::lsd::SupportEstimate::from_measures(&system.h1, &system.h2, system.c)?;
            linspace(s.x_l, s.x_r, 201)
        }
    };
    let density = system.density(&grid, vmin)?;
    let manifest = RunManifest::new("lsd", &json!({ "model": model, "grid": grid, "vmin": vmin }), seed);
    let rows: Vec<Vec<String>> = density.iter().map(|&(x, f)| vec![fmt_sig(x), fmt_sig(f)]).collect();
    write_csv(sink(out)?, &manifest, &["x", "density"], &rows)?;
    Ok(EXIT_OK)
}

pub fn cmd_clt_params(config: &Path, f: &str, nodes: usize, v0: f64, seed: u64) -> Result<i32, CliError> {
    let model = ModelConfig::load(config)?;
    let poly: Polynomial = f.parse().map_err(|e: sepspec::Error| CliError::usage(e.to_string()))?;
    let law = model.law.build()?;
    let lss = LssModel::with_law(model.h1()?, model.h2()?, model.c(), &law)?;
    let support = lss.support()?;
    let inner = Contour::around(&support, v0, nodes)?;
    let outer = inner.scaled(OUTER_SCALE)?;
    let moments = lss.moments(&[&poly], &inner, &outer)?;

    let digest_input = json!({ "model": model, "f": poly, "nodes": nodes, "v0": v0 });
    let manifest = RunManifest::new("clt-params", &digest_input, seed);
    print_json(&json!({
        "manifest": manifest,
        "f": poly.to_string(),
        "c": model.c(),
        "alpha_x": law.alpha_x,
        "kappa_x": law.kappa_x,
        "support": support,
        "mean": moments.mean[0],
        "variance": moments.cov[0][0],
        "max_imag": moments.max_imag,
    }))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

pub fn cmd_simulate(
    config: &Path,
    out: Option<&PathBuf>,
    format: TableFormat,
    seed: Option<u64>,
    level: Option<f64>,
) -> Result<i32, CliError> {
    let plan = PlanConfig::load(config)?.build(seed, level)?;
    let table = run_plan(&plan)?;
    let manifest = RunManifest::new("simulate", &plan, plan.base_seed);
    let out = out.map(PathBuf::as_path);
    match format {
        TableFormat::Csv => write_csv(sink(out)?, &manifest, &TABLE_HEADER, &table_rows(&table))?,
        TableFormat::Json => {
            let mut w = sink(out)?;
            serde_json::to_writer_pretty(&mut w, &json!({ "manifest": manifest, "table": table }))
                .map_err(|e| CliError::data(e.to_string()))?;
            writeln!(w)?;
        }
    }
    let failed: Vec<&str> = table.rows.iter().filter_map(|r| r.error.as_deref()).collect();
    if !failed.is_empty() {
        for e in failed {
            eprintln!("sepspec: cell failed: {e}");
        }
        return Err(CliError::data("some cells failed; see the error column"));
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
