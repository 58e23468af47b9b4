//! Experiment drivers: seeded data generators, baselines, metrics and CSV
//! output. Every output file is a pure function of the config.

pub mod classification;
pub mod generators;
pub mod phase;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use classification::{gen_classification, run_classification, ClassificationConfig};
pub use generators::{random_noise_matrix, NoiseShape};
pub use phase::{run_phase, worst_case_error, PhaseConfig};

use crate::error::{Error, Result};
use crate::io::save_trace;

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "run_manifest.txt";

const CLASSIFICATION_GAPS: &[&str] = &[
    "features come from a planted linear model, not recorded sensor data; absolute accuracies are not comparable to real data",
    "feature_scale, bias_scale and margin shape the synthetic clusters and have no counterpart in real data",
];

const PHASE_GAPS: &[&str] = &[
    "noise_std: scale of the unstructured Gaussian measurement noise is a free choice",
    "sparsity: number of nonzeros in x_true is a free choice",
    "c_shapes/c_scale: acute and obtuse noise matrices come from random sign-constrained Gram matrices (see generators)",
    "baselines start from a spectral initialization; the robust solve starts from the least-squares fit",
];

/// Reads a TOML config; an empty file gives the defaults.
pub fn load_config<C: DeserializeOwned>(path: &Path) -> Result<C> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_manifest<C: Serialize>(out: &Path, kind: &str, cfg: &C, gaps: &[&str]) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "# {kind} run, resolved configuration");
    for gap in gaps {
        let _ = writeln!(text, "# gap: {gap}");
    }
    text.push_str(&toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?);
    Ok(fs::write(out.join(MANIFEST_FILE), text)?)
}

/// Runs the classification experiment and writes `results.csv` and
/// `run_manifest.txt` into `out`.
pub fn classification_experiment(cfg: &ClassificationConfig, out: &Path) -> Result<crate::io::ResultTable> {
    fs::create_dir_all(out)?;
    write_manifest(out, "classification", cfg, CLASSIFICATION_GAPS)?;
    let table = run_classification(cfg)?;
    table.save(&out.join(RESULTS_FILE))?;
    Ok(table)
}

/// Runs the phase retrieval experiment and writes `results.csv`,
/// `run_manifest.txt` and, with `trace`, one `trace_<shape>_<delta>_<trial>.csv`
/// per robust solve.
pub fn phase_experiment(cfg: &PhaseConfig, out: &Path, trace: bool) -> Result<crate::io::ResultTable> {
    fs::create_dir_all(out)?;
    write_manifest(out, "phase retrieval", cfg, PHASE_GAPS)?;
    let output = run_phase(cfg, trace)?;
    output.table.save(&out.join(RESULTS_FILE))?;
    for ((shape, delta, trial), tr) in &output.traces {
        save_trace(tr, &out.join(format!("trace_{shape}_{delta}_{trial}.csv")))?;
    }
    Ok(output.table)
}
