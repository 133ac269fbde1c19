//! JSON and CSV output for sampling runs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chains::ChainResult;
use crate::diagnostics::{summarize, RunSummary};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
    pub divergences: usize,
    pub mean_accept: f64,
    pub total_leapfrogs: u64,
    pub samples: Vec<Vec<f64>>,
    pub depths: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_nanos: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub model: String,
    pub dim: usize,
    pub seed: u64,
    pub num_warmup: usize,
    pub num_samples: usize,
    pub summary: RunSummary,
    pub chains: Vec<ChainReport>,
}

impl RunReport {
    /// Assemble a report. With `include_timing` false the output depends
    /// only on the inputs, so repeated runs serialize identically.
    pub fn new(
        model: &str,
        seed: u64,
        num_warmup: usize,
        results: &[ChainResult],
        include_timing: bool,
    ) -> Result<Self> {
        let mut summary = summarize(results)?;
        if !include_timing {
            summary.strip_timing();
        }
        let chains = results
            .iter()
            .map(|r| ChainReport {
                chain: r.chain,
                step_size: r.step_size,
                inv_mass: r.inv_mass.clone(),
                divergences: r.divergences(),
                mean_accept: r.mean_accept(),
                total_leapfrogs: r.total_leapfrogs,
                samples: r.samples.clone(),
                depths: r.stats.iter().map(|s| s.depth_reached).collect(),
                wall_nanos: include_timing.then_some(r.wall_nanos),
            })
            .collect();
        Ok(RunReport {
            schema_version: SCHEMA_VERSION,
            model: model.to_string(),
            dim: summary.dims.len(),
            seed,
            num_warmup,
            num_samples: results.first().map_or(0, |r| r.samples.len()),
            summary,
            chains,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Draws as CSV: header `chain,x0,x1,...`, then one row per draw.
/// Floats use the shortest representation that parses back exactly.
pub fn write_samples_csv<W: Write>(out: W, results: &[ChainResult]) -> Result<()> {
    let dim = results
        .first()
        .and_then(|r| r.samples.first())
        .map_or(0, Vec::len);
    let mut writer = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("chain".to_string())
        .chain((0..dim).map(|d| format!("x{d}")))
        .collect();
    writer.write_record(&header)?;
    for r in results {
        for row in &r.samples {
            let record: Vec<String> = std::iter::once(r.chain.to_string())
                .chain(row.iter().map(|v| format!("{v:?}")))
                .collect();
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(OutputFormat::Json),
            Some("csv") => Ok(OutputFormat::Csv),
            _ => Err(Error::InvalidConfig(format!(
                "output path {} must end in .json or .csv",
                path.display()
            ))),
        }
    }
}
