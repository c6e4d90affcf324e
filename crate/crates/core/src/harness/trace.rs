use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_error, HarnessError, Preset};
use crate::deform::{deform, DeformParams, RotationFit, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub rotation_fit: RotationFit,
    pub iterations: usize,
    pub converged: bool,
    pub final_total: f64,
    pub final_arap: f64,
    pub final_smooth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOutput {
    pub files: Vec<PathBuf>,
    pub summaries: Vec<TraceSummary>,
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

/// Runs `preset` once per rotation fit and writes
/// `<preset>-edge_only.csv`, `<preset>-full.csv` and `<preset>-summary.json`
/// into `dir`.
pub fn run_trace(preset: Preset, params: &DeformParams, dir: &Path) -> Result<TraceOutput, HarnessError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let problem = preset.build()?;
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (fit, suffix) in [(RotationFit::EdgeOnly, "edge_only"), (RotationFit::Full, "full")] {
        let params = DeformParams {
            rotation_fit: fit,
            ..*params
        };
        let result = deform(&problem.mesh, &problem.constraints, &params)?;
        let path = dir.join(format!("{}-{suffix}.csv", preset.name()));
        write_trace_csv(&path, &result.trace)?;
        files.push(path);
        summaries.push(TraceSummary {
            rotation_fit: fit,
            iterations: result.iterations,
            converged: result.converged,
            final_total: result.energies.total,
            final_arap: result.energies.arap,
            final_smooth: result.energies.smooth,
        });
    }
    let path = dir.join(format!("{}-summary.json", preset.name()));
    let file = fs::File::create(&path).map_err(io_error(&path))?;
    serde_json::to_writer_pretty(file, &summaries)?;
    files.push(path);
    Ok(TraceOutput { files, summaries })
}
