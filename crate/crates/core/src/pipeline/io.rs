//! Emission and re-ingestion of the run artifacts: comma-separated tables
//! plus a JSON manifest. All numbers are written with Rust's shortest
//! round-trip float formatting, so re-running a case reproduces the files
//! byte for byte and re-reading them loses nothing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demc::{ChainEnsemble, PosteriorSummary, PressureGrid};
use crate::fem::Mesh;
use crate::metrics::MetricReport;
use crate::response::{BaselineSet, ObservationSet};

use super::PipelineError;

fn table_error(path: &Path, message: impl Into<String>) -> PipelineError {
    PipelineError::Table { path: path.display().to_string(), message: message.into() }
}

pub(super) fn write_samples(path: &Path, ensemble: &ChainEnsemble) -> Result<(), PipelineError> {
    use std::io::Write as _;
    let file = fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write!(out, "iteration,chain")?;
    for k in 1..=ensemble.dimension() {
        write!(out, ",q{k}")?;
    }
    writeln!(out)?;
    let mut line = String::new();
    for (row, &iteration) in ensemble.recorded_iterations().iter().enumerate() {
        for chain in 0..ensemble.chain_count() {
            line.clear();
            let _ = write!(line, "{iteration},{chain}");
            for v in ensemble.state(row, chain) {
                let _ = write!(line, ",{v}");
            }
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a samples table back into record-major history data.
pub fn read_samples(path: &Path) -> Result<(usize, usize, Vec<usize>, Vec<f64>), PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| table_error(path, "empty samples file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[0] != "iteration" || columns[1] != "chain" {
        return Err(table_error(path, "unexpected samples header"));
    }
    let dimension = columns.len() - 2;
    let mut iterations = Vec::new();
    let mut data = Vec::new();
    let mut chains = 0usize;
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let iter: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| table_error(path, format!("bad iteration on data row {ln}")))?;
        let chain: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| table_error(path, format!("bad chain on data row {ln}")))?;
        if chain == 0 {
            iterations.push(iter);
        } else if *iterations.last().unwrap_or(&usize::MAX) != iter {
            return Err(table_error(path, format!("row {ln}: chains out of order")));
        }
        chains = chains.max(chain + 1);
        let mut got = 0usize;
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| table_error(path, format!("bad value on data row {ln}")))?;
            data.push(v);
            got += 1;
        }
        if got != dimension {
            return Err(table_error(path, format!("row {ln}: expected {dimension} values, got {got}")));
        }
    }
    if chains == 0 || data.len() != iterations.len() * chains * dimension {
        return Err(table_error(path, "ragged samples table"));
    }
    Ok((dimension, chains, iterations, data))
}

pub(super) fn render_summary(summary: &PosteriorSummary) -> String {
    let mut out = String::from("angle_deg,mean_kpa,std_kpa,p05_kpa,p50_kpa,p95_kpa\n");
    for (k, angle) in summary.angles_deg.iter().enumerate() {
        let _ = writeln!(
            out,
            "{angle},{},{},{},{},{}",
            summary.mean_kpa[k],
            summary.std_kpa[k],
            summary.p05_kpa[k],
            summary.p50_kpa[k],
            summary.p95_kpa[k]
        );
    }
    out
}

pub(super) fn write_summary(path: &Path, summary: &PosteriorSummary) -> Result<(), PipelineError> {
    fs::write(path, render_summary(summary))?;
    Ok(())
}

pub(super) fn render_density(summary: &PosteriorSummary) -> String {
    let centers = summary.grid.bin_centers();
    let mut out = String::from("angle_deg,pressure_bin_kpa,probability\n");
    for (k, angle) in summary.angles_deg.iter().enumerate() {
        for (b, center) in centers.iter().enumerate() {
            let _ = writeln!(out, "{angle},{center},{}", summary.density[k][b]);
        }
    }
    out
}

pub(super) fn write_density(path: &Path, summary: &PosteriorSummary) -> Result<(), PipelineError> {
    fs::write(path, render_density(summary))?;
    Ok(())
}

/// Observations table: one `convergence_mm` row per baseline in reading
/// order, then the optional `force_kn` row.
pub(super) fn write_observations(path: &Path, obs: &ObservationSet) -> Result<(), PipelineError> {
    let mut out = String::from("kind,angle_deg,value,sigma\n");
    for (angle, value) in obs.baseline_angles_deg.iter().zip(&obs.convergence_mm) {
        let _ = writeln!(out, "convergence_mm,{angle},{value},{}", obs.sigma_mm);
    }
    if let Some(force) = &obs.force {
        let _ = writeln!(out, "force_kn,{},{},{}", force.angle_deg, force.value_kn, force.sigma_kn);
    }
    fs::write(path, out)?;
    Ok(())
}

pub(super) fn write_diagnostics(
    path: &Path,
    trace: &[(usize, Vec<f64>)],
) -> Result<(), PipelineError> {
    let mut out = String::from("iteration,parameter,r_hat\n");
    for (iteration, rhats) in trace {
        for (p, r) in rhats.iter().enumerate() {
            let _ = writeln!(out, "{iteration},{},{r}", p + 1);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub(super) fn write_acceptance_log(
    path: &Path,
    acceptance: &[(usize, usize)],
    chains: usize,
) -> Result<(), PipelineError> {
    let mut out = String::from("iteration,accepted,rate\n");
    for (iteration, accepted) in acceptance {
        let _ = writeln!(out, "{iteration},{accepted},{}", *accepted as f64 / chains as f64);
    }
    fs::write(path, out)?;
    Ok(())
}

/// One scored comparison row in `metrics.csv` (and in the manifest):
/// `target` is `total` or `net`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub target: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

pub(super) fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<(), PipelineError> {
    let mut out = String::from(
        "target,ia,ia_degenerate,rmse_kpa,std_kpa,monitoring_points,ia_threshold,meets_threshold\n",
    );
    for row in rows {
        let r = &row.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.target,
            r.ia,
            r.ia_degenerate,
            r.rmse_kpa,
            r.std_kpa,
            r.monitoring_points,
            r.ia_threshold,
            r.meets_threshold
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub(super) fn write_net_pressure(
    path: &Path,
    angles_deg: &[f64],
    total_pm: &[f64],
    reaction: &[f64],
    net_pm: &[f64],
    net_truth: Option<&[f64]>,
) -> Result<(), PipelineError> {
    let mut out = String::from("angle_deg,total_pm_kpa,reaction_kpa,net_pm_kpa");
    if net_truth.is_some() {
        out.push_str(",net_truth_kpa");
    }
    out.push('\n');
    for (k, angle) in angles_deg.iter().enumerate() {
        let _ = write!(out, "{angle},{},{},{}", total_pm[k], reaction[k], net_pm[k]);
        if let Some(t) = net_truth {
            let _ = write!(out, ",{}", t[k]);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub(super) fn write_displacements(
    path: &Path,
    mesh: &Mesh,
    result: &crate::fem::SolveResult,
) -> Result<(), PipelineError> {
    let mut out = String::from("node,angle_deg,ux_m,uy_m,rotation_rad\n");
    for i in 0..mesh.node_count() {
        let [ux, uy] = result.node_translation(i);
        let _ = writeln!(
            out,
            "{},{},{ux},{uy},{}",
            i + 1,
            mesh.node_angle_deg(i),
            result.node_rotation(i)
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub(super) fn write_convergence_table(
    path: &Path,
    baselines: &BaselineSet,
    values_mm: &[f64],
) -> Result<(), PipelineError> {
    let mut out = String::from("baseline,angle_deg,convergence_mm\n");
    for (b, (angle, value)) in baselines.angles_deg().iter().zip(values_mm).enumerate() {
        let _ = writeln!(out, "{},{angle},{value}", b + 1);
    }
    fs::write(path, out)?;
    Ok(())
}

pub(super) fn write_hoop_profile(
    path: &Path,
    mesh: &Mesh,
    result: &crate::fem::SolveResult,
) -> Result<(), PipelineError> {
    let mut out = String::from("angle_deg,force_kn\n");
    for i in 0..mesh.node_count() {
        let angle = mesh.node_angle_deg(i);
        let force = crate::fem::hoop_force_at(result, mesh, angle)?;
        let _ = writeln!(out, "{angle},{force}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub(super) fn write_knot_table(
    path: &Path,
    knots: &[f64],
    header: &str,
) -> Result<(), PipelineError> {
    let spacing = 360.0 / knots.len() as f64;
    let mut out = format!("knot,angle_deg,{header}\n");
    for (k, v) in knots.iter().enumerate() {
        let _ = writeln!(out, "{},{},{v}", k + 1, k as f64 * spacing);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Machine-readable record of one run: resolved settings, seeds, emitted
/// files, headline diagnostics and timings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario_name: String,
    pub case: String,
    pub master_seed: u64,
    pub run_seed: u64,
    pub observation_seed: u64,
    pub dimension: usize,
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: f64,
    pub thin: usize,
    pub jump_rate: f64,
    pub jitter_std: f64,
    pub grid: PressureGrid,
    pub invert_net: bool,
    pub rhat_max: f64,
    pub rhat_converged: bool,
    pub acceptance_rate: f64,
    pub metrics: Vec<MetricRow>,
    pub files: BTreeMap<String, String>,
    pub timings_s: BTreeMap<String, f64>,
}

pub(super) fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| PipelineError::Manifest(e.to_string()))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_run_manifest(path: &Path) -> Result<RunManifest, PipelineError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(e.to_string()))
}
