//! Declarative scenario files: everything needed to reproduce an experiment
//! from one TOML document and a master seed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demc::SamplerConfig;
use crate::fem::LiningModel;
use crate::field::PressureField;

use super::PipelineError;

/// Ground-truth pressure and how to generate data from it.
///
/// The truth is evaluated through a forward model meshed `mesh_refinement`
/// times finer than the inversion mesh, so synthetic observations never come
/// from the exact model being inverted. `foundation_stiffness` optionally
/// pins the truth-side soil stiffness when the inversion side is varied.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub knots: Option<Vec<f64>>,
    #[serde(default = "default_refinement")]
    pub mesh_refinement: usize,
    #[serde(default)]
    pub foundation_stiffness: Option<f64>,
}

fn default_refinement() -> usize {
    2
}

impl TruthSpec {
    pub fn resolve_field(&self) -> Result<PressureField, PipelineError> {
        match (&self.knots, &self.preset) {
            (Some(knots), None) => Ok(PressureField::new(knots.clone())?),
            (None, Some(name)) => truth_preset(name),
            _ => Err(PipelineError::InvalidScenario(
                "truth must set exactly one of `knots` or `preset`".into(),
            )),
        }
    }
}

/// Named truth fields used by the bundled scenarios.
fn truth_preset(name: &str) -> Result<PressureField, PipelineError> {
    match name {
        "uniform-200" => Ok(PressureField::uniform(8, 200.0).expect("valid knot count")),
        // Smooth asymmetric distribution: overburden-dominated with a
        // left/right imbalance, well inside the [0, 3000] kPa prior box.
        "asymmetric-surcharge" => {
            let n = 36;
            let knots = (0..n)
                .map(|i| {
                    let t = (i as f64 * 360.0 / n as f64).to_radians();
                    480.0 + 200.0 * (2.0 * t).cos()
                        + 90.0 * t.sin()
                        + 50.0 * (3.0 * t + 40.0f64.to_radians()).sin()
                })
                .collect();
            Ok(PressureField::new(knots).expect("valid knot count"))
        }
        other => Err(PipelineError::UnknownPreset(other.to_string())),
    }
}

/// How synthetic observations are produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationPlan {
    /// Standard deviation of the Gaussian noise added to the synthetic
    /// convergence readings, mm.
    pub noise_std_mm: f64,
    /// Where the optional hoop-force gauge sits (must be a mesh node).
    #[serde(default)]
    pub force_angle_deg: f64,
    /// Force noise and assumed force precision, as a fraction of the clean
    /// reading.
    #[serde(default = "default_force_noise")]
    pub force_noise_relative: f64,
}

fn default_force_noise() -> f64 {
    0.01
}

/// Assumed measurement precision entering the likelihood (σ̄).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodSettings {
    #[serde(default = "default_sigma_mm")]
    pub sigma_mm: f64,
}

fn default_sigma_mm() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSettings {
    pub knot_count: usize,
    pub q_min_kpa: f64,
    pub q_max_kpa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSettings {
    /// Bins of the emitted posterior density grid over the prior box.
    #[serde(default = "default_bins")]
    pub pressure_bins: usize,
}

fn default_bins() -> usize {
    60
}

impl Default for MetricsSettings {
    fn default() -> Self {
        Self { pressure_bins: default_bins() }
    }
}

/// One observation configuration: how many evenly spaced baselines are read
/// and whether the hoop-force reading joins them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub label: String,
    /// Number of convergence readings; 0 runs prior-only.
    pub baseline_count: usize,
    #[serde(default)]
    pub include_force: bool,
}

/// Sensitivity ladders run by `sensitivity_presets`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetPlan {
    /// Case label providing the data layout for every ladder run.
    pub case: String,
    /// Synthesis noise levels, mm.
    #[serde(default)]
    pub noise_ladder_mm: Vec<f64>,
    /// Inversion-side soil spring stiffnesses, kN/m³.
    #[serde(default)]
    pub spring_ladder: Vec<f64>,
}

/// Knot-count trial settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialPlan {
    pub case: String,
    pub counts: Vec<usize>,
    /// Successive posterior means closer than this flag stabilization, kPa.
    #[serde(default = "default_trial_tolerance")]
    pub stabilization_rmse_kpa: f64,
}

fn default_trial_tolerance() -> f64 {
    25.0
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    #[serde(default)]
    pub description: String,
    /// Invert net pressure (total minus soil reaction) instead of reporting
    /// total pressure only.
    #[serde(default)]
    pub invert_net: bool,
    pub lining: LiningModel,
    pub truth: TruthSpec,
    pub observations: ObservationPlan,
    #[serde(default = "default_likelihood")]
    pub likelihood: LikelihoodSettings,
    pub prior: PriorSettings,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub metrics: MetricsSettings,
    #[serde(default)]
    pub cases: Vec<CaseSpec>,
    #[serde(default)]
    pub presets: Option<PresetPlan>,
    #[serde(default)]
    pub trials: Option<TrialPlan>,
}

fn default_likelihood() -> LikelihoodSettings {
    LikelihoodSettings { sigma_mm: default_sigma_mm() }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self, PipelineError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn case(&self, label: &str) -> Result<&CaseSpec, PipelineError> {
        self.cases
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| PipelineError::UnknownCase(label.to_string()))
    }

    /// The truth-side forward model: same lining on a mesh refined
    /// `mesh_refinement` times, with the optional truth spring stiffness.
    pub fn truth_model(&self) -> LiningModel {
        let mut model = self.lining.clone();
        model.element_count *= self.truth.mesh_refinement;
        if let Some(kf) = self.truth.foundation_stiffness {
            model.foundation_stiffness = kf;
        }
        model
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.lining.validate()?;
        self.truth_model().validate()?;
        self.truth.resolve_field()?;
        if self.truth.mesh_refinement == 0 {
            return Err(PipelineError::InvalidScenario("mesh_refinement must be at least 1".into()));
        }
        if self.prior.knot_count < 2 {
            return Err(PipelineError::InvalidScenario(format!(
                "prior knot_count must be at least 2, got {}",
                self.prior.knot_count
            )));
        }
        if !(self.prior.q_min_kpa >= 0.0) {
            return Err(PipelineError::InvalidScenario(format!(
                "prior lower bound must be non-negative (soil exerts no traction), got {}",
                self.prior.q_min_kpa
            )));
        }
        if !(self.prior.q_min_kpa < self.prior.q_max_kpa) {
            return Err(PipelineError::InvalidScenario(format!(
                "prior bounds must satisfy q_min < q_max, got [{}, {}]",
                self.prior.q_min_kpa, self.prior.q_max_kpa
            )));
        }
        if !(self.observations.noise_std_mm >= 0.0) {
            return Err(PipelineError::InvalidScenario(
                "observation noise level must be non-negative".into(),
            ));
        }
        if !(self.likelihood.sigma_mm > 0.0) {
            return Err(PipelineError::InvalidScenario(
                "likelihood sigma_mm must be positive".into(),
            ));
        }
        if self.metrics.pressure_bins == 0 {
            return Err(PipelineError::InvalidScenario("pressure_bins must be positive".into()));
        }

        let half = self.lining.element_count / 2;
        for case in &self.cases {
            if case.baseline_count > 0 && half % case.baseline_count != 0 {
                return Err(PipelineError::InvalidScenario(format!(
                    "case '{}': {} baselines do not evenly subsample the {} available",
                    case.label, case.baseline_count, half
                )));
            }
        }
        // The force gauge and the monitoring angles must hit mesh nodes on
        // both the inversion and the truth mesh.
        let spacing = 360.0 / self.lining.element_count as f64;
        let on_node = |angle: f64| {
            let pos = angle.rem_euclid(360.0) / spacing;
            (pos - pos.round()).abs() < 1e-6
        };
        if !on_node(self.observations.force_angle_deg) {
            return Err(PipelineError::InvalidScenario(format!(
                "force angle {}° does not sit on an inversion mesh node",
                self.observations.force_angle_deg
            )));
        }
        if self.invert_net && self.lining.element_count % crate::metrics::MONITORING_POINTS != 0 {
            return Err(PipelineError::InvalidScenario(format!(
                "net-pressure extraction samples the {} monitoring angles at mesh nodes; \
                 element_count must be a multiple of {}, got {}",
                crate::metrics::MONITORING_POINTS,
                crate::metrics::MONITORING_POINTS,
                self.lining.element_count
            )));
        }
        if let Some(plan) = &self.presets {
            self.case(&plan.case)?;
            for &sigma in &plan.noise_ladder_mm {
                if !(sigma >= 0.0) {
                    return Err(PipelineError::InvalidScenario(
                        "noise ladder entries must be non-negative".into(),
                    ));
                }
            }
            for &kf in &plan.spring_ladder {
                if !(kf >= 0.0) {
                    return Err(PipelineError::InvalidScenario(
                        "spring ladder entries must be non-negative".into(),
                    ));
                }
            }
        }
        if let Some(plan) = &self.trials {
            self.case(&plan.case)?;
            if plan.counts.is_empty() {
                return Err(PipelineError::InvalidScenario("trial counts must be non-empty".into()));
            }
            if plan.counts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(PipelineError::InvalidScenario(
                    "trial counts must be strictly ascending".into(),
                ));
            }
        }
        Ok(())
    }
}
