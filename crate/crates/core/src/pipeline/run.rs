//! Experiment drivers: forward tables, Bayesian inversion runs, the
//! deterministic baseline, knot-count trials and sensitivity ladders.
//!
//! Every run derives its own seed from the scenario's master seed and a
//! stable tag, emits its tables into a dedicated directory and returns an
//! in-memory record mirroring the manifest on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::bayes::{log_posterior, ForwardModel, Likelihood, UniformPrior};
use crate::demc::{self, PosteriorSummary, PressureGrid};
use crate::fem::{
    build_mesh, hoop_force_at, net_pressure, reaction_pressure, solve, LiningModel, Mesh,
};
use crate::field::PressureField;
use crate::metrics::{index_of_agreement, monitoring_angles_deg, rmse, MetricReport};
use crate::response::{
    convergence, select_baselines, synthesize_observations, BaselineSet, ObservationSet,
};

use super::io::{self, MetricRow, RunManifest};
use super::optimize::{bounded_least_squares, OptimizerResult};
use super::scenario::{CaseSpec, Scenario};
use super::PipelineError;

/// R̂ threshold under which a run counts as converged.
pub const RHAT_THRESHOLD: f64 = 1.2;

/// Deterministic sub-seed for a tagged part of a scenario run.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then a splitmix64 finalizer over the combination.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Everything resolved for one case: the inversion-side model and data plus
/// the truth-side generator.
pub struct CaseContext {
    pub case: CaseSpec,
    pub run_seed: u64,
    pub observation_seed: u64,
    pub inversion_model: LiningModel,
    pub inversion_mesh: Mesh,
    pub baselines: BaselineSet,
    /// Case observations with the likelihood's assumed σ̄ already applied;
    /// `None` for a prior-only case (no readings, no force).
    pub observations: Option<ObservationSet>,
    pub truth_model: LiningModel,
    pub truth_mesh: Mesh,
    pub truth_field: PressureField,
}

impl CaseContext {
    pub fn prepare(scenario: &Scenario, label: &str) -> Result<Self, PipelineError> {
        scenario.validate()?;
        let case = scenario.case(label)?.clone();
        let truth_model = scenario.truth_model();
        let truth_mesh = build_mesh(&truth_model)?;
        let truth_field = scenario.truth.resolve_field()?;
        let inversion_model = scenario.lining.clone();
        let inversion_mesh = build_mesh(&inversion_model)?;

        let observation_seed = derive_seed(scenario.seed, "observations");
        let run_seed = derive_seed(scenario.seed, &format!("case:{label}"));

        // The observation layout is the inversion mesh's full baseline set,
        // read off the finer truth mesh at the same angles.
        let full_coarse = BaselineSet::full(&inversion_mesh);
        let full_on_truth = select_baselines(&BaselineSet::full(&truth_mesh), full_coarse.len())?;

        let force_plan = if case.include_force {
            let clean = solve(&truth_model, &truth_mesh, &truth_field)?;
            let clean_force =
                hoop_force_at(&clean, &truth_mesh, scenario.observations.force_angle_deg)?;
            Some((
                scenario.observations.force_angle_deg,
                scenario.observations.force_noise_relative * clean_force.abs(),
            ))
        } else {
            None
        };
        let full_obs = synthesize_observations(
            &truth_field,
            &truth_model,
            &truth_mesh,
            &full_on_truth,
            scenario.observations.noise_std_mm,
            force_plan,
            observation_seed,
        )?;

        let (baselines, observations) = if case.baseline_count == 0 && !case.include_force {
            (BaselineSet::empty(), None)
        } else if case.baseline_count == 0 {
            let obs = ObservationSet {
                baseline_angles_deg: vec![],
                convergence_mm: vec![],
                sigma_mm: scenario.likelihood.sigma_mm,
                force: full_obs.force.clone(),
                seed: observation_seed,
            };
            (BaselineSet::empty(), Some(obs))
        } else {
            let mut obs = full_obs.subset(case.baseline_count)?;
            obs.sigma_mm = scenario.likelihood.sigma_mm;
            (select_baselines(&full_coarse, case.baseline_count)?, Some(obs))
        };

        Ok(Self {
            case,
            run_seed,
            observation_seed,
            inversion_model,
            inversion_mesh,
            baselines,
            observations,
            truth_model,
            truth_mesh,
            truth_field,
        })
    }

    fn force_angle(&self) -> Option<f64> {
        self.observations.as_ref().and_then(|o| o.force.as_ref()).map(|f| f.angle_deg)
    }
}

/// Forward-run tables for the truth field on the truth-side mesh.
pub struct ForwardTables {
    pub out_dir: PathBuf,
    pub convergence_mm: Vec<f64>,
    pub crown_force_kn: f64,
    pub files: BTreeMap<String, String>,
}

/// Solves the truth field and emits displacement, convergence and hoop-force
/// tables under `out_dir/forward/`.
pub fn run_forward(scenario: &Scenario, out_dir: &Path) -> Result<ForwardTables, PipelineError> {
    scenario.validate()?;
    let truth_model = scenario.truth_model();
    let truth_mesh = build_mesh(&truth_model)?;
    let truth_field = scenario.truth.resolve_field()?;
    let result = solve(&truth_model, &truth_mesh, &truth_field)?;

    let coarse_half = scenario.lining.element_count / 2;
    let baselines = select_baselines(&BaselineSet::full(&truth_mesh), coarse_half)?;
    let conv = convergence(&result, &baselines);
    let crown = hoop_force_at(&result, &truth_mesh, scenario.observations.force_angle_deg)?;

    let dir = out_dir.join("forward");
    std::fs::create_dir_all(&dir)?;
    io::write_displacements(&dir.join("displacements.csv"), &truth_mesh, &result)?;
    io::write_convergence_table(&dir.join("convergence.csv"), &baselines, &conv)?;
    io::write_hoop_profile(&dir.join("hoop_force.csv"), &truth_mesh, &result)?;
    let files: BTreeMap<String, String> = [
        ("displacements", "displacements.csv"),
        ("convergence", "convergence.csv"),
        ("hoop_force", "hoop_force.csv"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    Ok(ForwardTables { out_dir: dir, convergence_mm: conv, crown_force_kn: crown, files })
}

/// Synthesizes and writes the observation tables for one case without
/// running the inversion.
pub fn synthesize_case(
    scenario: &Scenario,
    label: &str,
    out_dir: &Path,
) -> Result<PathBuf, PipelineError> {
    let ctx = CaseContext::prepare(scenario, label)?;
    let dir = out_dir.join(label);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("observations.csv");
    match &ctx.observations {
        Some(obs) => io::write_observations(&path, obs)?,
        None => std::fs::write(&path, "kind,angle_deg,value,sigma\n")?,
    }
    Ok(path)
}

/// Outcome of one Bayesian inversion run.
pub struct RunRecord {
    pub case: String,
    pub run_seed: u64,
    pub summary: PosteriorSummary,
    pub truth_total_curve: Vec<f64>,
    pub net_pm_curve: Option<Vec<f64>>,
    pub net_truth_curve: Option<Vec<f64>>,
    pub metrics: Vec<MetricRow>,
    pub rhat_max: f64,
    pub rhat_converged: bool,
    pub acceptance_rate: f64,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

impl RunRecord {
    pub fn metric(&self, target: &str) -> Option<&MetricReport> {
        self.metrics.iter().find(|m| m.target == target).map(|m| &m.report)
    }

    /// The headline fit metric: net when the scenario inverts net pressure,
    /// total otherwise.
    pub fn headline_metric(&self) -> &MetricReport {
        self.metric("net").or_else(|| self.metric("total")).expect("total metrics always present")
    }
}

/// Net pressure of `field` on `model`, sampled at the monitoring angles.
fn net_curve_at_monitoring(
    field: &PressureField,
    model: &LiningModel,
    mesh: &Mesh,
    angles: &[f64],
) -> Result<Vec<f64>, PipelineError> {
    let result = solve(model, mesh, field)?;
    let reaction = reaction_pressure(&result, model, mesh);
    let net = net_pressure(field, &reaction, mesh);
    angles
        .iter()
        .map(|&a| Ok(net[mesh.node_index_at(a)?]))
        .collect()
}

/// Runs the DE-MC inversion for one case and emits its artifact directory.
pub fn run_inversion(
    scenario: &Scenario,
    label: &str,
    out_dir: &Path,
) -> Result<RunRecord, PipelineError> {
    let total_clock = Instant::now();
    let ctx = CaseContext::prepare(scenario, label)?;
    let n = scenario.prior.knot_count;
    let prior = UniformPrior::new(scenario.prior.q_min_kpa, scenario.prior.q_max_kpa, n)?;

    let linearize_clock = Instant::now();
    let likelihood = match &ctx.observations {
        Some(obs) => {
            let direct = ForwardModel::Direct {
                model: ctx.inversion_model.clone(),
                mesh: ctx.inversion_mesh.clone(),
                baselines: ctx.baselines.clone(),
                force_angle_deg: ctx.force_angle(),
            };
            let linear = direct.linearize(n)?;
            Some(Likelihood::new(obs.clone(), ForwardModel::Linear(linear))?)
        }
        None => None,
    };
    let linearize_s = linearize_clock.elapsed().as_secs_f64();

    let mut config = scenario.sampler.clone();
    config.seed = ctx.run_seed;
    config.validate(n)?;
    let jump_rate = config.resolved_jump_rate(n);
    let jitter_std = config.resolved_jitter_std(prior.width());

    let sampling_clock = Instant::now();
    let prior_for_eval = prior.clone();
    let posterior = move |q: &[f64]| match &likelihood {
        Some(lik) => log_posterior(q, &prior_for_eval, lik)
            .expect("posterior evaluation cannot fail on a validated linear context"),
        None => crate::bayes::log_prior(q, &prior_for_eval)
            .expect("prior evaluation cannot fail on matched dimensions"),
    };
    let ensemble = demc::run(posterior, &prior, &config)?;
    let sampling_s = sampling_clock.elapsed().as_secs_f64();

    let rhat_max = ensemble.max_gelman_rubin()?;
    let rhat_converged = rhat_max < RHAT_THRESHOLD;

    let summary_clock = Instant::now();
    let angles = monitoring_angles_deg();
    let grid = PressureGrid {
        min_kpa: scenario.prior.q_min_kpa,
        max_kpa: scenario.prior.q_max_kpa,
        bins: scenario.metrics.pressure_bins,
    };
    let summary = demc::summarize(&ensemble, &angles, &grid)?;
    let summary_s = summary_clock.elapsed().as_secs_f64();

    let truth_total_curve = ctx.truth_field.evaluate_many(&angles);
    let mut metrics =
        vec![MetricRow { target: "total".into(), report: MetricReport::new(&summary.mean_kpa, &truth_total_curve, &summary)? }];

    let (net_pm_curve, net_truth_curve) = if scenario.invert_net {
        let pm_field = PressureField::new(summary.mean_knots.clone())?;
        let pm_net =
            net_curve_at_monitoring(&pm_field, &ctx.inversion_model, &ctx.inversion_mesh, &angles)?;
        let truth_net =
            net_curve_at_monitoring(&ctx.truth_field, &ctx.truth_model, &ctx.truth_mesh, &angles)?;
        metrics.push(MetricRow {
            target: "net".into(),
            report: MetricReport::new(&pm_net, &truth_net, &summary)?,
        });
        (Some(pm_net), Some(truth_net))
    } else {
        (None, None)
    };

    // Emit the artifact directory.
    let dir = out_dir.join(label);
    std::fs::create_dir_all(&dir)?;
    let mut files = BTreeMap::new();
    io::write_samples(&dir.join("samples.csv"), &ensemble)?;
    files.insert("samples".into(), "samples.csv".into());
    io::write_summary(&dir.join("summary.csv"), &summary)?;
    files.insert("summary".into(), "summary.csv".into());
    io::write_density(&dir.join("density.csv"), &summary)?;
    files.insert("density".into(), "density.csv".into());
    match &ctx.observations {
        Some(obs) => io::write_observations(&dir.join("observations.csv"), obs)?,
        None => std::fs::write(dir.join("observations.csv"), "kind,angle_deg,value,sigma\n")?,
    }
    files.insert("observations".into(), "observations.csv".into());
    io::write_diagnostics(&dir.join("diagnostics.csv"), &ensemble.rhat_trace)?;
    files.insert("diagnostics".into(), "diagnostics.csv".into());
    io::write_acceptance_log(&dir.join("acceptance.csv"), &ensemble.acceptance, config.chains)?;
    files.insert("acceptance".into(), "acceptance.csv".into());
    io::write_metrics(&dir.join("metrics.csv"), &metrics)?;
    files.insert("metrics".into(), "metrics.csv".into());
    io::write_knot_table(&dir.join("truth_knots.csv"), ctx.truth_field.knots(), "q_kpa")?;
    files.insert("truth_knots".into(), "truth_knots.csv".into());
    if let (Some(pm_net), Some(truth_net)) = (&net_pm_curve, &net_truth_curve) {
        let pm_field = PressureField::new(summary.mean_knots.clone())?;
        let pm_result = solve(&ctx.inversion_model, &ctx.inversion_mesh, &pm_field)?;
        let reaction_nodes = reaction_pressure(&pm_result, &ctx.inversion_model, &ctx.inversion_mesh);
        let reaction: Vec<f64> = angles
            .iter()
            .map(|&a| ctx.inversion_mesh.node_index_at(a).map(|i| reaction_nodes[i]))
            .collect::<Result<_, _>>()?;
        let total_pm: Vec<f64> = angles.iter().map(|&a| pm_field.evaluate(a)).collect();
        io::write_net_pressure(
            &dir.join("net_pressure.csv"),
            &angles,
            &total_pm,
            &reaction,
            pm_net,
            Some(truth_net),
        )?;
        files.insert("net_pressure".into(), "net_pressure.csv".into());
    }

    let mut timings_s = BTreeMap::new();
    timings_s.insert("linearize".into(), linearize_s);
    timings_s.insert("sampling".into(), sampling_s);
    timings_s.insert("summary".into(), summary_s);
    timings_s.insert("total".into(), total_clock.elapsed().as_secs_f64());

    let manifest = RunManifest {
        scenario_name: scenario.name.clone(),
        case: label.to_string(),
        master_seed: scenario.seed,
        run_seed: ctx.run_seed,
        observation_seed: ctx.observation_seed,
        dimension: n,
        chains: config.chains,
        iterations: config.iterations,
        burn_in: config.burn_in,
        thin: config.thin,
        jump_rate,
        jitter_std,
        grid: grid.clone(),
        invert_net: scenario.invert_net,
        rhat_max,
        rhat_converged,
        acceptance_rate: ensemble.acceptance_rate(),
        metrics: metrics.clone(),
        files: files.clone(),
        timings_s,
    };
    io::write_manifest(&dir.join("manifest.json"), &manifest)?;

    Ok(RunRecord {
        case: label.to_string(),
        run_seed: ctx.run_seed,
        summary,
        truth_total_curve,
        net_pm_curve,
        net_truth_curve,
        metrics,
        rhat_max,
        rhat_converged,
        acceptance_rate: ensemble.acceptance_rate(),
        manifest,
        out_dir: dir,
    })
}

/// Deterministic bounded least-squares solution for one case.
pub struct BaselineRecord {
    pub case: String,
    pub optimizer: OptimizerResult,
    pub curve: Vec<f64>,
    pub ia: f64,
    pub rmse_kpa: f64,
    pub out_dir: PathBuf,
}

pub fn deterministic_baseline(
    scenario: &Scenario,
    label: &str,
    out_dir: &Path,
) -> Result<BaselineRecord, PipelineError> {
    let ctx = CaseContext::prepare(scenario, label)?;
    let observations = ctx.observations.clone().ok_or_else(|| {
        PipelineError::InvalidScenario(format!(
            "case '{label}' has no observations; the deterministic baseline needs data"
        ))
    })?;
    let n = scenario.prior.knot_count;
    let direct = ForwardModel::Direct {
        model: ctx.inversion_model.clone(),
        mesh: ctx.inversion_mesh.clone(),
        baselines: ctx.baselines.clone(),
        force_angle_deg: ctx.force_angle(),
    };
    let linear = direct.linearize(n)?;
    let optimizer = bounded_least_squares(
        &linear,
        &observations,
        scenario.prior.q_min_kpa,
        scenario.prior.q_max_kpa,
        8,
        5000,
        1e-6,
        derive_seed(scenario.seed, &format!("baseline:{label}")),
    )?;

    let angles = monitoring_angles_deg();
    let field = PressureField::new(optimizer.knots.clone())?;
    let curve = field.evaluate_many(&angles);
    let truth_curve = ctx.truth_field.evaluate_many(&angles);
    let ia = index_of_agreement(&curve, &truth_curve)?.value;
    let rmse_kpa = rmse(&curve, &truth_curve)?;

    let dir = out_dir.join(label);
    std::fs::create_dir_all(&dir)?;
    io::write_knot_table(&dir.join("baseline_solution.csv"), &optimizer.knots, "q_kpa")?;

    Ok(BaselineRecord { case: label.to_string(), optimizer, curve, ia, rmse_kpa, out_dir: dir })
}

/// One knot-count trial entry.
pub struct KnotTrialEntry {
    pub knot_count: usize,
    pub chains: usize,
    pub auto_raised: bool,
    pub pm_curve: Vec<f64>,
    pub rmse_vs_previous_kpa: Option<f64>,
    pub stabilized: bool,
}

pub struct KnotTrialReport {
    pub case: String,
    pub tolerance_kpa: f64,
    pub entries: Vec<KnotTrialEntry>,
    /// First knot count whose posterior mean moved less than the tolerance
    /// from its predecessor's.
    pub stabilized_at: Option<usize>,
}

/// Repeats the inversion while growing the knot count, reporting when the
/// posterior mean stops changing. Chain counts below the 2n floor are raised
/// automatically and flagged.
pub fn knot_count_trial(
    scenario: &Scenario,
    label: &str,
    counts: &[usize],
    tolerance_kpa: f64,
    out_dir: &Path,
) -> Result<KnotTrialReport, PipelineError> {
    if counts.is_empty() {
        return Err(PipelineError::InvalidScenario("trial counts must be non-empty".into()));
    }
    if counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PipelineError::InvalidScenario("trial counts must be strictly ascending".into()));
    }
    let mut entries: Vec<KnotTrialEntry> = Vec::with_capacity(counts.len());
    let mut stabilized_at = None;
    for &n in counts {
        let mut trial = scenario.clone();
        trial.prior.knot_count = n;
        let floor = (2 * n).max(3);
        let auto_raised = trial.sampler.chains < floor;
        if auto_raised {
            trial.sampler.chains = floor;
        }
        let record = run_inversion(&trial, label, &out_dir.join(format!("trial-n{n}")))?;
        let pm_curve = record.summary.mean_kpa.clone();
        let rmse_vs_previous_kpa = match entries.last() {
            Some(prev) => Some(rmse(&pm_curve, &prev.pm_curve)?),
            None => None,
        };
        let stabilized = rmse_vs_previous_kpa.map(|r| r < tolerance_kpa).unwrap_or(false);
        if stabilized && stabilized_at.is_none() {
            stabilized_at = Some(n);
        }
        entries.push(KnotTrialEntry {
            knot_count: n,
            chains: trial.sampler.chains,
            auto_raised,
            pm_curve,
            rmse_vs_previous_kpa,
            stabilized,
        });
    }

    let mut table = String::from("knot_count,chains,auto_raised,rmse_vs_previous_kpa,stabilized\n");
    for e in &entries {
        use std::fmt::Write as _;
        let rmse_text = e.rmse_vs_previous_kpa.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            table,
            "{},{},{},{},{}",
            e.knot_count, e.chains, e.auto_raised, rmse_text, e.stabilized
        );
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("trial_report.csv"), table)?;

    Ok(KnotTrialReport {
        case: label.to_string(),
        tolerance_kpa,
        entries,
        stabilized_at,
    })
}

/// One ladder run of the sensitivity presets.
pub struct PresetOutcome {
    pub tag: String,
    pub parameter: f64,
    pub record: RunRecord,
}

pub struct PresetReport {
    pub case: String,
    pub noise: Vec<PresetOutcome>,
    pub spring: Vec<PresetOutcome>,
    pub out_dir: PathBuf,
}

/// Runs the configured noise and soil-spring ladders on the preset case.
///
/// Noise runs re-synthesize the observations at each level with the same
/// seed, so the perturbation direction is held fixed while its amplitude
/// grows. Spring runs re-invert the *same* observations with a different
/// inversion-side spring stiffness; the truth side keeps the original one.
pub fn sensitivity_presets(
    scenario: &Scenario,
    out_dir: &Path,
) -> Result<PresetReport, PipelineError> {
    let plan = scenario
        .presets
        .clone()
        .ok_or_else(|| PipelineError::InvalidScenario("scenario defines no [presets] block".into()))?;
    let dir = out_dir.join("presets");
    std::fs::create_dir_all(&dir)?;

    let mut noise = Vec::new();
    for (i, &sigma) in plan.noise_ladder_mm.iter().enumerate() {
        let mut variant = scenario.clone();
        variant.observations.noise_std_mm = sigma;
        let tag = format!("noise-{}", i + 1);
        let record = run_inversion(&variant, &plan.case, &dir.join(&tag))?;
        noise.push(PresetOutcome { tag, parameter: sigma, record });
    }

    let truth_kf = scenario
        .truth
        .foundation_stiffness
        .unwrap_or(scenario.lining.foundation_stiffness);
    let mut spring = Vec::new();
    for (i, &kf) in plan.spring_ladder.iter().enumerate() {
        let mut variant = scenario.clone();
        variant.truth.foundation_stiffness = Some(truth_kf);
        variant.lining.foundation_stiffness = kf;
        let tag = format!("spring-{}", i + 1);
        let record = run_inversion(&variant, &plan.case, &dir.join(&tag))?;
        spring.push(PresetOutcome { tag, parameter: kf, record });
    }

    let mut table = String::from("ladder,tag,parameter,case,ia,rmse_kpa,std_kpa\n");
    for (ladder, outcomes) in [("noise", &noise), ("spring", &spring)] {
        for o in outcomes {
            use std::fmt::Write as _;
            let m = o.record.headline_metric();
            let _ = writeln!(
                table,
                "{ladder},{},{},{},{},{},{}",
                o.tag, o.parameter, o.record.case, m.ia, m.rmse_kpa, m.std_kpa
            );
        }
    }
    std::fs::write(dir.join("comparison.csv"), table)?;

    Ok(PresetReport { case: plan.case, noise, spring, out_dir: dir })
}

/// Re-derived view of a stored run, used by the report command.
pub struct RunReport {
    pub manifest: RunManifest,
    /// Whether re-summarizing the stored samples reproduces `summary.csv`
    /// byte for byte.
    pub summary_consistent: bool,
    pub rhat_max_recomputed: f64,
}

/// Reloads a run directory, re-summarizes its samples and checks the stored
/// summary and diagnostics against the recomputation.
pub fn report_run(run_dir: &Path) -> Result<RunReport, PipelineError> {
    let manifest = io::read_run_manifest(&run_dir.join("manifest.json"))?;
    let samples_name = manifest
        .files
        .get("samples")
        .ok_or_else(|| PipelineError::Manifest("manifest lists no samples file".into()))?;
    let (dimension, chains, iterations, data) = io::read_samples(&run_dir.join(samples_name))?;
    if dimension != manifest.dimension || chains != manifest.chains {
        return Err(PipelineError::Manifest(format!(
            "samples shape {dimension}×{chains} disagrees with manifest {}×{}",
            manifest.dimension, manifest.chains
        )));
    }
    let ensemble =
        crate::demc::ChainEnsemble::from_records(dimension, chains, manifest.burn_in, iterations, data)?;
    let summary = demc::summarize(&ensemble, &monitoring_angles_deg(), &manifest.grid)?;
    let rendered = io::render_summary(&summary);
    let stored_name = manifest
        .files
        .get("summary")
        .ok_or_else(|| PipelineError::Manifest("manifest lists no summary file".into()))?;
    let stored = std::fs::read_to_string(run_dir.join(stored_name))?;
    let rhat_max_recomputed = ensemble.max_gelman_rubin()?;
    Ok(RunReport { manifest, summary_consistent: rendered == stored, rhat_max_recomputed })
}
