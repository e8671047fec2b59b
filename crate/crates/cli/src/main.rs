//! Command-line driver: runs the forward model, synthesizes observations,
//! inverts pressures, and manages experiment batches, all from a scenario
//! file and a master seed.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ringload::pipeline::{
    self, report_run, run_forward, run_inversion, sensitivity_presets, synthesize_case, Scenario,
};

#[derive(Parser)]
#[command(name = "ringload", version, about = "Earth-pressure identification on tunnel linings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to runs/<scenario name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the sampler's chain count.
    #[arg(long)]
    chains: Option<usize>,
    /// Override the sampler's iteration count.
    #[arg(long)]
    iterations: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<(Scenario, PathBuf)> {
        let mut scenario = Scenario::from_path(&self.config)
            .with_context(|| format!("loading scenario {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            scenario.seed = seed;
        }
        if let Some(chains) = self.chains {
            scenario.sampler.chains = chains;
        }
        if let Some(iterations) = self.iterations {
            scenario.sampler.iterations = iterations;
        }
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&scenario.name));
        Ok((scenario, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the truth pressure field and emit response tables.
    Forward {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Synthesize the noisy observation tables for one case.
    Synthesize {
        #[command(flatten)]
        common: CommonArgs,
        /// Case label from the scenario.
        #[arg(long)]
        case: String,
    },
    /// Run the Bayesian inversion for one case.
    Invert {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        case: String,
        /// Add the hoop-force observation regardless of the case definition.
        #[arg(long, conflicts_with = "without_force")]
        with_force: bool,
        /// Drop the hoop-force observation regardless of the case definition.
        #[arg(long)]
        without_force: bool,
    },
    /// Deterministic bounded least-squares inversion of one case.
    Baseline {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        case: String,
    },
    /// Repeat the inversion over a ladder of knot counts.
    TrialKnots {
        #[command(flatten)]
        common: CommonArgs,
        /// Case label; defaults to the scenario's [trials] case.
        #[arg(long)]
        case: Option<String>,
        /// Ascending knot counts, comma separated; defaults to [trials].
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        /// Stabilization tolerance on successive posterior means, kPa.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Run the scenario's noise and soil-spring sensitivity ladders.
    Presets {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-check a stored run directory against its manifest.
    Report {
        /// Run directory holding manifest.json.
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn override_force(scenario: &mut Scenario, label: &str, include_force: bool) -> Result<()> {
    let case = scenario
        .cases
        .iter_mut()
        .find(|c| c.label == label)
        .with_context(|| format!("unknown case label '{label}'"))?;
    case.include_force = include_force;
    Ok(())
}

fn print_record(record: &pipeline::RunRecord) {
    println!("case {}  (seed {})", record.case, record.run_seed);
    for row in &record.metrics {
        println!(
            "  {:<5}  IA {:.4}  RMSE {:.1} kPa  Std {:.1} kPa",
            row.target, row.report.ia, row.report.rmse_kpa, row.report.std_kpa
        );
    }
    println!(
        "  max R-hat {:.4}  acceptance {:.3}  -> {}",
        record.rhat_max,
        record.acceptance_rate,
        record.out_dir.display()
    );
    if !record.rhat_converged {
        eprintln!(
            "  warning: R-hat {:.3} above {} — chains not converged, summary kept anyway",
            record.rhat_max,
            pipeline::RHAT_THRESHOLD
        );
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Forward { common } => {
            let (scenario, out) = common.load()?;
            let tables = run_forward(&scenario, &out)?;
            println!(
                "forward tables in {} ({} baselines, crown force {:.1} kN)",
                tables.out_dir.display(),
                tables.convergence_mm.len(),
                tables.crown_force_kn
            );
        }
        Command::Synthesize { common, case } => {
            let (scenario, out) = common.load()?;
            let path = synthesize_case(&scenario, &case, &out)?;
            println!("observations written to {}", path.display());
        }
        Command::Invert { common, case, with_force, without_force } => {
            let (mut scenario, out) = common.load()?;
            if with_force {
                override_force(&mut scenario, &case, true)?;
            }
            if without_force {
                override_force(&mut scenario, &case, false)?;
            }
            let record = run_inversion(&scenario, &case, &out)?;
            print_record(&record);
        }
        Command::Baseline { common, case } => {
            let (scenario, out) = common.load()?;
            let record = pipeline::deterministic_baseline(&scenario, &case, &out)?;
            println!(
                "case {}  IA {:.4}  RMSE {:.1} kPa  weighted residual {:.4}  converged {}",
                record.case, record.ia, record.rmse_kpa, record.optimizer.weighted_residual,
                record.optimizer.converged
            );
            println!("  -> {}", record.out_dir.display());
        }
        Command::TrialKnots { common, case, counts, tolerance } => {
            let (scenario, out) = common.load()?;
            let plan = scenario.trials.clone();
            let label = match (case, &plan) {
                (Some(label), _) => label,
                (None, Some(p)) => p.case.clone(),
                (None, None) => bail!("pass --case or define a [trials] block in the scenario"),
            };
            let counts = if counts.is_empty() {
                plan.as_ref().map(|p| p.counts.clone()).unwrap_or_default()
            } else {
                counts
            };
            if counts.is_empty() {
                bail!("pass --counts or define [trials] counts in the scenario");
            }
            let tol = tolerance
                .or(plan.as_ref().map(|p| p.stabilization_rmse_kpa))
                .unwrap_or(25.0);
            let report =
                pipeline::knot_count_trial(&scenario, &label, &counts, tol, &out.join("trials"))?;
            for e in &report.entries {
                let delta = e
                    .rmse_vs_previous_kpa
                    .map(|r| format!("{r:.2} kPa vs previous"))
                    .unwrap_or_else(|| "first trial".into());
                let raised = if e.auto_raised { " (chains auto-raised)" } else { "" };
                println!("n = {:>3}  chains {}{}  {}", e.knot_count, e.chains, raised, delta);
            }
            match report.stabilized_at {
                Some(n) => println!("stabilized at n = {n} (tolerance {tol} kPa)"),
                None => println!("no stabilization within tolerance {tol} kPa"),
            }
        }
        Command::Presets { common } => {
            let (scenario, out) = common.load()?;
            let report = sensitivity_presets(&scenario, &out)?;
            for o in report.noise.iter() {
                let m = o.record.headline_metric();
                println!(
                    "noise σ = {:.4} mm  IA {:.4}  RMSE {:.1} kPa  Std {:.1} kPa",
                    o.parameter, m.ia, m.rmse_kpa, m.std_kpa
                );
            }
            for o in report.spring.iter() {
                let m = o.record.headline_metric();
                println!(
                    "spring k_f = {:>6.0} kN/m³  IA {:.4}  RMSE {:.1} kPa  Std {:.1} kPa",
                    o.parameter, m.ia, m.rmse_kpa, m.std_kpa
                );
            }
            println!("tables in {}", report.out_dir.display());
        }
        Command::Report { run_dir } => {
            let report = report_run(&run_dir)?;
            println!(
                "scenario '{}' case '{}'  seed {}  ({} chains × {} iterations)",
                report.manifest.scenario_name,
                report.manifest.case,
                report.manifest.master_seed,
                report.manifest.chains,
                report.manifest.iterations
            );
            for row in &report.manifest.metrics {
                println!(
                    "  {:<5}  IA {:.4}  RMSE {:.1} kPa  Std {:.1} kPa",
                    row.target, row.report.ia, row.report.rmse_kpa, row.report.std_kpa
                );
            }
            println!(
                "  stored max R-hat {:.4}, recomputed {:.4}",
                report.manifest.rhat_max, report.rhat_max_recomputed
            );
            if report.summary_consistent {
                println!("  summary.csv reproduces from samples.csv byte for byte");
            } else {
                bail!("summary.csv does NOT match a re-summarization of samples.csv");
            }
        }
    }
    Ok(())
}
