use ringload::demc::SamplerConfig;
use ringload::fem::LiningModel;
use ringload::pipeline::*;

fn soft_scenario() -> Scenario {
    Scenario {
        name: "soft".into(),
        seed: 90125,
        description: String::new(),
        invert_net: false,
        lining: LiningModel {
            diameter_m: 6.2,
            axial_stiffness_kn: 1.225e7,
            bending_stiffness_knm2: 1.0e3,
            rigidity_reduction: 1.0,
            joint_rotation_stiffness: 0.0,
            joint_angles_deg: vec![],
            foundation_stiffness: 5000.0,
            element_count: 32,
        },
        truth: TruthSpec {
            preset: None,
            knots: Some(vec![420.0, 150.0, 300.0, 90.0, 380.0, 210.0, 60.0, 330.0]),
            mesh_refinement: 2,
            foundation_stiffness: None,
        },
        observations: ObservationPlan { noise_std_mm: 0.1, force_angle_deg: 0.0, force_noise_relative: 0.01 },
        likelihood: LikelihoodSettings { sigma_mm: 1.0 },
        prior: PriorSettings { knot_count: 8, q_min_kpa: 0.0, q_max_kpa: 3000.0 },
        sampler: SamplerConfig {
            chains: 16, iterations: 3000, jump_rate: None, jitter_std: Some(0.25),
            burn_in: 0.5, thin: 1, seed: 0, diagnostic_stride: None,
        },
        metrics: MetricsSettings { pressure_bins: 40 },
        cases: vec![CaseSpec { label: "rich".into(), baseline_count: 16, include_force: true }],
        presets: None,
        trials: None,
    }
}

fn main() {
    let s = soft_scenario();
    let out = std::env::temp_dir().join("ringload-trial-smoke");
    let _ = std::fs::remove_dir_all(&out);
    let report = knot_count_trial(&s, "rich", &[4, 8, 16], 30.0, &out).unwrap();
    for e in &report.entries {
        println!("n {:>2} chains {:>2} raised {} rmse_prev {:?} stabilized {}",
            e.knot_count, e.chains, e.auto_raised, e.rmse_vs_previous_kpa, e.stabilized);
    }
    println!("stabilized_at: {:?}", report.stabilized_at);
}
