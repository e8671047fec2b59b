use ringload::demc::SamplerConfig;
use ringload::fem::LiningModel;
use ringload::field::PressureField;
use ringload::metrics::monitoring_angles_deg;
use ringload::pipeline::*;

fn soft_scenario(n: usize) -> Scenario {
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
        prior: PriorSettings { knot_count: n, q_min_kpa: 0.0, q_max_kpa: 3000.0 },
        sampler: SamplerConfig {
            chains: (2*n).max(16), iterations: 4000, jump_rate: None, jitter_std: Some(0.25),
            burn_in: 0.5, thin: 1, seed: 0, diagnostic_stride: None,
        },
        metrics: MetricsSettings { pressure_bins: 40 },
        cases: vec![CaseSpec { label: "rich".into(), baseline_count: 16, include_force: true }],
        presets: None,
        trials: None,
    }
}

fn main() {
    let out = std::env::temp_dir().join("ringload-trial-smoke2");
    let _ = std::fs::remove_dir_all(&out);
    let angles = monitoring_angles_deg();
    let truth = PressureField::new(vec![420.0, 150.0, 300.0, 90.0, 380.0, 210.0, 60.0, 330.0]).unwrap();
    let tcurve = truth.evaluate_many(&angles);
    for n in [4usize, 8, 16] {
        let s = soft_scenario(n);
        let rec = run_inversion(&s, "rich", &out.join(format!("n{n}"))).unwrap();
        let rmse_truth = ringload::metrics::rmse(&rec.summary.mean_kpa, &tcurve).unwrap();
        println!("n {:>2}: rhat {:.3} acc {:.3} IA {:.4} rmse_vs_truth {:7.2} Std {:7.2}",
            n, rec.rhat_max, rec.acceptance_rate, rec.metric("total").unwrap().ia, rmse_truth,
            rec.metric("total").unwrap().std_kpa);
    }
}
