//! Observables: convergence deformations on diametral baselines, the crown
//! hoop force, and synthetic noise-corrupted observation sets.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{hoop_force_at, solve, FemError, LiningModel, Mesh, SolveResult};
use crate::field::PressureField;

#[derive(Debug, Error)]
pub enum ResponseError {
    #[error("baseline count {requested} does not evenly subsample the {available} available baselines")]
    BadBaselineCount { requested: usize, available: usize },
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Measurement chords between diametrically opposite nodes.
///
/// The full set of an `N_e`-element mesh holds `N_e/2` baselines; baseline
/// `b` (0-based) joins node `b` to node `b + N_e/2` and is labeled by the
/// angle of its first node. Baseline 0 is the vertical crown-to-invert chord.
#[derive(Debug, Clone)]
pub struct BaselineSet {
    pairs: Vec<(usize, usize)>,
    angles_deg: Vec<f64>,
    directions: Vec<[f64; 2]>,
}

impl BaselineSet {
    /// No baselines at all (prior-only and force-only configurations).
    pub fn empty() -> Self {
        Self { pairs: vec![], angles_deg: vec![], directions: vec![] }
    }

    /// Every diametral chord of the mesh, ordered by angle from the crown.
    pub fn full(mesh: &Mesh) -> Self {
        let n = mesh.node_count();
        let half = n / 2;
        let mut pairs = Vec::with_capacity(half);
        let mut angles_deg = Vec::with_capacity(half);
        let mut directions = Vec::with_capacity(half);
        for b in 0..half {
            let (i, j) = (b, b + half);
            let [xi, yi] = mesh.node_position(i);
            let [xj, yj] = mesh.node_position(j);
            let len = ((xj - xi).powi(2) + (yj - yi).powi(2)).sqrt();
            pairs.push((i, j));
            angles_deg.push(mesh.node_angle_deg(i));
            directions.push([(xj - xi) / len, (yj - yi) / len]);
        }
        Self { pairs, angles_deg, directions }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn node_pair(&self, b: usize) -> (usize, usize) {
        self.pairs[b]
    }
}

/// Evenly spaced subset of `count` baselines starting at the crown chord;
/// e.g. 2 out of 100 picks the chords at 0° and 90°.
pub fn select_baselines(all: &BaselineSet, count: usize) -> Result<BaselineSet, ResponseError> {
    let available = all.len();
    if count == 0 || available % count != 0 {
        return Err(ResponseError::BadBaselineCount { requested: count, available });
    }
    let stride = available / count;
    let idx: Vec<usize> = (0..count).map(|k| k * stride).collect();
    Ok(BaselineSet {
        pairs: idx.iter().map(|&k| all.pairs[k]).collect(),
        angles_deg: idx.iter().map(|&k| all.angles_deg[k]).collect(),
        directions: idx.iter().map(|&k| all.directions[k]).collect(),
    })
}

/// Convergence deformation of each baseline, mm, shortening positive:
/// the change in chord length from the nodal displacements projected on the
/// chord direction.
pub fn convergence(result: &SolveResult, baselines: &BaselineSet) -> Vec<f64> {
    convergence_of_displacements(result.displacements(), baselines)
}

/// Same as [`convergence`] for a raw global displacement vector
/// (3 DOFs per node), useful when replaying stored or derived solutions.
pub fn convergence_of_displacements(
    displacements: &nalgebra::DVector<f64>,
    baselines: &BaselineSet,
) -> Vec<f64> {
    baselines
        .pairs
        .iter()
        .zip(&baselines.directions)
        .map(|(&(i, j), dir)| {
            let dux = displacements[3 * j] - displacements[3 * i];
            let duy = displacements[3 * j + 1] - displacements[3 * i + 1];
            -1000.0 * (dux * dir[0] + duy * dir[1])
        })
        .collect()
}

/// One internal hoop-force reading, kN, compression positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceReading {
    pub angle_deg: f64,
    pub value_kn: f64,
    pub sigma_kn: f64,
}

/// Observed data for one inversion: noisy convergence readings, the optional
/// hoop-force reading, their noise levels and the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub baseline_angles_deg: Vec<f64>,
    pub convergence_mm: Vec<f64>,
    pub sigma_mm: f64,
    pub force: Option<ForceReading>,
    pub seed: u64,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.convergence_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.convergence_mm.is_empty()
    }

    /// Evenly spaced subset of `count` readings, keeping the force record.
    /// Mirrors [`select_baselines`] so a case with fewer baselines sees
    /// exactly the readings it would have taken on those chords.
    pub fn subset(&self, count: usize) -> Result<ObservationSet, ResponseError> {
        let available = self.len();
        if count == 0 || available % count != 0 {
            return Err(ResponseError::BadBaselineCount { requested: count, available });
        }
        let stride = available / count;
        let idx: Vec<usize> = (0..count).map(|k| k * stride).collect();
        Ok(ObservationSet {
            baseline_angles_deg: idx.iter().map(|&k| self.baseline_angles_deg[k]).collect(),
            convergence_mm: idx.iter().map(|&k| self.convergence_mm[k]).collect(),
            sigma_mm: self.sigma_mm,
            force: self.force.clone(),
            seed: self.seed,
        })
    }

    pub fn without_force(&self) -> ObservationSet {
        ObservationSet { force: None, ..self.clone() }
    }
}

/// Synthesizes a noisy observation set from a known truth field.
///
/// Noise is `σ·z` with `z` i.i.d. standard normal from a generator seeded by
/// `seed`, so the same seed at a different noise level perturbs the data in
/// the same direction. The optional force reading is the hoop force at
/// `angle_deg` perturbed by its own `σ_N·z`. Reproducible for a fixed seed.
pub fn synthesize_observations(
    truth: &PressureField,
    model: &LiningModel,
    mesh: &Mesh,
    baselines: &BaselineSet,
    noise_std_mm: f64,
    force: Option<(f64, f64)>, // (angle_deg, sigma_kn)
    seed: u64,
) -> Result<ObservationSet, ResponseError> {
    let result = solve(model, mesh, truth)?;
    let clean = convergence(&result, baselines);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let convergence_mm: Vec<f64> = clean
        .iter()
        .map(|d| {
            let z: f64 = StandardNormal.sample(&mut rng);
            d + noise_std_mm * z
        })
        .collect();
    let force = match force {
        Some((angle_deg, sigma_kn)) => {
            let clean_force = hoop_force_at(&result, mesh, angle_deg)?;
            let z: f64 = StandardNormal.sample(&mut rng);
            Some(ForceReading {
                angle_deg,
                value_kn: clean_force + sigma_kn * z,
                sigma_kn,
            })
        }
        None => None,
    };
    Ok(ObservationSet {
        baseline_angles_deg: baselines.angles_deg().to_vec(),
        convergence_mm,
        sigma_mm: noise_std_mm,
        force,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;
    use approx::assert_relative_eq;

    fn model(element_count: usize) -> LiningModel {
        LiningModel {
            diameter_m: 6.2,
            axial_stiffness_kn: 1.225e7,
            bending_stiffness_knm2: 1.2505e5,
            rigidity_reduction: 0.26,
            joint_rotation_stiffness: 0.0,
            joint_angles_deg: vec![],
            foundation_stiffness: 1000.0,
            element_count,
        }
    }

    #[test]
    fn full_set_pairs_opposite_nodes_without_duplicates() {
        let mesh = build_mesh(&model(200)).unwrap();
        let all = BaselineSet::full(&mesh);
        assert_eq!(all.len(), 100);
        let mut seen = std::collections::HashSet::new();
        for b in 0..all.len() {
            let (i, j) = all.node_pair(b);
            assert_eq!(j - i, 100);
            assert!(seen.insert((i, j)));
        }
        assert_relative_eq!(all.angles_deg()[0], 0.0);
        assert_relative_eq!(all.angles_deg()[50], 90.0);
    }

    #[test]
    fn two_of_a_hundred_picks_crown_and_springline() {
        let mesh = build_mesh(&model(200)).unwrap();
        let all = BaselineSet::full(&mesh);
        let two = select_baselines(&all, 2).unwrap();
        assert_eq!(two.angles_deg(), &[0.0, 90.0]);
        let identity = select_baselines(&all, 100).unwrap();
        assert_eq!(identity.angles_deg(), all.angles_deg());
        assert!(matches!(
            select_baselines(&all, 7),
            Err(ResponseError::BadBaselineCount { requested: 7, available: 100 })
        ));
    }

    #[test]
    fn uniform_pressure_reads_twice_the_radial_displacement() {
        let m = model(100);
        let mesh = build_mesh(&m).unwrap();
        let q = 200.0;
        let field = PressureField::uniform(8, q).unwrap();
        let result = solve(&m, &mesh, &field).unwrap();
        let all = BaselineSet::full(&mesh);
        let d = convergence(&result, &all);
        let r = m.radius_m();
        let u = q * r * r / (m.axial_stiffness_kn + m.foundation_stiffness * r * r);
        for v in &d {
            assert_relative_eq!(*v, 2.0 * u * 1000.0, max_relative = 5e-3);
        }
        // Uniform convergence across the structural domain.
        let spread = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - d.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-3 * d[0].abs());
    }

    #[test]
    fn zero_displacement_reads_zero() {
        let m = model(16);
        let mesh = build_mesh(&m).unwrap();
        let result = solve(&m, &mesh, &PressureField::uniform(4, 0.0).unwrap()).unwrap();
        let all = BaselineSet::full(&mesh);
        assert!(convergence(&result, &all).iter().all(|&v| v == 0.0));
    }

    /// A uniform pressure offset shifts every baseline's convergence by the
    /// same constant: the observable difference between a field and its
    /// offset copy is flat across baselines.
    #[test]
    fn uniform_offset_moves_all_baselines_equally() {
        let m = model(100);
        let mesh = build_mesh(&m).unwrap();
        let base = PressureField::new(vec![320.0, 150.0, 260.0, 420.0, 180.0, 90.0, 300.0, 240.0])
            .unwrap();
        let offset = PressureField::new(base.knots().iter().map(|k| k + 200.0).collect()).unwrap();
        let all = BaselineSet::full(&mesh);
        let d1 = convergence(&solve(&m, &mesh, &base).unwrap(), &all);
        let d2 = convergence(&solve(&m, &mesh, &offset).unwrap(), &all);
        let diffs: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| b - a).collect();
        for d in &diffs {
            assert_relative_eq!(*d, diffs[0], epsilon = 1e-9);
        }
    }

    #[test]
    fn noise_free_synthesis_equals_forward_convergence() {
        let m = model(32);
        let mesh = build_mesh(&m).unwrap();
        let truth = PressureField::new(vec![300.0, 150.0, 260.0, 420.0]).unwrap();
        let all = BaselineSet::full(&mesh);
        let obs = synthesize_observations(&truth, &m, &mesh, &all, 0.0, None, 7).unwrap();
        let clean = convergence(&solve(&m, &mesh, &truth).unwrap(), &all);
        assert_eq!(obs.convergence_mm, clean);
        assert!(obs.force.is_none());
    }

    #[test]
    fn same_seed_reproduces_identical_observations() {
        let m = model(32);
        let mesh = build_mesh(&m).unwrap();
        let truth = PressureField::new(vec![300.0, 150.0, 260.0, 420.0]).unwrap();
        let all = BaselineSet::full(&mesh);
        let a = synthesize_observations(&truth, &m, &mesh, &all, 0.5, Some((0.0, 10.0)), 99).unwrap();
        let b = synthesize_observations(&truth, &m, &mesh, &all, 0.5, Some((0.0, 10.0)), 99).unwrap();
        assert_eq!(a, b);
        let c = synthesize_observations(&truth, &m, &mesh, &all, 0.5, Some((0.0, 10.0)), 100).unwrap();
        assert_ne!(a, c);
    }

    /// σ = 1/3 mm keeps draws essentially inside [−1, 1] mm: the 3σ band.
    #[test]
    fn noise_statistics_match_requested_level() {
        let m = model(16);
        let mesh = build_mesh(&m).unwrap();
        let truth = PressureField::uniform(4, 0.0).unwrap();
        let all = BaselineSet::full(&mesh);
        let sigma = 1.0 / 3.0;
        let mut draws = Vec::new();
        for seed in 0..1250 {
            let obs = synthesize_observations(&truth, &m, &mesh, &all, sigma, None, seed).unwrap();
            draws.extend(obs.convergence_mm);
        }
        assert_eq!(draws.len(), 10_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var.sqrt() - sigma).abs() < 0.03 * sigma);
        let inside = draws.iter().filter(|d| d.abs() <= 1.0).count() as f64;
        assert!(inside / draws.len() as f64 > 0.995);
    }

    #[test]
    fn convergence_ignores_rigid_translation() {
        let m = model(16);
        let mesh = build_mesh(&m).unwrap();
        let field = PressureField::new(vec![300.0, 150.0, 260.0, 420.0]).unwrap();
        let mut result = solve(&m, &mesh, &field).unwrap();
        let all = BaselineSet::full(&mesh);
        let before = convergence(&result, &all);
        // Translate every node by the same vector.
        let u = result.displacements().clone();
        let mut shifted = u.clone();
        for i in 0..mesh.node_count() {
            shifted[3 * i] += 0.004;
            shifted[3 * i + 1] -= 0.002;
        }
        result = SolveResultTestAccess::with_displacements(result, shifted);
        let after = convergence(&result, &all);
        for (a, b) in before.iter().zip(&after) {
            assert_relative_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    /// Test-only hook: rebuild a result with altered displacements.
    struct SolveResultTestAccess;
    impl SolveResultTestAccess {
        fn with_displacements(
            template: SolveResult,
            displacements: nalgebra::DVector<f64>,
        ) -> SolveResult {
            let mut r = template;
            r.set_displacements_for_tests(displacements);
            r
        }
    }

    #[test]
    fn observation_subset_matches_baseline_subsampling() {
        let m = model(100);
        let mesh = build_mesh(&m).unwrap();
        let truth = PressureField::new(vec![300.0, 150.0, 260.0, 420.0]).unwrap();
        let all = BaselineSet::full(&mesh);
        let obs = synthesize_observations(&truth, &m, &mesh, &all, 0.2, None, 3).unwrap();
        let ten = obs.subset(10).unwrap();
        let picked = select_baselines(&all, 10).unwrap();
        assert_eq!(ten.baseline_angles_deg, picked.angles_deg());
        for (k, idx) in (0..50).step_by(5).enumerate() {
            assert_eq!(ten.convergence_mm[k], obs.convergence_mm[idx]);
        }
    }
}
