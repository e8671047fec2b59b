//! Assembly of the global system, the direct solver, and post-processing of
//! nodal results into internal forces and soil reaction pressures.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::element::{
    consistent_load, element_beam_stiffness, element_foundation_stiffness,
    transform_matrix_to_global, transform_vector_to_global, ElementVector,
};
use super::{FemError, LiningModel, Mesh, SOLVE_RESIDUAL_TOL};
use crate::field::PressureField;

/// Displacements and derived element forces for one load case.
#[derive(Debug, Clone)]
pub struct SolveResult {
    displacements: DVector<f64>,
    end_forces_local: Vec<ElementVector>,
    load: DVector<f64>,
    residual: f64,
}

impl SolveResult {
    /// Global displacement vector, 3 DOFs per node (m, m, rad).
    pub fn displacements(&self) -> &DVector<f64> {
        &self.displacements
    }

    /// Applied consistent load vector (kN, kN, kN·m).
    pub fn load(&self) -> &DVector<f64> {
        &self.load
    }

    /// Normwise relative backward error ‖K·u − f‖/(‖K‖·‖u‖ + ‖f‖) of the
    /// returned solution, in the solver's equilibrated norm.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn node_translation(&self, node: usize) -> [f64; 2] {
        [self.displacements[3 * node], self.displacements[3 * node + 1]]
    }

    pub fn node_rotation(&self, node: usize) -> f64 {
        self.displacements[3 * node + 2]
    }

    /// Local end forces of element `e`: `(N_i, V_i, M_i, N_j, V_j, M_j)`,
    /// the forces the nodes exert on the element.
    pub fn element_end_forces(&self, e: usize) -> &ElementVector {
        &self.end_forces_local[e]
    }

    #[cfg(test)]
    pub(crate) fn set_displacements_for_tests(&mut self, u: DVector<f64>) {
        self.displacements = u;
    }
}

/// Global stiffness matrix, dimension `3·N_e` square.
pub fn assemble_stiffness(model: &LiningModel, mesh: &Mesh) -> DMatrix<f64> {
    let ndof = 3 * mesh.node_count();
    let mut k = DMatrix::<f64>::zeros(ndof, ndof);
    let k_f = element_foundation_stiffness(model, mesh);
    for e in 0..mesh.element_count() {
        let k_loc = element_beam_stiffness(model, mesh, e) + k_f;
        let k_glob = transform_matrix_to_global(&k_loc, mesh.element_tangent_angle_rad(e));
        let (ni, nj) = mesh.element_nodes(e);
        let dof = [3 * ni, 3 * ni + 1, 3 * ni + 2, 3 * nj, 3 * nj + 1, 3 * nj + 2];
        for r in 0..6 {
            for c in 0..6 {
                k[(dof[r], dof[c])] += k_glob[(r, c)];
            }
        }
    }
    k
}

/// Global consistent load vector for `field`.
pub fn assemble_load(field: &PressureField, model: &LiningModel, mesh: &Mesh) -> DVector<f64> {
    let ndof = 3 * mesh.node_count();
    let mut f = DVector::<f64>::zeros(ndof);
    for e in 0..mesh.element_count() {
        let f_loc = consistent_load(field, model, mesh, e);
        let f_glob = transform_vector_to_global(&f_loc, mesh.element_tangent_angle_rad(e));
        let (ni, nj) = mesh.element_nodes(e);
        let dof = [3 * ni, 3 * ni + 1, 3 * ni + 2, 3 * nj, 3 * nj + 1, 3 * nj + 2];
        for r in 0..6 {
            f[dof[r]] += f_glob[r];
        }
    }
    f
}

/// Assembles both sides of the global system `K u = f`.
pub fn assemble(
    model: &LiningModel,
    mesh: &Mesh,
    field: &PressureField,
) -> (DMatrix<f64>, DVector<f64>) {
    (assemble_stiffness(model, mesh), assemble_load(field, model, mesh))
}

/// Factorized ring system, reusable across many load cases.
///
/// The stiffness matrix depends only on the model and mesh, so one Cholesky
/// factorization serves every pressure field evaluated against the same
/// lining. This is what makes repeated forward evaluations cheap.
///
/// Translation and rotation DOFs live on very different scales, so the
/// matrix is symmetrically equilibrated by its diagonal before factorizing;
/// iterative refinement against the unscaled system then drives the
/// residual to the solver tolerance.
pub struct RingSolver {
    model: LiningModel,
    mesh: Mesh,
    stiffness: DMatrix<f64>,
    factorization: Cholesky<f64, Dyn>,
    scaling: DVector<f64>,
    scaled_norm: f64,
}

impl RingSolver {
    pub fn new(model: &LiningModel, mesh: &Mesh) -> Result<Self, FemError> {
        let stiffness = assemble_stiffness(model, mesh);
        let n = stiffness.nrows();
        let mut scaling = DVector::<f64>::zeros(n);
        for i in 0..n {
            let d = stiffness[(i, i)];
            if !(d > 0.0) {
                return Err(FemError::SingularSystem);
            }
            scaling[i] = 1.0 / d.sqrt();
        }
        let mut scaled = stiffness.clone();
        for r in 0..n {
            for c in 0..n {
                scaled[(r, c)] *= scaling[r] * scaling[c];
            }
        }
        let scaled_norm = scaled.norm();
        let factorization = Cholesky::new(scaled).ok_or(FemError::SingularSystem)?;
        Ok(Self {
            model: model.clone(),
            mesh: mesh.clone(),
            stiffness,
            factorization,
            scaling,
            scaled_norm,
        })
    }

    pub fn model(&self) -> &LiningModel {
        &self.model
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// `K⁻¹ r` through the equilibrated factorization.
    fn apply_inverse(&self, r: &DVector<f64>) -> DVector<f64> {
        let scaled = r.component_mul(&self.scaling);
        self.factorization.solve(&scaled).component_mul(&self.scaling)
    }

    /// Normwise relative backward error of the candidate solution, measured
    /// in the equilibrated system: ‖r‖ / (‖K‖·‖u‖ + ‖f‖). This is the
    /// standard solver-quality measure that iterative refinement can always
    /// push to machine level; the naive ‖r‖/‖f‖ bottoms out at the f64
    /// representation floor of `u` on stiff fine meshes.
    fn backward_error(&self, u: &DVector<f64>, residual: &DVector<f64>, f: &DVector<f64>) -> f64 {
        let r_s = residual.component_mul(&self.scaling).norm();
        let u_s = u.component_div(&self.scaling).norm();
        let f_s = f.component_mul(&self.scaling).norm();
        r_s / (self.scaled_norm * u_s + f_s)
    }

    /// Solves `K u = f` with iterative refinement to the residual tolerance.
    fn solve_system(&self, f: &DVector<f64>) -> Result<(DVector<f64>, f64), FemError> {
        if f.component_mul(&self.scaling).norm() == 0.0 {
            return Ok((DVector::zeros(f.len()), 0.0));
        }
        let mut u = self.apply_inverse(f);
        let mut residual = f - &self.stiffness * &u;
        let mut rel = self.backward_error(&u, &residual, f);
        for _ in 0..5 {
            if rel <= SOLVE_RESIDUAL_TOL {
                break;
            }
            u += self.apply_inverse(&residual);
            residual = f - &self.stiffness * &u;
            rel = self.backward_error(&u, &residual, f);
        }
        if rel > SOLVE_RESIDUAL_TOL {
            return Err(FemError::ResidualTooLarge {
                residual: rel,
                tolerance: SOLVE_RESIDUAL_TOL,
            });
        }
        Ok((u, rel))
    }

    pub fn solve_field(&self, field: &PressureField) -> Result<SolveResult, FemError> {
        let f = assemble_load(field, &self.model, &self.mesh);
        let (u, residual) = self.solve_system(&f)?;

        let k_f = element_foundation_stiffness(&self.model, &self.mesh);
        let mut end_forces_local = Vec::with_capacity(self.mesh.element_count());
        for e in 0..self.mesh.element_count() {
            let (ni, nj) = self.mesh.element_nodes(e);
            let mut u_glob = ElementVector::zeros();
            for d in 0..3 {
                u_glob[d] = u[3 * ni + d];
                u_glob[3 + d] = u[3 * nj + d];
            }
            let t = super::element::transformation_matrix(self.mesh.element_tangent_angle_rad(e));
            let u_loc = t.transpose() * u_glob;
            let k_loc = element_beam_stiffness(&self.model, &self.mesh, e) + k_f;
            let f_loc = consistent_load(field, &self.model, &self.mesh, e);
            end_forces_local.push(k_loc * u_loc - f_loc);
        }

        Ok(SolveResult {
            displacements: u,
            end_forces_local,
            load: f,
            residual,
        })
    }
}

/// One-shot convenience: assemble, factorize and solve for a single field.
pub fn solve(
    model: &LiningModel,
    mesh: &Mesh,
    field: &PressureField,
) -> Result<SolveResult, FemError> {
    RingSolver::new(model, mesh)?.solve_field(field)
}

/// Hoop (axial) force at the node sitting at `theta_deg`, kN,
/// compression-positive: the mean of the axial end forces of the two
/// elements meeting at that node.
pub fn hoop_force_at(result: &SolveResult, mesh: &Mesh, theta_deg: f64) -> Result<f64, FemError> {
    let node = mesh.node_index_at(theta_deg)?;
    let n = mesh.element_count();
    let prev = (node + n - 1) % n;
    let next = node;
    // Tension-positive axial force is +N at end j and −N at end i.
    let tension_prev = result.element_end_forces(prev)[3];
    let tension_next = -result.element_end_forces(next)[0];
    Ok(-(tension_prev + tension_next) / 2.0)
}

/// Soil reaction expressed as an equivalent distributed pressure sampled at
/// the node angles, kPa: `k_f` times the inward normal displacement, so a
/// positive value opposes inward motion.
pub fn reaction_pressure(result: &SolveResult, model: &LiningModel, mesh: &Mesh) -> Vec<f64> {
    (0..mesh.node_count())
        .map(|i| {
            let [ux, uy] = result.node_translation(i);
            let [nx, ny] = mesh.inward_normal(i);
            model.foundation_stiffness * (ux * nx + uy * ny)
        })
        .collect()
}

/// Pressure acting directly on the lining at each node angle:
/// total minus soil reaction.
pub fn net_pressure(total: &PressureField, reaction: &[f64], mesh: &Mesh) -> Vec<f64> {
    mesh.node_angles_deg()
        .iter()
        .zip(reaction)
        .map(|(&theta, &r)| total.evaluate(theta) - r)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;
    use approx::assert_relative_eq;

    fn reference_model(element_count: usize) -> LiningModel {
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
    fn stiffness_is_symmetric() {
        let m = reference_model(16);
        let mesh = build_mesh(&m).unwrap();
        let k = assemble_stiffness(&m, &mesh);
        let asym = (&k - k.transpose()).amax();
        assert!(asym <= 1e-9 * k.amax(), "asymmetry {asym}");
    }

    #[test]
    fn stiffness_positive_definite_with_springs() {
        let m = reference_model(8);
        let mesh = build_mesh(&m).unwrap();
        let k = assemble_stiffness(&m, &mesh);
        let sym = (&k + k.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "smallest eigenvalue {min}");
    }

    #[test]
    fn symmetric_pressure_balances_in_both_directions() {
        let m = reference_model(24);
        let mesh = build_mesh(&m).unwrap();
        let field = PressureField::uniform(4, 250.0).unwrap();
        let f = assemble_load(&field, &m, &mesh);
        let (mut fx, mut fy) = (0.0, 0.0);
        for i in 0..mesh.node_count() {
            fx += f[3 * i];
            fy += f[3 * i + 1];
        }
        assert_relative_eq!(fx, 0.0, epsilon = 1e-9);
        assert_relative_eq!(fy, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_pressure_gives_zero_displacement() {
        let m = reference_model(16);
        let mesh = build_mesh(&m).unwrap();
        let r = solve(&m, &mesh, &PressureField::uniform(4, 0.0).unwrap()).unwrap();
        assert_eq!(r.displacements().amax(), 0.0);
        assert_eq!(hoop_force_at(&r, &mesh, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn no_springs_is_singular() {
        let mut m = reference_model(16);
        m.foundation_stiffness = 0.0;
        let mesh = build_mesh(&m).unwrap();
        let err = solve(&m, &mesh, &PressureField::uniform(4, 100.0).unwrap()).unwrap_err();
        assert!(matches!(err, FemError::SingularSystem));
        assert!(err.to_string().contains("counterbalance"));
    }

    /// Thin-ring closed form: under uniform inward pressure q the radial
    /// displacement is q·R²/(EA + k_f·R²) inward at every node and the hoop
    /// force is EA·u/R ≈ q·R.
    #[test]
    fn uniform_pressure_matches_thin_ring_formulas() {
        let m = reference_model(100);
        let mesh = build_mesh(&m).unwrap();
        let q = 200.0;
        let field = PressureField::uniform(8, q).unwrap();
        let result = solve(&m, &mesh, &field).unwrap();

        let r = m.radius_m();
        let u_expect = q * r * r / (m.axial_stiffness_kn + m.foundation_stiffness * r * r);
        assert_relative_eq!(u_expect, 1.5677e-4, max_relative = 1e-3);

        for i in 0..mesh.node_count() {
            let [ux, uy] = result.node_translation(i);
            let [nx, ny] = mesh.inward_normal(i);
            let inward = ux * nx + uy * ny;
            assert_relative_eq!(inward, u_expect, max_relative = 5e-3);
        }

        let hoop = hoop_force_at(&result, &mesh, 0.0).unwrap();
        assert_relative_eq!(hoop, q * r, max_relative = 5e-3);
        // Rotational symmetry of the discrete model: equal at every node.
        for i in 0..mesh.node_count() {
            let h = hoop_force_at(&result, &mesh, mesh.node_angle_deg(i)).unwrap();
            assert_relative_eq!(h, hoop, max_relative = 1e-3);
        }
    }

    #[test]
    fn hoop_lookup_requires_a_node() {
        let m = reference_model(100);
        let mesh = build_mesh(&m).unwrap();
        let r = solve(&m, &mesh, &PressureField::uniform(4, 10.0).unwrap()).unwrap();
        assert!(matches!(
            hoop_force_at(&r, &mesh, 17.0),
            Err(FemError::NotANode(_))
        ));
    }

    #[test]
    fn energy_consistency_at_solution() {
        let m = reference_model(32);
        let mesh = build_mesh(&m).unwrap();
        let field = PressureField::new(vec![300.0, 120.0, 260.0, 90.0, 410.0, 180.0]).unwrap();
        let result = solve(&m, &mesh, &field).unwrap();
        let k = assemble_stiffness(&m, &mesh);
        let u = result.displacements();
        let strain = (u.transpose() * &k * u)[(0, 0)];
        let work = u.dot(result.load());
        assert_relative_eq!(strain, work, max_relative = 1e-9);
        assert!(result.residual() <= SOLVE_RESIDUAL_TOL);
    }

    #[test]
    fn superposition_of_load_cases() {
        let m = reference_model(24);
        let mesh = build_mesh(&m).unwrap();
        let q1 = PressureField::new(vec![100.0, 350.0, 80.0, 240.0]).unwrap();
        let q2 = PressureField::new(vec![55.0, 10.0, 320.0, 170.0]).unwrap();
        let sum = PressureField::new(
            q1.knots().iter().zip(q2.knots()).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let solver = RingSolver::new(&m, &mesh).unwrap();
        let u1 = solver.solve_field(&q1).unwrap();
        let u2 = solver.solve_field(&q2).unwrap();
        let us = solver.solve_field(&sum).unwrap();
        let diff = (u1.displacements() + u2.displacements() - us.displacements()).amax();
        assert!(diff <= 1e-9 * us.displacements().amax().max(1e-30));
    }

    #[test]
    fn reaction_scales_with_foundation_stiffness() {
        let m = reference_model(64);
        let mesh = build_mesh(&m).unwrap();
        let field = PressureField::uniform(4, 150.0).unwrap();
        let result = solve(&m, &mesh, &field).unwrap();
        let reaction = reaction_pressure(&result, &m, &mesh);

        // Doubling k_f with the displacements held fixed doubles the reaction.
        let mut stiffer = m.clone();
        stiffer.foundation_stiffness *= 2.0;
        let doubled = reaction_pressure(&result, &stiffer, &mesh);
        for (r2, r1) in doubled.iter().zip(&reaction) {
            assert_relative_eq!(*r2, 2.0 * r1, max_relative = 1e-12);
        }

        // Uniform inward motion u gives a uniform opposing reaction k_f·u.
        let r_ring = m.radius_m();
        let u_expect =
            150.0 * r_ring * r_ring / (m.axial_stiffness_kn + m.foundation_stiffness * r_ring * r_ring);
        for r in &reaction {
            assert_relative_eq!(*r, m.foundation_stiffness * u_expect, max_relative = 5e-3);
        }
    }

    #[test]
    fn net_pressure_is_total_minus_reaction() {
        let m = reference_model(16);
        let mesh = build_mesh(&m).unwrap();
        let field = PressureField::uniform(4, 150.0).unwrap();
        let result = solve(&m, &mesh, &field).unwrap();
        let reaction = reaction_pressure(&result, &m, &mesh);
        let net = net_pressure(&field, &reaction, &mesh);
        for (n, r) in net.iter().zip(&reaction) {
            assert_relative_eq!(*n, 150.0 - r, max_relative = 1e-12);
        }
        // Zero reaction leaves the total untouched.
        let zero = vec![0.0; mesh.node_count()];
        let same = net_pressure(&field, &zero, &mesh);
        for v in same {
            assert_relative_eq!(v, 150.0);
        }
    }

    /// One-node rotation of the pressure field rotates the displacement
    /// field by one node (discrete rotational equivariance).
    #[test]
    fn rotational_equivariance() {
        let m = reference_model(16);
        let mesh = build_mesh(&m).unwrap();
        let n = mesh.node_count();
        let knots: Vec<f64> = (0..n).map(|i| 200.0 + 150.0 * (i as f64 * 0.9).sin()).collect();
        let mut rotated = vec![0.0; n];
        for i in 0..n {
            rotated[i] = knots[(i + n - 1) % n];
        }
        let f1 = PressureField::new(knots).unwrap();
        let f2 = PressureField::new(rotated).unwrap();
        let solver = RingSolver::new(&m, &mesh).unwrap();
        let u1 = solver.solve_field(&f1).unwrap();
        let u2 = solver.solve_field(&f2).unwrap();

        let spacing = (360.0 / n as f64).to_radians();
        let (s, c) = spacing.sin_cos();
        let scale = u1.displacements().amax();
        for k in 0..n {
            let [ux, uy] = u1.node_translation(k);
            let expect = [c * ux - s * uy, s * ux + c * uy];
            let got = u2.node_translation((k + 1) % n);
            assert!((got[0] - expect[0]).abs() <= 1e-9 * scale);
            assert!((got[1] - expect[1]).abs() <= 1e-9 * scale);
            let dr = (u2.node_rotation((k + 1) % n) - u1.node_rotation(k)).abs();
            assert!(dr <= 1e-9 * scale.max(1e-12));
        }
    }
}
