//! Element-level matrices: beam and foundation stiffness, joint adjustment,
//! coordinate transformation, and consistent nodal loads.
//!
//! Local DOF order is `(u_i, v_i, θ_i, u_j, v_j, θ_j)` with u axial, v
//! transverse (inward normal) and θ the in-plane rotation. Transverse
//! interpolation uses the cubic Hermite shape functions, so the foundation
//! matrix is the familiar consistent 13L/35 pattern and distributed loads
//! reduce to the first four moments of the load over the element.

use nalgebra::{SMatrix, SVector};

use super::{LiningModel, Mesh};
use crate::field::PressureField;

pub type ElementMatrix = SMatrix<f64, 6, 6>;
pub type ElementVector = SVector<f64, 6>;

/// Plane-frame transformation matrix for an element whose local x axis sits
/// at `theta_e_rad` to the global x axis. Rotations pass through unchanged.
pub fn transformation_matrix(theta_e_rad: f64) -> ElementMatrix {
    let (s, c) = theta_e_rad.sin_cos();
    let mut t = ElementMatrix::zeros();
    for block in [0, 3] {
        t[(block, block)] = c;
        t[(block, block + 1)] = -s;
        t[(block + 1, block)] = s;
        t[(block + 1, block + 1)] = c;
        t[(block + 2, block + 2)] = 1.0;
    }
    t
}

/// `T k Tᵀ`: element matrix expressed in global coordinates.
pub fn transform_matrix_to_global(local: &ElementMatrix, theta_e_rad: f64) -> ElementMatrix {
    let t = transformation_matrix(theta_e_rad);
    t * local * t.transpose()
}

/// `T f`: element vector expressed in global coordinates.
pub fn transform_vector_to_global(local: &ElementVector, theta_e_rad: f64) -> ElementVector {
    transformation_matrix(theta_e_rad) * local
}

/// Euler beam stiffness in local coordinates.
fn beam_stiffness_local(ea: f64, ei: f64, l: f64) -> ElementMatrix {
    let a = ea / l;
    let b1 = 12.0 * ei / (l * l * l);
    let b2 = 6.0 * ei / (l * l);
    let b3 = 4.0 * ei / l;
    let b4 = 2.0 * ei / l;
    ElementMatrix::from_row_slice(&[
        a, 0.0, 0.0, -a, 0.0, 0.0, //
        0.0, b1, b2, 0.0, -b1, b2, //
        0.0, b2, b3, 0.0, -b2, b4, //
        -a, 0.0, 0.0, a, 0.0, 0.0, //
        0.0, -b1, -b2, 0.0, b1, -b2, //
        0.0, b2, b4, 0.0, -b2, b3,
    ])
}

/// Fixity factor of a rotation spring `k_φ` at the end of a beam of bending
/// stiffness `ei` and length `l`: `r = 1 / (1 + 3EI/(k_φ L))`.
///
/// A continuous connection (`k_φ → ∞`) gives r = 1, a perfect hinge
/// (`k_φ = 0`) gives r = 0.
pub fn joint_fixity_factor(ei: f64, l: f64, k_phi: f64) -> f64 {
    1.0 / (1.0 + 3.0 * ei / (k_phi * l))
}

/// Correction matrix folding end rotation springs with fixity factors
/// `r_i`, `r_j` into the beam stiffness: the adjusted element matrix is
/// `k_b · A`. Reduces to the identity when both ends are continuous.
fn joint_adjustment(l: f64, r_i: f64, r_j: f64) -> ElementMatrix {
    let p = r_i * r_j;
    let d = 4.0 - p;
    let mut a = ElementMatrix::identity();
    a[(1, 1)] = (p + 4.0 * r_j - 2.0 * r_i) / d;
    a[(1, 2)] = 2.0 * l * r_i * (r_j - 1.0) / d;
    a[(2, 1)] = 6.0 * (r_i - r_j) / (l * d);
    a[(2, 2)] = 3.0 * r_i * (2.0 - r_j) / d;
    a[(4, 4)] = (p + 4.0 * r_i - 2.0 * r_j) / d;
    a[(4, 5)] = 2.0 * l * r_j * (1.0 - r_i) / d;
    a[(5, 4)] = 6.0 * (r_i - r_j) / (l * d);
    a[(5, 5)] = 3.0 * r_j * (2.0 - r_i) / d;
    a
}

/// Local beam stiffness of element `e`, joint springs included.
///
/// Interior elements get the plain Euler matrix; an element whose end node
/// carries a joint gets the adjusted matrix `k_b · A` with the fixity factor
/// of that end taken from the joint spring and r = 1 at continuous ends.
pub fn element_beam_stiffness(model: &LiningModel, mesh: &Mesh, e: usize) -> ElementMatrix {
    let l = mesh.element_length_m();
    let ea = model.axial_stiffness_kn;
    let ei = model.effective_bending_stiffness();
    let kb = beam_stiffness_local(ea, ei, l);

    let (ni, nj) = mesh.element_nodes(e);
    let jointed = |node: usize| {
        model
            .joint_angles_deg
            .iter()
            .any(|&a| mesh.node_index_at(a).map(|idx| idx == node).unwrap_or(false))
    };
    let r_i = if jointed(ni) {
        joint_fixity_factor(ei, l, model.joint_rotation_stiffness)
    } else {
        1.0
    };
    let r_j = if jointed(nj) {
        joint_fixity_factor(ei, l, model.joint_rotation_stiffness)
    } else {
        1.0
    };
    if r_i == 1.0 && r_j == 1.0 {
        kb
    } else {
        kb * joint_adjustment(l, r_i, r_j)
    }
}

/// Consistent foundation (soil spring) stiffness of an element, local
/// coordinates. Zero when `k_f = 0`.
pub fn element_foundation_stiffness(model: &LiningModel, mesh: &Mesh) -> ElementMatrix {
    let l = mesh.element_length_m();
    let kf = model.foundation_stiffness;
    let l2 = l * l;
    let l3 = l2 * l;
    let mut m = ElementMatrix::zeros();
    m[(1, 1)] = 13.0 * l / 35.0;
    m[(1, 2)] = 11.0 * l2 / 210.0;
    m[(1, 4)] = 9.0 * l / 70.0;
    m[(1, 5)] = -13.0 * l2 / 420.0;
    m[(2, 2)] = l3 / 105.0;
    m[(2, 4)] = 13.0 * l2 / 420.0;
    m[(2, 5)] = -l3 / 140.0;
    m[(4, 4)] = 13.0 * l / 35.0;
    m[(4, 5)] = -11.0 * l2 / 210.0;
    m[(5, 5)] = l3 / 105.0;
    // Mirror the upper triangle.
    for r in 0..6 {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }
    kf * m
}

/// Consistent nodal load of element `e` under the distributed pressure
/// `field`, local coordinates.
///
/// The pressure (kPa over a unit ring width) acts as a transverse line load
/// along the element. With s the arc position on the chord and the polar
/// angle varying linearly with s, the load restricted to the element is
/// piecewise linear in s; the first four moments `∫ w(s)·sᵏ ds` are then
/// integrated exactly, splitting at interior pressure knots, and mapped to
/// end forces through the Hermite shape functions.
pub fn consistent_load(
    field: &PressureField,
    _model: &LiningModel,
    mesh: &Mesh,
    e: usize,
) -> ElementVector {
    let l = mesh.element_length_m();
    let (theta_a, theta_b) = mesh.element_angle_span_deg(e);
    let span = theta_b - theta_a;

    // Breakpoints in s where the pressure changes slope: element ends plus
    // any knot angle strictly inside the span. Elements never straddle 360°,
    // so the knot grid can be scanned in unwrapped angles.
    let knot_spacing = 360.0 / field.knot_count() as f64;
    let mut breaks = vec![0.0];
    let k_lo = (theta_a / knot_spacing).floor() as i64;
    let k_hi = (theta_b / knot_spacing).ceil() as i64;
    for k in k_lo..=k_hi {
        let angle = k as f64 * knot_spacing;
        if angle > theta_a && angle < theta_b {
            breaks.push(l * (angle - theta_a) / span);
        }
    }
    breaks.push(l);

    // Moments F_pk = ∫ w(s) s^k ds, k = 0..3, exact per linear piece.
    let mut fp = [0.0f64; 4];
    for pair in breaks.windows(2) {
        let (s0, s1) = (pair[0], pair[1]);
        if s1 <= s0 {
            continue;
        }
        let w0 = field.evaluate(theta_a + span * s0 / l);
        let w1 = field.evaluate(theta_a + span * s1 / l);
        let slope = (w1 - w0) / (s1 - s0);
        let alpha = w0 - slope * s0;
        let mut p0 = s0; // s0^(k+1)
        let mut p1 = s1; // s1^(k+1)
        for (k, f) in fp.iter_mut().enumerate() {
            let k1 = (k + 1) as f64;
            let k2 = (k + 2) as f64;
            *f += alpha * (p1 - p0) / k1 + slope * (p1 * s1 - p0 * s0) / k2;
            p0 *= s0;
            p1 *= s1;
        }
    }

    let [fp0, fp1, fp2, fp3] = fp;
    let l2 = l * l;
    let l3 = l2 * l;
    ElementVector::from_row_slice(&[
        0.0,
        fp0 - 3.0 * fp2 / l2 + 2.0 * fp3 / l3,
        fp1 - 2.0 * fp2 / l + fp3 / l2,
        0.0,
        3.0 * fp2 / l2 - 2.0 * fp3 / l3,
        -fp2 / l + fp3 / l2,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn model(joints: Vec<f64>, k_phi: f64) -> LiningModel {
        LiningModel {
            diameter_m: 6.2,
            axial_stiffness_kn: 1.225e7,
            bending_stiffness_knm2: 1.2505e5,
            rigidity_reduction: 1.0,
            joint_rotation_stiffness: k_phi,
            joint_angles_deg: joints,
            foundation_stiffness: 1000.0,
            element_count: 8,
        }
    }

    #[test]
    fn transformation_is_identity_at_zero() {
        let t = transformation_matrix(0.0);
        assert_relative_eq!((t - ElementMatrix::identity()).norm(), 0.0);
    }

    #[test]
    fn transformation_is_orthogonal() {
        for theta in [0.3, 1.2, -2.4, std::f64::consts::PI] {
            let t = transformation_matrix(theta);
            assert_relative_eq!(
                (t * t.transpose() - ElementMatrix::identity()).norm(),
                0.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn quarter_turn_maps_axial_force_to_global_y() {
        let f = ElementVector::from_row_slice(&[7.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let g = transform_vector_to_global(&f, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(g[1], 7.0, epsilon = 1e-12);
        assert_relative_eq!(g.norm(), 7.0, epsilon = 1e-12);
    }

    #[test]
    fn beam_stiffness_axial_entry() {
        let m = model(vec![], 0.0);
        let mesh = build_mesh(&m).unwrap();
        let k = element_beam_stiffness(&m, &mesh, 0);
        assert_relative_eq!(k[(0, 0)], m.axial_stiffness_kn / mesh.element_length_m());
    }

    #[test]
    fn infinite_joint_stiffness_recovers_continuous_beam() {
        let m_cont = model(vec![], 0.0);
        let m_joint = model(vec![45.0], f64::INFINITY);
        let mesh = build_mesh(&m_cont).unwrap();
        let k_cont = element_beam_stiffness(&m_cont, &mesh, 0);
        let k_joint = element_beam_stiffness(&m_joint, &mesh, 0);
        assert_relative_eq!((k_cont - k_joint).norm(), 0.0);
        assert_relative_eq!(
            joint_fixity_factor(1.0e5, 0.2, f64::INFINITY),
            1.0
        );
    }

    #[test]
    fn fixity_factor_half_at_matching_spring() {
        // k_φ = 3EI/L makes the spring as stiff as the beam end: r = 1/2.
        let ei = 1.2505e5;
        let l = 0.4;
        assert_relative_eq!(joint_fixity_factor(ei, l, 3.0 * ei / l), 0.5);
        // A perfect hinge has no fixity.
        assert_relative_eq!(joint_fixity_factor(ei, l, 0.0), 0.0);
    }

    #[test]
    fn jointed_stiffness_is_symmetric() {
        let m = model(vec![45.0], 5.0e3);
        let mesh = build_mesh(&m).unwrap();
        for e in [0usize, 1] {
            let k = element_beam_stiffness(&m, &mesh, e);
            assert!((k - k.transpose()).norm() < 1e-9 * k.norm());
        }
    }

    /// Independent oracle: eliminate the beam-end rotations of a beam whose
    /// ends connect to the nodes through rotation springs, by static
    /// condensation, and compare with the closed-form adjusted matrix.
    #[test]
    fn jointed_stiffness_matches_static_condensation() {
        let ea = 1.225e7;
        let ei = 1.2505e5;
        let l = 2.3;
        let k_i = 4.0e4;
        let k_j = 9.0e3;

        // DOFs: (v_i, θ_i, v_j, θ_j, φ_i, φ_j) where φ are the beam-end
        // rotations behind the springs.
        let b = |r: usize, c: usize| -> f64 {
            let kb = beam_stiffness_local(ea, ei, l);
            let map = [1usize, 2, 4, 5];
            kb[(map[r], map[c])]
        };
        let mut full = DMatrix::<f64>::zeros(6, 6);
        // Beam block acts on (v_i, φ_i, v_j, φ_j) = full DOFs (0, 4, 2, 5).
        let beam_dofs = [0usize, 4, 2, 5];
        for r in 0..4 {
            for c in 0..4 {
                full[(beam_dofs[r], beam_dofs[c])] += b(r, c);
            }
        }
        // Springs couple θ to φ at each end.
        for (theta, phi, k) in [(1usize, 4usize, k_i), (3, 5, k_j)] {
            full[(theta, theta)] += k;
            full[(phi, phi)] += k;
            full[(theta, phi)] -= k;
            full[(phi, theta)] -= k;
        }
        // Condense out φ_i, φ_j.
        let kaa = full.view((0, 0), (4, 4)).into_owned();
        let kab = full.view((0, 4), (4, 2)).into_owned();
        let kbb = full.view((4, 4), (2, 2)).into_owned();
        let kbb_inv = kbb.try_inverse().unwrap();
        let condensed = kaa - &kab * kbb_inv * kab.transpose();

        let r_i = joint_fixity_factor(ei, l, k_i);
        let r_j = joint_fixity_factor(ei, l, k_j);
        let adjusted = beam_stiffness_local(ea, ei, l) * joint_adjustment(l, r_i, r_j);
        let map = [1usize, 2, 4, 5];
        for r in 0..4 {
            for c in 0..4 {
                assert_relative_eq!(
                    condensed[(r, c)],
                    adjusted[(map[r], map[c])],
                    epsilon = 1e-7,
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn foundation_matrix_zero_without_springs() {
        let mut m = model(vec![], 0.0);
        m.foundation_stiffness = 0.0;
        let mesh = build_mesh(&m).unwrap();
        assert_relative_eq!(element_foundation_stiffness(&m, &mesh).norm(), 0.0);
    }

    #[test]
    fn foundation_matrix_consistent_pattern() {
        let m = model(vec![], 0.0);
        let mesh = build_mesh(&m).unwrap();
        let l = mesh.element_length_m();
        let k = element_foundation_stiffness(&m, &mesh);
        assert_relative_eq!(k[(1, 1)], m.foundation_stiffness * 13.0 * l / 35.0);
        assert_relative_eq!((k - k.transpose()).norm(), 0.0);
    }

    #[test]
    fn foundation_matrix_positive_semidefinite() {
        let m = model(vec![], 0.0);
        let mesh = build_mesh(&m).unwrap();
        let k = element_foundation_stiffness(&m, &mesh);
        let dyn_k = DMatrix::from_fn(6, 6, |r, c| k[(r, c)]);
        let eig = dyn_k.symmetric_eigenvalues();
        for ev in eig.iter() {
            assert!(*ev >= -1e-12 * k.norm(), "negative eigenvalue {ev}");
        }
    }

    #[test]
    fn constant_pressure_consistent_load() {
        let m = model(vec![], 0.0);
        let mesh = build_mesh(&m).unwrap();
        let l = mesh.element_length_m();
        let p = 137.5;
        let field = PressureField::uniform(4, p).unwrap();
        for e in 0..mesh.element_count() {
            let f = consistent_load(&field, &m, &mesh, e);
            assert_relative_eq!(f[0], 0.0);
            assert_relative_eq!(f[3], 0.0);
            assert_relative_eq!(f[1], p * l / 2.0, max_relative = 1e-12);
            assert_relative_eq!(f[4], p * l / 2.0, max_relative = 1e-12);
            assert_relative_eq!(f[2], p * l * l / 12.0, max_relative = 1e-12);
            assert_relative_eq!(f[5], -p * l * l / 12.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_pressure_zero_load() {
        let m = model(vec![], 0.0);
        let mesh = build_mesh(&m).unwrap();
        let field = PressureField::uniform(6, 0.0).unwrap();
        for e in 0..mesh.element_count() {
            assert_relative_eq!(consistent_load(&field, &m, &mesh, e).norm(), 0.0);
        }
    }

    #[test]
    fn consistent_load_is_linear_in_the_field() {
        let m = model(vec![], 0.0);
        let mesh = build_mesh(&m).unwrap();
        let q1 = PressureField::new(vec![10.0, -40.0, 25.0, 300.0, 0.0]).unwrap();
        let q2 = PressureField::new(vec![5.0, 80.0, -120.0, 60.0, 7.0]).unwrap();
        let sum = PressureField::new(
            q1.knots().iter().zip(q2.knots()).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        for e in 0..mesh.element_count() {
            let fa = consistent_load(&q1, &m, &mesh, e);
            let fb = consistent_load(&q2, &m, &mesh, e);
            let fs = consistent_load(&sum, &m, &mesh, e);
            assert_relative_eq!((fa + fb - fs).norm(), 0.0, epsilon = 1e-9);
        }
    }

    /// Quadrature oracle: the moment integrals behind the consistent load
    /// must match a dense midpoint rule on a field with interior knots.
    #[test]
    fn consistent_load_matches_dense_quadrature() {
        let mut m = model(vec![], 0.0);
        m.element_count = 10; // knots at 36° then do not align with 45° knot grid
        let mesh = build_mesh(&m).unwrap();
        let field = PressureField::new(vec![100.0, 220.0, -50.0, 400.0, 130.0, 90.0, 310.0, 25.0])
            .unwrap();
        let l = mesh.element_length_m();
        for e in 0..mesh.element_count() {
            let f = consistent_load(&field, &m, &mesh, e);
            let (ta, tb) = mesh.element_angle_span_deg(e);
            let steps = 40_000;
            let h = l / steps as f64;
            let mut quad = [0.0f64; 4];
            for i in 0..steps {
                let s = (i as f64 + 0.5) * h;
                let w = field.evaluate(ta + (tb - ta) * s / l);
                let mut sk = 1.0;
                for q in quad.iter_mut() {
                    *q += w * sk * h;
                    sk *= s;
                }
            }
            let l2 = l * l;
            let l3 = l2 * l;
            let expect = [
                quad[0] - 3.0 * quad[2] / l2 + 2.0 * quad[3] / l3,
                quad[1] - 2.0 * quad[2] / l + quad[3] / l2,
                3.0 * quad[2] / l2 - 2.0 * quad[3] / l3,
                -quad[2] / l + quad[3] / l2,
            ];
            for (got, want) in [f[1], f[2], f[4], f[5]].iter().zip(expect) {
                assert_relative_eq!(*got, want, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }
}
