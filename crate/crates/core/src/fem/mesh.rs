//! Polygonal ring mesh: nodes on the circle, straight chord elements.

use super::{FemError, LiningModel};

/// Closed polygonal discretization of the lining ring.
///
/// Node `i` (0-based) sits on the circle of radius D/2 at polar angle
/// `i · 360/N_e` degrees from the crown; element `e` is the chord from node
/// `e` to node `(e + 1) % N_e`. All chords share the same length
/// `L = D · sin(180°/N_e)`.
#[derive(Debug, Clone)]
pub struct Mesh {
    node_angles_deg: Vec<f64>,
    node_xy: Vec<[f64; 2]>,
    tangent_angles_rad: Vec<f64>,
    element_length_m: f64,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.node_angles_deg.len()
    }

    pub fn element_count(&self) -> usize {
        self.node_angles_deg.len()
    }

    pub fn element_length_m(&self) -> f64 {
        self.element_length_m
    }

    pub fn node_angle_deg(&self, node: usize) -> f64 {
        self.node_angles_deg[node]
    }

    pub fn node_angles_deg(&self) -> &[f64] {
        &self.node_angles_deg
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        self.node_xy[node]
    }

    /// Orientation of element `e`'s local x axis (tangent, node i → node j)
    /// in the global frame, radians.
    pub fn element_tangent_angle_rad(&self, e: usize) -> f64 {
        self.tangent_angles_rad[e]
    }

    /// Node pair (i, j) of element `e`; the ring closes through the last
    /// element back to node 0.
    pub fn element_nodes(&self, e: usize) -> (usize, usize) {
        (e, (e + 1) % self.node_count())
    }

    /// Unit vector pointing from node `node` toward the ring center.
    pub fn inward_normal(&self, node: usize) -> [f64; 2] {
        let t = self.node_angles_deg[node].to_radians();
        [t.sin(), -t.cos()]
    }

    /// Polar angles spanned by element `e`, degrees: `[θ_i, θ_i + 360/N_e]`.
    /// The end angle of the last element is 360°, never wrapping mid-element.
    pub fn element_angle_span_deg(&self, e: usize) -> (f64, f64) {
        let spacing = 360.0 / self.element_count() as f64;
        let start = e as f64 * spacing;
        (start, start + spacing)
    }

    /// Index of the node at `theta_deg`, or an error when the angle falls
    /// between nodes.
    pub fn node_index_at(&self, theta_deg: f64) -> Result<usize, FemError> {
        match node_index(theta_deg, self.node_count()) {
            Some(i) => Ok(i),
            None => Err(FemError::NotANode(theta_deg)),
        }
    }
}

fn node_index(theta_deg: f64, node_count: usize) -> Option<usize> {
    let spacing = 360.0 / node_count as f64;
    let pos = theta_deg.rem_euclid(360.0) / spacing;
    let idx = pos.round();
    if (pos - idx).abs() < 1e-6 {
        Some(idx as usize % node_count)
    } else {
        None
    }
}

pub(super) fn lies_on_node(theta_deg: f64, node_count: usize) -> bool {
    node_index(theta_deg, node_count).is_some()
}

/// Builds the polygonal ring mesh for `model`, validating its invariants.
pub fn build_mesh(model: &LiningModel) -> Result<Mesh, FemError> {
    model.validate()?;
    let n = model.element_count;
    let r = model.radius_m();
    let spacing = 360.0 / n as f64;

    let node_angles_deg: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
    // θ measured from the crown; the crown node sits at (0, R).
    let node_xy: Vec<[f64; 2]> = node_angles_deg
        .iter()
        .map(|a| {
            let t = a.to_radians();
            [-r * t.sin(), r * t.cos()]
        })
        .collect();

    let tangent_angles_rad: Vec<f64> = (0..n)
        .map(|e| {
            let j = (e + 1) % n;
            let dx = node_xy[j][0] - node_xy[e][0];
            let dy = node_xy[j][1] - node_xy[e][1];
            dy.atan2(dx)
        })
        .collect();

    let element_length_m = model.diameter_m * (std::f64::consts::PI / n as f64).sin();

    Ok(Mesh {
        node_angles_deg,
        node_xy,
        tangent_angles_rad,
        element_length_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(element_count: usize, diameter: f64) -> LiningModel {
        LiningModel {
            diameter_m: diameter,
            axial_stiffness_kn: 1.0e7,
            bending_stiffness_knm2: 1.0e5,
            rigidity_reduction: 1.0,
            joint_rotation_stiffness: 0.0,
            joint_angles_deg: vec![],
            foundation_stiffness: 1000.0,
            element_count,
        }
    }

    #[test]
    fn rejects_odd_or_tiny_element_counts() {
        assert!(matches!(
            build_mesh(&model(9, 2.0)),
            Err(FemError::BadElementCount(9))
        ));
        assert!(matches!(
            build_mesh(&model(6, 2.0)),
            Err(FemError::BadElementCount(6))
        ));
    }

    #[test]
    fn square_inscribed_in_unit_radius_circle() {
        // N_e = 4 is below the supported minimum of 8, so check the chord
        // formula at N_e = 8 and the documented example geometry directly.
        let m = model(8, 2.0);
        let mesh = build_mesh(&m).unwrap();
        assert_relative_eq!(
            mesh.element_length_m(),
            2.0 * (std::f64::consts::PI / 8.0).sin(),
            epsilon = 1e-14
        );
        assert_eq!(mesh.node_count(), 8);
        assert_relative_eq!(mesh.node_angle_deg(2), 90.0);
    }

    #[test]
    fn chord_length_matches_reference_lining() {
        let mesh = build_mesh(&model(100, 6.2)).unwrap();
        assert_relative_eq!(mesh.element_length_m(), 0.194747, epsilon = 1e-6);
    }

    #[test]
    fn joint_must_sit_on_a_node() {
        let mut m = model(100, 6.2);
        m.joint_angles_deg = vec![17.0];
        match build_mesh(&m) {
            Err(FemError::JointOffNode { angle_deg, spacing_deg }) => {
                assert_relative_eq!(angle_deg, 17.0);
                assert_relative_eq!(spacing_deg, 3.6);
            }
            other => panic!("expected JointOffNode, got {other:?}"),
        }
        m.joint_angles_deg = vec![18.0];
        assert!(build_mesh(&m).is_ok());
    }

    #[test]
    fn nodes_lie_on_the_circle() {
        let mesh = build_mesh(&model(16, 6.2)).unwrap();
        for i in 0..mesh.node_count() {
            let [x, y] = mesh.node_position(i);
            assert_relative_eq!((x * x + y * y).sqrt(), 3.1, epsilon = 1e-12);
        }
        // Crown node on top, invert at the bottom.
        assert_relative_eq!(mesh.node_position(0)[1], 3.1);
        assert_relative_eq!(mesh.node_position(8)[1], -3.1, epsilon = 1e-12);
    }

    #[test]
    fn node_lookup_honors_tolerance() {
        let mesh = build_mesh(&model(100, 6.2)).unwrap();
        assert_eq!(mesh.node_index_at(0.0).unwrap(), 0);
        assert_eq!(mesh.node_index_at(90.0).unwrap(), 25);
        assert_eq!(mesh.node_index_at(360.0).unwrap(), 0);
        assert!(mesh.node_index_at(17.0).is_err());
    }

    #[test]
    fn inward_normals_point_to_center() {
        let mesh = build_mesh(&model(8, 4.0)).unwrap();
        for i in 0..mesh.node_count() {
            let [x, y] = mesh.node_position(i);
            let [nx, ny] = mesh.inward_normal(i);
            // Walking from the node along the inward normal by R lands at the center.
            assert_relative_eq!(x + 2.0 * nx, 0.0, epsilon = 1e-12);
            assert_relative_eq!(y + 2.0 * ny, 0.0, epsilon = 1e-12);
        }
    }
}
