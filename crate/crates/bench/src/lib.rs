//! Shared fixtures for the criterion benches.

use ringload::{LiningModel, PressureField};

/// Reference lining used across the benches.
pub fn reference_model(element_count: usize) -> LiningModel {
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

/// A 22-knot asymmetric pressure field inside the usual prior box.
pub fn sample_field() -> PressureField {
    let knots = (0..22)
        .map(|i| {
            let t = (i as f64 * 360.0 / 22.0).to_radians();
            480.0 + 200.0 * (2.0 * t).cos() + 90.0 * t.sin()
        })
        .collect();
    PressureField::new(knots).expect("valid knot count")
}
