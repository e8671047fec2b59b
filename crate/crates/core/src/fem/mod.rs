//! Embedded beam-spring model of a jointed circular tunnel lining.
//!
//! The ring is discretized into straight Euler beam elements (chords of the
//! circle) resting on normal soil springs. Segment joints are rotation
//! springs folded into the adjacent elements' stiffness through fixity
//! factors. Assembling and solving the resulting linear system yields nodal
//! displacements and element end forces for an arbitrary distributed normal
//! pressure.
//!
//! Conventions, fixed once and used everywhere:
//! - Polar angle θ = 0° at the crown, nodes numbered with increasing θ.
//! - Local element x = tangential (node i → node j), local y = inward
//!   normal; inward pressure is a positive transverse load.
//! - Three DOFs per node (two translations, one rotation), displacements in
//!   m / rad, forces in kN, moments in kN·m, pressures in kPa over a unit
//!   ring width.
//! - Hoop force reported compression-positive.

mod element;
mod mesh;
mod solve;

pub use element::{
    consistent_load, element_beam_stiffness, element_foundation_stiffness, joint_fixity_factor,
    transform_matrix_to_global, transform_vector_to_global, transformation_matrix,
};
pub use mesh::{build_mesh, Mesh};
pub use solve::{
    assemble, assemble_load, assemble_stiffness, hoop_force_at, net_pressure, reaction_pressure,
    solve, RingSolver, SolveResult,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative residual tolerance enforced by the linear solver.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("element count must be even and at least 8, got {0}")]
    BadElementCount(usize),
    #[error("invalid lining model: {0}")]
    InvalidModel(String),
    #[error("joint at {angle_deg}° does not coincide with a mesh node (node spacing {spacing_deg}°)")]
    JointOffNode { angle_deg: f64, spacing_deg: f64 },
    #[error("angle {0}° does not coincide with a mesh node")]
    NotANode(f64),
    #[error(
        "stiffness matrix is singular: with k_f = 0 there are no soil springs to \
         counterbalance the asymmetric component of the applied pressure"
    )]
    SingularSystem,
    #[error("solver residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
}

/// Geometry and stiffness of the lining ring and its supporting soil.
///
/// `bending_stiffness_knm2` is the unreduced EI of the cross-section; the
/// rigidity reduction factor `rigidity_reduction` multiplies EI (and EI
/// only) wherever the element matrices use it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiningModel {
    /// Ring diameter D, m.
    pub diameter_m: f64,
    /// Axial stiffness EA, kN.
    pub axial_stiffness_kn: f64,
    /// Bending stiffness EI before any reduction, kN·m².
    pub bending_stiffness_knm2: f64,
    /// Rigidity reduction η ∈ (0, 1] applied to EI; 1 = none.
    pub rigidity_reduction: f64,
    /// Joint rotation spring stiffness k_φ, kN·m/rad.
    pub joint_rotation_stiffness: f64,
    /// Joint positions, degrees from the crown; each must sit on a mesh node.
    pub joint_angles_deg: Vec<f64>,
    /// Normal soil spring stiffness k_f per unit ring width, kN/m³.
    pub foundation_stiffness: f64,
    /// Number of beam elements around the ring (even, ≥ 8).
    pub element_count: usize,
}

impl LiningModel {
    /// Ring radius, m.
    pub fn radius_m(&self) -> f64 {
        self.diameter_m / 2.0
    }

    /// EI after the rigidity reduction, kN·m².
    pub fn effective_bending_stiffness(&self) -> f64 {
        self.rigidity_reduction * self.bending_stiffness_knm2
    }

    pub fn validate(&self) -> Result<(), FemError> {
        if self.element_count < 8 || self.element_count % 2 != 0 {
            return Err(FemError::BadElementCount(self.element_count));
        }
        if !(self.diameter_m > 0.0) {
            return Err(FemError::InvalidModel(format!(
                "diameter must be positive, got {}",
                self.diameter_m
            )));
        }
        if !(self.axial_stiffness_kn > 0.0) {
            return Err(FemError::InvalidModel(format!(
                "axial stiffness must be positive, got {}",
                self.axial_stiffness_kn
            )));
        }
        if !(self.bending_stiffness_knm2 > 0.0) {
            return Err(FemError::InvalidModel(format!(
                "bending stiffness must be positive, got {}",
                self.bending_stiffness_knm2
            )));
        }
        if !(self.rigidity_reduction > 0.0 && self.rigidity_reduction <= 1.0) {
            return Err(FemError::InvalidModel(format!(
                "rigidity reduction must lie in (0, 1], got {}",
                self.rigidity_reduction
            )));
        }
        if !(self.foundation_stiffness >= 0.0) {
            return Err(FemError::InvalidModel(format!(
                "foundation stiffness must be non-negative, got {}",
                self.foundation_stiffness
            )));
        }
        if self.joint_rotation_stiffness < 0.0 {
            return Err(FemError::InvalidModel(format!(
                "joint rotation stiffness must be non-negative, got {}",
                self.joint_rotation_stiffness
            )));
        }
        let spacing = 360.0 / self.element_count as f64;
        for &joint in &self.joint_angles_deg {
            if !mesh::lies_on_node(joint, self.element_count) {
                return Err(FemError::JointOffNode {
                    angle_deg: joint,
                    spacing_deg: spacing,
                });
            }
        }
        Ok(())
    }
}
