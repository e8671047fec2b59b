//! Unnormalized log-posterior over knot vectors: uniform box prior,
//! Gaussian convergence likelihood, optional independent Gaussian
//! hoop-force likelihood.
//!
//! The forward map from knots to observables is linear (linear elasticity,
//! linear interpolation, linear observation operators), so besides the
//! direct FEM path a precomputed response-matrix path is provided. Both are
//! built from the same model and agree to solver precision; samplers use the
//! linear path because it turns every posterior evaluation into one small
//! matrix-vector product.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fem::{build_mesh, hoop_force_at, FemError, LiningModel, Mesh, RingSolver};
use crate::field::PressureField;
use crate::response::{convergence, BaselineSet, ObservationSet};

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("knot vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("prior bounds must satisfy q_min < q_max, got [{q_min}, {q_max}]")]
    BadBounds { q_min: f64, q_max: f64 },
    #[error("forward model predicts {predicted} readings but the observation set holds {observed}")]
    ObservationMismatch { predicted: usize, observed: usize },
    #[error("observation set has a force reading but the forward model computes none")]
    MissingForceChannel,
    #[error("noise level must be positive, got {0}")]
    BadNoiseLevel(f64),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

/// Independent uniform prior over the box `[q_min, q_max]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformPrior {
    pub q_min: f64,
    pub q_max: f64,
    pub dimension: usize,
}

impl UniformPrior {
    pub fn new(q_min: f64, q_max: f64, dimension: usize) -> Result<Self, BayesError> {
        if !(q_min < q_max) {
            return Err(BayesError::BadBounds { q_min, q_max });
        }
        Ok(Self { q_min, q_max, dimension })
    }

    pub fn width(&self) -> f64 {
        self.q_max - self.q_min
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter().all(|&v| v >= self.q_min && v <= self.q_max)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.q_min + self.q_max)
    }

    /// One i.i.d. draw from the box.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dimension)
            .map(|_| self.q_min + self.width() * rng.random::<f64>())
            .collect()
    }
}

/// Flat log-density inside the box, `−∞` sentinel outside.
pub fn log_prior(q: &[f64], prior: &UniformPrior) -> Result<f64, BayesError> {
    if q.len() != prior.dimension {
        return Err(BayesError::DimensionMismatch { expected: prior.dimension, got: q.len() });
    }
    if prior.contains(q) {
        Ok(-(prior.dimension as f64) * prior.width().ln())
    } else {
        Ok(f64::NEG_INFINITY)
    }
}

/// Predicted observables for one knot vector.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub convergence_mm: Vec<f64>,
    pub force_kn: Option<f64>,
}

/// Precomputed linear map from knot values to predicted observables.
///
/// Column `k` holds the response to a unit pressure on knot `k`; the first
/// rows are baseline convergences (mm), the optional last row the hoop force
/// (kN). Exact by superposition of the linear forward model.
#[derive(Debug, Clone)]
pub struct LinearForward {
    matrix: DMatrix<f64>,
    convergence_rows: usize,
    has_force: bool,
}

impl LinearForward {
    pub fn dimension(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn observation_count(&self) -> usize {
        self.convergence_rows
    }

    pub fn has_force(&self) -> bool {
        self.has_force
    }

    pub fn response_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn predict(&self, q: &[f64]) -> Result<Predictions, BayesError> {
        if q.len() != self.matrix.ncols() {
            return Err(BayesError::DimensionMismatch {
                expected: self.matrix.ncols(),
                got: q.len(),
            });
        }
        let y = &self.matrix * DVector::from_column_slice(q);
        let convergence_mm = y.as_slice()[..self.convergence_rows].to_vec();
        let force_kn = self.has_force.then(|| y[self.convergence_rows]);
        Ok(Predictions { convergence_mm, force_kn })
    }
}

/// Forward-evaluation context mapping knot vectors to predicted observables.
pub enum ForwardModel {
    /// Full FEM solve per evaluation.
    Direct {
        model: LiningModel,
        mesh: Mesh,
        baselines: BaselineSet,
        force_angle_deg: Option<f64>,
    },
    /// Precomputed response matrix (see [`ForwardModel::linearize`]).
    Linear(LinearForward),
}

impl ForwardModel {
    pub fn direct(
        model: LiningModel,
        baselines: BaselineSet,
        force_angle_deg: Option<f64>,
    ) -> Result<Self, BayesError> {
        let mesh = build_mesh(&model)?;
        Ok(ForwardModel::Direct { model, mesh, baselines, force_angle_deg })
    }

    pub fn predict(&self, q: &[f64]) -> Result<Predictions, BayesError> {
        match self {
            ForwardModel::Direct { model, mesh, baselines, force_angle_deg } => {
                let field = PressureField::new(q.to_vec())?;
                let result = crate::fem::solve(model, mesh, &field)?;
                let convergence_mm = convergence(&result, baselines);
                let force_kn = match force_angle_deg {
                    Some(angle) => Some(hoop_force_at(&result, mesh, *angle)?),
                    None => None,
                };
                Ok(Predictions { convergence_mm, force_kn })
            }
            ForwardModel::Linear(linear) => linear.predict(q),
        }
    }

    /// Builds the response matrix for `dimension` knots by solving one unit
    /// load case per knot against a single factorization.
    pub fn linearize(&self, dimension: usize) -> Result<LinearForward, BayesError> {
        match self {
            ForwardModel::Linear(linear) => {
                if linear.dimension() != dimension {
                    return Err(BayesError::DimensionMismatch {
                        expected: linear.dimension(),
                        got: dimension,
                    });
                }
                Ok(linear.clone())
            }
            ForwardModel::Direct { model, mesh, baselines, force_angle_deg } => {
                if dimension < 2 {
                    return Err(crate::field::FieldError::TooFewKnots(dimension).into());
                }
                let solver = RingSolver::new(model, mesh)?;
                let rows = baselines.len() + usize::from(force_angle_deg.is_some());
                let mut matrix = DMatrix::<f64>::zeros(rows, dimension);
                for k in 0..dimension {
                    let mut knots = vec![0.0; dimension];
                    knots[k] = 1.0;
                    let field = PressureField::new(knots)?;
                    let result = solver.solve_field(&field)?;
                    let d = convergence(&result, baselines);
                    for (r, v) in d.iter().enumerate() {
                        matrix[(r, k)] = *v;
                    }
                    if let Some(angle) = force_angle_deg {
                        matrix[(rows - 1, k)] = hoop_force_at(&result, mesh, *angle)?;
                    }
                }
                Ok(LinearForward {
                    matrix,
                    convergence_rows: baselines.len(),
                    has_force: force_angle_deg.is_some(),
                })
            }
        }
    }
}

/// Observation set plus the forward context that predicts it.
pub struct Likelihood {
    pub observations: ObservationSet,
    pub forward: ForwardModel,
}

impl Likelihood {
    pub fn new(observations: ObservationSet, forward: ForwardModel) -> Result<Self, BayesError> {
        if !(observations.sigma_mm > 0.0) && !observations.is_empty() {
            return Err(BayesError::BadNoiseLevel(observations.sigma_mm));
        }
        if let Some(force) = &observations.force {
            if !(force.sigma_kn > 0.0) {
                return Err(BayesError::BadNoiseLevel(force.sigma_kn));
            }
        }
        Ok(Self { observations, forward })
    }
}

/// Gaussian log-likelihood of the observations given knot vector `q`.
///
/// Deformation readings contribute `−H/2·ln(2πσ̄²) − eᵀe/(2σ̄²)`; an
/// independent force reading adds the analogous scalar term.
pub fn log_likelihood(q: &[f64], likelihood: &Likelihood) -> Result<f64, BayesError> {
    let obs = &likelihood.observations;
    let pred = likelihood.forward.predict(q)?;
    if pred.convergence_mm.len() != obs.len() {
        return Err(BayesError::ObservationMismatch {
            predicted: pred.convergence_mm.len(),
            observed: obs.len(),
        });
    }
    let mut ll = 0.0;
    if !obs.is_empty() {
        let var = obs.sigma_mm * obs.sigma_mm;
        let sse: f64 = obs
            .convergence_mm
            .iter()
            .zip(&pred.convergence_mm)
            .map(|(d, g)| (d - g) * (d - g))
            .sum();
        ll += -0.5 * obs.len() as f64 * (LN_2PI + var.ln()) - sse / (2.0 * var);
    }
    if let Some(reading) = &obs.force {
        let predicted = pred.force_kn.ok_or(BayesError::MissingForceChannel)?;
        let var = reading.sigma_kn * reading.sigma_kn;
        let e = predicted - reading.value_kn;
        ll += -0.5 * (LN_2PI + var.ln()) - e * e / (2.0 * var);
    }
    Ok(ll)
}

/// Unnormalized log-posterior. The `−∞` sentinel from an out-of-box knot
/// vector short-circuits the evaluation: no forward solve is attempted.
pub fn log_posterior(
    q: &[f64],
    prior: &UniformPrior,
    likelihood: &Likelihood,
) -> Result<f64, BayesError> {
    let lp = log_prior(q, prior)?;
    if lp == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(lp + log_likelihood(q, likelihood)?)
}
