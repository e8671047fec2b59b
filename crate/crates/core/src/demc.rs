//! Differential Evolution Markov Chain sampler over knot vectors.
//!
//! T parallel chains propose jumps along scaled difference vectors of two
//! other chains plus a small Gaussian jitter (Ter Braak, 2006), accepted by
//! the Metropolis rule. All proposals of a generation read the
//! generation-start snapshot of the ensemble and every chain consumes a
//! fixed number of draws from its own counter-derived stream, so runs are
//! bitwise reproducible for a fixed seed regardless of evaluation order.
//!
//! Convergence is monitored with the Gelman–Rubin scale-reduction factor
//! (Gelman & Rubin, 1992); posterior summaries interpolate the retained knot
//! samples onto monitoring angles and histogram them onto a pressure grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::UniformPrior;
use crate::field::knot_weights;

#[derive(Debug, Error)]
pub enum DemcError {
    #[error("DE-MC needs at least {required} chains, got {chains}")]
    TooFewChains { chains: usize, required: usize },
    #[error("invalid sampler configuration: {0}")]
    BadConfig(String),
    #[error("chain state has log-posterior −∞; chains must start inside the prior box")]
    InvalidState,
    #[error("within-chain variance is zero; the scale-reduction factor is undefined")]
    DegenerateVariance,
    #[error("no retained samples")]
    EmptyHistory,
    #[error("parameter index {index} out of range for dimension {dimension}")]
    BadParameter { index: usize, dimension: usize },
    #[error("history data of length {got} does not match {records} records × {chains} chains × {dimension} parameters")]
    BadHistoryShape { got: usize, records: usize, chains: usize, dimension: usize },
}

/// Tuning of one sampler run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of parallel chains T; at least max(3, 2n).
    pub chains: usize,
    /// Number of generations to advance every chain.
    pub iterations: usize,
    /// Jump rate λ; defaults to 2.38/√(2n).
    #[serde(default)]
    pub jump_rate: Option<f64>,
    /// Jitter standard deviation c (kPa); defaults to 10⁻³ of the prior width.
    #[serde(default)]
    pub jitter_std: Option<f64>,
    /// Fraction of the history discarded before summarizing.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Keep every `thin`-th generation in the stored history.
    #[serde(default = "default_thin")]
    pub thin: usize,
    /// Master seed of the run.
    #[serde(default)]
    pub seed: u64,
    /// Generations between scale-reduction checkpoints; defaults to
    /// iterations/100.
    #[serde(default)]
    pub diagnostic_stride: Option<usize>,
}

fn default_burn_in() -> f64 {
    0.5
}

fn default_thin() -> usize {
    1
}

impl SamplerConfig {
    pub fn new(chains: usize, iterations: usize, seed: u64) -> Self {
        Self {
            chains,
            iterations,
            jump_rate: None,
            jitter_std: None,
            burn_in: default_burn_in(),
            thin: default_thin(),
            seed,
            diagnostic_stride: None,
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<(), DemcError> {
        let required = (2 * dimension).max(3);
        if self.chains < required {
            return Err(DemcError::TooFewChains { chains: self.chains, required });
        }
        if self.iterations == 0 {
            return Err(DemcError::BadConfig("iterations must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(DemcError::BadConfig(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(DemcError::BadConfig("thinning stride must be at least 1".into()));
        }
        if let Some(l) = self.jump_rate {
            if !(l > 0.0) {
                return Err(DemcError::BadConfig(format!("jump rate must be positive, got {l}")));
            }
        }
        if let Some(c) = self.jitter_std {
            if !(c > 0.0) {
                return Err(DemcError::BadConfig(format!("jitter std must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn resolved_jump_rate(&self, dimension: usize) -> f64 {
        self.jump_rate.unwrap_or(2.38 / (2.0 * dimension as f64).sqrt())
    }

    pub fn resolved_jitter_std(&self, prior_width: f64) -> f64 {
        self.jitter_std.unwrap_or(1e-3 * prior_width)
    }
}

/// DE-MC proposal for chain `chain_index` from the generation-start
/// `states`: `q + λ(q_a − q_b) + ζ` with partners a ≠ b drawn without
/// replacement from the other chains and ζ i.i.d. normal with std
/// `jitter_std` per component.
pub fn propose<R: Rng>(
    chain_index: usize,
    states: &[Vec<f64>],
    jump_rate: f64,
    jitter_std: f64,
    rng: &mut R,
) -> Result<Vec<f64>, DemcError> {
    let t = states.len();
    if t < 3 {
        return Err(DemcError::TooFewChains { chains: t, required: 3 });
    }
    let (a, b) = draw_partners(chain_index, t, rng);
    let current = &states[chain_index];
    let mut candidate = Vec::with_capacity(current.len());
    for k in 0..current.len() {
        let z: f64 = StandardNormal.sample(rng);
        candidate.push(current[k] + jump_rate * (states[a][k] - states[b][k]) + jitter_std * z);
    }
    Ok(candidate)
}

/// Two distinct partner indices, both different from `i`, uniform over the
/// remaining chains.
fn draw_partners<R: Rng>(i: usize, t: usize, rng: &mut R) -> (usize, usize) {
    let mut a = rng.random_range(0..t - 1);
    if a >= i {
        a += 1;
    }
    let (lo, hi) = if i < a { (i, a) } else { (a, i) };
    let mut b = rng.random_range(0..t - 2);
    if b >= lo {
        b += 1;
    }
    if b >= hi {
        b += 1;
    }
    (a, b)
}

/// Metropolis step: accept the candidate with probability
/// `min[1, exp(logπ(cand) − logπ(curr))]`. Returns the new state, its
/// log-posterior and whether the move was accepted.
pub fn accept_step<R: Rng>(
    current: &[f64],
    candidate: Vec<f64>,
    logp_current: f64,
    logp_candidate: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, f64, bool), DemcError> {
    if logp_current == f64::NEG_INFINITY {
        return Err(DemcError::InvalidState);
    }
    let u: f64 = rng.random();
    if u.ln() < logp_candidate - logp_current {
        Ok((candidate, logp_candidate, true))
    } else {
        Ok((current.to_vec(), logp_current, false))
    }
}

/// Stored sampler output: thinned chain history plus per-generation
/// acceptance counts and the scale-reduction trace.
#[derive(Debug, Clone)]
pub struct ChainEnsemble {
    dimension: usize,
    chains: usize,
    burn_in: f64,
    recorded_iterations: Vec<usize>,
    data: Vec<f64>,
    /// (iteration, accepted proposals out of T) per generation.
    pub acceptance: Vec<(usize, usize)>,
    /// (iteration, R̂ per parameter) at each diagnostic checkpoint, computed
    /// over the later half of the history recorded so far.
    pub rhat_trace: Vec<(usize, Vec<f64>)>,
}

impl ChainEnsemble {
    /// Rebuilds an ensemble from externally stored records (e.g. a samples
    /// table); acceptance and diagnostic traces start empty.
    pub fn from_records(
        dimension: usize,
        chains: usize,
        burn_in: f64,
        recorded_iterations: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self, DemcError> {
        let records = recorded_iterations.len();
        if data.len() != records * chains * dimension {
            return Err(DemcError::BadHistoryShape {
                got: data.len(),
                records,
                chains,
                dimension,
            });
        }
        if !(0.0..1.0).contains(&burn_in) {
            return Err(DemcError::BadConfig(format!(
                "burn-in fraction must lie in [0, 1), got {burn_in}"
            )));
        }
        Ok(Self {
            dimension,
            chains,
            burn_in,
            recorded_iterations,
            data,
            acceptance: Vec::new(),
            rhat_trace: Vec::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn chain_count(&self) -> usize {
        self.chains
    }

    pub fn record_count(&self) -> usize {
        self.recorded_iterations.len()
    }

    pub fn recorded_iterations(&self) -> &[usize] {
        &self.recorded_iterations
    }

    /// Knot vector of `chain` at history row `record`.
    pub fn state(&self, record: usize, chain: usize) -> &[f64] {
        let start = (record * self.chains + chain) * self.dimension;
        &self.data[start..start + self.dimension]
    }

    /// First history row kept after burn-in.
    pub fn retained_start(&self) -> usize {
        let records = self.record_count();
        ((records as f64) * self.burn_in).ceil() as usize
    }

    pub fn retained_records(&self) -> usize {
        self.record_count() - self.retained_start()
    }

    /// Post burn-in samples of one parameter in one chain.
    pub fn retained_parameter(&self, chain: usize, param: usize) -> Vec<f64> {
        (self.retained_start()..self.record_count())
            .map(|r| self.state(r, chain)[param])
            .collect()
    }

    /// Overall acceptance rate across all generations.
    pub fn acceptance_rate(&self) -> f64 {
        if self.acceptance.is_empty() {
            return 0.0;
        }
        let accepted: usize = self.acceptance.iter().map(|&(_, a)| a).sum();
        accepted as f64 / (self.acceptance.len() * self.chains) as f64
    }

    /// Gelman–Rubin scale-reduction factor of one parameter over the
    /// retained history.
    pub fn gelman_rubin(&self, param: usize) -> Result<f64, DemcError> {
        if param >= self.dimension {
            return Err(DemcError::BadParameter { index: param, dimension: self.dimension });
        }
        let chains: Vec<Vec<f64>> =
            (0..self.chains).map(|c| self.retained_parameter(c, param)).collect();
        potential_scale_reduction(&chains)
    }

    /// Largest R̂ across all parameters.
    pub fn max_gelman_rubin(&self) -> Result<f64, DemcError> {
        let mut max = f64::NEG_INFINITY;
        for p in 0..self.dimension {
            max = max.max(self.gelman_rubin(p)?);
        }
        Ok(max)
    }
}

/// Gelman–Rubin statistic for one parameter: chains of equal length t ≥ 2,
/// `R̂ = √((t−1)/t + (T+1)/(T·t)·B/W)` with B the between-chain variance
/// (t times the variance of the chain means) and W the mean within-chain
/// variance.
pub fn potential_scale_reduction(chains: &[Vec<f64>]) -> Result<f64, DemcError> {
    let t_chains = chains.len();
    if t_chains < 2 {
        return Err(DemcError::TooFewChains { chains: t_chains, required: 2 });
    }
    let len = chains[0].len();
    if len < 2 || chains.iter().any(|c| c.len() != len) {
        return Err(DemcError::EmptyHistory);
    }
    let t = len as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / t).collect();
    let grand = means.iter().sum::<f64>() / t_chains as f64;
    let b = t * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (t_chains as f64 - 1.0);
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (t - 1.0))
        .sum::<f64>()
        / t_chains as f64;
    if w == 0.0 {
        return Err(DemcError::DegenerateVariance);
    }
    let m = t_chains as f64;
    Ok(((t - 1.0) / t + (m + 1.0) / (m * t) * b / w).sqrt())
}

/// Runs DE-MC against `log_posterior`, chains initialized i.i.d. from the
/// prior box. Deterministic for a fixed seed.
pub fn run<F>(
    log_posterior: F,
    prior: &UniformPrior,
    config: &SamplerConfig,
) -> Result<ChainEnsemble, DemcError>
where
    F: Fn(&[f64]) -> f64,
{
    let n = prior.dimension;
    config.validate(n)?;
    let t = config.chains;
    let jump = config.resolved_jump_rate(n);
    let jitter = config.resolved_jitter_std(prior.width());
    let stride = config
        .diagnostic_stride
        .unwrap_or_else(|| (config.iterations / 100).max(1));

    // One independent stream per chain, derived from the master seed, so a
    // chain's draws do not depend on evaluation order.
    let mut master = ChaCha12Rng::seed_from_u64(config.seed);
    let mut rngs: Vec<ChaCha12Rng> = (0..t)
        .map(|_| ChaCha12Rng::from_seed(master.random::<[u8; 32]>()))
        .collect();

    let mut states: Vec<Vec<f64>> = rngs.iter_mut().map(|rng| prior.sample(rng)).collect();
    let mut logp: Vec<f64> = Vec::with_capacity(t);
    for s in &states {
        let lp = log_posterior(s);
        if lp == f64::NEG_INFINITY {
            return Err(DemcError::InvalidState);
        }
        logp.push(lp);
    }

    let records_upper = config.iterations / config.thin + 2;
    let mut ensemble = ChainEnsemble {
        dimension: n,
        chains: t,
        burn_in: config.burn_in,
        recorded_iterations: Vec::with_capacity(records_upper),
        data: Vec::with_capacity(records_upper * t * n),
        acceptance: Vec::with_capacity(config.iterations),
        rhat_trace: Vec::new(),
    };
    let record = |ensemble: &mut ChainEnsemble, iteration: usize, states: &[Vec<f64>]| {
        ensemble.recorded_iterations.push(iteration);
        for s in states {
            ensemble.data.extend_from_slice(s);
        }
    };
    record(&mut ensemble, 0, &states);

    let mut snapshot = states.clone();
    for gen in 1..=config.iterations {
        for (dst, src) in snapshot.iter_mut().zip(&states) {
            dst.copy_from_slice(src);
        }
        let mut accepted = 0usize;
        for i in 0..t {
            let rng = &mut rngs[i];
            let candidate = propose(i, &snapshot, jump, jitter, rng)?;
            let lp_cand = log_posterior(&candidate);
            let u: f64 = rng.random();
            if u.ln() < lp_cand - logp[i] {
                states[i] = candidate;
                logp[i] = lp_cand;
                accepted += 1;
            }
        }
        ensemble.acceptance.push((gen, accepted));
        if gen % config.thin == 0 {
            record(&mut ensemble, gen, &states);
        }
        if gen % stride == 0 || gen == config.iterations {
            if let Some(rhats) = running_scale_reduction(&ensemble) {
                ensemble.rhat_trace.push((gen, rhats));
            }
        }
    }
    Ok(ensemble)
}

/// R̂ per parameter over the later half of the history recorded so far;
/// `None` until enough records exist or while variances are degenerate.
fn running_scale_reduction(ensemble: &ChainEnsemble) -> Option<Vec<f64>> {
    let records = ensemble.record_count();
    let start = records / 2;
    if records - start < 2 {
        return None;
    }
    let mut rhats = Vec::with_capacity(ensemble.dimension);
    for p in 0..ensemble.dimension {
        let chains: Vec<Vec<f64>> = (0..ensemble.chains)
            .map(|c| (start..records).map(|r| ensemble.state(r, c)[p]).collect())
            .collect();
        match potential_scale_reduction(&chains) {
            Ok(r) => rhats.push(r),
            Err(_) => return None,
        }
    }
    Some(rhats)
}

/// Histogram layout for the per-angle posterior density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureGrid {
    pub min_kpa: f64,
    pub max_kpa: f64,
    pub bins: usize,
}

impl PressureGrid {
    pub fn bin_width(&self) -> f64 {
        (self.max_kpa - self.min_kpa) / self.bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.bins).map(|b| self.min_kpa + (b as f64 + 0.5) * w).collect()
    }

    fn bin_of(&self, value: f64) -> usize {
        let raw = ((value - self.min_kpa) / self.bin_width()).floor();
        (raw.max(0.0) as usize).min(self.bins - 1)
    }
}

/// Per-angle posterior statistics and the normalized density grid.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub angles_deg: Vec<f64>,
    pub mean_kpa: Vec<f64>,
    pub std_kpa: Vec<f64>,
    pub p05_kpa: Vec<f64>,
    pub p50_kpa: Vec<f64>,
    pub p95_kpa: Vec<f64>,
    /// `density[angle][bin]`, each angle column summing to one.
    pub density: Vec<Vec<f64>>,
    pub grid: PressureGrid,
    /// Posterior-mean knot vector.
    pub mean_knots: Vec<f64>,
    pub sample_count: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

/// Summarizes the retained history at the monitoring angles: per-angle mean,
/// standard deviation, {5, 50, 95}% quantiles and the normalized histogram
/// over `grid`.
pub fn summarize(
    ensemble: &ChainEnsemble,
    monitoring_angles_deg: &[f64],
    grid: &PressureGrid,
) -> Result<PosteriorSummary, DemcError> {
    let start = ensemble.retained_start();
    let records = ensemble.record_count();
    let samples = (records - start) * ensemble.chain_count();
    if samples == 0 {
        return Err(DemcError::EmptyHistory);
    }
    let n = ensemble.dimension();

    let mut mean_knots = vec![0.0; n];
    for r in start..records {
        for c in 0..ensemble.chain_count() {
            for (m, v) in mean_knots.iter_mut().zip(ensemble.state(r, c)) {
                *m += *v;
            }
        }
    }
    for m in mean_knots.iter_mut() {
        *m /= samples as f64;
    }

    let mut summary = PosteriorSummary {
        angles_deg: monitoring_angles_deg.to_vec(),
        mean_kpa: Vec::with_capacity(monitoring_angles_deg.len()),
        std_kpa: Vec::with_capacity(monitoring_angles_deg.len()),
        p05_kpa: Vec::with_capacity(monitoring_angles_deg.len()),
        p50_kpa: Vec::with_capacity(monitoring_angles_deg.len()),
        p95_kpa: Vec::with_capacity(monitoring_angles_deg.len()),
        density: Vec::with_capacity(monitoring_angles_deg.len()),
        grid: grid.clone(),
        mean_knots,
        sample_count: samples,
    };

    let mut values = vec![0.0f64; samples];
    for &angle in monitoring_angles_deg {
        let (lo, hi, w) = knot_weights(n, angle);
        let mut idx = 0;
        for r in start..records {
            for c in 0..ensemble.chain_count() {
                let q = ensemble.state(r, c);
                values[idx] = q[lo] * (1.0 - w) + q[hi] * w;
                idx += 1;
            }
        }
        let mean = values.iter().sum::<f64>() / samples as f64;
        let var = if samples > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0)
        } else {
            0.0
        };
        let mut column = vec![0.0f64; grid.bins];
        for v in &values {
            column[grid.bin_of(*v)] += 1.0;
        }
        for c in column.iter_mut() {
            *c /= samples as f64;
        }
        values.sort_unstable_by(|a, b| a.total_cmp(b));
        summary.mean_kpa.push(mean);
        summary.std_kpa.push(var.sqrt());
        summary.p05_kpa.push(quantile(&values, 0.05));
        summary.p50_kpa.push(quantile(&values, 0.50));
        summary.p95_kpa.push(quantile(&values, 0.95));
        summary.density.push(column);
    }
    Ok(summary)
}
