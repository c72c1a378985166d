//! Generative simulator for the constant-velocity box model, plus Monte-Carlo
//! checks of the closed-form noise covariances and of filter consistency.
//!
//! Every target (and every Monte-Carlo run) draws from its own ChaCha8 stream
//! selected by index under a shared seed, so adding targets or runs leaves the
//! existing streams untouched. Normals come from the Box–Muller transform,
//! which consumes exactly two uniforms per pair of normals.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::filter::{self, VelocityPrior};
use crate::model::{acceleration_gain, ModelMatrices};
use crate::mot::Detection;
use crate::state::{
    from_state, to_measurement, BoundingBox, GaussianState, NoiseParams, Parameterization, MEAS_DIM,
};
use crate::tracker::TrackHistory;

/// Seeded random stream with a standard-normal sampler.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 − u lies in (0, 1], keeping the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }

    pub fn normal(&mut self, sigma: f64) -> f64 {
        sigma * self.standard_normal()
    }
}

/// One draw of the process noise vector `W`.
///
/// A single acceleration draw per axis feeds both the quantity and its rate,
/// which is what correlates them in `Q`. All four axes are always drawn.
pub fn sample_process_noise(
    param: Parameterization,
    noise: &NoiseParams,
    rng: &mut GaussianStream,
) -> DVector<f64> {
    let mut w = DVector::zeros(param.state_dim());
    let [gp, gv] = acceleration_gain(noise.dt);
    for (c, sigma) in param.components().into_iter().zip(noise.process.to_array()) {
        let a = rng.normal(sigma);
        match c.velocity {
            Some(vel) => {
                w[c.index] = gp * a;
                w[vel] = gv * a;
            }
            None if param == Parameterization::RandomWalk => w[c.index] = noise.dt.sqrt() * a,
            None => w[c.index] = a,
        }
    }
    w
}

/// One draw of the measurement noise vector `V`.
pub fn sample_measurement_noise(noise: &NoiseParams, rng: &mut GaussianStream) -> DVector<f64> {
    DVector::from_iterator(
        MEAS_DIM,
        noise
            .measurement
            .to_array()
            .into_iter()
            .map(|s| rng.normal(s)),
    )
}

/// Running mean and co-moment (Welford) for sample covariance.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    count: usize,
    mean: DVector<f64>,
    comoment: DMatrix<f64>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            comoment: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, sample: &DVector<f64>) -> Result<()> {
        if sample.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "sample has {} components, expected {}",
                sample.len(),
                self.dim()
            )));
        }
        self.count += 1;
        let before = sample - &self.mean;
        self.mean += &before / self.count as f64;
        let after = sample - &self.mean;
        self.comoment.ger(1.0, &before, &after, 1.0);
        Ok(())
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Unbiased sample covariance (divisor `n − 1`), symmetrized.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if self.count < 2 {
            return Err(Error::InsufficientSamples(self.count));
        }
        Ok(crate::state::symmetrize(
            &self.comoment / (self.count - 1) as f64,
        ))
    }
}

/// Unbiased sample covariance about the sample mean.
pub fn estimate_covariance(samples: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let first = samples.first().ok_or(Error::InsufficientSamples(0))?;
    let mut acc = CovarianceAccumulator::new(first.len());
    for s in samples {
        acc.push(s)?;
    }
    acc.covariance()
}

/// Result of comparing an empirical covariance with its closed form.
#[derive(Debug, Clone)]
pub struct CovarianceCheck {
    pub samples: usize,
    pub expected: DMatrix<f64>,
    pub empirical: DMatrix<f64>,
    /// `‖empirical − expected‖_F / ‖expected‖_F`
    pub relative_frobenius_error: f64,
    /// Largest empirical magnitude among entries whose expected value is zero.
    pub max_structural_zero: f64,
}

impl CovarianceCheck {
    fn compare(samples: usize, expected: DMatrix<f64>, empirical: DMatrix<f64>) -> Self {
        let relative_frobenius_error = (&empirical - &expected).norm() / expected.norm();
        let max_structural_zero = expected
            .iter()
            .zip(empirical.iter())
            .filter(|(e, _)| **e == 0.0)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        Self {
            samples,
            expected,
            empirical,
            relative_frobenius_error,
            max_structural_zero,
        }
    }
}

/// Draws `samples` process-noise vectors and compares their covariance with the
/// closed-form process covariance.
pub fn check_process_noise(
    param: Parameterization,
    noise: &NoiseParams,
    samples: usize,
    seed: u64,
) -> Result<CovarianceCheck> {
    let expected = crate::model::build_process_noise(param, noise)?;
    let mut rng = GaussianStream::new(seed, 0);
    let mut acc = CovarianceAccumulator::new(param.state_dim());
    for _ in 0..samples {
        acc.push(&sample_process_noise(param, noise, &mut rng))?;
    }
    Ok(CovarianceCheck::compare(
        samples,
        expected,
        acc.covariance()?,
    ))
}

/// Measurement-noise counterpart of [`check_process_noise`].
pub fn check_measurement_noise(
    noise: &NoiseParams,
    samples: usize,
    seed: u64,
) -> Result<CovarianceCheck> {
    noise.validate()?;
    let expected = crate::model::build_measurement_noise(noise);
    let mut rng = GaussianStream::new(seed, 1);
    let mut acc = CovarianceAccumulator::new(MEAS_DIM);
    for _ in 0..samples {
        acc.push(&sample_measurement_noise(noise, &mut rng))?;
    }
    Ok(CovarianceCheck::compare(
        samples,
        expected,
        acc.covariance()?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub param: Parameterization,
    pub noise: NoiseParams,
    pub n_steps: usize,
    pub n_targets: usize,
    pub seed: u64,
    /// Explicit starting states; when absent targets start on a grid with small random velocities.
    pub initial_states: Option<Vec<DVector<f64>>>,
    /// Probability that a detection is withheld in a frame.
    pub drop_probability: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            param: Parameterization::Cxcywh,
            noise: NoiseParams::default(),
            n_steps: 50,
            n_targets: 1,
            seed: 0,
            initial_states: None,
            drop_probability: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.n_steps < 1 {
            return Err(Error::InvalidConfig("n_steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::InvalidConfig(format!(
                "drop probability must lie in [0, 1], got {}",
                self.drop_probability
            )));
        }
        if let Some(states) = &self.initial_states {
            if states.len() != self.n_targets {
                return Err(Error::InvalidConfig(format!(
                    "{} initial states for {} targets",
                    states.len(),
                    self.n_targets
                )));
            }
            if let Some(s) = states.iter().find(|s| s.len() != self.param.state_dim()) {
                return Err(Error::DimensionMismatch(format!(
                    "initial state has {} components, {} expects {}",
                    s.len(),
                    self.param,
                    self.param.state_dim()
                )));
            }
        }
        Ok(())
    }
}

/// A box-valued measurement decoded through the layout's conversions.
pub fn measurement_to_box(z: &DVector<f64>, param: Parameterization) -> Result<BoundingBox> {
    from_state(&param.embed(z), param)
}

/// Default starting state for target `index`: a 40×80 box on a 200 px grid
/// with center velocity drawn uniformly from [−2, 2] px/frame per axis.
pub fn default_initial_state(
    param: Parameterization,
    index: usize,
    rng: &mut GaussianStream,
) -> DVector<f64> {
    let bbox = BoundingBox {
        cx: 100.0 + 200.0 * (index % 5) as f64,
        cy: 100.0 + 200.0 * (index / 5) as f64,
        w: 40.0,
        h: 80.0,
    };
    let mut x = param.embed(&to_measurement(&bbox, param));
    let [cx, cy, _, _] = param.components();
    let (vx, vy) = (4.0 * rng.uniform() - 2.0, 4.0 * rng.uniform() - 2.0);
    if let (Some(ix), Some(iy)) = (cx.velocity, cy.velocity) {
        x[ix] = vx;
        x[iy] = vy;
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    /// 0-based frame index.
    pub frame: u64,
    /// True state of every target, indexed by target.
    pub states: Vec<DVector<f64>>,
    /// Emitted detections with the index of the target that produced them.
    pub detections: Vec<(usize, Detection)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub param: Parameterization,
    pub frames: Vec<SimFrame>,
}

impl Simulation {
    pub fn detections(&self) -> impl Iterator<Item = &Detection> {
        self.frames
            .iter()
            .flat_map(|f| f.detections.iter().map(|(_, d)| d))
    }

    /// True boxes per target (ids are target index + 1); frames whose true
    /// state has a non-positive size are left out.
    pub fn truth_histories(&self) -> Vec<TrackHistory> {
        let n_targets = self.frames.first().map_or(0, |f| f.states.len());
        (0..n_targets)
            .map(|t| TrackHistory {
                id: t as u64 + 1,
                boxes: self
                    .frames
                    .iter()
                    .filter_map(|f| {
                        from_state(&f.states[t], self.param)
                            .ok()
                            .map(|b| (f.frame, b))
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Samples `X_k = F X_{k−1} + W` and `z_k = H X_k + V` for every target.
///
/// Frame `k − 1` holds `X_k` for `k = 1..=n_steps`; the initial state itself
/// is not emitted.
pub fn simulate_trajectory(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let m = ModelMatrices::build(cfg.param, &cfg.noise)?;
    let mut streams: Vec<GaussianStream> = (0..cfg.n_targets)
        .map(|t| GaussianStream::new(cfg.seed, t as u64))
        .collect();
    let mut states: Vec<DVector<f64>> = match &cfg.initial_states {
        Some(s) => s.clone(),
        None => streams
            .iter_mut()
            .enumerate()
            .map(|(t, rng)| default_initial_state(cfg.param, t, rng))
            .collect(),
    };

    let mut frames = Vec::with_capacity(cfg.n_steps);
    for step in 0..cfg.n_steps {
        let frame = step as u64;
        let mut detections = Vec::new();
        for (t, (x, rng)) in states.iter_mut().zip(streams.iter_mut()).enumerate() {
            let w = sample_process_noise(cfg.param, &cfg.noise, rng);
            *x = &m.f * &*x + w;
            let z = &m.h * &*x + sample_measurement_noise(&cfg.noise, rng);
            let dropped = rng.uniform() < cfg.drop_probability;
            if dropped {
                continue;
            }
            if let Ok(bbox) = measurement_to_box(&z, cfg.param) {
                detections.push((
                    t,
                    Detection {
                        frame,
                        bbox,
                        confidence: 1.0,
                    },
                ));
            }
        }
        frames.push(SimFrame {
            frame,
            states: states.clone(),
            detections,
        });
    }
    Ok(Simulation {
        param: cfg.param,
        frames,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyConfig {
    pub param: Parameterization,
    /// Noise of the simulated world.
    pub noise: NoiseParams,
    pub runs: usize,
    pub steps: usize,
    pub seed: u64,
    /// Multiplier applied to the filter's process covariance; 1 is a matched filter.
    pub filter_q_scale: f64,
    /// Two-sided confidence of the reported acceptance bands.
    pub confidence: f64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            param: Parameterization::Cxcywh,
            noise: NoiseParams::default(),
            runs: 500,
            steps: 50,
            seed: 0,
            filter_q_scale: 1.0,
            confidence: 0.99,
        }
    }
}

/// Averaged normalized errors with chi-square acceptance bands.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub runs: usize,
    pub steps: usize,
    pub state_dim: usize,
    pub meas_dim: usize,
    /// NEES averaged over all runs and steps.
    pub mean_nees: f64,
    /// NIS averaged over all runs and steps.
    pub mean_nis: f64,
    pub nees_band: (f64, f64),
    pub nis_band: (f64, f64),
}

impl ConsistencyReport {
    pub fn nees_in_band(&self) -> bool {
        (self.nees_band.0..=self.nees_band.1).contains(&self.mean_nees)
    }

    pub fn nis_in_band(&self) -> bool {
        (self.nis_band.0..=self.nis_band.1).contains(&self.mean_nis)
    }
}

/// Two-sided band for the mean of `samples` independent `χ²(dim)` variables.
///
/// Applied to a mean over runs and time it is conservative: averaging
/// correlated time slices cannot widen the spread of a single-slice average.
pub fn chi_square_mean_band(dim: usize, samples: usize, confidence: f64) -> (f64, f64) {
    let dof = (dim * samples) as f64;
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    let tail = (1.0 - confidence) / 2.0;
    (
        chi.inverse_cdf(tail) / samples as f64,
        chi.inverse_cdf(1.0 - tail) / samples as f64,
    )
}

struct RunTotals {
    nees: f64,
    nis: f64,
}

fn consistency_run(
    cfg: &ConsistencyConfig,
    world: &ModelMatrices,
    filter_q: &DMatrix<f64>,
    run: usize,
) -> Result<RunTotals> {
    let param = cfg.param;
    let mut rng = GaussianStream::new(cfg.seed, run as u64);
    let mut estimate = consistency_prior(param, &cfg.noise)?;

    // the truth is a draw from the filter's own prior, so the filter starts consistent
    let prior_std = estimate.cov().diagonal().map(f64::sqrt);
    let mut truth = estimate.mean().clone();
    for i in 0..truth.len() {
        truth[i] += rng.normal(prior_std[i]);
    }

    let mut totals = RunTotals {
        nees: 0.0,
        nis: 0.0,
    };
    for _ in 0..cfg.steps {
        truth = &world.f * &truth + sample_process_noise(param, &cfg.noise, &mut rng);
        let z = &world.h * &truth + sample_measurement_noise(&cfg.noise, &mut rng);
        let predicted = filter::predict(&estimate, &world.f, filter_q)?;
        let (posterior, innovation) = filter::update(&predicted, &z, &world.h, &world.r)?;
        totals.nis += innovation.mahalanobis_sq;
        totals.nees += filter::nees(&posterior, &truth)?;
        estimate = posterior;
    }
    Ok(totals)
}

/// Monte-Carlo NEES/NIS over independent runs; each run has its own stream,
/// so results do not depend on how runs are scheduled across threads.
pub fn run_consistency_experiment(cfg: &ConsistencyConfig) -> Result<ConsistencyReport> {
    cfg.noise.validate()?;
    if cfg.runs < 1 || cfg.steps < 1 {
        return Err(Error::InvalidConfig(
            "runs and steps must be at least 1".into(),
        ));
    }
    if !(cfg.filter_q_scale.is_finite() && cfg.filter_q_scale >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "filter_q_scale must be finite and non-negative, got {}",
            cfg.filter_q_scale
        )));
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence must lie in (0, 1), got {}",
            cfg.confidence
        )));
    }
    let world = ModelMatrices::build(cfg.param, &cfg.noise)?;
    let filter_q = &world.q * cfg.filter_q_scale;
    let per_run = (0..cfg.runs)
        .into_par_iter()
        .map(|run| consistency_run(cfg, &world, &filter_q, run))
        .collect::<Result<Vec<_>>>()?;

    let samples = (cfg.runs * cfg.steps) as f64;
    let (mut nees, mut nis) = (0.0, 0.0);
    for t in &per_run {
        nees += t.nees;
        nis += t.nis;
    }
    let state_dim = cfg.param.state_dim();
    let meas_dim = cfg.param.meas_dim();
    Ok(ConsistencyReport {
        runs: cfg.runs,
        steps: cfg.steps,
        state_dim,
        meas_dim,
        mean_nees: nees / samples,
        mean_nis: nis / samples,
        nees_band: chi_square_mean_band(state_dim, cfg.runs, cfg.confidence),
        nis_band: chi_square_mean_band(meas_dim, cfg.runs, cfg.confidence),
    })
}

/// Filter state every consistency run starts from: a 40×80 box at (320, 240)
/// initiated with the default velocity prior.
pub fn consistency_prior(param: Parameterization, noise: &NoiseParams) -> Result<GaussianState> {
    let nominal = BoundingBox::new(320.0, 240.0, 40.0, 80.0)?;
    filter::initiate(
        &to_measurement(&nominal, param),
        param,
        noise,
        VelocityPrior::default(),
    )
}
