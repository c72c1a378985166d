//! Transition, process-noise, measurement and measurement-noise matrices.
//!
//! Velocity-coupled quantities follow the piecewise-constant white
//! acceleration model: one scalar acceleration draw `w ~ N(0, σ²)` per frame
//! moves the quantity by `dt²/2 · w` and its rate by `dt · w`, so the noise
//! block over `(quantity, rate)` is `σ² g gᵀ` with `g = [dt²/2, dt]`.
//! Quantities without a velocity slot receive plain `σ²` (no `dt` factor),
//! except under `RandomWalk`, where every axis diffuses as `σ² dt`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::state::{NoiseParams, Parameterization, MEAS_DIM};

/// The four matrices of the linear-Gaussian model for one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrices {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl ModelMatrices {
    pub fn build(param: Parameterization, noise: &NoiseParams) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            f: build_transition_matrix(param, noise.dt)?,
            q: build_process_noise(param, noise)?,
            h: build_measurement_matrix(param),
            r: build_measurement_noise(noise),
        })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDt(dt))
    }
}

pub fn build_transition_matrix(param: Parameterization, dt: f64) -> Result<DMatrix<f64>> {
    check_dt(dt)?;
    let n = param.state_dim();
    let mut f = DMatrix::identity(n, n);
    for c in param.components() {
        if let Some(vel) = c.velocity {
            f[(c.index, vel)] = dt;
        }
    }
    Ok(f)
}

/// Noise gain `[dt²/2, dt]` mapping one acceleration draw onto (quantity, rate).
pub fn acceleration_gain(dt: f64) -> [f64; 2] {
    [dt * dt / 2.0, dt]
}

pub fn build_process_noise(param: Parameterization, noise: &NoiseParams) -> Result<DMatrix<f64>> {
    check_dt(noise.dt)?;
    noise.process.validate()?;
    let dt = noise.dt;
    let n = param.state_dim();
    let mut q = DMatrix::zeros(n, n);
    let sigmas = noise.process.to_array();
    for (c, sigma) in param.components().into_iter().zip(sigmas) {
        match c.velocity {
            Some(vel) => {
                // σ g gᵀ built from the scaled gain so each block is an exact outer product
                let [gp, gv] = acceleration_gain(dt).map(|g| sigma * g);
                q[(c.index, c.index)] = gp * gp;
                q[(c.index, vel)] = gp * gv;
                q[(vel, c.index)] = gp * gv;
                q[(vel, vel)] = gv * gv;
            }
            None if param == Parameterization::RandomWalk => {
                q[(c.index, c.index)] = sigma * sigma * dt;
            }
            None => q[(c.index, c.index)] = sigma * sigma,
        }
    }
    Ok(q)
}

pub fn build_measurement_matrix(param: Parameterization) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(MEAS_DIM, param.state_dim());
    for (row, c) in param.components().iter().enumerate() {
        h[(row, c.index)] = 1.0;
    }
    h
}

pub fn build_measurement_noise(noise: &NoiseParams) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(MEAS_DIM, MEAS_DIM);
    for (i, s) in noise.measurement.to_array().into_iter().enumerate() {
        r[(i, i)] = s * s;
    }
    r
}
