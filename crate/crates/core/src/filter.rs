//! Linear-Gaussian predict/update recursion.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::state::{GaussianState, NoiseParams, Parameterization};

/// Largest accepted condition number of the innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// 0.95 quantiles of the chi-square distribution for 1..=9 degrees of freedom.
pub const CHI2_INV_95: [f64; 9] = [
    3.8415, 5.9915, 7.8147, 9.4877, 11.070, 12.592, 14.067, 15.507, 16.919,
];

/// Measurement residual against the predicted measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovation {
    /// `z − H·mean`
    pub residual: DVector<f64>,
    /// `H·P·Hᵀ + R`
    pub s: DMatrix<f64>,
    /// `residualᵀ·S⁻¹·residual`
    pub mahalanobis_sq: f64,
}

fn check_shape(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn predict(state: &GaussianState, f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<GaussianState> {
    let n = state.dim();
    check_shape("transition matrix", f, n, n)?;
    check_shape("process covariance", q, n, n)?;
    let mean = f * state.mean();
    let cov = f * state.cov() * f.transpose() + q;
    GaussianState::from_parts(mean, cov)
}

struct Factored {
    innovation: Innovation,
    chol: Cholesky<f64, Dyn>,
}

fn factor_innovation(
    state: &GaussianState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<Factored> {
    let n = state.dim();
    let m = z.len();
    check_shape("measurement matrix", h, m, n)?;
    check_shape("measurement covariance", r, m, m)?;

    let residual = z - h * state.mean();
    let s = crate::state::symmetrize(h * state.cov() * h.transpose() + r);

    let eig = s.clone().symmetric_eigen().eigenvalues;
    let max = eig.max();
    let min = eig.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_INNOVATION_CONDITION {
        return Err(Error::SingularInnovation { condition });
    }
    let chol = Cholesky::new(s.clone()).ok_or(Error::SingularInnovation { condition })?;
    let mahalanobis_sq = residual.dot(&chol.solve(&residual));
    Ok(Factored {
        innovation: Innovation {
            residual,
            s,
            mahalanobis_sq,
        },
        chol,
    })
}

/// Measurement update with the Joseph-form covariance.
pub fn update(
    state: &GaussianState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(GaussianState, Innovation)> {
    let Factored { innovation, chol } = factor_innovation(state, z, h, r)?;
    let p = state.cov();

    // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ for symmetric P and S
    let gain = chol.solve(&(h * p)).transpose();
    let mean = state.mean() + &gain * &innovation.residual;

    let n = state.dim();
    let a = DMatrix::identity(n, n) - &gain * h;
    let cov = &a * p * a.transpose() + &gain * r * gain.transpose();

    Ok((GaussianState::from_parts(mean, cov)?, innovation))
}

/// Squared Mahalanobis distance of `z` from the predicted measurement.
pub fn gating_distance(
    state: &GaussianState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<f64> {
    Ok(factor_innovation(state, z, h, r)?.innovation.mahalanobis_sq)
}

/// Full innovation (residual, S, distance) without updating.
pub fn innovation(
    state: &GaussianState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<Innovation> {
    Ok(factor_innovation(state, z, h, r)?.innovation)
}

/// Prior standard deviation of unobserved velocity components for a new target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityPrior {
    /// `factor · σ_meas / dt`, using the σ of the quantity the velocity drives.
    MeasurementScaled(f64),
    /// The same fixed standard deviation for every velocity component.
    Fixed(f64),
}

impl Default for VelocityPrior {
    fn default() -> Self {
        Self::MeasurementScaled(10.0)
    }
}

/// State for a target first seen as measurement `z`.
///
/// Observed components take `z` with the matching measurement variance,
/// velocities start at zero with the variance given by `prior`.
pub fn initiate(
    z: &DVector<f64>,
    param: Parameterization,
    noise: &NoiseParams,
    prior: VelocityPrior,
) -> Result<GaussianState> {
    if z.len() != param.meas_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement has {} components, expected {}",
            z.len(),
            param.meas_dim()
        )));
    }
    let mean = param.embed(z);
    let mut var = DVector::zeros(param.state_dim());
    for (c, sigma) in param
        .components()
        .into_iter()
        .zip(noise.measurement.to_array())
    {
        var[c.index] = sigma * sigma;
        if let Some(vel) = c.velocity {
            let std = match prior {
                VelocityPrior::MeasurementScaled(factor) => factor * sigma / noise.dt,
                VelocityPrior::Fixed(std) => std,
            };
            var[vel] = std * std;
        }
    }
    GaussianState::new(mean, DMatrix::from_diagonal(&var))
}

/// Normalized estimation error squared `(x̂ − x)ᵀ P⁻¹ (x̂ − x)`.
pub fn nees(estimate: &GaussianState, truth: &DVector<f64>) -> Result<f64> {
    if truth.len() != estimate.dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} components, estimate {}",
            truth.len(),
            estimate.dim()
        )));
    }
    let err = estimate.mean() - truth;
    let chol = Cholesky::new(estimate.cov().clone()).ok_or_else(|| {
        Error::InvalidCovariance("estimate covariance is not positive definite".into())
    })?;
    Ok(err.dot(&chol.solve(&err)))
}
