//! State layouts, box representations and the Gaussian state container.
//!
//! Every parameterization observes four box quantities. The state vector
//! stores those four quantities plus zero or more velocity components; the
//! position of each within the state vector is fixed per layout:
//!
//! | layout       | state vector                   | measurement      |
//! |--------------|--------------------------------|------------------|
//! | `Cxcywh`     | `[x, y, ẋ, ẏ, w, h]`           | `[x, y, w, h]`   |
//! | `CxcywhV`    | `[x, y, ẋ, ẏ, w, ẇ, h, ḣ]`     | `[x, y, w, h]`   |
//! | `Cxcysr`     | `[x, y, s, r, ẋ, ẏ, ṡ]`        | `[x, y, s, r]`   |
//! | `Cxcyha`     | `[x, y, a, h, ẋ, ẏ, ȧ, ḣ]`     | `[x, y, a, h]`   |
//! | `RandomWalk` | `[x, y, w, h]`                 | `[x, y, w, h]`   |
//!
//! with `s = w·h` (area) and `r = a = w/h` (aspect ratio).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, stored by its geometric center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let all_finite = cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite();
        if !all_finite || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox { cx, cy, w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Builds a box from its top-left corner and size (the on-disk convention).
    pub fn from_corner(left: f64, top: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }
}

/// State-vector layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Parameterization {
    /// Center, center velocity, width and height.
    #[default]
    Cxcywh,
    /// Like `Cxcywh` with width and height velocities.
    CxcywhV,
    /// Center, area and aspect ratio; velocities on center and area only.
    Cxcysr,
    /// Center, aspect ratio and height, all with velocities.
    Cxcyha,
    /// Center, width and height without any velocity component.
    RandomWalk,
}

/// Where one measured quantity lives in the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub index: usize,
    /// Index of the rate of change of this quantity, if the layout models one.
    pub velocity: Option<usize>,
}

const fn comp(index: usize, velocity: Option<usize>) -> Component {
    Component { index, velocity }
}

/// Number of measured quantities, shared by every layout.
pub const MEAS_DIM: usize = 4;

impl Parameterization {
    pub const ALL: [Parameterization; 5] = [
        Parameterization::Cxcywh,
        Parameterization::CxcywhV,
        Parameterization::Cxcysr,
        Parameterization::Cxcyha,
        Parameterization::RandomWalk,
    ];

    pub fn state_dim(self) -> usize {
        match self {
            Self::Cxcywh => 6,
            Self::CxcywhV => 8,
            Self::Cxcysr => 7,
            Self::Cxcyha => 8,
            Self::RandomWalk => 4,
        }
    }

    pub fn meas_dim(self) -> usize {
        MEAS_DIM
    }

    /// The four measured quantities in measurement order.
    ///
    /// Measured quantity `k` is driven by process-noise axis `k` and observed
    /// with measurement-noise axis `k` (see [`AxisSigmas`]).
    pub fn components(self) -> [Component; MEAS_DIM] {
        match self {
            Self::Cxcywh => [
                comp(0, Some(2)),
                comp(1, Some(3)),
                comp(4, None),
                comp(5, None),
            ],
            Self::CxcywhV => [
                comp(0, Some(2)),
                comp(1, Some(3)),
                comp(4, Some(5)),
                comp(6, Some(7)),
            ],
            Self::Cxcysr => [
                comp(0, Some(4)),
                comp(1, Some(5)),
                comp(2, Some(6)),
                comp(3, None),
            ],
            Self::Cxcyha => [
                comp(0, Some(4)),
                comp(1, Some(5)),
                comp(2, Some(6)),
                comp(3, Some(7)),
            ],
            Self::RandomWalk => [comp(0, None), comp(1, None), comp(2, None), comp(3, None)],
        }
    }

    /// Places a measurement vector into a zero state vector.
    pub fn embed(self, z: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(z.len(), MEAS_DIM);
        let mut x = DVector::zeros(self.state_dim());
        for (k, c) in self.components().iter().enumerate() {
            x[c.index] = z[k];
        }
        x
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Cxcywh => "cxcywh",
            Self::CxcywhV => "cxcywh-v",
            Self::Cxcysr => "cxcysr",
            Self::Cxcyha => "cxcyha",
            Self::RandomWalk => "rw",
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameterization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cxcywh" => Ok(Self::Cxcywh),
            "cxcywh-v" | "cxcywh_v" => Ok(Self::CxcywhV),
            "cxcysr" => Ok(Self::Cxcysr),
            "cxcyha" => Ok(Self::Cxcyha),
            "rw" | "randomwalk" | "random-walk" => Ok(Self::RandomWalk),
            other => Err(format!(
                "unknown parameterization '{other}' (expected cxcywh, cxcywh-v, cxcysr, cxcyha or rw)"
            )),
        }
    }
}

/// Measurement vector for a box under the given layout.
pub fn to_measurement(bbox: &BoundingBox, param: Parameterization) -> DVector<f64> {
    let BoundingBox { cx, cy, w, h } = *bbox;
    match param {
        Parameterization::Cxcywh | Parameterization::CxcywhV | Parameterization::RandomWalk => {
            DVector::from_column_slice(&[cx, cy, w, h])
        }
        Parameterization::Cxcysr => DVector::from_column_slice(&[cx, cy, w * h, w / h]),
        Parameterization::Cxcyha => DVector::from_column_slice(&[cx, cy, w / h, h]),
    }
}

/// Decodes the box components of a state vector.
pub fn from_state(mean: &DVector<f64>, param: Parameterization) -> Result<BoundingBox> {
    if mean.len() != param.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{param} state has {} components, got {}",
            param.state_dim(),
            mean.len()
        )));
    }
    let [cx, cy, p, q] = param.components().map(|c| mean[c.index]);
    let (w, h) = match param {
        Parameterization::Cxcywh | Parameterization::CxcywhV | Parameterization::RandomWalk => {
            (p, q)
        }
        Parameterization::Cxcysr => {
            let (s, r) = (p, q);
            if !(s > 0.0 && r > 0.0) {
                return Err(Error::NonPositiveSize { w: s, h: r });
            }
            ((s * r).sqrt(), (s / r).sqrt())
        }
        Parameterization::Cxcyha => {
            let (a, h) = (p, q);
            if !(a > 0.0 && h > 0.0) {
                return Err(Error::NonPositiveSize { w: a * h, h });
            }
            (a * h, h)
        }
    };
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::NonPositiveSize { w, h });
    }
    BoundingBox::new(cx, cy, w, h)
}

/// Per-axis standard deviations for the `x`, `y`, `w` and `h` noise channels.
///
/// For `Cxcysr` the `w`/`h` channels drive area and aspect ratio, for
/// `Cxcyha` aspect ratio and height; values are then in those units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSigmas {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl AxisSigmas {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub const fn uniform(sigma: f64) -> Self {
        Self::new(sigma, sigma, sigma, sigma)
    }

    pub fn to_array(self) -> [f64; MEAS_DIM] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::new(
            self.x * factor,
            self.y * factor,
            self.w * factor,
            self.h * factor,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for s in self.to_array() {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidSigma(s));
            }
        }
        Ok(())
    }
}

impl Default for AxisSigmas {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl From<[f64; MEAS_DIM]> for AxisSigmas {
    fn from([x, y, w, h]: [f64; MEAS_DIM]) -> Self {
        Self::new(x, y, w, h)
    }
}

/// Accepts either a single value applied to every axis or four comma-separated values.
impl FromStr for AxisSigmas {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let values = s
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad sigma '{}': {e}", v.trim()))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let sigmas = match values.as_slice() {
            [v] => Self::uniform(*v),
            [x, y, w, h] => Self::new(*x, *y, *w, *h),
            _ => {
                return Err(format!(
                    "expected 1 or 4 comma-separated values, got {}",
                    values.len()
                ))
            }
        };
        sigmas.validate().map_err(|e| e.to_string())?;
        Ok(sigmas)
    }
}

/// Sampling period plus process and measurement noise levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Time between frames.
    pub dt: f64,
    pub process: AxisSigmas,
    pub measurement: AxisSigmas,
}

impl NoiseParams {
    pub fn new(dt: f64, process: AxisSigmas, measurement: AxisSigmas) -> Result<Self> {
        let noise = Self {
            dt,
            process,
            measurement,
        };
        noise.validate()?;
        Ok(noise)
    }

    /// Same σ on every process axis and same σ on every measurement axis.
    pub fn uniform(dt: f64, sigma_process: f64, sigma_meas: f64) -> Result<Self> {
        Self::new(
            dt,
            AxisSigmas::uniform(sigma_process),
            AxisSigmas::uniform(sigma_meas),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidDt(self.dt));
        }
        self.process.validate()?;
        self.measurement.validate()
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            dt: 1.0,
            process: AxisSigmas::default(),
            measurement: AxisSigmas::default(),
        }
    }
}

const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;

/// Mean and covariance of one target's state.
///
/// The covariance is symmetrized on every construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Validates finiteness, shape, symmetry (1e-9 relative) and positive
    /// semidefiniteness (smallest eigenvalue ≥ −1e-9·trace).
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let state = Self::from_parts(mean, cov)?;
        let trace = state.cov.trace();
        let min_eig = min_eigenvalue(&state.cov);
        if min_eig < -PSD_TOL * trace.abs() {
            return Err(Error::InvalidCovariance(format!(
                "not positive semidefinite (min eigenvalue {min_eig:e}, trace {trace:e})"
            )));
        }
        Ok(state)
    }

    /// Shape, finiteness and symmetry checks only; used on filter outputs whose
    /// construction already guarantees semidefiniteness.
    pub(crate) fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "mean has {n} components but covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteMean);
        }
        if !cov.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = cov.amax();
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidCovariance(format!(
                "asymmetric (max |P - Pᵀ| = {asym:e}, max |P| = {scale:e})"
            )));
        }
        Ok(Self {
            mean,
            cov: symmetrize(cov),
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }
}

/// `(P + Pᵀ) / 2`.
pub fn symmetrize(p: DMatrix<f64>) -> DMatrix<f64> {
    let pt = p.transpose();
    (p + pt) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for an empty matrix).
pub fn min_eigenvalue(p: &DMatrix<f64>) -> f64 {
    if p.is_empty() {
        return f64::INFINITY;
    }
    p.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
