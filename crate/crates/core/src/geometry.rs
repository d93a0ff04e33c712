//! Riemannian primitives of the unit hypersphere S^p embedded in R^(p+1).
//!
//! Points are stored as ambient unit vectors. Tangent vectors at `x` are
//! ambient vectors orthogonal to `x`. The exponential and logarithmic maps
//! follow the canonical round metric, whose injectivity radius is pi.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs with a smaller norm are rejected rather than normalized.
pub const MIN_NORM: f64 = 1e-8;
/// Below this tangent norm `exp_map` returns its base point.
pub const SERIES_THRESHOLD: f64 = 1e-12;
/// Points closer than this to the antipode have no logarithm.
pub const CUT_LOCUS_MARGIN: f64 = 1e-8;
pub const TANGENT_TOLERANCE: f64 = 1e-10;
const UNIT_SLACK: f64 = 1e-14;

/// A point of S^p stored as a unit vector of length p + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Normalizes `coords` onto the sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("sphere point coordinates"));
        }
        let norm = norm(&coords);
        if norm < MIN_NORM {
            return Err(Error::NearZeroVector(norm));
        }
        // already unit up to rounding: keep the bits
        if (norm - 1.0).abs() <= UNIT_SLACK {
            return Ok(Self { coords });
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(Self { coords })
    }

    /// The `i`-th standard basis vector of R^ambient_dim.
    pub fn basis(ambient_dim: usize, i: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::DimensionTooSmall(ambient_dim));
        }
        if i >= ambient_dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {i} out of range for ambient dimension {ambient_dim}"
            )));
        }
        let mut coords = vec![0.0; ambient_dim];
        coords[i] = 1.0;
        Ok(Self { coords })
    }

    /// "North pole" (0, ..., 0, 1).
    pub fn north_pole(ambient_dim: usize) -> Result<Self> {
        Self::basis(ambient_dim, ambient_dim.saturating_sub(1))
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Intrinsic dimension p.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn antipode(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    pub(crate) fn check_same_dim(&self, other: &SpherePoint) -> Result<()> {
        check_dim(self.ambient_dim(), other.ambient_dim())
    }
}

impl AsRef<[f64]> for SpherePoint {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.coords
    }
}

/// An ambient vector orthogonal to its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    vec: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: SpherePoint, vec: Vec<f64>) -> Result<Self> {
        check_dim(base.ambient_dim(), vec.len())?;
        if vec.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("tangent vector"));
        }
        let ip = dot(base.coords(), &vec);
        if ip.abs() > TANGENT_TOLERANCE * (1.0 + norm(&vec)) {
            return Err(Error::NotTangent(ip));
        }
        Ok(Self { base, vec })
    }

    pub fn zero(base: SpherePoint) -> Self {
        let vec = vec![0.0; base.ambient_dim()];
        Self { base, vec }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }

    /// Same base, vector multiplied by `factor`.
    pub fn scale(&self, factor: f64) -> Self {
        Self {
            base: self.base.clone(),
            vec: self.vec.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Great-circle distance, in [0, pi].
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(angle(x.coords(), y.coords()))
}

/// Proj_x(z) = z - <x, z> x.
pub fn project_to_tangent(x: &SpherePoint, z: &[f64]) -> Result<TangentVector> {
    check_dim(x.ambient_dim(), z.len())?;
    if z.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("ambient vector"));
    }
    let mut vec = z.to_vec();
    project_in_place(x.coords(), &mut vec);
    Ok(TangentVector {
        base: x.clone(),
        vec,
    })
}

pub fn exp_map(u: &TangentVector) -> SpherePoint {
    let mut out = vec![0.0; u.base.ambient_dim()];
    exp_raw(u.base.coords(), &u.vec, &mut out);
    SpherePoint { coords: out }
}

pub fn log_map(x: &SpherePoint, y: &SpherePoint) -> Result<TangentVector> {
    x.check_same_dim(y)?;
    let mut vec = vec![0.0; x.ambient_dim()];
    log_raw(x.coords(), y.coords(), &mut vec)?;
    Ok(TangentVector {
        base: x.clone(),
        vec,
    })
}

/// Point at fraction `t` along the minimizing geodesic from `x` to `y`.
pub fn geodesic_point(x: &SpherePoint, y: &SpherePoint, t: f64) -> Result<SpherePoint> {
    Ok(exp_map(&log_map(x, y)?.scale(t)))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn project_in_place(x: &[f64], z: &mut [f64]) {
    let ip = dot(x, z);
    for (zi, xi) in z.iter_mut().zip(x) {
        *zi -= ip * xi;
    }
}

/// Angle between unit vectors as `2 atan2(|x - y|, |x + y|)`: exactly
/// symmetric, exactly zero for identical inputs, and accurate near 0 and pi.
pub(crate) fn angle(x: &[f64], y: &[f64]) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    (2.0 * minus.sqrt().atan2(plus.sqrt())).clamp(0.0, PI)
}

pub(crate) fn exp_raw(x: &[f64], u: &[f64], out: &mut [f64]) {
    let t = norm(u);
    if t < SERIES_THRESHOLD {
        out.copy_from_slice(x);
        return;
    }
    let (s, c) = t.sin_cos();
    let k = s / t;
    for ((o, xi), ui) in out.iter_mut().zip(x).zip(u) {
        *o = c * xi + k * ui;
    }
    let n = norm(out);
    out.iter_mut().for_each(|o| *o /= n);
}

/// Writes Log_x(y) into `out` and returns d(x, y).
pub(crate) fn log_raw(x: &[f64], y: &[f64], out: &mut [f64]) -> Result<f64> {
    let c = dot(x, y).clamp(-1.0, 1.0);
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = yi - c * xi;
    }
    // re-orthogonalize against rounding in c
    project_in_place(x, out);
    let s = norm(out);
    let d = s.atan2(c).clamp(0.0, PI);
    if d > PI - CUT_LOCUS_MARGIN {
        return Err(Error::CutLocus(d));
    }
    if s == 0.0 || d < SERIES_THRESHOLD {
        out.iter_mut().for_each(|o| *o = 0.0);
        return Ok(d);
    }
    let k = d / s;
    out.iter_mut().for_each(|o| *o *= k);
    Ok(d)
}
