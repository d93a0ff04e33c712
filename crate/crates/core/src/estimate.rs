//! Maximum-likelihood estimation of SN parameters from weighted samples.
//!
//! The location estimate does not depend on the concentration: it is the
//! weighted Fréchet mean, found by Riemannian gradient descent started at
//! the normalized weighted extrinsic mean. Given the location, the
//! concentration minimizes `g(lambda) = c_hat * lambda + log Z_p(lambda)`,
//! whose unique critical point is found with Newton or Halley iterations on
//! five-point finite differences of `g`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint, TangentVector};
use crate::sn::{self, SnParams, Stencil, LAMBDA_MAX};

/// Smallest concentration the root finder will visit.
pub const LAMBDA_MIN: f64 = 1e-6;
/// Dispersion constants at or below this are treated as a degenerate sample.
pub const C_HAT_MIN: f64 = 1e-12;
/// Upper end of the admissible dispersion range, pi^2 / 2.
pub const C_HAT_MAX: f64 = PI * PI / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    Fixed(f64),
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetConfig {
    pub step_rule: StepRule,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for FrechetConfig {
    fn default() -> Self {
        Self {
            step_rule: StepRule::Fixed(0.25),
            epsilon: 1e-8,
            max_iter: 500,
        }
    }
}

impl FrechetConfig {
    pub fn validate(&self) -> Result<()> {
        if let StepRule::Fixed(alpha) = self.step_rule {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "fixed step size must lie in (0, 1], got {alpha}"
                )));
            }
        }
        if !(self.epsilon > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "Fréchet mean tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootMethod {
    Newton,
    Halley,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub method: RootMethod,
    /// Step is `h_scale * max(1, lambda)`.
    pub h_scale: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            method: RootMethod::Newton,
            h_scale: 1e-4,
            epsilon: 1e-8,
            max_iter: 100,
        }
    }
}

impl ConcentrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_scale > 0.0) || !(self.epsilon > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "concentration step, tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetResult {
    pub mean: SpherePoint,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationFit {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleResult {
    pub params: SnParams,
    pub c_hat: f64,
    pub iterations_mu: usize,
    pub iterations_lambda: usize,
    pub converged: bool,
    /// Every observation lies within pi/2 of the fitted location.
    pub support_ok: bool,
}

/// Weights rescaled to sum to one. Equal weights map to exactly `1/n`.
pub fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::ZeroWeights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    let n = weights.len() as f64;
    if weights.iter().all(|w| *w == weights[0]) {
        return Ok(vec![1.0 / n; weights.len()]);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

fn check_inputs(points: &[SpherePoint], weights: &[f64]) -> Result<()> {
    let first = points.first().ok_or(Error::NoObservations)?;
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch(points.len(), weights.len()));
    }
    for x in points {
        first.check_same_dim(x)?;
    }
    Ok(())
}

/// `sum_i w_i d^2(x_i, mu)` with normalized weights.
pub fn frechet_objective(points: &[SpherePoint], weights: &[f64], mu: &SpherePoint) -> Result<f64> {
    check_inputs(points, weights)?;
    mu.check_same_dim(&points[0])?;
    let w = normalize_weights(weights)?;
    Ok(objective_raw(points, &w, mu.coords()))
}

fn objective_raw(points: &[SpherePoint], w: &[f64], mu: &[f64]) -> f64 {
    points
        .iter()
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(x, wi)| {
            let d = geometry::angle(mu, x.coords());
            wi * d * d
        })
        .sum()
}

/// Riemannian gradient `-2 sum_i w_i Log_mu(x_i)` with normalized weights.
pub fn frechet_gradient(
    points: &[SpherePoint],
    weights: &[f64],
    mu: &SpherePoint,
) -> Result<TangentVector> {
    check_inputs(points, weights)?;
    mu.check_same_dim(&points[0])?;
    let w = normalize_weights(weights)?;
    let mut grad = vec![0.0; mu.ambient_dim()];
    gradient_raw(points, &w, mu.coords(), &mut grad)?;
    TangentVector::new(mu.clone(), grad)
}

fn gradient_raw(points: &[SpherePoint], w: &[f64], mu: &[f64], grad: &mut [f64]) -> Result<()> {
    let mut log = vec![0.0; mu.len()];
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (x, &wi) in points.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        geometry::log_raw(mu, x.coords(), &mut log)?;
        for (g, l) in grad.iter_mut().zip(&log) {
            *g -= 2.0 * wi * l;
        }
    }
    Ok(())
}

/// Normalized weighted extrinsic mean.
pub fn extrinsic_mean(points: &[SpherePoint], weights: &[f64]) -> Result<SpherePoint> {
    check_inputs(points, weights)?;
    let w = normalize_weights(weights)?;
    let mut sum = vec![0.0; points[0].ambient_dim()];
    for (x, wi) in points.iter().zip(&w) {
        for (s, c) in sum.iter_mut().zip(x.coords()) {
            *s += wi * c;
        }
    }
    let norm = geometry::norm(&sum);
    if norm < geometry::MIN_NORM {
        return Err(Error::IllPosedInitialization(norm));
    }
    SpherePoint::new(sum)
}

/// Weighted Fréchet mean started at the weighted extrinsic mean.
pub fn weighted_frechet_mean(
    points: &[SpherePoint],
    weights: &[f64],
    cfg: &FrechetConfig,
) -> Result<FrechetResult> {
    let init = extrinsic_mean(points, weights)?;
    weighted_frechet_mean_from(points, weights, init, cfg)
}

/// Riemannian gradient descent from an explicit starting point. Stops when
/// the gradient norm or the ambient displacement of an update drops below
/// `epsilon`; hitting `max_iter` returns a non-converged result.
pub fn weighted_frechet_mean_from(
    points: &[SpherePoint],
    weights: &[f64],
    init: SpherePoint,
    cfg: &FrechetConfig,
) -> Result<FrechetResult> {
    cfg.validate()?;
    check_inputs(points, weights)?;
    init.check_same_dim(&points[0])?;
    let w = normalize_weights(weights)?;
    let dim = init.ambient_dim();

    let mut mu = init.into_coords();
    let mut grad = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut step = vec![0.0; dim];
    let mut f_mu = match cfg.step_rule {
        StepRule::LineSearch => objective_raw(points, &w, &mu),
        StepRule::Fixed(_) => f64::NAN,
    };

    for iter in 1..=cfg.max_iter {
        gradient_raw(points, &w, &mu, &mut grad)?;
        let grad_norm = geometry::norm(&grad);
        if grad_norm < cfg.epsilon {
            return Ok(FrechetResult {
                mean: SpherePoint::new(mu)?,
                iterations: iter - 1,
                converged: true,
                grad_norm,
            });
        }
        match cfg.step_rule {
            StepRule::Fixed(alpha) => {
                step.iter_mut()
                    .zip(&grad)
                    .for_each(|(s, g)| *s = -alpha * g);
                geometry::exp_raw(&mu, &step, &mut next);
            }
            StepRule::LineSearch => {
                f_mu = backtrack(points, &w, &mu, &grad, f_mu, &mut step, &mut next);
            }
        }
        let moved = mu
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut mu, &mut next);
        if moved < cfg.epsilon {
            return Ok(FrechetResult {
                mean: SpherePoint::new(mu)?,
                iterations: iter,
                converged: true,
                grad_norm,
            });
        }
    }
    gradient_raw(points, &w, &mu, &mut grad)?;
    let grad_norm = geometry::norm(&grad);
    Ok(FrechetResult {
        mean: SpherePoint::new(mu)?,
        iterations: cfg.max_iter,
        converged: grad_norm < cfg.epsilon,
        grad_norm,
    })
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;
/// First trial step. Since the gradient is `-2 sum w Log`, a step of 1/2 is
/// a unit step along the Karcher direction; a step of 1 lands near the
/// reflection of `mu` through the minimizer, which still passes the Armijo
/// test on curved data and makes the iterates bounce across the minimizer.
const INITIAL_STEP: f64 = 0.5;

/// Armijo backtracking from `INITIAL_STEP` along `-grad`. Writes the accepted
/// point into `next` and returns its objective value; if no step passes,
/// `next` is left equal to `mu`.
fn backtrack(
    points: &[SpherePoint],
    w: &[f64],
    mu: &[f64],
    grad: &[f64],
    f_mu: f64,
    step: &mut [f64],
    next: &mut [f64],
) -> f64 {
    let g2 = geometry::dot(grad, grad);
    let mut alpha = INITIAL_STEP;
    for _ in 0..=MAX_HALVINGS {
        step.iter_mut().zip(grad).for_each(|(s, g)| *s = -alpha * g);
        geometry::exp_raw(mu, step, next);
        let f_next = objective_raw(points, w, next);
        if f_next <= f_mu - ARMIJO * alpha * g2 {
            return f_next;
        }
        alpha *= 0.5;
    }
    next.copy_from_slice(mu);
    f_mu
}

/// `g(lambda) = c_hat * lambda + log Z_p(lambda)`.
pub fn objective_g(lambda: f64, c_hat: f64, p: usize) -> Result<f64> {
    Ok(c_hat * lambda + sn::log_partition(p, lambda)?)
}

/// Minimizer of `g` for dispersion constant `c_hat`, started at
/// `p / (2 c_hat)`.
///
/// Iterates that leave (0, LAMBDA_MAX] are pulled back: non-positive
/// candidates are replaced by half the current iterate, oversized ones are
/// halved toward it. The stopping test is `|step| < epsilon * max(1, lambda)`.
pub fn concentration_mle(
    c_hat: f64,
    p: usize,
    cfg: &ConcentrationConfig,
) -> Result<ConcentrationFit> {
    cfg.validate()?;
    if p == 0 {
        return Err(Error::DimensionTooSmall(1));
    }
    if !c_hat.is_finite() {
        return Err(Error::NonFinite("dispersion constant"));
    }
    if c_hat <= C_HAT_MIN {
        return Err(Error::DegenerateSample(c_hat));
    }
    if c_hat >= C_HAT_MAX {
        return Err(Error::DispersionOutOfRange(c_hat));
    }
    let g = |l: f64| objective_g(l, c_hat, p);
    let with_third = cfg.method == RootMethod::Halley;

    let mut lambda = (p as f64 / (2.0 * c_hat)).clamp(LAMBDA_MIN, LAMBDA_MAX);
    for iter in 1..=cfg.max_iter {
        let mut h = cfg.h_scale * lambda.max(1.0);
        if lambda - 2.0 * h <= 0.0 {
            h = lambda / 4.0;
        }
        let s = Stencil::evaluate(g, lambda, h, with_third)?;
        let newton = 0.5 * h * s.a / s.b;
        let step = match cfg.method {
            RootMethod::Newton => newton,
            RootMethod::Halley => {
                let denom = 8.0 * s.b * s.b - s.a * s.c;
                if denom > 0.0 {
                    4.0 * h * s.a * s.b / denom
                } else {
                    newton
                }
            }
        };
        let mut candidate = lambda - step;
        if !candidate.is_finite() || s.b <= 0.0 {
            // g is convex, so a non-positive curvature estimate is rounding
            // noise: the iterate cannot be improved further
            return Ok(ConcentrationFit {
                lambda,
                iterations: iter,
                converged: false,
            });
        }
        if candidate <= 0.0 {
            candidate = lambda / 2.0;
        }
        while candidate > LAMBDA_MAX {
            candidate = 0.5 * (candidate + lambda);
            if candidate - lambda < f64::EPSILON * lambda {
                candidate = LAMBDA_MAX;
            }
        }
        if candidate < LAMBDA_MIN {
            // minimizer sits at the lower boundary: data more dispersed
            // than the uniform law
            return Ok(ConcentrationFit {
                lambda: LAMBDA_MIN,
                iterations: iter,
                converged: false,
            });
        }
        let done = (candidate - lambda).abs() < cfg.epsilon * lambda.max(1.0);
        lambda = candidate;
        if done {
            return Ok(ConcentrationFit {
                lambda,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(ConcentrationFit {
        lambda,
        iterations: cfg.max_iter,
        converged: false,
    })
}

/// `c_hat = sum_i w_i d^2(x_i, mu) / 2` with normalized weights.
pub fn dispersion(points: &[SpherePoint], weights: &[f64], mu: &SpherePoint) -> Result<f64> {
    Ok(0.5 * frechet_objective(points, weights, mu)?)
}

/// Log-likelihood `sum_i log f(x_i | mu, lambda)` of an unweighted sample.
pub fn log_likelihood(points: &[SpherePoint], params: &SnParams) -> Result<f64> {
    let log_z = params.log_partition();
    let mut total = 0.0;
    for x in points {
        let d = geometry::geodesic_distance(x, params.mu())?;
        total += -0.5 * params.lambda() * d * d - log_z;
    }
    Ok(total)
}

/// Location then concentration. `weights = None` means equal weights.
pub fn fit_sn(
    points: &[SpherePoint],
    weights: Option<&[f64]>,
    frechet_cfg: &FrechetConfig,
    conc_cfg: &ConcentrationConfig,
) -> Result<MleResult> {
    let uniform;
    let weights = match weights {
        Some(w) => w,
        None => {
            uniform = vec![1.0; points.len()];
            &uniform
        }
    };
    let fm = weighted_frechet_mean(points, weights, frechet_cfg)?;
    let c_hat = dispersion(points, weights, &fm.mean)?;
    let conc = concentration_mle(c_hat, fm.mean.dim(), conc_cfg)?;
    let support_ok = points
        .iter()
        .zip(weights)
        .all(|(x, &w)| w == 0.0 || geometry::angle(x.coords(), fm.mean.coords()) < PI / 2.0);
    Ok(MleResult {
        params: SnParams::new(fm.mean, conc.lambda)?,
        c_hat,
        iterations_mu: fm.iterations,
        iterations_lambda: conc.iterations,
        converged: fm.converged && conc.converged,
        support_ok,
    })
}
