//! The isotropic spherical normal (SN) distribution on S^p.
//!
//! The density with respect to the surface measure is
//! `exp(-lambda * d(x, mu)^2 / 2) / Z_p(lambda)`, where by isotropy the
//! normalizer reduces to a radial integral,
//! `Z_p(lambda) = A_{p-1} * int_0^pi exp(-lambda r^2 / 2) sin^{p-1}(r) dr`,
//! with `A_{p-1}` the surface area of S^{p-1}. The integral is evaluated with
//! a fixed-order Gauss–Legendre rule in log space.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint};
use crate::quadrature::QuadratureRule;

pub const LAMBDA_MAX: f64 = 1e8;

/// Above `TAIL_RADIUS^2 / pi^2` the radial integral is truncated to
/// [0, TAIL_RADIUS / sqrt(lambda)]; the discarded mass is below exp(-72).
const TAIL_RADIUS: f64 = 12.0;

/// Location and concentration of one SN component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SnParams {
    mu: SpherePoint,
    lambda: f64,
}

#[derive(Deserialize)]
struct RawParams {
    mu: SpherePoint,
    lambda: f64,
}

impl TryFrom<RawParams> for SnParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        SnParams::new(raw.mu, raw.lambda)
    }
}

impl SnParams {
    pub fn new(mu: SpherePoint, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { mu, lambda })
    }

    pub fn mu(&self) -> &SpherePoint {
        &self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn log_partition(&self) -> f64 {
        log_partition(self.dim(), self.lambda).expect("validated parameters")
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda <= 0.0 || lambda > LAMBDA_MAX {
        return Err(Error::InvalidParameter(format!(
            "concentration must lie in (0, {LAMBDA_MAX:e}], got {lambda}"
        )));
    }
    Ok(())
}

fn check_dimension(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::DimensionTooSmall(1));
    }
    Ok(())
}

/// log of the surface area of S^p, `2 pi^{(p+1)/2} / Gamma((p+1)/2)`.
pub fn log_sphere_area(p: usize) -> f64 {
    let h = (p as f64 + 1.0) / 2.0;
    std::f64::consts::LN_2 + h * PI.ln() - ln_gamma(h)
}

/// Upper end of the radial integration interval.
pub fn radial_upper_limit(lambda: f64) -> f64 {
    if lambda * PI * PI > TAIL_RADIUS * TAIL_RADIUS {
        TAIL_RADIUS / lambda.sqrt()
    } else {
        PI
    }
}

/// log of the unnormalized radial density `exp(-lambda r^2/2) sin^{p-1} r`.
pub fn log_radial_kernel(p: usize, lambda: f64, r: f64) -> f64 {
    let base = -0.5 * lambda * r * r;
    if p == 1 {
        base
    } else {
        base + (p as f64 - 1.0) * r.sin().ln()
    }
}

/// `log Z_p(lambda)` with the default order-128 rule. `lambda = 0` gives
/// the log surface area of S^p.
pub fn log_partition(p: usize, lambda: f64) -> Result<f64> {
    log_partition_with(QuadratureRule::default_rule(), p, lambda)
}

pub fn log_partition_with(rule: &QuadratureRule, p: usize, lambda: f64) -> Result<f64> {
    check_dimension(p)?;
    if !lambda.is_finite() {
        return Err(Error::NonFinite("concentration"));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "concentration must be non-negative, got {lambda}"
        )));
    }
    let upper = radial_upper_limit(lambda);
    let radial = rule.log_integrate(upper, |r| log_radial_kernel(p, lambda, r));
    Ok(log_sphere_area(p - 1) + radial)
}

/// Default finite-difference step, `1e-4 * max(1, lambda)`.
pub fn default_step(lambda: f64) -> f64 {
    1e-4 * lambda.max(1.0)
}

/// Centered differences `A`, `B`, `C` of a scalar function at `x`:
/// `f' ~ A / 2h`, `f'' ~ B / h^2`, `f''' ~ C / 2h^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Stencil {
    /// `with_third` controls whether the two outer points are evaluated.
    pub fn evaluate<F>(f: F, x: f64, h: f64, with_third: bool) -> Result<Stencil>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let fp = f(x + h)?;
        let f0 = f(x)?;
        let fm = f(x - h)?;
        let a = fp - fm;
        let b = fp - 2.0 * f0 + fm;
        let c = if with_third {
            f(x + 2.0 * h)? - 2.0 * fp + 2.0 * fm - f(x - 2.0 * h)?
        } else {
            0.0
        };
        Ok(Stencil { a, b, c })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
    Third,
}

/// Finite-difference derivative of `log Z_p` at `lambda` with step `h`.
pub fn grad_log_partition(p: usize, lambda: f64, order: DerivativeOrder, h: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {h}"
        )));
    }
    if lambda - 2.0 * h <= 0.0 {
        return Err(Error::StencilCrossesZero { lambda, h });
    }
    let with_third = order == DerivativeOrder::Third;
    let s = Stencil::evaluate(|l| log_partition(p, l), lambda, h, with_third)?;
    Ok(match order {
        DerivativeOrder::First => s.a / (2.0 * h),
        DerivativeOrder::Second => s.b / (h * h),
        DerivativeOrder::Third => s.c / (2.0 * h * h * h),
    })
}

/// `-lambda d^2(x, mu) / 2 - log Z_p(lambda)`; `lambda = 0` is accepted.
pub fn log_density_at(x: &SpherePoint, mu: &SpherePoint, lambda: f64) -> Result<f64> {
    let d = geometry::geodesic_distance(x, mu)?;
    Ok(-0.5 * lambda * d * d - log_partition(mu.dim(), lambda)?)
}

pub fn log_density(x: &SpherePoint, params: &SnParams) -> Result<f64> {
    log_density_at(x, &params.mu, params.lambda)
}

/// Inverse-CDF table for the radial law on [0, upper].
///
/// Once built for a given `(p, lambda)` the table is immutable and can be
/// shared across threads.
#[derive(Debug, Clone)]
pub struct RadialSampler {
    p: usize,
    lambda: f64,
    upper: f64,
    cdf: Vec<f64>,
}

impl RadialSampler {
    pub const CELLS: usize = 4096;

    pub fn new(p: usize, lambda: f64) -> Result<Self> {
        check_dimension(p)?;
        check_lambda(lambda)?;
        let upper = radial_upper_limit(lambda);
        let step = upper / Self::CELLS as f64;
        let logs: Vec<f64> = (0..=Self::CELLS)
            .map(|j| {
                let r = j as f64 * step;
                if j == 0 && p > 1 {
                    f64::NEG_INFINITY
                } else {
                    log_radial_kernel(p, lambda, r)
                }
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let mut cdf = Vec::with_capacity(Self::CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in dens.windows(2) {
            acc += 0.5 * (w[0] + w[1]);
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self {
            p,
            lambda,
            upper,
            cdf,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Radius with CDF value `u` in [0, 1], linear within a cell.
    pub fn radius_from_uniform(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let j = self.cdf.partition_point(|&c| c < u).clamp(1, Self::CELLS);
        let (lo, hi) = (self.cdf[j - 1], self.cdf[j]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.0 };
        let step = self.upper / Self::CELLS as f64;
        (j as f64 - 1.0 + frac) * step
    }

    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.radius_from_uniform(rng.random::<f64>())
    }

    /// One draw about `mu`: uniform tangent direction, sampled radius.
    pub fn sample_point<R: Rng + ?Sized>(
        &self,
        mu: &SpherePoint,
        rng: &mut R,
    ) -> Result<SpherePoint> {
        geometry::check_dim(self.p + 1, mu.ambient_dim())?;
        let r = self.sample_radius(rng);
        let dir = uniform_tangent_direction(mu, rng);
        let u: Vec<f64> = dir.iter().map(|v| r * v).collect();
        let mut out = vec![0.0; mu.ambient_dim()];
        geometry::exp_raw(mu.coords(), &u, &mut out);
        SpherePoint::new(out)
    }
}

/// Unit vector uniformly distributed in the tangent space at `mu`.
pub fn uniform_tangent_direction<R: Rng + ?Sized>(mu: &SpherePoint, rng: &mut R) -> Vec<f64> {
    loop {
        let mut z: Vec<f64> = (0..mu.ambient_dim())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        geometry::project_in_place(mu.coords(), &mut z);
        let n = geometry::norm(&z);
        if n > 1e-8 {
            z.iter_mut().for_each(|v| *v /= n);
            return z;
        }
    }
}

/// Uniformly distributed point on S^p.
pub fn uniform_point<R: Rng + ?Sized>(ambient_dim: usize, rng: &mut R) -> Result<SpherePoint> {
    loop {
        let z: Vec<f64> = (0..ambient_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        match SpherePoint::new(z) {
            Err(Error::NearZeroVector(_)) => continue,
            other => return other,
        }
    }
}

/// `n` i.i.d. draws from SN(mu, lambda).
pub fn sample<R: Rng + ?Sized>(
    params: &SnParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<SpherePoint>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be positive".into(),
        ));
    }
    let sampler = RadialSampler::new(params.dim(), params.lambda)?;
    (0..n)
        .map(|_| sampler.sample_point(&params.mu, rng))
        .collect()
}

pub fn sample_seeded(params: &SnParams, n: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    sample(params, n, &mut crate::rng_from_seed(seed))
}
