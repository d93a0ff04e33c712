//! Gauss–Legendre rules mapped onto the radial interval [0, pi].

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 128;

/// Gauss–Legendre nodes and weights on [0, pi]. The weights sum to pi.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter(
                "quadrature order must be positive".into(),
            ));
        }
        let (xs, ws) = legendre_nodes(order);
        let half = PI / 2.0;
        let nodes = xs.iter().map(|x| half * (x + 1.0)).collect();
        let weights = ws.iter().map(|w| half * w).collect();
        Ok(Self {
            nodes,
            weights,
            order,
        })
    }

    /// The shared default rule of order [`DEFAULT_ORDER`].
    pub fn default_rule() -> &'static QuadratureRule {
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| QuadratureRule::gauss_legendre(DEFAULT_ORDER).expect("positive order"))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Integral of `f` over [0, upper], `upper` in (0, pi].
    pub fn integrate<F: Fn(f64) -> f64>(&self, upper: f64, f: F) -> f64 {
        let scale = upper / PI;
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| w * f(scale * r))
            .sum();
        scale * sum
    }

    /// log of the integral of exp(log_f) over [0, upper], with the largest
    /// exponent factored out.
    pub fn log_integrate<F: Fn(f64) -> f64>(&self, upper: f64, log_f: F) -> f64 {
        let scale = upper / PI;
        let logs: Vec<f64> = self.nodes.iter().map(|r| log_f(scale * r)).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = logs
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * (l - max).exp())
            .sum();
        max + sum.ln() + scale.ln()
    }
}

/// Nodes and weights on [-1, 1] by Newton iteration on the three-term
/// recurrence, ascending order.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = w;
        xs[i] = -x;
        ws[i] = w;
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
