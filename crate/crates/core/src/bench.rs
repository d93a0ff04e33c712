//! Estimation benchmarks over a grid of dimension, concentration and
//! sample size.
//!
//! Every repetition draws a fresh sample from SN(e_{p+1}, lambda) with a
//! seed derived from (p, lambda, n, rep), so any cell can be rerun alone.
//! Repetitions run on the rayon pool; rows come out sorted by
//! (p, lambda, n) and report medians over repetitions.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::derive_seed;
use crate::error::Result;
use crate::estimate::{self, ConcentrationConfig, FrechetConfig, RootMethod, StepRule};
use crate::geometry::SpherePoint;
use crate::sn::{self, SnParams};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub reps: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub dims: Vec<usize>,
    pub location_lambdas: Vec<f64>,
    pub concentration_lambdas: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            reps: 20,
            seed: 0,
            epsilon: 1e-8,
            dims: vec![5, 10, 20],
            location_lambdas: vec![5.0, 10.0, 50.0],
            concentration_lambdas: vec![1.0, 5.0, 10.0, 20.0],
            sizes: vec![50, 100, 150, 200],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocationRow {
    pub p: usize,
    pub lambda: f64,
    pub n: usize,
    pub line_search_accuracy: f64,
    pub line_search_time: f64,
    pub fixed_accuracy: f64,
    pub fixed_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub lambda: f64,
    pub p: usize,
    pub n: usize,
    pub newton_accuracy: f64,
    pub halley_accuracy: f64,
    pub newton_time: f64,
    pub halley_time: f64,
    /// Largest relative difference between the two estimates over reps.
    pub max_method_gap: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

pub fn rep_seed(seed: u64, p: usize, lambda: f64, n: usize, rep: usize) -> u64 {
    let s = derive_seed(seed, p as u64);
    let s = derive_seed(s, lambda.to_bits());
    let s = derive_seed(s, n as u64);
    derive_seed(s, rep as u64)
}

fn draw(p: usize, lambda: f64, n: usize, seed: u64) -> Result<(SpherePoint, Vec<SpherePoint>)> {
    let mu0 = SpherePoint::north_pole(p + 1)?;
    let params = SnParams::new(mu0.clone(), lambda)?;
    Ok((mu0, sn::sample_seeded(&params, n, seed)?))
}

fn euclidean(a: &SpherePoint, b: &SpherePoint) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let out = f()?;
    Ok((out, t.elapsed().as_secs_f64()))
}

struct LocationRep {
    ls_err: f64,
    ls_time: f64,
    fx_err: f64,
    fx_time: f64,
}

/// Location accuracy `||mu_hat - mu_0||` for line search against the fixed
/// step rule.
pub fn location_table(cfg: &BenchConfig) -> Result<Vec<LocationRow>> {
    let mut cells = Vec::new();
    for &p in &cfg.dims {
        for &lambda in &cfg.location_lambdas {
            for &n in &cfg.sizes {
                cells.push((p, lambda, n));
            }
        }
    }
    let line = FrechetConfig {
        step_rule: StepRule::LineSearch,
        epsilon: cfg.epsilon,
        ..FrechetConfig::default()
    };
    let fixed = FrechetConfig {
        epsilon: cfg.epsilon,
        ..FrechetConfig::default()
    };
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.reps).map(move |r| (c, r)))
        .collect();
    let results: Vec<LocationRep> = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let (p, lambda, n) = cells[c];
            let (mu0, pts) = draw(p, lambda, n, rep_seed(cfg.seed, p, lambda, n, rep))?;
            let w = vec![1.0; n];
            let (ls, ls_time) = timed(|| estimate::weighted_frechet_mean(&pts, &w, &line))?;
            let (fx, fx_time) = timed(|| estimate::weighted_frechet_mean(&pts, &w, &fixed))?;
            Ok(LocationRep {
                ls_err: euclidean(&ls.mean, &mu0),
                ls_time,
                fx_err: euclidean(&fx.mean, &mu0),
                fx_time,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cells
        .iter()
        .zip(results.chunks(cfg.reps.max(1)))
        .map(|(&(p, lambda, n), reps)| {
            let col =
                |f: fn(&LocationRep) -> f64| median(&mut reps.iter().map(f).collect::<Vec<_>>());
            LocationRow {
                p,
                lambda,
                n,
                line_search_accuracy: col(|r| r.ls_err),
                line_search_time: col(|r| r.ls_time),
                fixed_accuracy: col(|r| r.fx_err),
                fixed_time: col(|r| r.fx_time),
            }
        })
        .collect())
}

struct ConcentrationRep {
    newton_err: f64,
    halley_err: f64,
    newton_time: f64,
    halley_time: f64,
    gap: f64,
}

/// Concentration relative error `|lambda_hat - lambda_0| / lambda_0`,
/// Newton against Halley, both from the same location estimate.
pub fn concentration_table(cfg: &BenchConfig) -> Result<Vec<ConcentrationRow>> {
    let mut cells = Vec::new();
    for &lambda in &cfg.concentration_lambdas {
        for &p in &cfg.dims {
            for &n in &cfg.sizes {
                cells.push((p, lambda, n));
            }
        }
    }
    let frechet = FrechetConfig {
        epsilon: cfg.epsilon,
        ..FrechetConfig::default()
    };
    let newton = ConcentrationConfig {
        epsilon: cfg.epsilon,
        ..ConcentrationConfig::default()
    };
    let halley = ConcentrationConfig {
        method: RootMethod::Halley,
        ..newton
    };
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.reps).map(move |r| (c, r)))
        .collect();
    let results: Vec<ConcentrationRep> = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let (p, lambda, n) = cells[c];
            let (_, pts) = draw(p, lambda, n, rep_seed(cfg.seed, p, lambda, n, rep))?;
            let w = vec![1.0; n];
            let mu = estimate::weighted_frechet_mean(&pts, &w, &frechet)?.mean;
            let c_hat = estimate::dispersion(&pts, &w, &mu)?;
            let (nf, newton_time) = timed(|| estimate::concentration_mle(c_hat, p, &newton))?;
            let (hf, halley_time) = timed(|| estimate::concentration_mle(c_hat, p, &halley))?;
            Ok(ConcentrationRep {
                newton_err: (nf.lambda - lambda).abs() / lambda,
                halley_err: (hf.lambda - lambda).abs() / lambda,
                newton_time,
                halley_time,
                gap: (nf.lambda - hf.lambda).abs() / nf.lambda.max(1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cells
        .iter()
        .zip(results.chunks(cfg.reps.max(1)))
        .map(|(&(p, lambda, n), reps)| {
            let col = |f: fn(&ConcentrationRep) -> f64| {
                median(&mut reps.iter().map(f).collect::<Vec<_>>())
            };
            ConcentrationRow {
                lambda,
                p,
                n,
                newton_accuracy: col(|r| r.newton_err),
                halley_accuracy: col(|r| r.halley_err),
                newton_time: col(|r| r.newton_time),
                halley_time: col(|r| r.halley_time),
                max_method_gap: reps.iter().map(|r| r.gap).fold(0.0, f64::max),
            }
        })
        .collect())
}

pub fn write_location_csv<W: Write>(w: W, rows: &[LocationRow]) -> Result<()> {
    write_csv(w, rows)
}

pub fn write_concentration_csv<W: Write>(w: W, rows: &[ConcentrationRow]) -> Result<()> {
    write_csv(w, rows)
}

fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
