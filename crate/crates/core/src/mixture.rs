//! Finite SN mixtures fit by EM.
//!
//! The E-step computes responsibilities with a log-sum-exp shift. Hard and
//! stochastic variants replace each row by a one-hot row (argmax, or a
//! categorical draw) before the M-step. The M-step sets `pi_k` to the mean
//! responsibility, `mu_k` to a weighted Fréchet mean and `lambda_k` to the
//! concentration MLE of the weighted dispersion, either per component or
//! pooled across components.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{self, ConcentrationConfig, FrechetConfig, RootMethod, StepRule};
use crate::geometry::{self, SpherePoint};
use crate::metrics::{self, LabelVector};
use crate::sn::SnParams;
use crate::{derive_seed, rng_from_seed};

const WEIGHT_TOLERANCE: f64 = 1e-10;
/// Columns with total responsibility below this fraction of N are empty.
const EMPTY_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConcentrationMode {
    Heterogeneous,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    Soft,
    Hard,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// Frobenius change of the membership matrix.
    Membership,
    /// Relative change of the log-likelihood.
    LogLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct MixtureModel {
    components: Vec<SnParams>,
    weights: Vec<f64>,
    mode: ConcentrationMode,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    p: usize,
    #[serde(rename = "K")]
    k: usize,
    mode: ConcentrationMode,
    components: Vec<SnParams>,
    weights: Vec<f64>,
}

impl TryFrom<RawModel> for MixtureModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        if raw.components.len() != raw.k {
            return Err(Error::LengthMismatch(raw.k, raw.components.len()));
        }
        let model = MixtureModel::new(raw.components, raw.weights, raw.mode)?;
        if model.dim() != raw.p {
            return Err(Error::DimensionMismatch {
                expected: raw.p,
                found: model.dim(),
            });
        }
        Ok(model)
    }
}

impl From<MixtureModel> for RawModel {
    fn from(m: MixtureModel) -> Self {
        RawModel {
            p: m.dim(),
            k: m.k(),
            mode: m.mode,
            components: m.components,
            weights: m.weights,
        }
    }
}

impl MixtureModel {
    pub fn new(
        components: Vec<SnParams>,
        weights: Vec<f64>,
        mode: ConcentrationMode,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "mixture needs at least one component".into(),
            ));
        }
        if components.len() != weights.len() {
            return Err(Error::LengthMismatch(components.len(), weights.len()));
        }
        for c in &components[1..] {
            c.mu().check_same_dim(components[0].mu())?;
        }
        if weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0 || *w > 1.0)
        {
            return Err(Error::InvalidParameter(
                "mixture weights must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        if mode == ConcentrationMode::Homogeneous
            && components
                .iter()
                .any(|c| c.lambda() != components[0].lambda())
        {
            return Err(Error::InvalidParameter(
                "homogeneous mixture needs a common concentration".into(),
            ));
        }
        Ok(Self {
            components,
            weights,
            mode,
        })
    }

    pub fn components(&self) -> &[SnParams] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> ConcentrationMode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Sphere dimension p.
    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Number of free parameters: `(p+2)K - 1` heterogeneous, `(p+1)K`
    /// homogeneous.
    pub fn num_parameters(&self) -> usize {
        let (p, k) = (self.dim(), self.k());
        match self.mode {
            ConcentrationMode::Heterogeneous => (p + 2) * k - 1,
            ConcentrationMode::Homogeneous => (p + 1) * k,
        }
    }

    /// Same components in a new order: component `i` of the result is
    /// component `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k()];
        if order.len() != self.k() {
            return Err(Error::LengthMismatch(self.k(), order.len()));
        }
        for &i in order {
            if i >= self.k() || seen[i] {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            seen[i] = true;
        }
        Ok(Self {
            components: order.iter().map(|&i| self.components[i].clone()).collect(),
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            mode: self.mode,
        })
    }

    fn log_terms(&self) -> Vec<(f64, f64)> {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| (w.ln() - c.log_partition(), c.lambda()))
            .collect()
    }

    fn check_data(&self, data: &[SpherePoint]) -> Result<()> {
        for x in data {
            x.check_same_dim(self.components[0].mu())?;
        }
        Ok(())
    }
}

/// N×K responsibilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl MembershipMatrix {
    /// Validates non-negative rows summing to one.
    pub fn new(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoObservations);
        }
        if k == 0 || data.len() != n * k {
            return Err(Error::LengthMismatch(n * k, data.len()));
        }
        for row in data.chunks(k) {
            let s: f64 = row.iter().sum();
            if row.iter().any(|g| !(*g >= 0.0)) || (s - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::InvalidParameter(
                    "membership rows must be probability vectors".into(),
                ));
            }
        }
        Ok(Self { n, k, data })
    }

    /// One-hot rows from 0-based cluster indices.
    pub fn one_hot(indices: &[usize], k: usize) -> Result<Self> {
        let mut data = vec![0.0; indices.len() * k];
        for (i, &j) in indices.iter().enumerate() {
            if j >= k {
                return Err(Error::InvalidParameter(format!(
                    "cluster index {j} out of range"
                )));
            }
            data[i * k + j] = 1.0;
        }
        Self::new(indices.len(), k, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.k)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.k];
        for row in self.rows() {
            for (a, g) in s.iter_mut().zip(row) {
                *a += g;
            }
        }
        s
    }

    pub fn is_one_hot(&self) -> bool {
        self.rows().all(|r| {
            r.iter().filter(|&&g| g == 1.0).count() == 1 && r.iter().all(|&g| g == 0.0 || g == 1.0)
        })
    }

    /// Row argmax, ties to the smallest index.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }

    /// 1-based labels from the row argmax.
    pub fn labels(&self) -> LabelVector {
        LabelVector::from_indices(&self.argmax()).expect("n >= 1")
    }

    pub fn frobenius_distance(&self, other: &Self) -> Result<f64> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::LengthMismatch(self.data.len(), other.data.len()));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

impl Serialize for MembershipMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.rows())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &g) in row.iter().enumerate() {
        if g > row[best] {
            best = j;
        }
    }
    best
}

/// Per-observation component log-joints `log pi_k + log f_k(x)` written into
/// `out`, returning the log-sum-exp over the row.
fn row_log_joint(
    x: &SpherePoint,
    model: &MixtureModel,
    terms: &[(f64, f64)],
    out: &mut [f64],
) -> f64 {
    for ((o, c), &(offset, lambda)) in out.iter_mut().zip(&model.components).zip(terms) {
        let d = geometry::angle(x.coords(), c.mu().coords());
        *o = offset - 0.5 * lambda * d * d;
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + out.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Responsibilities and the mixture log-likelihood in one pass.
pub fn e_step_with_loglik(
    data: &[SpherePoint],
    model: &MixtureModel,
) -> Result<(MembershipMatrix, f64)> {
    if data.is_empty() {
        return Err(Error::NoObservations);
    }
    model.check_data(data)?;
    let k = model.k();
    let terms = model.log_terms();
    let mut gamma = vec![0.0; data.len() * k];
    let mut total = 0.0;
    for (x, row) in data.iter().zip(gamma.chunks_mut(k)) {
        let lse = row_log_joint(x, model, &terms, row);
        total += lse;
        let mut s = 0.0;
        for g in row.iter_mut() {
            *g = (*g - lse).exp();
            s += *g;
        }
        for g in row.iter_mut() {
            *g /= s;
        }
    }
    Ok((
        MembershipMatrix {
            n: data.len(),
            k,
            data: gamma,
        },
        total,
    ))
}

pub fn e_step(data: &[SpherePoint], model: &MixtureModel) -> Result<MembershipMatrix> {
    Ok(e_step_with_loglik(data, model)?.0)
}

/// `sum_n log sum_k pi_k f(x_n | mu_k, lambda_k)`.
pub fn log_likelihood(data: &[SpherePoint], model: &MixtureModel) -> Result<f64> {
    Ok(point_log_densities(data, model)?.iter().sum())
}

/// Mixture log-density of each observation.
pub fn point_log_densities(data: &[SpherePoint], model: &MixtureModel) -> Result<Vec<f64>> {
    model.check_data(data)?;
    let terms = model.log_terms();
    let mut buf = vec![0.0; model.k()];
    Ok(data
        .iter()
        .map(|x| row_log_joint(x, model, &terms, &mut buf))
        .collect())
}

/// One-hot rows at the argmax, ties to the smallest index.
pub fn harden(gamma: &MembershipMatrix) -> MembershipMatrix {
    MembershipMatrix::one_hot(&gamma.argmax(), gamma.k).expect("indices in range")
}

/// One-hot rows drawn from each row's categorical distribution.
pub fn stochasticize<R: Rng + ?Sized>(gamma: &MembershipMatrix, rng: &mut R) -> MembershipMatrix {
    let idx: Vec<usize> = gamma
        .rows()
        .map(|row| {
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            let mut last = 0;
            for (j, &g) in row.iter().enumerate() {
                if g > 0.0 {
                    last = j;
                }
                acc += g;
                if u < acc {
                    return j;
                }
            }
            last
        })
        .collect();
    MembershipMatrix::one_hot(&idx, gamma.k).expect("indices in range")
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MStepConfig {
    pub frechet: FrechetConfig,
    pub concentration: ConcentrationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MStepOutcome {
    pub model: MixtureModel,
    /// Components reseeded because their column was empty.
    pub reseeded: Vec<usize>,
    /// Components whose concentration solve failed and kept the previous value.
    pub lambda_fallbacks: Vec<usize>,
    /// Inner solves that hit their iteration cap.
    pub inner_nonconverged: usize,
}

/// Maximization step given responsibilities.
///
/// Each location is refined from the previous one and kept only if it
/// lowers the weighted Fréchet objective; each concentration likewise only
/// replaces the previous value if it lowers `c_hat * lambda + log Z`. This
/// keeps the expected complete log-likelihood from decreasing even when
/// the inner solvers stop early.
pub fn m_step(
    data: &[SpherePoint],
    gamma: &MembershipMatrix,
    previous: &MixtureModel,
    cfg: &MStepConfig,
) -> Result<MStepOutcome> {
    let n = data.len();
    let k = previous.k();
    if gamma.n != n {
        return Err(Error::LengthMismatch(n, gamma.n));
    }
    if gamma.k != k {
        return Err(Error::LengthMismatch(k, gamma.k));
    }
    previous.check_data(data)?;
    let p = previous.dim();
    let nf = n as f64;
    let sums = gamma.column_sums();
    let empty: Vec<usize> = (0..k).filter(|&j| sums[j] < EMPTY_FRACTION * nf).collect();

    let mut inner_nonconverged = 0;
    let mut mus = Vec::with_capacity(k);
    let mut sq_dists: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let old = previous.components[j].mu().clone();
        if empty.contains(&j) {
            mus.push(old);
            sq_dists.push(Vec::new());
            continue;
        }
        let w = gamma.column(j);
        let old_obj = estimate::frechet_objective(data, &w, &old)?;
        let mu = match estimate::weighted_frechet_mean_from(data, &w, old.clone(), &cfg.frechet) {
            Ok(fm) => {
                if !fm.converged {
                    inner_nonconverged += 1;
                }
                match estimate::frechet_objective(data, &w, &fm.mean) {
                    Ok(obj) if obj <= old_obj => fm.mean,
                    _ => old,
                }
            }
            Err(Error::CutLocus(_)) => {
                inner_nonconverged += 1;
                old
            }
            Err(e) => return Err(e),
        };
        sq_dists.push(
            data.iter()
                .map(|x| {
                    let d = geometry::angle(x.coords(), mu.coords());
                    d * d
                })
                .collect(),
        );
        mus.push(mu);
    }

    let mut lambda_fallbacks = Vec::new();
    let mut solve = |c_hat: f64, old: f64, j: usize, fallbacks: &mut Vec<usize>| -> f64 {
        match estimate::concentration_mle(c_hat, p, &cfg.concentration) {
            Ok(fit) => {
                if !fit.converged && fit.lambda > estimate::LAMBDA_MIN {
                    inner_nonconverged += 1;
                }
                let better = match (
                    estimate::objective_g(fit.lambda, c_hat, p),
                    estimate::objective_g(old, c_hat, p),
                ) {
                    (Ok(new), Ok(prev)) => new <= prev,
                    _ => false,
                };
                if better {
                    fit.lambda
                } else {
                    old
                }
            }
            Err(_) => {
                fallbacks.push(j);
                old
            }
        }
    };

    let mut lambdas: Vec<f64> = previous.components.iter().map(SnParams::lambda).collect();
    match previous.mode {
        ConcentrationMode::Heterogeneous => {
            for j in 0..k {
                if empty.contains(&j) {
                    continue;
                }
                let c_hat = gamma
                    .rows()
                    .zip(&sq_dists[j])
                    .map(|(r, d2)| r[j] * d2)
                    .sum::<f64>()
                    / (2.0 * sums[j]);
                lambdas[j] = solve(c_hat, lambdas[j], j, &mut lambda_fallbacks);
            }
        }
        ConcentrationMode::Homogeneous => {
            let mut acc = 0.0;
            for j in (0..k).filter(|j| !empty.contains(j)) {
                acc += gamma
                    .rows()
                    .zip(&sq_dists[j])
                    .map(|(r, d2)| r[j] * d2)
                    .sum::<f64>();
            }
            let c_hat = acc / (2.0 * nf);
            let common = solve(c_hat, lambdas[0], 0, &mut lambda_fallbacks);
            lambdas.iter_mut().for_each(|l| *l = common);
        }
    }

    let mut weights: Vec<f64> = sums.iter().map(|s| s / nf).collect();
    if !empty.is_empty() {
        // reseed at the observations the current mixture explains worst
        let dens = point_log_densities(data, previous)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| dens[a].total_cmp(&dens[b]).then(a.cmp(&b)));
        for (&j, &i) in empty.iter().zip(&order) {
            mus[j] = data[i].clone();
            weights[j] = 1.0 / nf;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }

    let components = mus
        .into_iter()
        .zip(lambdas)
        .map(|(mu, l)| SnParams::new(mu, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(MStepOutcome {
        model: MixtureModel::new(components, weights, previous.mode)?,
        reseeded: empty,
        lambda_fallbacks,
        inner_nonconverged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    pub assignment: Assignment,
    pub mode: ConcentrationMode,
    pub epsilon_gamma: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub stop_rule: StopRule,
    /// Inner solver tolerance during the iterations.
    pub inner_epsilon: f64,
    /// Inner solver tolerance for the closing M-step.
    pub final_epsilon: f64,
    pub step_rule: StepRule,
    pub root_method: RootMethod,
    pub kmeans_restarts: usize,
}

impl EmConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            assignment: Assignment::Soft,
            mode: ConcentrationMode::Heterogeneous,
            epsilon_gamma: 1e-6,
            max_iter: 200,
            seed: 0,
            stop_rule: StopRule::Membership,
            inner_epsilon: 1e-6,
            final_epsilon: 1e-8,
            step_rule: StepRule::Fixed(0.25),
            root_method: RootMethod::Newton,
            kmeans_restarts: metrics::DEFAULT_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        for (name, v) in [
            ("epsilon_gamma", self.epsilon_gamma),
            ("inner_epsilon", self.inner_epsilon),
            ("final_epsilon", self.final_epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    fn m_step_config(&self, epsilon: f64) -> MStepConfig {
        MStepConfig {
            frechet: FrechetConfig {
                step_rule: self.step_rule,
                epsilon,
                ..FrechetConfig::default()
            },
            concentration: ConcentrationConfig {
                method: self.root_method,
                epsilon,
                ..ConcentrationConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentEvent {
    pub iteration: usize,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmReport {
    pub model: MixtureModel,
    pub gamma: MembershipMatrix,
    /// Log-likelihood of the initial model and after every M-step, the
    /// closing one included.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeded: Vec<ComponentEvent>,
    pub lambda_fallbacks: Vec<ComponentEvent>,
    pub inner_nonconverged: usize,
}

impl EmReport {
    pub fn log_likelihood(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }

    pub fn labels(&self) -> LabelVector {
        self.gamma.labels()
    }
}

/// Initial mixture from 0-based hard labels: normalized centroids, cluster
/// fractions and per-cluster (or pooled) concentration MLEs.
pub fn model_from_labels(
    data: &[SpherePoint],
    labels: &[usize],
    k: usize,
    mode: ConcentrationMode,
    conc: &ConcentrationConfig,
) -> Result<MixtureModel> {
    if data.len() != labels.len() {
        return Err(Error::LengthMismatch(data.len(), labels.len()));
    }
    let n = data.len();
    let p = data[0].dim();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; p + 1]; k];
    for (x, &l) in data.iter().zip(labels) {
        if l >= k {
            return Err(Error::InvalidParameter(format!("label {l} out of range")));
        }
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(x.coords()) {
            *s += v;
        }
    }
    let mut mus = Vec::with_capacity(k);
    for (j, s) in sums.into_iter().enumerate() {
        let mu = match SpherePoint::new(s) {
            Ok(m) => m,
            // empty or balanced cluster: any member, or any point
            Err(_) => {
                let i = labels.iter().position(|&l| l == j).unwrap_or(j % n);
                data[i].clone()
            }
        };
        mus.push(mu);
    }
    let mut d2 = vec![0.0; k];
    for (x, &l) in data.iter().zip(labels) {
        let d = geometry::angle(x.coords(), mus[l].coords());
        d2[l] += d * d;
    }
    let pooled = d2.iter().sum::<f64>() / (2.0 * n as f64);
    let pooled_lambda = estimate::concentration_mle(pooled, p, conc)
        .map(|f| f.lambda)
        .unwrap_or(1.0);
    let lambdas: Vec<f64> = match mode {
        ConcentrationMode::Homogeneous => vec![pooled_lambda; k],
        ConcentrationMode::Heterogeneous => (0..k)
            .map(|j| {
                if counts[j] == 0 {
                    return pooled_lambda;
                }
                let c = d2[j] / (2.0 * counts[j] as f64);
                estimate::concentration_mle(c, p, conc)
                    .map(|f| f.lambda)
                    .unwrap_or(pooled_lambda)
            })
            .collect(),
    };
    let mut weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let components = mus
        .into_iter()
        .zip(lambdas)
        .map(|(mu, l)| SnParams::new(mu, l))
        .collect::<Result<Vec<_>>>()?;
    MixtureModel::new(components, weights, mode)
}

/// EM from a k-means initialization on ambient coordinates.
pub fn fit_em(data: &[SpherePoint], cfg: &EmConfig) -> Result<EmReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::NoObservations);
    }
    if data.len() < cfg.k {
        return Err(Error::TooFewObservations {
            needed: cfg.k,
            found: data.len(),
        });
    }
    let km =
        metrics::kmeans_with_restarts(data, cfg.k, derive_seed(cfg.seed, 1), cfg.kmeans_restarts)?;
    let labels: Vec<usize> = km.labels.as_slice().iter().map(|l| l - 1).collect();
    let init = model_from_labels(
        data,
        &labels,
        cfg.k,
        cfg.mode,
        &cfg.m_step_config(cfg.inner_epsilon).concentration,
    )?;
    fit_em_from(data, init, cfg)
}

/// EM from an explicit initial model. `cfg.k` and `cfg.mode` are taken from
/// the model.
pub fn fit_em_from(data: &[SpherePoint], init: MixtureModel, cfg: &EmConfig) -> Result<EmReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::NoObservations);
    }
    if data.len() < init.k() {
        return Err(Error::TooFewObservations {
            needed: init.k(),
            found: data.len(),
        });
    }
    let n = data.len();
    let k = init.k();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 2));
    let mut heuristic = |g: MembershipMatrix| match cfg.assignment {
        Assignment::Soft => g,
        Assignment::Hard => harden(&g),
        Assignment::Stochastic => stochasticize(&g, &mut rng),
    };
    let inner = cfg.m_step_config(cfg.inner_epsilon);
    let tol = cfg.epsilon_gamma * ((n * k) as f64).sqrt();

    let mut model = init;
    let (g0, l0) = e_step_with_loglik(data, &model)?;
    let mut gamma = heuristic(g0);
    let mut trace = vec![l0];
    let mut reseeded = Vec::new();
    let mut lambda_fallbacks = Vec::new();
    let mut inner_nonconverged = 0;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iter {
        iterations = iter;
        let out = m_step(data, &gamma, &model, &inner)?;
        record(&mut reseeded, iter, &out.reseeded);
        record(&mut lambda_fallbacks, iter, &out.lambda_fallbacks);
        inner_nonconverged += out.inner_nonconverged;
        model = out.model;
        let (g, l) = e_step_with_loglik(data, &model)?;
        let g = heuristic(g);
        let prev_l = *trace.last().expect("non-empty");
        trace.push(l);
        let done = match cfg.stop_rule {
            StopRule::Membership => g.frobenius_distance(&gamma)? < tol,
            StopRule::LogLikelihood => (l - prev_l).abs() < cfg.epsilon_gamma * l.abs().max(1.0),
        };
        gamma = g;
        if done {
            converged = true;
            break;
        }
    }

    let out = m_step(data, &gamma, &model, &cfg.m_step_config(cfg.final_epsilon))?;
    record(&mut reseeded, iterations + 1, &out.reseeded);
    record(&mut lambda_fallbacks, iterations + 1, &out.lambda_fallbacks);
    inner_nonconverged += out.inner_nonconverged;
    model = out.model;
    trace.push(log_likelihood(data, &model)?);

    Ok(EmReport {
        model,
        gamma,
        loglik_trace: trace,
        iterations,
        converged,
        reseeded,
        lambda_fallbacks,
        inner_nonconverged,
    })
}

fn record(events: &mut Vec<ComponentEvent>, iteration: usize, components: &[usize]) {
    events.extend(components.iter().map(|&component| ComponentEvent {
        iteration,
        component,
    }));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InformationCriteria {
    pub k_star: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    /// Undefined when `N <= k* + 1`.
    pub aicc: Option<f64>,
    pub bic: f64,
    pub hqic: f64,
}

pub fn criteria(log_likelihood: f64, k_star: usize, n: usize) -> Result<InformationCriteria> {
    if n == 0 {
        return Err(Error::NoObservations);
    }
    let k = k_star as f64;
    let nf = n as f64;
    let aic = -2.0 * log_likelihood + 2.0 * k;
    let aicc = (n > k_star + 1).then(|| aic + 2.0 * k * (k + 1.0) / (nf - k - 1.0));
    Ok(InformationCriteria {
        k_star,
        log_likelihood,
        aic,
        aicc,
        bic: -2.0 * log_likelihood + k * nf.ln(),
        hqic: -2.0 * log_likelihood + 2.0 * k * nf.ln().ln(),
    })
}

pub fn information_criteria(report: &EmReport, n: usize) -> Result<InformationCriteria> {
    criteria(report.log_likelihood(), report.model.num_parameters(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pt(v: &[f64]) -> SpherePoint {
        SpherePoint::new(v.to_vec()).unwrap()
    }

    fn circle(theta: f64) -> SpherePoint {
        pt(&[theta.cos(), theta.sin()])
    }

    fn two_component(l1: f64, l2: f64, mode: ConcentrationMode) -> MixtureModel {
        MixtureModel::new(
            vec![
                SnParams::new(circle(0.0), l1).unwrap(),
                SnParams::new(circle(PI / 2.0), l2).unwrap(),
            ],
            vec![0.5, 0.5],
            mode,
        )
        .unwrap()
    }

    fn mm(rows: &[&[f64]]) -> MembershipMatrix {
        let k = rows[0].len();
        MembershipMatrix::new(rows.len(), k, rows.concat()).unwrap()
    }

    #[test]
    fn model_validation() {
        let c = SnParams::new(circle(0.0), 1.0).unwrap();
        let d = SnParams::new(circle(1.0), 2.0).unwrap();
        let het = ConcentrationMode::Heterogeneous;
        assert!(MixtureModel::new(vec![], vec![], het).is_err());
        assert!(MixtureModel::new(vec![c.clone(), d.clone()], vec![0.5, 0.6], het).is_err());
        assert!(MixtureModel::new(vec![c.clone(), d.clone()], vec![0.5], het).is_err());
        assert!(MixtureModel::new(
            vec![c.clone(), d],
            vec![0.5, 0.5],
            ConcentrationMode::Homogeneous
        )
        .is_err());
        let e = SnParams::new(pt(&[0.0, 0.0, 1.0]), 1.0).unwrap();
        assert!(MixtureModel::new(vec![c, e], vec![0.5, 0.5], het).is_err());
    }

    #[test]
    fn single_component_posterior_is_one() {
        let m = MixtureModel::new(
            vec![SnParams::new(circle(0.3), 4.0).unwrap()],
            vec![1.0],
            ConcentrationMode::Heterogeneous,
        )
        .unwrap();
        let data: Vec<_> = (0..10).map(|i| circle(i as f64)).collect();
        let g = e_step(&data, &m).unwrap();
        assert!(g.rows().all(|r| r == [1.0]));
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let m = two_component(3.0, 3.0, ConcentrationMode::Homogeneous);
        let g = e_step(&[circle(PI / 4.0)], &m).unwrap();
        assert!((g.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((g.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sharp_components_give_hard_posteriors() {
        let m = two_component(1e6, 1e6, ConcentrationMode::Homogeneous);
        let g = e_step(&[circle(PI / 4.0 + 0.01)], &m).unwrap();
        assert!(g.get(0, 0) < 1e-12);
        assert!((g.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harden_examples() {
        assert_eq!(harden(&mm(&[&[0.2, 0.8]])), mm(&[&[0.0, 1.0]]));
        assert_eq!(harden(&mm(&[&[0.5, 0.5]])), mm(&[&[1.0, 0.0]]));
        let hot = mm(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(harden(&hot), hot);
        assert!(hot.is_one_hot());
    }

    #[test]
    fn stochasticize_examples() {
        let mut rng = rng_from_seed(5);
        let sure = mm(&[&[1.0, 0.0]]);
        for _ in 0..1000 {
            assert_eq!(stochasticize(&sure, &mut rng), sure);
        }
        let row = mm(&[&[0.3, 0.7]]);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| stochasticize(&row, &mut rng).get(0, 1) == 1.0)
            .count();
        assert!((hits as f64 / draws as f64 - 0.7).abs() < 0.01);
        let row3: &[f64] = &[0.2, 0.3, 0.5];
        let many = mm(&[row3; 50]);
        assert_eq!(
            stochasticize(&many, &mut rng_from_seed(9)),
            stochasticize(&many, &mut rng_from_seed(9))
        );
    }

    #[test]
    fn m_step_single_component_is_plain_mle() {
        let data: Vec<_> = (0..30).map(|i| circle(0.05 * i as f64 - 0.7)).collect();
        let cfg = MStepConfig::default();
        let start = MixtureModel::new(
            vec![SnParams::new(circle(1.0), 1.0).unwrap()],
            vec![1.0],
            ConcentrationMode::Heterogeneous,
        )
        .unwrap();
        let g = MembershipMatrix::new(30, 1, vec![1.0; 30]).unwrap();
        let out = m_step(&data, &g, &start, &cfg).unwrap();
        let fit = estimate::fit_sn(&data, None, &cfg.frechet, &cfg.concentration).unwrap();
        let c = &out.model.components()[0];
        assert!(geometry::geodesic_distance(c.mu(), fit.params.mu()).unwrap() < 1e-7);
        assert!((c.lambda() - fit.params.lambda()).abs() < 1e-6 * fit.params.lambda());
        assert_eq!(out.model.weights(), [1.0]);
    }

    #[test]
    fn m_step_hard_assignment_uses_members_only() {
        let a = [circle(0.1), circle(-0.2), circle(0.3)];
        let b = [circle(2.0), circle(2.4)];
        let data: Vec<_> = a.iter().chain(&b).cloned().collect();
        let g = MembershipMatrix::one_hot(&[0, 0, 0, 1, 1], 2).unwrap();
        let start = two_component(2.0, 2.0, ConcentrationMode::Heterogeneous);
        let cfg = MStepConfig::default();
        let out = m_step(&data, &g, &start, &cfg).unwrap();
        let ma = estimate::weighted_frechet_mean(&a, &[1.0; 3], &cfg.frechet)
            .unwrap()
            .mean;
        assert!(geometry::geodesic_distance(out.model.components()[0].mu(), &ma).unwrap() < 1e-7);
        assert!(
            geometry::geodesic_distance(out.model.components()[1].mu(), &circle(2.2)).unwrap()
                < 1e-7
        );
        assert_eq!(out.model.weights(), [0.6, 0.4]);
    }

    #[test]
    fn homogeneous_pool_of_mirror_clusters() {
        let offsets = [-0.3, -0.1, 0.05, 0.2, 0.4];
        let a: Vec<_> = offsets.iter().map(|t| circle(*t)).collect();
        let b: Vec<_> = offsets.iter().map(|t| circle(PI - t)).collect();
        let data: Vec<_> = a.iter().chain(&b).cloned().collect();
        let g = MembershipMatrix::one_hot(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1], 2).unwrap();
        let mut start = two_component(2.0, 2.0, ConcentrationMode::Homogeneous);
        start.components[1] = SnParams::new(circle(3.0), 2.0).unwrap();
        let cfg = MStepConfig::default();
        let out = m_step(&data, &g, &start, &cfg).unwrap();
        let single = estimate::fit_sn(&a, None, &cfg.frechet, &cfg.concentration).unwrap();
        for c in out.model.components() {
            assert!((c.lambda() - single.params.lambda()).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_column_is_reseeded() {
        let data = vec![circle(0.0), circle(0.1), circle(-0.1), circle(2.5)];
        let g = MembershipMatrix::one_hot(&[0, 0, 0, 0], 2).unwrap();
        let start = two_component(20.0, 20.0, ConcentrationMode::Heterogeneous);
        let out = m_step(&data, &g, &start, &MStepConfig::default()).unwrap();
        assert_eq!(out.reseeded, [1]);
        assert_eq!(out.model.components()[1].mu(), &data[3]);
        assert!(out.model.weights()[1] > 0.0);
    }

    #[test]
    fn mixture_invariant_to_split_component() {
        let data: Vec<_> = (0..20).map(|i| circle(0.3 * i as f64)).collect();
        let m = two_component(5.0, 2.0, ConcentrationMode::Heterogeneous);
        let c = m.components().to_vec();
        let split = MixtureModel::new(
            vec![c[0].clone(), c[1].clone(), c[1].clone()],
            vec![0.5, 0.25, 0.25],
            ConcentrationMode::Heterogeneous,
        )
        .unwrap();
        let a = log_likelihood(&data, &m).unwrap();
        let b = log_likelihood(&data, &split).unwrap();
        assert!((a - b).abs() < 1e-10 * a.abs());
    }

    #[test]
    fn single_component_loglik_matches_sn() {
        let c = SnParams::new(circle(0.4), 7.0).unwrap();
        let m = MixtureModel::new(vec![c.clone()], vec![1.0], ConcentrationMode::Heterogeneous)
            .unwrap();
        let data: Vec<_> = (0..15).map(|i| circle(0.1 * i as f64)).collect();
        let want = estimate::log_likelihood(&data, &c).unwrap();
        assert!((log_likelihood(&data, &m).unwrap() - want).abs() < 1e-10 * want.abs());
    }

    #[test]
    fn parameter_counts_and_criteria() {
        let het = two_component(1.0, 2.0, ConcentrationMode::Heterogeneous);
        assert_eq!(het.num_parameters(), 5);
        let c = SnParams::new(pt(&[0.0, 0.0, 1.0]), 1.0).unwrap();
        let three = MixtureModel::new(
            vec![c.clone(), c.clone(), c.clone()],
            vec![0.5, 0.25, 0.25],
            ConcentrationMode::Heterogeneous,
        )
        .unwrap();
        assert_eq!(three.num_parameters(), 11);
        let one = MixtureModel::new(vec![c], vec![1.0], ConcentrationMode::Heterogeneous).unwrap();
        assert_eq!(one.num_parameters(), 3);
        let ic = criteria(-10.0, 3, 100).unwrap();
        assert_eq!(ic.aic, 26.0);
        assert!((ic.bic - (20.0 + 3.0 * 100f64.ln())).abs() < 1e-12);
        assert!((ic.hqic - (20.0 + 6.0 * 100f64.ln().ln())).abs() < 1e-12);
        assert!((ic.aicc.unwrap() - (26.0 + 24.0 / 96.0)).abs() < 1e-12);
        assert_eq!(criteria(-10.0, 3, 4).unwrap().aicc, None);
        assert_eq!(
            two_component(1.0, 1.0, ConcentrationMode::Homogeneous).num_parameters(),
            4
        );
    }

    #[test]
    fn model_json_round_trip() {
        let m = two_component(
            5.123456789012345,
            0.1 + 0.2,
            ConcentrationMode::Heterogeneous,
        );
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"K\":2") && s.contains("\"p\":1") && s.contains("heterogeneous"));
        let back: MixtureModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn em_rejects_too_few_points() {
        let data = vec![circle(0.0), circle(1.0)];
        assert!(matches!(
            fit_em(&data, &EmConfig::new(3)),
            Err(Error::TooFewObservations {
                needed: 3,
                found: 2
            })
        ));
        assert!(matches!(
            fit_em(&[], &EmConfig::new(1)),
            Err(Error::NoObservations)
        ));
    }

    #[test]
    fn em_separates_two_arcs() {
        let mut data = Vec::new();
        for i in 0..20 {
            let t = 0.02 * i as f64;
            data.push(circle(t));
            data.push(circle(2.5 + t));
        }
        for assignment in [Assignment::Soft, Assignment::Hard, Assignment::Stochastic] {
            let cfg = EmConfig {
                assignment,
                ..EmConfig::new(2)
            };
            let r = fit_em(&data, &cfg).unwrap();
            let truth = LabelVector::new((0..40).map(|i| i % 2).collect()).unwrap();
            assert_eq!(metrics::rand_index(&r.labels(), &truth).unwrap(), 1.0);
            if assignment != Assignment::Soft {
                assert!(r.gamma.is_one_hot());
            }
        }
    }
}
