//! Synthetic data: mixture sampling and the two clustering scenarios,
//! plus a three-group surrogate for the household expenditure data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint, TangentVector};
use crate::metrics::LabelVector;
use crate::mixture::{ConcentrationMode, MixtureModel};
use crate::sn::{self, RadialSampler, SnParams};
use crate::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SmallMix,
    LargeMix,
    Household,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-mix" => Ok(Self::SmallMix),
            "large-mix" => Ok(Self::LargeMix),
            "household" => Ok(Self::Household),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scenario {s:?} (expected small-mix, large-mix or household)"
            ))),
        }
    }
}

/// Points with their generating component, labels 1..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub points: Vec<SpherePoint>,
    pub labels: LabelVector,
    pub model: MixtureModel,
}

/// Draws the component from the weights, then a point from it. Returns
/// 0-based component indices alongside the points.
pub fn sample_mixture<R: Rng + ?Sized>(
    model: &MixtureModel,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<SpherePoint>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be positive".into(),
        ));
    }
    let samplers = model
        .components()
        .iter()
        .map(|c| RadialSampler::new(c.dim(), c.lambda()))
        .collect::<Result<Vec<_>>>()?;
    let weights = model.weights();
    let last = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("weights sum to one");
    let mut points = Vec::with_capacity(n);
    let mut comps = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random::<f64>();
        let mut acc = 0.0;
        let mut j = last;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                j = i;
                break;
            }
        }
        points.push(samplers[j].sample_point(model.components()[j].mu(), rng)?);
        comps.push(j);
    }
    Ok((points, comps))
}

pub fn generate(scenario: Scenario, seed: u64) -> Result<LabeledSample> {
    match scenario {
        Scenario::SmallMix => small_mix(seed),
        Scenario::LargeMix => large_mix(seed),
        Scenario::Household => household(seed),
    }
}

/// Fixed group sizes: `sizes[k]` draws from component k.
fn grouped(components: Vec<SnParams>, sizes: &[usize], seed: u64) -> Result<LabeledSample> {
    let total: usize = sizes.iter().sum();
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (k, (c, &m)) in components.iter().zip(sizes).enumerate() {
        points.extend(sn::sample(c, m, &mut rng)?);
        labels.extend(std::iter::repeat_n(k + 1, m));
    }
    let weights = sizes.iter().map(|&m| m as f64 / total as f64).collect();
    Ok(LabeledSample {
        points,
        labels: LabelVector::new(labels)?,
        model: MixtureModel::new(components, weights, ConcentrationMode::Heterogeneous)?,
    })
}

/// 100 draws each from SN([-0.251, -0.968], 10) and SN([0.399, 0.917], 2)
/// on the circle.
pub fn small_mix(seed: u64) -> Result<LabeledSample> {
    let components = vec![
        SnParams::new(SpherePoint::new(vec![-0.251, -0.968])?, 10.0)?,
        SnParams::new(SpherePoint::new(vec![0.399, 0.917])?, 2.0)?,
    ];
    grouped(components, &[100, 100], seed)
}

/// Orthant sign patterns for the large-mix locations.
pub const LARGE_MIX_SIGNS: [[f64; 4]; 3] = [
    [1.0, 1.0, 1.0, 1.0],
    [-1.0, -1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
];
pub const LARGE_MIX_LAMBDAS: [f64; 3] = [40.0, 20.0, 60.0];
pub const LARGE_MIX_N: usize = 3000;

/// 3000 draws on S^3 from three components with concentrations 40, 20, 60.
/// Weights are `u_k / sum u` with `u_k ~ U(9, 11)`; each location is a
/// uniform point reflected into its own orthant.
pub fn large_mix(seed: u64) -> Result<LabeledSample> {
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let u: Vec<f64> = (0..3).map(|_| rng.random_range(9.0..11.0)).collect();
    let total: f64 = u.iter().sum();
    let weights: Vec<f64> = u.iter().map(|x| x / total).collect();
    let mut components = Vec::with_capacity(3);
    for (signs, &lambda) in LARGE_MIX_SIGNS.iter().zip(&LARGE_MIX_LAMBDAS) {
        let x = sn::uniform_point(4, &mut rng)?;
        let mu: Vec<f64> = x
            .coords()
            .iter()
            .zip(signs)
            .map(|(c, s)| c.abs() * s)
            .collect();
        components.push(SnParams::new(SpherePoint::new(mu)?, lambda)?);
    }
    let model = MixtureModel::new(components, weights, ConcentrationMode::Heterogeneous)?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let (points, comps) = sample_mixture(&model, LARGE_MIX_N, &mut rng)?;
    Ok(LabeledSample {
        points,
        labels: LabelVector::from_indices(&comps)?,
        model,
    })
}

pub const HOUSEHOLD_FEMALE: [f64; 3] = [0.954, 0.266, 0.135];
pub const HOUSEHOLD_MALE: [f64; 3] = [0.643, 0.407, 0.648];
pub const HOUSEHOLD_LAMBDA: f64 = 95.743;
/// Angular offset of each male subgroup from the male location.
pub const HOUSEHOLD_SPLIT: f64 = 0.285;

/// Surrogate for the household expenditure data on S^2: one tight group
/// of 100 at the female location, and a dispersed male group of 100 made
/// of two tight subgroups of 50 placed either side of the male location,
/// perpendicular to the female-male geodesic. With this split the male
/// group as a whole has concentration near 20.
pub fn household(seed: u64) -> Result<LabeledSample> {
    let female = SpherePoint::new(HOUSEHOLD_FEMALE.to_vec())?;
    let male = SpherePoint::new(HOUSEHOLD_MALE.to_vec())?;
    let toward = geometry::log_map(&male, &female)?;
    let v = toward.vec();
    let m = male.coords();
    let cross = vec![
        m[1] * v[2] - m[2] * v[1],
        m[2] * v[0] - m[0] * v[2],
        m[0] * v[1] - m[1] * v[0],
    ];
    let n = geometry::norm(&cross);
    let side: Vec<f64> = cross.iter().map(|c| c / n * HOUSEHOLD_SPLIT).collect();
    let a = geometry::exp_map(&TangentVector::new(male.clone(), side.clone())?);
    let b = geometry::exp_map(&TangentVector::new(
        male,
        side.iter().map(|c| -c).collect(),
    )?);
    let components = vec![
        SnParams::new(female, HOUSEHOLD_LAMBDA)?,
        SnParams::new(a, HOUSEHOLD_LAMBDA)?,
        SnParams::new(b, HOUSEHOLD_LAMBDA)?,
    ];
    grouped(components, &[100, 50, 50], seed)
}

/// Two-class gender labels for a household surrogate sample: 1 female,
/// 2 male.
pub fn household_gender(labels: &LabelVector) -> LabelVector {
    LabelVector::new(labels.as_slice().iter().map(|&l| l.min(2)).collect()).expect("non-empty")
}
