//! Clustering comparison indices and baseline clusterers.
//!
//! Rand and Jaccard are pair-counting indices computed from the contingency
//! table; NMI normalizes mutual information by the geometric mean of the
//! two entropies.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint};
use crate::rng_from_seed;

pub const DEFAULT_RESTARTS: usize = 10;
const LLOYD_MAX_ITER: usize = 300;

/// A clustering: one label per observation. Clusterers in this crate emit
/// labels 1..=K; the indices accept arbitrary label values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::NoObservations);
        }
        Ok(Self(labels))
    }

    /// Shifts 0-based cluster indices to 1-based labels.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|i| i + 1).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of distinct label values.
    pub fn num_clusters(&self) -> usize {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

impl TryFrom<Vec<usize>> for LabelVector {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelVector> for Vec<usize> {
    fn from(l: LabelVector) -> Self {
        l.0
    }
}

/// Pair classification counts: together in both, only in `a`, only in `b`,
/// apart in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub both: u128,
    pub only_a: u128,
    pub only_b: u128,
    pub neither: u128,
}

impl PairCounts {
    pub fn total(&self) -> u128 {
        self.both + self.only_a + self.only_b + self.neither
    }
}

struct Contingency {
    n: usize,
    cells: HashMap<(usize, usize), usize>,
    rows: HashMap<usize, usize>,
    cols: HashMap<usize, usize>,
}

impl Contingency {
    fn new(a: &LabelVector, b: &LabelVector) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch(a.len(), b.len()));
        }
        let mut cells = HashMap::new();
        let mut rows = HashMap::new();
        let mut cols = HashMap::new();
        for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
            *cells.entry((x, y)).or_insert(0) += 1;
            *rows.entry(x).or_insert(0) += 1;
            *cols.entry(y).or_insert(0) += 1;
        }
        Ok(Self {
            n: a.len(),
            cells,
            rows,
            cols,
        })
    }
}

fn choose2(m: usize) -> u128 {
    let m = m as u128;
    m * m.saturating_sub(1) / 2
}

pub fn pair_counts(a: &LabelVector, b: &LabelVector) -> Result<PairCounts> {
    let t = Contingency::new(a, b)?;
    let both: u128 = t.cells.values().map(|&c| choose2(c)).sum();
    let same_a: u128 = t.rows.values().map(|&c| choose2(c)).sum();
    let same_b: u128 = t.cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(t.n);
    let counts = PairCounts {
        both,
        only_a: same_a - both,
        only_b: same_b - both,
        neither: total + both - same_a - same_b,
    };
    debug_assert_eq!(counts.total(), total);
    Ok(counts)
}

/// Fraction of object pairs on which the two clusterings agree.
pub fn rand_index(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    let c = pair_counts(a, b)?;
    let total = c.total();
    if total == 0 {
        return Ok(1.0);
    }
    Ok((c.both + c.neither) as f64 / total as f64)
}

pub fn jaccard_index(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    let c = pair_counts(a, b)?;
    let denom = c.both + c.only_a + c.only_b;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(c.both as f64 / denom as f64)
}

/// `I(a; b) / sqrt(H(a) H(b))`. Two constant labelings score 1; a constant
/// against a non-constant labeling scores 0.
///
/// Terms are summed in an order fixed by the counts alone, so the value is
/// bit-identical under relabeling and under swapping the arguments.
pub fn nmi(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    let n = t.n as f64;
    let entropy = |m: &HashMap<usize, usize>| -> f64 {
        let mut counts: Vec<usize> = m.values().copied().collect();
        counts.sort_unstable();
        counts
            .iter()
            .map(|&c| {
                let q = c as f64 / n;
                -q * q.ln()
            })
            .sum()
    };
    let ha = entropy(&t.rows);
    let hb = entropy(&t.cols);
    if ha <= 0.0 && hb <= 0.0 {
        return Ok(1.0);
    }
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(0.0);
    }
    // same partition up to relabeling; the sums below would round
    if t.cells.len() == t.rows.len() && t.cells.len() == t.cols.len() {
        return Ok(1.0);
    }
    let mut cells: Vec<(usize, usize, usize)> = t
        .cells
        .iter()
        .map(|(&(x, y), &c)| {
            let (rx, cy) = (t.rows[&x], t.cols[&y]);
            (c, rx.min(cy), rx.max(cy))
        })
        .collect();
    cells.sort_unstable();
    let mi: f64 = cells
        .iter()
        .map(|&(c, u, v)| {
            let pxy = c as f64 / n;
            pxy * (pxy / ((u as f64 / n) * (v as f64 / n))).ln()
        })
        .sum();
    let (lo, hi) = if ha <= hb { (ha, hb) } else { (hb, ha) };
    Ok((mi / (lo * hi).sqrt()).clamp(0.0, 1.0))
}

/// Rand, Jaccard and NMI at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement {
    pub rand: f64,
    pub jaccard: f64,
    pub nmi: f64,
}

pub fn agreement(a: &LabelVector, b: &LabelVector) -> Result<Agreement> {
    Ok(Agreement {
        rand: rand_index(a, b)?,
        jaccard: jaccard_index(a, b)?,
        nmi: nmi(a, b)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: LabelVector,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared Euclidean distances.
    pub sse: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points<P: AsRef<[f64]>>(points: &[P], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "number of clusters must be positive".into(),
        ));
    }
    if points.len() < k {
        return Err(Error::TooFewObservations {
            needed: k,
            found: points.len(),
        });
    }
    let dim = points[0].as_ref().len();
    for p in points {
        geometry::check_dim(dim, p.as_ref().len())?;
    }
    Ok(dim)
}

/// Lloyd's algorithm with k-means++ seeding, best of `DEFAULT_RESTARTS`.
pub fn kmeans<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with_restarts(points, k, seed, DEFAULT_RESTARTS)
}

pub fn kmeans_with_restarts<P: AsRef<[f64]>>(
    points: &[P],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<KMeansResult> {
    check_points(points, k)?;
    let mut rng = rng_from_seed(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, k, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means++ seeding under an arbitrary dissimilarity.
fn plus_plus<P, R, D>(points: &[P], k: usize, rng: &mut R, dissim: D) -> Vec<Vec<f64>>
where
    P: AsRef<[f64]>,
    R: Rng + ?Sized,
    D: Fn(&[f64], &[f64]) -> f64,
{
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].as_ref().to_vec()];
    let mut best: Vec<f64> = points
        .iter()
        .map(|p| dissim(p.as_ref(), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in best.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[idx].as_ref().to_vec();
        for (b, p) in best.iter_mut().zip(points) {
            *b = b.min(dissim(p.as_ref(), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd<P: AsRef<[f64]>, R: Rng + ?Sized>(
    points: &[P],
    k: usize,
    rng: &mut R,
) -> Result<KMeansResult> {
    let n = points.len();
    let dim = points[0].as_ref().len();
    let mut centroids = plus_plus(points, k, rng, sq_dist);
    let mut assign = vec![usize::MAX; n];
    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let j = nearest(p.as_ref(), &centroids);
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assign) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p.as_ref()) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // reseed at the point worst served by its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points[a].as_ref(), &centroids[assign[a]]);
                        let db = sq_dist(points[b].as_ref(), &centroids[assign[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centroids[j] = points[far].as_ref().to_vec();
            }
        }
    }
    let sse = points
        .iter()
        .zip(&assign)
        .map(|(p, &j)| sq_dist(p.as_ref(), &centroids[j]))
        .sum();
    Ok(KMeansResult {
        labels: LabelVector::from_indices(&assign)?,
        centroids,
        sse,
    })
}

/// Nearest centroid; ties go to the smallest index.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalKMeansResult {
    pub labels: LabelVector,
    pub centroids: Vec<SpherePoint>,
    /// Sum of cosine similarities to the assigned centroid.
    pub cohesion: f64,
}

/// Spherical k-means: cosine-similarity assignment, normalized-mean
/// centroids, best cohesion over `DEFAULT_RESTARTS`.
pub fn spherical_kmeans(
    points: &[SpherePoint],
    k: usize,
    seed: u64,
) -> Result<SphericalKMeansResult> {
    spherical_kmeans_with_restarts(points, k, seed, DEFAULT_RESTARTS)
}

pub fn spherical_kmeans_with_restarts(
    points: &[SpherePoint],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<SphericalKMeansResult> {
    check_points(points, k)?;
    let mut rng = rng_from_seed(seed);
    let mut best: Option<SphericalKMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = spherical_lloyd(points, k, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.cohesion > b.cohesion) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn most_similar(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_s = f64::NEG_INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let s = geometry::dot(p, c);
        if s > best_s {
            best_s = s;
            best = j;
        }
    }
    best
}

fn spherical_lloyd<R: Rng + ?Sized>(
    points: &[SpherePoint],
    k: usize,
    rng: &mut R,
) -> Result<SphericalKMeansResult> {
    let n = points.len();
    let dim = points[0].ambient_dim();
    let mut centroids = plus_plus(points, k, rng, |a, b| (1.0 - geometry::dot(a, b)).max(0.0));
    let mut assign = vec![usize::MAX; n];
    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let j = most_similar(p.coords(), &centroids);
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &j) in points.iter().zip(&assign) {
            for (s, x) in sums[j].iter_mut().zip(p.coords()) {
                *s += x;
            }
        }
        let mut empty = Vec::new();
        for (j, s) in sums.iter().enumerate() {
            let norm = geometry::norm(s);
            if norm > geometry::MIN_NORM {
                centroids[j] = s.iter().map(|x| x / norm).collect();
            } else {
                empty.push(j);
            }
        }
        for j in empty {
            let worst = (0..n)
                .min_by(|&a, &b| {
                    let sa = geometry::dot(points[a].coords(), &centroids[assign[a]]);
                    let sb = geometry::dot(points[b].coords(), &centroids[assign[b]]);
                    sa.total_cmp(&sb).then(a.cmp(&b))
                })
                .expect("non-empty");
            centroids[j] = points[worst].coords().to_vec();
        }
    }
    let cohesion = points
        .iter()
        .zip(&assign)
        .map(|(p, &j)| geometry::dot(p.coords(), &centroids[j]))
        .sum();
    let centroids = centroids
        .into_iter()
        .map(SpherePoint::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(SphericalKMeansResult {
        labels: LabelVector::from_indices(&assign)?,
        centroids,
        cohesion,
    })
}
