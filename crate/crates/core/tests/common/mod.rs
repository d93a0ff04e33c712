//! Reference implementations shared by the integration tests. They are
//! deliberately naive and share no code with the crate.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Rand and Jaccard from an explicit loop over all object pairs.
pub fn brute_pair_indices(a: &[usize], b: &[usize]) -> (f64, f64) {
    let (mut ss, mut sd, mut ds, mut dd) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1,
                (true, false) => sd += 1,
                (false, true) => ds += 1,
                (false, false) => dd += 1,
            }
        }
    }
    let total = ss + sd + ds + dd;
    let rand = if total == 0 {
        1.0
    } else {
        (ss + dd) as f64 / total as f64
    };
    let jd = ss + sd + ds;
    let jaccard = if jd == 0 { 1.0 } else { ss as f64 / jd as f64 };
    (rand, jaccard)
}

fn entropy_of(labels: &[usize]) -> f64 {
    let top = labels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| -(c as f64 / n) * (c as f64 / n).ln())
        .sum()
}

/// NMI through `I = H(a) + H(b) - H(a, b)` on a dense joint table.
pub fn brute_nmi(a: &[usize], b: &[usize]) -> f64 {
    let kb = b.iter().copied().max().unwrap_or(0) + 1;
    let joint: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| x * kb + y).collect();
    let (ha, hb) = (entropy_of(a), entropy_of(b));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    let mi = ha + hb - entropy_of(&joint);
    (mi / (ha * hb).sqrt()).clamp(0.0, 1.0)
}

/// `log Z_1` from the Gaussian integral over `[-pi, pi]`.
pub fn log_z1(lambda: f64) -> f64 {
    ((2.0 * PI / lambda).sqrt() * statrs::function::erf::erf(PI * (lambda / 2.0).sqrt())).ln()
}

/// `-d/dl log Z_1` from the closed form.
pub fn c_hat_p1(lambda: f64) -> f64 {
    let a = PI * (lambda / 2.0).sqrt();
    let d = 2.0 / PI.sqrt() * (-a * a).exp();
    0.5 / lambda - d * a / (2.0 * lambda * statrs::function::erf::erf(a))
}

/// Log hypervolume of the unit p-sphere.
pub fn log_sphere_volume(p: usize) -> f64 {
    let q = (p + 1) as f64 / 2.0;
    (2.0 * PI.powf(q) / statrs::function::gamma::gamma(q)).ln()
}
