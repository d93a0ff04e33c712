//! Runs every acceptance criterion and prints one PASS/FAIL line each.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use spnorm::bench::{self, BenchConfig};
use spnorm::estimate::{self, ConcentrationConfig, RootMethod};
use spnorm::geometry::{self, SpherePoint, TangentVector};
use spnorm::metrics::{self, LabelVector};
use spnorm::mixture::{self, Assignment, ConcentrationMode, EmConfig, MixtureModel};
use spnorm::sn::{self, SnParams};
use spnorm::{rng_from_seed, simulate};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn partition_oracle() -> Outcome {
    let mut worst1: f64 = 0.0;
    for l in [0.5, 1.0, 5.0, 10.0, 50.0] {
        worst1 = worst1.max((sn::log_partition(1, l).unwrap() - common::log_z1(l)).abs());
    }
    let mut worst0: f64 = 0.0;
    for p in 1..=6 {
        worst0 =
            worst0.max((sn::log_partition(p, 0.0).unwrap() - common::log_sphere_volume(p)).abs());
    }
    check(
        worst1 < 1e-8 && worst0 < 1e-9,
        format!("max |log Z_1 err| {worst1:.1e}, max |log Z_p(0) err| {worst0:.1e}"),
    )
}

fn geometry_suite() -> Outcome {
    let mut rng = rng_from_seed(2024);
    let mut failures = 0;
    for _ in 0..10_000 {
        let d = rng.random_range(2..8);
        let x = sn::uniform_point(d, &mut rng).unwrap();
        let y = sn::uniform_point(d, &mut rng).unwrap();
        // round trip from a tangent vector of random length below pi
        let dir = sn::uniform_tangent_direction(&x, &mut rng);
        let len = rng.random_range(0.0..std::f64::consts::PI - 0.01);
        let v: Vec<f64> = dir.iter().map(|c| c * len).collect();
        let u = TangentVector::new(x.clone(), v.clone()).unwrap();
        let back = geometry::log_map(&x, &geometry::exp_map(&u)).unwrap();
        let round = back.vec().iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-8);
        // tangency and norm of Log
        let dist = geometry::geodesic_distance(&x, &y).unwrap();
        let lg = geometry::log_map(&x, &y).unwrap();
        let ip: f64 = x.coords().iter().zip(lg.vec()).map(|(a, b)| a * b).sum();
        if !(round && ip.abs() < 1e-10 && (lg.norm() - dist).abs() < 1e-10) {
            failures += 1;
        }
    }
    check(
        failures == 0,
        format!("{failures} of 10000 instances failed"),
    )
}

fn location_estimation() -> Outcome {
    let cfg = BenchConfig {
        dims: vec![5],
        location_lambdas: vec![10.0],
        sizes: vec![50, 200],
        ..BenchConfig::default()
    };
    let rows = bench::location_table(&cfg).map_err(|e| e.to_string())?;
    let (small, large) = (rows[0].fixed_accuracy, rows[1].fixed_accuracy);
    let ls = rows[1].line_search_accuracy;
    check(
        (0.017..=0.068).contains(&large) && large < small && (0.017..=0.068).contains(&ls),
        format!("median error n=200 {large:.5} (line search {ls:.5}), n=50 {small:.5}"),
    )
}

fn concentration_estimation() -> Outcome {
    let rows = bench::concentration_table(&BenchConfig::default()).map_err(|e| e.to_string())?;
    let gap = rows.iter().map(|r| r.max_method_gap).fold(0.0, f64::max);
    let cell = rows
        .iter()
        .find(|r| r.p == 5 && r.lambda == 10.0 && r.n == 200)
        .expect("cell present");
    let mut oracle_err: f64 = 0.0;
    for method in [RootMethod::Newton, RootMethod::Halley] {
        let cfg = ConcentrationConfig {
            method,
            ..ConcentrationConfig::default()
        };
        let fit = estimate::concentration_mle(common::c_hat_p1(10.0), 1, &cfg)
            .map_err(|e| e.to_string())?;
        oracle_err = oracle_err.max((fit.lambda - 10.0).abs());
    }
    check(
        gap < 1e-6 && cell.newton_accuracy < 0.10 && oracle_err < 1e-6,
        format!(
            "max method gap {gap:.1e} over {} cells, median rel err {:.4}, oracle err {oracle_err:.1e}",
            rows.len(),
            cell.newton_accuracy
        ),
    )
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = rng_from_seed(55);
    for _ in 0..100 {
        let p = rng.random_range(1..8);
        let center = sn::uniform_point(p + 1, &mut rng).unwrap();
        let params = SnParams::new(center.clone(), rng.random_range(1.0..30.0)).unwrap();
        let pts = sn::sample(&params, 25, &mut rng).unwrap();
        let w: Vec<f64> = (0..25).map(|_| rng.random_range(0.1..1.0)).collect();
        let off = sn::uniform_tangent_direction(&center, &mut rng);
        let mu = geometry::exp_map(
            &TangentVector::new(center, off.iter().map(|c| c * 0.4).collect()).unwrap(),
        );
        let g = estimate::frechet_gradient(&pts, &w, &mu).unwrap();
        // directional derivatives along a random orthonormal frame
        let mut frame: Vec<Vec<f64>> = Vec::new();
        while frame.len() < p {
            let mut v = sn::uniform_tangent_direction(&mu, &mut rng);
            for f in &frame {
                let ip: f64 = v.iter().zip(f).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(f).for_each(|(a, b)| *a -= ip * b);
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-6 {
                frame.push(v.iter().map(|a| a / n).collect());
            }
        }
        let f = |s: f64, v: &[f64]| {
            let y = geometry::exp_map(
                &TangentVector::new(mu.clone(), v.iter().map(|c| c * s).collect()).unwrap(),
            );
            estimate::frechet_objective(&pts, &w, &y).unwrap()
        };
        let t = 1e-5;
        let mut fd = vec![0.0; p + 1];
        for v in &frame {
            let dd = (f(t, v) - f(-t, v)) / (2.0 * t);
            fd.iter_mut().zip(v).for_each(|(a, b)| *a += dd * b);
        }
        let err: f64 = fd
            .iter()
            .zip(g.vec())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err / g.norm());
    }
    check(
        worst < 1e-5,
        format!("max relative error {worst:.2e} over 100 instances"),
    )
}

fn random_model(p: usize, k: usize, rng: &mut impl Rng) -> MixtureModel {
    let comps = (0..k)
        .map(|_| {
            SnParams::new(
                sn::uniform_point(p + 1, rng).unwrap(),
                rng.random_range(2.0..50.0),
            )
            .unwrap()
        })
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    MixtureModel::new(
        comps,
        raw.iter().map(|w| w / s).collect(),
        ConcentrationMode::Heterogeneous,
    )
    .unwrap()
}

fn em_ascent() -> Outcome {
    let worst: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(1000 + i);
            let p = rng.random_range(1..=5);
            let k = rng.random_range(1..=4);
            let n = rng.random_range(50..=500);
            let model = random_model(p, rng.random_range(1..=4), &mut rng);
            let (data, _) = simulate::sample_mixture(&model, n, &mut rng).unwrap();
            let r = mixture::fit_em(
                &data,
                &EmConfig {
                    seed: i,
                    ..EmConfig::new(k)
                },
            )
            .unwrap();
            r.loglik_trace
                .windows(2)
                .map(|w| w[0] - w[1])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let drop = worst.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    check(
        drop <= 1e-8,
        format!("largest single-step drop {drop:.2e} over 50 problems"),
    )
}

fn mean_scores(runs: &[metrics::Agreement]) -> (f64, f64, f64) {
    let m = runs.len() as f64;
    (
        runs.iter().map(|a| a.rand).sum::<f64>() / m,
        runs.iter().map(|a| a.jaccard).sum::<f64>() / m,
        runs.iter().map(|a| a.nmi).sum::<f64>() / m,
    )
}

fn small_mix_clustering() -> Outcome {
    let runs: Vec<metrics::Agreement> = (1..=10u64)
        .into_par_iter()
        .map(|seed| {
            let s = simulate::small_mix(seed).unwrap();
            let r = mixture::fit_em(
                &s.points,
                &EmConfig {
                    seed,
                    ..EmConfig::new(2)
                },
            )
            .unwrap();
            metrics::agreement(&r.labels(), &s.labels).unwrap()
        })
        .collect();
    let (rand, jac, nmi) = mean_scores(&runs);
    check(
        rand >= 0.95 && jac >= 0.95 && nmi >= 0.90,
        format!("mean Rand {rand:.4}, Jaccard {jac:.4}, NMI {nmi:.4}"),
    )
}

fn large_mix_clustering() -> Outcome {
    let samples: Vec<_> = (1..=10u64)
        .map(|s| simulate::large_mix(s).unwrap())
        .collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for assignment in [Assignment::Soft, Assignment::Hard] {
        let mut by_k = Vec::new();
        for k in 2..=4 {
            let runs: Vec<metrics::Agreement> = samples
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let cfg = EmConfig {
                        assignment,
                        seed: i as u64 + 1,
                        ..EmConfig::new(k)
                    };
                    let r = mixture::fit_em(&s.points, &cfg).unwrap();
                    metrics::agreement(&r.labels(), &s.labels).unwrap()
                })
                .collect();
            by_k.push(mean_scores(&runs));
        }
        let [k2, k3, k4] = [by_k[0], by_k[1], by_k[2]];
        let beats = |a: (f64, f64, f64), b: (f64, f64, f64)| a.0 > b.0 && a.1 > b.1 && a.2 > b.2;
        ok &= k3.0 >= 0.95 && beats(k3, k2) && beats(k3, k4);
        lines.push(format!(
            "{assignment:?} Rand K=2/3/4 {:.4}/{:.4}/{:.4}",
            k2.0, k3.0, k4.0
        ));
    }
    check(ok, lines.join("; "))
}

fn kmeans_limit() -> Outcome {
    let mut rng = rng_from_seed(909);
    let mut mismatches = 0;
    for _ in 0..20 {
        let p = rng.random_range(1..=5);
        let k = rng.random_range(2..=6);
        let comps: Vec<SnParams> = (0..k)
            .map(|_| SnParams::new(sn::uniform_point(p + 1, &mut rng).unwrap(), 1e6).unwrap())
            .collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let model = MixtureModel::new(
            comps,
            raw.iter().map(|w| w / s).collect(),
            ConcentrationMode::Homogeneous,
        )
        .unwrap();
        let data: Vec<SpherePoint> = (0..200)
            .map(|_| sn::uniform_point(p + 1, &mut rng).unwrap())
            .collect();
        let g = mixture::e_step(&data, &model).unwrap();
        for (x, got) in data.iter().zip(g.argmax()) {
            let nearest = (0..k)
                .min_by(|&a, &b| {
                    let da = geometry::geodesic_distance(x, model.components()[a].mu()).unwrap();
                    let db = geometry::geodesic_distance(x, model.components()[b].mu()).unwrap();
                    da.total_cmp(&db)
                })
                .unwrap();
            if got != nearest {
                mismatches += 1;
            }
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches over 20 instances of 200 points"),
    )
}

fn index_correctness() -> Outcome {
    let mut rng = rng_from_seed(31337);
    let mut worst: f64 = 0.0;
    let mut invariant = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=200);
        let (ka, kb) = (rng.random_range(1..8), rng.random_range(1..8));
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        let (la, lb) = (
            LabelVector::new(a.clone()).unwrap(),
            LabelVector::new(b.clone()).unwrap(),
        );
        let got = metrics::agreement(&la, &lb).unwrap();
        let (rand, jac) = common::brute_pair_indices(&a, &b);
        let nmi = common::brute_nmi(&a, &b);
        worst = worst
            .max((got.rand - rand).abs())
            .max((got.jaccard - jac).abs())
            .max((got.nmi - nmi).abs());
        let mut perm: Vec<usize> = (0..8).collect();
        for i in (1..8).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let a2 = LabelVector::new(a.iter().map(|&l| perm[l] + 1).collect()).unwrap();
        invariant &= metrics::agreement(&a2, &lb).unwrap() == got;
    }
    check(
        worst < 1e-12 && invariant,
        format!("max deviation from brute force {worst:.1e}, permutation invariant: {invariant}"),
    )
}

fn model_selection() -> Outcome {
    let picks: Vec<(usize, usize)> = (1..=10u64)
        .into_par_iter()
        .map(|seed| {
            let s = simulate::household(seed).unwrap();
            let n = s.points.len();
            let crit: Vec<mixture::InformationCriteria> = (2..=5)
                .map(|k| {
                    let r = mixture::fit_em(
                        &s.points,
                        &EmConfig {
                            seed,
                            ..EmConfig::new(k)
                        },
                    )
                    .unwrap();
                    mixture::information_criteria(&r, n).unwrap()
                })
                .collect();
            let argmin = |f: fn(&mixture::InformationCriteria) -> f64| {
                2 + (0..crit.len())
                    .min_by(|&a, &b| f(&crit[a]).total_cmp(&f(&crit[b])))
                    .unwrap()
            };
            (argmin(|c| c.bic), argmin(|c| c.hqic))
        })
        .collect();
    let bic = picks.iter().filter(|p| p.0 == 3).count();
    let hqic = picks.iter().filter(|p| p.1 == 3).count();
    check(
        bic >= 8 && hqic >= 8,
        format!("K=3 chosen by BIC in {bic}/10 seeds, by HQIC in {hqic}/10; picks {picks:?}"),
    )
}

/// Number, name, check and runtime budget in seconds.
type Criterion = (u32, &'static str, fn() -> Outcome, Option<u64>);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "partition-function oracle", partition_oracle, Some(1)),
        (2, "geometry suite", geometry_suite, Some(5)),
        (3, "location estimation", location_estimation, Some(30)),
        (
            4,
            "concentration estimation",
            concentration_estimation,
            Some(60),
        ),
        (5, "gradient correctness", gradient_check, Some(5)),
        (6, "EM ascent", em_ascent, Some(120)),
        (7, "small-mix clustering", small_mix_clustering, Some(30)),
        (8, "large-mix clustering", large_mix_clustering, Some(180)),
        (9, "k-means limit", kmeans_limit, None),
        (10, "index correctness", index_correctness, None),
        (11, "model-selection pattern", model_selection, Some(120)),
    ];
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|s| elapsed < Duration::from_secs(s));
        let budget = limit.map_or(String::new(), |s| format!(" / {s}s"));
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
