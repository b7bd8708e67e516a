//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `PCLPGM_SKIP_EXTENDED=1` to skip the p = 100 spot check.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use pclpgm_core::bench::{run_scenario, Scenario, ScenarioResult};
use pclpgm_core::count_model::{log_normalizer_derivs, pmf, sample};
use pclpgm_core::local_glm::{gradient, hessian, neg_loglik};
use pclpgm_core::matrix::default_names;
use pclpgm_core::rng::stream_rng;
use pclpgm_core::sim::{simulate_counts, Topology, TopologySpec};
use pclpgm_core::skeleton::test_ordered_pair;
use pclpgm_core::wald::{decide, Alpha};
use pclpgm_core::{
    fit, learn_skeleton, CountFamily, CountMatrix, DesignView, Execution, FitOptions,
    SkeletonOptions,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

const SEED: u64 = 2024;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn scale_free(p: usize) -> TopologySpec {
    TopologySpec {
        kind: Topology::ScaleFree { power: 1.0 },
        p,
    }
}

fn run(s: &Scenario, replicates: usize) -> ScenarioResult {
    run_scenario(s, replicates, SEED).expect("scenario runs")
}

fn summary_line(r: &ScenarioResult) -> String {
    let s = &r.summary;
    let opt = |m: Option<pclpgm_core::metrics::MeanSd>| {
        m.map_or("NA".to_string(), |m| format!("{:.3}", m.mean))
    };
    format!(
        "TP {:.3} ({:.3}) FP {:.3} PPV {} Se {}",
        s.tp.mean,
        s.tp.sd,
        s.fp.mean,
        opt(s.ppv),
        opt(s.se)
    )
}

fn table_row_scale_free() -> Outcome {
    let r = run(&Scenario::new(scale_free(10), 1000, 0.5), 50);
    let s = &r.summary;
    let se = s.se.map_or(0.0, |m| m.mean);
    let ok = s.tp.mean >= 8.7 && s.fp.mean <= 0.4 && se >= 0.97;
    (
        ok,
        format!(
            "{}; need TP >= 8.7, FP <= 0.4, Se >= 0.97",
            summary_line(&r)
        ),
    )
}

fn low_snr_hub() -> Outcome {
    let hub = TopologySpec {
        kind: Topology::Hub { n_hubs: 2 },
        p: 10,
    };
    let small = run(&Scenario::new(hub, 200, 5.0), 50);
    let large = run(&Scenario::new(hub, 2000, 5.0), 50);
    let (a, b) = (small.summary.tp.mean, large.summary.tp.mean);
    let ok = (1.0..=3.3).contains(&a) && b - a >= 3.0;
    (
        ok,
        format!(
            "n=200 TP {a:.3} in [1.0, 3.3]; n=2000 TP {b:.3}, gain {:.3} >= 3",
            b - a
        ),
    )
}

fn high_dimensional() -> Outcome {
    let mut s = Scenario::new(scale_free(100), 1000, 0.5);
    s.skeleton.max_cond_size = Some(3);
    let r = run(&s, 10);
    let ppv = r.summary.ppv.map_or(0.0, |m| m.mean);
    let se = r.summary.se.map_or(0.0, |m| m.mean);
    (
        se >= 0.90 && ppv >= 0.80,
        format!("{}; need Se >= 0.90, PPV >= 0.80", summary_line(&r)),
    )
}

fn type_one_error() -> Outcome {
    let (n, p, tests) = (2000, 5, 2000);
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|s| (0..p).filter(move |&t| t != s).map(move |t| (s, t)))
        .collect();
    let pois = Poisson::new(1.0).unwrap();
    let opts = SkeletonOptions::default();
    // one independent dataset per test, cycling through the ordered pairs
    let z: Vec<f64> = (0..tests)
        .map(|r| {
            let mut rng = stream_rng(SEED ^ 0x7e57, r as u64);
            let cols = (0..p)
                .map(|_| (0..n).map(|_| pois.sample(&mut rng) as u32).collect())
                .collect();
            let data = CountMatrix::from_columns(default_names(p), cols).unwrap();
            let (s, t) = pairs[r % pairs.len()];
            let o = test_ordered_pair(&data, s, t, &[], &opts).unwrap();
            assert!(!o.degenerate);
            o.z
        })
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for level in [0.01, 0.05] {
        let a = Alpha::new(level).unwrap();
        let rate = z.iter().filter(|&&v| decide(v, a)).count() as f64 / tests as f64;
        let half = 3.0 * (level * (1.0 - level) / tests as f64).sqrt();
        ok &= (rate - level).abs() <= half;
        parts.push(format!(
            "alpha {level}: rate {rate:.4} within {level} +/- {half:.4}"
        ));
    }
    (ok, parts.join("; "))
}

/// Negative log-likelihood written out directly for the grid oracle.
fn oracle_nll(theta: &[f64], x: &[Vec<f64>], y: &[u32], r: u32) -> f64 {
    let lf: Vec<f64> = (0..=r)
        .scan(0.0, |acc, k| {
            if k > 0 {
                *acc += f64::from(k).ln();
            }
            Some(*acc)
        })
        .collect();
    let mut total = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        let terms: Vec<f64> = (0..=r)
            .map(|k| f64::from(k) * eta - lf[k as usize])
            .collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
        total += lse - f64::from(yi) * eta + lf[yi as usize];
    }
    total / y.len() as f64
}

/// Exhaustive search on a grid, refined around the incumbent until the step
/// reaches 1e-5. A level is repeated while the best point sits on the edge of
/// its window.
fn grid_minimize(dim: usize, bound: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let search = |center: &[f64], half: f64, step: f64| -> Vec<f64> {
        let k = (half / step).round() as i64;
        let axis = |c: f64| -> Vec<f64> {
            (-k..=k)
                .map(|i| (c + i as f64 * step).clamp(-bound, bound))
                .collect()
        };
        let mut best = (f64::INFINITY, center.to_vec());
        if dim == 1 {
            for a in axis(center[0]) {
                let v = f(&[a]);
                if v < best.0 {
                    best = (v, vec![a]);
                }
            }
        } else {
            let ya = axis(center[1]);
            for a in axis(center[0]) {
                for &b in &ya {
                    let v = f(&[a, b]);
                    if v < best.0 {
                        best = (v, vec![a, b]);
                    }
                }
            }
        }
        best.1
    };
    let mut center = vec![0.0; dim];
    let mut half = bound;
    for step in [0.25, 0.05, 1e-2, 1e-3, 1e-4, 1e-5] {
        loop {
            let next = search(&center, half, step);
            let on_edge = next
                .iter()
                .zip(&center)
                .any(|(a, c)| (a - c).abs() >= half - 0.5 * step && a.abs() < bound);
            center = next;
            if !on_edge {
                break;
            }
        }
        half = 8.0 * step;
    }
    center
}

fn grid_oracle() -> Outcome {
    let mut rng = stream_rng(SEED, 55);
    let mut worst = 0.0f64;
    let mut redraws = 0;
    let mut done = 0;
    while done < 100 {
        let dim = 1 + done % 2;
        let r: u32 = rng.random_range(1..=4);
        let n: usize = rng.random_range(10..=50);
        let family = CountFamily::truncated(r).unwrap();
        let theta_true: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.6..0.6)).collect();
        let mut cols = vec![Vec::with_capacity(n); dim + 1];
        for _ in 0..n {
            let mut eta = 0.0;
            for j in 0..dim {
                let v = rng.random_range(0..=r);
                eta += theta_true[j] * f64::from(v);
                cols[j + 1].push(v);
            }
            cols[0].push(sample(family, eta, &mut rng).unwrap());
        }
        let data = CountMatrix::from_columns(default_names(dim + 1), cols).unwrap();
        let preds: Vec<usize> = (1..=dim).collect();
        let opts = FitOptions::default();
        let f = fit(&DesignView::new(&data, 0, &preds, family, false), &opts).unwrap();
        if !f.converged {
            // minimizer on the box boundary or at infinity; draw again
            redraws += 1;
            continue;
        }
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| preds.iter().map(|&j| f64::from(data.get(i, j))).collect())
            .collect();
        let y = data.column(0).to_vec();
        let g = grid_minimize(dim, opts.box_bound, |t| oracle_nll(t, &x, &y, r));
        for (a, b) in f.theta_hat.iter().zip(&g) {
            worst = worst.max((a - b).abs());
        }
        done += 1;
    }
    (
        worst <= 1e-4,
        format!("100 designs, max |newton - grid| = {worst:.2e} <= 1e-4 ({redraws} boundary designs redrawn)"),
    )
}

fn numerical_invariants() -> Outcome {
    let mut rng = stream_rng(SEED, 66);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let poisson = rng.random_bool(0.25);
        let r: u32 = rng.random_range(1..=10);
        let family = if poisson {
            CountFamily::Poisson
        } else {
            CountFamily::truncated(r).unwrap()
        };
        let xmax = if poisson { 5 } else { r };
        let width = if poisson { 0.3 } else { 1.0 };
        let k: usize = rng.random_range(1..=3);
        let n: usize = rng.random_range(5..=40);
        let cols: Vec<Vec<u32>> = (0..=k)
            .map(|_| (0..n).map(|_| rng.random_range(0..=xmax)).collect())
            .collect();
        let data = CountMatrix::from_columns(default_names(k + 1), cols).unwrap();
        let preds: Vec<usize> = (1..=k).collect();
        let intercept = rng.random_bool(0.5);
        let design = DesignView::new(&data, 0, &preds, family, intercept);
        let dim = design.dim();
        let theta: Vec<f64> = (0..dim).map(|_| rng.random_range(-width..width)).collect();

        let h = 1e-3;
        // five-point central stencil, truncation error O(h^4)
        let stencil = |f: &dyn Fn(&[f64]) -> f64, j: usize| -> f64 {
            let at = |d: f64| {
                let mut t = theta.clone();
                t[j] += d;
                f(&t)
            };
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        };
        let g = gradient(&theta, &design).unwrap();
        let obj = |t: &[f64]| neg_loglik(t, &design).unwrap();
        let fd_g: Vec<f64> = (0..dim).map(|j| stencil(&obj, j)).collect();
        let scale = fd_g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        for (a, b) in g.iter().zip(&fd_g) {
            worst_g = worst_g.max((a - b).abs() / scale);
        }

        let hm = hessian(&theta, &design).unwrap();
        let hscale = hm.amax().max(1e-3);
        for c in 0..dim {
            let comp = |t: &[f64]| gradient(t, &design).unwrap()[c];
            for j in 0..dim {
                worst_h = worst_h.max((hm[(c, j)] - stencil(&comp, j)).abs() / hscale);
            }
        }
    }

    let mut worst_sum = 0.0f64;
    let mut bounds_ok = true;
    for r in 1..=10u32 {
        let family = CountFamily::truncated(r).unwrap();
        let rf = f64::from(r);
        for i in 0..10_000 {
            let eta = -30.0 + 60.0 * i as f64 / 9_999.0;
            let (_, d2, d3) = log_normalizer_derivs(family, eta).unwrap();
            bounds_ok &= d2.abs() <= 2.0 * rf * rf && d3.abs() <= 6.0 * rf * rf * rf;
            if i % 10 == 0 {
                let total: f64 = (0..=r).map(|k| pmf(family, eta, k).unwrap()).sum();
                worst_sum = worst_sum.max((total - 1.0).abs());
            }
        }
    }
    let ok = worst_g <= 1e-6 && worst_h <= 1e-5 && worst_sum <= 1e-12 && bounds_ok;
    (
        ok,
        format!(
            "500 points: gradient rel err {worst_g:.1e} <= 1e-6, Hessian rel err {worst_h:.1e} <= 1e-5; \
             pmf sum err {worst_sum:.1e} <= 1e-12; derivative bounds {}",
            if bounds_ok { "hold" } else { "VIOLATED" }
        ),
    )
}

fn edge_bytes(g: &pclpgm_core::UndirectedGraph) -> Vec<u8> {
    let mut buf = Vec::new();
    g.write_edges(&mut buf).unwrap();
    buf
}

fn structural_invariants() -> Outcome {
    let p = 10;
    let mut perm_ok = 0;
    let mut mode_ok = 0;
    for d in 0..20u64 {
        let topo = scale_free(p);
        let truth = topo.generate(&mut stream_rng(SEED, 1000 + d)).unwrap();
        let data = simulate_counts(&truth, 400, 1.0, 0.5, &mut stream_rng(SEED, 2000 + d)).unwrap();
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut stream_rng(SEED, 3000 + d));
        let opts = SkeletonOptions::default();
        let base = learn_skeleton(&data, &opts).unwrap();
        let shuffled = learn_skeleton(&data.select_columns(&perm).unwrap(), &opts).unwrap();
        let mut inverse = vec![0; p];
        for (j, &orig) in perm.iter().enumerate() {
            inverse[orig] = j;
        }
        if base.graph.permute(&inverse).unwrap() == shuffled.graph {
            perm_ok += 1;
        }
        let par = learn_skeleton(
            &data,
            &SkeletonOptions {
                execution: Execution::LevelParallel,
                ..opts
            },
        )
        .unwrap();
        if par.graph == base.graph && par.trace == base.trace {
            mode_ok += 1;
        }
    }

    let truth = scale_free(p).generate(&mut stream_rng(SEED, 4000)).unwrap();
    let data = simulate_counts(&truth, 500, 1.0, 0.5, &mut stream_rng(SEED, 4001)).unwrap();
    let opts = SkeletonOptions {
        execution: Execution::LevelParallel,
        ..SkeletonOptions::default()
    };
    let with_threads = |k| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .unwrap();
        pool.install(|| edge_bytes(&learn_skeleton(&data, &opts).unwrap().graph))
    };
    let threads_ok = with_threads(1) == with_threads(8);
    (
        perm_ok == 20 && mode_ok == 20 && threads_ok,
        format!(
            "permutation invariance {perm_ok}/20; sequential = level-parallel {mode_ok}/20; \
             1 vs 8 workers byte-identical: {threads_ok}"
        ),
    )
}

fn consistency_trend() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for noise in [0.5, 5.0] {
        let ham: Vec<f64> = [200, 1000, 2000]
            .iter()
            .map(|&n| run(&Scenario::new(scale_free(10), n, noise), 50).mean_hamming())
            .collect();
        let monotone = ham.windows(2).all(|w| w[1] <= w[0]);
        ok &= monotone;
        parts.push(format!(
            "lambda_noise {noise}: mean Hamming {:.3} / {:.3} / {:.3}",
            ham[0], ham[1], ham[2]
        ));
    }
    (
        ok,
        format!(
            "{} at n = 200 / 1000 / 2000, non-increasing",
            parts.join("; ")
        ),
    )
}

fn main() -> ExitCode {
    let skip_extended = std::env::var("PCLPGM_SKIP_EXTENDED").is_ok_and(|v| v == "1");
    let criteria: Vec<Criterion> = vec![
        ("1 scale-free p=10 high-SNR row", table_row_scale_free),
        ("2 hub p=10 low-SNR degradation", low_snr_hub),
        ("3 scale-free p=100 spot check", high_dimensional),
        ("4 type-I calibration", type_one_error),
        ("5 newton vs grid oracle", grid_oracle),
        ("6 numerical invariants", numerical_invariants),
        ("7 structural invariants", structural_invariants),
        ("8 consistency trend", consistency_trend),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if skip_extended && name.starts_with('3') {
            println!("SKIP criterion {name} (PCLPGM_SKIP_EXTENDED=1)");
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(res) => res,
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    }
}
