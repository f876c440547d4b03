//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any criterion fails.
//!
//! Run with `cargo test --test acceptance`; pass criterion numbers (e.g. `-- 2 9`) to run a
//! subset.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use wigs::data::{initial_split, Dataset};
use wigs::geometry::{DistanceCache, PairwiseDistances};
use wigs::harness::experiment::{REPLICATIONS_FILE, TRACES_FILE};
use wigs::harness::{self, DatasetSource, ExperimentConfig, RunRecord};
use wigs::metrics::{mean_relative_auc, wilcoxon_signed_rank};
use wigs::model::{bootstrap_indices, fit_bootstrap_committee, fit_ridge};
use wigs::rng::{rng_from_seed, Rng};
use wigs::sac::{
    actor_objective, critic_objective, train_on_target_task, SacAgent, SacConfig, StateVector,
};
use wigs::selectors::{self, SelectorKind};
use wigs::weights::{mab_select, mab_update, BanditState, PolicySpec, DEFAULT_ARMS};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "density veto",
            budget: Duration::from_secs(1),
            run: density_veto,
        },
        Criterion {
            name: "oracle equivalence",
            budget: Duration::from_secs(10),
            run: oracle_equivalence,
        },
        Criterion {
            name: "gradient correctness",
            budget: Duration::from_secs(30),
            run: gradient_correctness,
        },
        Criterion {
            name: "argmax equivalence",
            budget: Duration::from_secs(60),
            run: argmax_equivalence,
        },
        Criterion {
            name: "directional reproduction",
            budget: Duration::from_secs(15 * 60),
            run: directional_reproduction,
        },
        Criterion {
            name: "exhaustion invariant",
            budget: Duration::from_secs(10 * 60),
            run: exhaustion_invariant,
        },
        Criterion {
            name: "bandit sanity",
            budget: Duration::from_secs(5),
            run: bandit_sanity,
        },
        Criterion {
            name: "SAC control sanity",
            budget: Duration::from_secs(120),
            run: sac_control_sanity,
        },
        Criterion {
            name: "statistics",
            budget: Duration::from_secs(5),
            run: statistics,
        },
        Criterion {
            name: "determinism",
            budget: Duration::from_secs(5 * 60),
            run: determinism,
        },
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();

    let mut failed = 0;
    let mut ran = 0;
    for (i, c) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let outcome = (c.run)();
        let elapsed = started.elapsed();
        let in_budget = elapsed <= c.budget;
        let passed = outcome.passed && in_budget;
        ran += 1;
        failed += usize::from(!passed);
        let budget_note = if in_budget { "" } else { ", over budget" };
        println!(
            "{} {:>2} {}: {} [{:.2}s of {}s{budget_note}]",
            if passed { "PASS" } else { "FAIL" },
            id,
            c.name,
            outcome.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn wigs(policy: PolicySpec) -> SelectorKind {
    SelectorKind::Wigs { policy }
}

fn fixed(weight: f64) -> SelectorKind {
    wigs(PolicySpec::Static { weight })
}

fn run_in_tempdir(cfg: &ExperimentConfig) -> (RunRecord, tempfile::TempDir) {
    let dir = tempfile::tempdir().expect("tempdir");
    let record = harness::run_experiment(cfg, dir.path()).expect("experiment runs");
    (record, dir)
}

// 1

fn density_veto() -> Outcome {
    match harness::veto_demo(None, 0) {
        Ok(demo) => Outcome::new(
            demo.passed() && demo.random_checked == 1000,
            format!("{}; {}", demo.lines[0], demo.lines.last().unwrap()),
        ),
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

// 2

/// Plain ridge fit: centred normal equations solved by Gauss–Jordan inversion.
struct BruteRidge {
    beta: Vec<f64>,
    intercept: f64,
    means: Vec<f64>,
    inverse: Vec<Vec<f64>>,
    sigma2: f64,
}

impl BruteRidge {
    fn fit(rows: &[Vec<f64>], y: &[f64], alpha: f64) -> Self {
        let k = rows.len();
        let p = rows[0].len();
        let means: Vec<f64> = (0..p)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k as f64)
            .collect();
        let y_mean = y.iter().sum::<f64>() / k as f64;
        let xc: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| (0..p).map(|j| r[j] - means[j]).collect())
            .collect();
        let mut gram = vec![vec![0.0; p]; p];
        for a in 0..p {
            for b in 0..p {
                gram[a][b] = xc.iter().map(|r| r[a] * r[b]).sum::<f64>();
            }
            gram[a][a] += alpha;
        }
        let inverse = invert(gram);
        let xty: Vec<f64> = (0..p)
            .map(|j| xc.iter().zip(y).map(|(r, v)| r[j] * (v - y_mean)).sum())
            .collect();
        let beta: Vec<f64> = (0..p)
            .map(|a| (0..p).map(|b| inverse[a][b] * xty[b]).sum())
            .collect();
        let intercept = y_mean - (0..p).map(|j| beta[j] * means[j]).sum::<f64>();
        let rss: f64 = xc
            .iter()
            .zip(y)
            .map(|(r, v)| {
                let e = (0..p).map(|j| beta[j] * r[j]).sum::<f64>() - (v - y_mean);
                e * e
            })
            .sum();
        let dof = (k as i64 - p as i64 - 1).max(1) as f64;
        Self {
            beta,
            intercept,
            means,
            inverse,
            sigma2: rss / dof,
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>()
    }

    fn variance(&self, x: &[f64]) -> f64 {
        let xc: Vec<f64> = x.iter().zip(&self.means).map(|(a, m)| a - m).collect();
        let p = xc.len();
        let mut q = 0.0;
        for a in 0..p {
            for b in 0..p {
                q += xc[a] * self.inverse[a][b] * xc[b];
            }
        }
        (self.sigma2 * q).max(0.0)
    }
}

fn invert(mut m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let p = m.len();
    let mut inv: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| f64::from(i == j)).collect())
        .collect();
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        for j in 0..p {
            m[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..p {
            if r != col {
                let f = m[r][col];
                for j in 0..p {
                    m[r][j] -= f * m[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Largest scaled deviation `|a − b| / max(1, |b|)`.
fn max_dev(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn oracle_instance(seed: u64) -> Dataset {
    let mut r = rng_from_seed(1000 + seed);
    let n = r.random_range(12..=40);
    let p = r.random_range(1..=3);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|x| x.iter().sum::<f64>().sin() + 0.3 * r.random_range(-1.0..1.0))
        .collect();
    Dataset::from_rows("oracle", &rows, y).expect("valid instance")
}

fn oracle_equivalence() -> Outcome {
    const TOL: f64 = 1e-12;
    const ALPHA: f64 = 0.01;
    const B: usize = 10;
    let mut worst: Vec<(&str, f64)> = ["GSx", "GSy", "iGS", "WiGS", "Uncertainty", "QBC", "EMCM"]
        .iter()
        .map(|&n| (n, 0.0))
        .collect();
    let mut argmax_mismatches = Vec::new();
    for seed in 0..30u64 {
        let ds = oracle_instance(seed);
        let p = ds.n_features();
        let split = initial_split(&ds, 0.25, seed).unwrap();
        let (lx, ly) = ds.gather(&split.labeled);
        let (px, _) = ds.gather(&split.pool);
        let model = fit_ridge(&lx, p, &ly, ALPHA).unwrap();
        let preds = model.predict_rows(&px);
        let cache = DistanceCache::build(&ds, &split, &preds).unwrap();
        let pw = PairwiseDistances::compute(&ds, &split.pool, &split.labeled, &preds).unwrap();
        let committee = fit_bootstrap_committee(&lx, p, &ly, ALPHA, B, seed).unwrap();

        let lrows: Vec<Vec<f64>> = split.labeled.iter().map(|&i| ds.row(i).to_vec()).collect();
        let brute = BruteRidge::fit(&lrows, &ly, ALPHA);
        let bpreds: Vec<f64> = split
            .pool
            .iter()
            .map(|&n| brute.predict(ds.row(n)))
            .collect();
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        };
        let dx: Vec<Vec<f64>> = split
            .pool
            .iter()
            .map(|&n| {
                split
                    .labeled
                    .iter()
                    .map(|&m| dist(ds.row(n), ds.row(m)))
                    .collect()
            })
            .collect();
        let dy: Vec<Vec<f64>> = bpreds
            .iter()
            .map(|f| {
                split
                    .labeled
                    .iter()
                    .map(|&m| (f - ds.target(m)).abs())
                    .collect()
            })
            .collect();
        let row_min = |v: &Vec<f64>| v.iter().copied().fold(f64::INFINITY, f64::min);

        let mut check = |name: &str, got: &[f64], want: &[f64], chosen: usize| {
            let d = max_dev(got, want);
            let slot = worst.iter_mut().find(|(n, _)| name.starts_with(n)).unwrap();
            slot.1 = f64::max(slot.1, d);
            if chosen != first_argmax(want) {
                argmax_mismatches.push(format!("{name} on instance {seed}"));
            }
        };

        let gsx: Vec<f64> = dx.iter().map(row_min).collect();
        check(
            "GSx",
            cache.dx_min(),
            &gsx,
            selectors::select_gsx(&cache).unwrap().chosen,
        );
        let gsy: Vec<f64> = dy.iter().map(row_min).collect();
        check(
            "GSy",
            cache.dy_min(),
            &gsy,
            selectors::select_gsy(&cache).unwrap().chosen,
        );

        let igs: Vec<f64> = dx
            .iter()
            .zip(&dy)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(u, v)| u * v)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        check(
            "iGS",
            &selectors::igs_scores(&pw),
            &igs,
            selectors::select_igs(&pw).unwrap().chosen,
        );

        let span = |m: &[Vec<f64>]| {
            let all = m.iter().flatten();
            let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
            let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let phi = |v: f64, (lo, hi): (f64, f64)| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        let (sx, sy) = (span(&dx), span(&dy));
        for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let want: Vec<f64> = dx
                .iter()
                .zip(&dy)
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(u, v)| w * phi(*u, sx) + (1.0 - w) * phi(*v, sy))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let got = selectors::wigs_scores(&pw, w).unwrap();
            check(
                "WiGS",
                &got,
                &want,
                selectors::select_wigs(&pw, w).unwrap().chosen,
            );
        }

        let unc: Vec<f64> = split
            .pool
            .iter()
            .map(|&n| brute.variance(ds.row(n)))
            .collect();
        check(
            "Uncertainty",
            &selectors::uncertainty_scores(&model, &px).unwrap(),
            &unc,
            selectors::select_uncertainty(&model, &px).unwrap().chosen,
        );

        let members: Vec<BruteRidge> = (0..B)
            .map(|b| {
                let idx = bootstrap_indices(ly.len(), seed, b);
                let rows: Vec<Vec<f64>> = idx.iter().map(|&i| lrows[i].clone()).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| ly[i]).collect();
                BruteRidge::fit(&rows, &ys, ALPHA)
            })
            .collect();
        let mut qbc = Vec::new();
        let mut emcm = Vec::new();
        for (c, &n) in split.pool.iter().enumerate() {
            let x = ds.row(n);
            let ys: Vec<f64> = members.iter().map(|m| m.predict(x)).collect();
            let mean = ys.iter().sum::<f64>() / B as f64;
            qbc.push(ys.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / B as f64);
            let norm = (x
                .iter()
                .zip(&brute.means)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
                + 1.0)
                .sqrt();
            emcm.push(ys.iter().map(|v| (bpreds[c] - v).abs() * norm).sum::<f64>() / B as f64);
        }
        check(
            "QBC",
            &selectors::qbc_scores(&committee, &px, p),
            &qbc,
            selectors::select_qbc(&committee, &px, p).unwrap().chosen,
        );
        check(
            "EMCM",
            &selectors::emcm_scores(&model, &committee, &px),
            &emcm,
            selectors::select_emcm(&model, &committee, &px)
                .unwrap()
                .chosen,
        );
    }
    let within = worst.iter().all(|(_, d)| *d <= TOL);
    let summary: Vec<String> = worst.iter().map(|(n, d)| format!("{n} {d:.1e}")).collect();
    let mut detail = format!("30 instances, max deviation {}", summary.join(", "));
    if !argmax_mismatches.is_empty() {
        detail.push_str(&format!(
            "; argmax mismatches: {}",
            argmax_mismatches.join(", ")
        ));
    }
    Outcome::new(within && argmax_mismatches.is_empty(), detail)
}

// 3

fn random_state(r: &mut Rng) -> StateVector {
    let mut v = [0.0; 5];
    for x in &mut v {
        *x = r.random_range(-1.0..1.0);
    }
    StateVector::new(v)
}

/// `|a − n| / max(|a|, |n|, 1e-7)`.
fn grad_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn gradient_correctness() -> Outcome {
    const H: f64 = 1e-5;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut r = rng_from_seed(300 + seed);
        let mut agent = SacAgent::new(SacConfig::default(), &mut r).unwrap();
        let states: Vec<StateVector> = (0..8).map(|_| random_state(&mut r)).collect();
        let z: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut r)).collect();

        let analytic = actor_objective(&agent, &states, &z).unwrap().1.flatten();
        let base = agent.actor().params();
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] = base[k] + H;
            agent.actor_mut().set_params(&p).unwrap();
            let lp = actor_objective(&agent, &states, &z).unwrap().0;
            p[k] = base[k] - H;
            agent.actor_mut().set_params(&p).unwrap();
            let lm = actor_objective(&agent, &states, &z).unwrap().0;
            worst = worst.max(grad_error(analytic[k], (lp - lm) / (2.0 * H)));
            checked += 1;
        }
        agent.actor_mut().set_params(&base).unwrap();

        let sa = DMatrix::from_fn(8, 6, |_, _| r.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
        for i in 0..2 {
            let critic = agent.critic_mut(i);
            let analytic = critic_objective(critic, &sa, &y).unwrap().1.flatten();
            let base = critic.params();
            for k in 0..base.len() {
                let mut p = base.clone();
                p[k] = base[k] + H;
                critic.set_params(&p).unwrap();
                let lp = critic_objective(critic, &sa, &y).unwrap().0;
                p[k] = base[k] - H;
                critic.set_params(&p).unwrap();
                let lm = critic_objective(critic, &sa, &y).unwrap().0;
                worst = worst.max(grad_error(analytic[k], (lp - lm) / (2.0 * H)));
                checked += 1;
            }
            critic.set_params(&base).unwrap();
        }
    }
    Outcome::new(
        worst <= 1e-4,
        format!(
            "5 agents (actor + twin critics), {checked} parameters, max relative error {worst:.2e}"
        ),
    )
}

// 4

fn argmax_equivalence() -> Outcome {
    let cfg = ExperimentConfig::synthetic(DatasetSource::TwoRegime, 200, vec![]);
    let ds = cfg.load_dataset().unwrap();
    let order = |m: &SelectorKind, seed| {
        harness::run_replication(&cfg, &ds, m, seed)
            .unwrap()
            .trace
            .acquisition_order()
    };
    let mut mismatches = Vec::new();
    for seed in 0..3 {
        if order(&fixed(1.0), seed) != order(&SelectorKind::Gsx, seed) {
            mismatches.push(format!("WiGS(1)≠GSx seed {seed}"));
        }
        if order(&fixed(0.0), seed) != order(&SelectorKind::Gsy, seed) {
            mismatches.push(format!("WiGS(0)≠GSy seed {seed}"));
        }
    }
    let detail = if mismatches.is_empty() {
        "two-regime N=200, seeds 0-2: identical acquisition orders".to_string()
    } else {
        mismatches.join(", ")
    };
    Outcome::new(mismatches.is_empty(), detail)
}

// 5

fn directional_reproduction() -> Outcome {
    let (s75, s25) = (fixed(0.75), fixed(0.25));
    let mut cfg = ExperimentConfig::synthetic(
        DatasetSource::TwoRegime,
        400,
        vec![SelectorKind::Igs, s75.clone(), s25.clone()],
    );
    cfg.experiment.replications = 10;
    cfg.experiment.parallelism = 0;
    let (record, _dir) = run_in_tempdir(&cfg);
    if !record.failures.is_empty() {
        return Outcome::new(
            false,
            format!("{} replications failed", record.failures.len()),
        );
    }
    let curves =
        |label: &str| -> Vec<Vec<f64>> { record.traces_for(label).map(|t| t.curve()).collect() };
    let igs = curves("iGS");
    let rel = |label: &str| {
        let c = curves(label);
        let pairs: Vec<(&[f64], &[f64])> = c
            .iter()
            .zip(&igs)
            .map(|(a, b)| (a.as_slice(), b.as_slice()))
            .collect();
        mean_relative_auc(&pairs).unwrap()
    };
    let (r75, r25) = (rel(&s75.label()), rel(&s25.label()));
    let means =
        |label: &str| -> Vec<f64> { record.traces_for(label).map(|t| t.mean_rmse()).collect() };
    let w = wilcoxon_signed_rank(&means(&s75.label()), &means("iGS")).unwrap();
    let checks = [r75 < 1.0, r25 > r75, w.p_value < 0.05];
    Outcome::new(
        checks.iter().all(|c| *c),
        format!(
            "two-regime N=400, 10 seeds: Rel AUC S(0.75) {r75:.4} (<1: {}), S(0.25) {r25:.4} (>S(0.75): {}), Wilcoxon p {:.4} (<0.05: {})",
            checks[0], checks[1], w.p_value, checks[2]
        ),
    )
}

// 6

fn exhaustion_invariant() -> Outcome {
    let mut cfg = ExperimentConfig::synthetic(
        DatasetSource::TwoRegime,
        150,
        SelectorKind::benchmark_suite(),
    );
    cfg.experiment.replications = 5;
    cfg.experiment.parallelism = 0;
    let (record, _dir) = run_in_tempdir(&cfg);
    let nonzero = record
        .traces
        .iter()
        .filter(|t| t.rows.last().is_none_or(|r| r.rmse != 0.0))
        .count();
    let expected = cfg.methods.len() * 5;
    Outcome::new(
        record.failures.is_empty() && nonzero == 0 && record.traces.len() == expected,
        format!(
            "{} of {expected} traces, {} failed, {nonzero} ending above 0",
            record.traces.len(),
            record.failures.len()
        ),
    )
}

// 7

fn bandit_sanity() -> Outcome {
    let means = [0.1, 0.3, 0.2];
    let best = 1;
    // N(μ, 0.01) in mean/variance notation
    let sd = 0.01f64.sqrt();
    let mut freqs = Vec::new();
    for seed in 0..10 {
        let mut r = rng_from_seed(seed);
        let arms: Vec<Normal<f64>> = means.iter().map(|&m| Normal::new(m, sd).unwrap()).collect();
        let mut state = BanditState::new(DEFAULT_ARMS.to_vec(), 2.0).unwrap();
        let mut hits = 0;
        let mut window = 0;
        for pull in 1..=1000 {
            let arm = mab_select(&state);
            mab_update(&mut state, arm, arms[arm].sample(&mut r)).unwrap();
            if pull >= 100 {
                window += 1;
                hits += usize::from(arm == best);
            }
        }
        freqs.push(hits as f64 / window as f64);
    }
    let min = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = freqs.iter().sum::<f64>() / freqs.len() as f64;
    Outcome::new(
        min > 0.8,
        format!("best-arm frequency over pulls 100-1000: min {min:.3}, mean {mean:.3} across 10 seeds (need > 0.8)"),
    )
}

// 8

fn sac_control_sanity() -> Outcome {
    let actions: Vec<f64> = (0..3)
        .map(|seed| train_on_target_task(SacConfig::default(), seed, 0.75, 5000).unwrap())
        .collect();
    let ok = actions.iter().all(|a| (a - 0.75).abs() < 0.1);
    let shown: Vec<String> = actions.iter().map(|a| format!("{a:.4}")).collect();
    Outcome::new(
        ok,
        format!(
            "deterministic actions after 5000 updates: {} (target 0.75 ± 0.1)",
            shown.join(", ")
        ),
    )
}

// 9

fn enumerated_p(d: &[f64]) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    if nz.is_empty() {
        return 1.0;
    }
    let n = nz.len();
    // average ranks of |d|
    let ranks: Vec<f64> = nz
        .iter()
        .map(|v| {
            let below = nz.iter().filter(|u| u.abs() < v.abs()).count() as f64;
            let tied = nz.iter().filter(|u| u.abs() == v.abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = ranks
        .iter()
        .zip(&nz)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, _)| r)
        .sum();
    let (mut lo, mut hi) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        lo += u64::from(w <= observed);
        hi += u64::from(w >= observed);
    }
    (2.0 * lo.min(hi) as f64 / (1u64 << n) as f64).min(1.0)
}

fn statistics() -> Outcome {
    let mut r = rng_from_seed(9);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = r.random_range(1..=8);
        // small integers so that ties and zeros occur
        let d: Vec<f64> = (0..n)
            .map(|_| f64::from(r.random_range(-4i32..=4)))
            .collect();
        let zeros = vec![0.0; n];
        let got = wilcoxon_signed_rank(&d, &zeros).unwrap();
        if got.p_value != enumerated_p(&d) || !got.exact {
            mismatches += 1;
        }
    }
    let example = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0; 3])
        .unwrap()
        .p_value;
    Outcome::new(
        mismatches == 0 && example == 0.25,
        format!(
            "100 random vectors (n ≤ 8): {mismatches} mismatches; {{1,2,3}} gives p = {example}"
        ),
    )
}

// 10

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::synthetic(
        DatasetSource::TwoRegime,
        120,
        vec![SelectorKind::Igs, wigs(PolicySpec::Sac)],
    );
    cfg.experiment.replications = 4;
    let run = |threads: usize| {
        let mut c = cfg.clone();
        c.experiment.parallelism = threads;
        let (_, dir) = run_in_tempdir(&c);
        let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
        (read(TRACES_FILE), read(REPLICATIONS_FILE))
    };
    let (t1, r1) = run(1);
    let (t8, r8) = run(8);
    let ok = t1 == t8 && r1 == r8;
    Outcome::new(
        ok,
        format!(
            "iGS + WiGS-SAC, 4 seeds: traces.csv {} bytes, parallelism 1 vs 8 {}",
            t1.len(),
            if ok { "byte-identical" } else { "differ" }
        ),
    )
}
