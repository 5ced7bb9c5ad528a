//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{check_split, corrupted_label_uniformity, cyclic_dataset, gradient_case, max_gradient_error, toy_suite};
use confdim::bound::{sweep_concentration, Source};
use confdim::data::corrupt_half;
use confdim::measure::{bound_probability, correction_term, performance_change_rate, Verdict};
use confdim::nn::{OptimizerConfig, Precision};
use confdim::rank::{consistency_report, RankKey};
use confdim::runner::{rankings, ExperimentConfig, ExperimentPlan, OptimizerEntry, RunRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn closed_form() -> Outcome {
    let b0 = bound_probability(0.0).unwrap();
    let b1 = bound_probability(1.0).unwrap();
    let pass = (b0 - 0.9375).abs() < 5e-6 && (b1 - 0.98765).abs() < 5e-6;
    outcome(pass, format!("bound_probability(0) = {b0:.5}, bound_probability(1) = {b1:.5}"))
}

fn correction_laws() -> Outcome {
    let ms = [100, 1_000, 10_000, 100_000, 1_000_000];
    let errs = [0.0, 0.25, 0.5, 0.75, 1.0];
    let d = |e: f64, m: usize| correction_term(e, m, 1.0).unwrap();
    let dec_m = errs.iter().all(|&e| ms.windows(2).all(|w| d(e, w[1]) < d(e, w[0])));
    let inc_err = ms.iter().all(|&m| errs.windows(2).all(|w| d(w[1], m) > d(w[0], m)));
    let tail = d(1.0, 1_000_000);
    outcome(
        dec_m && inc_err && tail < 0.0015,
        format!("decreasing in m: {dec_m}, increasing in err: {inc_err}, delta(1, 1e6) = {tail:.6}"),
    )
}

fn concentration() -> Outcome {
    let start = Instant::now();
    let sources = [Source::Bernoulli { p: 0.5 }, Source::Uniform01, Source::Beta { a: 2.0, b: 5.0 }];
    let mut cells = Vec::new();
    for (i, &s) in sources.iter().enumerate() {
        cells.extend(sweep_concentration(&[8, 32, 100, 500], &[0.05, 0.1, 0.2, 0.5], s, 10_000, 1000 + i as u64).unwrap());
    }
    let held = cells.iter().filter(|c| c.holds_within(3.0)).count();
    let reference = cells
        .iter()
        .find(|c| c.m == 100 && c.delta == 0.1 && c.source == sources[0])
        .expect("reference cell");
    let exact = 0.9647997997822951;
    let gap = (reference.empirical_coverage - exact).abs();
    let elapsed = start.elapsed();
    outcome(
        held == cells.len() && gap <= 3.0 * reference.stderr && elapsed < Duration::from_secs(60),
        format!(
            "{held}/{} cells above floor - 3 se; reference cell {:.5} vs exact {exact:.5} ({:.2} se); {:.1}s",
            cells.len(),
            reference.empirical_coverage,
            gap / reference.stderr,
            elapsed.as_secs_f64()
        ),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut per_mode = [0usize; 2];
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut seed = 0;
    while per_mode.iter().sum::<usize>() < 50 {
        let (net, x, t) = gradient_case(seed);
        seed += 1;
        let mode = (net.spec().precision == Precision::Binarized) as usize;
        if per_mode[mode] >= 25 {
            continue;
        }
        let Some(err) = max_gradient_error(&net, &x, &t) else { continue };
        per_mode[mode] += 1;
        worst = worst.max(err);
        if err >= 1e-4 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{} full + {} binarized nets, max relative error {worst:.2e}; {:.1}s",
            per_mode[0],
            per_mode[1],
            elapsed.as_secs_f64()
        ),
    )
}

fn with_optimizer(mut cfg: ExperimentConfig, entry: OptimizerEntry) -> ExperimentConfig {
    cfg.optimizers = vec![entry];
    cfg
}


fn timed_run(cfg: &ExperimentConfig) -> (RunRecord, Duration) {
    let start = Instant::now();
    let rec = ExperimentPlan::new(cfg.clone()).unwrap().run().unwrap();
    (rec, start.elapsed())
}

/// `(cells where the large MLP has lower p than the linear model, cells compared)`.
fn capacity_gap(rec: &RunRecord) -> (usize, usize) {
    let p_of = |model: &str, c: &confdim::runner::CellRecord| {
        rec.cells
            .iter()
            .find(|o| {
                o.key.model_id == model
                    && o.key.dataset_id == c.key.dataset_id
                    && o.key.optimizer_id == c.key.optimizer_id
                    && o.key.repeat == c.key.repeat
            })
            .and_then(|o| o.measurement())
            .map(|m| m.p)
    };
    let mut lower = 0;
    let mut total = 0;
    for c in rec.cells.iter().filter(|c| c.key.model_id == "linear") {
        total += 1;
        if let (Some(lin), Some(big)) = (p_of("linear", c), p_of("mlp-64x64", c)) {
            if big < lin {
                lower += 1;
            }
        }
    }
    (lower, total)
}

fn ranking_consistency(rec: &RunRecord, elapsed: Duration) -> Outcome {
    let failed = rec.failed_cells().count();
    let report = consistency_report(&rankings(rec, RankKey::Cd).unwrap()).unwrap();
    let (lower, total) = capacity_gap(rec);
    let order = report.rankings[0].model_ids().join(" < ");
    outcome(
        failed == 0 && report.min_tau == 1.0 && lower == total && elapsed < Duration::from_secs(300),
        format!(
            "{} settings, CD min_tau = {}, order {order}; large MLP p < linear p in {lower}/{total} cells; {:.1}s",
            report.rankings.len(),
            report.min_tau,
            elapsed.as_secs_f64()
        ),
    )
}

fn optimizer_stability(records: &[&RunRecord]) -> Outcome {
    let mut by_cd = Vec::new();
    let mut by_p = Vec::new();
    for r in records {
        by_cd.extend(rankings(r, RankKey::Cd).unwrap());
        by_p.extend(rankings(r, RankKey::P).unwrap());
    }
    let failed: usize = records.iter().map(|r| r.failed_cells().count()).sum();
    let cd = consistency_report(&by_cd).unwrap();
    let p = consistency_report(&by_p).unwrap();
    outcome(
        failed == 0 && cd.min_tau == 1.0,
        format!(
            "{} settings over sgd/adam/adamw: CD min_tau = {}, p min_tau = {}",
            cd.rankings.len(),
            cd.min_tau,
            p.min_tau
        ),
    )
}

fn rate_verdicts() -> Outcome {
    let cases = [
        ((65.9, 57.2, 69.3, 72.0), (-13.2, 3.9)),
        ((65.9, 69.5, 69.3, 74.1), (5.5, 6.9)),
        ((65.9, 57.2, 27.5, 26.9), (-13.2, -2.2)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for ((ra, na, rb, nb), (pa, pb)) in cases {
        let c = performance_change_rate(ra, na, rb, nb).unwrap();
        let (a, b) = (100.0 * c.rate_a, 100.0 * c.rate_b);
        pass &= (a - pa).abs() <= 0.1 && (b - pb).abs() <= 0.1 && c.verdict == Verdict::Second;
        parts.push(format!("{a:+.2}%/{b:+.2}% {:?}", c.verdict));
    }
    outcome(pass, parts.join("; "))
}

fn determinism(first: &RunRecord, cfg: &ExperimentConfig) -> Outcome {
    let again = ExperimentPlan::new(cfg.clone()).unwrap().run().unwrap();
    let same_bytes = first.measurement_bytes() == again.measurement_bytes();
    let plan = ExperimentPlan::new(cfg.clone()).unwrap();
    let mut order: Vec<usize> = (0..plan.cells().len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    let permuted = plan.run_in_order(&order).unwrap();
    let same_cells = permuted.cells == first.cells;
    outcome(
        same_bytes && same_cells,
        format!(
            "rerun byte-identical: {same_bytes}; {} cells under a permuted schedule identical: {same_cells}",
            order.len()
        ),
    )
}

fn data_layer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = Vec::new();
    for trial in 0..1000 {
        let k = rng.random_range(2..=10);
        let n = rng.random_range(k.max(2)..400);
        let ds = cyclic_dataset(n, k);
        let pair = corrupt_half(&ds, rng.random()).unwrap();
        if let Err(e) = check_split(&ds, &pair) {
            bad.push(format!("trial {trial}: {e}"));
        }
    }
    let p = corrupted_label_uniformity(10, 100, 1000);
    outcome(
        bad.is_empty() && p > 0.01,
        format!("1000 splits, {} violations; k = 10 chi-square p-value {p:.3}", bad.len()),
    )
}

fn main() {
    let mut failures = 0;
    let mut emit = |n: usize, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} [{tag}] {name}: {}", o.detail);
        if !o.pass {
            failures += 1;
        }
    };
    emit(1, "closed-form bound probability", closed_form());
    emit(2, "correction-term laws", correction_laws());
    emit(3, "concentration validity", concentration());
    emit(4, "gradient correctness", gradients());

    let sgd_cfg = toy_suite();
    let (sgd, elapsed) = timed_run(&sgd_cfg);
    emit(5, "ranking consistency", ranking_consistency(&sgd, elapsed));

    let (adam, _) = timed_run(&with_optimizer(sgd_cfg.clone(), OptimizerEntry::new("adam", &OptimizerConfig::adam(0.003))));
    let (adamw, _) = timed_run(&with_optimizer(sgd_cfg.clone(), OptimizerEntry::new("adamw", &OptimizerConfig::adamw(0.003, 0.01))));
    emit(6, "optimizer stability", optimizer_stability(&[&sgd, &adam, &adamw]));

    emit(7, "rate-of-change verdicts", rate_verdicts());
    emit(8, "determinism", determinism(&sgd, &sgd_cfg));
    emit(9, "data-layer properties", data_layer());

    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 9 criteria passed");
}
