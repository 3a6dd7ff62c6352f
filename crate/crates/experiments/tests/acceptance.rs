//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use comexp_core::adaptive::{
    adaptive_gap_constants, expected_reward_greedy, optimal_policy_value_oracle,
    reach_probabilities, reward_gap_first_step, transition_list_greedy, RewardShape,
};
use comexp_core::estimation::{EstimatorState, EstimatorVariant};
use comexp_core::model::{
    make_instance, sample_member, CommunityInstance, ExplorationState, RngHandle, RoundFeedback,
};
use comexp_core::nonadaptive::{
    allocation_bounds, brute_force_optimal, expected_reward, fast_allocation,
    gap_constants_nonadaptive, greedy_allocation, Allocation,
};
use comexp_core::online::{nonadaptive_regret_bound, Mode, Variant};
use comexp_experiments::config::ExperimentConfig;
use comexp_experiments::runners::{regret_aggregates, RegretAggregate};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let e = start.elapsed();
    (
        e < limit,
        format!("{:.2}s of {}s", e.as_secs_f64(), limit.as_secs()),
    )
}

fn pick(rng: &mut RngHandle, lo: u32, hi: u32) -> u32 {
    lo + rng.below(hi - lo + 1)
}

fn inst(sizes: &[u32]) -> CommunityInstance {
    make_instance(sizes).unwrap()
}

fn reward(sizes: &[u32], k: &[usize]) -> f64 {
    sizes
        .iter()
        .zip(k)
        .map(|(&d, &k)| {
            let d = d as f64;
            d * (1.0 - (1.0 - 1.0 / d).powi(k as i32))
        })
        .sum()
}

fn enumerate_best(sizes: &[u32], budget: usize) -> f64 {
    fn rec(sizes: &[u32], slot: usize, left: usize, k: &mut Vec<usize>, best: &mut f64) {
        if slot + 1 == sizes.len() {
            k[slot] = left;
            *best = best.max(reward(sizes, k));
            return;
        }
        for v in 0..=left {
            k[slot] = v;
            rec(sizes, slot + 1, left - v, k, best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(sizes, 0, budget, &mut vec![0; sizes.len()], &mut best);
    best
}

// m ∈ {2,3,4}, d_i ∈ [1,8], K ∈ [m+1, 12]
fn offline_cases() -> Vec<(Vec<u32>, usize)> {
    let mut rng = RngHandle::new(101);
    (0..200)
        .map(|_| {
            let m = pick(&mut rng, 2, 4);
            let sizes = (0..m).map(|_| pick(&mut rng, 1, 8)).collect();
            let budget = pick(&mut rng, m + 1, 12) as usize;
            (sizes, budget)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut bad = 0;
    for (sizes, budget) in offline_cases() {
        let i = inst(&sizes);
        let g = expected_reward(&i, &greedy_allocation(&i, budget)).unwrap();
        let (_, bf) = brute_force_optimal(&i, budget).unwrap();
        let oracle = enumerate_best(&sizes, budget);
        let err = (g - bf).abs().max((g - oracle).abs());
        worst = worst.max(err);
        if err > 1e-12 {
            bad += 1;
        }
    }
    let (fast, t) = within(start, Duration::from_secs(10));
    outcome(
        bad == 0 && fast,
        format!("200 instances, {bad} mismatches, max error {worst:.2e}, {t}"),
    )
}

fn criterion_2() -> Outcome {
    let mut bad = Vec::new();
    let mut max_inc = 0;
    let mut max_l1 = 0;
    for (sizes, budget) in offline_cases() {
        let i = inst(&sizes);
        let m = sizes.len();
        let g = greedy_allocation(&i, budget);
        let f = fast_allocation(&i, budget).unwrap();
        let lower = Allocation::new(allocation_bounds(&i, budget).unwrap().lower_ceil());
        let l1 = lower.l1_distance(&g);
        max_inc = max_inc.max(f.increments);
        max_l1 = max_l1.max(l1);
        let same =
            (reward(&sizes, f.allocation.visits()) - reward(&sizes, g.visits())).abs() <= 1e-12;
        if !same || f.increments > m || l1 > m {
            bad.push((sizes, budget));
        }
    }
    outcome(
        bad.is_empty(),
        format!("200 instances, max increments {max_inc}, max L1(ceil lower, greedy) {max_l1}, failures {bad:?}"),
    )
}

fn criterion_3() -> Outcome {
    let sizes = [2, 3, 5, 6, 8, 10];
    let i = inst(&sizes);
    let mut errs = Vec::new();
    for (budget, want) in [
        (20, [1, 2, 3, 3, 5, 6]),
        (30, [2, 3, 4, 5, 7, 9]),
        (50, [3, 4, 7, 9, 12, 15]),
    ] {
        let g = greedy_allocation(&i, budget);
        errs.push((reward(&sizes, g.visits()) - reward(&sizes, &want)).abs());
    }
    let pass = errs.iter().all(|&e| e <= 1e-12);
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.1e}")).collect();
    outcome(
        pass,
        format!("K=20,30,50 reward errors [{}]", shown.join(", ")),
    )
}

fn criterion_4() -> Outcome {
    let i = inst(&[3, 4]);
    let tl = transition_list_greedy(&i, &ExplorationState::new(&i)).unwrap();
    let want = [
        1.0,
        1.0,
        3.0 / 4.0,
        2.0 / 3.0,
        1.0 / 2.0,
        1.0 / 3.0,
        1.0 / 4.0,
        0.0,
    ];
    outcome(tl.probs() == want, format!("list {:?}", tl.probs()))
}

// Expected increase of f over t greedy steps from `counts`, by enumerating
// every "new member / repeat" outcome.
fn recursion(sizes: &[u32], counts: &mut Vec<usize>, t: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let status: Vec<f64> = sizes
        .iter()
        .zip(counts.iter())
        .map(|(&d, &c)| 1.0 - c as f64 / d as f64)
        .collect();
    let mut star = 0;
    for i in 1..sizes.len() {
        if status[i] > status[star] {
            star = i;
        }
    }
    let s = status[star];
    let stay = recursion(sizes, counts, t - 1, f);
    if s == 0.0 {
        return stay;
    }
    let total: usize = counts.iter().sum();
    counts[star] += 1;
    let go = recursion(sizes, counts, t - 1, f);
    counts[star] -= 1;
    s * (f(total + 1) - f(total) + go) + (1.0 - s) * stay
}

// One step on community i, then t greedy steps.
fn detour(
    sizes: &[u32],
    counts: &mut Vec<usize>,
    i: usize,
    t: usize,
    f: &dyn Fn(usize) -> f64,
) -> f64 {
    let s = 1.0 - counts[i] as f64 / sizes[i] as f64;
    let stay = recursion(sizes, counts, t, f);
    if s == 0.0 {
        return stay;
    }
    let total: usize = counts.iter().sum();
    counts[i] += 1;
    let go = recursion(sizes, counts, t, f);
    counts[i] -= 1;
    s * (f(total + 1) - f(total) + go) + (1.0 - s) * stay
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = RngHandle::new(105);
    let (mut worst, mut worst_sum) = (0.0f64, 0.0f64);
    let mut cases = 0;
    while cases < 100 {
        let m = pick(&mut rng, 1, 4);
        let sizes: Vec<u32> = (0..m).map(|_| pick(&mut rng, 1, 4)).collect();
        if sizes.iter().sum::<u32>() > 8 {
            continue;
        }
        cases += 1;
        let budget = pick(&mut rng, 0, 10) as usize;
        let i = inst(&sizes);
        let dp = expected_reward_greedy(&i, budget, &RewardShape::Identity).unwrap();
        let rec = recursion(&sizes, &mut vec![0; sizes.len()], budget, &|j| j as f64);
        worst = worst.max((dp - rec).abs());
        let tl = transition_list_greedy(&i, &ExplorationState::new(&i)).unwrap();
        worst_sum =
            worst_sum.max((reach_probabilities(&tl, budget).iter().sum::<f64>() - 1.0).abs());
    }
    let (fast, t) = within(start, Duration::from_secs(30));
    outcome(
        worst <= 1e-9 && worst_sum <= 1e-12 && fast,
        format!("100 instances, max DP error {worst:.2e}, max |Σreach − 1| {worst_sum:.2e}, {t}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = RngHandle::new(106);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = pick(&mut rng, 1, 3);
        let sizes: Vec<u32> = (0..m).map(|_| pick(&mut rng, 1, 3)).collect();
        let budget = pick(&mut rng, 0, 8) as usize;
        let i = inst(&sizes);
        let dp = expected_reward_greedy(&i, budget, &RewardShape::Identity).unwrap();
        let vi = optimal_policy_value_oracle(&i, budget).unwrap();
        worst = worst.max((dp - vi).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("100 instances, max |greedy − value iteration| {worst:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = RngHandle::new(107);
    let (mut worst, mut lowest) = (0.0f64, f64::INFINITY);
    let id = |j: usize| j as f64;
    for _ in 0..50 {
        let m = pick(&mut rng, 2, 3);
        let sizes: Vec<u32> = (0..m).map(|_| pick(&mut rng, 1, 4)).collect();
        let counts: Vec<usize> = sizes
            .iter()
            .map(|&d| pick(&mut rng, 0, d) as usize)
            .collect();
        let probe = rng.below(m) as usize;
        let t = pick(&mut rng, 0, 6) as usize;
        let i = inst(&sizes);
        let st = ExplorationState::from_counts(&i, counts.clone()).unwrap();
        let gap = reward_gap_first_step(&i, &st, probe, t, &RewardShape::Identity).unwrap();
        let mut c = counts.clone();
        let want = recursion(&sizes, &mut c, t + 1, &id) - detour(&sizes, &mut c, probe, t, &id);
        worst = worst.max((gap - want).abs());
        lowest = lowest.min(gap);
    }
    outcome(
        worst <= 1e-9 && lowest >= -1e-12,
        format!("50 probes, max error {worst:.2e}, min gap {lowest:.2e}"),
    )
}

fn estimator_means(variant: EstimatorVariant, d: u32, rng: &mut RngHandle) -> (f64, f64) {
    let i = inst(&[d]);
    let runs = 10_000;
    let pairs = 50;
    let mut means = Vec::with_capacity(runs);
    for _ in 0..runs {
        let mut st = EstimatorState::new(variant, 1);
        // paired and round-averaged: 50 rounds of two draws; chained: 51 single draws
        let (rounds, per) = match variant {
            EstimatorVariant::Chained => (pairs + 1, 1),
            _ => (pairs, 2),
        };
        for r in 0..rounds {
            let seq = (0..per)
                .map(|_| sample_member(&i, 0, rng).unwrap().local)
                .collect();
            st.update(&RoundFeedback::from_locals(vec![seq]), r as u64 + 1)
                .unwrap();
        }
        assert_eq!(st.pairs()[0], pairs as u64);
        means.push(st.mu_hat()[0]);
    }
    let n = runs as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn criterion_8() -> Outcome {
    let mut rng = RngHandle::new(108);
    let mut pass = true;
    let mut parts = Vec::new();
    for variant in [
        EstimatorVariant::Paired,
        EstimatorVariant::RoundAveraged,
        EstimatorVariant::Chained,
    ] {
        for d in [2u32, 4, 10] {
            let (mean, se) = estimator_means(variant, d, &mut rng);
            let z = (mean - 1.0 / d as f64) / se;
            pass &= z.abs() < 4.0;
            parts.push(format!("{}/d={d}: z={z:+.2}", variant.name()));
        }
    }
    outcome(pass, parts.join(", "))
}

fn regret_config(modes: &[&str], variants: &[&str]) -> ExperimentConfig {
    let json = serde_json::json!({
        "kind": "regret",
        "sizes": [2, 3, 5, 6, 8, 10],
        "budget": 20,
        "horizon": 5000,
        "replications": 100,
        "seed": 2024,
        "modes": modes,
        "variants": variants,
    });
    let c = ExperimentConfig::from_json(&json.to_string()).unwrap();
    c.validate().unwrap();
    c
}

fn find(aggs: &[RegretAggregate], mode: Mode, variant: Variant) -> &RegretAggregate {
    aggs.iter()
        .find(|a| a.mode == mode && a.variant == variant)
        .unwrap()
}

fn criterion_9(aggs: &[RegretAggregate], elapsed: Duration) -> Outcome {
    let lcb = find(aggs, Mode::NonAdaptive, Variant::PairedLcb);
    let base = find(aggs, Mode::NonAdaptive, Variant::EmpiricalMean);
    let at = |a: &RegretAggregate, t: usize| if t == 0 { 0.0 } else { a.mean[t - 1] };
    let t = 5000;
    let ratio = at(base, t) / at(lcb, t);
    let a = ratio > 5.0;
    let (first, second) = (at(lcb, t / 2), at(lcb, t) - at(lcb, t / 2));
    let (q1, q2) = (at(lcb, 2500) - at(lcb, 1250), at(lcb, 5000) - at(lcb, 2500));
    let b = second < first && q2 < q1;
    let gaps = gap_constants_nonadaptive(&inst(&[2, 3, 5, 6, 8, 10]), 20).unwrap();
    let mut c = true;
    let mut slack = f64::INFINITY;
    for s in 1..=t {
        let rhs = nonadaptive_regret_bound(&gaps, 6, s as u64);
        slack = slack.min(rhs - at(lcb, s));
        c &= at(lcb, s) <= rhs;
    }
    let fast = elapsed < Duration::from_secs(300);
    let flag = |x: bool| if x { "ok" } else { "FAIL" };
    outcome(
        a && b && c && fast,
        format!(
            "(a) {}: baseline {:.1} / paired_lcb {:.2} = {ratio:.2} (need > 5); \
             (b) {}: halves {first:.2} then {second:.2}, R(2500)−R(1250) {q1:.2} then R(5000)−R(2500) {q2:.2}; \
             (c) {}: min slack to bound {slack:.1}; {:.1}s of 300s",
            flag(a),
            at(base, t),
            at(lcb, t),
            flag(b),
            flag(c),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_10(aggs: &[RegretAggregate]) -> Outcome {
    let na = find(aggs, Mode::NonAdaptive, Variant::ChainedEmpirical).window_mean(4000, 5000);
    let ad = find(aggs, Mode::Adaptive, Variant::ChainedEmpirical).window_mean(4000, 5000);
    outcome(
        na < 1e-3 && ad < 1e-3,
        format!("mean per-round regret over rounds 4000..=5000: nonadaptive {na:.3e}, adaptive {ad:.3e} (need < 1e-3)"),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = RngHandle::new(111);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let m = pick(&mut rng, 1, 6);
        let sizes: Vec<u32> = (0..m).map(|_| pick(&mut rng, 1, 12)).collect();
        let budget = pick(&mut rng, 0, 40) as usize;
        let i = inst(&sizes);
        let a = expected_reward_greedy(&i, budget, &RewardShape::Identity).unwrap();
        let n = expected_reward(&i, &greedy_allocation(&i, budget)).unwrap();
        worst = worst.min(a - n);
    }
    // adaptive gap table also has to build on such instances
    let ok_table = adaptive_gap_constants(&inst(&[2, 3, 5]), 8, &RewardShape::Identity).is_ok();
    outcome(
        worst >= -1e-9 && ok_table,
        format!("100 instances, min adaptive − nonadaptive {worst:.3e}"),
    )
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_comexp"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "reward_vs_budget",
            r#"{"kind":"reward_vs_budget","sizes":[2,3,5,6,8,10],"budgets":{"start":10,"end":40,"step":10},"replications":30,"seed":7}"#,
        ),
        (
            "allocation_distance",
            r#"{"kind":"allocation_distance","distribution":{"kind":"geometric","m":10,"p":0.1},"community_counts":[5,10],"replications":50,"seed":7}"#,
        ),
        (
            "regret",
            r#"{"kind":"regret","sizes":[2,3,5],"budget":6,"horizon":200,"replications":4,"seed":7,"report_every":10}"#,
        ),
        (
            "adaptive_reward",
            r#"{"kind":"adaptive_reward","sizes":[2,3,5],"budgets":{"start":4,"end":12,"step":4},"replications":40,"seed":7}"#,
        ),
    ];
    let mut checked = 0;
    let mut problems = Vec::new();
    for (name, json) in configs {
        let cfg = dir.path().join(format!("{name}.json"));
        std::fs::write(&cfg, json).unwrap();
        let cfg = cfg.to_str().unwrap().to_string();
        let mut bodies = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{name}-{run}"));
            match run_cli(&[
                "experiment",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap(),
            ]) {
                Ok(_) => bodies.push(std::fs::read(out.join(format!("{name}.csv"))).unwrap()),
                Err(e) => problems.push(e),
            }
        }
        if bodies.len() == 2 {
            checked += 1;
            if bodies[0] != bodies[1] || bodies[0].is_empty() {
                problems.push(format!("{name}: bodies differ"));
            }
        }
        if name == "regret" {
            let a = run_cli(&["regret", "--config", &cfg, "--seed", "99"]);
            let b = run_cli(&["regret", "--config", &cfg, "--seed", "99"]);
            match (a, b) {
                (Ok(a), Ok(b)) if a == b && !a.is_empty() => checked += 1,
                _ => problems.push("regret to stdout differs".into()),
            }
        }
    }
    outcome(
        problems.is_empty(),
        format!("{checked} CSV outputs reproduced byte for byte; problems {problems:?}"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!(
            "criterion {n}: {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());

    let start = Instant::now();
    let mut aggs = regret_aggregates(&regret_config(
        &["nonadaptive"],
        &["paired_lcb", "empirical_mean", "chained_empirical"],
    ))
    .unwrap();
    let elapsed9 = start.elapsed();
    aggs.extend(regret_aggregates(&regret_config(&["adaptive"], &["chained_empirical"])).unwrap());
    report(9, criterion_9(&aggs, elapsed9));
    report(10, criterion_10(&aggs));
    report(11, criterion_11());
    report(12, criterion_12());

    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(n, _)| *n)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
