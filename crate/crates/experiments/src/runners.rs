//! Experiment runners. Each returns report rows; writing happens afterwards.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use comexp_core::adaptive::{
    expected_reward_greedy, explore_policy, optimal_policy_value_oracle, transition_list_greedy,
    Priority, RewardShape,
};
use comexp_core::model::{derive_seed, CommunityInstance, ExplorationState, RngHandle};
use comexp_core::nonadaptive::{
    allocation_bounds, brute_force_optimal, expected_reward, explore_allocation, fast_allocation,
    greedy_allocation, Allocation,
};
use comexp_core::online::{run_experiment, LearnerConfig, Mode, Variant};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{ExpError, Result};
use crate::generate::{generate_instance, proportional_allocation, random_allocation};
use crate::report::mean_std;

// Stream index for drawing a single shared instance from a distribution.
const INSTANCE_STREAM: u64 = u64::MAX;

/// Sizes from the config, or one instance drawn from its distribution.
pub fn resolve_instance(config: &ExperimentConfig) -> Result<CommunityInstance> {
    match (&config.sizes, &config.distribution) {
        (Some(sizes), _) => Ok(CommunityInstance::new(sizes.clone())?),
        (None, Some(spec)) => generate_instance(
            spec,
            &mut RngHandle::new(derive_seed(config.seed, INSTANCE_STREAM)),
        ),
        (None, None) => Err(ExpError::Config(
            "one of sizes or distribution is required".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocateReport {
    pub sizes: Vec<u32>,
    pub budget: usize,
    pub method: &'static str,
    pub allocation: Vec<usize>,
    pub expected_reward: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_increments: Option<usize>,
}

/// Optimal non-adaptive allocation. `fast` uses the bound-initialized variant
/// when `K > m`; smaller budgets go straight to the greedy rule.
pub fn run_allocate(
    instance: &CommunityInstance,
    budget: usize,
    fast: bool,
) -> Result<AllocateReport> {
    let mut report = AllocateReport {
        sizes: instance.sizes().to_vec(),
        budget,
        method: "greedy",
        allocation: Vec::new(),
        expected_reward: 0.0,
        lower_bound: None,
        upper_bound: None,
        greedy_increments: None,
    };
    let alloc = if fast && budget > instance.len() {
        let bounds = allocation_bounds(instance, budget)?;
        let f = fast_allocation(instance, budget)?;
        report.method = "fast";
        report.lower_bound = Some(bounds.lower);
        report.upper_bound = Some(bounds.upper);
        report.greedy_increments = Some(f.increments);
        f.allocation
    } else {
        greedy_allocation(instance, budget)
    };
    report.expected_reward = expected_reward(instance, &alloc)?;
    report.allocation = alloc.into_inner();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveRewardReport {
    pub sizes: Vec<u32>,
    pub budget: usize,
    pub adaptive_reward: f64,
    pub nonadaptive_reward: f64,
    pub nonadaptive_allocation: Vec<usize>,
    pub transition_list: Vec<f64>,
}

pub fn run_adaptive_reward_exact(
    instance: &CommunityInstance,
    budget: usize,
) -> Result<AdaptiveRewardReport> {
    let tl = transition_list_greedy(instance, &ExplorationState::new(instance))?;
    let alloc = greedy_allocation(instance, budget);
    Ok(AdaptiveRewardReport {
        sizes: instance.sizes().to_vec(),
        budget,
        adaptive_reward: expected_reward_greedy(instance, budget, &RewardShape::Identity)?,
        nonadaptive_reward: expected_reward(instance, &alloc)?,
        nonadaptive_allocation: alloc.into_inner(),
        transition_list: tl.probs().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub sizes: Vec<u32>,
    pub budget: usize,
    pub brute_force_allocation: Vec<usize>,
    pub brute_force_value: f64,
    pub greedy_value: f64,
    pub value_iteration: f64,
    pub adaptive_greedy_value: f64,
}

/// Exhaustive oracles next to the greedy answers. Fails with a size-guard
/// error on instances too large to enumerate.
pub fn run_oracle(instance: &CommunityInstance, budget: usize) -> Result<OracleReport> {
    let (alloc, value) = brute_force_optimal(instance, budget)?;
    let vi = optimal_policy_value_oracle(instance, budget)?;
    Ok(OracleReport {
        sizes: instance.sizes().to_vec(),
        budget,
        brute_force_allocation: alloc.into_inner(),
        brute_force_value: value,
        greedy_value: expected_reward(instance, &greedy_allocation(instance, budget))?,
        value_iteration: vi,
        adaptive_greedy_value: expected_reward_greedy(instance, budget, &RewardShape::Identity)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardRow {
    #[serde(rename = "K")]
    pub budget: usize,
    pub method: &'static str,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub n: usize,
    pub base_seed: u64,
    pub config_hash: String,
}

pub const REWARD_METHODS: [&str; 4] = ["random", "proportional", "nonadaptive_opt", "adaptive_opt"];

/// Realized reward of the four allocation methods for every budget.
pub fn run_reward_vs_budget(config: &ExperimentConfig) -> Result<Vec<RewardRow>> {
    let instance = resolve_instance(config)?;
    let hash = config.hash();
    let mut rows = Vec::new();
    for budget in config.budget_values() {
        let greedy = greedy_allocation(&instance, budget);
        let proportional = proportional_allocation(&instance, budget);
        let per_rep: Vec<[f64; 4]> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(derive_seed(config.seed, budget as u64), rep as u64);
                let mut rng = RngHandle::new(seed);
                let random = random_allocation(instance.len(), budget, &mut rng);
                let mut out = [0.0; 4];
                for (slot, alloc) in [(0, &random), (1, &proportional), (2, &greedy)] {
                    out[slot] = explore_allocation(&instance, alloc, &mut rng, false)?.1 as f64;
                }
                out[3] = explore_policy(&instance, budget, Priority::Greedy, &mut rng, false)?
                    .distinct as f64;
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (slot, method) in REWARD_METHODS.iter().enumerate() {
            let xs: Vec<f64> = per_rep.iter().map(|r| r[slot]).collect();
            let (mean, std) = mean_std(&xs);
            rows.push(RewardRow {
                budget,
                method,
                mean_reward: mean,
                std_reward: std,
                n: xs.len(),
                base_seed: config.seed,
                config_hash: hash.clone(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub distribution: String,
    pub m: usize,
    pub mean_l1_lower: f64,
    pub mean_l1_upper: f64,
    pub n: usize,
    pub base_seed: u64,
    pub config_hash: String,
}

/// L1 distances between the rounded bounds and the greedy allocation, with a
/// fresh instance and a uniform budget in `[m+1, Σd]` per replication.
pub fn run_allocation_distance(config: &ExperimentConfig) -> Result<Vec<DistanceRow>> {
    let hash = config.hash();
    let (label, counts) = match (&config.distribution, &config.sizes) {
        (Some(spec), _) => (
            spec.label(),
            config
                .community_counts
                .clone()
                .unwrap_or_else(|| vec![spec.communities()]),
        ),
        (None, Some(sizes)) => ("sizes".to_string(), vec![sizes.len()]),
        (None, None) => {
            return Err(ExpError::Config(
                "one of sizes or distribution is required".into(),
            ))
        }
    };
    let mut rows = Vec::new();
    for m in counts {
        let dists: Vec<(usize, usize)> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng =
                    RngHandle::new(derive_seed(derive_seed(config.seed, m as u64), rep as u64));
                let instance = match &config.distribution {
                    Some(spec) => generate_instance(&spec.with_communities(m), &mut rng)?,
                    None => resolve_instance(config)?,
                };
                let hi = instance.total_members().max(m + 1);
                let budget = rng.random_range(m + 1..=hi);
                distances(&instance, budget)
            })
            .collect::<Result<_>>()?;
        let n = dists.len();
        rows.push(DistanceRow {
            distribution: label.clone(),
            m,
            mean_l1_lower: dists.iter().map(|d| d.0 as f64).sum::<f64>() / n as f64,
            mean_l1_upper: dists.iter().map(|d| d.1 as f64).sum::<f64>() / n as f64,
            n,
            base_seed: config.seed,
            config_hash: hash.clone(),
        });
    }
    Ok(rows)
}

/// `(‖⌈k⁻⌉ − k*‖₁, ‖⌊k⁺⌋ − k*‖₁)` against the greedy allocation.
pub fn distances(instance: &CommunityInstance, budget: usize) -> Result<(usize, usize)> {
    let b = allocation_bounds(instance, budget)?;
    let g = greedy_allocation(instance, budget);
    Ok((
        Allocation::new(b.lower_ceil()).l1_distance(&g),
        Allocation::new(b.upper_floor()).l1_distance(&g),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretRow {
    pub round: u64,
    pub variant: &'static str,
    pub mode: &'static str,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub config_hash: String,
}

/// Cumulative regret of one learner across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretAggregate {
    pub mode: Mode,
    pub variant: Variant,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Mean instantaneous regret per round.
    pub mean_instantaneous: Vec<f64>,
    pub n_seeds: usize,
}

impl RegretAggregate {
    /// Mean per-round regret over rounds `from..=to` (1-based).
    pub fn window_mean(&self, from: usize, to: usize) -> f64 {
        let xs = &self.mean_instantaneous[from - 1..to];
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Every configured learner on every replication seed. Trial `r` of each
/// learner uses seed `derive_seed(base_seed, r)`.
pub fn regret_aggregates(config: &ExperimentConfig) -> Result<Vec<RegretAggregate>> {
    let instance = resolve_instance(config)?;
    let budget = config
        .budget
        .ok_or_else(|| ExpError::Config("regret needs budget".into()))?;
    let horizon = config
        .horizon
        .ok_or_else(|| ExpError::Config("regret needs horizon".into()))?;
    let learners = config.learners()?;
    let trials: Vec<(usize, usize)> = (0..learners.len())
        .flat_map(|l| (0..config.replications).map(move |r| (l, r)))
        .collect();
    let curves: Vec<_> = trials
        .par_iter()
        .map(|&(l, r)| {
            let (mode, variant) = learners[l];
            let lc = LearnerConfig::new(
                mode,
                variant,
                budget,
                horizon,
                derive_seed(config.seed, r as u64),
            );
            run_experiment(&lc, &instance)
        })
        .collect::<std::result::Result<_, _>>()?;
    let reps = config.replications;
    let len = horizon as usize;
    Ok(learners
        .iter()
        .enumerate()
        .map(|(l, &(mode, variant))| {
            let group = &curves[l * reps..(l + 1) * reps];
            let mut mean = Vec::with_capacity(len);
            let mut std = Vec::with_capacity(len);
            let mut inst = Vec::with_capacity(len);
            let mut column = vec![0.0; reps];
            for t in 0..len {
                for (c, curve) in column.iter_mut().zip(group) {
                    *c = curve.cumulative[t];
                }
                let (m, s) = mean_std(&column);
                mean.push(m);
                std.push(s);
                inst.push(group.iter().map(|c| c.instantaneous[t]).sum::<f64>() / reps as f64);
            }
            RegretAggregate {
                mode,
                variant,
                mean,
                std,
                mean_instantaneous: inst,
                n_seeds: reps,
            }
        })
        .collect())
}

pub fn run_regret(config: &ExperimentConfig) -> Result<Vec<RegretRow>> {
    let aggs = regret_aggregates(config)?;
    let hash = config.hash();
    let every = config.report_every.max(1);
    let mut rows = Vec::new();
    for a in &aggs {
        let len = a.mean.len();
        for t in 0..len {
            let round = t + 1;
            if round % every != 0 && round != len {
                continue;
            }
            rows.push(RegretRow {
                round: round as u64,
                variant: a.variant.name(),
                mode: a.mode.name(),
                mean_cum_regret: a.mean[t],
                std_cum_regret: a.std[t],
                n_seeds: a.n_seeds,
                base_seed: config.seed,
                config_hash: hash.clone(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveRewardRow {
    #[serde(rename = "K")]
    pub budget: usize,
    pub method: &'static str,
    pub exact_reward: f64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_budget_used: f64,
    pub n: usize,
    pub base_seed: u64,
    pub config_hash: String,
}

pub const ADAPTIVE_METHODS: [&str; 4] = [
    "nonadaptive_opt",
    "adaptive_opt",
    "truncated_nonadaptive_opt",
    "truncated_adaptive_opt",
];

/// Exact and simulated reward of the optimal allocation and the greedy
/// policy, with and without stopping once every member is found.
pub fn run_adaptive_reward(config: &ExperimentConfig) -> Result<Vec<AdaptiveRewardRow>> {
    let instance = resolve_instance(config)?;
    let hash = config.hash();
    let mut rows = Vec::new();
    for budget in config.budget_values() {
        let greedy = greedy_allocation(&instance, budget);
        let exact_na = expected_reward(&instance, &greedy)?;
        let exact_ad = expected_reward_greedy(&instance, budget, &RewardShape::Identity)?;
        let per_rep: Vec<[(f64, f64); 4]> = (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(derive_seed(config.seed, budget as u64), rep as u64);
                let mut rng = RngHandle::new(seed);
                let mut out = [(0.0, 0.0); 4];
                for (slot, truncate) in [(0, false), (2, true)] {
                    let (fb, distinct) =
                        explore_allocation(&instance, &greedy, &mut rng, truncate)?;
                    out[slot] = (distinct as f64, fb.total_len() as f64);
                    let run =
                        explore_policy(&instance, budget, Priority::Greedy, &mut rng, truncate)?;
                    out[slot + 1] = (run.distinct as f64, run.trace.len() as f64);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (slot, method) in ADAPTIVE_METHODS.iter().enumerate() {
            let xs: Vec<f64> = per_rep.iter().map(|r| r[slot].0).collect();
            let used = per_rep.iter().map(|r| r[slot].1).sum::<f64>() / per_rep.len() as f64;
            let (mean, std) = mean_std(&xs);
            rows.push(AdaptiveRewardRow {
                budget,
                method,
                exact_reward: if slot % 2 == 0 { exact_na } else { exact_ad },
                mean_reward: mean,
                std_reward: std,
                mean_budget_used: used,
                n: xs.len(),
                base_seed: config.seed,
                config_hash: hash.clone(),
            });
        }
    }
    Ok(rows)
}

/// Runs the experiment named by `config.kind` and writes its table into `dir`.
/// Returns the path written.
pub fn run_to_dir(config: &ExperimentConfig, dir: &std::path::Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let stem = config.kind.file_stem();
    let (path, result) = match config.kind {
        ExperimentKind::Allocate => {
            let path = dir.join(format!("{stem}.json"));
            let report = run_allocate(
                &resolve_instance(config)?,
                config.budget.unwrap_or(0),
                config.fast,
            )?;
            let file = std::fs::File::create(&path)?;
            (path, crate::report::write_json(file, &report))
        }
        _ => {
            let path = dir.join(format!("{stem}.csv"));
            let r = write_table(config, std::fs::File::create(&path)?);
            (path, r)
        }
    };
    result.map(|_| path)
}

/// Runs a table-producing experiment and writes its CSV to `out`.
pub fn write_table<W: std::io::Write>(config: &ExperimentConfig, out: W) -> Result<()> {
    use crate::report::write_csv;
    match config.kind {
        ExperimentKind::RewardVsBudget => write_csv(out, &run_reward_vs_budget(config)?),
        ExperimentKind::AllocationDistance => write_csv(out, &run_allocation_distance(config)?),
        ExperimentKind::Regret => write_csv(out, &run_regret(config)?),
        ExperimentKind::AdaptiveReward => write_csv(out, &run_adaptive_reward(config)?),
        ExperimentKind::Allocate => Err(ExpError::Config(
            "allocate produces JSON, not a table".into(),
        )),
    }
}
