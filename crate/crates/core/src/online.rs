//! Online learning: sizes are unknown and estimated from collisions while
//! the same budget is spent every round.
//!
//! Each round the explorer is fed rate estimates (lower confidence bounds or
//! plain empirical means), explores with them, and the feedback updates the
//! estimator. Regret is accounted exactly, as the gap in expected reward to
//! the offline optimum under the true rates.

use std::f64::consts::PI;

use crate::adaptive::{
    expected_reward_greedy, expected_reward_of_list, explore_policy, transition_list_policy,
    AdaptiveGapTable, Priority, RewardShape,
};
use crate::error::{Error, Result};
use crate::estimation::{EstimatorState, EstimatorVariant};
use crate::model::{CommunityInstance, Realization, RngHandle, RoundFeedback};
use crate::nonadaptive::{
    expected_reward, explore_allocation, greedy_allocation, greedy_allocation_for_rates,
    Allocation, GapConstants,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    NonAdaptive,
    Adaptive,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::NonAdaptive => "nonadaptive",
            Self::Adaptive => "adaptive",
        }
    }
}

/// Learner family: which estimator is used and what it feeds the explorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Paired estimator, lower confidence bounds.
    PairedLcb,
    /// Round-averaged estimator, lower confidence bounds.
    RoundAveragedLcb,
    /// Chained estimator, empirical means.
    ChainedEmpirical,
    /// Paired estimator, empirical means. A baseline with linear regret.
    EmpiricalMean,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::PairedLcb,
        Variant::RoundAveragedLcb,
        Variant::ChainedEmpirical,
        Variant::EmpiricalMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PairedLcb => "paired_lcb",
            Self::RoundAveragedLcb => "round_averaged_lcb",
            Self::ChainedEmpirical => "chained_empirical",
            Self::EmpiricalMean => "empirical_mean",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn estimator(self) -> EstimatorVariant {
        match self {
            Self::PairedLcb | Self::EmpiricalMean => EstimatorVariant::Paired,
            Self::RoundAveragedLcb => EstimatorVariant::RoundAveraged,
            Self::ChainedEmpirical => EstimatorVariant::Chained,
        }
    }

    /// Whether the confidence radius is subtracted before exploring.
    pub fn uses_radius(self) -> bool {
        matches!(self, Self::PairedLcb | Self::RoundAveragedLcb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub mode: Mode,
    pub variant: Variant,
    /// Explorations per round, `K`.
    pub budget: usize,
    /// Rounds, `T`.
    pub horizon: u64,
    pub seed: u64,
    /// Also record the realized reward difference on a shared realization.
    pub sampled_regret: bool,
}

impl LearnerConfig {
    pub fn new(mode: Mode, variant: Variant, budget: usize, horizon: u64, seed: u64) -> Self {
        Self {
            mode,
            variant,
            budget,
            horizon,
            seed,
            sampled_regret: false,
        }
    }
}

/// What the explorer did in one round.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundChoice {
    Allocation(Allocation),
    /// Communities explored, step by step.
    Trace(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub choice: RoundChoice,
    pub feedback: RoundFeedback,
    /// Exact expected-reward gap to the offline optimum.
    pub regret: f64,
    /// Realized gap on the round's realization, when requested.
    pub sampled_regret: Option<f64>,
}

/// Offline optimum under the true rates, computed once per learner.
#[derive(Debug, Clone, PartialEq)]
struct Benchmark {
    allocation: Allocation,
    value: f64,
}

impl Benchmark {
    fn new(mode: Mode, instance: &CommunityInstance, budget: usize) -> Result<Self> {
        let allocation = greedy_allocation(instance, budget);
        let value = match mode {
            Mode::NonAdaptive => expected_reward(instance, &allocation)?,
            Mode::Adaptive => expected_reward_greedy(instance, budget, &RewardShape::Identity)?,
        };
        Ok(Self { allocation, value })
    }
}

/// Rates the configured variant hands to the explorer at round `t`.
pub fn explorer_rates(variant: Variant, estimator: &EstimatorState, t: u64) -> Vec<f64> {
    if variant.uses_radius() {
        estimator.confidence_bounds(t).lower
    } else {
        estimator.mu_hat().to_vec()
    }
}

fn check_round(config: &LearnerConfig, estimator: &EstimatorState, round_index: u64) -> Result<()> {
    if round_index == 0 {
        return Err(Error::InvalidParameter("round index starts at 1".into()));
    }
    if estimator.variant() != config.variant.estimator() {
        return Err(Error::VariantMismatch {
            state: estimator.variant().name(),
            expected: config.variant.estimator().name(),
        });
    }
    Ok(())
}

fn play_round(
    config: &LearnerConfig,
    instance: &CommunityInstance,
    bench: &Benchmark,
    rates: &[f64],
    estimator: &mut EstimatorState,
    rng: &mut RngHandle,
    round_index: u64,
) -> Result<RoundOutcome> {
    let k = config.budget;
    let (choice, feedback, value, sampled_regret) = match config.mode {
        Mode::NonAdaptive => {
            let alloc = greedy_allocation_for_rates(rates, k);
            let value = expected_reward(instance, &alloc)?;
            let (feedback, sampled) = if config.sampled_regret {
                let mut phi = Realization::new(instance, rng);
                let (fb, got) = explore_allocation(instance, &alloc, &mut phi, false)?;
                let (_, best) = explore_allocation(instance, &bench.allocation, &mut phi, false)?;
                (fb, Some(best as f64 - got as f64))
            } else {
                (explore_allocation(instance, &alloc, rng, false)?.0, None)
            };
            (RoundChoice::Allocation(alloc), feedback, value, sampled)
        }
        Mode::Adaptive => {
            let list = transition_list_policy(instance, rates)?;
            let value = expected_reward_of_list(&list, k, &RewardShape::Identity, 0)?;
            let priority = Priority::Biased(rates);
            let (run, sampled) = if config.sampled_regret {
                let mut phi = Realization::new(instance, rng);
                let run = explore_policy(instance, k, priority, &mut phi, false)?;
                let best = explore_policy(instance, k, Priority::Greedy, &mut phi, false)?;
                let gap = best.distinct as f64 - run.distinct as f64;
                (run, Some(gap))
            } else {
                (explore_policy(instance, k, priority, rng, false)?, None)
            };
            (RoundChoice::Trace(run.trace), run.feedback, value, sampled)
        }
    };
    estimator.update(&feedback, round_index)?;
    Ok(RoundOutcome {
        choice,
        feedback,
        regret: bench.value - value,
        sampled_regret,
    })
}

/// One non-adaptive round: allocate greedily on the estimated rates, explore,
/// update the estimator. Returns the allocation, the feedback and the exact
/// regret `r_{k*}(μ) − r_{k_t}(μ)`.
pub fn run_round_nonadaptive(
    config: &LearnerConfig,
    instance: &CommunityInstance,
    estimator: &mut EstimatorState,
    rng: &mut RngHandle,
    round_index: u64,
) -> Result<(Allocation, RoundFeedback, f64)> {
    check_round(config, estimator, round_index)?;
    let config = LearnerConfig {
        mode: Mode::NonAdaptive,
        ..config.clone()
    };
    let bench = Benchmark::new(Mode::NonAdaptive, instance, config.budget)?;
    let rates = explorer_rates(config.variant, estimator, round_index);
    let out = play_round(
        &config,
        instance,
        &bench,
        &rates,
        estimator,
        rng,
        round_index,
    )?;
    match out.choice {
        RoundChoice::Allocation(a) => Ok((a, out.feedback, out.regret)),
        RoundChoice::Trace(_) => unreachable!("non-adaptive round"),
    }
}

/// One adaptive round: run the status policy ranked by the estimated rates.
/// Returns the step trace, the feedback and the exact regret
/// `r_{π^g}(μ) − r_{π^t}(μ)`.
pub fn run_round_adaptive(
    config: &LearnerConfig,
    instance: &CommunityInstance,
    estimator: &mut EstimatorState,
    rng: &mut RngHandle,
    round_index: u64,
) -> Result<(Vec<usize>, RoundFeedback, f64)> {
    check_round(config, estimator, round_index)?;
    let config = LearnerConfig {
        mode: Mode::Adaptive,
        ..config.clone()
    };
    let bench = Benchmark::new(Mode::Adaptive, instance, config.budget)?;
    let rates = explorer_rates(config.variant, estimator, round_index);
    let out = play_round(
        &config,
        instance,
        &bench,
        &rates,
        estimator,
        rng,
        round_index,
    )?;
    match out.choice {
        RoundChoice::Trace(t) => Ok((t, out.feedback, out.regret)),
        RoundChoice::Allocation(_) => unreachable!("adaptive round"),
    }
}

/// A single learner: estimator, random stream and round counter.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    instance: CommunityInstance,
    estimator: EstimatorState,
    rng: RngHandle,
    bench: Benchmark,
    round: u64,
    pinned: bool,
}

impl Learner {
    pub fn new(config: LearnerConfig, instance: CommunityInstance) -> Result<Self> {
        if config.budget == 0 {
            return Err(Error::InvalidParameter("budget must be positive".into()));
        }
        let bench = Benchmark::new(config.mode, &instance, config.budget)?;
        Ok(Self {
            estimator: EstimatorState::new(config.variant.estimator(), instance.len()),
            rng: RngHandle::new(config.seed),
            bench,
            round: 0,
            pinned: false,
            config,
            instance,
        })
    }

    /// Test hook: explore with the true rates from now on.
    pub fn pin_to_truth(&mut self) {
        self.pinned = true;
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.estimator
    }

    /// Rounds played so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Plays the next round.
    pub fn step(&mut self) -> Result<RoundOutcome> {
        self.round += 1;
        let rates = if self.pinned {
            self.instance.rates()
        } else {
            explorer_rates(self.config.variant, &self.estimator, self.round)
        };
        play_round(
            &self.config,
            &self.instance,
            &self.bench,
            &rates,
            &mut self.estimator,
            &mut self.rng,
            self.round,
        )
    }
}

/// Per-round and cumulative regret of one learner.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub config: LearnerConfig,
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Realized per-round gaps, when the config asks for them.
    pub sampled: Option<Vec<f64>>,
}

impl RegretCurve {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

fn run_learner(mut learner: Learner) -> Result<RegretCurve> {
    let horizon = learner.config.horizon;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut instantaneous = Vec::with_capacity(horizon as usize);
    let mut sampled = learner.config.sampled_regret.then(Vec::new);
    for _ in 0..horizon {
        let out = learner.step()?;
        instantaneous.push(out.regret);
        if let (Some(s), Some(v)) = (sampled.as_mut(), out.sampled_regret) {
            s.push(v);
        }
    }
    let cumulative = instantaneous
        .iter()
        .scan(0.0, |acc, &r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    Ok(RegretCurve {
        config: learner.config,
        instantaneous,
        cumulative,
        sampled,
    })
}

/// Runs `config.horizon` rounds; fully determined by `config.seed`.
pub fn run_experiment(config: &LearnerConfig, instance: &CommunityInstance) -> Result<RegretCurve> {
    run_learner(Learner::new(config.clone(), instance.clone())?)
}

/// Like [`run_experiment`] but with the explorer fed the true rates.
pub fn run_experiment_pinned(
    config: &LearnerConfig,
    instance: &CommunityInstance,
) -> Result<RegretCurve> {
    let mut learner = Learner::new(config.clone(), instance.clone())?;
    learner.pin_to_truth();
    run_learner(learner)
}

fn choose2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

fn k_prime(budget: usize, m: usize) -> usize {
    (budget + 1).saturating_sub(m)
}

// x / Δ with the convention x / ∞ = 0.
fn over(x: f64, gap: f64) -> f64 {
    if gap.is_infinite() {
        0.0
    } else {
        x / gap
    }
}

/// Logarithmic bound for the paired LCB learner, non-adaptive mode:
/// `Σ_i 48 C(K',2) K ln T / Δ^i_min + 2 C(K',2) m + ⌊K'/2⌋ π²/3 m Δ_max`.
pub fn nonadaptive_regret_bound(gaps: &GapConstants, m: usize, horizon: u64) -> f64 {
    let kp = k_prime(gaps.budget, m);
    let c = choose2(kp);
    let log_t = (horizon.max(1) as f64).ln();
    let lead: f64 = gaps
        .per_community_min
        .iter()
        .map(|&d| over(48.0 * c * gaps.budget as f64 * log_t, d))
        .sum();
    lead + 2.0 * c * m as f64 + (kp / 2) as f64 * PI * PI / 3.0 * m as f64 * gaps.max
}

/// Bound for the round-averaged LCB learner:
/// `Σ_i 48 C(K',2)² ln T / Δ^i_min + 2 C(K',2) m + π²/3 m Δ_max`.
pub fn round_averaged_regret_bound(gaps: &GapConstants, m: usize, horizon: u64) -> f64 {
    let c = choose2(k_prime(gaps.budget, m));
    let log_t = (horizon.max(1) as f64).ln();
    let lead: f64 = gaps
        .per_community_min
        .iter()
        .map(|&d| over(48.0 * c * c * log_t, d))
        .sum();
    lead + 2.0 * c * m as f64 + PI * PI / 3.0 * m as f64 * gaps.max
}

/// Constant bound for the chained learner, non-adaptive mode:
/// `(2 + 2 m e² K'² (K'−1)² / Δ_min²) Δ_max`.
pub fn nonadaptive_full_information_bound(gaps: &GapConstants, m: usize) -> f64 {
    if gaps.max == 0.0 {
        return 0.0;
    }
    let kp = k_prime(gaps.budget, m) as f64;
    let e2 = std::f64::consts::E.powi(2);
    let lead = over(
        2.0 * m as f64 * e2 * kp * kp * (kp - 1.0) * (kp - 1.0),
        gaps.min * gaps.min,
    );
    (2.0 + lead) * gaps.max
}

/// Logarithmic bound for the paired LCB learner, adaptive mode, using the
/// upper bounds on `Δ^{i,k}_max`:
/// `(Σ_i Σ_k 6 Δ_k / (Δ^{i,k}_min)²) ln T + ⌊K'/2⌋ π²/3 Σ_i Σ_k Δ_k`.
pub fn adaptive_regret_bound(
    table: &AdaptiveGapTable,
    budget: usize,
    m: usize,
    horizon: u64,
) -> f64 {
    let kp = k_prime(budget, m);
    let log_t = (horizon.max(1) as f64).ln();
    let mut lead = 0.0;
    let mut tail = 0.0;
    for (_, _, g) in table.entries() {
        if g.delta_max_upper == 0.0 {
            continue;
        }
        lead += over(6.0 * g.delta_max_upper, g.delta_min * g.delta_min);
        tail += g.delta_max_upper;
    }
    lead * log_t + (kp / 2) as f64 * PI * PI / 3.0 * tail
}

/// Constant bound for the chained learner, adaptive mode:
/// `Σ_i Σ_k (2/ε⁴ + 1) Δ_k`.
pub fn adaptive_full_information_bound(table: &AdaptiveGapTable) -> f64 {
    table
        .entries()
        .filter(|(_, _, g)| g.delta_max_upper > 0.0)
        .map(|(_, _, g)| (over(2.0, g.epsilon.powi(4)) + 1.0) * g.delta_max_upper)
        .sum()
}
