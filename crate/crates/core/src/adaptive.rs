//! Adaptive exploration: the next community is chosen after seeing which
//! members were met so far.
//!
//! The greedy policy explores `argmax_i 1 − μ_i c_i`. Because it depends on
//! the counts only, its run is a Markov chain that moves from one status to
//! the next with probability `p_j`, the `j`-th entry of a descending
//! [`TransitionList`]. Expected rewards then reduce to polynomial DPs over
//! that list.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{CommunityInstance, ExplorationState, MemberSource, RngHandle, RoundFeedback};
use crate::nonadaptive::ENUMERATION_LIMIT;
use crate::TIE_TOLERANCE;

/// Status transition probabilities `(p_0, …, p_D)` of a status-based policy,
/// each tagged with the community whose exploration it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionList {
    probs: Vec<f64>,
    communities: Vec<Option<usize>>,
}

impl TransitionList {
    /// Untagged list from raw probabilities in `[0, 1]`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty transition list".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!(
                "transition probability {p} outside [0, 1]"
            )));
        }
        let communities = vec![None; probs.len()];
        Ok(Self { probs, communities })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Community explored at each position; `None` for the padding zeros.
    pub fn communities(&self) -> &[Option<usize>] {
        &self.communities
    }

    /// `D`, the number of members still unmet.
    pub fn unmet(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_descending(&self) -> bool {
        self.probs.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Non-decreasing reward `f` applied to the number of distinct members met.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RewardShape {
    #[default]
    Identity,
    Table(Vec<f64>),
}

impl RewardShape {
    /// Tabulated `f(0), f(1), …`; must be non-decreasing.
    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty reward table".into()));
        }
        if values.iter().any(|v| v.is_nan()) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "reward table must be non-decreasing".into(),
            ));
        }
        Ok(Self::Table(values))
    }

    pub fn value(&self, j: usize) -> Option<f64> {
        match self {
            Self::Identity => Some(j as f64),
            Self::Table(v) => v.get(j).copied(),
        }
    }

    fn require(&self, j: usize) -> Result<f64> {
        self.value(j).ok_or_else(|| Error::LengthMismatch {
            expected: j + 1,
            actual: match self {
                Self::Identity => usize::MAX,
                Self::Table(v) => v.len(),
            },
        })
    }
}

/// How a status-based policy ranks communities.
#[derive(Debug, Clone, Copy)]
pub enum Priority<'a> {
    /// True unmet fraction `1 − c_i μ_i`: the greedy policy.
    Greedy,
    /// Perceived unmet fraction `1 − c_i μ̲_i` under estimated rates.
    Biased(&'a [f64]),
}

// Ranks community `a` against `b` at `counts`; `Greater` means `a` is preferred.
// Ties go to fewer met members, then to the lower index.
fn rank(
    instance: &CommunityInstance,
    counts: &[usize],
    priority: Priority<'_>,
    a: usize,
    b: usize,
) -> Ordering {
    let primary = match priority {
        Priority::Greedy => {
            let (da, db) = (u64::from(instance.size(a)), u64::from(instance.size(b)));
            let ra = (da - counts[a] as u64) * db;
            let rb = (db - counts[b] as u64) * da;
            ra.cmp(&rb)
        }
        Priority::Biased(rates) => {
            let va = 1.0 - counts[a] as f64 * rates[a];
            let vb = 1.0 - counts[b] as f64 * rates[b];
            if (va - vb).abs() <= TIE_TOLERANCE {
                Ordering::Equal
            } else {
                va.total_cmp(&vb)
            }
        }
    };
    primary
        .then_with(|| counts[b].cmp(&counts[a]))
        .then_with(|| b.cmp(&a))
}

fn select(instance: &CommunityInstance, counts: &[usize], priority: Priority<'_>) -> usize {
    (1..instance.len()).fold(0, |best, i| {
        if rank(instance, counts, priority, i, best) == Ordering::Greater {
            i
        } else {
            best
        }
    })
}

fn check_rates(instance: &CommunityInstance, rates: &[f64]) -> Result<()> {
    if rates.len() != instance.len() {
        return Err(Error::LengthMismatch {
            expected: instance.len(),
            actual: rates.len(),
        });
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidParameter(format!("rate {r} outside [0, 1]")));
    }
    Ok(())
}

fn check_state(instance: &CommunityInstance, state: &ExplorationState) -> Result<()> {
    ExplorationState::from_counts(instance, state.counts().to_vec()).map(|_| ())
}

/// The community the greedy policy explores at `state`.
pub fn greedy_choice(instance: &CommunityInstance, state: &ExplorationState) -> usize {
    select(instance, state.counts(), Priority::Greedy)
}

/// Follows the policy from `counts`, one new member at a time. The list stops
/// at the first zero (a policy stuck on a fully met community) and is padded
/// with zeros to length `D + 1`.
fn walk(instance: &CommunityInstance, counts: &[usize], priority: Priority<'_>) -> TransitionList {
    let mut counts = counts.to_vec();
    let unmet: usize = instance
        .sizes()
        .iter()
        .zip(&counts)
        .map(|(&d, &c)| d as usize - c)
        .sum();
    let mut probs = Vec::with_capacity(unmet + 1);
    let mut communities = Vec::with_capacity(unmet + 1);
    while probs.len() < unmet {
        let i = select(instance, &counts, priority);
        let d = instance.size(i) as usize;
        let left = d - counts[i];
        if left == 0 {
            break;
        }
        let s = left as f64 / d as f64;
        if let Priority::Biased(rates) = priority {
            if rates[i] <= instance.rate(i) {
                debug_assert!(1.0 - counts[i] as f64 * rates[i] >= s - TIE_TOLERANCE);
            }
        }
        probs.push(s);
        communities.push(Some(i));
        counts[i] += 1;
    }
    probs.resize(unmet + 1, 0.0);
    communities.resize(unmet + 1, None);
    TransitionList { probs, communities }
}

/// Transition list of the greedy policy from `state`: the values
/// `{s_i, s_i − μ_i, …, μ_i}` of all communities plus a final `0`, in
/// descending order.
pub fn transition_list_greedy(
    instance: &CommunityInstance,
    state: &ExplorationState,
) -> Result<TransitionList> {
    check_state(instance, state)?;
    Ok(walk(instance, state.counts(), Priority::Greedy))
}

/// Transition list, under the true rates, of the policy that explores
/// `argmax_i 1 − c_i μ̲_i` for estimated rates `bounds`, from the empty state.
pub fn transition_list_policy(
    instance: &CommunityInstance,
    bounds: &[f64],
) -> Result<TransitionList> {
    check_rates(instance, bounds)?;
    Ok(walk(
        instance,
        &vec![0; instance.len()],
        Priority::Biased(bounds),
    ))
}

/// `L(Q, t)`: the sum over all size-`t` multisets of `qs` of the product of
/// their elements. `O(t · |qs|)`.
pub fn loop_probability(qs: &[f64], t: usize) -> f64 {
    let mut h = vec![0.0; t + 1];
    h[0] = 1.0;
    for &q in qs {
        for s in 1..=t {
            h[s] += q * h[s - 1];
        }
    }
    h[t]
}

/// Distribution of the number of status transitions after `t` steps:
/// entry `j` is `p_0 ⋯ p_{j−1} · L({q_0, …, q_j}, t − j)`, for
/// `j = 0..=min(t, D)`.
pub fn reach_probabilities(tl: &TransitionList, t: usize) -> Vec<f64> {
    let p = tl.probs();
    let top = t.min(tl.unmet());
    // g[s]: probability of sitting at level j after j + s steps.
    let mut g: Vec<f64> = (0..=t).map(|s| (1.0 - p[0]).powi(s as i32)).collect();
    let mut reach = Vec::with_capacity(top + 1);
    reach.push(g[t]);
    for j in 1..=top {
        let q = 1.0 - p[j];
        let span = t - j;
        let mut next = vec![0.0; span + 1];
        next[0] = p[j - 1] * g[0];
        for s in 1..=span {
            next[s] = p[j - 1] * g[s] + q * next[s - 1];
        }
        g = next;
        reach.push(g[span]);
    }
    reach
}

/// `Σ_j f(j + offset) · reach[j]` for the chain driven by `tl` over `t` steps.
pub fn expected_reward_of_list(
    tl: &TransitionList,
    t: usize,
    f: &RewardShape,
    offset: usize,
) -> Result<f64> {
    reach_probabilities(tl, t)
        .iter()
        .enumerate()
        .map(|(j, &r)| f.require(j + offset).map(|v| v * r))
        .sum()
}

/// Expected `f(c)` after `t` further greedy steps from `state`.
pub fn expected_reward_from_state(
    instance: &CommunityInstance,
    state: &ExplorationState,
    t: usize,
    f: &RewardShape,
) -> Result<f64> {
    let tl = transition_list_greedy(instance, state)?;
    expected_reward_of_list(&tl, t, f, state.total())
}

/// Exact expected reward of the greedy policy with budget `budget`.
pub fn expected_reward_greedy(
    instance: &CommunityInstance,
    budget: usize,
    f: &RewardShape,
) -> Result<f64> {
    expected_reward_from_state(instance, &ExplorationState::new(instance), budget, f)
}

/// One realized run of a status-based policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub feedback: RoundFeedback,
    /// Distinct members met.
    pub distinct: usize,
    /// Community explored at each step.
    pub trace: Vec<usize>,
}

/// Runs `budget` steps of the policy ranked by `priority`, drawing members
/// from `source`. With `truncate`, stops once every member has been met.
pub fn explore_policy(
    instance: &CommunityInstance,
    budget: usize,
    priority: Priority<'_>,
    source: &mut impl MemberSource,
    truncate: bool,
) -> Result<PolicyRun> {
    if let Priority::Biased(rates) = priority {
        check_rates(instance, rates)?;
    }
    let mut state = ExplorationState::new(instance);
    let mut feedback = RoundFeedback::new(instance.len());
    let mut trace = Vec::with_capacity(budget);
    let mut visits = vec![0; instance.len()];
    for _ in 0..budget {
        if truncate && state.unmet_total(instance) == 0 {
            break;
        }
        let i = select(instance, state.counts(), priority);
        let member = source.draw(instance, i, visits[i]);
        visits[i] += 1;
        state.observe(instance, member)?;
        feedback.push(member);
        trace.push(i);
    }
    Ok(PolicyRun {
        feedback,
        distinct: state.total(),
        trace,
    })
}

/// Realizes one round of the greedy policy.
pub fn simulate_greedy_policy(
    instance: &CommunityInstance,
    budget: usize,
    rng: &mut RngHandle,
) -> Result<PolicyRun> {
    explore_policy(instance, budget, Priority::Greedy, rng, false)
}

/// Greedy policy that stops as soon as all members have been met.
pub fn simulate_greedy_policy_truncated(
    instance: &CommunityInstance,
    budget: usize,
    rng: &mut RngHandle,
) -> Result<PolicyRun> {
    explore_policy(instance, budget, Priority::Greedy, rng, true)
}

/// Optimal adaptive value by value iteration over all count vectors:
/// `V(c, t) = max_i [c_i μ_i V(c, t−1) + (1 − c_i μ_i)(1 + V(c + e_i, t−1))]`.
pub fn optimal_policy_value_oracle(instance: &CommunityInstance, budget: usize) -> Result<f64> {
    let radix: Vec<usize> = instance.sizes().iter().map(|&d| d as usize + 1).collect();
    let states = radix
        .iter()
        .try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
        .unwrap_or(u128::MAX);
    let required = states.saturating_mul(budget.max(1) as u128);
    if required > ENUMERATION_LIMIT {
        return Err(Error::SizeGuard {
            what: "value iteration",
            required,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n = states as usize;
    let mut stride = vec![1; radix.len()];
    for i in 1..radix.len() {
        stride[i] = stride[i - 1] * radix[i - 1];
    }
    let rates = instance.rates();
    let mut prev = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut counts = vec![0usize; radix.len()];
    for _ in 0..budget {
        counts.iter_mut().for_each(|c| *c = 0);
        for idx in 0..n {
            let mut best = f64::NEG_INFINITY;
            for i in 0..radix.len() {
                let met = counts[i] as f64 * rates[i];
                let mut v = met * prev[idx];
                if counts[i] + 1 < radix[i] {
                    v += (1.0 - met) * (1.0 + prev[idx + stride[i]]);
                }
                best = best.max(v);
            }
            next[idx] = best;
            // advance the mixed-radix counter
            for (c, &r) in counts.iter_mut().zip(&radix) {
                *c += 1;
                if *c < r {
                    break;
                }
                *c = 0;
            }
        }
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(prev[0])
}

/// Expected loss of exploring community `i` once at `state` and then
/// following the greedy policy for `t` steps, against `t + 1` greedy steps:
/// `Σ_{j<k} (f'(j+1) − f'(j)) (p_j − p_k) Prob_t(j)` with `f'(j) = f(j + c)`
/// and `k` the first position of community `i` in the greedy list.
pub fn reward_gap_first_step(
    instance: &CommunityInstance,
    state: &ExplorationState,
    i: usize,
    t: usize,
    f: &RewardShape,
) -> Result<f64> {
    instance.check_index(i)?;
    check_state(instance, state)?;
    if i == greedy_choice(instance, state) {
        return Ok(0.0);
    }
    let tl = walk(instance, state.counts(), Priority::Greedy);
    let k = tl
        .communities()
        .iter()
        .position(|&c| c == Some(i))
        .unwrap_or(tl.unmet());
    let p = tl.probs();
    let reach = reach_probabilities(&tl, t);
    let c = state.total();
    let mut gap = 0.0;
    for (j, &r) in reach.iter().enumerate().take(k) {
        let step = f.require(c + j + 1)? - f.require(c + j)?;
        gap += step * (p[j] - p[k]) * r;
    }
    Ok(gap)
}

/// `U[i][k]`: how often community `i` occupies the first `k` positions of the
/// greedy list from the empty state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UTable {
    rows: Vec<Vec<usize>>,
}

impl UTable {
    pub fn communities(&self) -> usize {
        self.rows.len()
    }

    /// `Σ d_i`, the largest valid `k`.
    pub fn positions(&self) -> usize {
        self.rows[0].len() - 1
    }

    pub fn get(&self, i: usize, k: usize) -> Result<usize> {
        if i >= self.rows.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                count: self.rows.len(),
            });
        }
        self.rows[i].get(k).copied().ok_or(Error::IndexOutOfRange {
            index: k,
            count: self.rows[i].len(),
        })
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }
}

pub fn u_table(instance: &CommunityInstance) -> UTable {
    let tl = walk(instance, &vec![0; instance.len()], Priority::Greedy);
    let mut rows = vec![vec![0; tl.unmet() + 1]; instance.len()];
    for (pos, tag) in tl.communities().iter().take(tl.unmet()).enumerate() {
        for (i, row) in rows.iter_mut().enumerate() {
            row[pos + 1] = row[pos] + usize::from(*tag == Some(i));
        }
    }
    UTable { rows }
}

/// Gap constants of community `i` at depth `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveGap {
    /// `(μ_i U_{i,k} − min_j μ_j U_{j,k}) / U_{i,k}`, `∞` when `i` attains the min.
    pub delta_min: f64,
    /// `(μ_i U_{i,k} − μ_{i*} U_{i*,k}) / (U_{i,k} + U_{i*,k})`, `∞` when `i` attains the min.
    pub epsilon: f64,
    /// Upper bound on `Δ^{i,k}_max` (the same for every `i`).
    pub delta_max_upper: f64,
}

/// [`AdaptiveGap`] entries for `k = m+1 ..= min(K, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveGapTable {
    first: usize,
    rows: Vec<Vec<AdaptiveGap>>,
}

impl AdaptiveGapTable {
    /// The valid depths `k`.
    pub fn depths(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.rows.len()
    }

    pub fn get(&self, i: usize, k: usize) -> Result<AdaptiveGap> {
        let row = k
            .checked_sub(self.first)
            .and_then(|r| self.rows.get(r))
            .ok_or(Error::IndexOutOfRange {
                index: k,
                count: self.first + self.rows.len(),
            })?;
        row.get(i).copied().ok_or(Error::IndexOutOfRange {
            index: i,
            count: row.len(),
        })
    }

    /// All entries as `(i, k, gap)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, AdaptiveGap)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(r, row)| {
            row.iter()
                .enumerate()
                .map(move |(i, g)| (i, self.first + r, *g))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn adaptive_gap_constants(
    instance: &CommunityInstance,
    budget: usize,
    f: &RewardShape,
) -> Result<AdaptiveGapTable> {
    let m = instance.len();
    let u = u_table(instance);
    let top = budget.min(u.positions());
    let tl = walk(instance, &vec![0; m], Priority::Greedy);
    let reach = reach_probabilities(&tl, budget);
    let weighted: Vec<f64> = reach
        .iter()
        .enumerate()
        .map(|(j, &r)| f.require(j).map(|v| v * r))
        .collect::<Result<_>>()?;
    let rates = instance.rates();
    let mut rows = Vec::new();
    for k in m + 1..=top {
        let load: Vec<f64> = (0..m).map(|i| rates[i] * u.row(i)[k] as f64).collect();
        let star = (0..m).fold(0, |b, i| if load[i] < load[b] { i } else { b });
        let floor = load[star];
        let delta_max_upper: f64 = weighted[k.min(weighted.len())..].iter().sum();
        let row = (0..m)
            .map(|i| {
                let ui = u.row(i)[k] as f64;
                let attains = load[i] - floor <= TIE_TOLERANCE || ui == 0.0;
                let (delta_min, epsilon) = if attains {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    let us = u.row(star)[k] as f64;
                    ((load[i] - floor) / ui, (load[i] - floor) / (ui + us))
                };
                AdaptiveGap {
                    delta_min,
                    epsilon,
                    delta_max_upper,
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(AdaptiveGapTable { first: m + 1, rows })
}
