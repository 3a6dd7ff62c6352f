//! Non-adaptive exploration: a budget allocation is fixed before any visit.
//!
//! The expected number of distinct members met when community `i` is visited
//! `k_i` times is `d_i (1 − (1 − μ_i)^{k_i})`, so the marginal gain of the
//! `(k+1)`-th visit is `(1 − μ_i)^k`. Gains decrease along each community,
//! which is why picking the largest remaining gain `K` times is optimal.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::model::{CommunityInstance, MemberSource, RngHandle, RoundFeedback};
use crate::TIE_TOLERANCE;

/// Upper limit on enumerated states for the exhaustive oracles.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Visit counts `k = (k_1, …, k_m)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Allocation(Vec<usize>);

impl Allocation {
    pub fn new(visits: Vec<usize>) -> Self {
        Self(visits)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn visits(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `‖k‖₁`, the budget consumed.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// L1 distance to another allocation of the same length.
    pub fn l1_distance(&self, other: &Allocation) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a.abs_diff(b))
            .sum()
    }
}

impl From<Vec<usize>> for Allocation {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// `(1 − μ)^k`, the gain of the `(k+1)`-th visit.
pub fn marginal_gain(rate: f64, k: usize) -> f64 {
    (1.0 - rate).powi(k as i32)
}

/// Expected distinct members `Σ (1 − (1 − μ_i)^{k_i}) / μ_i` for arbitrary
/// rates in `[0, 1]`. A zero rate (infinite community) contributes `k_i`.
pub fn expected_reward_for_rates(rates: &[f64], visits: &[usize]) -> f64 {
    rates
        .iter()
        .zip(visits)
        .map(|(&mu, &k)| {
            if mu == 0.0 {
                k as f64
            } else {
                (1.0 - marginal_gain(mu, k)) / mu
            }
        })
        .sum()
}

/// Expected reward `r_k(μ) = Σ d_i (1 − (1 − 1/d_i)^{k_i})`.
pub fn expected_reward(instance: &CommunityInstance, alloc: &Allocation) -> Result<f64> {
    check_len(instance, alloc)?;
    Ok(instance
        .sizes()
        .iter()
        .zip(alloc.visits())
        .map(|(&d, &k)| {
            let d = f64::from(d);
            d * (1.0 - marginal_gain(1.0 / d, k))
        })
        .sum())
}

fn check_len(instance: &CommunityInstance, alloc: &Allocation) -> Result<()> {
    if alloc.len() == instance.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: instance.len(),
            actual: alloc.len(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    visits: usize,
    index: usize,
}

impl Candidate {
    // Among equal gains: fewer visits first, then the lower index.
    fn precedes(&self, other: &Candidate) -> bool {
        (self.visits, self.index) < (other.visits, other.index)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.visits.cmp(&self.visits))
            .then_with(|| other.index.cmp(&self.index))
    }
}

enum TieRule<'a> {
    Deterministic,
    Random(&'a mut RngHandle),
}

/// Runs greedy increments from `start` until `budget` visits are allocated.
/// Returns the allocation and the number of increments performed.
fn greedy_fill(
    rates: &[f64],
    start: Vec<usize>,
    budget: usize,
    mut tie: TieRule<'_>,
) -> (Vec<usize>, usize) {
    let mut visits = start;
    let mut heap: BinaryHeap<Candidate> = visits
        .iter()
        .enumerate()
        .map(|(index, &k)| Candidate {
            gain: marginal_gain(rates[index], k),
            visits: k,
            index,
        })
        .collect();
    let mut steps = 0;
    let mut ties = Vec::new();
    while visits.iter().sum::<usize>() < budget {
        let top = heap.pop().expect("heap holds one entry per community");
        ties.clear();
        ties.push(top);
        while let Some(next) = heap.peek() {
            if next.gain >= top.gain - TIE_TOLERANCE {
                ties.push(heap.pop().unwrap());
            } else {
                break;
            }
        }
        let pick = match &mut tie {
            TieRule::Deterministic => {
                let mut best = 0;
                for (pos, c) in ties.iter().enumerate() {
                    if c.precedes(&ties[best]) {
                        best = pos;
                    }
                }
                best
            }
            TieRule::Random(rng) => rng.below(ties.len() as u32) as usize,
        };
        let chosen = ties.swap_remove(pick);
        heap.extend(ties.drain(..));
        let i = chosen.index;
        visits[i] += 1;
        steps += 1;
        heap.push(Candidate {
            gain: marginal_gain(rates[i], visits[i]),
            visits: visits[i],
            index: i,
        });
    }
    (visits, steps)
}

/// Greedy allocation for arbitrary rates (e.g. confidence bounds).
///
/// Each of the `budget` steps gives one visit to the community with the
/// largest marginal gain `(1 − μ_i)^{k_i}`. Gains within `1e-12` are ties,
/// resolved towards fewer visits and then the lower index, so all-equal
/// gains allocate round-robin.
pub fn greedy_allocation_for_rates(rates: &[f64], budget: usize) -> Allocation {
    let (visits, _) = greedy_fill(rates, vec![0; rates.len()], budget, TieRule::Deterministic);
    Allocation(visits)
}

/// Optimal allocation of `budget` visits by the greedy method.
pub fn greedy_allocation(instance: &CommunityInstance, budget: usize) -> Allocation {
    greedy_allocation_for_rates(&instance.rates(), budget)
}

/// Greedy allocation with ties broken uniformly at random.
pub fn greedy_allocation_randomized(
    instance: &CommunityInstance,
    budget: usize,
    rng: &mut RngHandle,
) -> Allocation {
    let (visits, _) = greedy_fill(
        &instance.rates(),
        vec![0; instance.len()],
        budget,
        TieRule::Random(rng),
    );
    Allocation(visits)
}

/// Real-valued sandwich `k⁻ ≤ k* ≤ k⁺` around every optimal allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Slack applied before rounding real-valued bounds, so that values which
/// are integral up to float error round to that integer.
const ROUNDING_SLACK: f64 = 1e-9;

impl AllocationBounds {
    /// `⌈k⁻_i⌉`, never exceeding any optimal `k*_i`.
    pub fn lower_ceil(&self) -> Vec<usize> {
        self.lower
            .iter()
            .map(|&x| (x - ROUNDING_SLACK).ceil().max(0.0) as usize)
            .collect()
    }

    /// `⌊k⁺_i⌋`.
    pub fn upper_floor(&self) -> Vec<usize> {
        self.upper
            .iter()
            .map(|&x| (x + ROUNDING_SLACK).floor().max(0.0) as usize)
            .collect()
    }
}

/// Lower and upper bounds on the optimal allocation:
/// `k⁻_i = ((K − m)/ln(1 − μ_i)) / Σ_j 1/ln(1 − μ_j)` and
/// `k⁺_i = (K/ln(1 − μ_i)) / Σ_j 1/ln(1 − μ_j) + 1`.
///
/// Size-one communities (`ln 0 = −∞`) get a zero share of the proportional
/// term and the sum runs over the remaining communities. When every
/// community has size one the budget is split evenly.
pub fn allocation_bounds(instance: &CommunityInstance, budget: usize) -> Result<AllocationBounds> {
    let m = instance.len();
    if budget <= m {
        return Err(Error::Unsupported(format!(
            "allocation bounds need a budget above the community count ({budget} <= {m})"
        )));
    }
    let inverse_logs: Vec<Option<f64>> = instance
        .sizes()
        .iter()
        .map(|&d| (d >= 2).then(|| 1.0 / (1.0 - 1.0 / f64::from(d)).ln()))
        .collect();
    let denom: f64 = inverse_logs.iter().flatten().sum();
    if inverse_logs.iter().all(Option::is_none) {
        // Every community has one member: the formula's symmetric limit.
        return Ok(AllocationBounds {
            lower: vec![(budget - m) as f64 / m as f64; m],
            upper: vec![budget as f64 / m as f64 + 1.0; m],
        });
    }
    let share = |inv: &Option<f64>| inv.map_or(0.0, |v| v / denom);
    Ok(AllocationBounds {
        lower: inverse_logs
            .iter()
            .map(|inv| (budget - m) as f64 * share(inv))
            .collect(),
        upper: inverse_logs
            .iter()
            .map(|inv| budget as f64 * share(inv) + 1.0)
            .collect(),
    })
}

/// Result of [`fast_allocation`].
#[derive(Debug, Clone, PartialEq)]
pub struct FastAllocation {
    pub allocation: Allocation,
    /// The rounded-up lower bound the greedy completion started from.
    pub initial: Allocation,
    /// Greedy increments performed after initialization (at most `m`).
    pub increments: usize,
}

/// Optimal allocation in `O(m log m)`: start from `⌈k⁻⌉` and complete greedily.
pub fn fast_allocation(instance: &CommunityInstance, budget: usize) -> Result<FastAllocation> {
    let bounds = allocation_bounds(instance, budget)?;
    let initial = bounds.lower_ceil();
    let (visits, increments) = greedy_fill(
        &instance.rates(),
        initial.clone(),
        budget,
        TieRule::Deterministic,
    );
    Ok(FastAllocation {
        allocation: Allocation(visits),
        initial: Allocation(initial),
        increments,
    })
}

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = match acc.checked_mul(u128::from(n - j)) {
            Some(v) => v / u128::from(j + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of ways to split `budget` visits over `m` communities.
pub fn composition_count(budget: usize, m: usize) -> u128 {
    binomial((budget + m - 1) as u64, (m - 1) as u64)
}

fn guard_compositions(budget: usize, m: usize) -> Result<()> {
    let required = composition_count(budget, m);
    if required > ENUMERATION_LIMIT {
        return Err(Error::SizeGuard {
            what: "allocation enumeration",
            required,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Calls `visit` for every `k ≥ 0` with `Σ k_i = budget`, in lexicographic order.
pub fn for_each_composition(budget: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(slot: usize, left: usize, buf: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if slot + 1 == buf.len() {
            buf[slot] = left;
            visit(buf);
            return;
        }
        for k in 0..=left {
            buf[slot] = k;
            rec(slot + 1, left - k, buf, visit);
        }
    }
    if m == 0 {
        return;
    }
    let mut buf = vec![0; m];
    rec(0, budget, &mut buf, &mut visit);
}

/// Exhaustive optimum over all allocations spending exactly `budget`.
pub fn brute_force_optimal(
    instance: &CommunityInstance,
    budget: usize,
) -> Result<(Allocation, f64)> {
    guard_compositions(budget, instance.len())?;
    let rates = instance.rates();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_composition(budget, instance.len(), |k| {
        let value = expected_reward_for_rates(&rates, k);
        if best
            .as_ref()
            .is_none_or(|(_, v)| value > *v + TIE_TOLERANCE)
        {
            best = Some((k.to_vec(), value));
        }
    });
    let (k, v) = best.expect("at least one composition");
    Ok((Allocation(k), v))
}

/// Reward-gap constants of the non-adaptive learning problem.
///
/// `Δ_k = r_{k*} − r_k` over allocations with `Σ k_i = K`. For community `i`,
/// `Δ^i_min` / `Δ^i_max` are the smallest / largest positive gaps among
/// allocations with `k_i > 1`; with no such allocation they are `∞` / `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapConstants {
    pub per_community_min: Vec<f64>,
    pub per_community_max: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub budget: usize,
}

impl GapConstants {
    /// `K' = K − m + 1`, the most visits any community gets in a sensible allocation.
    pub fn k_prime(&self) -> usize {
        (self.budget + 1).saturating_sub(self.per_community_min.len())
    }
}

/// Enumerates all allocations to compute [`GapConstants`]. Gaps at or below
/// `1e-12` count as zero.
pub fn gap_constants_nonadaptive(
    instance: &CommunityInstance,
    budget: usize,
) -> Result<GapConstants> {
    let m = instance.len();
    guard_compositions(budget, m)?;
    let rates = instance.rates();
    let mut optimum = f64::NEG_INFINITY;
    for_each_composition(budget, m, |k| {
        optimum = optimum.max(expected_reward_for_rates(&rates, k));
    });
    let mut mins = vec![f64::INFINITY; m];
    let mut maxs = vec![0.0f64; m];
    for_each_composition(budget, m, |k| {
        let gap = optimum - expected_reward_for_rates(&rates, k);
        if gap <= TIE_TOLERANCE {
            return;
        }
        for (i, &ki) in k.iter().enumerate() {
            if ki > 1 {
                mins[i] = mins[i].min(gap);
                maxs[i] = maxs[i].max(gap);
            }
        }
    });
    let min = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let max = maxs.iter().copied().fold(0.0, f64::max);
    Ok(GapConstants {
        per_community_min: mins,
        per_community_max: maxs,
        min,
        max,
        budget,
    })
}

/// Explores according to `alloc`, drawing members from `source`.
///
/// With `truncate`, a community is abandoned once all of its members have
/// been met; the feedback then records only the visits actually made.
pub fn explore_allocation(
    instance: &CommunityInstance,
    alloc: &Allocation,
    source: &mut impl MemberSource,
    truncate: bool,
) -> Result<(RoundFeedback, usize)> {
    check_len(instance, alloc)?;
    let mut feedback = RoundFeedback::new(instance.len());
    let mut distinct = 0;
    let mut seen = HashSet::new();
    for (i, &k) in alloc.visits().iter().enumerate() {
        seen.clear();
        let d = instance.size(i) as usize;
        for visit in 0..k {
            if truncate && seen.len() == d {
                break;
            }
            let member = source.draw(instance, i, visit);
            seen.insert(member.local);
            feedback.push(member);
        }
        distinct += seen.len();
    }
    Ok((feedback, distinct))
}

/// Realizes one exploration round under a fixed allocation. Returns the
/// members met and the realized reward `R(k, φ)`.
pub fn simulate_nonadaptive(
    instance: &CommunityInstance,
    alloc: &Allocation,
    rng: &mut RngHandle,
) -> Result<(RoundFeedback, usize)> {
    explore_allocation(instance, alloc, rng, false)
}

/// Like [`simulate_nonadaptive`], but stops visiting a community once all its
/// members are found. The feedback length is the budget actually used.
pub fn simulate_nonadaptive_truncated(
    instance: &CommunityInstance,
    alloc: &Allocation,
    rng: &mut RngHandle,
) -> Result<(RoundFeedback, usize)> {
    explore_allocation(instance, alloc, rng, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_instance;

    fn inst(sizes: &[u32]) -> CommunityInstance {
        make_instance(sizes).unwrap()
    }

    #[test]
    fn expected_reward_examples() {
        let r = |s: &[u32], k: Vec<usize>| expected_reward(&inst(s), &Allocation::new(k)).unwrap();
        assert_eq!(r(&[1], vec![5]), 1.0);
        // four equally likely realizations with distinct counts 1, 2, 2, 1
        assert_eq!(r(&[2], vec![2]), 1.5);
        assert!((r(&[2, 4], vec![1, 2]) - 2.75).abs() < 1e-15);
        assert!(matches!(
            expected_reward(&inst(&[2, 4]), &Allocation::new(vec![1])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn zero_rate_counts_every_visit() {
        assert_eq!(expected_reward_for_rates(&[0.0, 1.0], &[3, 4]), 4.0);
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_allocation(&inst(&[2, 2]), 4).visits(), &[2, 2]);
        assert_eq!(greedy_allocation(&inst(&[5, 5]), 2).visits(), &[1, 1]);
        // K <= m: one visit to each of the K lowest-index communities
        assert_eq!(
            greedy_allocation(&inst(&[3, 3, 3, 3]), 2).visits(),
            &[1, 1, 0, 0]
        );
        assert_eq!(greedy_allocation(&inst(&[2, 9]), 0).visits(), &[0, 0]);
    }

    #[test]
    fn zero_rates_allocate_round_robin() {
        assert_eq!(
            greedy_allocation_for_rates(&[0.0; 6], 20).visits(),
            &[4, 4, 3, 3, 3, 3]
        );
    }

    #[test]
    fn randomized_ties_keep_reward() {
        let i = inst(&[4, 4, 4, 6]);
        let base = expected_reward(&i, &greedy_allocation(&i, 11)).unwrap();
        let mut rng = RngHandle::new(5);
        for _ in 0..20 {
            let a = greedy_allocation_randomized(&i, 11, &mut rng);
            assert_eq!(a.total(), 11);
            assert!((expected_reward(&i, &a).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_symmetric_and_degenerate() {
        let b = allocation_bounds(&inst(&[5, 5, 5]), 12).unwrap();
        for &x in &b.lower {
            assert!((x - 3.0).abs() < 1e-12);
        }
        assert_eq!(b.lower_ceil(), vec![3, 3, 3]);

        let b = allocation_bounds(&inst(&[1, 4, 6]), 10).unwrap();
        assert_eq!(b.lower[0], 0.0);
        assert_eq!(b.upper[0], 1.0);
        assert!((b.lower.iter().sum::<f64>() - 7.0).abs() < 1e-12);

        assert!(matches!(
            allocation_bounds(&inst(&[2, 3]), 2),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn fast_matches_greedy_on_symmetric() {
        let i = inst(&[7, 7, 7, 7]);
        let fast = fast_allocation(&i, 18).unwrap();
        assert_eq!(fast.allocation, greedy_allocation(&i, 18));
        assert!(fast.increments <= 4);
    }

    #[test]
    fn brute_force_examples() {
        let (k, v) = brute_force_optimal(&inst(&[2, 4]), 3).unwrap();
        assert_eq!(k.visits(), &[1, 2]);
        assert!((v - 2.75).abs() < 1e-12);
        let (k, v) = brute_force_optimal(&inst(&[5, 5]), 2).unwrap();
        assert_eq!(k.visits(), &[1, 1]);
        assert!((v - 2.0).abs() < 1e-12);
        assert!(matches!(
            brute_force_optimal(&inst(&[2; 12]), 60),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn composition_enumeration_count() {
        let mut n = 0;
        for_each_composition(5, 3, |k| {
            assert_eq!(k.iter().sum::<usize>(), 5);
            n += 1;
        });
        assert_eq!(n as u128, composition_count(5, 3));
        assert_eq!(composition_count(5, 3), 21);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn gap_constants_small() {
        // d=(2,4), K=3: rewards (0,3)=2.3125, (1,2)=2.75, (2,1)=2.5, (3,0)=1.75
        let g = gap_constants_nonadaptive(&inst(&[2, 4]), 3).unwrap();
        assert!((g.max - (2.75 - 1.75)).abs() < 1e-12);
        assert!((g.per_community_min[0] - 0.25).abs() < 1e-12);
        assert!((g.per_community_max[0] - 1.0).abs() < 1e-12);
        assert!((g.per_community_min[1] - 0.4375).abs() < 1e-12);
        assert!((g.min - 0.25).abs() < 1e-12);
        assert_eq!(g.k_prime(), 2);

        // one community: every allocation is optimal
        let g = gap_constants_nonadaptive(&inst(&[3]), 4).unwrap();
        assert_eq!(g.per_community_min, vec![f64::INFINITY]);
        assert_eq!(g.per_community_max, vec![0.0]);
    }

    #[test]
    fn gap_constants_symmetric_three_values() {
        // d=(3,3), K=4: compositions (0,4),(1,3),(2,2),(3,1),(4,0) take 3 distinct values
        let i = inst(&[3, 3]);
        let g = gap_constants_nonadaptive(&i, 4).unwrap();
        let r = |k: Vec<usize>| expected_reward(&i, &Allocation::new(k)).unwrap();
        let best = r(vec![2, 2]);
        assert!((g.min - (best - r(vec![1, 3]))).abs() < 1e-12);
        assert!((g.max - (best - r(vec![0, 4]))).abs() < 1e-12);
    }

    #[test]
    fn simulate_trivial_cases() {
        let mut rng = RngHandle::new(1);
        let (fb, distinct) =
            simulate_nonadaptive(&inst(&[1, 1]), &Allocation::new(vec![1, 1]), &mut rng).unwrap();
        assert_eq!(distinct, 2);
        assert_eq!(fb.total_len(), 2);
        let (fb, distinct) =
            simulate_nonadaptive(&inst(&[3, 4]), &Allocation::zeros(2), &mut rng).unwrap();
        assert_eq!((fb.total_len(), distinct), (0, 0));
    }

    #[test]
    fn truncated_stops_when_complete() {
        let mut rng = RngHandle::new(9);
        let (fb, distinct) =
            simulate_nonadaptive_truncated(&inst(&[1, 2]), &Allocation::new(vec![5, 40]), &mut rng)
                .unwrap();
        assert_eq!(distinct, 3);
        assert_eq!(fb.visits()[0], 1);
        assert!(fb.visits()[1] < 40);
    }

    #[test]
    fn monte_carlo_matches_expected_reward() {
        let i = inst(&[2]);
        let alloc = Allocation::new(vec![2]);
        let mut rng = RngHandle::new(77);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let (_, x) = simulate_nonadaptive(&i, &alloc, &mut rng).unwrap();
            sum += x as f64;
            sq += (x * x) as f64;
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64 - mean * mean).sqrt();
        assert!(
            (mean - 1.5).abs() < 3.0 * sd / (n as f64).sqrt(),
            "mean {mean}"
        );
    }
}
