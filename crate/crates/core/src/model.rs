//! Core domain types and the seeded sampling of community members.

use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The ground truth of a problem: `m` disjoint communities with known sizes.
///
/// Rates `μ_i = 1/d_i` are always derived from the sizes on demand.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommunityInstance {
    sizes: Vec<u32>,
}

impl CommunityInstance {
    pub fn new(sizes: Vec<u32>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidInstance("no communities".into()));
        }
        if let Some(pos) = sizes.iter().position(|&d| d == 0) {
            return Err(Error::InvalidInstance(format!(
                "community {pos} has size 0"
            )));
        }
        Ok(Self { sizes })
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn size(&self, i: usize) -> u32 {
        self.sizes[i]
    }

    /// `μ_i = 1/d_i`.
    pub fn rate(&self, i: usize) -> f64 {
        1.0 / f64::from(self.sizes[i])
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.rate(i)).collect()
    }

    /// Total number of members across all communities.
    pub fn total_members(&self) -> usize {
        self.sizes.iter().map(|&d| d as usize).sum()
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                count: self.len(),
            })
        }
    }
}

/// Validated constructor for an instance.
pub fn make_instance(sizes: &[u32]) -> Result<CommunityInstance> {
    CommunityInstance::new(sizes.to_vec())
}

/// A member of a community, identified by its local id in `[0, d_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemberId {
    pub community: usize,
    pub local: u32,
}

/// Deterministic pseudo-random stream.
///
/// Backed by ChaCha8 seeded through `seed_from_u64`, which is specified
/// independently of platform word size. All integer draws go through `u32`
/// ranges so that results do not depend on `usize` width.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        self.inner.random_range(0..n)
    }

    /// Uniform real in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Derives the seed of trial `index` from a base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Meets one member of community `i`, uniformly at random.
pub fn sample_member(
    instance: &CommunityInstance,
    i: usize,
    rng: &mut RngHandle,
) -> Result<MemberId> {
    instance.check_index(i)?;
    Ok(MemberId {
        community: i,
        local: rng.below(instance.size(i)),
    })
}

/// Where explorations get their members from.
///
/// `visit` is the zero-based exploration index `τ` within community `i`.
pub trait MemberSource {
    fn draw(&mut self, instance: &CommunityInstance, i: usize, visit: usize) -> MemberId;
}

impl MemberSource for RngHandle {
    fn draw(&mut self, instance: &CommunityInstance, i: usize, _visit: usize) -> MemberId {
        MemberId {
            community: i,
            local: self.below(instance.size(i)),
        }
    }
}

/// A realization `Φ` materialized lazily: `Φ(i, τ)` is drawn on first access
/// and replayed afterwards, so several policies can be run on the same draw.
#[derive(Debug)]
pub struct Realization<'a> {
    rng: &'a mut RngHandle,
    table: Vec<Vec<u32>>,
}

impl<'a> Realization<'a> {
    pub fn new(instance: &CommunityInstance, rng: &'a mut RngHandle) -> Self {
        Self {
            rng,
            table: vec![Vec::new(); instance.len()],
        }
    }
}

impl MemberSource for Realization<'_> {
    fn draw(&mut self, instance: &CommunityInstance, i: usize, visit: usize) -> MemberId {
        let column = &mut self.table[i];
        while column.len() <= visit {
            column.push(self.rng.below(instance.size(i)));
        }
        MemberId {
            community: i,
            local: column[visit],
        }
    }
}

/// Summary of a partial realization: distinct members met per community,
/// optionally with the met sets themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationState {
    counts: Vec<usize>,
    met: Option<Vec<HashSet<u32>>>,
}

impl ExplorationState {
    /// Empty state that tracks member identities.
    pub fn new(instance: &CommunityInstance) -> Self {
        Self {
            counts: vec![0; instance.len()],
            met: Some(vec![HashSet::new(); instance.len()]),
        }
    }

    /// Count-only state, as used by the status-based dynamic programs.
    pub fn from_counts(instance: &CommunityInstance, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != instance.len() {
            return Err(Error::LengthMismatch {
                expected: instance.len(),
                actual: counts.len(),
            });
        }
        for (i, &c) in counts.iter().enumerate() {
            if c > instance.size(i) as usize {
                return Err(Error::InvalidParameter(format!(
                    "count {c} exceeds size {} of community {i}",
                    instance.size(i)
                )));
            }
        }
        Ok(Self { counts, met: None })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, i: usize) -> usize {
        self.counts[i]
    }

    /// `c(ψ)`: distinct members met overall.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Status entry `s_i = 1 − μ_i c_i`.
    pub fn unmet_fraction(&self, instance: &CommunityInstance, i: usize) -> f64 {
        let d = instance.size(i) as usize;
        (d - self.counts[i]) as f64 / d as f64
    }

    /// Members still unmet across all communities.
    pub fn unmet_total(&self, instance: &CommunityInstance) -> usize {
        instance.total_members() - self.total()
    }

    pub fn tracks_members(&self) -> bool {
        self.met.is_some()
    }

    /// Records a met member. Returns whether it was new.
    ///
    /// Count-only states cannot tell repeats apart and reject the call.
    pub fn observe(&mut self, instance: &CommunityInstance, member: MemberId) -> Result<bool> {
        instance.check_index(member.community)?;
        if member.local >= instance.size(member.community) {
            return Err(Error::InvalidParameter(format!(
                "local id {} out of range for community {}",
                member.local, member.community
            )));
        }
        let met = self
            .met
            .as_mut()
            .ok_or_else(|| Error::Unsupported("state does not track member identities".into()))?;
        let fresh = met[member.community].insert(member.local);
        if fresh {
            self.counts[member.community] += 1;
        }
        Ok(fresh)
    }
}

/// Members met in one round, per community, in exploration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoundFeedback {
    sequences: Vec<Vec<MemberId>>,
}

impl RoundFeedback {
    pub fn new(communities: usize) -> Self {
        Self {
            sequences: vec![Vec::new(); communities],
        }
    }

    /// Builds feedback from per-community local-id sequences.
    pub fn from_locals(locals: Vec<Vec<u32>>) -> Self {
        let sequences = locals
            .into_iter()
            .enumerate()
            .map(|(community, seq)| {
                seq.into_iter()
                    .map(|local| MemberId { community, local })
                    .collect()
            })
            .collect();
        Self { sequences }
    }

    pub fn push(&mut self, member: MemberId) {
        self.sequences[member.community].push(member);
    }

    pub fn communities(&self) -> usize {
        self.sequences.len()
    }

    pub fn sequence(&self, i: usize) -> &[MemberId] {
        &self.sequences[i]
    }

    pub fn sequences(&self) -> &[Vec<MemberId>] {
        &self.sequences
    }

    /// Explorations spent this round.
    pub fn total_len(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    /// Visits per community.
    pub fn visits(&self) -> Vec<usize> {
        self.sequences.iter().map(Vec::len).collect()
    }
}
