//! Collision counting: two independent uniform draws from a community of size
//! `d` coincide with probability `1/d`, so collision frequencies estimate `μ`.

use crate::error::{Error, Result};
use crate::model::{MemberId, RoundFeedback};

/// How feedback is turned into collision observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorVariant {
    /// Disjoint consecutive pairs within a round; an odd last draw is dropped.
    Paired,
    /// One observation per round: that round's collision frequency.
    RoundAveraged,
    /// Every adjacent pair, including the previous round's last draw.
    Chained,
}

impl EstimatorVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Paired => "paired",
            Self::RoundAveraged => "round_averaged",
            Self::Chained => "chained",
        }
    }
}

/// Per-community sufficient statistics `T_i`, `X_i`, `μ̂_i`.
///
/// `X_i` is a collision count for the paired and chained variants and a sum
/// of per-round frequencies for the averaged one; in every case
/// `μ̂_i = X_i / T_i` (0 while `T_i = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    variant: EstimatorVariant,
    pairs: Vec<u64>,
    collisions: Vec<f64>,
    mu_hat: Vec<f64>,
    last_member: Vec<Option<MemberId>>,
}

/// Output of [`EstimatorState::confidence_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBounds {
    /// `μ̲_i = max(0, μ̂_i − ρ_i)`.
    pub lower: Vec<f64>,
    /// `ρ_i = sqrt(3 ln t / (2 T_i))`, or 0 when `T_i = 0`.
    pub radius: Vec<f64>,
}

impl EstimatorState {
    pub fn new(variant: EstimatorVariant, communities: usize) -> Self {
        Self {
            variant,
            pairs: vec![0; communities],
            collisions: vec![0.0; communities],
            mu_hat: vec![0.0; communities],
            last_member: vec![None; communities],
        }
    }

    pub fn variant(&self) -> EstimatorVariant {
        self.variant
    }

    pub fn communities(&self) -> usize {
        self.pairs.len()
    }

    /// `T_i`.
    pub fn pairs(&self) -> &[u64] {
        &self.pairs
    }

    /// `X_i`.
    pub fn collisions(&self) -> &[f64] {
        &self.collisions
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    /// Last member met in community `i` (chained variant only).
    pub fn last_member(&self, i: usize) -> Option<MemberId> {
        self.last_member[i]
    }

    fn expect(&self, variant: EstimatorVariant, feedback: &RoundFeedback) -> Result<()> {
        if self.variant != variant {
            return Err(Error::VariantMismatch {
                state: self.variant.name(),
                expected: variant.name(),
            });
        }
        if feedback.communities() != self.communities() {
            return Err(Error::LengthMismatch {
                expected: self.communities(),
                actual: feedback.communities(),
            });
        }
        Ok(())
    }

    fn refresh(&mut self, i: usize) {
        if self.pairs[i] > 0 {
            self.mu_hat[i] = self.collisions[i] / self.pairs[i] as f64;
        }
    }

    /// Counts collisions in `(S[0], S[1]), (S[2], S[3]), …`.
    pub fn update_paired(&mut self, feedback: &RoundFeedback) -> Result<()> {
        self.expect(EstimatorVariant::Paired, feedback)?;
        for i in 0..self.communities() {
            let (pairs, hits) = disjoint_pairs(feedback.sequence(i));
            if pairs > 0 {
                self.pairs[i] += pairs;
                self.collisions[i] += hits as f64;
                self.refresh(i);
            }
        }
        Ok(())
    }

    /// Adds one observation, the round's paired collision frequency, for
    /// every community explored more than once.
    pub fn update_round_averaged(&mut self, feedback: &RoundFeedback) -> Result<()> {
        self.expect(EstimatorVariant::RoundAveraged, feedback)?;
        for i in 0..self.communities() {
            let (pairs, hits) = disjoint_pairs(feedback.sequence(i));
            if pairs == 0 {
                continue;
            }
            let x = hits as f64 / pairs as f64;
            self.pairs[i] += 1;
            self.collisions[i] += x;
            self.mu_hat[i] += (x - self.mu_hat[i]) / self.pairs[i] as f64;
        }
        Ok(())
    }

    /// Counts collisions between all adjacent draws, linking the first draw of
    /// this round to the last draw of the previous visited round.
    /// `round_index` is 1-based.
    pub fn update_chained(&mut self, feedback: &RoundFeedback, round_index: u64) -> Result<()> {
        self.expect(EstimatorVariant::Chained, feedback)?;
        if round_index == 0 {
            return Err(Error::InvalidParameter("round index starts at 1".into()));
        }
        for i in 0..self.communities() {
            let seq = feedback.sequence(i);
            let Some(&last) = seq.last() else { continue };
            let mut pairs = 0;
            let mut hits = 0;
            let mut prev = self.last_member[i];
            for &u in seq {
                if let Some(p) = prev {
                    pairs += 1;
                    hits += u64::from(p == u);
                }
                prev = Some(u);
            }
            self.last_member[i] = Some(last);
            if pairs > 0 {
                self.pairs[i] += pairs;
                self.collisions[i] += hits as f64;
                self.refresh(i);
            }
        }
        Ok(())
    }

    /// Dispatches to the update rule of this state's variant.
    pub fn update(&mut self, feedback: &RoundFeedback, round_index: u64) -> Result<()> {
        match self.variant {
            EstimatorVariant::Paired => self.update_paired(feedback),
            EstimatorVariant::RoundAveraged => self.update_round_averaged(feedback),
            EstimatorVariant::Chained => self.update_chained(feedback, round_index),
        }
    }

    /// Lower confidence bounds at 1-based round `t`.
    pub fn confidence_bounds(&self, t: u64) -> ConfidenceBounds {
        let log_t = (t.max(1) as f64).ln();
        let radius: Vec<f64> = self
            .pairs
            .iter()
            .map(|&n| confidence_radius(log_t, n))
            .collect();
        let lower = self
            .mu_hat
            .iter()
            .zip(&radius)
            .map(|(&mu, &r)| (mu - r).max(0.0))
            .collect();
        ConfidenceBounds { lower, radius }
    }

    /// The plug-in size estimate `T_i / X_i`; `None` before any collision.
    pub fn size_estimate(&self, i: usize) -> Option<f64> {
        (self.collisions[i] > 0.0).then(|| self.pairs[i] as f64 / self.collisions[i])
    }
}

fn confidence_radius(log_t: f64, pairs: u64) -> f64 {
    if pairs == 0 {
        0.0
    } else {
        (3.0 * log_t / (2.0 * pairs as f64)).sqrt()
    }
}

fn disjoint_pairs(seq: &[MemberId]) -> (u64, u64) {
    let mut pairs = 0;
    let mut hits = 0;
    for pair in seq.chunks_exact(2) {
        pairs += 1;
        hits += u64::from(pair[0] == pair[1]);
    }
    (pairs, hits)
}

/// `(1 + sqrt(8 d ln(1/δ) + 1)) / 2`: enough draws from a community of size
/// `d` to see a collision with probability at least `1 − δ`.
pub fn collision_sample_bound(d: u32, delta: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("size must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0, 1)"
        )));
    }
    Ok((1.0 + (8.0 * f64::from(d) * (1.0 / delta).ln() + 1.0).sqrt()) / 2.0)
}

/// [`collision_sample_bound`] rounded up.
pub fn min_samples_for_collision(d: u32, delta: f64) -> Result<u64> {
    collision_sample_bound(d, delta).map(|b| b.ceil() as u64)
}
