//! JSON experiment configuration.
//!
//! Precedence: command-line overrides, then the JSON document, then the
//! defaults below. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ExpError, Result};
use comexp_core::online::{Mode, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Allocate,
    RewardVsBudget,
    AllocationDistance,
    Regret,
    AdaptiveReward,
}

impl ExperimentKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            Self::Allocate => "allocate",
            Self::RewardVsBudget => "reward_vs_budget",
            Self::AllocationDistance => "allocation_distance",
            Self::Regret => "regret",
            Self::AdaptiveReward => "adaptive_reward",
        }
    }
}

/// Random community sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Uniform on `{lo, …, hi}`.
    UniformDiscrete { m: usize, lo: u32, hi: u32 },
    /// Geometric number of failures with success probability `p`, plus 2.
    Geometric { m: usize, p: f64 },
    /// `⌊Gamma(shape, rate)⌋ + 2`.
    Gamma { m: usize, shape: f64, rate: f64 },
}

impl DistributionSpec {
    pub fn communities(&self) -> usize {
        match *self {
            Self::UniformDiscrete { m, .. } | Self::Geometric { m, .. } | Self::Gamma { m, .. } => {
                m
            }
        }
    }

    /// Same law with a different community count.
    pub fn with_communities(&self, m: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::UniformDiscrete { m: c, .. }
            | Self::Geometric { m: c, .. }
            | Self::Gamma { m: c, .. } => *c = m,
        }
        out
    }

    /// Short label used in report rows.
    pub fn label(&self) -> String {
        match *self {
            Self::UniformDiscrete { lo, hi, .. } => format!("uniform({lo},{hi})"),
            Self::Geometric { p, .. } => format!("geometric({p})"),
            Self::Gamma { shape, rate, .. } => format!("gamma({shape},{rate})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ExpError::Config(msg));
        if self.communities() == 0 {
            return bad("distribution needs m >= 1".into());
        }
        match *self {
            Self::UniformDiscrete { lo, hi, .. } => {
                if lo == 0 || lo > hi {
                    return bad(format!(
                        "uniform_discrete needs 1 <= lo <= hi, got lo={lo}, hi={hi}"
                    ));
                }
            }
            Self::Geometric { p, .. } => {
                if !(p > 0.0 && p <= 1.0) {
                    return bad(format!("geometric needs 0 < p <= 1, got {p}"));
                }
            }
            Self::Gamma { shape, rate, .. } => {
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
                    return bad(format!(
                        "gamma needs positive shape and rate, got {shape}, {rate}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Inclusive budget sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRange {
    pub start: usize,
    pub end: usize,
    #[serde(default = "one")]
    pub step: usize,
}

fn one() -> usize {
    1
}

impl BudgetRange {
    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step.max(1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    /// Community counts to sweep for `allocation_distance`; defaults to the
    /// distribution's own `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<BudgetRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Learner variants for `regret`; all four by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<String>>,
    /// Modes for `regret`; both by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<String>>,
    /// Keep every n-th round in the regret table (the last round is always kept).
    #[serde(default = "one")]
    pub report_every: usize,
    /// Use the fast allocation for `allocate`.
    #[serde(default)]
    pub fast: bool,
    /// Output file for commands that write a single table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub horizon: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ExpError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.replications {
            self.replications = r;
        }
        if let Some(h) = o.horizon {
            self.horizon = Some(h);
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ExpError::Config(msg.to_string()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.report_every == 0 {
            return bad("report_every must be at least 1");
        }
        match (&self.sizes, &self.distribution) {
            (Some(_), Some(_)) => return bad("give either sizes or distribution, not both"),
            (None, None) => return bad("one of sizes or distribution is required"),
            (Some(s), None) if s.is_empty() || s.contains(&0) => {
                return bad("sizes must be non-empty and positive")
            }
            (None, Some(d)) => d.validate()?,
            _ => {}
        }
        if let Some(r) = &self.budgets {
            if r.start > r.end || r.step == 0 {
                return bad("budgets needs start <= end and step >= 1");
            }
        }
        match self.kind {
            ExperimentKind::Allocate => {
                if self.budget.is_none() {
                    return bad("allocate needs budget");
                }
            }
            ExperimentKind::RewardVsBudget | ExperimentKind::AdaptiveReward => {
                if self.budget.is_none() && self.budgets.is_none() {
                    return bad("budget or budgets is required");
                }
            }
            ExperimentKind::AllocationDistance => {
                if let Some(counts) = &self.community_counts {
                    if self.distribution.is_none() {
                        return bad("community_counts needs a distribution");
                    }
                    if counts.contains(&0) {
                        return bad("community_counts must be positive");
                    }
                }
            }
            ExperimentKind::Regret => {
                match self.budget {
                    None | Some(0) => return bad("regret needs a positive budget"),
                    _ => {}
                }
                match self.horizon {
                    None | Some(0) => return bad("regret needs a positive horizon"),
                    _ => {}
                }
                self.learners()?;
            }
        }
        Ok(())
    }

    /// Budgets to sweep: `budgets` if given, else the single `budget`.
    pub fn budget_values(&self) -> Vec<usize> {
        match (&self.budgets, self.budget) {
            (Some(r), _) => r.values(),
            (None, Some(k)) => vec![k],
            (None, None) => Vec::new(),
        }
    }

    /// `(mode, variant)` pairs for the regret study, in report order.
    pub fn learners(&self) -> Result<Vec<(Mode, Variant)>> {
        let modes = match &self.modes {
            None => vec![Mode::NonAdaptive, Mode::Adaptive],
            Some(names) => names
                .iter()
                .map(|n| match n.as_str() {
                    "nonadaptive" => Ok(Mode::NonAdaptive),
                    "adaptive" => Ok(Mode::Adaptive),
                    other => Err(ExpError::Config(format!("unknown mode {other:?}"))),
                })
                .collect::<Result<_>>()?,
        };
        let variants = match &self.variants {
            None => Variant::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| {
                    Variant::from_name(n)
                        .ok_or_else(|| ExpError::Config(format!("unknown variant {n:?}")))
                })
                .collect::<Result<_>>()?,
        };
        if modes.is_empty() || variants.is_empty() {
            return Err(ExpError::Config(
                "modes and variants must not be empty".into(),
            ));
        }
        Ok(modes
            .iter()
            .flat_map(|&m| variants.iter().map(move |&v| (m, v)))
            .collect())
    }
}
