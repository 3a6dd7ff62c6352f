//! Random instances and baseline allocations.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric};

use comexp_core::model::{CommunityInstance, RngHandle};
use comexp_core::nonadaptive::Allocation;

use crate::config::DistributionSpec;
use crate::error::{ExpError, Result};

/// Draws `m` community sizes from `spec`.
pub fn generate_instance(
    spec: &DistributionSpec,
    rng: &mut RngHandle,
) -> Result<CommunityInstance> {
    spec.validate()?;
    let m = spec.communities();
    let sizes: Vec<u32> = match *spec {
        DistributionSpec::UniformDiscrete { lo, hi, .. } => {
            (0..m).map(|_| rng.random_range(lo..=hi)).collect()
        }
        DistributionSpec::Geometric { p, .. } => {
            let law = Geometric::new(p).map_err(|e| ExpError::Config(format!("geometric: {e}")))?;
            (0..m)
                .map(|_| clamp_size(law.sample(rng) as f64 + 2.0))
                .collect()
        }
        DistributionSpec::Gamma { shape, rate, .. } => {
            let law = Gamma::new(shape, 1.0 / rate)
                .map_err(|e| ExpError::Config(format!("gamma: {e}")))?;
            (0..m)
                .map(|_| clamp_size(law.sample(rng).floor() + 2.0))
                .collect()
        }
    };
    Ok(CommunityInstance::new(sizes)?)
}

fn clamp_size(x: f64) -> u32 {
    x.min(u32::MAX as f64) as u32
}

/// Uniform draw from the compositions of `budget` into `m` non-negative
/// parts (stars and bars).
pub fn random_allocation(m: usize, budget: usize, rng: &mut RngHandle) -> Allocation {
    if m == 0 {
        return Allocation::zeros(0);
    }
    // choose m−1 bar positions among budget+m−1 slots, Floyd's method
    let slots = budget + m - 1;
    let bars = m - 1;
    let mut chosen = std::collections::BTreeSet::new();
    for j in slots - bars..slots {
        let t = rng.random_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    let mut visits = Vec::with_capacity(m);
    let mut prev = 0;
    for &b in &chosen {
        visits.push(b - prev);
        prev = b + 1;
    }
    visits.push(slots - prev);
    Allocation::new(visits)
}

/// `round(K d_i / Σd)` with largest-remainder correction so the parts sum to `K`.
pub fn proportional_allocation(instance: &CommunityInstance, budget: usize) -> Allocation {
    let total = instance.total_members() as u128;
    let k = budget as u128;
    let mut visits = Vec::with_capacity(instance.len());
    let mut rest = Vec::with_capacity(instance.len());
    for (i, &d) in instance.sizes().iter().enumerate() {
        let num = k * d as u128;
        visits.push((num / total) as usize);
        rest.push((num % total, i));
    }
    let short = budget - visits.iter().sum::<usize>();
    // largest remainder first, lower index on ties
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rest.iter().take(short) {
        visits[i] += 1;
    }
    Allocation::new(visits)
}
