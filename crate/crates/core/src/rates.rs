//! Asymptotic key rate, the direct-transmission benchmark, subgroup grouping
//! and the high-q approximations.

use std::collections::BTreeMap;

use crate::channel::dark_count_adjusted;
use crate::error::{Error, Result};
use crate::params::SetupParams;
use crate::special::{binary_entropy_clamped, error_entropy};

/// A rate in secret bits per round, the setup that produced it (when there is
/// a single one) and optimizer diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub rate: f64,
    pub params: Option<SetupParams>,
    pub meta: BTreeMap<String, f64>,
}

impl RateResult {
    pub fn new(rate: f64, params: Option<SetupParams>) -> Self {
        Self { rate, params, meta: BTreeMap::new() }
    }

    pub fn with_meta(mut self, key: &str, value: f64) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn meta_value(&self, key: &str) -> Option<f64> {
        self.meta.get(key).copied()
    }
}

/// `M p_j [1 - h(Q_Z) - max_i h(Q_{A1 Ai})]` with dark counts, floored at 0.
pub fn asymptotic_rate(params: &SetupParams) -> Result<RateResult> {
    let stats = dark_count_adjusted(params)?;
    // every pair sees the same QBER in the symmetric setup
    let pair_qbers = vec![stats.qber; params.num_parties - 1];
    let worst = pair_qbers.iter().map(|&q| error_entropy(q)).fold(0.0, f64::max);
    let bracket = 1.0 - error_entropy(stats.phase_error) - worst;
    let rate = (params.num_ports as f64 * stats.click_prob * bracket).max(0.0);
    Ok(RateResult::new(rate, Some(*params))
        .with_meta("q", params.vacuum_weight)
        .with_meta("p_j", stats.click_prob)
        .with_meta("qber", stats.qber)
        .with_meta("q_z", stats.phase_error))
}

/// Direct-transmission benchmark `-log2(1 - t²) / (N - 1)`.
pub fn direct_transmission_bound(num_parties: usize, t: f64) -> Result<RateResult> {
    if num_parties < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 parties, got {num_parties}")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParams(format!("transmittance {t} outside [0, 1]")));
    }
    if t == 1.0 {
        return Err(Error::InfiniteBound("lossless link".into()));
    }
    let rate = -(-t * t).ln_1p() / std::f64::consts::LN_2 / (num_parties - 1) as f64;
    Ok(RateResult::new(rate, None).with_meta("t", t))
}

/// Divisors of `n` in increasing order.
pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

/// Best split of the `N - 1` non-central parties into groups of `d` that each
/// run with party 1: `max_d (d / (N-1)) rate_fn(d + 1)`. Ties go to larger `d`.
pub fn subgroup_optimized_rate<F>(num_parties: usize, mut rate_fn: F) -> Result<RateResult>
where
    F: FnMut(usize) -> Result<f64>,
{
    if num_parties < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 parties, got {num_parties}")));
    }
    let k = num_parties - 1;
    let mut best: Option<(usize, f64)> = None;
    let mut result = RateResult::new(0.0, None);
    for d in divisors(k) {
        let r = d as f64 / k as f64 * rate_fn(d + 1)?;
        result.meta.insert(format!("rate_d{d}"), r);
        if best.is_none_or(|(_, b)| r >= b) {
            best = Some((d, r));
        }
    }
    let (d, r) = best.expect("1 divides every k");
    result.rate = r;
    result.meta.insert("d".into(), d as f64);
    Ok(result)
}

/// High-q, low-loss form of the full-group rate, `N q^{N-1} (1-q) t [1 - h(1/2 - 1/N)]`.
pub fn approx_w_limit_rate(num_parties: usize, q: f64, t: f64) -> f64 {
    let n = num_parties as f64;
    n * q.powi(num_parties as i32 - 1) * (1.0 - q) * t * (1.0 - binary_entropy_clamped(0.5 - 1.0 / n))
}

/// Same regime, key distributed by `N - 1` bipartite runs: `2 q (1-q) t / (N-1)`.
pub fn approx_bipartite_iteration_rate(num_parties: usize, q: f64, t: f64) -> f64 {
    2.0 * q * (1.0 - q) * t / (num_parties as f64 - 1.0)
}
