//! Finite-key secret key length: the sampling correction γ, the ε budget and ℓ.

use crate::error::{Error, Result};
use crate::special::{binary_entropy_clamped, binomial_correction, deviance, error_entropy};

/// Residual bound the γ solver is expected to reach (log domain). When the
/// residual moves by more than this per ulp of γ (few samples, γ next to
/// `1 - Λ`) the solver instead stops with the root between adjacent floats.
pub const GAMMA_RESIDUAL_TOL: f64 = 1e-9;

const GAMMA_MAX_ITER: usize = 200;

/// The four ε components the key length depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecuritySplit {
    pub eps_x: f64,
    pub eps_z: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
}

impl SecuritySplit {
    pub fn new(eps_x: f64, eps_z: f64, eps_ec: f64, eps_pa: f64) -> Result<Self> {
        for (name, v) in [("eps_x", eps_x), ("eps_z", eps_z), ("eps_EC", eps_ec), ("eps_PA", eps_pa)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        Ok(Self { eps_x, eps_z, eps_ec, eps_pa })
    }

    /// Builds a split that spends exactly `eps_tot`.
    ///
    /// `pe_share` is the fraction of `eps_tot` taken by `2 eps_PE`, `x_ratio` the
    /// fraction of `eps_PE²` assigned to the `(N-1) eps_x` term and `ec_ratio`
    /// the EC fraction of what remains for EC and PA.
    pub fn from_shares(eps_tot: f64, num_parties: usize, pe_share: f64, x_ratio: f64, ec_ratio: f64) -> Result<Self> {
        for (name, v) in [("PE share", pe_share), ("x ratio", x_ratio), ("EC ratio", ec_ratio)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if num_parties < 2 {
            return Err(Error::InvalidParams("need at least 2 parties".into()));
        }
        let eps_pe = pe_share * eps_tot / 2.0;
        let pe2 = eps_pe * eps_pe;
        let rest = (1.0 - pe_share) * eps_tot;
        Self::new(
            x_ratio * pe2 / (num_parties - 1) as f64,
            (1.0 - x_ratio) * pe2,
            ec_ratio * rest,
            (1.0 - ec_ratio) * rest,
        )
    }

    pub fn eps_pe(&self, num_parties: usize) -> f64 {
        eps_pe(self, num_parties)
    }

    pub fn eps_total(&self, num_parties: usize) -> f64 {
        eps_total(self, num_parties)
    }
}

/// `sqrt((N-1) eps_x + eps_z)`.
pub fn eps_pe(split: &SecuritySplit, num_parties: usize) -> f64 {
    ((num_parties as f64 - 1.0) * split.eps_x + split.eps_z).sqrt()
}

/// `2 eps_PE + eps_EC + eps_PA`.
pub fn eps_total(split: &SecuritySplit, num_parties: usize) -> f64 {
    2.0 * eps_pe(split, num_parties) + split.eps_ec + split.eps_pa
}

/// Round bookkeeping: `L` rounds, PE probability, PE samples `m` and key bits `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundCounts {
    pub total_rounds: f64,
    pub pe_prob: f64,
    pub pe_samples: u64,
    pub key_rounds: u64,
}

impl RoundCounts {
    /// Expected counts for `L` rounds when `clicks_per_round = M p_j`:
    /// `m = round(M p_j L p_PE)`, `n = round(M p_j L) - 2m`.
    pub fn expected(total_rounds: f64, pe_prob: f64, clicks_per_round: f64) -> Result<Self> {
        if !(total_rounds >= 1.0) || !(0.0..=1.0).contains(&pe_prob) || !(clicks_per_round >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "bad round parameters L = {total_rounds}, p_PE = {pe_prob}, M p_j = {clicks_per_round}"
            )));
        }
        let raw = (clicks_per_round * total_rounds).round();
        let m = (clicks_per_round * total_rounds * pe_prob).round();
        let n = raw - 2.0 * m;
        if m < 1.0 || n < 1.0 {
            return Err(Error::Infeasible(format!("too few clicks: m = {m}, n = {n}")));
        }
        Ok(Self { total_rounds, pe_prob, pe_samples: m as u64, key_rounds: n as u64 })
    }
}

/// Frequencies observed on the `m` PE samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedFrequencies {
    pub qz_m: f64,
    /// `Q^m_{A1 Ai}` for `i = 2..N`.
    pub qber_m_per_pair: Vec<f64>,
}

impl ObservedFrequencies {
    pub fn validate(&self) -> Result<()> {
        let all = std::iter::once(&self.qz_m).chain(&self.qber_m_per_pair);
        for &f in all {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParams(format!("frequency {f} outside [0, 1]")));
            }
        }
        if self.qber_m_per_pair.is_empty() {
            return Err(Error::InvalidParams("no QBER frequencies".into()));
        }
        Ok(())
    }
}

/// `LHS - RHS` of the tail-bound equation for γ, in the log domain:
///
/// `ln C(n(Λ+γ)+mΛ, mΛ) + ln C((n+m)(1-Λ)-nγ, m(1-Λ)) - ln C(n+m, m) - ln ε`.
///
/// Positive below the root and decreasing in γ.
pub fn gamma_residual(n: f64, m: f64, lambda: f64, eps: f64, gamma: f64) -> f64 {
    let k1 = m * lambda;
    let k2 = m * (1.0 - lambda);
    let u1 = n * (lambda + gamma);
    let u2 = (n * (1.0 - lambda - gamma)).max(0.0);
    let a1 = k1 + u1;
    let a2 = k2 + u2;
    let total = n + m;
    let p = a1 / total;
    // the leading Stirling parts combine into deviances around the pooled rate
    let lead = -(deviance(k1, m * p) + deviance(k2, m * (1.0 - p)) + deviance(u1, n * p) + deviance(u2, n * (1.0 - p)));
    let corr = binomial_correction(a1, k1, u1) + binomial_correction(a2, k2, u2) - binomial_correction(total, m, n);
    lead + corr - eps.ln()
}

/// Positive root γ of the tail-bound equation, in `[0, 1 - Λ]`.
///
/// Returns 0 when the equation already holds at γ = 0 and when `Λ = 1`.
pub fn gamma_correction(n: u64, m: u64, lambda: f64, eps: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParams(format!("need n, m >= 1 (n = {n}, m = {m})")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParams(format!("frequency {lambda} outside [0, 1]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::NoRoot(format!("eps = {eps} outside (0, 1)")));
    }
    if lambda == 1.0 {
        return Ok(0.0);
    }
    let (nf, mf) = (n as f64, m as f64);
    let f = |g: f64| gamma_residual(nf, mf, lambda, eps, g);
    let (mut lo, mut hi) = (0.0, 1.0 - lambda);
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    if f_lo <= 0.0 {
        return Ok(0.0);
    }
    if f_hi > 0.0 {
        return Err(Error::NoRoot(format!(
            "residual {f_hi} still positive at gamma = 1 - lambda (n = {n}, m = {m}, lambda = {lambda}, eps = {eps})"
        )));
    }
    for _ in 0..GAMMA_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm > 0.0 {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

/// γ with a missing root read as "no information": the correction saturates
/// so the corrected rate is 1.
fn gamma_or_saturated(n: u64, m: u64, lambda: f64, eps: f64) -> Result<f64> {
    match gamma_correction(n, m, lambda, eps) {
        Err(Error::NoRoot(_)) => Ok(1.0 - lambda),
        other => other,
    }
}

/// Finite-key length ℓ for the given observations, round counts and split.
pub fn key_length(freqs: &ObservedFrequencies, counts: &RoundCounts, split: &SecuritySplit, num_parties: usize) -> Result<f64> {
    freqs.validate()?;
    let (n, m) = (counts.key_rounds, counts.pe_samples);
    let gamma_z = gamma_or_saturated(n, m, freqs.qz_m, split.eps_z)?;
    let gamma_x = freqs
        .qber_m_per_pair
        .iter()
        .map(|&q| gamma_or_saturated(n, m, q, split.eps_x))
        .collect::<Result<Vec<_>>>()?;
    key_length_with_corrections(freqs, n, split, num_parties, gamma_z, &gamma_x)
}

/// ℓ with externally supplied corrections (`gamma_x[i]` belongs to pair `i`).
pub fn key_length_with_corrections(
    freqs: &ObservedFrequencies,
    key_rounds: u64,
    split: &SecuritySplit,
    num_parties: usize,
    gamma_z: f64,
    gamma_x: &[f64],
) -> Result<f64> {
    if num_parties < 2 {
        return Err(Error::InvalidParams("need at least 2 parties".into()));
    }
    if gamma_x.len() != freqs.qber_m_per_pair.len() {
        return Err(Error::InvalidParams("one correction per pair required".into()));
    }
    let k = num_parties as f64 - 1.0;
    let e_pe = eps_pe(split, num_parties);
    if 2.0 * k * e_pe >= 1.0 {
        return Err(Error::InvalidParams(format!("2(N-1) eps_PE = {} must be below 1", 2.0 * k * e_pe)));
    }
    let h_z = error_entropy(freqs.qz_m + gamma_z);
    let h_x = freqs
        .qber_m_per_pair
        .iter()
        .zip(gamma_x)
        .map(|(&q, &g)| error_entropy(q + g))
        .fold(0.0, f64::max);
    let bulk = key_rounds as f64 * (1.0 - h_z - h_x);
    let ec = (2.0 * k / split.eps_ec).log2();
    let pa = 2.0 * ((1.0 - 2.0 * k * e_pe) / (2.0 * split.eps_pa)).log2();
    Ok((bulk - ec - pa).max(0.0))
}

/// Gross length minus the preshared `L h(p_PE)` bits, floored at 0.
pub fn net_key_length(gross: f64, total_rounds: f64, pe_prob: f64) -> f64 {
    (gross - total_rounds * binary_entropy_clamped(pe_prob)).max(0.0)
}
