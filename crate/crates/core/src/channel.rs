//! Closed-form statistics of the honest setup.
//!
//! All sums follow the structure "outer over the number of emitted photons,
//! inner over the number that reach the node". Individual terms are built in
//! the log domain (factorials and binomials via [`ln_binomial`]/[`ln_gamma`])
//! and exponentiated before accumulation. Every term is nonnegative; the
//! subtraction from 1/2 in the QBER happens once at the end.

use crate::error::{Error, Result};
use crate::params::SetupParams;
use crate::special::{ln_binomial_unchecked, ln_gamma};

/// Slack beyond `[0, 1]` tolerated before clamping; anything larger is a bug.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Click probability of one detector, QBER and phase-error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStatistics {
    pub click_prob: f64,
    pub qber: f64,
    pub phase_error: f64,
}

pub(crate) fn clamp_probability(what: &'static str, value: f64) -> Result<f64> {
    if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&value) {
        return Err(Error::OutOfRange { what, value });
    }
    Ok(value.clamp(0.0, 1.0))
}

fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0).expect("positive argument")
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_binomial_unchecked(n as f64, k as f64)
}

/// Shorthand for the per-setup logs shared by every sum.
struct Logs {
    n: usize,
    ln_q: f64,
    ln_1mq: f64,
    ln_tm: f64,
    ln_1mt: f64,
    sin2: f64,
    cos2: f64,
}

impl Logs {
    fn new(p: &SetupParams) -> Self {
        let q = p.vacuum_weight;
        let t = p.transmittance;
        let th = p.polarization_misalignment;
        Self {
            n: p.num_parties,
            ln_q: q.ln(),
            ln_1mq: (1.0 - q).ln(),
            ln_tm: (t / p.num_ports as f64).ln(),
            ln_1mt: (1.0 - t).ln(),
            sin2: th.sin().powi(2),
            cos2: th.cos().powi(2),
        }
    }

    /// `q^a (1-q)^b` in log form.
    fn source(&self, a: usize, b: usize) -> f64 {
        ln_pow(self.ln_q, a) + ln_pow(self.ln_1mq, b)
    }

    /// `(t/M)^a (1-t)^b` in log form.
    fn channel(&self, a: usize, b: usize) -> f64 {
        ln_pow(self.ln_tm, a) + ln_pow(self.ln_1mt, b)
    }

    /// Σ_{l=1}^{r} C(r,l) (t/M)^l (1-t)^{r-l} l!: `r` photons, none from party 1.
    fn others_only(&self, r: usize) -> f64 {
        (1..=r)
            .map(|l| (ln_choose(r, l) + self.channel(l, r - l) + ln_factorial(l)).exp())
            .sum()
    }

    /// Bracket for `r` emitted photons including party 1's:
    /// Σ_{l=1}^{r} C(r-1,l-1)(t/M)^l(1-t)^{r-l}(l-1)!(sin²θ + l cos²θ)
    /// + Σ_{l=1}^{r-1} C(r-1,l)(t/M)^l(1-t)^{r-l} l!
    fn with_first(&self, r: usize) -> f64 {
        let arrived_with_first: f64 = (1..=r)
            .map(|l| {
                (ln_choose(r - 1, l - 1) + self.channel(l, r - l) + ln_factorial(l - 1)).exp()
                    * (self.sin2 + l as f64 * self.cos2)
            })
            .sum();
        let first_lost: f64 = (1..r)
            .map(|l| (ln_choose(r - 1, l) + self.channel(l, r - l) + ln_factorial(l)).exp())
            .sum();
        arrived_with_first + first_lost
    }
}

/// `k ln x` given `ln x`, with `0^0 = 1`.
fn ln_pow(ln_x: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_x
    }
}

/// Probability that only a given detector fires, dark counts excluded.
pub fn single_click_probability(params: &SetupParams) -> Result<f64> {
    params.validate()?;
    let lg = Logs::new(params);
    let n = lg.n;
    let mut total = ((n as f64).ln() + lg.source(n - 1, 1) + lg.channel(1, 0)).exp();
    for r in 2..n {
        total += (ln_choose(n - 1, r) + lg.source(n - r, r)).exp() * lg.others_only(r);
    }
    for r in 2..=n {
        total += (ln_choose(n - 1, r - 1) + lg.source(n - r, r)).exp() * lg.with_first(r);
    }
    clamp_probability("single-click probability", total)
}

/// Σ_{r=0}^{N-2} C(N-2,r) q^{N-r-1}(1-q)^{r+1} Σ_{l=0}^{r} C(r,l)(l+1)!(t/M)^{l+1}(1-t)^{r-l}.
fn coherence_sum(lg: &Logs) -> f64 {
    let n = lg.n;
    let mut total = 0.0;
    for r in 0..=n - 2 {
        let inner: f64 = (0..=r)
            .map(|l| (ln_choose(r, l) + ln_factorial(l + 1) + lg.channel(l + 1, r - l)).exp())
            .sum();
        total += (ln_choose(n - 2, r) + lg.source(n - r - 1, r + 1)).exp() * inner;
    }
    total
}

/// Phase-error numerator: the click-probability sum restricted to even
/// numbers of emitted photons.
fn even_click_sum(lg: &Logs) -> f64 {
    let n = lg.n;
    let mut total = 0.0;
    let mut r = 1;
    while 2 * r < n {
        total += (ln_choose(n - 1, 2 * r) + lg.source(n - 2 * r, 2 * r)).exp() * lg.others_only(2 * r);
        r += 1;
    }
    let mut r = 1;
    while 2 * r <= n {
        total += (ln_choose(n - 1, 2 * r - 1) + lg.source(n - 2 * r, 2 * r)).exp() * lg.with_first(2 * r);
        r += 1;
    }
    total
}

fn require_clicks(p_j: f64) -> Result<()> {
    if p_j > 0.0 {
        Ok(())
    } else {
        Err(Error::UndefinedStatistics("single-click probability is zero".into()))
    }
}

/// QBER between party 1 and any other party with the click-dependent
/// measurement angles that cancel the multiport phases.
pub fn qber(params: &SetupParams) -> Result<f64> {
    let p_j = single_click_probability(params)?;
    require_clicks(p_j)?;
    let lg = Logs::new(params);
    let cc = params.phase_misalignment.cos() * params.polarization_misalignment.cos();
    clamp_probability("QBER", 0.5 - cc * coherence_sum(&lg) / p_j)
}

/// Probability that the product of all Z outcomes is +1, given a single click.
pub fn phase_error_rate(params: &SetupParams) -> Result<f64> {
    let p_j = single_click_probability(params)?;
    require_clicks(p_j)?;
    let lg = Logs::new(params);
    clamp_probability("phase-error rate", even_click_sum(&lg) / p_j)
}

/// All three photon-only statistics at once.
pub fn channel_statistics(params: &SetupParams) -> Result<ChannelStatistics> {
    Ok(ChannelStatistics {
        click_prob: single_click_probability(params)?,
        qber: qber(params)?,
        phase_error: phase_error_rate(params)?,
    })
}

/// Probability that no photon reaches the node, `(q + (1-q)(1-t))^N`.
pub fn no_photon_probability(params: &SetupParams) -> Result<f64> {
    params.validate()?;
    let q = params.vacuum_weight;
    let t = params.transmittance;
    Ok((q + (1.0 - q) * (1.0 - t)).powi(params.num_parties as i32))
}

/// Σ_{l} C(N,2l) q^{N-2l} ((1-q)(1-t))^{2l}: joint probability of no arrival
/// and even parity.
fn no_photon_even_weight(params: &SetupParams) -> f64 {
    let n = params.num_parties;
    let q = params.vacuum_weight;
    let lost = (1.0 - params.vacuum_weight) * (1.0 - params.transmittance);
    let (ln_q, ln_lost) = (q.ln(), lost.ln());
    (0..=n / 2)
        .map(|l| (ln_choose(n, 2 * l) + ln_pow(ln_q, n - 2 * l) + ln_pow(ln_lost, 2 * l)).exp())
        .sum()
}

/// Phase-error rate conditioned on no photon reaching the node.
pub fn no_photon_phase_error(params: &SetupParams) -> Result<f64> {
    let p0 = no_photon_probability(params)?;
    if !(p0 > 0.0) {
        return Err(Error::UndefinedStatistics("no-photon probability is zero".into()));
    }
    clamp_probability("no-photon phase-error rate", no_photon_even_weight(params) / p0)
}

/// Statistics including dark counts with probability `p_d` per detector.
///
/// A dark count only matters when no photon arrived; the QBER of such an
/// event is 1/2.
pub fn dark_count_adjusted(params: &SetupParams) -> Result<ChannelStatistics> {
    let p_j = single_click_probability(params)?;
    let p0 = no_photon_probability(params)?;
    let p_d = params.dark_count_prob;
    let quiet = (1.0 - p_d).powi(params.num_ports as i32 - 1);
    let dark = p_d * p0;
    let click_prob = p_j * quiet + dark * quiet;
    if !(click_prob > 0.0) {
        return Err(Error::UndefinedStatistics("no single-click events (photon or dark)".into()));
    }
    // weight of dark-count events among single clicks
    let w = dark / (p_j + dark);
    let lg = Logs::new(params);
    let (qber, phase_error) = if w == 0.0 {
        let cc = params.phase_misalignment.cos() * params.polarization_misalignment.cos();
        (
            clamp_probability("QBER", 0.5 - cc * coherence_sum(&lg) / p_j)?,
            clamp_probability("phase-error rate", even_click_sum(&lg) / p_j)?,
        )
    } else if w == 1.0 {
        (0.5, clamp_probability("no-photon phase-error rate", no_photon_even_weight(params) / p0)?)
    } else {
        let cc = params.phase_misalignment.cos() * params.polarization_misalignment.cos();
        let q_ph = clamp_probability("QBER", 0.5 - cc * coherence_sum(&lg) / p_j)?;
        let qz_ph = clamp_probability("phase-error rate", even_click_sum(&lg) / p_j)?;
        let qz_dark = clamp_probability("no-photon phase-error rate", no_photon_even_weight(params) / p0)?;
        (
            clamp_probability("QBER", w * 0.5 + (1.0 - w) * q_ph)?,
            clamp_probability("phase-error rate", w * qz_dark + (1.0 - w) * qz_ph)?,
        )
    };
    Ok(ChannelStatistics {
        click_prob: clamp_probability("single-click probability", click_prob)?,
        qber,
        phase_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SetupParams {
        SetupParams::ideal(3, 4, 0.9, 0.4).with_misalignment(0.2)
    }

    #[test]
    fn no_emission_means_no_click() {
        assert_eq!(single_click_probability(&base().with_vacuum_weight(1.0)).unwrap(), 0.0);
        let mut p = base();
        p.transmittance = 0.0;
        assert_eq!(single_click_probability(&p).unwrap(), 0.0);
        assert!(matches!(qber(&p), Err(Error::UndefinedStatistics(_))));
        assert!(matches!(phase_error_rate(&p), Err(Error::UndefinedStatistics(_))));
    }

    #[test]
    fn orthogonal_phase_kills_correlation() {
        let mut p = base();
        p.phase_misalignment = std::f64::consts::FRAC_PI_2;
        p.polarization_misalignment = 0.0;
        assert!((qber(&p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ideal_limit_qber() {
        let p = SetupParams::ideal(3, 3, 1.0 - 1e-6, 1.0);
        assert!((qber(&p).unwrap() - (0.5 - 1.0 / 3.0)).abs() < 1e-5);
        assert!(phase_error_rate(&p).unwrap() < 1e-5);
    }

    #[test]
    fn phase_error_vanishes_linearly_in_emission() {
        let p1 = SetupParams::ideal(4, 4, 1.0 - 1e-3, 0.5);
        let p2 = SetupParams::ideal(4, 4, 1.0 - 1e-4, 0.5);
        let (a, b) = (phase_error_rate(&p1).unwrap(), phase_error_rate(&p2).unwrap());
        assert!(b < a);
        let ratio = a / b;
        assert!((5.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn no_photon_values() {
        let p = SetupParams::ideal(3, 3, 0.9, 0.5);
        assert!((no_photon_probability(&p).unwrap() - 0.857_375).abs() < 1e-15);
        assert_eq!(no_photon_probability(&p.with_vacuum_weight(1.0)).unwrap(), 1.0);
        assert_eq!(no_photon_probability(&SetupParams::ideal(3, 3, 0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(no_photon_phase_error(&p.with_vacuum_weight(1.0)).unwrap(), 1.0);
        assert_eq!(no_photon_phase_error(&SetupParams::ideal(2, 2, 0.5, 1.0)).unwrap(), 1.0);
        assert!(no_photon_phase_error(&SetupParams::ideal(3, 3, 0.0, 1.0)).is_err());
    }

    #[test]
    fn dark_counts_only() {
        let p = base().with_vacuum_weight(1.0).with_dark_counts(1e-3);
        let s = dark_count_adjusted(&p).unwrap();
        assert!((s.click_prob - 1e-3 * (1.0 - 1e-3f64).powi(3)).abs() < 1e-18);
        assert_eq!(s.qber, 0.5);
        assert_eq!(s.phase_error, 1.0);
    }

    #[test]
    fn zero_dark_counts_is_identity() {
        let p = base();
        let s = dark_count_adjusted(&p).unwrap();
        assert_eq!(s, channel_statistics(&p).unwrap());
    }

    #[test]
    fn clamp_rejects_large_violation() {
        assert!(clamp_probability("x", 1.0 + 1e-6).is_err());
        assert_eq!(clamp_probability("x", 1.0 + 1e-12).unwrap(), 1.0);
        assert_eq!(clamp_probability("x", -1e-12).unwrap(), 0.0);
    }
}
