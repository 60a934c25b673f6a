//! Deterministic optimizers over q (asymptotic) and over q, p_PE and the ε
//! split (finite key), plus the minimum-rounds search.
//!
//! Every search is a fixed grid followed by golden-section refinement inside
//! the grid cell around the best point, so results are bit-stable.

use crate::channel::dark_count_adjusted;
use crate::error::{Error, Result};
use crate::finite_key::{key_length, net_key_length, ObservedFrequencies, RoundCounts, SecuritySplit};
use crate::params::SetupParams;
use crate::rates::{asymptotic_rate, RateResult};

/// Search effort for the optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationBudget {
    pub coarse_grid_points: usize,
    pub refine_iterations: usize,
    /// Relative improvement below which coordinate sweeps stop.
    pub tolerance: f64,
}

impl Default for OptimizationBudget {
    fn default() -> Self {
        Self { coarse_grid_points: 48, refine_iterations: 60, tolerance: 1e-9 }
    }
}

impl OptimizationBudget {
    /// Cheaper budget for inner loops such as the minimum-rounds search.
    pub fn fast() -> Self {
        Self { coarse_grid_points: 16, refine_iterations: 40, tolerance: 1e-6 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coarse_grid_points < 3 || self.refine_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams(format!("bad optimization budget {self:?}")));
        }
        Ok(())
    }
}

/// Range of `log10(1 - q)` searched for the vacuum weight.
pub const LOG_ONE_MINUS_Q_RANGE: (f64, f64) = (-6.0, -std::f64::consts::LOG10_2);

/// Range of `log10 p_PE`.
pub const LOG_PE_PROB_RANGE: (f64, f64) = (-8.0, -std::f64::consts::LOG10_2);

/// Range of the logits of the three ε-split fractions.
pub const SHARE_LOGIT_RANGE: (f64, f64) = (-14.0, 14.0);

/// Expected raw clicks `M p_j L` below which no finite key is attempted.
pub const FEASIBILITY_FLOOR_CLICKS: f64 = 10.0;

const MAX_SWEEPS: usize = 8;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Maximizes `f` on `[lo, hi]`: grid of `points`, then golden section inside
/// the cells adjacent to the best grid point. Returns `(x, f(x))`; never worse
/// than the best grid point.
fn maximize_1d<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize, iters: usize) -> (f64, f64) {
    let grid = linspace(lo, hi, points);
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > vals[best] {
            best = i;
        }
    }
    let (mut bx, mut bv) = (grid[best], vals[best]);
    if bv <= 0.0 {
        // flat zero region, nothing to refine
        return (bx, bv);
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(points - 1)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > bv {
            bx = x;
            bv = v;
        }
    }
    (bx, bv)
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn with_q(base: &SetupParams, log_one_minus_q: f64) -> SetupParams {
    base.with_vacuum_weight(1.0 - 10f64.powf(log_one_minus_q))
}

fn rate_or_zero(params: &SetupParams) -> f64 {
    asymptotic_rate(params).map(|r| r.rate).unwrap_or(0.0)
}

/// Maximizes the asymptotic rate over q; `base.vacuum_weight` is ignored.
pub fn optimize_q_asymptotic(base: &SetupParams, budget: &OptimizationBudget) -> Result<RateResult> {
    budget.validate()?;
    base.with_vacuum_weight(0.5).validate()?;
    let (lo, hi) = LOG_ONE_MINUS_Q_RANGE;
    let (x, _) = maximize_1d(
        |x| rate_or_zero(&with_q(base, x)),
        lo,
        hi,
        budget.coarse_grid_points,
        budget.refine_iterations,
    );
    let params = with_q(base, x);
    Ok(match asymptotic_rate(&params) {
        Ok(r) => r,
        Err(_) => RateResult::new(0.0, Some(params)).with_meta("q", params.vacuum_weight),
    })
}

/// Gross finite-key rate `ℓ / L` at a fully specified point.
pub fn finite_key_rate(params: &SetupParams, total_rounds: f64, pe_prob: f64, split: &SecuritySplit) -> Result<f64> {
    Ok(finite_key_point(params, total_rounds, pe_prob, split)?.0)
}

/// `(ℓ / L, ℓ, counts)` at a point.
fn finite_key_point(
    params: &SetupParams,
    total_rounds: f64,
    pe_prob: f64,
    split: &SecuritySplit,
) -> Result<(f64, f64, RoundCounts)> {
    let stats = dark_count_adjusted(params)?;
    let counts = RoundCounts::expected(total_rounds, pe_prob, params.num_ports as f64 * stats.click_prob)?;
    let freqs = ObservedFrequencies {
        qz_m: stats.phase_error,
        qber_m_per_pair: vec![stats.qber; params.num_parties - 1],
    };
    let ell = key_length(&freqs, &counts, split, params.num_parties)?;
    Ok((ell / total_rounds, ell, counts))
}

/// Free coordinates of the finite-key search.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FinitePoint {
    log_one_minus_q: f64,
    log_pe_prob: f64,
    pe_share_logit: f64,
    x_ratio_logit: f64,
    ec_ratio_logit: f64,
}

impl FinitePoint {
    fn set(&mut self, i: usize, v: f64) {
        match i {
            0 => self.log_one_minus_q = v,
            1 => self.log_pe_prob = v,
            2 => self.pe_share_logit = v,
            3 => self.x_ratio_logit = v,
            _ => self.ec_ratio_logit = v,
        }
    }

    fn range(i: usize) -> (f64, f64) {
        match i {
            0 => LOG_ONE_MINUS_Q_RANGE,
            1 => LOG_PE_PROB_RANGE,
            _ => SHARE_LOGIT_RANGE,
        }
    }

    fn split(&self, eps_tot: f64, num_parties: usize) -> Result<SecuritySplit> {
        SecuritySplit::from_shares(
            eps_tot,
            num_parties,
            logistic(self.pe_share_logit),
            logistic(self.x_ratio_logit),
            logistic(self.ec_ratio_logit),
        )
    }
}

struct FiniteProblem<'a> {
    base: &'a SetupParams,
    total_rounds: f64,
    eps_tot: f64,
    fixed_q: bool,
}

impl FiniteProblem<'_> {
    fn params(&self, p: &FinitePoint) -> SetupParams {
        if self.fixed_q {
            *self.base
        } else {
            with_q(self.base, p.log_one_minus_q)
        }
    }

    fn eval(&self, p: &FinitePoint) -> f64 {
        let params = self.params(p);
        let pe_prob = 10f64.powf(p.log_pe_prob);
        p.split(self.eps_tot, self.base.num_parties)
            .and_then(|s| finite_key_rate(&params, self.total_rounds, pe_prob, &s))
            .unwrap_or(0.0)
    }
}

/// Maximizes the gross finite-key rate over q, p_PE and the ε split with
/// `eps_total = eps_tot` exactly.
///
/// Fails with [`Error::Infeasible`] when even the best q gives fewer than
/// [`FEASIBILITY_FLOOR_CLICKS`] expected clicks in `L` rounds.
pub fn optimize_finite_key(
    base: &SetupParams,
    total_rounds: f64,
    eps_tot: f64,
    budget: &OptimizationBudget,
) -> Result<RateResult> {
    optimize_finite(base, total_rounds, eps_tot, budget, false)
}

/// As [`optimize_finite_key`] with q held at `base.vacuum_weight`.
pub fn optimize_finite_key_fixed_q(
    base: &SetupParams,
    total_rounds: f64,
    eps_tot: f64,
    budget: &OptimizationBudget,
) -> Result<RateResult> {
    base.validate()?;
    optimize_finite(base, total_rounds, eps_tot, budget, true)
}

fn optimize_finite(
    base: &SetupParams,
    total_rounds: f64,
    eps_tot: f64,
    budget: &OptimizationBudget,
    fixed_q: bool,
) -> Result<RateResult> {
    budget.validate()?;
    base.with_vacuum_weight(0.5).validate()?;
    if !(eps_tot > 0.0 && eps_tot < 1.0) || !(total_rounds >= 1.0) {
        return Err(Error::InvalidParams(format!("need 0 < eps_tot < 1 and L >= 1, got {eps_tot}, {total_rounds}")));
    }
    let q0 = if fixed_q {
        base.vacuum_weight
    } else {
        optimize_q_asymptotic(base, budget)?.params.map_or(0.5, |p| p.vacuum_weight)
    };
    let probe = if fixed_q { *base } else { base.with_vacuum_weight(0.5) };
    let max_clicks = dark_count_adjusted(&probe)
        .map(|s| base.num_ports as f64 * s.click_prob * total_rounds)
        .unwrap_or(0.0);
    if max_clicks < FEASIBILITY_FLOOR_CLICKS {
        return Err(Error::Infeasible(format!(
            "only {max_clicks:.3e} expected clicks in {total_rounds:.3e} rounds"
        )));
    }
    let problem = FiniteProblem { base, total_rounds, eps_tot, fixed_q };
    let mut point = FinitePoint {
        log_one_minus_q: (1.0 - q0).log10().clamp(LOG_ONE_MINUS_Q_RANGE.0, LOG_ONE_MINUS_Q_RANGE.1),
        log_pe_prob: -2.0,
        pe_share_logit: 0.0,
        x_ratio_logit: 0.0,
        ec_ratio_logit: 0.0,
    };
    let mut best = problem.eval(&point);
    // p_PE first: it decides whether any key is possible at all
    let order: &[usize] = if fixed_q { &[1, 2, 3, 4] } else { &[1, 0, 2, 3, 4] };
    for _ in 0..MAX_SWEEPS {
        let before = best;
        for &i in order {
            let (lo, hi) = FinitePoint::range(i);
            let mut trial = point;
            let (x, v) = maximize_1d(
                |x| {
                    trial.set(i, x);
                    problem.eval(&trial)
                },
                lo,
                hi,
                budget.coarse_grid_points,
                budget.refine_iterations,
            );
            if v > best {
                best = v;
                point.set(i, x);
            }
        }
        if best <= 0.0 || best - before <= budget.tolerance * best {
            break;
        }
    }
    finite_result(&problem, &point, best)
}

fn finite_result(problem: &FiniteProblem, point: &FinitePoint, best: f64) -> Result<RateResult> {
    let (total_rounds, eps_tot) = (problem.total_rounds, problem.eps_tot);
    let params = problem.params(point);
    let pe_prob = 10f64.powf(point.log_pe_prob);
    let n = problem.base.num_parties;
    let split = point.split(eps_tot, n)?;
    let mut result = RateResult::new(best, Some(params))
        .with_meta("q", params.vacuum_weight)
        .with_meta("p_pe", pe_prob)
        .with_meta("total_rounds", total_rounds)
        .with_meta("eps_x", split.eps_x)
        .with_meta("eps_z", split.eps_z)
        .with_meta("eps_ec", split.eps_ec)
        .with_meta("eps_pa", split.eps_pa)
        .with_meta("eps_pe", split.eps_pe(n))
        .with_meta("eps_total", split.eps_total(n));
    match finite_key_point(&params, total_rounds, pe_prob, &split) {
        Ok((rate, ell, counts)) => {
            debug_assert_eq!(rate, best);
            let net = net_key_length(ell, total_rounds, pe_prob);
            result = result
                .with_meta("gross_length", ell)
                .with_meta("net_length", net)
                .with_meta("net_rate", net / total_rounds)
                .with_meta("pe_samples", counts.pe_samples as f64)
                .with_meta("key_rounds", counts.key_rounds as f64);
        }
        Err(_) => {
            result = result.with_meta("gross_length", 0.0).with_meta("net_length", 0.0).with_meta("net_rate", 0.0);
        }
    }
    Ok(result)
}

/// Finite-key rate treating infeasibility as zero key.
fn finite_rate_or_zero(base: &SetupParams, total_rounds: f64, eps_tot: f64, budget: &OptimizationBudget) -> Result<f64> {
    match optimize_finite_key(base, total_rounds, eps_tot, budget) {
        Ok(r) => Ok(r.rate),
        Err(Error::Infeasible(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Largest number of rounds the minimum-rounds search will try, `2^80`.
pub const MAX_ROUNDS_LOG2: i32 = 80;

/// Smallest `L` whose optimized finite-key rate reaches `fraction` of the
/// optimized asymptotic rate: doubling search on `L = 2^k`, then bisection in
/// `log L` until the bracket is within 5%.
pub fn minimum_rounds(base: &SetupParams, fraction: f64, eps_tot: f64, budget: &OptimizationBudget) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParams(format!("fraction {fraction} outside (0, 1)")));
    }
    let asym = optimize_q_asymptotic(base, budget)?.rate;
    if !(asym > 0.0) {
        return Err(Error::Infeasible("asymptotic rate is zero".into()));
    }
    let target = fraction * asym;
    let reaches = |l: f64| -> Result<bool> { Ok(finite_rate_or_zero(base, l, eps_tot, budget)? >= target) };
    let mut k = 1;
    while !reaches(2f64.powi(k))? {
        k += 1;
        if k > MAX_ROUNDS_LOG2 {
            return Err(Error::Infeasible(format!("target not reached below 2^{MAX_ROUNDS_LOG2} rounds")));
        }
    }
    let (mut lo, mut hi) = (2f64.powi(k - 1), 2f64.powi(k));
    if k == 1 {
        return Ok(hi);
    }
    while hi / lo > 1.05 {
        let mid = (lo * hi).sqrt().round();
        if mid <= lo || mid >= hi {
            break;
        }
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
