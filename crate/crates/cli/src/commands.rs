//! Row generation for each subcommand. Points are evaluated on a rayon pool
//! and collected in sweep order.

use rayon::prelude::*;
use tfcka_core::fock::{self, click_partition, evolve, oracle_statistics};
use tfcka_core::optimizer::{
    minimum_rounds, optimize_finite_key, optimize_finite_key_fixed_q, optimize_q_asymptotic, OptimizationBudget,
};
use tfcka_core::params::misalignment_angle;
use tfcka_core::rates::{asymptotic_rate, direct_transmission_bound, subgroup_optimized_rate};
use tfcka_core::{channel, loss_db_to_transmittance, transmittance_to_loss_db, Error, RateResult, SetupParams};

use crate::config::{PortChoice, QChoice, UsageError, UsageResult};
use crate::output::{Cell, Table};

/// Largest absolute analytic/oracle difference accepted by `verify-oracle`.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Fully resolved sweep settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub parties: Vec<usize>,
    pub ports: PortChoice,
    pub losses_db: Vec<f64>,
    pub rounds: Vec<f64>,
    pub dark_count_prob: f64,
    /// Misalignment as a fraction (`sin²` of the angle).
    pub misalignment: f64,
    pub eps_tot: f64,
    pub q: QChoice,
    pub fraction: f64,
}

impl Settings {
    pub fn validate(&self) -> UsageResult<()> {
        if self.parties.iter().any(|&n| n < 2) {
            return Err(UsageError("--n: every party count must be at least 2".into()));
        }
        if let PortChoice::List(ms) = &self.ports {
            if ms.is_empty() || ms.contains(&0) {
                return Err(UsageError("--m: port counts must be positive".into()));
            }
        }
        if self.losses_db.is_empty() || self.losses_db.iter().any(|&l| l < 0.0) {
            return Err(UsageError("--loss-db: losses must be nonnegative".into()));
        }
        if self.rounds.is_empty() || self.rounds.iter().any(|&l| l < 1.0) {
            return Err(UsageError("--rounds: round counts must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dark_count_prob) {
            return Err(UsageError("--pd: must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.misalignment) {
            return Err(UsageError("--misalign: must lie in [0, 1]".into()));
        }
        if !(self.eps_tot > 0.0 && self.eps_tot < 1.0) {
            return Err(UsageError("--eps-tot: must lie in (0, 1)".into()));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(UsageError("--fraction: must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn setup(&self, n: usize, m: usize, loss_db: f64) -> SetupParams {
        SetupParams::ideal(n, m, 0.5, 1.0)
            .with_loss_db(loss_db)
            .with_dark_counts(self.dark_count_prob)
            .with_misalignment(misalignment_angle(self.misalignment))
    }

    /// `(N, M)` pairs in sweep order; `auto` means `M = N`.
    fn party_ports(&self) -> UsageResult<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for &n in &self.parties {
            let ms = match &self.ports {
                PortChoice::Auto => vec![n],
                PortChoice::List(ms) => ms.clone(),
            };
            for m in ms {
                if m < n {
                    return Err(UsageError(format!("--m: {m} ports cannot host {n} parties")));
                }
                out.push((n, m));
            }
        }
        Ok(out)
    }
}

fn meta(r: &RateResult, key: &str) -> f64 {
    r.meta_value(key).unwrap_or(f64::NAN)
}

fn bound_or_inf(n: usize, t: f64) -> f64 {
    match direct_transmission_bound(n, t) {
        Ok(b) => b.rate,
        Err(Error::InfiniteBound(_)) => f64::INFINITY,
        Err(_) => f64::NAN,
    }
}

fn asymptotic_point(params: &SetupParams, q: Option<f64>) -> RateResult {
    match q {
        None => optimize_q_asymptotic(params, &OptimizationBudget::default())
            .unwrap_or_else(|_| RateResult::new(0.0, Some(*params))),
        Some(q) => {
            let p = params.with_vacuum_weight(q);
            asymptotic_rate(&p).unwrap_or_else(|_| RateResult::new(0.0, Some(p)).with_meta("q", q))
        }
    }
}

pub const ASYMPTOTIC_HEADER: [&str; 10] = ["n", "m", "loss_db", "t", "q_star", "p_j", "qber", "q_z", "rate", "direct_bound"];

pub fn sweep_asymptotic(s: &Settings) -> UsageResult<Table> {
    let mut points = Vec::new();
    for (n, m) in s.party_ports()? {
        for q in s.q.values() {
            for &loss in &s.losses_db {
                points.push((n, m, q, loss));
            }
        }
    }
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(n, m, q, loss)| {
            let params = s.setup(n, m, loss);
            let r = asymptotic_point(&params, q);
            let t = params.transmittance;
            vec![
                n.into(),
                m.into(),
                loss.into(),
                t.into(),
                meta(&r, "q").into(),
                meta(&r, "p_j").into(),
                meta(&r, "qber").into(),
                meta(&r, "q_z").into(),
                r.rate.into(),
                bound_or_inf(n, t).into(),
            ]
        })
        .collect();
    let mut table = Table::new(&ASYMPTOTIC_HEADER);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub const FINITE_HEADER: [&str; 13] = [
    "n", "m", "loss_db", "rounds", "gross_rate", "net_rate", "q", "p_pe", "eps_x", "eps_z", "eps_ec", "eps_pa", "status",
];

pub fn sweep_finite(s: &Settings) -> UsageResult<Table> {
    let mut points = Vec::new();
    for (n, m) in s.party_ports()? {
        for q in s.q.values() {
            for &loss in &s.losses_db {
                for &l in &s.rounds {
                    points.push((n, m, q, loss, l));
                }
            }
        }
    }
    let budget = OptimizationBudget::default();
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(n, m, q, loss, l)| {
            let params = s.setup(n, m, loss);
            let result = match q {
                None => optimize_finite_key(&params, l, s.eps_tot, &budget),
                Some(q) => optimize_finite_key_fixed_q(&params.with_vacuum_weight(q), l, s.eps_tot, &budget),
            };
            let mut row: Vec<Cell> = vec![n.into(), m.into(), loss.into(), Cell::Float(l)];
            match result {
                Ok(r) => {
                    row.extend([r.rate, meta(&r, "net_rate"), meta(&r, "q"), meta(&r, "p_pe")].map(Cell::from));
                    row.extend(["eps_x", "eps_z", "eps_ec", "eps_pa"].map(|k| Cell::from(meta(&r, k))));
                    row.push("ok".into());
                }
                Err(e) => {
                    row.extend([0.0, 0.0].map(Cell::from));
                    row.extend([f64::NAN; 6].map(Cell::from));
                    row.push(if matches!(e, Error::Infeasible(_)) { "infeasible" } else { "error" }.into());
                }
            }
            row
        })
        .collect();
    let mut table = Table::new(&FINITE_HEADER);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub const LMIN_HEADER: [&str; 7] = ["n", "m", "loss_db", "fraction", "asymptotic_rate", "l_min", "status"];

pub fn lmin(s: &Settings) -> UsageResult<Table> {
    let mut points = Vec::new();
    for (n, m) in s.party_ports()? {
        for &loss in &s.losses_db {
            points.push((n, m, loss));
        }
    }
    let budget = OptimizationBudget::fast();
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(n, m, loss)| {
            let params = s.setup(n, m, loss);
            let asym = optimize_q_asymptotic(&params, &OptimizationBudget::default()).map(|r| r.rate).unwrap_or(0.0);
            let (l, status) = match minimum_rounds(&params, s.fraction, s.eps_tot, &budget) {
                Ok(l) => (l, "ok"),
                Err(Error::Infeasible(_)) => (f64::NAN, "infeasible"),
                Err(_) => (f64::NAN, "error"),
            };
            vec![n.into(), m.into(), loss.into(), s.fraction.into(), asym.into(), l.into(), status.into()]
        })
        .collect();
    let mut table = Table::new(&LMIN_HEADER);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub const SUBGROUP_HEADER: [&str; 8] = ["n", "m", "loss_db", "q", "rate", "best_d", "full_group_rate", "direct_bound"];

pub fn subgroup(s: &Settings) -> UsageResult<Table> {
    let mut points = Vec::new();
    for (n, m) in s.party_ports()? {
        for q in s.q.values() {
            for &loss in &s.losses_db {
                points.push((n, m, q, loss));
            }
        }
    }
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(n, m, q, loss)| {
            let base = s.setup(n, m, loss);
            let group_rate = |g: usize| -> tfcka_core::Result<f64> {
                let p = SetupParams { num_parties: g, ..base };
                Ok(asymptotic_point(&p, q).rate)
            };
            let full = group_rate(n).unwrap_or(0.0);
            let (rate, d) = match subgroup_optimized_rate(n, group_rate) {
                Ok(r) => (r.rate, meta(&r, "d")),
                Err(_) => (0.0, f64::NAN),
            };
            let q_cell = q.map_or(Cell::Text("auto".into()), Cell::Float);
            vec![
                n.into(),
                m.into(),
                loss.into(),
                q_cell,
                rate.into(),
                if d.is_finite() { Cell::Int(d as u64) } else { Cell::Float(d) },
                full.into(),
                bound_or_inf(n, base.transmittance).into(),
            ]
        })
        .collect();
    let mut table = Table::new(&SUBGROUP_HEADER);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

pub const VERIFY_HEADER: [&str; 17] = [
    "n", "m", "q", "loss_db", "t", "theta", "phi", "p_j", "qber", "q_z", "oracle_p_j", "oracle_qber", "oracle_q_z",
    "abs_diff_p_j", "abs_diff_qber", "abs_diff_q_z", "status",
];

/// Oracle grid settings; `None` fields fall back to the built-in grid.
#[derive(Debug, Clone)]
pub struct VerifyGrid {
    pub parties: Vec<usize>,
    pub ports: PortChoice,
    pub q_values: Vec<f64>,
    pub transmittances: Vec<f64>,
    pub angles: Vec<f64>,
}

impl VerifyGrid {
    pub fn default_transmittances() -> Vec<f64> {
        vec![0.1, 0.5, 0.9]
    }

    pub fn default_angles() -> Vec<f64> {
        vec![0.0, misalignment_angle(0.02), 0.3]
    }

    fn points(&self) -> UsageResult<Vec<SetupParams>> {
        let mut out = Vec::new();
        for &n in &self.parties {
            let ms: Vec<usize> = match &self.ports {
                PortChoice::Auto => (n..=6.max(n)).collect(),
                PortChoice::List(ms) => ms.clone(),
            };
            for m in ms {
                if n > fock::MAX_PARTIES || m > fock::MAX_PORTS || m < n {
                    return Err(UsageError(format!(
                        "verify-oracle supports 2 <= N <= {} and N <= M <= {} (got N={n}, M={m})",
                        fock::MAX_PARTIES,
                        fock::MAX_PORTS
                    )));
                }
                for &q in &self.q_values {
                    for &t in &self.transmittances {
                        for &th in &self.angles {
                            for &ph in &self.angles {
                                out.push(SetupParams {
                                    polarization_misalignment: th,
                                    phase_misalignment: ph,
                                    ..SetupParams::ideal(n, m, q, t)
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Outcome of `verify-oracle`: the report plus the points that failed.
pub struct Verification {
    pub table: Table,
    pub failures: Vec<String>,
}

pub fn verify_oracle(grid: &VerifyGrid) -> UsageResult<Verification> {
    let points = grid.points()?;
    let rows: Vec<(Vec<Cell>, Option<String>)> = points
        .par_iter()
        .map(|p| {
            let an_p = channel::single_click_probability(p).unwrap_or(f64::NAN);
            let or_p = evolve(p).map(|s| click_partition(&s).single[0]).unwrap_or(f64::NAN);
            let an = channel::channel_statistics(p).ok();
            let or = oracle_statistics(p).ok();
            let (aq, az) = an.map_or((f64::NAN, f64::NAN), |s| (s.qber, s.phase_error));
            let (oq, oz) = or.map_or((f64::NAN, f64::NAN), |s| (s.qber, s.phase_error));
            let dp = (an_p - or_p).abs();
            let (dq, dz) = ((aq - oq).abs(), (az - oz).abs());
            let defined = an.is_some() && or.is_some();
            let ok = dp <= ORACLE_TOLERANCE && (!defined || (dq <= ORACLE_TOLERANCE && dz <= ORACLE_TOLERANCE));
            // both sides must agree on whether the statistics exist
            let ok = ok && an.is_some() == or.is_some();
            let status = match (ok, defined) {
                (false, _) => "FAIL",
                (true, true) => "ok",
                (true, false) => "undefined",
            };
            let t = p.transmittance;
            let row = vec![
                p.num_parties.into(),
                p.num_ports.into(),
                p.vacuum_weight.into(),
                (transmittance_to_loss_db(t) + 0.0).into(),
                t.into(),
                p.polarization_misalignment.into(),
                p.phase_misalignment.into(),
                an_p.into(),
                aq.into(),
                az.into(),
                or_p.into(),
                oq.into(),
                oz.into(),
                dp.into(),
                Cell::Float(if defined { dq } else { f64::NAN }),
                Cell::Float(if defined { dz } else { f64::NAN }),
                status.into(),
            ];
            let failure = (!ok).then(|| {
                format!(
                    "N={} M={} q={} t={} theta={} phi={}: |dp_j|={dp:.3e} |dqber|={dq:.3e} |dq_z|={dz:.3e}",
                    p.num_parties, p.num_ports, p.vacuum_weight, t, p.polarization_misalignment, p.phase_misalignment
                )
            });
            (row, failure)
        })
        .collect();
    let mut table = Table::new(&VERIFY_HEADER);
    let mut failures = Vec::new();
    for (row, failure) in rows {
        table.push(row);
        failures.extend(failure);
    }
    Ok(Verification { table, failures })
}

/// Transmittances for the oracle grid from `--loss-db`, if given.
pub fn transmittances_from_losses(losses: &[f64]) -> Vec<f64> {
    losses.iter().map(|&db| loss_db_to_transmittance(db)).collect()
}
