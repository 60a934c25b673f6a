//! Browser bindings for the rate calculator. Curves come back as flat
//! `Float64Array`s so the page can plot them without any glue.

use tfcka_core::channel::dark_count_adjusted;
use tfcka_core::optimizer::{optimize_finite_key, optimize_q_asymptotic, OptimizationBudget};
use tfcka_core::params::misalignment_angle;
use tfcka_core::rates::direct_transmission_bound;
use tfcka_core::{Error, SetupParams};
use wasm_bindgen::prelude::wasm_bindgen;

fn setup(n: usize, m: usize, q: f64, loss_db: f64, misalign: f64, pd: f64) -> SetupParams {
    SetupParams::ideal(n, m.max(n), q, 1.0)
        .with_loss_db(loss_db)
        .with_misalignment(misalignment_angle(misalign.clamp(0.0, 1.0)))
        .with_dark_counts(pd)
}

/// `[loss_db, rate, bound]` triples for `steps` losses from 0 to `max_loss_db`.
/// The rate uses the optimal `q`; a bound of `-1` stands for infinity.
#[wasm_bindgen]
pub fn rate_curve(n: usize, m: usize, max_loss_db: f64, steps: usize, misalign: f64, pd: f64) -> Vec<f64> {
    let steps = steps.clamp(2, 400);
    let budget = OptimizationBudget::fast();
    let mut out = Vec::with_capacity(3 * steps);
    for i in 0..steps {
        let loss = max_loss_db * i as f64 / (steps - 1) as f64;
        let p = setup(n, m, 0.5, loss, misalign, pd);
        let rate = optimize_q_asymptotic(&p, &budget).map(|r| r.rate).unwrap_or(0.0);
        let bound = match direct_transmission_bound(n, p.transmittance) {
            Ok(b) => b.rate,
            Err(Error::InfiniteBound(_)) => -1.0,
            Err(_) => f64::NAN,
        };
        out.extend([loss, rate, bound]);
    }
    out
}

/// Click probability and error rates at one operating point, as JSON.
#[wasm_bindgen]
pub fn channel_stats(n: usize, m: usize, q: f64, loss_db: f64, misalign: f64, pd: f64) -> String {
    let p = setup(n, m, q, loss_db, misalign, pd);
    match dark_count_adjusted(&p) {
        Ok(s) => serde_json::json!({
            "transmittance": p.transmittance,
            "click_prob": s.click_prob,
            "qber": s.qber,
            "phase_error": s.phase_error,
        })
        .to_string(),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

/// `[log10 L, finite rate]` pairs for `L = 10^6 .. 10^max_log10_rounds`,
/// followed by the asymptotic rate as the last element.
#[wasm_bindgen]
pub fn finite_curve(n: usize, loss_db: f64, eps_tot: f64, max_log10_rounds: f64, misalign: f64, pd: f64) -> Vec<f64> {
    let budget = OptimizationBudget::fast();
    let p = setup(n, n, 0.5, loss_db, misalign, pd);
    let top = max_log10_rounds.clamp(6.0, 16.0);
    let mut out = Vec::new();
    let mut e = 6.0;
    while e <= top + 1e-9 {
        let rate = optimize_finite_key(&p, 10f64.powf(e), eps_tot, &budget).map(|r| r.rate).unwrap_or(0.0);
        out.extend([e, rate]);
        e += 0.5;
    }
    out.push(optimize_q_asymptotic(&p, &budget).map(|r| r.rate).unwrap_or(0.0));
    out
}
