use tfcka_web::{channel_stats, finite_curve, rate_curve};

#[test]
fn rate_curve_layout() {
    let c = rate_curve(3, 3, 40.0, 5, 0.02, 1e-9);
    assert_eq!(c.len(), 15);
    assert_eq!(c[0], 0.0);
    assert_eq!(c[2], -1.0);
    assert_eq!(c[12], 40.0);
    let rates: Vec<f64> = c.chunks(3).map(|t| t[1]).collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
}

#[test]
fn channel_stats_json() {
    let v: serde_json::Value = serde_json::from_str(&channel_stats(2, 2, 0.9, 10.0, 0.0, 0.0)).unwrap();
    assert!((v["transmittance"].as_f64().unwrap() - 0.1).abs() < 1e-15);
    assert!(v["click_prob"].as_f64().unwrap() > 0.0);
    let bad: serde_json::Value = serde_json::from_str(&channel_stats(2, 2, 1.5, 10.0, 0.0, 0.0)).unwrap();
    assert!(bad["error"].is_string());
}

#[test]
fn finite_curve_approaches_asymptote() {
    let c = finite_curve(2, 10.0, 1e-8, 12.0, 0.02, 1e-9);
    let asym = *c.last().unwrap();
    let pairs: Vec<&[f64]> = c[..c.len() - 1].chunks(2).collect();
    assert_eq!(pairs.len(), 13);
    let last = pairs.last().unwrap()[1];
    assert!(last > 0.9 * asym && last <= asym, "{last} vs {asym}");
}
