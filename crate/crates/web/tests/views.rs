use std::f64::consts::PI;

use demo_gauge_web::{cluster_json, legibility_json, planar_arm_json};

#[test]
fn arm_view_matches_closed_form() {
    let v = planar_arm_json(0.6, 0.4, 0.3, 1.1).unwrap();
    assert!((v.manipulability - 0.6 * 0.4 * 1.1f64.sin()).abs() < 1e-12);
    assert!((v.ellipse.major * v.ellipse.minor - v.manipulability).abs() < 1e-12);
    let tip = v.joints[2];
    assert!((tip[0] - (0.6 * 0.3f64.cos() + 0.4 * 1.4f64.cos())).abs() < 1e-12);
    let peak = v.curve_w.iter().cloned().fold(0.0, f64::max);
    assert!((peak - 0.24).abs() < 1e-3);
    assert_eq!(v.curve_q2.first(), Some(&-PI));
    assert!(planar_arm_json(0.0, 0.4, 0.0, 0.0).is_err());
}

#[test]
fn bending_away_lowers_entropy() {
    let straight = legibility_json(0.4, 0.0, 0.5).unwrap();
    let away = legibility_json(0.4, 0.3, 0.5).unwrap();
    let toward = legibility_json(0.4, -0.3, 0.5).unwrap();
    assert!(away.metric < straight.metric, "{} vs {}", away.metric, straight.metric);
    assert!(toward.metric > straight.metric);
    assert!(straight.metric < 3f64.ln());
    assert_eq!(straight.posterior.len(), 39);
    for p in &straight.posterior {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(straight.entropy.iter().all(|h| *h <= 3f64.ln() + 1e-12 && *h >= 0.0));
}

#[test]
fn cluster_view_separates_regimes() {
    let v = cluster_json(0.05, 0.5, 12, 4).unwrap();
    assert_eq!(v.points.len(), 12);
    assert!(v.accuracy >= 0.75, "{}", v.accuracy);
    assert!(v.explained[0] >= v.explained[1]);
    assert!(v.explained.iter().sum::<f64>() <= 1.0 + 1e-12);
    let again = cluster_json(0.05, 0.5, 12, 4).unwrap();
    assert_eq!(serde_json::to_string(&v).unwrap(), serde_json::to_string(&again).unwrap());
    assert!(cluster_json(0.5, 0.05, 12, 4).is_err());
}
