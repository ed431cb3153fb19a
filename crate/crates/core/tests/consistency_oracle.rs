use std::collections::BTreeMap;

use rand::Rng;
use scenemem_core::consistency::{consistency_curve, split_half_srcc, CurveMode, DEFAULT_SPLITS};
use scenemem_core::corpus::ImageId;
use scenemem_core::simulate::{identical_subjects, simulate_observations, IntervalDraw, PlantedModel, TargetBehavior};

fn image_ids(n: usize) -> Vec<ImageId> {
    (0..n).map(|i| format!("img{i:04}")).collect()
}

#[test]
fn identical_subjects_split_perfectly() {
    let ids = image_ids(300);
    let model = PlantedModel::uniform(&ids, 0.9, -0.08, 100.0, 0.25, 1);
    let template = simulate_observations(&ids, &TargetBehavior::Planted(model), 1, IntervalDraw::Uniform { min: 35, max: 150 }, 2);
    let obs = identical_subjects(&template, 20);
    let report = split_half_srcc(&obs, DEFAULT_SPLITS, 3, 100.0).unwrap();
    assert_eq!(report.rhos.len(), 25);
    assert!(report.rhos.iter().all(|&r| r == 1.0), "{:?}", report.rhos);
}

#[test]
fn random_responders_are_uncorrelated() {
    let ids = image_ids(1000);
    let obs = simulate_observations(&ids, &TargetBehavior::Random { p_press: 0.5 }, 104, IntervalDraw::Uniform { min: 35, max: 150 }, 8);
    let report = split_half_srcc(&obs, 25, 17, 100.0).unwrap();
    assert!(report.mean_rho.abs() <= 0.05, "mean rho {}", report.mean_rho);
    assert!(report.excluded.iter().all(|&e| e == 0));
}

#[test]
fn planted_split_half_matches_reliability_oracle() {
    let ids = image_ids(1000);
    let model = PlantedModel::uniform(&ids, 0.9, -0.08, 100.0, 0.25, 21);
    let all = simulate_observations(&ids, &TargetBehavior::Planted(model.clone()), 104, IntervalDraw::Uniform { min: 35, max: 150 }, 22);
    // about 80 of the 104 subjects see each image
    let mut rng = scenemem_core::seed::rng(23);
    let obs: Vec<_> = all.into_iter().filter(|_| rng.random_bool(80.0 / 104.0)).collect();
    let report = split_half_srcc(&obs, 25, 24, 100.0).unwrap();

    // Half-score reliability from the generator: between-image variance of
    // the planted rates over that variance plus binomial noise at ~40 views.
    let m: Vec<f64> = model.probabilities.values().copied().collect();
    let mean = m.iter().sum::<f64>() / m.len() as f64;
    let var_m = m.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / m.len() as f64;
    let noise = m.iter().map(|p| p * (1.0 - p)).sum::<f64>() / m.len() as f64;
    let r = var_m / (var_m + noise / 40.0);
    // Pearson to Spearman for a bivariate normal
    let rho_s = 6.0 / std::f64::consts::PI * (r / 2.0).asin();
    assert!((report.mean_rho - rho_s).abs() <= 0.05, "mean rho {} vs oracle {rho_s}", report.mean_rho);
}

#[test]
fn unit_filter_curve_is_exact_reordering() {
    let mut rng = scenemem_core::seed::rng(5);
    let ids = image_ids(500);
    let g1: BTreeMap<ImageId, f64> = ids.iter().map(|id| (id.clone(), rng.random::<f64>())).collect();
    let g2: BTreeMap<ImageId, f64> = ids.iter().map(|id| (id.clone(), rng.random::<f64>())).collect();
    let curve = consistency_curve(&g1, &g2, 1, CurveMode::BoxFilter, 9).unwrap();
    let mut order: Vec<&ImageId> = ids.iter().collect();
    order.sort_by(|a, b| g1[*b].partial_cmp(&g1[*a]).unwrap());
    let expected: Vec<f64> = order.iter().map(|id| g2[*id]).collect();
    let got: Vec<f64> = curve.iter().map(|p| p.group2).collect();
    assert_eq!(got, expected);
}
