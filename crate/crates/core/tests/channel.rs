use proptest::prelude::*;

use ota_fl_sim::channel::{
    aggregate, compute_precoding_factor, decode_full, encode, participation_probability, sigma2_from_snr_db, snr,
    threshold_for_expected_participation, BasebandMode, ChannelConfig, ClientUpload, FadingDraw,
};
use ota_fl_sim::channel::draw_fading;
use ota_fl_sim::params::{max_abs_diff, mean_of, norm_sq};
use ota_fl_sim::rng::rng_from_seed;

fn vectors(k: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), k)
}

fn uploads(thetas: &[Vec<f64>]) -> Vec<ClientUpload<'_>> {
    thetas
        .iter()
        .enumerate()
        .map(|(i, t)| ClientUpload { client_id: i, theta: t })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_round_trip_is_exact(thetas in vectors(5, 8), prev in prop::collection::vec(-3.0f64..3.0, 8), p in 0.01f64..50.0) {
        let cfg = ChannelConfig::noiseless();
        let up = uploads(&thetas);
        let (_, full) = aggregate(&up, &prev, p, 5, &cfg, None, 1).unwrap();
        let refs: Vec<&[f64]> = thetas.iter().map(Vec::as_slice).collect();
        prop_assert!(max_abs_diff(full.as_slice(), &mean_of(&refs)) <= 1e-12);
        let (_, part) = aggregate(&up[1..4], &prev, p, 5, &cfg, None, 1).unwrap();
        prop_assert!(max_abs_diff(part.as_slice(), &mean_of(&refs[1..4])) <= 1e-12);
    }

    #[test]
    fn oracle_precoding_meets_power_exactly(thetas in vectors(6, 5), power in 0.1f64..10.0) {
        let prev = vec![0.0; 5];
        let norms: Vec<f64> = thetas.iter().map(|t| norm_sq(t)).collect();
        prop_assume!(norms.iter().any(|&n| n > 1e-6));
        let q = vec![1.0 / 6.0; 6];
        let p = compute_precoding_factor(&norms, &q, power).unwrap();
        let energy: f64 = thetas.iter().zip(&q).map(|(t, w)| w * norm_sq(&encode(t, &prev, p).unwrap())).sum();
        prop_assert!((energy - power).abs() <= 1e-9 * power);
    }

    #[test]
    fn complex_baseband_matches_real(thetas in vectors(6, 4), seed in any::<u64>(), r_hat in 0.1f64..1.2) {
        let prev = vec![0.5; 4];
        let draws = draw_fading(6, &mut rng_from_seed(seed));
        prop_assume!(draws.iter().any(|d| d.participates(r_hat)));
        let real = ChannelConfig { fading: true, r_hat, ..ChannelConfig::noiseless() };
        let complex = ChannelConfig { baseband: BasebandMode::Complex, ..real.clone() };
        let up = uploads(&thetas);
        let (a, ta) = aggregate(&up, &prev, 0.7, 6, &real, Some(&draws), 3).unwrap();
        let (b, tb) = aggregate(&up, &prev, 0.7, 6, &complex, Some(&draws), 3).unwrap();
        prop_assert_eq!(a.participants, b.participants);
        prop_assert!(max_abs_diff(ta.as_slice(), tb.as_slice()) <= 1e-9);
    }

    #[test]
    fn snr_conversion_inverts(db in -20.0f64..20.0, d in 1usize..5000, power in 0.1f64..10.0) {
        let s2 = sigma2_from_snr_db(power, d, db);
        let back = 10.0 * snr(power, d, s2).log10();
        prop_assert!((back - db).abs() <= 1e-9);
    }
}

#[test]
fn threshold_is_strict() {
    let at = FadingDraw { r: 0.5, omega: 0.0 };
    assert!(!at.participates(0.5));
    assert!(FadingDraw { r: 0.5000001, omega: 0.0 }.participates(0.5));
}

#[test]
fn zero_db_at_thousand_parameters() {
    assert!((sigma2_from_snr_db(1.0, 1000, 0.0) - 1e-3).abs() < 1e-15);
}

#[test]
fn participation_rate_matches_rayleigh_law() {
    let r_hat = threshold_for_expected_participation(30, 20.0);
    let draws = draw_fading(200_000, &mut rng_from_seed(5));
    let rate = draws.iter().filter(|d| d.participates(r_hat)).count() as f64 / draws.len() as f64;
    assert!((rate - participation_probability(r_hat)).abs() < 0.005);
    assert!((participation_probability(r_hat) - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn noise_is_reproducible_from_seed() {
    let thetas = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
    let cfg = ChannelConfig {
        sigma2: 0.5,
        ..Default::default()
    };
    let (_, a) = aggregate(&uploads(&thetas), &[0.0, 0.0], 1.0, 2, &cfg, None, 99).unwrap();
    let (_, b) = aggregate(&uploads(&thetas), &[0.0, 0.0], 1.0, 2, &cfg, None, 99).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let (_, c) = aggregate(&uploads(&thetas), &[0.0, 0.0], 1.0, 2, &cfg, None, 100).unwrap();
    assert_ne!(a.to_bits(), c.to_bits());
}

#[test]
fn full_decode_of_three_clients() {
    // y = Σ√p Δ_k with p = 0.25 and zero noise recovers the mean.
    let y = [0.5 * 3.0, 0.5 * -6.0];
    let theta = decode_full(&y, 3, 0.25, &[1.0, 1.0]).unwrap();
    assert_eq!(theta.as_slice(), &[2.0, -1.0]);
}
