use crn_neuron::dual_rail::encode_all;
use crn_neuron::feedforward::{compile_feedforward, forward, FeedforwardNetwork};
use crn_neuron::{DualRailValue, IntegratorConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fixed point of `ẏ± = k p± − k y± − k_inf y⁺ y⁻`, from the quadratic in the
/// smaller rail.
fn fixed_point(p_plus: f64, p_minus: f64, k: f64, k_inf: f64) -> (f64, f64) {
    let r = k_inf / k;
    let delta = (p_plus - p_minus).abs();
    let m = p_plus.min(p_minus);
    let b = 1.0 + r * delta;
    let s = (-b + (b * b + 4.0 * r * m).sqrt()) / (2.0 * r);
    if p_plus >= p_minus {
        (s + delta, s)
    } else {
        (s, s + delta)
    }
}

fn p_sums(x: &[f64], w: &[f64]) -> (f64, f64) {
    let mut plus = 0.0;
    let mut minus = 0.0;
    for (a, b) in x.iter().zip(w) {
        if a * b >= 0.0 {
            plus += (a * b).abs();
        } else {
            minus += (a * b).abs();
        }
    }
    (plus, minus)
}

fn instance(x_tail: &[f64], w: &[f64]) -> (Vec<DualRailValue>, Vec<DualRailValue>, Vec<f64>) {
    let mut x = vec![1.0];
    x.extend_from_slice(x_tail);
    (encode_all(&x).unwrap(), encode_all(w).unwrap(), x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn output_decodes_to_difference(
        n in 1usize..5,
        raw in prop::collection::vec(-2.0f64..2.0, 10),
        k_inf in prop::sample::select(vec![10.0, 100.0, 500.0]),
    ) {
        let (x, w, xv) = instance(&raw[..n], &raw[5..6 + n]);
        let net = compile_feedforward(n, 1.0, k_inf).unwrap();
        let out = forward(&x, &w, &IntegratorConfig::default(), &net, DualRailValue::ZERO).unwrap();
        let (pp, pm) = p_sums(&xv, &raw[5..6 + n]);
        prop_assert!((out.y.decode() - (pp - pm)).abs() <= 1e-4);
        prop_assert!(out.y.is_canonical());
    }
}

#[test]
fn raw_rails_reach_the_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k_inf in [10.0, 100.0, 1000.0] {
        let net = compile_feedforward(2, 1.0, k_inf).unwrap();
        for _ in 0..10 {
            let xs: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ws: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (x, w, xv) = instance(&xs, &ws);
            let (pp, pm) = p_sums(&xv, &ws);
            let out = forward(&x, &w, &IntegratorConfig::default(), &net, DualRailValue::ZERO).unwrap();
            let (ep, em) = fixed_point(pp, pm, 1.0, k_inf);
            assert!((out.raw.plus - ep).abs() < 1e-5, "{} vs {ep}", out.raw.plus);
            assert!((out.raw.minus - em).abs() < 1e-5, "{} vs {em}", out.raw.minus);
        }
    }
}

#[test]
fn annihilation_sharpens_with_rate() {
    // p⁺ = 5, p⁻ = 2.
    let x = encode_all(&[1.0, 1.0]).unwrap();
    let w = vec![
        DualRailValue::new(5.0, 0.0).unwrap(),
        DualRailValue::new(0.0, 2.0).unwrap(),
    ];
    let mut last = f64::INFINITY;
    for k_inf in [10.0, 100.0, 1000.0] {
        let net = compile_feedforward(1, 1.0, k_inf).unwrap();
        let out = forward(&x, &w, &IntegratorConfig::default(), &net, DualRailValue::ZERO).unwrap();
        let residual = out.raw.plus.min(out.raw.minus);
        let (_, expected) = fixed_point(3.0 + 2.0, 2.0, 1.0, k_inf);
        assert!((residual - expected).abs() < 1e-6);
        assert!(residual < last, "residual {residual} did not shrink at k_inf = {k_inf}");
        last = residual;
    }
}

#[test]
fn every_initial_output_reaches_the_same_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = compile_feedforward(1, 1.0, 500.0).unwrap();
    let (x, w, _) = instance(&[0.7], &[-1.2, 2.5]);
    let reference = forward(&x, &w, &IntegratorConfig::default(), &net, DualRailValue::ZERO)
        .unwrap()
        .raw;
    for _ in 0..20 {
        let y0 = DualRailValue::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)).unwrap();
        let raw = forward(&x, &w, &IntegratorConfig::default(), &net, y0).unwrap().raw;
        assert!((raw.plus - reference.plus).abs() < 1e-6);
        assert!((raw.minus - reference.minus).abs() < 1e-6);
    }
}

#[test]
fn output_is_a_ramp_of_the_difference() {
    let net = compile_feedforward(1, 1.0, 500.0).unwrap();
    let cfg = IntegratorConfig::default();
    let one = encode_all(&[1.0, 1.0]).unwrap();
    let dr = |p, m| DualRailValue::new(p, m).unwrap();

    let up = forward(&one, &[dr(5.0, 0.0), dr(0.0, 2.0)], &cfg, &net, DualRailValue::ZERO).unwrap();
    assert!((up.y.plus - 3.0).abs() < 3e-2 && up.y.minus == 0.0);

    let down = forward(&one, &[dr(2.0, 0.0), dr(0.0, 5.0)], &cfg, &net, DualRailValue::ZERO).unwrap();
    assert!(down.y.plus == 0.0 && (down.y.minus - 3.0).abs() < 3e-2);

    let tie = forward(&one, &[dr(2.0, 0.0), dr(0.0, 2.0)], &cfg, &net, DualRailValue::ZERO).unwrap();
    assert!(tie.y.decode().abs() < 1e-4);
}

#[test]
fn bias_must_be_one() {
    let net = compile_feedforward(1, 1.0, 500.0).unwrap();
    let x = encode_all(&[0.5, 1.0]).unwrap();
    let w = encode_all(&[1.0, 1.0]).unwrap();
    assert!(forward(&x, &w, &IntegratorConfig::default(), &net, DualRailValue::ZERO).is_err());
    assert_eq!(FeedforwardNetwork::bias().decode(), 1.0);
}
