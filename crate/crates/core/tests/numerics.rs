mod common;

use common::worst_gradient_error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlgame::network::init_network;
use rlgame::td::td_update;
use rlgame::{encode_after_state, Color, EligibilityTraces, GameConfig, TdParams};

#[test]
fn gradients_match_finite_differences() {
    let worst = worst_gradient_error(100, 3);
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn injected_gradient_decays_by_half_per_step() {
    let cfg = common::small();
    let mut net = init_network(cfg, Color::White, 1, 0.01);
    let params = TdParams::default();
    let n = net.params().len();
    let mut traces = EligibilityTraces::zeros_for(&net);
    let mut g = vec![0.0; n];
    g[5] = 0.8;
    let zero = vec![0.0; n];
    // δ = 0.25 at every step: reward 0.25, v_next = v_prev.
    let before = net.params()[5];
    td_update(&mut net, &mut traces, &params, 0.5, 0.5, 0.25, &g).unwrap();
    let mut last = net.params()[5];
    assert!((last - before - params.alpha * 0.25 * 0.8).abs() < 1e-12);
    for k in 1..30 {
        td_update(&mut net, &mut traces, &params, 0.5, 0.5, 0.25, &zero).unwrap();
        let expected_trace = 0.8 * 0.5f64.powi(k);
        assert!((traces.as_slice()[5] - expected_trace).abs() < 1e-12);
        let step = net.params()[5] - last;
        assert!((step - params.alpha * 0.25 * expected_trace).abs() < 1e-12, "k={k}");
        last = net.params()[5];
    }
}

#[test]
fn traces_are_discounted_gradient_sums() {
    let cfg = common::small();
    let net = init_network(cfg, Color::Black, 2, 0.01);
    let n = net.params().len();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grads: Vec<Vec<f64>> = (0..12).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut traces = EligibilityTraces::zeros_for(&net);
    for (t, g) in grads.iter().enumerate() {
        traces.decay_and_add(0.5, g);
        for j in (0..n).step_by(17) {
            let direct: f64 = (0..=t).map(|i| 0.5f64.powi((t - i) as i32) * grads[i][j]).sum();
            assert!((traces.as_slice()[j] - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_error_leaves_network_bitwise_unchanged() {
    let cfg = GameConfig::default();
    let mut net = init_network(cfg, Color::White, 4, 0.3);
    let before: Vec<u64> = net.params().iter().map(|p| p.to_bits()).collect();
    let mut traces = EligibilityTraces::zeros_for(&net);
    let g = vec![1.0; net.params().len()];
    td_update(&mut net, &mut traces, &TdParams::default(), 0.375, 0.375, 0.0, &g).unwrap();
    let after: Vec<u64> = net.params().iter().map(|p| p.to_bits()).collect();
    assert_eq!(before, after);
}

#[test]
fn fresh_nets_start_near_one_half() {
    let cfg = GameConfig::default();
    for (i, s) in common::random_positions(cfg, 100, 21).iter().enumerate() {
        let color = if i % 2 == 0 { Color::White } else { Color::Black };
        let net = init_network(cfg, color, i as u64, TdParams::default().init_weight_scale);
        let v = net.value(&encode_after_state(s, color)).unwrap();
        assert!((v - 0.5).abs() <= 0.05, "{v}");
    }
}
