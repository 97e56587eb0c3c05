use mpl_core::model::Architecture;
use mpl_core::mpl::{batches_per_epoch, MplState};
use mpl_core::{derive_alpha, ema_update, OfflineUpdate, ParamVector};

fn pv(values: Vec<f64>) -> ParamVector {
    let arch = Architecture {
        input_dim: 1,
        context: 0,
        hidden: 1,
        n_hidden: 1,
        vocab: 1,
    };
    ParamVector::new(arch, values).unwrap()
}

#[test]
fn repeated_updates_match_closed_form() {
    // ϕ_K = α^K ϕ_0 + (1 − α^K) ξ for a fixed online model ξ
    let alpha = derive_alpha(0.5, 1000).unwrap();
    let phi0 = pv(vec![1.0, -2.0, 0.25, 3.0, 0.0, -0.5]);
    let xi = pv(vec![0.0, 1.0, -1.0, 2.5, 4.0, 0.5]);
    let mut phi = phi0.clone();
    for _ in 0..1000 {
        phi = ema_update(&phi, &xi, alpha).unwrap();
    }
    let a_k = alpha.powi(1000);
    for ((p, p0), x) in phi.values().iter().zip(phi0.values()).zip(xi.values()) {
        assert!((p - (a_k * p0 + (1.0 - a_k) * x)).abs() < 1e-10);
    }
}

#[test]
fn one_epoch_retains_w_of_the_start() {
    for &w in &[0.05, 0.25, 0.5, 0.9, 1.0] {
        for &k in &[1usize, 7, 3013, 6301] {
            let alpha = derive_alpha(w, k).unwrap();
            assert!((alpha.powi(k as i32) - w).abs() < 1e-12, "w {w} K {k}");
            // the start model's share after K steps against a zero online model
            let mut phi = pv(vec![1.0; 6]);
            let zero = pv(vec![0.0; 6]);
            for _ in 0..k {
                phi = ema_update(&phi, &zero, alpha).unwrap();
            }
            assert!((phi.values()[0] - w).abs() < 1e-10);
        }
    }
}

#[test]
fn alpha_is_monotone() {
    let mut prev = 0.0;
    for i in 1..=20 {
        let a = derive_alpha(i as f64 / 20.0, 500).unwrap();
        assert!(a > prev);
        prev = a;
    }
    let mut prev = 0.0;
    for k in [1, 2, 10, 100, 10_000] {
        let a = derive_alpha(0.5, k).unwrap();
        assert!(a > prev);
        prev = a;
    }
}

#[test]
fn published_alpha_values() {
    for (k, expected) in [(3013, 0.99977), (6301, 0.99989), (4077, 0.99983)] {
        let a = derive_alpha(0.5, k).unwrap();
        assert!((a - expected).abs() < 5e-6, "K {k}: {a}");
    }
}

#[test]
fn k_counts_batches_over_both_sets() {
    assert_eq!(batches_per_epoch(200, 2000, 8), 275);
    assert_eq!(batches_per_epoch(3, 0, 8), 1);
    assert_eq!(batches_per_epoch(9, 8, 8), 3);
}

#[test]
fn shared_mode_copies_online() {
    let base = pv(vec![1.0; 6]);
    let mut state = MplState::new(&base, OfflineUpdate::from_weight(0.0).unwrap(), 10).unwrap();
    assert_eq!(state.alpha, 0.0);
    state.online = pv(vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    state.momentum_step().unwrap();
    assert_eq!(state.offline, state.online);
    assert!(OfflineUpdate::from_weight(1.5).is_err());
}
