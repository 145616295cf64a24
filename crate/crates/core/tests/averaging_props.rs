use rand::{Rng, SeedableRng};

use safezone_core::averaging::*;
use safezone_core::channel::*;
use safezone_core::security::ProtocolParams;

fn default_model() -> LinkModel {
    LinkModel::new(
        &LinkGeometry::default(),
        &TurbulenceParams::default(),
        &ProtocolParams::default(),
    )
    .unwrap()
}

#[test]
fn threshold_averages_are_ordered_and_monotone() {
    let m = default_model();
    let cfg = QuadConfig::default();
    let beta = m.protocol().recon_eff;
    let full = m.thresholded_mi(f64::INFINITY, &cfg).unwrap().value;
    let mut prev = 0.0;
    for j in 0..40 {
        let r_th = 1e-3 * 1000f64.powf(j as f64 / 39.0);
        let p = m.thresholded_key_rate(r_th, &cfg).unwrap();
        assert!(p.i_bar >= prev - 1e-12, "Ī decreased at {r_th}");
        assert!(p.k_bar <= beta * p.i_bar + 1e-12);
        assert!(p.i_bar <= full + 1e-12);
        let closed = 1.0 - (-r_th * r_th / m.geometry().offset_scale()).exp();
        assert!((p.accept_prob - closed).abs() <= 1e-12);
        prev = p.i_bar;
    }
}

#[test]
fn pointwise_curves_on_dense_grid() {
    let m = default_model();
    let g = *m.geometry();
    let cfg = QuadConfig::default();
    let (mut prev_i, mut prev_k, mut prev_e) = (f64::INFINITY, f64::INFINITY, -1.0);
    for j in 0..200 {
        let off = OffsetSq::new(j as f64 * 5e-5).unwrap();
        let i = m.turbulence_averaged_mi(off, &cfg).unwrap().value;
        let k = m.conditional_key_rate(off, &cfg).unwrap().value;
        let e = eve_transmissivity(off, &g);
        assert!(i < prev_i, "I not strictly decreasing at step {j}");
        assert!(k <= prev_k, "K increased at step {j}");
        assert!(e > prev_e);
        (prev_i, prev_k, prev_e) = (i, k, e);
    }
}

#[test]
fn untruncated_mi_matches_monte_carlo() {
    let m = default_model();
    let q = m
        .thresholded_mi(f64::INFINITY, &QuadConfig::default())
        .unwrap();
    // a threshold far beyond any sampled offset accepts everything
    let mc = m.mc_reference(10.0, &McConfig::new(1_000_000, 8)).unwrap();
    assert!(
        (q.value - mc.i_bar).abs() <= 3.0 * mc.stderr_i,
        "{} vs {} ± {}",
        q.value,
        mc.i_bar,
        mc.stderr_i
    );
}

#[test]
fn zero_offset_mi_matches_monte_carlo() {
    let m = default_model();
    let q = m
        .turbulence_averaged_mi(OffsetSq::ZERO, &QuadConfig::default())
        .unwrap();
    let sampler = m.turbulence().sampler();
    let mut rng = SeededRng::seed_from_u64(3);
    let n = 1_000_000;
    let c = m.bob_prefactor(OffsetSq::ZERO);
    let p = *m.protocol();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let h: f64 = rand_distr::Distribution::sample(&sampler, &mut rng);
        let eta = (c * h).min(MAX_TRANSMISSIVITY);
        let i = safezone_core::security::mutual_information(eta, &p).unwrap();
        s += i;
        s2 += i * i;
    }
    let nf = n as f64;
    let mean = s / nf;
    let se = ((s2 / nf - mean * mean) / (nf - 1.0)).sqrt();
    assert!((q.value - mean).abs() <= 3.0 * se);
}

#[test]
fn quadrature_matches_monte_carlo_over_random_configs() {
    let mut rng = SeededRng::seed_from_u64(606);
    let cfg = QuadConfig::default();
    for k in 0..4 {
        let g = LinkGeometry {
            z_link: rng.random_range(300.0..1200.0),
            aperture_radius: rng.random_range(0.03..0.1),
            ..LinkGeometry::default()
        };
        let tp = TurbulenceParams {
            alpha: rng.random_range(2.0..8.0),
            beta_gg: rng.random_range(1.0..4.0),
        };
        let m = LinkModel::new(&g, &tp, &ProtocolParams::default()).unwrap();
        let r_th = rng.random_range(0.5..3.0) * g.offset_scale().sqrt();
        let q = m.thresholded_key_rate(r_th, &cfg).unwrap();
        let mc = m
            .mc_reference(r_th, &McConfig::new(1_000_000, 50 + k).with_strands(4))
            .unwrap();
        assert!(
            (q.i_bar - mc.i_bar).abs() <= 3.0 * mc.stderr_i,
            "config {k} Ī"
        );
        assert!(
            (q.k_bar - mc.k_bar).abs() <= 3.0 * mc.stderr_k,
            "config {k} K̄"
        );
    }
}

#[test]
fn accessors_and_wrappers_agree() {
    let g = LinkGeometry::default();
    let tp = TurbulenceParams::default();
    let p = ProtocolParams::default();
    let cfg = QuadConfig::default();
    let m = LinkModel::new(&g, &tp, &p).unwrap();
    let a = thresholded_key_rate(0.03, &g, &tp, &p, &cfg).unwrap();
    let b = m.thresholded_key_rate(0.03, &cfg).unwrap();
    assert_eq!(a, b);
    let off = OffsetSq::new(3e-4).unwrap();
    assert_eq!(
        turbulence_averaged_mi(off, &g, &tp, &p, &cfg).unwrap(),
        m.turbulence_averaged_mi(off, &cfg).unwrap().value
    );
}
