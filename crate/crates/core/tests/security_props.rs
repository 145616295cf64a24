use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use safezone_core::channel::{eve_transmissivity, LinkGeometry, OffsetSq, SeededRng};
use safezone_core::security::*;

fn protocol() -> impl Strategy<Value = ProtocolParams> {
    (0.5f64..40.0, 0.0f64..0.5, 0.5f64..1.0, 0.1f64..1.0).prop_map(|(v, xi, b, e)| ProtocolParams {
        v_mod: v,
        excess_noise: xi,
        recon_eff: b,
        eta_sys: e,
    })
}

proptest! {
    #[test]
    fn key_rate_is_linear_in_mi(i in 0.0f64..5.0, chi in 0.0f64..3.0, b in 0.1f64..1.0) {
        let k1 = secret_key_rate(i, chi, b);
        let k2 = secret_key_rate(2.0 * i, chi, b);
        prop_assert!((k2 - k1 - b * i).abs() <= 1e-14);
    }

    #[test]
    fn security_point_is_consistent(p in protocol(), eb in 0.0f64..0.99, ee in 0.0f64..1.0) {
        let sp = SecurityPoint::evaluate(eb, ee, &p).unwrap();
        prop_assert!(sp.i_ab >= 0.0 && sp.chi_ae >= 0.0);
        prop_assert_eq!(sp.key_rate, p.recon_eff * sp.i_ab - sp.chi_ae);
        prop_assert!(sp.chi_ae <= 0.5 * (p.v_mod + 1.0).log2() + 1e-15);
    }
}

#[test]
fn holevo_forms_agree_over_random_geometries() {
    let mut rng = SeededRng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let ra = rng.random_range(0.01..0.2);
        let g = LinkGeometry {
            z_link: rng.random_range(100.0..2000.0),
            aperture_radius: ra,
            safe_radius: ra * rng.random_range(1.0..4.0),
            waist: rng.random_range(0.005..0.2),
            jitter_sigma: rng.random_range(5e-6..2e-4),
            ..LinkGeometry::default()
        };
        let p = ProtocolParams {
            v_mod: rng.random_range(0.5..40.0),
            ..ProtocolParams::default()
        };
        let off = OffsetSq::new(rng.random_range(0.0..10.0) * g.offset_scale()).unwrap();
        let a = holevo_bound_offset(off, &g, &p);
        let b = holevo_bound(eve_transmissivity(off, &g), &p).unwrap();
        worst = worst.max((a - b).abs());
    }
    assert!(worst <= 1e-12, "{worst:e}");
}

#[test]
fn monotone_on_grids() {
    let p = ProtocolParams::default();
    let grid: Vec<f64> = (0..=200).map(|j| j as f64 / 200.0).collect();
    for w in grid.windows(2) {
        assert!(holevo_bound(w[1], &p).unwrap() >= holevo_bound(w[0], &p).unwrap());
        if w[1] < 1.0 {
            assert!(mutual_information(w[1], &p).unwrap() >= mutual_information(w[0], &p).unwrap());
        }
    }
    let mut prev = 0.0;
    for j in 1..=100 {
        let q = ProtocolParams {
            v_mod: j as f64 * 0.25,
            ..p
        };
        let i = mutual_information(0.6, &q).unwrap();
        assert!(i >= prev);
        prev = i;
    }
}

#[test]
fn homodyne_estimate_converges_to_analytic_mi() {
    let mut rng = SeededRng::seed_from_u64(31);
    for k in 0..20 {
        let p = ProtocolParams {
            v_mod: rng.random_range(1.0..20.0),
            excess_noise: rng.random_range(0.01..0.3),
            ..ProtocolParams::default()
        };
        let eta = rng.random_range(0.1..0.9);
        let est = simulate_homodyne(eta, &p, 1_000_000, 1000 + k).unwrap();
        let exact = mutual_information(eta, &p).unwrap();
        let rel = ((est - exact) / exact).abs();
        assert!(rel <= 0.02, "config {k}: {est} vs {exact}");
    }
}

#[test]
fn homodyne_reference_point() {
    let p = ProtocolParams::default();
    let est = simulate_homodyne(0.5, &p, 1_000_000, 5).unwrap();
    assert!(((est - 1.184_616_904_832_859_5) / 1.184_616_904_832_859_5).abs() <= 0.02);
}
