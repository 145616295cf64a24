use proptest::prelude::*;

use safezone_core::sweep::*;

fn small_surface() -> SweepSpec {
    SweepSpec::surface(
        Scenario::default(),
        WaistAxis::ReceiverBeamRadius(linear_grid(0.03, 0.15, 5)),
        log_grid(5e-3, 0.3, 8),
    )
}

#[test]
fn surface_is_deterministic_and_monotone_in_threshold() {
    let spec = small_surface();
    let a = sweep_surface(&spec).unwrap();
    let b = sweep_surface(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.failed_cells(), 0);
    for i in 0..a.w_grid.len() {
        for j in 1..a.rth_grid.len() {
            let prev = a.cell(i, j - 1).point.unwrap().i_bar;
            let cur = a.cell(i, j).point.unwrap().i_bar;
            assert!(cur >= prev, "Ī decreased along r_th at w index {i}");
        }
    }
    assert!((0.0..=1.0).contains(&a.secure_region_fraction));
}

#[test]
fn optimum_is_grid_max_and_refinement_never_loses() {
    let s = sweep_surface(&small_surface()).unwrap();
    let grid = find_optimum(&s, false).unwrap();
    for c in &s.cells {
        assert!(c.point.unwrap().k_bar <= grid.k_bar);
    }
    assert_eq!(
        s.cell(grid.w_index, grid.r_index).point.unwrap().k_bar,
        grid.k_bar
    );
    let refined = find_optimum(&s, true).unwrap();
    assert!(refined.k_bar >= grid.k_bar);
    let direct = Scenario::default()
        .evaluate(Some(refined.w), refined.r_th)
        .unwrap()
        .k_bar;
    assert!((direct - refined.k_bar).abs() <= 1e-9);
}

#[test]
fn threshold_sweep_has_interior_peak_at_defaults() {
    let s = sweep_threshold(&SweepSpec::threshold(
        Scenario::default(),
        default_rth_grid(),
    ))
    .unwrap();
    assert_eq!(s.points.len(), DEFAULT_RTH_POINTS);
    let j = s.argmax().unwrap();
    assert!(j > 0 && j + 1 < s.points.len());
    for w in s.points.windows(2) {
        assert!(w[1].i_bar >= w[0].i_bar);
    }
}

#[test]
fn transmitter_waist_axis_matches_receiver_axis() {
    let sc = Scenario::default();
    let w0 = vec![0.02, 0.05];
    let rx = WaistAxis::TransmitterWaist(w0.clone()).beam_radii(&sc.geometry);
    let a = sweep_surface(&SweepSpec::surface(
        sc,
        WaistAxis::TransmitterWaist(w0),
        vec![0.04],
    ))
    .unwrap();
    let b = sweep_surface(&SweepSpec::surface(
        sc,
        WaistAxis::ReceiverBeamRadius(rx),
        vec![0.04],
    ))
    .unwrap();
    assert_eq!(a.cells, b.cells);
}

#[test]
fn mc_check_rows_follow_the_grid() {
    let mut spec = SweepSpec::threshold(Scenario::default(), vec![0.02, 0.05]);
    spec.mc_check = Some(safezone_core::averaging::McConfig::new(100_000, 4));
    let s = sweep_threshold(&spec).unwrap();
    let mc = s.mc.unwrap();
    assert_eq!(mc.len(), 2);
    for (q, m) in s.points.iter().zip(&mc) {
        assert!((q.k_bar - m.k_bar).abs() <= 4.0 * m.stderr_k);
    }
}

#[test]
fn failing_cells_are_annotated_not_fatal() {
    // far too few subdivisions for the requested accuracy
    let sc = Scenario {
        quad: safezone_core::averaging::QuadConfig::new(1e-12, 0.0, 10).unwrap(),
        ..Scenario::default()
    };
    let spec = SweepSpec::surface(
        sc,
        WaistAxis::ReceiverBeamRadius(vec![0.05, 0.08]),
        vec![0.01, 0.05],
    );
    let s = sweep_surface(&spec).unwrap();
    assert_eq!(s.cells.len(), 4);
    assert!(s.failed_cells() > 0);
    for c in &s.cells {
        assert!(c.point.is_some() != c.error.is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_argmax_of_synthetic_bowl(w0 in 0.0f64..1.0, r0 in 0.0f64..2.0) {
        let w_grid = linear_grid(0.0, 1.0, 11);
        let r_grid = linear_grid(0.0, 2.0, 21);
        let vals: Vec<f64> = w_grid
            .iter()
            .flat_map(|&w| r_grid.iter().map(move |&r| -(w - w0).powi(2) - (r - r0).powi(2)))
            .collect();
        let s = SurfaceResult::from_values(w_grid.clone(), r_grid.clone(), &vals);
        let o = find_optimum(&s, false).unwrap();
        let nearest = |g: &[f64], x: f64| {
            g.iter().map(|v| (v - x).abs()).fold(f64::INFINITY, f64::min)
        };
        prop_assert!(((o.w - w0).abs() - nearest(&w_grid, w0)).abs() < 1e-12);
        prop_assert!(((o.r_th - r0).abs() - nearest(&r_grid, r0)).abs() < 1e-12);
    }
}
