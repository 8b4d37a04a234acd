use ensemble_cma::problems::{
    generate_field, npv_proxy, Economics, FieldParams, NpvProxy, ProxyParams, RealizationField,
    ShiftedSphere, WellLayout,
};
use ensemble_cma::Problem;
use proptest::prelude::*;
use std::sync::OnceLock;

fn proxy() -> &'static NpvProxy {
    static P: OnceLock<NpvProxy> = OnceLock::new();
    P.get_or_init(|| NpvProxy::new(ProxyParams::default()).unwrap())
}

fn segments() -> &'static NpvProxy {
    static P: OnceLock<NpvProxy> = OnceLock::new();
    P.get_or_init(|| {
        NpvProxy::new(ProxyParams {
            layout: WellLayout::Segments { thickness: 90.0 },
            n_realizations: 4,
            ..ProxyParams::default()
        })
        .unwrap()
    })
}

fn well() -> impl Strategy<Value = Vec<f64>> {
    (-200.0..3620.0f64, -200.0..5240.0f64).prop_map(|(x, y)| vec![x, y])
}

proptest! {
    #[test]
    fn swapping_wells_is_exact(a in well(), b in well(), r in 1u32..=20) {
        let x = [a.clone(), b.clone()].concat();
        let y = [b, a].concat();
        prop_assert_eq!(proxy().evaluate(&x, r).unwrap(), proxy().evaluate(&y, r).unwrap());
    }

    #[test]
    fn swapping_segment_wells_is_exact(
        a in prop::collection::vec(0.0..3400.0f64, 6),
        b in prop::collection::vec(0.0..3400.0f64, 6),
        r in 1u32..=4,
    ) {
        let x = [a.clone(), b.clone()].concat();
        let y = [b, a].concat();
        prop_assert_eq!(segments().evaluate(&x, r).unwrap(), segments().evaluate(&y, r).unwrap());
    }

    // continuity smoke test; values are ~1e10 over a few km, so a 1e-6 m move
    // may shift the value by up to ~1e2
    #[test]
    fn small_moves_give_small_changes(a in well(), b in well(), k in 0usize..4, r in 1u32..=20) {
        let x = [a, b].concat();
        let mut y = x.clone();
        y[k] += 1e-6;
        let d = (proxy().evaluate(&x, r).unwrap() - proxy().evaluate(&y, r).unwrap()).abs();
        prop_assert!(d < 500.0, "change {}", d);
    }

    #[test]
    fn proxy_is_finite_on_the_box(a in well(), b in well(), r in 1u32..=20) {
        prop_assert!(proxy().evaluate(&[a, b].concat(), r).unwrap().is_finite());
    }
}

#[test]
fn repeated_evaluations_are_bit_identical() {
    let x = [812.5, 1933.0, 2400.25, 3100.0];
    let first = proxy().evaluate(&x, 7).unwrap();
    for _ in 0..10_000 {
        assert_eq!(proxy().evaluate(&x, 7).unwrap().to_bits(), first.to_bits());
    }
}

#[test]
fn typical_values_are_near_1e10() {
    let x = [1000.0, 1500.0, 2200.0, 2400.0];
    let v = proxy().ensemble_mean(&x).unwrap();
    assert!((1e9..1e11).contains(&v.abs()), "{v}");
}

#[test]
fn spacing_maximizer_on_a_uniform_field() {
    let field = RealizationField {
        nx: 38,
        ny: 56,
        cell_size: 90.0,
        realization_id: 1,
        values: vec![120.0; 38 * 56],
    };
    let e = Economics::default();
    let step = 10.0;
    let best = (0..=450)
        .map(|k| k as f64 * step)
        .map(|d| {
            (
                d,
                npv_proxy(
                    &[400.0, 300.0, 400.0, 300.0 + d],
                    &field,
                    &e,
                    WellLayout::Vertical,
                ),
            )
        })
        .fold(
            (0.0, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        );
    assert!(
        (best.0 - e.reference_spacing).abs() <= step,
        "maximizer at {}",
        best.0
    );
    let at_zero = npv_proxy(
        &[400.0, 300.0, 400.0, 300.0],
        &field,
        &e,
        WellLayout::Vertical,
    );
    assert_eq!(at_zero, -2.0 * e.well_cost);
}

#[test]
fn shifted_sphere_closed_form() {
    let p = ShiftedSphere::new(12, 20, 1.0, 5).unwrap();
    let mut rng = ensemble_cma::seed::stream(5, &[1]);
    for _ in 0..100 {
        let x: Vec<f64> = (0..12)
            .map(|_| rand::Rng::gen_range(&mut rng, -3.0..3.0))
            .collect();
        let brute = p.ensemble_mean(&x).unwrap();
        let closed = p.closed_form_mean(&x);
        assert!(
            (brute - closed).abs() <= 1e-12 * closed.abs(),
            "{brute} vs {closed}"
        );
    }
    let at_opt = p.ensemble_mean(p.centroid()).unwrap();
    assert!((at_opt - p.optimum_value()).abs() <= 1e-12 * p.mean_spread());
}

#[test]
fn single_realization_optimum_is_its_shift() {
    let p = ShiftedSphere::new(5, 1, 2.0, 9).unwrap();
    assert_eq!(p.centroid(), p.shifts()[0].as_slice());
    assert_eq!(p.mean_spread(), 0.0);
}

#[test]
fn zero_log_std_gives_a_constant_field() {
    let params = FieldParams {
        log_std: 0.0,
        ..FieldParams::default()
    };
    let f = generate_field(&params, 1, 1).unwrap();
    assert!(f.values.iter().all(|&v| v == params.log_mean.exp()));
}

#[test]
fn log_field_standard_deviation() {
    let params = FieldParams {
        nx: 190,
        ny: 280,
        log_std: 1.0,
        ..FieldParams::default()
    };
    let f = generate_field(&params, 3, 1).unwrap();
    assert_eq!((f.nx, f.ny, f.values.len()), (190, 280, 190 * 280));
    assert!(f.values.iter().all(|&v| v > 0.0));
    let logs: Vec<f64> = f.values.iter().map(|v| v.ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let std = (logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((std - 1.0).abs() <= 0.15, "log std {std}");
}

#[test]
fn realizations_differ() {
    let params = FieldParams::default();
    let a = generate_field(&params, 3, 1).unwrap();
    let b = generate_field(&params, 3, 2).unwrap();
    let diff = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff > 0.0);
    assert_eq!(a, generate_field(&params, 3, 1).unwrap());
}

#[test]
fn realization_ids_are_checked() {
    assert!(proxy().evaluate(&[0.0; 4], 0).is_err());
    assert!(proxy().evaluate(&[0.0; 4], 21).is_err());
    let s = ShiftedSphere::new(2, 3, 1.0, 0).unwrap();
    assert!(s.evaluate(&[0.0; 2], 4).is_err());
}
