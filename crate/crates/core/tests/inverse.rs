use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trapezoid_spectra::config::Tolerances;
use trapezoid_spectra::fem::{rectangle_exact_spectrum, Method};
use trapezoid_spectra::geometry::forward_invariants;
use trapezoid_spectra::inverse::{
    decide_case, end_to_end_reconstruct, level_curve, reconstruct_from_alhb, reconstruct_from_aqbc,
    ReconstructOptions, ReconstructionPath,
};
use trapezoid_spectra::traces::{Detection, WavePeak};
use trapezoid_spectra::{BoundaryCondition, Error, SpectrumData, TrapezoidSpec};

fn rel(x: f64, y: f64) -> f64 {
    ((x - y) / y).abs()
}

fn params(t: &TrapezoidSpec) -> [f64; 4] {
    [t.b(), t.h(), t.alpha(), t.beta()]
}

prop_compose! {
    fn trapezoid()(b in 0.1..4.0f64, h in 0.1..4.0f64, x in 0.05..FRAC_PI_2, y in 0.05..FRAC_PI_2) -> TrapezoidSpec {
        TrapezoidSpec::new(b, h, x.max(y), x.min(y)).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn alhb_round_trip(t in trapezoid()) {
        let r = reconstruct_from_alhb(t.area(), t.perimeter(), t.h(), t.b()).unwrap();
        for (x, y) in params(&r).into_iter().zip(params(&t)) {
            prop_assert!(rel(x, y) < 1e-9, "{:?} vs {:?}", params(&r), params(&t));
        }
    }

    #[test]
    fn aqbc_round_trip(t in trapezoid().prop_filter("non-right", |t| t.alpha() < FRAC_PI_2 - 1e-3)) {
        let inv = forward_invariants(&t);
        let c = inv.amplitude.unwrap().value;
        let r = reconstruct_from_aqbc(inv.area.value, inv.q.value, t.b(), c).unwrap();
        for (x, y) in params(&r).into_iter().zip(params(&t)) {
            prop_assert!(rel(x, y) < 1e-8, "{:?} vs {:?}", params(&r), params(&t));
        }
    }

    #[test]
    fn rectangles_never_take_a_top_edge_path(w in 0.1..5.0f64, hgt in 0.1..5.0f64, order in -2.0..2.0f64) {
        let inv = forward_invariants(&TrapezoidSpec::rectangle(w, hgt).unwrap());
        let peak = WavePeak {
            t0: 2.0 * w.min(hgt),
            k_grid: (20.0, 40.0, 1.0),
            order_estimate: Some(order),
            amplitude_estimate: Some(1.0),
            window_width: 0.2,
            fit_r2: 1.0,
            scan_value: 1.0,
            detection: Detection::Level,
        };
        let plan = decide_case(&inv, &[peak], &Tolerances::default()).unwrap();
        prop_assert_eq!(plan.path, ReconstructionPath::Rectangle);
    }
}

#[test]
fn amplitude_increases_along_level_curves() {
    for q in [0.82, 0.9, 1.0, 1.3, 2.0, 5.0, 20.0] {
        let curve = level_curve(q).unwrap();
        let hi = FRAC_PI_2 - 1e-6;
        let n = 1000;
        let mut prev = curve.amplitude(curve.alpha0).unwrap();
        for i in 1..=n {
            let a = curve.alpha0 + (hi - curve.alpha0) * i as f64 / n as f64;
            let c = curve.amplitude(a).unwrap();
            assert!(c > prev, "q = {q}: C({a}) = {c} after {prev}");
            prev = c;
        }
    }
}

/// Largest relative parameter change per unit relative change of one of
/// `(A, L, h, b)`, by central differences.
fn condition_number(t: &TrapezoidSpec) -> f64 {
    let base = [t.area(), t.perimeter(), t.h(), t.b()];
    let eps = 1e-7;
    let mut kappa: f64 = 0.0;
    for j in 0..4 {
        let mut up = base;
        let mut dn = base;
        up[j] *= 1.0 + eps;
        dn[j] *= 1.0 - eps;
        let (Ok(ru), Ok(rd)) = (reconstruct_from_alhb(up[0], up[1], up[2], up[3]), reconstruct_from_alhb(dn[0], dn[1], dn[2], dn[3]))
        else {
            return f64::INFINITY;
        };
        for ((u, d), y) in params(&ru).into_iter().zip(params(&rd)).zip(params(t)) {
            kappa = kappa.max(((u - d) / (2.0 * eps * y)).abs());
        }
    }
    kappa
}

// The map (A, L, h, b) -> parameters has condition number above 3 on every
// sampled trapezoid and far above it when L - 2B is small or the base angles
// are close, so a flat 1e-2 response to 1e-3 noise is not attainable. The
// fraction that meets it is reported; where the linearization is valid the
// sampled error must stay within twice the first-order bound.
#[test]
fn noise_stability_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(592);
    let (mut samples, mut within, mut linear) = (0, 0, 0);
    while samples < 1000 {
        let (x, y) = (rng.random_range(0.05..FRAC_PI_2), rng.random_range(0.05..FRAC_PI_2));
        let (alpha, beta) = (x.max(y), x.min(y));
        if alpha.min(FRAC_PI_2 - beta) < 0.1 {
            continue;
        }
        let t = TrapezoidSpec::new(rng.random_range(0.2..3.0), rng.random_range(0.2..3.0), alpha, beta).unwrap();
        samples += 1;
        let kappa = condition_number(&t);
        let mut worst: f64 = 0.0;
        for _ in 0..4 {
            let mut p = |v: f64| v * (1.0 + rng.random_range(-1e-3..1e-3));
            let (a, l, h, b) = (p(t.area()), p(t.perimeter()), p(t.h()), p(t.b()));
            worst = match reconstruct_from_alhb(a, l, h, b) {
                Ok(r) => params(&r).into_iter().zip(params(&t)).fold(worst, |m, (u, v)| m.max(rel(u, v))),
                Err(_) => f64::INFINITY,
            };
        }
        if worst <= 1e-2 {
            within += 1;
        }
        let bound = 4e-3 * kappa;
        // near alpha = pi/2 noise can leave the domain altogether
        if bound <= 0.05 && alpha * (1.0 + 2.0 * bound) < FRAC_PI_2 {
            linear += 1;
            assert!(worst <= 2.0 * bound, "error {worst} above first-order bound {bound} at {:?}", params(&t));
        }
    }
    println!("noise 1e-3: {within}/{samples} within 1e-2, {linear} checked against the first-order bound");
    assert!(linear >= 100, "only {linear} samples in the linear regime");
}

#[test]
fn exact_rectangle_end_to_end() {
    let s = rectangle_exact_spectrum(1.0, 2.0, BoundaryCondition::Neumann, 4000.0).unwrap();
    let (t, diag) = end_to_end_reconstruct(&s, &ReconstructOptions::default()).unwrap();
    assert_eq!(diag.plan.path, ReconstructionPath::Rectangle);
    let (short, long) = (t.b().min(t.h()), t.b().max(t.h()));
    assert!(rel(short, 1.0) < 1e-6 && rel(long, 2.0) < 1e-6, "{short} x {long}");
    assert!((t.alpha() - FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn end_to_end_rejects_dirichlet_and_short_spectra() {
    let d = rectangle_exact_spectrum(1.0, 2.0, BoundaryCondition::Dirichlet, 2000.0).unwrap();
    assert!(end_to_end_reconstruct(&d, &ReconstructOptions::default()).is_err());

    let short = SpectrumData::from_values(BoundaryCondition::Neumann, vec![0.0, PI * PI / 4.0, PI * PI], Method::Fem).unwrap();
    match end_to_end_reconstruct(&short, &ReconstructOptions::default()) {
        Err(e) => assert!(matches!(e.root(), Error::Tail { .. }), "{e}"),
        Ok(_) => panic!("three eigenvalues cannot support a heat fit"),
    }
}
