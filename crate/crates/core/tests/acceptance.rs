//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trapezoid_spectra::billiards::{shortest_orbit_check, SearchOptions};
use trapezoid_spectra::diffraction::{c_alpha_beta, c_beta, keller_coefficient, keller_coefficient_forward};
use trapezoid_spectra::fem::{
    rectangle_double_spectrum, rectangle_exact_spectrum, BoundaryCondition, EigenOptions, EigenRequest,
    RichardsonPair,
};
use trapezoid_spectra::geometry::{angle_invariant_q, forward_invariants, AmplitudeConstant, TrapezoidSpec};
use trapezoid_spectra::inverse::{
    end_to_end_reconstruct, monotonicity_scan, reconstruct_from_alhb, reconstruct_from_aqbc, ReconstructOptions,
};
use trapezoid_spectra::traces::{
    compare_dn_at, detect_peaks, estimate_order, fit_heat_invariants, geometric_grid, heat_trace, max_complete_k,
    spectral_union_check, wave_transform, PeakOptions, SpectralMeasure,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn max_param_error(t: &TrapezoidSpec, r: &TrapezoidSpec) -> f64 {
    [(r.b(), t.b()), (r.h(), t.h()), (r.alpha(), t.alpha()), (r.beta(), t.beta())]
        .iter()
        .map(|(x, y)| rel(*x, *y))
        .fold(0.0, f64::max)
}

fn c1_closed_forms() -> Outcome {
    let q = angle_invariant_q(FRAC_PI_2, FRAC_PI_2).map_err(|e| e.to_string())?;
    let q_exact = q == 8.0 / (PI * PI);
    let cab = c_alpha_beta(PI / 3.0, PI / 3.0).map_err(|e| e.to_string())?;
    let cb = c_beta(PI / 3.0).map_err(|e| e.to_string())?;
    let e_ab = (cab - 9.0 / (4.0 * PI * PI)).abs();
    let e_b = (cb - 3.0 / (2.0 * PI)).abs();
    let mut e_s: f64 = 0.0;
    for alpha in [0.3, 0.7, PI / 3.0, 1.2, 1.45] {
        let delta = 2.0 * PI - 2.0 * alpha;
        let forward = keller_coefficient_forward(delta).map_err(|e| e.to_string())?;
        let closed = -(PI * PI / delta).cos() / (PI * PI / delta).sin() / delta;
        let limit = keller_coefficient(delta, 1e-6).map_err(|e| e.to_string())?;
        e_s = e_s.max((forward - closed).abs()).max((forward - limit).abs());
    }
    check(
        q_exact && e_ab <= 1e-12 && e_b <= 1e-12 && e_s <= 1e-10,
        format!("q exact: {q_exact}; |C_ab err| {e_ab:.1e}; |C_b err| {e_b:.1e}; |S(0) err| {e_s:.1e}"),
    )
}

fn c2_monotonicity() -> Outcome {
    let r = monotonicity_scan(10_000).map_err(|e| e.to_string())?;
    check(
        r.passed(),
        format!(
            "min G' {:.3e}; min log-slope on [pi/2, pi) {:.4} (>= {:.4}); on (0, pi/3] {:.4} (>= 0.09)",
            r.min_g_prime,
            r.min_log_slope_upper,
            8.0 / (3.0 * PI),
            r.min_log_slope_lower
        ),
    )
}

fn c3_fem_square() -> Outcome {
    let t = TrapezoidSpec::rectangle(1.0, 1.0).unwrap();
    let opts = EigenOptions::default();
    let mut worst: f64 = 0.0;
    for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
        let exact = rectangle_exact_spectrum(1.0, 1.0, bc, 1e4).unwrap();
        let pair =
            RichardsonPair::compute(&t, 128, bc, EigenRequest::Count(20), &opts).map_err(|e| e.to_string())?;
        let x = pair.extrapolated().map_err(|e| e.to_string())?;
        for (v, e) in x.eigenvalues().iter().zip(&exact.eigenvalues()[..20]) {
            let err = if *e == 0.0 { v.abs() } else { rel(*v, *e) };
            worst = worst.max(err);
        }
    }
    check(worst <= 0.005, format!("max relative error over 20 N + 20 D eigenvalues {worst:.2e}"))
}

fn c4_heat() -> Outcome {
    let ts = geometric_grid(0.005, 0.05, 20);
    let mut msgs = Vec::new();
    let mut ok = true;
    for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
        let s = rectangle_exact_spectrum(1.0, 1.0, bc, 4e4).unwrap();
        let v = heat_trace(&s, &ts, 1e-6).map_err(|e| e.to_string())?;
        let f = fit_heat_invariants(&v, &ts, bc, 1e10).map_err(|e| e.to_string())?;
        let r = f.recovered;
        // the sign branch shows in the raw coefficient; L itself is positive
        let sign_ok = f.c_mh.signum() == bc.sign();
        ok &= rel(r.area, 1.0) <= 0.01 && rel(r.perimeter, 4.0) <= 0.02 && sign_ok;
        if bc == BoundaryCondition::Neumann {
            ok &= rel(r.corner_sum, 0.25) <= 0.1;
        }
        msgs.push(format!("{bc}: A {:.5} L {:.5} c0 {:.5} sign ok {sign_ok}", r.area, r.perimeter, r.corner_sum));
    }
    check(ok, msgs.join("; "))
}

fn c5_union() -> Outcome {
    let mut ok = true;
    for (a, c) in [(1.0, 1.0), (1.0, 2.0)] {
        let lmax = 1e4;
        let d = rectangle_exact_spectrum(a, c, BoundaryCondition::Dirichlet, lmax).unwrap();
        let n = rectangle_exact_spectrum(a, c, BoundaryCondition::Neumann, lmax).unwrap();
        let dbl = rectangle_double_spectrum(a, c, lmax).unwrap();
        ok &= spectral_union_check(&d, &n, &dbl, lmax, 1e-12);
    }
    check(ok, "D u N equals the doubled spectrum below 1e4 for 1x1 and 1x2".into())
}

fn c6_wave_peaks() -> Outcome {
    let s = rectangle_exact_spectrum(1.0, 2.0, BoundaryCondition::Neumann, 1e4).unwrap();
    let width = 0.15;
    let k_hi = (max_complete_k(s.lambda_complete(), width, 1e-6) * 2.0).floor() / 2.0;
    let k_grid = trapezoid_spectra::config::octave_k_grid(k_hi, 0.5);
    let peaks = detect_peaks(&s, (1.0, 6.0), width, k_hi, &k_grid, &PeakOptions::default())
        .map_err(|e| e.to_string())?;
    let found = |t: f64| peaks.iter().any(|p| (p.t0 - t).abs() <= width / 2.0);
    let all = [2.0, 4.0, 2.0 * 5f64.sqrt()].iter().all(|t| found(*t));
    let ks = trapezoid_spectra::config::k_grid(30.0, 64.0, 1.0);
    let w = wave_transform(&s, 4.0, width, &ks, 1e-6).map_err(|e| e.to_string())?;
    let order = estimate_order(&w, &ks).map_err(|e| e.to_string())?;
    let peak_ts: Vec<String> = peaks.iter().map(|p| format!("{:.3}", p.t0)).collect();
    check(
        all && (order.a - 0.5).abs() <= 0.2,
        format!("peaks at [{}]; k-exponent at t=4: {:.3}", peak_ts.join(", "), order.a),
    )
}

fn c8_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut random_trapezoid = |acute: bool| loop {
        let b = rng.random_range(0.3..3.0);
        let h = rng.random_range(0.3..3.0);
        let top = if acute { FRAC_PI_2 - 1e-3 } else { FRAC_PI_2 };
        let x: f64 = rng.random_range(0.15..top);
        let y: f64 = rng.random_range(0.15..top);
        if let Ok(t) = TrapezoidSpec::new(b, h, x.max(y), x.min(y)) {
            if !t.is_rectangle() {
                return t;
            }
        }
    };
    let mut e1: f64 = 0.0;
    for _ in 0..500 {
        let t = random_trapezoid(false);
        let r = reconstruct_from_alhb(t.area(), t.perimeter(), t.h(), t.b()).map_err(|e| e.to_string())?;
        e1 = e1.max(max_param_error(&t, &r));
    }
    let mut e2: f64 = 0.0;
    for _ in 0..500 {
        let t = random_trapezoid(true);
        let inv = forward_invariants(&t);
        let c = inv.amplitude.ok_or("missing amplitude")?.value;
        let r = reconstruct_from_aqbc(t.area(), inv.q.value, t.b(), c).map_err(|e| format!("{t}: {e}"))?;
        e2 = e2.max(max_param_error(&t, &r));
    }
    let mut e3: f64 = 0.0;
    for _ in 0..500 {
        let beta: f64 = rng.random_range(0.15..FRAC_PI_2 - 1e-3);
        let t = TrapezoidSpec::new(rng.random_range(0.3..3.0), rng.random_range(0.3..3.0), FRAC_PI_2, beta).unwrap();
        let q = forward_invariants(&t).q.value;
        let r = reconstruct_from_aqbc(t.area(), q, t.b(), AmplitudeConstant::CBetaRightAngle(0.0))
            .map_err(|e| e.to_string())?;
        e3 = e3.max(max_param_error(&t, &r));
    }
    check(
        e1 <= 1e-9 && e2 <= 1e-8 && e3 <= 1e-10,
        format!("max relative error: ALhb {e1:.1e}, AqbC {e2:.1e}, right angle {e3:.1e}"),
    )
}

fn c10_shortest() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let opts = SearchOptions::default();
    let mut failures = Vec::new();
    let mut corner_hits = 0;
    for _ in 0..50 {
        let t = loop {
            let x: f64 = rng.random_range(0.2..FRAC_PI_2);
            let y: f64 = rng.random_range(0.2..FRAC_PI_2);
            if let Ok(t) =
                TrapezoidSpec::new(rng.random_range(0.3..2.0), rng.random_range(0.3..2.0), x.max(y), x.min(y))
            {
                break t;
            }
        };
        let r = shortest_orbit_check(&t, &opts).map_err(|e| e.to_string())?;
        corner_hits += r.corner_hits;
        if !r.pass {
            failures.push(format!("{t}: {:?}", r.found_lengths));
        }
    }
    check(
        failures.is_empty(),
        format!("{} of 50 searches found an orbit below min(2h, 2b); corner hits {corner_hits}; {failures:?}", failures.len()),
    )
}

/// FEM spectra of `(b, h, alpha, beta) = (1, 2, pi/3, pi/3)` on meshes 128 and
/// 256, shared by the two FEM wave criteria.
struct FemPairs {
    neumann: RichardsonPair,
    dirichlet: RichardsonPair,
}

fn fem_pairs() -> Result<FemPairs, String> {
    let t = TrapezoidSpec::new(1.0, 2.0, PI / 3.0, PI / 3.0).unwrap();
    let opts = EigenOptions::default();
    let solve = |bc| {
        RichardsonPair::compute(&t, 128, bc, EigenRequest::Threshold(3300.0), &opts).map_err(|e| e.to_string())
    };
    Ok(FemPairs { neumann: solve(BoundaryCondition::Neumann)?, dirichlet: solve(BoundaryCondition::Dirichlet)? })
}

fn c7_dn_asymmetry(fem: &FemPairs) -> Outcome {
    let (n, d) = (&fem.neumann, &fem.dirichlet);
    let width = 0.3;
    let ks = trapezoid_spectra::config::k_grid(20.0, 38.0, 1.0);
    let trust = n.lambda_max_trust().min(d.lambda_max_trust());
    let at2 = compare_dn_at(n, d, 2.0, width, &ks, 1e-6).map_err(|e| e.to_string())?;
    let at4 = compare_dn_at(n, d, 4.0, width, &ks, 1e-6).map_err(|e| e.to_string())?;
    let i35 = ks.iter().position(|k| *k == 35.0).unwrap();
    let r35 = at2.ratio[i35];
    let (lo4, hi4) = at4.ratio.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    check(
        trust >= 38.0 * 38.0 && r35 > 3.0 && at2.is_increasing() && lo4 >= 0.8 && hi4 <= 1.25,
        format!(
            "trusted to {trust:.0}; t0=2: ratio(35) {r35:.2}, trend slope {:.3}; t0=4: ratio in [{lo4:.3}, {hi4:.3}]",
            at2.trend_slope
        ),
    )
}

fn c9_end_to_end(fem: &FemPairs) -> Outcome {
    let truth = TrapezoidSpec::new(1.0, 2.0, PI / 3.0, PI / 3.0).unwrap();
    let opts = ReconstructOptions::default();
    let (r, diag) = end_to_end_reconstruct(&fem.neumann, &opts).map_err(|e| e.to_string())?;
    let e_fem = max_param_error(&truth, &r);
    let rect = TrapezoidSpec::rectangle(1.0, 2.0).unwrap();
    let s = rectangle_exact_spectrum(1.0, 2.0, BoundaryCondition::Neumann, 1e4).unwrap();
    let (rr, _) = end_to_end_reconstruct(&s, &opts).map_err(|e| e.to_string())?;
    let e_rect = max_param_error(&rect, &rr);
    check(
        e_fem <= 0.05 && e_rect <= 1e-6,
        format!(
            "FEM: {:?} path, recovered {r}, max relative error {e_fem:.2e}; exact rectangle error {e_rect:.1e}",
            diag.plan.path
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, budget: Duration, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, msg) = match outcome {
            Ok(m) => (elapsed <= budget, m),
            Err(m) => (false, m),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {id}: {msg} [{:.1} s of {} s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    };
    let secs = Duration::from_secs;
    report(1, secs(1), &c1_closed_forms);
    report(2, secs(1), &c2_monotonicity);
    report(3, secs(120), &c3_fem_square);
    report(4, secs(30), &c4_heat);
    report(5, secs(10), &c5_union);
    report(6, secs(60), &c6_wave_peaks);

    let start = Instant::now();
    let fem = fem_pairs();
    let solve_time = start.elapsed();
    println!("(FEM spectra for criteria 7 and 9: {:.1} s, counted against both)", solve_time.as_secs_f64());
    let with_fem = |f: fn(&FemPairs) -> Outcome| {
        let fem = &fem;
        move || -> Outcome { fem.as_ref().map_err(|e| e.clone()).and_then(f) }
    };
    let budget = secs(1200).saturating_sub(solve_time);
    report(7, budget, &with_fem(c7_dn_asymmetry));
    report(8, secs(30), &c8_round_trips);
    report(9, budget, &with_fem(c9_end_to_end));
    report(10, secs(300), &c10_shortest);

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
