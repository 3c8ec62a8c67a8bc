use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use breather_lab::breather::{
    boundary_traces, breather_jet, identity_residuals, mass_primitive, primitive_jet, slope_closed_form,
};
use breather_lab::{BreatherParams, Shifts};

/// Direct transcription of the closed form, independent of the jet code.
fn closed_form(p: &BreatherParams, x: f64, t: f64) -> f64 {
    let (a, b) = (p.alpha(), p.beta());
    let y1 = x + p.delta() * t + p.x1();
    let y2 = x + p.gamma() * t + p.x2();
    let sech = 1.0 / (b * y2).cosh();
    let r = b / a;
    let num = (a * y1).cos() - r * (a * y1).sin() * (b * y2).tanh();
    let den = 1.0 + (r * (a * y1).sin() * sech).powi(2);
    2.0 * SQRT_2 * b * sech * num / den
}

/// Richardson-extrapolated central difference.
fn richardson(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Adaptive Simpson quadrature.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

#[test]
fn value_at_the_origin_is_two_root_two() {
    let p = BreatherParams::centered(1.0, 1.0).unwrap();
    assert!((breather_jet(&p, 0.0, 0.0).value - 2.0 * SQRT_2).abs() < 1e-15);
}

#[test]
fn value_matches_the_transcribed_closed_form() {
    for (a, b, x1, x2) in [(1.0, 1.0, 0.0, 0.0), (2.0, 1.0, 0.3, -1.0), (3.0, 1.0, 0.0, 30.0), (1.0, 2.0, -0.7, 2.5)] {
        let p = BreatherParams::new(a, b, x1, x2).unwrap();
        for x in [-40.0, -31.2, -5.0, -1.3, 0.0] {
            for t in [0.0, 0.4, 1.1] {
                let j = breather_jet(&p, x, t).value;
                let c = closed_form(&p, x, t);
                assert!((j - c).abs() <= 1e-13 * c.abs().max(1e-3), "{a} {b} {x} {t}: {j} vs {c}");
            }
        }
    }
}

#[test]
fn far_tail_respects_the_envelope() {
    let p = BreatherParams::new(3.0, 1.0, 0.0, 30.0).unwrap();
    let v = breather_jet(&p, 0.0, 0.0).value;
    assert!(v.abs() <= 2.0 * SQRT_2 * 2.0 * (-30.0f64).exp());
}

#[test]
fn every_jet_entry_matches_richardson_differences() {
    let p = BreatherParams::centered(2.0, 1.0).unwrap();
    let (x, t) = (-1.3, 0.7);
    let j = breather_jet(&p, x, t);
    let h = 1e-3;
    let vx = |k: usize| move |s: f64| breather_jet(&p, s, t).dx[k];
    let val = |s: f64| breather_jet(&p, s, t).value;
    assert!(rel(j.dx[1], richardson(val, x, h)) < 1e-6);
    for k in 2..=4 {
        let fd = richardson(vx(k - 1), x, h);
        assert!(rel(j.dx[k], fd) < 1e-6, "dx[{k}] {} vs {fd}", j.dx[k]);
    }
    let dt = richardson(|s| breather_jet(&p, x, s).value, t, h);
    assert!(rel(j.dt, dt) < 1e-6);
    let dxt = richardson(|s| breather_jet(&p, x, s).dx[1], t, h);
    assert!(rel(j.dxt, dxt) < 1e-6);
    let d1 = richardson(|s| breather_jet(&p.with_shifts(s, p.x2()), x, t).value, p.x1(), h);
    assert!(rel(j.dx1, d1) < 1e-6);
    let d2 = richardson(|s| breather_jet(&p.with_shifts(p.x1(), s), x, t).value, p.x2(), h);
    assert!(rel(j.dx2, d2) < 1e-6);
}

#[test]
fn primitive_special_values_and_slope() {
    let p = BreatherParams::new(1.0, 1.0, FRAC_PI_2, 0.0).unwrap();
    assert!((primitive_jet(&p, 0.0, 0.0).value - PI * SQRT_2 / 2.0).abs() < 1e-14);
    let q = BreatherParams::centered(2.0, 1.0).unwrap();
    // sin(α y₁) = 0 at y₁ = π/α.
    let x = PI / 2.0 - q.delta() * 0.3;
    assert!(primitive_jet(&q, x, 0.3).value.abs() < 1e-14);
    let diff = primitive_jet(&q, -0.4, 0.25).dx[1] - breather_jet(&q, -0.4, 0.25).value;
    assert!(diff.abs() < 1e-12);
    let dt = richardson(|s| primitive_jet(&q, -0.4, s).value, 0.25, 1e-3);
    assert!(rel(primitive_jet(&q, -0.4, 0.25).dt, dt) < 1e-6);
}

#[test]
fn mass_primitive_matches_adaptive_quadrature() {
    let p = BreatherParams::centered(2.0, 1.0).unwrap();
    let f = |x: f64| 0.5 * breather_jet(&p, x, 0.0).value.powi(2);
    let q = adaptive_simpson(&f, -60.0, 0.0, 1e-13);
    assert!((mass_primitive(&p, 0.0, 0.0) - q).abs() < 1e-8, "{} vs {q}", mass_primitive(&p, 0.0, 0.0));
}

#[test]
fn mass_primitive_limits() {
    for (a, b) in [(1.0, 1.0), (3.0, 1.0), (1.0, 2.0)] {
        let p = BreatherParams::centered(a, b).unwrap();
        assert!(mass_primitive(&p, -80.0, 0.3).abs() < 1e-12);
        assert!((mass_primitive(&p, 80.0, 0.3) - 4.0 * b).abs() < 1e-12);
        assert!((mass_primitive(&p, 1e6, 0.3) - 4.0 * b).abs() < 1e-12);
        let f = |x: f64| 0.5 * breather_jet(&p, x, 0.3).value.powi(2);
        let total = adaptive_simpson(&f, -60.0, 60.0, 1e-13);
        assert!((total - 4.0 * b).abs() < 1e-8);
    }
}

#[test]
fn identity_residuals_at_sample_points() {
    let p = BreatherParams::centered(3.0, 1.0).unwrap();
    assert!(identity_residuals(&p, -5.0, 0.3).max_abs() < 1e-9);
    let q = BreatherParams::centered(1.0, 1.0).unwrap();
    assert!(identity_residuals(&q, 0.0, 0.0).r_g.abs() < 1e-10);
}

#[test]
fn traces_decay_with_distance() {
    let p = BreatherParams::centered(3.0, 1.0).unwrap();
    let tr = boundary_traces(&p, Shifts::at_distance(30.0), 0.0);
    assert!(tr.max_abs < 100.0 * (-15.0f64).exp());
    let near = boundary_traces(&p, Shifts::at_distance(20.0), 0.0).max_abs;
    let far = boundary_traces(&p, Shifts::at_distance(40.0), 0.0).max_abs;
    assert!(far / near <= 2.0 * (-10.0f64).exp(), "{far} / {near}");
}

#[test]
fn slope_trace_matches_the_expanded_formula() {
    for (a, b, l, t) in [(3.0, 1.0, 10.0, 0.0), (2.0, 1.0, 8.0, 0.3), (1.0, 1.0, 5.0, 0.1)] {
        let p = BreatherParams::centered(a, b).unwrap();
        let s = Shifts::new(0.2, -0.4, l);
        let tr = boundary_traces(&p, s, t);
        let h1 = slope_closed_form(&p.shifted(s), 0.0, t);
        assert!((tr.trace[0][1] - h1).abs() < 1e-10 * h1.abs().max(1e-3), "{} vs {h1}", tr.trace[0][1]);
    }
}
