mod common;

use std::f64::consts::PI;

use common::model;
use dirac_lab::closed_form::{conformal_factor, cutoff, graft_test_spinor, q_of_eps, radial_moment, sphere_area};
use dirac_lab::{calibrate_constants, standard_bubble, BubbleParams, Constants};
use proptest::prelude::*;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫₀^∞ g(r) dr` through `r = u/(1-u)`.
fn half_line(g: impl Fn(f64) -> f64) -> f64 {
    let f = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let r = u / (1.0 - u);
        g(r) / ((1.0 - u) * (1.0 - u))
    };
    let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
    let whole = (fa + 4.0 * fm + fb) / 6.0;
    simpson(&f, 0.0, 1.0, fa, fm, fb, whole, 1e-14, 40)
}

#[test]
fn radial_moments_against_quadrature() {
    for (n, p, exact) in [(3, 3, PI / 16.0), (3, 2, PI / 4.0), (4, 4, 1.0 / 12.0), (4, 3, 0.25)] {
        let q = half_line(|r| r.powi(n as i32 - 1) * (1.0 + r * r).powi(-(p as i32)));
        assert!((q - exact).abs() < 1e-10, "n={n} p={p}: {q}");
        assert!((radial_moment(n, p) - exact).abs() < 1e-13);
    }
}

#[test]
fn sphere_areas() {
    for (k, exact) in [(1, 2.0 * PI), (2, 4.0 * PI), (3, 2.0 * PI * PI), (4, 8.0 * PI * PI / 3.0)] {
        assert!((sphere_area(k) - exact).abs() < 1e-13 * exact, "k={k}");
    }
}

#[test]
fn constants_at_exact_eigen_constant() {
    let c3 = Constants::from_d(3, 2.0, 0.0);
    assert_eq!(c3.a_n, 6.0);
    assert!((c3.c_n - 1.5).abs() < 1e-15);
    assert!((c3.ybar - 9.0 * PI * PI / 8.0).abs() < 1e-12);
    assert!((c3.q_coef - 6.0 * PI * PI).abs() < 1e-12);
    assert!((q_of_eps(0.25, &c3) - 1.5 * PI * PI).abs() < 1e-12);

    let c4 = Constants::from_d(4, 8.0, 0.0);
    assert_eq!(c4.a_n, 32.0);
    assert!((c4.c_n - 2.0).abs() < 1e-14);
    assert!((c4.ybar - 16.0 * PI * PI / 3.0).abs() < 1e-11);
    assert!((c4.q_coef - 16.0 * PI * PI).abs() < 1e-11);
}

#[test]
fn consistency_relation_is_off_by_four() {
    // the two sides differ by exactly 4 for every n
    for (n, d) in [(3usize, 2.0), (4, 8.0), (5, 48.0)] {
        let c = Constants::from_d(n, d, 0.0);
        let nf = n as f64;
        let lhs = c.a_n.powf(nf / (nf - 1.0)) * sphere_area(n);
        let rhs = 2f64.powi(n as i32) * c.ybar * c.c_n.powf(-1.0 / (nf - 1.0));
        assert!((lhs / rhs - 4.0).abs() < 1e-12, "n={n}: {}", lhs / rhs);
        assert!((c.consistency_residual - (lhs - rhs)).abs() < 1e-9 * lhs);
    }
    assert!((Constants::from_d(3, 2.0, 0.0).consistency_residual - 217.6).abs() < 0.1);
}

#[test]
fn calibrated_eigen_constant_n3() {
    let c = calibrate_constants(&model(3, 30.0, 96)).unwrap();
    assert!((c.d - 2.0).abs() < 1e-3 * 2.0, "{}", c.d);
    // frozen from a reference run
    assert!((c.d - 1.99910).abs() < 2e-5, "{}", c.d);
    assert!(c.fit_deviation < 1e-3);
    assert!((c.ybar - 9.0 * PI * PI / 8.0).abs() < 2e-3 * c.ybar);
}

#[test]
fn bubble_density_matches_closed_form() {
    for (n, l, m) in [(3, 10.0, 16), (4, 8.0, 8)] {
        let md = model(n, l, m);
        let a_n = Constants::from_d(n, if n == 3 { 2.0 } else { 8.0 }, 0.0).a_n;
        let psi = standard_bubble(&md, &BubbleParams::centered(n, md.spin_dim(), 1.0, a_n.sqrt())).unwrap();
        let f = conformal_factor(&md);
        for (rho, fv) in psi.density().values().iter().zip(f.values()) {
            let want = a_n * fv.powi(n as i32 - 1);
            assert!((rho - want).abs() < 1e-12 * want);
        }
    }
}

#[test]
fn graft_support_and_core() {
    let md = model(3, 12.0, 32);
    let (eps, delta) = (0.5, 1.5);
    let g = graft_test_spinor(&md, eps, delta, 2.0).unwrap();
    let b = standard_bubble(&md, &BubbleParams::centered(3, 2, eps, 2.0)).unwrap();
    let r2 = md.grid().radius_squared();
    let (gd, bd) = (g.density(), b.density());
    for ((gv, bv), rr) in gd.values().iter().zip(bd.values()).zip(&r2) {
        let r = rr.sqrt();
        if r >= 2.0 * delta {
            assert_eq!(*gv, 0.0);
        } else if r <= delta {
            assert!((gv - bv).abs() <= 1e-15 * bv);
        } else {
            assert!(*gv <= *bv);
        }
    }
    assert!(graft_test_spinor(&md, 0.5, 3.0, 1.0).is_err());
    assert!(graft_test_spinor(&md, 0.0, 1.0, 1.0).is_err());
}

#[test]
fn graft_norm_against_radial_quadrature() {
    let md = model(3, 10.0, 64);
    let (eps, delta, amp) = (1.0, 2.0, 6f64.sqrt());
    let g = graft_test_spinor(&md, eps, delta, amp).unwrap();
    let grid_norm = g.l2_norm().powi(2);
    let exact = 4.0 * PI
        * half_line(|r| {
            let eta = cutoff(r, delta);
            r * r * eta * eta * amp * amp / eps.powi(2) * (1.0 + r * r / (eps * eps)).powi(-2)
        });
    assert!((grid_norm - exact).abs() < 1e-6 * exact, "{grid_norm} vs {exact}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bubble_dilation_covariance(sigma in 0.3f64..3.0, amp in 0.5f64..3.0) {
        let md = model(3, 10.0, 16);
        let psi = standard_bubble(&md, &BubbleParams::centered(3, 2, sigma, amp)).unwrap();
        let r2 = md.grid().radius_squared();
        for (rho, rr) in psi.density().values().iter().zip(&r2) {
            let want = amp * amp * sigma.powi(-2) * (1.0 + rr / (sigma * sigma)).powi(-2);
            prop_assert!((rho - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn cutoff_is_monotone_and_bounded(delta in 0.1f64..4.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (cl, ch) = (cutoff(lo * delta, delta), cutoff(hi * delta, delta));
        prop_assert!((0.0..=1.0).contains(&cl) && (0.0..=1.0).contains(&ch));
        prop_assert!(ch <= cl);
        prop_assert_eq!(cutoff(0.99 * delta, delta), 1.0);
        prop_assert_eq!(cutoff(2.0 * delta, delta), 0.0);
    }
}
