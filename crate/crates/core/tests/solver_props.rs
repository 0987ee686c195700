mod common;

use common::{localized_spinor, model, rng};
use dirac_lab::energy::energy;
use dirac_lab::closed_form::graft_test_spinor;
use dirac_lab::solver::{loglog_slope, nehari_scale, nehari_sign_changes, reduced_energy};
use dirac_lab::{ground_state, tau_solve, Branch, Constants, LabError, SolverConfig};
use proptest::prelude::*;

#[test]
fn tau_of_zero_is_zero() {
    let md = model(3, 8.0, 8);
    let lambda = 0.5 * md.grid().fundamental();
    let sol = tau_solve(&md, &md.zeros(), lambda, &SolverConfig::default(), None).unwrap();
    assert!(sol.h.values().iter().all(|z| z.norm() == 0.0));
    assert_eq!(sol.energy.total, 0.0);
}

#[test]
fn tau_is_cubic_at_small_amplitude() {
    let md = model(3, 10.0, 16);
    let lambda = 0.5 * md.grid().fundamental();
    let mut r = rng(21);
    let base = localized_spinor(&md, &mut r, 1.0, 2.0);
    let pp = md.spectral_project(&base, lambda, Branch::Plus).unwrap();
    let cfg = SolverConfig { tol_tau: 1e-16, ..SolverConfig::default() };
    let amps = [1e-3, 2e-3, 4e-3];
    let norms: Vec<f64> = amps
        .iter()
        .map(|&a| tau_solve(&md, &pp.scale(a), lambda, &cfg, None).unwrap().h.l2_norm())
        .collect();
    let slope = loglog_slope(&amps, &norms).unwrap();
    assert!((slope - 3.0).abs() < 1e-2, "{slope}");
}

#[test]
fn nehari_scale_is_equivariant_and_unique() {
    let md = model(3, 10.0, 16);
    let lambda = 0.5 * md.grid().fundamental();
    let cfg = SolverConfig::default();
    let mut r = rng(5);
    let psi = localized_spinor(&md, &mut r, 1.0, 2.0);
    let p1 = nehari_scale(&md, &psi, lambda, &cfg).unwrap();
    let p3 = nehari_scale(&md, &psi.scale(3.0), lambda, &cfg).unwrap();
    assert!((p3.t - p1.t / 3.0).abs() < 1e-6 * p1.t, "{} vs {}", p3.t, p1.t / 3.0);
    assert!((p3.tau.energy.total - p1.tau.energy.total).abs() < 1e-8 * p1.tau.energy.total.abs());
    let scan = SolverConfig { t_min: 0.3, t_max: 3.0, ..cfg.clone() };
    let changes = nehari_sign_changes(&md, &psi.scale(p1.t), lambda, &scan, 25).unwrap();
    assert_eq!(changes.len(), 1, "{changes:?}");
    assert!(changes[0].0 <= 1.0 && 1.0 <= changes[0].1);
}

#[test]
fn ground_state_small_grid() {
    let md = model(3, 10.0, 16);
    let lambda = 0.5 * md.grid().fundamental();
    let cfg = SolverConfig::default();
    let c = Constants::from_d(3, 2.0, 0.0);
    let init = graft_test_spinor(&md, 1.0, 2.0, c.bubble_amplitude()).unwrap();
    let rep = ground_state(&md, lambda, &cfg, &init, Some(c.ybar)).unwrap();
    assert!(rep.converged);
    assert!(rep.grad_dual < cfg.tol_outer);
    // on the Nehari set the quadratic part is twice the quartic one
    assert!((rep.energy.total - rep.energy.quartic).abs() < 1e-6 * rep.energy.total);
    assert!(rep.energy.total > 0.0 && rep.energy.total < c.ybar);
    assert_eq!(rep.below_threshold, Some(true));
    assert!((rep.t_nehari - 1.0).abs() < 1e-6);

    let again = ground_state(&md, lambda, &cfg, &init.scale(10.0), Some(c.ybar)).unwrap();
    assert!(again.converged);
    assert!((again.energy.total - rep.energy.total).abs() < 1e-6 * rep.energy.total);

    // a converged solution is its own Nehari point
    let sol = rep.solution.unwrap();
    let p = nehari_scale(&md, &sol, lambda, &cfg).unwrap();
    assert!((p.t - 1.0).abs() < 1e-5, "{}", p.t);
}

#[test]
fn ground_state_reports_non_convergence() {
    let md = model(3, 10.0, 16);
    let lambda = 0.5 * md.grid().fundamental();
    let cfg = SolverConfig { max_iter_outer: 1, ..SolverConfig::default() };
    let mut r = rng(8);
    let init = localized_spinor(&md, &mut r, 1.0, 2.0);
    let rep = ground_state(&md, lambda, &cfg, &init, None).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.below_threshold, None);
}

#[test]
fn ground_state_rejects_bad_lambda() {
    let md = model(3, 10.0, 16);
    let cfg = SolverConfig::default();
    let init = md.zeros();
    let fund = md.grid().fundamental();
    assert!(matches!(ground_state(&md, fund, &cfg, &init, None), Err(LabError::OnSpectrum { .. })));
    assert!(ground_state(&md, -0.1, &cfg, &init, None).is_err());
    assert!(ground_state(&md, 0.5 * fund, &cfg, &init, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn reduced_energy_dominates(seed in any::<u64>(), amp in 0.2f64..3.0) {
        let md = model(3, 8.0, 8);
        let lambda = 0.5 * md.grid().fundamental();
        let cfg = SolverConfig::default();
        let mut r = rng(seed);
        let psi = localized_spinor(&md, &mut r, amp, 1.5);
        let pp = md.spectral_project(&psi, lambda, Branch::Plus).unwrap();
        let plain = energy(&md, &pp, lambda, cfg.green_mode).unwrap().total;
        let reduced = reduced_energy(&md, &pp, lambda, &cfg).unwrap();
        prop_assert!(reduced >= plain - 1e-12 * plain.abs().max(1.0));
        // τ only sees the positive part
        let with_minus = reduced_energy(&md, &psi, lambda, &cfg).unwrap();
        prop_assert!((with_minus - reduced).abs() <= 1e-9 * reduced.abs().max(1.0));
    }

    #[test]
    fn reduced_energy_has_mountain_pass_shape(seed in any::<u64>()) {
        let md = model(3, 8.0, 8);
        let lambda = 0.5 * md.grid().fundamental();
        let cfg = SolverConfig::default();
        let mut r = rng(seed);
        let psi = localized_spinor(&md, &mut r, 1.0, 1.5);
        let p = nehari_scale(&md, &psi, lambda, &cfg).unwrap();
        let at = |s: f64| reduced_energy(&md, &psi.scale(s * p.t), lambda, &cfg).unwrap();
        let top = p.tau.energy.total;
        prop_assert!(top > 0.0);
        prop_assert!(at(0.5) < top && at(0.5) > 0.0);
        prop_assert!(at(1.2) < top);
        prop_assert!(at(3.0) < 0.0);
    }
}
