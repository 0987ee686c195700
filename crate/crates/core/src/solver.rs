//! Ground states through the τ-reduction.
//!
//! For `ψ ∈ H⁺_λ`, `τ(ψ) ∈ H⁻_λ` maximises the concave map `h ↦ J_λ(ψ + h)`.
//! The reduced functional `J̃(ψ) = J_λ(ψ + τ(ψ))` is minimised over the Nehari
//! set `<∇J̃(ψ), ψ> = 0` by preconditioned descent on `H⁺_λ`.
//!
//! Both stages take limited-memory quasi-Newton steps built on the
//! preconditioner `|D - λ|^{-1}`, with Armijo backtracking.

use std::collections::VecDeque;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::closed_form::{graft_test_spinor, q_of_eps, Constants};
use crate::energy::{dual_norm, energy, energy_and_gradient, lambda_norm_sq, EnergyBreakdown};
use crate::error::{LabError, Result};
use crate::grid::SpinorField;
use crate::spectral::{Branch, GreenMode, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol_tau: f64,
    /// Relative Nehari defect `|<∇J̃(tψ), tψ>| / ‖tψ‖²_λ`.
    pub tol_nehari: f64,
    pub tol_outer: f64,
    pub max_iter_tau: usize,
    pub max_iter_nehari: usize,
    pub max_iter_outer: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub min_step: f64,
    /// Stored correction pairs of the quasi-Newton model; 0 gives plain preconditioned steps.
    pub memory: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub green_mode: GreenMode,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_tau: 1e-9,
            tol_nehari: 1e-10,
            tol_outer: 1e-6,
            max_iter_tau: 200,
            max_iter_nehari: 80,
            max_iter_outer: 400,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 1e-10,
            memory: 8,
            t_min: 1e-2,
            t_max: 1e2,
            green_mode: GreenMode::FreeSpace,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("tol_tau", self.tol_tau),
            ("tol_nehari", self.tol_nehari),
            ("tol_outer", self.tol_outer),
            ("armijo", self.armijo),
            ("min_step", self.min_step),
            ("t_min", self.t_min),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(LabError::Config(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(LabError::Config(format!("backtrack = {} must lie in (0, 1)", self.backtrack)));
        }
        if !(self.t_max > self.t_min) {
            return Err(LabError::Config("t bounds are inverted".into()));
        }
        if self.max_iter_tau == 0 || self.max_iter_nehari == 0 || self.max_iter_outer == 0 {
            return Err(LabError::Config("max_iter values must be >= 1".into()));
        }
        Ok(())
    }
}

/// A point `w = ψ⁺ + τ(ψ⁺)` with its energy and gradient.
#[derive(Clone, Debug)]
pub struct TauSolution {
    pub h: SpinorField,
    pub w: SpinorField,
    pub energy: EnergyBreakdown,
    pub grad: SpinorField,
    pub iterations: usize,
    pub residual: f64,
    pub evaluations: usize,
}

/// Energy and gradient with the gradient's branch part `part`, its preconditioned
/// image `pre` and the dual norm `residual` of `part`. Working with `part` rather
/// than the full gradient keeps cross terms with the other branch out of the
/// inner products, which would otherwise set a roundoff floor on the residual.
struct BranchPoint {
    energy: EnergyBreakdown,
    grad: SpinorField,
    part: SpinorField,
    pre: SpinorField,
    residual: f64,
}

struct Evaluator<'a> {
    model: &'a Model,
    lambda: f64,
    mode: GreenMode,
    count: usize,
    tau_iterations: usize,
}

impl<'a> Evaluator<'a> {
    fn eval(&mut self, w: &SpinorField) -> Result<(EnergyBreakdown, SpinorField)> {
        self.count += 1;
        energy_and_gradient(self.model, w, self.lambda, self.mode)
    }

    /// Evaluate and split off the gradient on one branch.
    fn eval_branch(&mut self, w: &SpinorField, branch: Branch) -> Result<BranchPoint> {
        let (energy, grad) = self.eval(w)?;
        self.split(energy, grad, branch)
    }

    fn split(&self, energy: EnergyBreakdown, grad: SpinorField, branch: Branch) -> Result<BranchPoint> {
        let part = self.model.spectral_project(&grad, self.lambda, branch)?;
        let pre = self.precondition(&part, branch);
        let residual = part.inner_unchecked(&pre).max(0.0).sqrt();
        Ok(BranchPoint { energy, grad, part, pre, residual })
    }

    /// `|D - λ|^{-1}` restricted to one branch.
    fn precondition(&self, g: &SpinorField, branch: Branch) -> SpinorField {
        let l = self.lambda;
        match branch {
            Branch::Minus => self.model.branch_multiplier(g, |e| if e < l { 1.0 / (l - e) } else { 0.0 }),
            Branch::Plus => self.model.branch_multiplier(g, |e| if e > l { 1.0 / (e - l) } else { 0.0 }),
        }
    }
}

/// Inverse-Hessian model `H ≈ ∇²f^{-1}` from recent steps, on top of a base preconditioner.
struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(SpinorField, SpinorField, f64)>,
}

impl Lbfgs {
    fn new(memory: usize) -> Self {
        Self { memory, pairs: VecDeque::with_capacity(memory) }
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Record step `s` with gradient change `y`, both inside the active branch.
    /// Pairs without positive curvature are dropped.
    fn update(&mut self, s: SpinorField, y: SpinorField) {
        if self.memory == 0 {
            return;
        }
        let sy = s.inner_unchecked(&y);
        if !(sy > 1e-12 * s.l2_norm() * y.l2_norm()) {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn apply(&self, q: &SpinorField, base: impl Fn(&SpinorField) -> SpinorField) -> SpinorField {
        let mut q = q.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * s.inner_unchecked(&q);
            q.axpy(-a, y);
            alphas.push(a);
        }
        let mut r = base(&q);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * y.inner_unchecked(&r);
            r.axpy(a - b, s);
        }
        r
    }
}

/// Energy changes below this are treated as rounding noise.
fn energy_noise(e: f64) -> f64 {
    1e-12 * e.abs().max(1.0)
}

fn tau_inner(
    ev: &mut Evaluator,
    psi_plus: &SpinorField,
    cfg: &SolverConfig,
    warm: Option<&SpinorField>,
) -> Result<TauSolution> {
    let start = ev.count;
    let mut h = match warm {
        Some(w) => ev.model.spectral_project(w, ev.lambda, Branch::Minus)?,
        None => ev.model.zeros(),
    };
    let mut w = psi_plus.add(&h);
    let mut cur = ev.eval_branch(&w, Branch::Minus)?;
    let mut qn = Lbfgs::new(cfg.memory);
    for it in 0..cfg.max_iter_tau {
        log::trace!("tau {it}: J = {:.12} residual = {:.3e}", cur.energy.total, cur.residual);
        if cur.residual < cfg.tol_tau {
            ev.tau_iterations += it;
            return Ok(TauSolution {
                h,
                w,
                energy: cur.energy,
                grad: cur.grad,
                iterations: it,
                residual: cur.residual,
                evaluations: ev.count - start,
            });
        }
        // ascent: the model is built for -J, whose gradient is -part
        let mut fresh = qn.pairs.is_empty();
        let mut d = if fresh { cur.pre.clone() } else { qn.apply(&cur.part, |v| ev.precondition(v, Branch::Minus)) };
        let mut slope = cur.part.inner_unchecked(&d);
        if !(slope > 0.0) {
            qn.clear();
            fresh = true;
            d = cur.pre.clone();
            slope = cur.residual * cur.residual;
        }
        let noise = energy_noise(cur.energy.total);
        let mut a = 1.0;
        loop {
            let mut h_try = h.clone();
            h_try.axpy(a, &d);
            let w_try = psi_plus.add(&h_try);
            let next = ev.eval_branch(&w_try, Branch::Minus)?;
            let gain = next.energy.total - cur.energy.total;
            let ok = if gain.abs() <= noise {
                next.residual < cur.residual
            } else {
                gain >= cfg.armijo * a * slope
            };
            if ok {
                qn.update(d.scale(a), cur.part.sub(&next.part));
                h = h_try;
                w = w_try;
                cur = next;
                break;
            }
            a *= cfg.backtrack;
            if a < cfg.min_step {
                if fresh {
                    return Err(LabError::NotConverged { stage: "tau", iterations: it, residual: cur.residual });
                }
                qn.clear();
                fresh = true;
                d = cur.pre.clone();
                slope = cur.residual * cur.residual;
                a = 1.0;
            }
        }
    }
    Err(LabError::NotConverged { stage: "tau", iterations: cfg.max_iter_tau, residual: cur.residual })
}

/// Maximiser `h ∈ H⁻_λ` of `h ↦ J_λ(ψ⁺ + h)`.
pub fn tau_solve(
    model: &Model,
    psi_plus: &SpinorField,
    lambda: f64,
    cfg: &SolverConfig,
    warm: Option<&SpinorField>,
) -> Result<TauSolution> {
    let pp = model.spectral_project(psi_plus, lambda, Branch::Plus)?;
    let mut ev = Evaluator { model, lambda, mode: cfg.green_mode, count: 0, tau_iterations: 0 };
    tau_inner(&mut ev, &pp, cfg, warm)
}

pub fn reduced_energy(model: &Model, psi_plus: &SpinorField, lambda: f64, cfg: &SolverConfig) -> Result<f64> {
    Ok(tau_solve(model, psi_plus, lambda, cfg, None)?.energy.total)
}

#[derive(Clone, Debug)]
pub struct NehariPoint {
    pub t: f64,
    pub tau: TauSolution,
    pub defect: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

struct Probe {
    t: f64,
    f: f64,
    sol: TauSolution,
}

fn probe(
    ev: &mut Evaluator,
    psi_plus: &SpinorField,
    t: f64,
    cfg: &SolverConfig,
    warm: Option<&SpinorField>,
) -> Result<Probe> {
    let pp = psi_plus.scale(t);
    let sol = tau_inner(ev, &pp, cfg, warm)?;
    let f = sol.grad.l2_inner(psi_plus)?;
    Ok(Probe { t, f, sol })
}

fn nehari_inner(
    ev: &mut Evaluator,
    psi_plus: &SpinorField,
    cfg: &SolverConfig,
    t0: f64,
    warm: Option<&SpinorField>,
) -> Result<NehariPoint> {
    let start = ev.count;
    let norm2 = lambda_norm_sq(ev.model, psi_plus, ev.lambda)?;
    if norm2 <= 0.0 {
        return Err(LabError::InvalidParameter("Nehari scaling of the zero field".into()));
    }
    let defect = |p: &Probe| (p.f * p.t).abs() / (p.t * p.t * norm2);
    let first = probe(ev, psi_plus, t0.clamp(cfg.t_min, cfg.t_max), cfg, warm)?;
    if defect(&first) < cfg.tol_nehari {
        let d = defect(&first);
        return Ok(NehariPoint { t: first.t, tau: first.sol, defect: d, evaluations: ev.count - start, iterations: 0 });
    }
    let grow = first.f > 0.0;
    let mut lo_hi: (Probe, Probe);
    let mut last = first;
    let mut probes = 1;
    loop {
        // J(sw) = s²Q - s⁴K is stationary at s² = Q / 2K; overshoot slightly so the root gets bracketed
        let e = &last.sol.energy;
        let s = if e.quadratic > 0.0 && e.quartic > 0.0 { (e.quadratic / (2.0 * e.quartic)).sqrt() } else { f64::NAN };
        let geometric = if grow { last.t * 1.5 } else { last.t / 1.5 };
        let predicted = last.t * (1.0 + 1.1 * (s - 1.0));
        let t = if (grow && predicted > last.t && predicted < geometric) || (!grow && predicted < last.t && predicted > geometric) {
            predicted
        } else {
            geometric
        };
        if t > cfg.t_max || t < cfg.t_min {
            return Err(LabError::Bracket { t_min: cfg.t_min, t_max: cfg.t_max });
        }
        if probes >= cfg.max_iter_nehari {
            return Err(LabError::NotConverged { stage: "nehari", iterations: probes, residual: defect(&last) });
        }
        let warm_h = last.sol.h.scale(t / last.t);
        let next = probe(ev, psi_plus, t, cfg, Some(&warm_h))?;
        probes += 1;
        let dn = defect(&next);
        if dn < cfg.tol_nehari {
            return Ok(NehariPoint { t: next.t, tau: next.sol, defect: dn, evaluations: ev.count - start, iterations: probes - 1 });
        }
        if (next.f > 0.0) != grow {
            lo_hi = if grow { (last, next) } else { (next, last) };
            break;
        }
        last = next;
    }
    // Illinois on f(t)/t; `lo` has f > 0, `hi` has f < 0.
    let mut side = 0i8;
    for it in 0..cfg.max_iter_nehari {
        let (lo, hi) = (&lo_hi.0, &lo_hi.1);
        let mut t = hi.t - hi.f * (hi.t - lo.t) / (hi.f - lo.f);
        if !(t > lo.t.min(hi.t) && t < lo.t.max(hi.t)) {
            t = 0.5 * (lo.t + hi.t);
        }
        let near = if (t - lo.t).abs() < (t - hi.t).abs() { lo } else { hi };
        let warm_h = near.sol.h.scale(t / near.t);
        let p = probe(ev, psi_plus, t, cfg, Some(&warm_h))?;
        let dp = defect(&p);
        if dp < cfg.tol_nehari || (lo.t - hi.t).abs() < 1e-15 * t {
            return Ok(NehariPoint { t: p.t, tau: p.sol, defect: dp, evaluations: ev.count - start, iterations: it + 1 });
        }
        if p.f > 0.0 {
            if side == 1 {
                lo_hi.1.f *= 0.5;
            }
            side = 1;
            lo_hi.0 = p;
        } else {
            if side == -1 {
                lo_hi.0.f *= 0.5;
            }
            side = -1;
            lo_hi.1 = p;
        }
    }
    let d = defect(&lo_hi.0).min(defect(&lo_hi.1));
    Err(LabError::NotConverged { stage: "nehari", iterations: cfg.max_iter_nehari, residual: d })
}

/// First Nehari guess from the `h = 0` energy, so τ is never solved far above the Nehari scale.
fn initial_scale(model: &Model, psi_plus: &SpinorField, lambda: f64, cfg: &SolverConfig) -> Result<f64> {
    let e = energy(model, psi_plus, lambda, cfg.green_mode)?;
    Ok(if e.quadratic > 0.0 && e.quartic > 0.0 { (e.quadratic / (2.0 * e.quartic)).sqrt() } else { 1.0 })
}

/// `t > 0` with `tψ⁺` on the Nehari set.
pub fn nehari_scale(model: &Model, psi_plus: &SpinorField, lambda: f64, cfg: &SolverConfig) -> Result<NehariPoint> {
    let pp = model.spectral_project(psi_plus, lambda, Branch::Plus)?;
    let t0 = initial_scale(model, &pp, lambda, cfg)?;
    let mut ev = Evaluator { model, lambda, mode: cfg.green_mode, count: 0, tau_iterations: 0 };
    nehari_inner(&mut ev, &pp, cfg, t0, None)
}

/// Sign changes of `t ↦ <∇J̃(tψ⁺), ψ⁺>` on a geometric grid of `samples` points in `[t_min, t_max]`.
pub fn nehari_sign_changes(
    model: &Model,
    psi_plus: &SpinorField,
    lambda: f64,
    cfg: &SolverConfig,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    let pp = model.spectral_project(psi_plus, lambda, Branch::Plus)?;
    let mut ev = Evaluator { model, lambda, mode: cfg.green_mode, count: 0, tau_iterations: 0 };
    let ratio = (cfg.t_max / cfg.t_min).powf(1.0 / (samples.max(2) - 1) as f64);
    let mut out = Vec::new();
    let mut prev: Option<Probe> = None;
    for k in 0..samples.max(2) {
        let t = cfg.t_min * ratio.powi(k as i32);
        let warm = prev.as_ref().map(|p| p.sol.h.scale(t / p.t));
        let p = probe(&mut ev, &pp, t, cfg, warm.as_ref())?;
        if let Some(q) = &prev {
            if (q.f > 0.0) != (p.f > 0.0) {
                out.push((q.t, p.t));
            }
        }
        prev = Some(p);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageCounts {
    pub outer: usize,
    pub nehari: usize,
    pub tau: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub lambda: f64,
    pub energy: EnergyBreakdown,
    /// Converged `J̃` value: an upper estimate of the min-max level.
    pub delta_lambda: f64,
    pub l2_norm: f64,
    pub grad_dual: f64,
    pub tau_residual: f64,
    pub nehari_defect: f64,
    pub t_nehari: f64,
    pub iterations: StageCounts,
    pub converged: bool,
    /// `Some(false)` when the energy is not below the supplied threshold.
    pub below_threshold: Option<bool>,
    /// Energy under a quarter of the threshold.
    pub suspicious_low: Option<bool>,
    #[serde(skip)]
    pub solution: Option<SpinorField>,
}

/// Minimise `J̃` on the Nehari set starting from `init`.
pub fn ground_state(
    model: &Model,
    lambda: f64,
    cfg: &SolverConfig,
    init: &SpinorField,
    ybar: Option<f64>,
) -> Result<GroundStateReport> {
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(LabError::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    model.check_off_spectrum(lambda)?;
    let mut ev = Evaluator { model, lambda, mode: cfg.green_mode, count: 0, tau_iterations: 0 };
    let mut counts = StageCounts::default();
    let mut psi = model.spectral_project(init, lambda, Branch::Plus)?;
    if psi.l2_norm() == 0.0 {
        return Err(LabError::InvalidParameter("initial field has no P⁺ component".into()));
    }
    let t0 = initial_scale(model, &psi, lambda, cfg)?;
    let mut point = nehari_inner(&mut ev, &psi, cfg, t0, None)?;
    counts.nehari += point.iterations;
    psi.scale_mut(point.t);
    let mut qn = Lbfgs::new(cfg.memory);
    let mut cur = ev.split(point.tau.energy, point.tau.grad.clone(), Branch::Plus)?;
    let mut grad_dual = f64::INFINITY;
    let mut converged = false;
    for outer in 0..cfg.max_iter_outer {
        counts.outer = outer;
        grad_dual = dual_norm(model, &point.tau.grad, lambda)?;
        debug!(
            "outer {outer}: J = {:.12} dual = {grad_dual:.3e} t = {:.6} evals = {}",
            point.tau.energy.total, point.t, ev.count
        );
        if grad_dual < cfg.tol_outer {
            converged = true;
            break;
        }
        let mut fresh = qn.pairs.is_empty();
        let mut d = if fresh { cur.pre.clone() } else { qn.apply(&cur.part, |v| ev.precondition(v, Branch::Plus)) };
        let mut slope = -cur.part.inner_unchecked(&d);
        if !(slope < 0.0) {
            qn.clear();
            fresh = true;
            d = cur.pre.clone();
            slope = -cur.residual * cur.residual;
        }
        let phi = point.tau.energy.total;
        let noise = energy_noise(phi);
        let mut a = 1.0;
        let accepted = loop {
            let mut cand = psi.clone();
            cand.axpy(-a, &d);
            match nehari_inner(&mut ev, &cand, cfg, 1.0, Some(&point.tau.h)) {
                Ok(p) => {
                    counts.nehari += p.iterations;
                    let next = ev.split(p.tau.energy, p.tau.grad.clone(), Branch::Plus)?;
                    let drop = p.tau.energy.total - phi;
                    let ok = if drop.abs() <= noise {
                        next.residual < cur.residual
                    } else {
                        drop <= cfg.armijo * a * slope
                    };
                    if ok {
                        break Some((cand, p, next));
                    }
                }
                Err(e) => debug!("trial step {a:.3e} rejected: {e}"),
            }
            a *= cfg.backtrack;
            if a < cfg.min_step {
                if fresh {
                    break None;
                }
                qn.clear();
                fresh = true;
                d = cur.pre.clone();
                slope = -cur.residual * cur.residual;
                a = 1.0;
            }
        };
        let Some((cand, p, next)) = accepted else {
            warn!("line search stalled at outer iteration {outer}");
            break;
        };
        let new_psi = cand.scale(p.t);
        qn.update(new_psi.sub(&psi), next.part.sub(&cur.part));
        psi = new_psi;
        point = p;
        cur = next;
    }
    counts.evaluations = ev.count;
    counts.tau = ev.tau_iterations;
    let sol = point.tau.w.clone();
    let e = energy(model, &sol, lambda, cfg.green_mode)?;
    let tau_res = {
        let gm = model.spectral_project(&point.tau.grad, lambda, Branch::Minus)?;
        dual_norm(model, &gm, lambda)?
    };
    let report = GroundStateReport {
        lambda,
        energy: e,
        delta_lambda: point.tau.energy.total,
        l2_norm: sol.l2_norm(),
        grad_dual,
        tau_residual: tau_res,
        nehari_defect: point.defect,
        t_nehari: point.t,
        iterations: counts,
        converged,
        below_threshold: ybar.map(|y| e.total < y),
        suspicious_low: ybar.map(|y| e.total < 0.25 * y),
        solution: Some(sol),
    };
    if report.below_threshold == Some(false) {
        warn!("lambda = {lambda}: energy {} is not below the threshold", e.total);
    }
    if report.suspicious_low == Some(true) {
        warn!("lambda = {lambda}: energy {} is below a quarter of the threshold", e.total);
    }
    info!(
        "lambda = {lambda:.6}: J = {:.10} |ψ| = {:.6} converged = {converged}",
        e.total, report.l2_norm
    );
    Ok(report)
}

/// Coarse scan over bubble scales; returns the grafted spinor with the lowest Nehari energy.
pub fn default_init(
    model: &Model,
    lambda: f64,
    cfg: &SolverConfig,
    constants: &Constants,
    cutoff_radius: f64,
) -> Result<SpinorField> {
    let h = model.grid().spacing();
    let mut best: Option<(f64, SpinorField)> = None;
    for k in 0..5 {
        let eps = (2.0 * h).max(0.5) * 1.5f64.powi(k);
        if eps > 0.5 * cutoff_radius {
            break;
        }
        let phi = graft_test_spinor(model, eps, cutoff_radius, constants.bubble_amplitude())?;
        match nehari_scale(model, &phi, lambda, cfg) {
            Ok(p) => {
                debug!("init scan eps = {eps:.3}: J̃ = {:.8}", p.tau.energy.total);
                if best.as_ref().map_or(true, |(e, _)| p.tau.energy.total < *e) {
                    best = Some((p.tau.energy.total, phi));
                }
            }
            Err(e) => debug!("init scan eps = {eps:.3} failed: {e}"),
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| LabError::InvalidParameter("no admissible initial bubble scale".into()))
}

/// Ground states for each λ, warm-started from the previous solution.
pub fn lambda_sweep(
    model: &Model,
    lambdas: &[f64],
    cfg: &SolverConfig,
    init: &SpinorField,
    ybar: Option<f64>,
) -> Vec<std::result::Result<GroundStateReport, String>> {
    let mut out = Vec::with_capacity(lambdas.len());
    let mut start = init.clone();
    for &l in lambdas {
        match ground_state(model, l, cfg, &start, ybar) {
            Ok(r) => {
                if let Some(s) = &r.solution {
                    start = s.clone();
                }
                out.push(Ok(r));
            }
            Err(e) => {
                warn!("lambda = {l}: {e}");
                out.push(Err(e.to_string()));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestSpinorRow {
    pub eps: f64,
    pub grad_dual: f64,
    pub energy: EnergyBreakdown,
    pub energy_zero: f64,
    pub q_eps: f64,
    /// `Ȳ - λQ(ε) - J_λ(φ_ε)`.
    pub gap: f64,
    pub l2_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestSpinorTable {
    pub lambda: f64,
    pub cutoff_radius: f64,
    pub rows: Vec<TestSpinorRow>,
    pub excluded: Vec<f64>,
    pub grad_slope: Option<f64>,
    pub gap_slope: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`; `None` unless all values are positive.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(sxy / sxx)
}

/// Smallest resolvable concentration scale, `4h`.
pub fn min_resolvable_eps(model: &Model) -> f64 {
    4.0 * model.grid().spacing()
}

pub fn test_spinor_sweep(
    model: &Model,
    eps_list: &[f64],
    lambda: f64,
    cutoff_radius: f64,
    constants: &Constants,
    mode: GreenMode,
) -> Result<TestSpinorTable> {
    model.check_off_spectrum(lambda)?;
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &eps in eps_list {
        if eps < min_resolvable_eps(model) {
            warn!("eps = {eps} is below 4h = {} and is excluded", min_resolvable_eps(model));
            excluded.push(eps);
            continue;
        }
        let phi = graft_test_spinor(model, eps, cutoff_radius, constants.bubble_amplitude())?;
        let (e, g) = energy_and_gradient(model, &phi, lambda, mode)?;
        let e0 = e.total + 0.5 * lambda * phi.l2_inner(&phi)?;
        let q = q_of_eps(eps, constants);
        rows.push(TestSpinorRow {
            eps,
            grad_dual: dual_norm(model, &g, lambda)?,
            energy: e,
            energy_zero: e0,
            q_eps: q,
            gap: constants.ybar - lambda * q - e.total,
            l2_norm: phi.l2_norm(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let grad_slope = loglog_slope(&xs, &rows.iter().map(|r| r.grad_dual).collect::<Vec<_>>());
    let gap_slope = loglog_slope(&xs, &rows.iter().map(|r| r.gap).collect::<Vec<_>>());
    Ok(TestSpinorTable { lambda, cutoff_radius, rows, excluded, grad_slope, gap_slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.7).abs() < 1e-12);
        assert!(loglog_slope(&x, &[1.0, -1.0, 1.0, 1.0]).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { tol_tau: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { max_iter_outer: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
