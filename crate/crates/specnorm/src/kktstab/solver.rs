//! ADMM on the splitting `u = 𝒬X, Z = X, v = 𝓑X − b`, followed by semismooth Newton on `F`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::instance::{kkt_residual, KktPoint, Linearization, ProblemInstance, Triple};
use crate::cones::cone_project;
use crate::error::{Error, Result};
use crate::matcore::{Mat, Vector};
use crate::proxlib::prox_spectral;
use crate::sampling::gaussian_matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// ADMM stops once `‖F‖_∞` reaches this.
    pub tol: f64,
    pub max_iter: usize,
    pub refine: bool,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-7, max_iter: 1_000_000, refine: true, newton_tol: 1e-9, newton_max_iter: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub point: KktPoint,
    /// `‖F(point) − target‖_∞`.
    pub residual: f64,
    pub admm_iterations: usize,
    pub newton_iterations: usize,
}

const DIVERGENCE_BOUND: f64 = 1e12;

struct Admm<'a> {
    inst: &'a ProblemInstance,
    rho: f64,
    normal: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    curvature: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    x: Vector,
    u: Vector,
    z: Mat,
    v: Vector,
    mu_u: Vector,
    mu_z: Mat,
    mu_v: Vector,
}

impl<'a> Admm<'a> {
    fn new(inst: &'a ProblemInstance, start: Option<&KktPoint>) -> Result<Self> {
        let mn = inst.mn();
        let k = inst.qop.transpose() * &inst.qop + Mat::identity(mn, mn) + inst.bop.transpose() * &inst.bop;
        let normal = k.cholesky().ok_or_else(|| Error::InvalidSpec("normal matrix not positive definite".into()))?;
        let rho = 1.0;
        let curvature = Self::curvature(inst, rho)?;
        let (x, mu_z, mu_v) = match start {
            Some(p) => (inst.vec(&p.x), p.s.clone(), p.y.clone()),
            None => (Vector::zeros(mn), Mat::zeros(inst.m, inst.n), Vector::zeros(inst.l())),
        };
        let xm = inst.unvec(&x);
        let u = inst.apply_q(&xm);
        let mu_u = inst.h.grad(&u);
        let v = Vector::from_vec(cone_project(&inst.cone, (inst.apply_b(&xm) - &inst.b).as_slice()));
        Ok(Admm { inst, rho, normal, curvature, x, u, z: xm, v, mu_u, mu_z, mu_v })
    }

    fn curvature(inst: &ProblemInstance, rho: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let d = inst.d();
        (&inst.h.m + Mat::identity(d, d) * rho)
            .cholesky()
            .ok_or_else(|| Error::InvalidSpec("M + ρI not positive definite".into()))
    }

    fn step(&mut self) -> (Vector, Mat, Vector) {
        let inst = self.inst;
        let r = self.rho;
        let rhs = inst.qop.transpose() * (&self.u - &self.mu_u / r)
            + inst.vec(&(&self.z - &self.mu_z / r))
            + inst.bop.transpose() * (&inst.b + &self.v - &self.mu_v / r)
            - inst.vec(&inst.c) / r;
        self.x = self.normal.solve(&rhs);
        let xm = inst.unvec(&self.x);
        let qx = &inst.qop * &self.x;
        let bx = &inst.bop * &self.x - &inst.b;
        let old = (self.u.clone(), self.z.clone(), self.v.clone());
        self.u = self.curvature.solve(&((&qx * r + &self.mu_u) - &inst.h.q));
        // Prox of θ/ρ is (1/ρ) Prox_θ(ρ ·) by positive homogeneity.
        self.z = prox_spectral(&(&xm * r + &self.mu_z)).map(|p| p.p / r).unwrap_or_else(|_| self.z.clone());
        self.v = Vector::from_vec(cone_project(&inst.cone, (&bx + &self.mu_v / r).as_slice()));
        self.mu_u += (&qx - &self.u) * r;
        self.mu_z += (&xm - &self.z) * r;
        self.mu_v += (&bx - &self.v) * r;
        old
    }

    fn balance(&mut self, old: &(Vector, Mat, Vector)) -> Result<()> {
        let inst = self.inst;
        let xm = inst.unvec(&self.x);
        let primal = ((&inst.qop * &self.x - &self.u).norm_squared()
            + (&xm - &self.z).norm_squared()
            + (&inst.bop * &self.x - &inst.b - &self.v).norm_squared())
        .sqrt();
        let dual = self.rho
            * (inst.qop.transpose() * (&self.u - &old.0)
                + inst.vec(&(&self.z - &old.1))
                + inst.bop.transpose() * (&self.v - &old.2))
                .norm();
        let next = if primal > 10.0 * dual {
            self.rho * 2.0
        } else if primal < 0.1 * dual {
            self.rho / 2.0
        } else {
            self.rho
        };
        if next != self.rho && (1e-8..=1e8).contains(&next) {
            self.rho = next;
            self.curvature = Self::curvature(inst, next)?;
        }
        Ok(())
    }

    fn point(&self) -> KktPoint {
        KktPoint::new(self.inst, self.z.clone(), self.mu_v.clone(), self.mu_z.clone())
    }

    fn diverged(&self) -> bool {
        let big = self.mu_u.amax().max(self.mu_z.amax()).max(self.mu_v.amax()).max(self.x.amax());
        !big.is_finite() || big > DIVERGENCE_BOUND
    }
}

fn residual_norm(inst: &ProblemInstance, pt: &KktPoint, target: &Triple) -> f64 {
    kkt_residual(inst, pt).map(|f| f.sub(target).inf_norm()).unwrap_or(f64::INFINITY)
}

/// Runs ADMM from `start` (or zero) to `opts.tol`, then alternates Newton refinement with
/// tighter ADMM runs until `opts.newton_tol`. Errors with `NoConvergence` if the residual
/// stays above `opts.tol`.
pub fn solve_from(inst: &ProblemInstance, start: Option<&KktPoint>, opts: &SolveOptions) -> Result<SolveReport> {
    inst.validate()?;
    let zero = Triple::zeros(inst);
    let mut admm = Admm::new(inst, start)?;
    let mut best = admm.point();
    let mut best_res = residual_norm(inst, &best, &zero);
    let mut iterations = 0;
    let mut newton_iterations = 0;
    let mut goal = opts.tol;
    loop {
        while best_res > goal && iterations < opts.max_iter {
            let old = admm.step();
            iterations += 1;
            if admm.diverged() {
                return Err(Error::InfeasibleDetected(format!(
                    "multipliers exceeded {DIVERGENCE_BOUND:e} after {iterations} iterations (best residual {best_res:.3e})"
                )));
            }
            if iterations % 10 == 0 {
                let pt = admm.point();
                let res = residual_norm(inst, &pt, &zero);
                if res < best_res {
                    best = pt;
                    best_res = res;
                }
            }
            if iterations % 100 == 0 {
                admm.balance(&old)?;
            }
        }
        if !opts.refine || best_res > opts.tol {
            break;
        }
        let refined = newton(inst, &best, &zero, opts.newton_tol, opts.newton_max_iter, newton_iterations as u64);
        newton_iterations += refined.newton_iterations;
        if refined.residual < best_res {
            best = refined.point;
            best_res = refined.residual;
        }
        // Newton stalls near kinks of non-isolated solution sets; more ADMM gets closer.
        if best_res <= opts.newton_tol || goal <= opts.newton_tol || iterations >= opts.max_iter {
            break;
        }
        goal = (goal * 0.1).max(opts.newton_tol);
    }
    if best_res > opts.tol {
        return Err(Error::NoConvergence { iterations, residual: best_res });
    }
    Ok(SolveReport { point: best, residual: best_res, admm_iterations: iterations, newton_iterations })
}

pub fn solve(inst: &ProblemInstance, opts: &SolveOptions) -> Result<SolveReport> {
    solve_from(inst, None, opts)
}

/// Jacobian of `F` at a nearby generic point: the prox argument is jittered so that ties and
/// weakly active coordinates fall on one smooth piece, then columns are `F′` along unit vectors.
fn jacobian(inst: &ProblemInstance, pt: &KktPoint, seed: u64, size: f64) -> Option<Mat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = pt.x.amax().max(pt.s.amax()).max(1.0);
    for attempt in 0..6 {
        let jitter = gaussian_matrix(inst.m, inst.n, &mut rng) * (size * scale * 4f64.powi(attempt));
        let moved = KktPoint { x: &pt.x + &jitter, ..pt.clone() };
        let Ok(mut lin) = Linearization::at(inst, &moved, 0.0) else { continue };
        lin.cone_arg = inst.apply_b(&pt.x) - &inst.b + &pt.y;
        for z in lin.cone_arg.iter_mut() {
            if z.abs() < 1e-12 {
                *z = if rand::Rng::random_bool(&mut rng, 0.5) { 1e-12 } else { -1e-12 };
            }
        }
        let dim = Triple::zeros(inst).len();
        let mut jac = Mat::zeros(dim, dim);
        let mut ok = true;
        for k in 0..dim {
            let mut e = Vector::zeros(dim);
            e[k] = 1.0;
            match lin.apply(inst, &Triple::unflatten(inst, &e)) {
                Ok(col) => jac.set_column(k, &col.flatten()),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(jac);
        }
    }
    None
}

/// Jitter sizes tried in turn when a step makes poor progress. Larger jitters sample the
/// pieces of `F` around a nearby kink that the current iterate cannot resolve.
const JITTERS: [f64; 8] = [1e-6, 1e-4, 1e-3, 1e-8, 1e-5, 1e-4, 1e-3, 1e-2];

/// Damped semismooth Newton on `F(X, y, S) = target`, started at `start`.
///
/// Each iteration takes the first candidate step that cuts the residual tenfold, or else the
/// best damped step over all jitter sizes.
pub fn newton(
    inst: &ProblemInstance,
    start: &KktPoint,
    target: &Triple,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> SolveReport {
    let mut pt = start.clone();
    let mut res = residual_norm(inst, &pt, target);
    let mut iters = 0;
    while res > tol && iters < max_iter && res.is_finite() {
        iters += 1;
        let g = match kkt_residual(inst, &pt) {
            Ok(f) => f.sub(target).flatten(),
            Err(_) => break,
        };
        let base = g.norm();
        let mut best: Option<(f64, KktPoint)> = None;
        for (k, &size) in JITTERS.iter().enumerate() {
            let jseed = seed.wrapping_mul(0x9e37_79b9).wrapping_add((iters * JITTERS.len() + k) as u64);
            let Some(cand) = damped_step(inst, &pt, &g, target, jseed, size) else { continue };
            let quick = cand.0 <= 0.1 * base;
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
            if quick {
                break;
            }
        }
        match best {
            Some((gn, c)) if gn < base => {
                pt = c;
                res = residual_norm(inst, &pt, target);
            }
            _ => break,
        }
    }
    SolveReport { point: pt, residual: res, admm_iterations: 0, newton_iterations: iters }
}

fn damped_step(inst: &ProblemInstance, pt: &KktPoint, g: &Vector, target: &Triple, seed: u64, size: f64) -> Option<(f64, KktPoint)> {
    let jac = jacobian(inst, pt, seed, size)?;
    let svd = jac.svd(true, true);
    let (u, vt) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
    let base = g.norm();
    let top = svd.singular_values.max();
    let ug = u.transpose() * g;
    // Levenberg-Marquardt weights: near-kernel directions of the Jacobian get short steps,
    // which matters when the solution set is not isolated.
    let mut best: Option<(f64, KktPoint)> = None;
    for mu in [base, base.sqrt(), 0.0] {
        let coef = ug.zip_map(&svd.singular_values, |c, s| if s > 1e-12 * top { -c * s / (s * s + mu) } else { 0.0 });
        let step = vt.transpose() * coef;
        if let Some(c) = backtrack(inst, pt, &step, target, base) {
            if best.as_ref().is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
    }
    best
}

fn backtrack(inst: &ProblemInstance, pt: &KktPoint, step: &Vector, target: &Triple, base: f64) -> Option<(f64, KktPoint)> {
    let mut t = 1.0;
    for _ in 0..30 {
        let cand = pt.shifted(inst, &Triple::unflatten(inst, &(step * t)));
        if let Ok(f) = kkt_residual(inst, &cand) {
            let gn = f.sub(target).flatten().norm();
            if gn < (1.0 - 1e-4 * t) * base {
                return Some((gn, cand));
            }
        }
        t *= 0.5;
    }
    None
}

/// Instance whose KKT system is `F = δ` of `inst`, and the maps between the two solution sets.
///
/// With `δ = (δ₁, δ₂, δ₃)`: `X = X′ + δ₃`, `y = y′ − δ₂`, `S = S′ − δ₃`.
pub fn shifted_instance(inst: &ProblemInstance, delta: &Triple) -> ProblemInstance {
    let mut out = inst.clone();
    let mq = &inst.h.m * inst.apply_q(&delta.s);
    out.h.q = &inst.h.q + mq;
    out.b = &inst.b + &delta.y - inst.apply_b(&delta.s);
    out.c = &inst.c - inst.adj_b(&delta.y) - &delta.s - &delta.z;
    out
}

pub fn unshift_point(inst: &ProblemInstance, shifted: &KktPoint, delta: &Triple) -> KktPoint {
    KktPoint::new(inst, &shifted.x + &delta.s, &shifted.y - &delta.y, &shifted.s - &delta.s)
}

/// Solves `F = δ` from a warm start; falls back to a cold solve of the shifted instance.
pub fn solve_perturbed(
    inst: &ProblemInstance,
    warm: &KktPoint,
    delta: &Triple,
    tol: f64,
    seed: u64,
) -> SolveReport {
    let first = newton(inst, warm, delta, tol, 60, seed);
    if first.residual <= tol {
        return first;
    }
    let shifted = shifted_instance(inst, delta);
    let opts = SolveOptions { tol: 1e-7, max_iter: 50_000, refine: false, ..SolveOptions::default() };
    let cold = match solve_from(&shifted, None, &opts) {
        Ok(r) => r.point,
        Err(_) => return first,
    };
    let back = unshift_point(inst, &cold, delta);
    let second = newton(inst, &back, delta, tol, 60, seed ^ 0x9e37);
    if second.residual < first.residual { second } else { first }
}
