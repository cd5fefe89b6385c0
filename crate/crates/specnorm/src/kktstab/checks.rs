//! Certificate checkers: RCQ (exact), and the sampled trivial-kernel tests for the
//! primal and dual SRCQ/SOSC variants.

use super::instance::{kkt_dirderiv, kkt_residual, KktPoint, ProblemInstance, Triple};
use crate::cones::{
    crit_cone_p_coords, crit_cone_p_member, crit_cone_p_polar_member, in_crit_theta, in_crit_theta_zero,
    in_polar_crit_theta, in_polar_crit_theta_star, in_polar_crit_theta_zero, matrix_cone_model, ConeTag,
    CoordCone, MatrixCone, MatrixConeModel, MEMBERSHIP_TOL,
};
use crate::conic::{kernel_search, KernelSearch, KernelSearchOptions, KernelStatus, ProductCone};
use crate::error::{Error, Result};
use crate::matcore::{Mat, Vector};
use crate::proxlib::{prox_spectral, SpectralPair};
use crate::sensitivity::sigma_term;

/// Residual bound a point must meet before the checkers accept it.
pub const KKT_TOL: f64 = 1e-7;
/// Bound on the defining linear residuals of a re-checked witness.
pub const WITNESS_TOL: f64 = 1e-8;
/// Lower bound on `ψ*` accepted for a second-order witness.
pub const SIGMA_TERM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Rcq,
    SrcqPrimal,
    Ssrcq,
    SrcqDual,
    SoscPrimal,
    Wsosc,
    SoscDual,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::Rcq,
        Condition::SrcqPrimal,
        Condition::Ssrcq,
        Condition::SrcqDual,
        Condition::SoscPrimal,
        Condition::Wsosc,
        Condition::SoscDual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Rcq => "rcq",
            Condition::SrcqPrimal => "srcq-p",
            Condition::Ssrcq => "ssrcq",
            Condition::SrcqDual => "srcq-d",
            Condition::SoscPrimal => "sosc-p",
            Condition::Wsosc => "wsosc",
            Condition::SoscDual => "sosc-d",
        }
    }

    pub fn parse(s: &str) -> Option<Condition> {
        Condition::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Holds,
    Fails,
    Inconclusive,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Status> {
        [Status::Holds, Status::Fails, Status::Inconclusive].into_iter().find(|x| x.name() == s)
    }

    pub fn and(self, other: Status) -> Status {
        match (self, other) {
            (Status::Fails, _) | (_, Status::Fails) => Status::Fails,
            (Status::Holds, Status::Holds) => Status::Holds,
            _ => Status::Inconclusive,
        }
    }

    pub fn is_conclusive(self) -> bool {
        self != Status::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// `(Δy, ΔS)` in the kernel of a constraint-qualification test.
    Multiplier { y: Vector, s: Mat },
    /// `D` in the kernel of a second-order test.
    Direction { d: Mat },
    /// `y ⟂ range 𝓑` in the polar of the tangent cone of `𝒫`.
    Covector { y: Vector },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evidence {
    pub starts: usize,
    pub sweeps: usize,
    pub largest_norm: f64,
    pub witness_gap: f64,
    /// True when the verdict was decided without sampling.
    pub exact: bool,
    pub nonzero_norm: f64,
    pub zero_norm: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: Status,
    pub witness: Option<Witness>,
    pub evidence: Evidence,
}

/// A KKT point accepted for certification, with its prox pair and the critical cone of `𝒫`.
#[derive(Debug, Clone)]
pub struct CheckContext<'a> {
    pub inst: &'a ProblemInstance,
    pub point: &'a KktPoint,
    pub pair: SpectralPair,
    pub cone_slack: Vector,
    pub crit_p: Vec<CoordCone>,
}

impl<'a> CheckContext<'a> {
    pub fn new(inst: &'a ProblemInstance, point: &'a KktPoint) -> Result<Self> {
        inst.validate()?;
        let res = kkt_residual(inst, point)?.inf_norm();
        if res > KKT_TOL {
            return Err(Error::PreconditionViolated(format!("‖F‖_∞ = {res:e} exceeds {KKT_TOL:e}")));
        }
        let dual_gap = (&point.w - inst.h.grad(&inst.apply_q(&point.x))).amax();
        if dual_gap > KKT_TOL * point.w.amax().max(1.0) {
            return Err(Error::DualInfeasible(format!("w differs from ∇h(𝒬X) by {dual_gap:e}")));
        }
        if point.x.amax() <= 1e-12 {
            return Err(Error::DegeneratePoint("X̄ = 0".into()));
        }
        let pair = prox_spectral(&(&point.x + &point.s))?;
        if pair.degenerate {
            return Err(Error::DegeneratePoint("Prox_θ(X̄ + S̄) = 0".into()));
        }
        let cone_slack = inst.apply_b(&point.x) - &inst.b;
        let crit_p = crit_cone_p_coords_loose(inst, &cone_slack, &point.y)?;
        Ok(CheckContext { inst, point, pair, cone_slack, crit_p })
    }

    /// Columns are `vec(U Ã Vᵀ)` for the model's atoms `Ã`.
    fn atom_matrix(&self, model: &MatrixConeModel) -> Mat {
        let mn = self.inst.mn();
        let mut out = Mat::zeros(mn, model.dim());
        let mut z = vec![0.0; model.dim()];
        for k in 0..model.dim() {
            z[k] = 1.0;
            let d = self.pair.from_frame(&model.assemble(&z));
            out.set_column(k, &self.inst.vec(&d));
            z[k] = 0.0;
        }
        out
    }
}

/// Critical cone of `𝒫`, classifying the KKT point with the acceptance tolerance.
fn crit_cone_p_coords_loose(inst: &ProblemInstance, z: &Vector, y: &Vector) -> Result<Vec<CoordCone>> {
    let tol = KKT_TOL;
    let snap = |v: f64| if v.abs() <= tol { 0.0 } else { v };
    let zs: Vec<f64> = z.iter().map(|&v| snap(v)).collect();
    let ys: Vec<f64> = y.iter().map(|&v| snap(v)).collect();
    crit_cone_p_coords(&inst.cone, &zs, &ys)
}

fn verdict_from_search(search: &KernelSearch, opts: &KernelSearchOptions, witness: Option<Witness>) -> Verdict {
    let status = match search.status {
        KernelStatus::Trivial => Status::Holds,
        KernelStatus::Nontrivial => Status::Fails,
        KernelStatus::Inconclusive => Status::Inconclusive,
    };
    Verdict {
        status,
        witness,
        evidence: Evidence {
            starts: search.starts,
            sweeps: search.total_sweeps,
            largest_norm: search.largest_norm,
            witness_gap: search.witness_gap,
            exact: search.exact,
            nonzero_norm: opts.nonzero_norm,
            zero_norm: opts.zero_norm,
            note: String::new(),
        },
    }
}

/// Kernel `{(y, S) : 𝓑*y + S = 0, y ∈ (C_𝒫)°, S ∈ cone}`.
fn multiplier_kernel(ctx: &CheckContext, cone_kind: MatrixCone, opts: &KernelSearchOptions) -> Result<Verdict> {
    let inst = ctx.inst;
    let (l, mn) = (inst.l(), inst.mn());
    let model = matrix_cone_model(&ctx.pair, cone_kind)?;
    let k = model.dim();
    let mut cone = ProductCone::default();
    for c in &ctx.crit_p {
        cone.push(c.polar().block());
    }
    for b in &model.cone.blocks {
        cone.push(*b);
    }
    let atoms = ctx.atom_matrix(&model);
    let me = model.equalities.nrows();
    let mut eq = Mat::zeros(mn + me, l + k);
    eq.view_mut((0, 0), (mn, l)).copy_from(&inst.bop.transpose());
    eq.view_mut((0, l), (mn, k)).copy_from(&atoms);
    eq.view_mut((mn, l), (me, k)).copy_from(&model.equalities);
    let search = kernel_search(&cone, &eq, opts);
    let witness = search.witness.as_ref().map(|w| Witness::Multiplier {
        y: Vector::from_column_slice(&w.as_slice()[..l]),
        s: ctx.pair.from_frame(&model.assemble(&w.as_slice()[l..])),
    });
    Ok(verdict_from_search(&search, opts, witness))
}

/// Kernel `{D ∈ cone : 𝒬D = 0, 𝓑D ∈ C_𝒫}` with slacks for the sign-constrained coordinates.
fn direction_kernel(ctx: &CheckContext, cone_kind: MatrixCone, opts: &KernelSearchOptions) -> Result<Verdict> {
    let inst = ctx.inst;
    let model = matrix_cone_model(&ctx.pair, cone_kind)?;
    let k = model.dim();
    let atoms = ctx.atom_matrix(&model);
    let qa = &inst.qop * &atoms;
    let ba = &inst.bop * &atoms;
    let mut cone = ProductCone::default();
    for b in &model.cone.blocks {
        cone.push(*b);
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut slack_of = Vec::new();
    for (i, c) in ctx.crit_p.iter().enumerate() {
        match c {
            CoordCone::Free => {}
            CoordCone::Zero => slack_of.push((i, None)),
            CoordCone::Nonneg | CoordCone::Nonpos => {
                let idx = cone.dim();
                cone.push(c.block());
                slack_of.push((i, Some(idx)));
            }
        }
    }
    let dim = cone.dim();
    for r in 0..qa.nrows() {
        let mut row = vec![0.0; dim];
        row[..k].copy_from_slice(qa.row(r).transpose().as_slice());
        rows.push(row);
    }
    for (i, slack) in slack_of {
        let mut row = vec![0.0; dim];
        row[..k].copy_from_slice(ba.row(i).transpose().as_slice());
        if let Some(s) = slack {
            row[s] = -1.0;
        }
        rows.push(row);
    }
    for r in 0..model.equalities.nrows() {
        let mut row = vec![0.0; dim];
        row[..k].copy_from_slice(model.equalities.row(r).transpose().as_slice());
        rows.push(row);
    }
    let eq = Mat::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    let search = kernel_search(&cone, &eq, opts);
    let witness = search.witness.as_ref().map(|w| {
        let d = ctx.pair.from_frame(&model.assemble(&w.as_slice()[..k]));
        let nrm = d.norm();
        Witness::Direction { d: if nrm > 0.0 { d / nrm } else { d } }
    });
    Ok(verdict_from_search(&search, opts, witness))
}

/// `𝓑 ℝ^{m×n} + T_𝒫(𝓑X̄ − b) = ℝ^l`, decided exactly.
///
/// Fails iff some nonzero `y` with `𝓑*y = 0` lies in `T_𝒫°`: zero on coordinates where the tangent
/// cone is the whole line, `≤ 0` where it is a half-line, free where it is `{0}`.
pub fn check_rcq(inst: &ProblemInstance, point: &KktPoint) -> Result<Verdict> {
    inst.validate()?;
    let l = inst.l();
    let mut evidence = Evidence { exact: true, ..Evidence::default() };
    if l == 0 {
        evidence.note = "no constraints".into();
        return Ok(Verdict { status: Status::Holds, witness: None, evidence });
    }
    let z = inst.apply_b(&point.x) - &inst.b;
    // 0: whole line, 1: half-line (y ≤ 0), 2: {0} (y free).
    let kind: Vec<u8> = inst
        .cone
        .tags
        .iter()
        .zip(z.iter())
        .map(|(t, &v)| match t {
            ConeTag::Free => 0,
            ConeTag::Nonneg if v > KKT_TOL => 0,
            ConeTag::Nonneg => 1,
            ConeTag::Zero => 2,
        })
        .collect();
    let support: Vec<usize> = (0..l).filter(|&i| kind[i] != 0).collect();
    // y supported on `support` with 𝓑*y = 0.
    let bs = Mat::from_fn(inst.mn(), support.len(), |r, c| inst.bop[(support[c], r)]);
    let Some(basis) = crate::conic::null_basis(&bs) else {
        return Ok(Verdict { status: Status::Holds, witness: None, evidence });
    };
    let embed = |w: &Vector| -> Vector {
        let coef = &basis * w;
        let mut y = Vector::zeros(l);
        for (c, &i) in support.iter().enumerate() {
            y[i] = coef[c];
        }
        y
    };
    if basis.ncols() == 0 {
        return Ok(Verdict { status: Status::Holds, witness: None, evidence });
    }
    let half: Vec<usize> = support.iter().enumerate().filter(|(_, &i)| kind[i] == 1).map(|(c, _)| c).collect();
    let g = Mat::from_fn(half.len(), basis.ncols(), |r, c| basis[(half[r], c)]);
    let found = ray_in_nonpositive_orthant(&g);
    let witness = found.map(|w| {
        let y = embed(&w);
        let nrm = y.norm();
        Witness::Covector { y: y / nrm }
    });
    let status = if witness.is_some() { Status::Fails } else { Status::Holds };
    Ok(Verdict { status, witness, evidence })
}

/// Nonzero `w` with `G w ≤ 0`, if any, by enumerating candidate extreme rays.
fn ray_in_nonpositive_orthant(g: &Mat) -> Option<Vector> {
    let r = g.ncols();
    let tol = 1e-10;
    if let Some(nb) = crate::conic::null_basis(g) {
        if nb.ncols() > 0 {
            return Some(nb.column(0).into_owned());
        }
    }
    if g.nrows() == 0 {
        return (r > 0).then(|| {
            let mut e = Vector::zeros(r);
            e[0] = 1.0;
            e
        });
    }
    // G injective: extreme rays of {w : Gw ≤ 0} have r − 1 linearly independent active rows.
    let k = g.nrows();
    let mut subset: Vec<usize> = (0..r.saturating_sub(1)).collect();
    if r == 1 {
        let w = Vector::from_element(1, 1.0);
        for s in [1.0, -1.0] {
            if (g * &w * s).iter().all(|&v| v <= tol) {
                return Some(&w * s);
            }
        }
        return None;
    }
    if r - 1 > k {
        return None;
    }
    loop {
        let active = Mat::from_fn(subset.len(), r, |i, c| g[(subset[i], c)]);
        if let Some(nb) = crate::conic::null_basis(&active) {
            if nb.ncols() == 1 {
                let w = nb.column(0).into_owned();
                for s in [1.0, -1.0] {
                    let gw = g * &w * s;
                    if gw.iter().all(|&v| v <= tol * gw.amax().max(1.0)) {
                        return Some(&w * s);
                    }
                }
            }
        }
        // Next combination in lexicographic order.
        let len = subset.len();
        let mut i = len;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if subset[i] < k - len + i {
                subset[i] += 1;
                for j in i + 1..len {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn check_srcq_primal(ctx: &CheckContext, opts: &KernelSearchOptions) -> Result<Verdict> {
    multiplier_kernel(ctx, MatrixCone::PolarCritTheta, opts)
}

pub fn check_ssrcq(ctx: &CheckContext, opts: &KernelSearchOptions) -> Result<Verdict> {
    multiplier_kernel(ctx, MatrixCone::PolarCritThetaZero, opts)
}

/// `{(H_y, H_S) : 𝓑*H_y + H_S = 0, H_y ∈ C_{𝒫°}, H_S ∈ C_{θ*} ∩ {φ* = 0}}`; the last set is the
/// support-α, symmetric, trace-zero, α₃-PSD pattern.
pub fn check_sosc_dual(ctx: &CheckContext, opts: &KernelSearchOptions) -> Result<Verdict> {
    let shifted = KernelSearchOptions { seed: opts.seed ^ 0x5d05c, ..*opts };
    multiplier_kernel(ctx, MatrixCone::PolarCritTheta, &shifted)
}

/// `{D ∈ C_θ ∩ {ψ* = 0} : 𝒬D = 0, 𝓑D ∈ C_𝒫}`.
pub fn check_sosc_primal(ctx: &CheckContext, opts: &KernelSearchOptions) -> Result<Verdict> {
    direction_kernel(ctx, MatrixCone::PolarCritThetaStar, opts)
}

pub fn check_wsosc(ctx: &CheckContext, opts: &KernelSearchOptions) -> Result<Verdict> {
    direction_kernel(ctx, MatrixCone::PolarCritThetaStarFlat, opts)
}

/// Polar of the dual SRCQ sum: `{D : 𝒬D = 0, 𝓑D ∈ (C_{𝒫°})° = C_𝒫, D ∈ (C_{θ*})°}`.
pub fn check_srcq_dual(ctx: &CheckContext, opts: &KernelSearchOptions) -> Result<Verdict> {
    let shifted = KernelSearchOptions { seed: opts.seed ^ 0xd5c9, ..*opts };
    direction_kernel(ctx, MatrixCone::PolarCritThetaStar, &shifted)
}

pub fn check_condition(ctx: &CheckContext, cond: Condition, opts: &KernelSearchOptions) -> Result<Verdict> {
    match cond {
        Condition::Rcq => check_rcq(ctx.inst, ctx.point),
        Condition::SrcqPrimal => check_srcq_primal(ctx, opts),
        Condition::Ssrcq => check_ssrcq(ctx, opts),
        Condition::SrcqDual => check_srcq_dual(ctx, opts),
        Condition::SoscPrimal => check_sosc_primal(ctx, opts),
        Condition::Wsosc => check_wsosc(ctx, opts),
        Condition::SoscDual => check_sosc_dual(ctx, opts),
    }
}

/// Independent recomputation of a witness's defining relations.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCheck {
    pub reproduced: bool,
    /// Named residuals with the bound each must meet.
    pub residuals: Vec<(String, f64, f64)>,
    /// `‖F′(point; δ)‖_∞` for the direction δ the witness induces, when it induces one.
    pub f_prime_residual: Option<f64>,
}

fn push(res: &mut Vec<(String, f64, f64)>, name: &str, value: f64, bound: f64) {
    res.push((name.to_string(), value, bound));
}

fn flag(ok: bool) -> f64 {
    if ok { 0.0 } else { 1.0 }
}

pub fn recheck_witness(ctx: &CheckContext, cond: Condition, witness: &Witness) -> Result<WitnessCheck> {
    let inst = ctx.inst;
    let mut res = Vec::new();
    let mut f_prime = None;
    let z = ctx.cone_slack.as_slice();
    let ysnap: Vec<f64> = ctx.point.y.iter().map(|&v| if v.abs() <= KKT_TOL { 0.0 } else { v }).collect();
    let zsnap: Vec<f64> = z.iter().map(|&v| if v.abs() <= KKT_TOL { 0.0 } else { v }).collect();
    match (cond, witness) {
        (Condition::Rcq, Witness::Covector { y }) => {
            push(&mut res, "‖𝓑*y‖", inst.adj_b(y).amax(), WITNESS_TOL);
            push(&mut res, "1 − ‖y‖", (1.0 - y.norm()).abs(), 1e-6);
            let inside = inst.cone.tags.iter().zip(z.iter().zip(y.iter())).all(|(t, (&zi, &yi))| match t {
                ConeTag::Free => yi.abs() <= WITNESS_TOL,
                ConeTag::Nonneg if zi > KKT_TOL => yi.abs() <= WITNESS_TOL,
                ConeTag::Nonneg => yi <= WITNESS_TOL,
                ConeTag::Zero => true,
            });
            push(&mut res, "y ∈ T_𝒫°", flag(inside), 0.0);
        }
        (Condition::SrcqPrimal | Condition::Ssrcq | Condition::SoscDual, Witness::Multiplier { y, s }) => {
            let nrm = (y.norm_squared() + s.norm_squared()).sqrt();
            push(&mut res, "1 − ‖(y, S)‖", (1.0 - nrm).abs(), 1e-6);
            push(&mut res, "‖𝓑*y + S‖", (inst.adj_b(y) + s).amax(), WITNESS_TOL);
            let polar_p = crit_cone_p_polar_member(&inst.cone, &zsnap, &ysnap, y.as_slice())?;
            push(&mut res, "y ∈ (C_𝒫)°", flag(polar_p), 0.0);
            let member = if cond == Condition::Ssrcq {
                in_polar_crit_theta_zero(&ctx.pair, s, MEMBERSHIP_TOL)?
            } else {
                in_polar_crit_theta(&ctx.pair, s, MEMBERSHIP_TOL)?
            };
            push(&mut res, "S in the polar critical cone", member.residual, MEMBERSHIP_TOL);
            let delta = Triple { z: Mat::zeros(inst.m, inst.n), y: y.clone(), s: s.clone() };
            f_prime = Some(kkt_dirderiv(inst, ctx.point, &delta)?.inf_norm());
        }
        (Condition::SoscPrimal | Condition::Wsosc | Condition::SrcqDual, Witness::Direction { d }) => {
            push(&mut res, "1 − ‖D‖", (1.0 - d.norm()).abs(), 1e-6);
            push(&mut res, "‖𝒬D‖", inst.apply_q(d).amax(), WITNESS_TOL);
            let bd = inst.apply_b(d);
            let in_cp = crit_cone_p_member(&inst.cone, &zsnap, &ysnap, bd.as_slice())?;
            push(&mut res, "𝓑D ∈ C_𝒫", flag(in_cp), 0.0);
            let member = match cond {
                Condition::Wsosc => in_crit_theta_zero(&ctx.pair, d, MEMBERSHIP_TOL)?,
                Condition::SrcqDual => in_polar_crit_theta_star(&ctx.pair, d, MEMBERSHIP_TOL)?,
                _ => in_crit_theta(&ctx.pair, d, MEMBERSHIP_TOL)?,
            };
            push(&mut res, "D in the critical cone", member.residual, MEMBERSHIP_TOL);
            push(&mut res, "−ψ*", -sigma_term(&ctx.pair, d)?, SIGMA_TERM_TOL);
            let delta = Triple { z: d.clone(), y: Vector::zeros(inst.l()), s: Mat::zeros(inst.m, inst.n) };
            f_prime = Some(kkt_dirderiv(inst, ctx.point, &delta)?.inf_norm());
        }
        _ => return Err(Error::InvalidSpec(format!("witness kind does not match {}", cond.name()))),
    }
    let reproduced = res.iter().all(|(_, v, b)| v.is_finite() && *v <= *b);
    Ok(WitnessCheck { reproduced, residuals: res, f_prime_residual: f_prime })
}

/// The direction of `F′` a witness induces: `(0, Δy, ΔS)` or `(D, 0, 0)`.
pub fn witness_delta(inst: &ProblemInstance, witness: &Witness) -> Option<Triple> {
    match witness {
        Witness::Multiplier { y, s } => Some(Triple { z: Mat::zeros(inst.m, inst.n), y: y.clone(), s: s.clone() }),
        Witness::Direction { d } => Some(Triple { z: d.clone(), y: Vector::zeros(inst.l()), s: Mat::zeros(inst.m, inst.n) }),
        Witness::Covector { .. } => None,
    }
}
