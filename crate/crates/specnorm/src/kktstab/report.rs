//! Stability reports: condition verdicts, combined statements, the sampled search for
//! a kernel of `F′`, and the perturbation experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::checks::{check_condition, witness_delta, CheckContext, Condition, Status, Verdict};
use super::instance::{KktPoint, Linearization, ProblemInstance, Triple};
use super::solver::solve_perturbed;
use crate::conic::KernelSearchOptions;
use crate::cones::COMPLEMENTARITY_TOL;
use crate::error::Result;
use crate::matcore::{Mat, Vector};

/// `‖F′(δ)‖_∞` at or below this counts as a kernel direction for unit `δ`.
pub const F_PRIME_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FPrimeSearch {
    pub status: Status,
    pub witness: Option<Triple>,
    pub residual: f64,
    pub starts: usize,
}

/// Statement of an equivalence with its status and the verdicts it combines.
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub label: char,
    pub status: Status,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaRow {
    pub radius: f64,
    pub max_ratio: f64,
    pub successes: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaTable {
    pub rows: Vec<KappaRow>,
}

impl KappaTable {
    /// Largest over smallest per-radius maximum ratio (∞ if any trial failed).
    pub fn spread(&self) -> f64 {
        if self.rows.iter().any(|r| r.successes < r.trials) {
            return f64::INFINITY;
        }
        let hi = self.rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
        let lo = self.rows.iter().map(|r| r.max_ratio).fold(f64::INFINITY, f64::min);
        if lo > 0.0 { hi / lo } else { f64::INFINITY }
    }

    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.successes == r.trials)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub verdicts: Vec<(Condition, Verdict)>,
    /// Statements (a)–(f); (a) is read off the sampled `F′` kernel search.
    pub statements: Vec<Statement>,
    /// SSRCQ ∧ WSOSC. Reported for comparison; it does not imply isolated calmness by itself.
    pub isolated_calm_claim: Status,
    pub f_prime: FPrimeSearch,
    pub inconsistencies: Vec<String>,
    pub kappa: Option<KappaTable>,
}

impl StabilityReport {
    pub fn verdict(&self, cond: Condition) -> Option<&Verdict> {
        self.verdicts.iter().find(|(c, _)| *c == cond).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub conditions: Vec<Condition>,
    pub search: KernelSearchOptions,
    /// Random starts for the `F′` kernel search.
    pub f_prime_starts: usize,
    pub radii: Vec<f64>,
    pub trials: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            conditions: Condition::ALL.to_vec(),
            search: KernelSearchOptions::default(),
            f_prime_starts: 500,
            radii: Vec::new(),
            trials: 20,
        }
    }
}

pub fn default_radii() -> Vec<f64> {
    vec![1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
}

fn unit_triple(inst: &ProblemInstance, rng: &mut ChaCha8Rng) -> Triple {
    let dim = Triple::zeros(inst).len();
    let v = Vector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(rng)));
    Triple::unflatten(inst, &(&v / v.norm()))
}

/// Looks for a unit `δ` with `F′(δ) ≈ 0`: the witnesses of the given verdicts are tried first,
/// then `starts` random unit directions are driven down by repeated smallest-singular-vector steps
/// of the local linear piece of `F′`.
pub fn f_prime_kernel_search(
    inst: &ProblemInstance,
    point: &KktPoint,
    candidates: &[Triple],
    starts: usize,
    seed: u64,
) -> Result<FPrimeSearch> {
    let lin = Linearization::at(inst, point, COMPLEMENTARITY_TOL)?;
    let eval = |d: &Triple| -> f64 {
        let nrm = d.norm();
        if nrm == 0.0 {
            return f64::INFINITY;
        }
        lin.apply(inst, &d.scaled(1.0 / nrm)).map(|f| f.inf_norm()).unwrap_or(f64::INFINITY)
    };
    let mut best = FPrimeSearch { status: Status::Holds, witness: None, residual: f64::INFINITY, starts: 0 };
    for c in candidates {
        let r = eval(c);
        if r < best.residual {
            best.residual = r;
            if r <= F_PRIME_ZERO {
                best.status = Status::Fails;
                best.witness = Some(c.scaled(1.0 / c.norm()));
                return Ok(best);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = Triple::zeros(inst).len();
    for _ in 0..starts {
        best.starts += 1;
        let mut d = unit_triple(inst, &mut rng);
        let mut r = eval(&d);
        for _ in 0..15 {
            // F′ is positively homogeneous and piecewise linear; columns of the active piece.
            let base = d.flatten();
            let f0 = match lin.apply(inst, &d) {
                Ok(f) => f.flatten(),
                Err(_) => break,
            };
            let h = 1e-7;
            let mut jac = Mat::zeros(dim, dim);
            for k in 0..dim {
                let mut e = base.clone();
                e[k] += h;
                if let Ok(f) = lin.apply(inst, &Triple::unflatten(inst, &e)) {
                    jac.set_column(k, &((f.flatten() - &f0) / h));
                }
            }
            let svd = jac.svd(false, true);
            let Some(vt) = svd.v_t else { break };
            let (idx, _) = svd.singular_values.argmin();
            let mut cand = vt.row(idx).transpose();
            if cand.dot(&base) < 0.0 {
                cand = -cand;
            }
            let cand = Triple::unflatten(inst, &cand);
            let rc = eval(&cand);
            if rc >= r {
                break;
            }
            d = cand;
            r = rc;
            if r <= F_PRIME_ZERO {
                break;
            }
        }
        if r < best.residual {
            best.residual = r;
        }
        if r <= F_PRIME_ZERO {
            best.status = Status::Fails;
            best.witness = Some(d.scaled(1.0 / d.norm()));
            return Ok(best);
        }
    }
    Ok(best)
}

/// Max `dist((X, y, S), (X̄, ȳ, S̄))/ρ` over `trials` random `δ` with `‖δ‖ = ρ`, for each radius.
pub fn perturbation_experiment(
    inst: &ProblemInstance,
    point: &KktPoint,
    radii: &[f64],
    trials: usize,
    seed: u64,
) -> KappaTable {
    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &rho) in radii.iter().enumerate() {
        let mut row = KappaRow { radius: rho, max_ratio: 0.0, successes: 0, trials };
        for t in 0..trials {
            let trial_seed = seed ^ ((ri as u64) << 32) ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let delta = unit_triple(inst, &mut rng).scaled(rho);
            let tol = (1e-4 * rho).max(1e-13);
            let rep = solve_perturbed(inst, point, &delta, tol, trial_seed);
            if rep.residual <= tol {
                row.successes += 1;
                let dist = rep.point.as_triple().sub(&point.as_triple()).norm();
                row.max_ratio = row.max_ratio.max(dist / rho);
            }
        }
        rows.push(row);
    }
    KappaTable { rows }
}

fn statement(label: char, parts: &[(Condition, &str)], verdicts: &[(Condition, Verdict)]) -> Statement {
    let mut status = Status::Holds;
    let mut names = Vec::new();
    for (c, name) in parts {
        let s = verdicts.iter().find(|(k, _)| k == c).map(|(_, v)| v.status).unwrap_or(Status::Inconclusive);
        status = status.and(s);
        names.push(format!("{name}={}", s.name()));
    }
    Statement { label, status, basis: names.join(", ") }
}

/// Downgrades the sampled `holds` side of a conclusive disagreement.
fn reconcile(statements: &mut [Statement], a: usize, b: usize, why: &str, log: &mut Vec<String>) {
    let (sa, sb) = (statements[a].status, statements[b].status);
    if sa.is_conclusive() && sb.is_conclusive() && sa != sb {
        log.push(format!(
            "({}) {} but ({}) {} [{why}]",
            statements[a].label,
            sa.name(),
            statements[b].label,
            sb.name()
        ));
        let weaker = if sa == Status::Holds { a } else { b };
        statements[weaker].status = Status::Inconclusive;
    }
}

pub fn stability_report(inst: &ProblemInstance, point: &KktPoint, opts: &ReportOptions) -> Result<StabilityReport> {
    let ctx = CheckContext::new(inst, point)?;
    let mut verdicts = Vec::new();
    let mut conds = opts.conditions.clone();
    if !conds.contains(&Condition::Rcq) {
        conds.insert(0, Condition::Rcq);
    }
    conds.sort();
    conds.dedup();
    for c in conds {
        verdicts.push((c, check_condition(&ctx, c, &opts.search)?));
    }
    let get = |c: Condition| verdicts.iter().find(|(k, _)| *k == c).map(|(_, v)| v.status);
    let mut inconsistencies = Vec::new();
    for (p, d, thm) in [
        (Condition::SrcqPrimal, Condition::SoscDual, "primal SRCQ ⟺ dual SOSC"),
        (Condition::SrcqDual, Condition::SoscPrimal, "dual SRCQ ⟺ primal SOSC"),
    ] {
        if let (Some(a), Some(b)) = (get(p), get(d)) {
            if a.is_conclusive() && b.is_conclusive() && a != b {
                inconsistencies.push(format!("{} {} but {} {} [{thm}]", p.name(), a.name(), d.name(), b.name()));
            }
        }
    }
    let candidates: Vec<Triple> =
        verdicts.iter().filter_map(|(_, v)| v.witness.as_ref().and_then(|w| witness_delta(inst, w))).collect();
    let f_prime = f_prime_kernel_search(inst, point, &candidates, opts.f_prime_starts, opts.search.seed ^ 0xf00d)?;
    let mut statements = vec![Statement {
        label: 'a',
        status: f_prime.status,
        basis: format!("F′ kernel search over {} starts, best ‖F′‖_∞ = {:e}", f_prime.starts, f_prime.residual),
    }];
    use Condition::*;
    statements.push(statement('b', &[(Wsosc, "wsosc"), (Ssrcq, "ssrcq")], &verdicts));
    statements.push(statement('c', &[(SoscPrimal, "sosc-p"), (SrcqPrimal, "srcq-p")], &verdicts));
    statements.push(statement('d', &[(SoscPrimal, "sosc-p"), (SoscDual, "sosc-d")], &verdicts));
    statements.push(statement('e', &[(SrcqDual, "srcq-d"), (SoscDual, "sosc-d")], &verdicts));
    statements.push(statement('f', &[(SrcqDual, "srcq-d"), (SrcqPrimal, "srcq-p")], &verdicts));
    let isolated_calm_claim = statements[1].status;
    let rcq = get(Rcq).unwrap_or(Status::Inconclusive);
    if rcq != Status::Holds {
        inconsistencies.push(format!("rcq {}: statement conclusions suppressed", rcq.name()));
        for s in statements.iter_mut().skip(1) {
            s.status = Status::Inconclusive;
        }
    } else {
        for i in 0..statements.len() {
            for j in i + 1..statements.len() {
                reconcile(&mut statements, i, j, "statements are claimed equivalent", &mut inconsistencies);
            }
        }
    }
    let kappa = (!opts.radii.is_empty())
        .then(|| perturbation_experiment(inst, point, &opts.radii, opts.trials, opts.search.seed ^ 0xca1));
    Ok(StabilityReport { verdicts, statements, isolated_calm_claim, f_prime, inconsistencies, kappa })
}
