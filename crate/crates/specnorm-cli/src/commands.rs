use std::fs;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use specnorm::conic::KernelSearchOptions;
use specnorm::kktstab::{
    default_radii, generate_certified, kkt_dirderiv, kkt_residual, recheck_witness, solve, stability_report,
    CheckContext, Condition, KktPoint, Plant, ProblemInstance, ReportOptions, SeedSpec, SolveOptions, Status,
    F_PRIME_ZERO,
};

use crate::error::CliError;
use crate::files::{
    from_json, instance_file, parse_condition, parse_tag, point_file, point_from_file, report_sections, to_json,
    InstanceFile, PointFile, ReportFile, ReportSettings, ResidualEntry, REPORT_FORMAT, VERSION,
};

pub const SOLUTION_FORMAT: &str = "specnorm-solution";
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.9), one stream per check and per perturbation trial";
/// `‖δ‖` of an `F′` witness must be within this of 1.
const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "specnorm", version, about = "Spectral-norm regularized programs: solve and certify KKT stability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance around a planted KKT point.
    Generate(GenerateArgs),
    /// Solve an instance.
    Solve(SolveArgs),
    /// Check the constraint qualifications and second-order conditions at a KKT point.
    Certify(CertifyArgs),
    /// Recompute every witness stored in a report.
    VerifyWitness(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub l: usize,
    #[arg(long, default_value_t = 1)]
    pub alpha1: usize,
    #[arg(long, default_value_t = 0)]
    pub alpha2: usize,
    /// σ(W) on α₂, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha2_weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub alpha3: usize,
    #[arg(long, default_value_t = 1)]
    pub beta: usize,
    /// Put every active index in α₃ (rejected: σ(W) needs mass 1 on α).
    #[arg(long)]
    pub alpha3_only: bool,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Cone tags (nonneg, zero, free), comma separated; random when omitted.
    #[arg(long, value_delimiter = ',')]
    pub cone: Option<Vec<String>>,
    /// none, ssrcq, srcq, wsosc or sosc.
    #[arg(long, default_value = "none")]
    pub plant: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: String,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long)]
    pub json_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    pub instance: String,
    /// Solution document to certify; defaults to the planted point, else a fresh solve.
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Random starts per sampled kernel search.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 500)]
    pub f_prime_starts: usize,
    /// Perturbation radii, comma separated, or `default` for 1e-3..1e-7; no experiment when omitted.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<String>>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Subset of rcq, srcq-p, ssrcq, srcq-d, sosc-p, wsosc, sosc-d.
    #[arg(long, value_delimiter = ',')]
    pub conditions: Option<Vec<String>>,
    #[arg(long)]
    pub json_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub report: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format: String,
    pub version: String,
    pub residual: f64,
    pub admm_iterations: usize,
    pub newton_iterations: usize,
    pub point: PointFile,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(cli: Cli) -> Outcome {
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Certify(a) => cmd_certify(&a),
        Command::VerifyWitness(a) => cmd_verify_witness(&a),
    };
    result.unwrap_or_else(|e| Outcome { code: e.exit_code(), stdout: String::new(), stderr: format!("error: {e}\n") })
}

fn read(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.into(), message: e.to_string() })
}

fn write(path: &str, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io { path: path.into(), message: e.to_string() })
}

/// Writes `doc` to `json_out` and returns `summary`, or returns `doc` itself.
fn emit(doc: String, json_out: Option<&str>, summary: String) -> Result<String, CliError> {
    match json_out {
        Some(p) => {
            write(p, &doc)?;
            Ok(summary)
        }
        None => Ok(doc),
    }
}

pub fn seed_spec(a: &GenerateArgs) -> Result<SeedSpec, CliError> {
    let plant = Plant::parse(&a.plant).ok_or_else(|| CliError::Format(format!("unknown plant {:?}", a.plant)))?;
    let cone = a.cone.as_ref().map(|v| v.iter().map(|s| parse_tag(s)).collect::<Result<Vec<_>, _>>()).transpose()?;
    let (alpha1, alpha2, alpha3) = if a.alpha3_only { (0, 0, a.m.min(a.n)) } else { (a.alpha1, a.alpha2, a.alpha3) };
    let beta = if a.alpha3_only { 0 } else { a.beta };
    Ok(SeedSpec {
        m: a.m,
        n: a.n,
        d: a.d,
        l: a.l,
        alpha1,
        alpha2,
        alpha2_weights: a.alpha2_weights.clone(),
        alpha3,
        beta,
        lambda: a.lambda,
        cone,
        plant,
        seed: a.seed,
    })
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<Outcome, CliError> {
    let spec = seed_spec(a)?;
    let (inst, pt) = generate_certified(&spec)?;
    let residual = kkt_residual(&inst, &pt)?.inf_norm();
    let doc = to_json(&instance_file(&inst, Some(&pt), Some(a.seed)));
    let summary = format!("instance {}×{} written, planted ‖F‖_∞ = {residual:e}\n", inst.m, inst.n);
    Ok(Outcome { code: 0, stdout: emit(doc, a.json_out.as_deref(), summary)?, stderr: String::new() })
}

pub fn load_instance(path: &str) -> Result<(InstanceFile, ProblemInstance), CliError> {
    let file: InstanceFile = from_json(&read(path)?)?;
    let inst = file.instance()?;
    Ok((file, inst))
}

pub fn cmd_solve(a: &SolveArgs) -> Result<Outcome, CliError> {
    let (_, inst) = load_instance(&a.instance)?;
    let opts = SolveOptions { tol: a.tol, ..SolveOptions::default() };
    let rep = solve(&inst, &opts)?;
    let doc = to_json(&SolutionFile {
        format: SOLUTION_FORMAT.into(),
        version: VERSION.into(),
        residual: rep.residual,
        admm_iterations: rep.admm_iterations,
        newton_iterations: rep.newton_iterations,
        point: point_file(&rep.point),
    });
    let summary = format!(
        "‖F‖_∞ = {:e} after {} ADMM and {} Newton iterations\n",
        rep.residual, rep.admm_iterations, rep.newton_iterations
    );
    Ok(Outcome { code: 0, stdout: emit(doc, a.json_out.as_deref(), summary)?, stderr: String::new() })
}

fn parse_radii(list: &Option<Vec<String>>) -> Result<Vec<f64>, CliError> {
    match list {
        None => Ok(Vec::new()),
        Some(v) if v.len() == 1 && v[0] == "default" => Ok(default_radii()),
        Some(v) => v
            .iter()
            .map(|s| match s.parse::<f64>() {
                Ok(r) if r >= 0.0 && r.is_finite() => Ok(r),
                _ => Err(CliError::Format(format!("bad radius {s:?}"))),
            })
            .collect(),
    }
}

fn certify_point(a: &CertifyArgs, file: &InstanceFile, inst: &ProblemInstance) -> Result<(KktPoint, String), CliError> {
    if let Some(p) = &a.point {
        let sol: SolutionFile = from_json(&read(p)?)?;
        return Ok((point_from_file(inst, &sol.point)?, format!("solution file {p}")));
    }
    if let Some(pt) = file.planted_point(inst)? {
        return Ok((pt, "planted".into()));
    }
    let rep = solve(inst, &SolveOptions { tol: a.tol, ..SolveOptions::default() })?;
    Ok((rep.point, "solver".into()))
}

pub fn cmd_certify(a: &CertifyArgs) -> Result<Outcome, CliError> {
    let (file, inst) = load_instance(&a.instance)?;
    let (pt, source) = certify_point(a, &file, &inst)?;
    let conditions = match &a.conditions {
        Some(v) => v.iter().map(|s| parse_condition(s)).collect::<Result<Vec<_>, _>>()?,
        None => Condition::ALL.to_vec(),
    };
    let radii = parse_radii(&a.radii)?;
    let opts = ReportOptions {
        conditions: conditions.clone(),
        search: KernelSearchOptions { starts: a.samples, seed: a.seed, ..KernelSearchOptions::default() },
        f_prime_starts: a.f_prime_starts,
        radii: radii.clone(),
        trials: a.trials,
    };
    let mut report = ReportFile {
        format: REPORT_FORMAT.into(),
        version: VERSION.into(),
        seed: a.seed,
        rng: RNG_NAME.into(),
        settings: ReportSettings {
            samples: a.samples,
            f_prime_starts: a.f_prime_starts,
            radii,
            trials: a.trials,
            conditions: conditions.iter().map(|c| c.name().to_string()).collect(),
        },
        out_of_scope: None,
        point_source: source,
        residual: kkt_residual(&inst, &pt)?.inf_norm(),
        conditions: Vec::new(),
        statements: Vec::new(),
        isolated_calm_claim: Status::Inconclusive.name().into(),
        f_prime: None,
        inconsistencies: Vec::new(),
        kappa: None,
        instance: instance_file(&inst, None, file.seed),
        point: point_file(&pt),
    };
    let rep = match stability_report(&inst, &pt, &opts) {
        Ok(r) => r,
        Err(specnorm::Error::DegeneratePoint(why)) => {
            report.out_of_scope = Some(why.clone());
            let doc = to_json(&report);
            let summary = format!("point out of scope: {why}\n");
            let stdout = emit(doc, a.json_out.as_deref(), summary)?;
            return Ok(Outcome { code: 4, stdout, stderr: format!("error: degenerate point: {why}\n") });
        }
        Err(e) => return Err(e.into()),
    };
    let (mut entries, statements, f_prime, kappa) = report_sections(&rep, F_PRIME_ZERO);
    let ctx = CheckContext::new(&inst, &pt)?;
    for ((cond, verdict), entry) in rep.verdicts.iter().zip(entries.iter_mut()) {
        if let Some(w) = &verdict.witness {
            let chk = recheck_witness(&ctx, *cond, w)?;
            entry.residuals = chk
                .residuals
                .into_iter()
                .map(|(name, value, bound)| ResidualEntry { name, value: crate::files::finite(value), bound })
                .collect();
            entry.f_prime_residual = chk.f_prime_residual;
        }
    }
    report.conditions = entries;
    report.statements = statements;
    report.isolated_calm_claim = rep.isolated_calm_claim.name().into();
    report.f_prime = Some(f_prime);
    report.inconsistencies = rep.inconsistencies.clone();
    report.kappa = kappa;
    let mut summary = String::new();
    for e in &report.conditions {
        summary.push_str(&format!("{:<7} {}\n", e.name, e.status));
    }
    for s in &report.statements {
        summary.push_str(&format!("({}) {}\n", s.label, s.status));
    }
    let doc = to_json(&report);
    Ok(Outcome { code: 0, stdout: emit(doc, a.json_out.as_deref(), summary)?, stderr: String::new() })
}

/// One line per witness, and whether all reproduced.
pub fn verify_report(report: &ReportFile) -> Result<(bool, Vec<String>), CliError> {
    if report.format != REPORT_FORMAT {
        return Err(CliError::Format(format!("expected format {REPORT_FORMAT:?}, got {:?}", report.format)));
    }
    let inst = report.instance.instance()?;
    let pt = point_from_file(&inst, &report.point)?;
    let f_witness = report.f_prime.as_ref().and_then(|f| f.witness.as_ref().map(|w| (f.threshold, w)));
    let has_any = report.conditions.iter().any(|c| c.witness.is_some()) || f_witness.is_some();
    if !has_any {
        return Ok((true, vec!["nothing to verify".into()]));
    }
    let ctx = CheckContext::new(&inst, &pt)?;
    let mut lines = Vec::new();
    let mut all = true;
    for entry in &report.conditions {
        let Some(wf) = &entry.witness else { continue };
        let cond = parse_condition(&entry.name)?;
        let chk = recheck_witness(&ctx, cond, &wf.witness(&inst)?)?;
        let ok = chk.reproduced && entry.status == Status::Fails.name();
        all &= ok;
        let worst = chk
            .residuals
            .iter()
            .filter(|(_, v, b)| !(v.is_finite() && v <= b))
            .map(|(n, v, b)| format!("{n} = {v:e} > {b:e}"))
            .collect::<Vec<_>>();
        lines.push(if ok {
            format!("{}: witness reproduced", entry.name)
        } else if worst.is_empty() {
            format!("{}: witness present but status is {}", entry.name, entry.status)
        } else {
            format!("{}: witness NOT reproduced ({})", entry.name, worst.join("; "))
        });
    }
    if let Some((threshold, wf)) = f_witness {
        let delta = wf.triple(&inst)?;
        let value = kkt_dirderiv(&inst, &pt, &delta)?.inf_norm();
        let unit = (delta.norm() - 1.0).abs();
        let ok = value <= threshold && unit <= UNIT_TOL;
        all &= ok;
        lines.push(format!(
            "F′ kernel: ‖F′(δ)‖_∞ = {value:e} (bound {threshold:e}), |‖δ‖ − 1| = {unit:e}: {}",
            if ok { "reproduced" } else { "NOT reproduced" }
        ));
    }
    Ok((all, lines))
}

pub fn cmd_verify_witness(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let report: ReportFile = from_json(&read(&a.report)?)?;
    let (ok, lines) = verify_report(&report)?;
    let stdout = lines.join("\n") + "\n";
    if ok {
        Ok(Outcome { code: 0, stdout, stderr: String::new() })
    } else {
        let e = CliError::WitnessMismatch(format!("{} report entries failed", lines.iter().filter(|l| l.contains("NOT") || l.contains("status is")).count()));
        Ok(Outcome { code: e.exit_code(), stdout, stderr: format!("error: {e}\n") })
    }
}
