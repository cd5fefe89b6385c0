//! JSON instance, point and report documents.
//!
//! Matrices are arrays of rows. `Qop` and `Bop` act on the column-major `vec(X)`.
//! Floats are written in the shortest form that parses back to the same bits.

use serde::{Deserialize, Serialize};
use specnorm::cones::{ConeSpec, ConeTag};
use specnorm::kktstab::{
    Condition, Evidence, FPrimeSearch, HQuadratic, KappaTable, KktPoint, ProblemInstance, StabilityReport, Status,
    Triple, Verdict, Witness,
};
use specnorm::matcore::{Mat, Vector};

use crate::error::CliError;

pub const INSTANCE_FORMAT: &str = "specnorm-instance";
pub const REPORT_FORMAT: &str = "specnorm-report";
pub const VECTORIZATION: &str = "column-major vec(X); rows of Qop and Bop act on vec(X)";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HFile {
    #[serde(rename = "M")]
    pub m: Rows,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFile {
    #[serde(rename = "X")]
    pub x: Rows,
    pub y: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Rows,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub version: String,
    pub vectorization: String,
    pub dims: Dims,
    #[serde(rename = "Qop")]
    pub qop: Rows,
    #[serde(rename = "Bop")]
    pub bop: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    pub b: Vec<f64>,
    pub cone: Vec<String>,
    pub h: HFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<PointFile>,
}

pub fn rows(a: &Mat) -> Rows {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

fn mat(name: &str, r: &Rows, nrows: usize, ncols: usize) -> Result<Mat, CliError> {
    if r.len() != nrows || r.iter().any(|row| row.len() != ncols) {
        return Err(CliError::Format(format!("{name} must be {nrows}×{ncols}")));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| r[i][j]))
}

fn vector(name: &str, v: &[f64], len: usize) -> Result<Vector, CliError> {
    if v.len() != len {
        return Err(CliError::Format(format!("{name} must have length {len}")));
    }
    Ok(Vector::from_column_slice(v))
}

fn tag_name(t: ConeTag) -> &'static str {
    match t {
        ConeTag::Nonneg => "nonneg",
        ConeTag::Zero => "zero",
        ConeTag::Free => "free",
    }
}

pub fn parse_tag(s: &str) -> Result<ConeTag, CliError> {
    match s {
        "nonneg" => Ok(ConeTag::Nonneg),
        "zero" => Ok(ConeTag::Zero),
        "free" => Ok(ConeTag::Free),
        other => Err(CliError::Format(format!("unknown cone tag {other:?}"))),
    }
}

pub fn point_file(p: &KktPoint) -> PointFile {
    PointFile { x: rows(&p.x), y: p.y.iter().copied().collect(), s: rows(&p.s), w: p.w.iter().copied().collect() }
}

/// Rebuilds a point; `w` is recomputed from `X` and compared with the stored value.
pub fn point_from_file(inst: &ProblemInstance, f: &PointFile) -> Result<KktPoint, CliError> {
    let x = mat("X", &f.x, inst.m, inst.n)?;
    let y = vector("y", &f.y, inst.l())?;
    let s = mat("S", &f.s, inst.m, inst.n)?;
    let pt = KktPoint::new(inst, x, y, s);
    let stored = vector("w", &f.w, inst.d())?;
    if (&stored - &pt.w).amax() > 1e-9 * pt.w.amax().max(1.0) {
        return Err(CliError::Format("w does not equal ∇h(𝒬X)".into()));
    }
    Ok(pt)
}

pub fn instance_file(inst: &ProblemInstance, planted: Option<&KktPoint>, seed: Option<u64>) -> InstanceFile {
    InstanceFile {
        format: INSTANCE_FORMAT.into(),
        version: VERSION.into(),
        vectorization: VECTORIZATION.into(),
        dims: Dims { m: inst.m, n: inst.n, d: inst.d(), l: inst.l() },
        qop: rows(&inst.qop),
        bop: rows(&inst.bop),
        c: rows(&inst.c),
        b: inst.b.iter().copied().collect(),
        cone: inst.cone.tags.iter().map(|&t| tag_name(t).to_string()).collect(),
        h: HFile { m: rows(&inst.h.m), q: inst.h.q.iter().copied().collect() },
        seed,
        planted: planted.map(point_file),
    }
}

impl InstanceFile {
    pub fn instance(&self) -> Result<ProblemInstance, CliError> {
        if self.format != INSTANCE_FORMAT {
            return Err(CliError::Format(format!("expected format {INSTANCE_FORMAT:?}, got {:?}", self.format)));
        }
        let Dims { m, n, d, l } = self.dims;
        let tags = self.cone.iter().map(|s| parse_tag(s)).collect::<Result<Vec<_>, _>>()?;
        if tags.len() != l {
            return Err(CliError::Format(format!("cone must have {l} tags")));
        }
        let h = HQuadratic::new(mat("h.M", &self.h.m, d, d)?, vector("h.q", &self.h.q, d)?)?;
        let inst = ProblemInstance {
            m,
            n,
            qop: mat("Qop", &self.qop, d, m * n)?,
            bop: mat("Bop", &self.bop, l, m * n)?,
            c: mat("C", &self.c, m, n)?,
            b: vector("b", &self.b, l)?,
            cone: ConeSpec::new(tags),
            h,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn planted_point(&self, inst: &ProblemInstance) -> Result<Option<KktPoint>, CliError> {
        self.planted.as_ref().map(|p| point_from_file(inst, p)).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WitnessFile {
    Multiplier {
        y: Vec<f64>,
        #[serde(rename = "S")]
        s: Rows,
    },
    Direction {
        #[serde(rename = "D")]
        d: Rows,
    },
    Covector {
        y: Vec<f64>,
    },
}

impl WitnessFile {
    pub fn from_witness(w: &Witness) -> Self {
        match w {
            Witness::Multiplier { y, s } => WitnessFile::Multiplier { y: y.iter().copied().collect(), s: rows(s) },
            Witness::Direction { d } => WitnessFile::Direction { d: rows(d) },
            Witness::Covector { y } => WitnessFile::Covector { y: y.iter().copied().collect() },
        }
    }

    pub fn witness(&self, inst: &ProblemInstance) -> Result<Witness, CliError> {
        Ok(match self {
            WitnessFile::Multiplier { y, s } => {
                Witness::Multiplier { y: vector("witness y", y, inst.l())?, s: mat("witness S", s, inst.m, inst.n)? }
            }
            WitnessFile::Direction { d } => Witness::Direction { d: mat("witness D", d, inst.m, inst.n)? },
            WitnessFile::Covector { y } => Witness::Covector { y: vector("witness y", y, inst.l())? },
        })
    }
}

/// A `(ΔZ, Δy, ΔS)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaFile {
    #[serde(rename = "Z")]
    pub z: Rows,
    pub y: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Rows,
}

impl DeltaFile {
    pub fn from_triple(t: &Triple) -> Self {
        DeltaFile { z: rows(&t.z), y: t.y.iter().copied().collect(), s: rows(&t.s) }
    }

    pub fn triple(&self, inst: &ProblemInstance) -> Result<Triple, CliError> {
        Ok(Triple {
            z: mat("delta Z", &self.z, inst.m, inst.n)?,
            y: vector("delta y", &self.y, inst.l())?,
            s: mat("delta S", &self.s, inst.m, inst.n)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub nonzero_norm: f64,
    pub zero_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub value: Option<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub name: String,
    pub status: String,
    pub exact: bool,
    pub samples: usize,
    pub sweeps: usize,
    pub thresholds: Thresholds,
    /// Largest kernel element norm reached by the sampled search.
    pub largest_norm: Option<f64>,
    pub witness_gap: Option<f64>,
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessFile>,
    /// Residuals of the witness recomputed at report time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<ResidualEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_prime_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementEntry {
    pub label: String,
    pub status: String,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FPrimeEntry {
    pub status: String,
    pub starts: usize,
    pub residual: Option<f64>,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<DeltaFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRowEntry {
    pub radius: f64,
    pub max_ratio: f64,
    pub successes: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEntry {
    pub rows: Vec<KappaRowEntry>,
    /// `None` when some trial failed.
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub samples: usize,
    pub f_prime_starts: usize,
    pub radii: Vec<f64>,
    pub trials: usize,
    pub conditions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: String,
    pub seed: u64,
    pub rng: String,
    pub settings: ReportSettings,
    /// Set when the point lies outside the scope of the checkers (e.g. `X = 0`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_of_scope: Option<String>,
    pub point_source: String,
    pub residual: f64,
    pub conditions: Vec<ConditionEntry>,
    pub statements: Vec<StatementEntry>,
    pub isolated_calm_claim: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_prime: Option<FPrimeEntry>,
    pub inconsistencies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaEntry>,
    pub instance: InstanceFile,
    pub point: PointFile,
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn condition_entry(cond: Condition, v: &Verdict) -> ConditionEntry {
    let Evidence { starts, sweeps, largest_norm, witness_gap, exact, nonzero_norm, zero_norm, note } = &v.evidence;
    ConditionEntry {
        name: cond.name().into(),
        status: v.status.name().into(),
        exact: *exact,
        samples: *starts,
        sweeps: *sweeps,
        thresholds: Thresholds { nonzero_norm: *nonzero_norm, zero_norm: *zero_norm },
        largest_norm: finite(*largest_norm),
        witness_gap: finite(*witness_gap),
        note: note.clone(),
        witness: v.witness.as_ref().map(WitnessFile::from_witness),
        residuals: Vec::new(),
        f_prime_residual: None,
    }
}

pub fn f_prime_entry(f: &FPrimeSearch, threshold: f64) -> FPrimeEntry {
    FPrimeEntry {
        status: f.status.name().into(),
        starts: f.starts,
        residual: finite(f.residual),
        threshold,
        witness: f.witness.as_ref().map(DeltaFile::from_triple),
    }
}

pub fn kappa_entry(k: &KappaTable) -> KappaEntry {
    KappaEntry {
        rows: k
            .rows
            .iter()
            .map(|r| KappaRowEntry { radius: r.radius, max_ratio: r.max_ratio, successes: r.successes, trials: r.trials })
            .collect(),
        spread: finite(k.spread()),
    }
}

/// Condition, statement, `F′` and κ sections of a report.
pub fn report_sections(
    rep: &StabilityReport,
    f_prime_threshold: f64,
) -> (Vec<ConditionEntry>, Vec<StatementEntry>, FPrimeEntry, Option<KappaEntry>) {
    let conditions = rep.verdicts.iter().map(|(c, v)| condition_entry(*c, v)).collect();
    let statements = rep
        .statements
        .iter()
        .map(|s| StatementEntry { label: s.label.to_string(), status: s.status.name().into(), basis: s.basis.clone() })
        .collect();
    (conditions, statements, f_prime_entry(&rep.f_prime, f_prime_threshold), rep.kappa.as_ref().map(kappa_entry))
}

pub fn parse_status(s: &str) -> Result<Status, CliError> {
    Status::parse(s).ok_or_else(|| CliError::Format(format!("unknown status {s:?}")))
}

pub fn parse_condition(s: &str) -> Result<Condition, CliError> {
    Condition::parse(s).ok_or_else(|| CliError::Format(format!("unknown condition {s:?}")))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents contain only finite floats");
    s.push('\n');
    s
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Format(e.to_string()))
}
