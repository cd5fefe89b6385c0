//! Problem data, KKT points, the residual map `F` and its directional derivative.

use crate::cones::{cone_project, ConeSpec, ConeTag, COMPLEMENTARITY_TOL};
use crate::error::{Error, Result};
use crate::matcore::{ensure_finite, lambda_min, Mat, Vector};
use crate::proxlib::{prox_spectral, SpectralPair};
use crate::sensitivity::prox_dirderiv;

/// `h(u) = ½ uᵀ M u + qᵀ u` with `M` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct HQuadratic {
    pub m: Mat,
    pub q: Vector,
}

pub const MIN_CURVATURE: f64 = 1e-10;

impl HQuadratic {
    pub fn new(m: Mat, q: Vector) -> Result<Self> {
        let h = HQuadratic { m, q };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.q.len();
        if self.m.shape() != (d, d) {
            return Err(Error::ShapeMismatch(format!("M is {:?}, q has length {d}", self.m.shape())));
        }
        ensure_finite(&self.m)?;
        if self.q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if (&self.m - self.m.transpose()).amax() > 1e-12 * self.m.amax().max(1.0) {
            return Err(Error::InvalidSpec("M is not symmetric".into()));
        }
        if d > 0 && lambda_min(&self.m) < MIN_CURVATURE {
            return Err(Error::InvalidSpec("M is not positive definite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn grad(&self, u: &Vector) -> Vector {
        &self.m * u + &self.q
    }

    /// `∇h*(w) = M⁻¹ (w − q)`.
    pub fn conj_grad(&self, w: &Vector) -> Vector {
        let rhs = w - &self.q;
        self.m.clone().cholesky().map(|c| c.solve(&rhs)).unwrap_or(rhs)
    }
}

/// `min h(𝒬X) + ⟨C, X⟩ + ‖X‖₂  s.t.  𝓑X − b ∈ 𝒫`, with `𝒬`, `𝓑` acting on column-major `vec(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub m: usize,
    pub n: usize,
    pub qop: Mat,
    pub bop: Mat,
    pub c: Mat,
    pub b: Vector,
    pub cone: ConeSpec,
    pub h: HQuadratic,
}

impl ProblemInstance {
    pub fn d(&self) -> usize {
        self.qop.nrows()
    }

    pub fn l(&self) -> usize {
        self.bop.nrows()
    }

    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    pub fn validate(&self) -> Result<()> {
        let (mn, d, l) = (self.mn(), self.d(), self.l());
        if self.m == 0 || self.n == 0 {
            return Err(Error::ShapeMismatch("empty matrix variable".into()));
        }
        if self.qop.ncols() != mn || self.bop.ncols() != mn {
            return Err(Error::ShapeMismatch(format!("operators must have m·n = {mn} columns")));
        }
        if self.c.shape() != (self.m, self.n) {
            return Err(Error::ShapeMismatch(format!("C is {:?}, expected ({}, {})", self.c.shape(), self.m, self.n)));
        }
        if self.b.len() != l || self.cone.len() != l {
            return Err(Error::ShapeMismatch(format!("b and cone must have length l = {l}")));
        }
        if self.h.dim() != d {
            return Err(Error::ShapeMismatch(format!("h has dimension {}, Qop has {d} rows", self.h.dim())));
        }
        for a in [&self.qop, &self.bop, &self.c] {
            ensure_finite(a)?;
        }
        if self.b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.h.validate()
    }

    pub fn vec(&self, x: &Mat) -> Vector {
        Vector::from_column_slice(x.as_slice())
    }

    pub fn unvec(&self, v: &Vector) -> Mat {
        Mat::from_column_slice(self.m, self.n, v.as_slice())
    }

    pub fn apply_q(&self, x: &Mat) -> Vector {
        &self.qop * self.vec(x)
    }

    pub fn adj_q(&self, u: &Vector) -> Mat {
        self.unvec(&(self.qop.transpose() * u))
    }

    pub fn apply_b(&self, x: &Mat) -> Vector {
        &self.bop * self.vec(x)
    }

    pub fn adj_b(&self, y: &Vector) -> Mat {
        self.unvec(&(self.bop.transpose() * y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: Mat,
    pub y: Vector,
    pub s: Mat,
    /// `∇h(𝒬X)` at consistency.
    pub w: Vector,
}

impl KktPoint {
    /// Point with `w` recomputed as `∇h(𝒬X)`.
    pub fn new(inst: &ProblemInstance, x: Mat, y: Vector, s: Mat) -> Self {
        let w = inst.h.grad(&inst.apply_q(&x));
        KktPoint { x, y, s, w }
    }

    fn check_shape(&self, inst: &ProblemInstance) -> Result<()> {
        if self.x.shape() != (inst.m, inst.n) || self.s.shape() != (inst.m, inst.n) {
            return Err(Error::ShapeMismatch("X and S must be m×n".into()));
        }
        if self.y.len() != inst.l() {
            return Err(Error::ShapeMismatch("y must have length l".into()));
        }
        if self.w.len() != inst.d() {
            return Err(Error::ShapeMismatch("w must have length d".into()));
        }
        Ok(())
    }
}

/// A triple in the space of `F`: matrix, cone vector, matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub z: Mat,
    pub y: Vector,
    pub s: Mat,
}

impl Triple {
    pub fn zeros(inst: &ProblemInstance) -> Self {
        Triple { z: Mat::zeros(inst.m, inst.n), y: Vector::zeros(inst.l()), s: Mat::zeros(inst.m, inst.n) }
    }

    pub fn inf_norm(&self) -> f64 {
        self.z.amax().max(self.y.amax()).max(self.s.amax())
    }

    pub fn norm(&self) -> f64 {
        (self.z.norm_squared() + self.y.norm_squared() + self.s.norm_squared()).sqrt()
    }

    pub fn len(&self) -> usize {
        2 * self.z.len() + self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened as `[vec Z; y; vec S]`.
    pub fn flatten(&self) -> Vector {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(self.z.as_slice());
        v.extend_from_slice(self.y.as_slice());
        v.extend_from_slice(self.s.as_slice());
        Vector::from_vec(v)
    }

    pub fn unflatten(inst: &ProblemInstance, v: &Vector) -> Self {
        let (mn, l) = (inst.mn(), inst.l());
        Triple {
            z: Mat::from_column_slice(inst.m, inst.n, &v.as_slice()[..mn]),
            y: Vector::from_column_slice(&v.as_slice()[mn..mn + l]),
            s: Mat::from_column_slice(inst.m, inst.n, &v.as_slice()[mn + l..]),
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Triple { z: &self.z * t, y: &self.y * t, s: &self.s * t }
    }

    pub fn add(&self, other: &Triple) -> Self {
        Triple { z: &self.z + &other.z, y: &self.y + &other.y, s: &self.s + &other.s }
    }

    pub fn sub(&self, other: &Triple) -> Self {
        self.add(&other.scaled(-1.0))
    }
}

impl KktPoint {
    pub fn as_triple(&self) -> Triple {
        Triple { z: self.x.clone(), y: self.y.clone(), s: self.s.clone() }
    }

    pub fn from_triple(inst: &ProblemInstance, t: &Triple) -> Self {
        KktPoint::new(inst, t.z.clone(), t.y.clone(), t.s.clone())
    }

    pub fn shifted(&self, inst: &ProblemInstance, delta: &Triple) -> Self {
        KktPoint::from_triple(inst, &self.as_triple().add(delta))
    }
}

/// `F(X, y, S) = (C + 𝓑*y + 𝒬*∇h(𝒬X) + S;  𝓑X − b − Π_𝒫(𝓑X − b + y);  X − Prox_θ(X + S))`.
pub fn kkt_residual(inst: &ProblemInstance, pt: &KktPoint) -> Result<Triple> {
    pt.check_shape(inst)?;
    let grad = inst.h.grad(&inst.apply_q(&pt.x));
    let stat = &inst.c + inst.adj_b(&pt.y) + inst.adj_q(&grad) + &pt.s;
    let bx = inst.apply_b(&pt.x) - &inst.b;
    let proj = cone_project(&inst.cone, (&bx + &pt.y).as_slice());
    let cone = bx - Vector::from_vec(proj);
    let prox = prox_spectral(&(&pt.x + &pt.s))?;
    Ok(Triple { z: stat, y: cone, s: &pt.x - prox.p })
}

/// Coordinatewise `Π′_𝒫(z0; d)`, with `z0` classified against zero by `tol`.
pub fn proj_dirderiv_polyhedral_tol(spec: &ConeSpec, z0: &[f64], d: &[f64], tol: f64) -> Vec<f64> {
    spec.tags
        .iter()
        .zip(z0.iter().zip(d))
        .map(|(t, (&z, &v))| match t {
            ConeTag::Nonneg if z > tol => v,
            ConeTag::Nonneg if z < -tol => 0.0,
            ConeTag::Nonneg => v.max(0.0),
            ConeTag::Zero => 0.0,
            ConeTag::Free => v,
        })
        .collect()
}

pub fn proj_dirderiv_polyhedral(spec: &ConeSpec, z0: &[f64], d: &[f64]) -> Vec<f64> {
    proj_dirderiv_polyhedral_tol(spec, z0, d, 0.0)
}

/// Linearisation data of `F` at a point: the prox pair at `X + S` and the cone argument.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub pair: SpectralPair,
    pub cone_arg: Vector,
    pub classify_tol: f64,
}

impl Linearization {
    pub fn at(inst: &ProblemInstance, pt: &KktPoint, classify_tol: f64) -> Result<Self> {
        pt.check_shape(inst)?;
        let pair = prox_spectral(&(&pt.x + &pt.s))?;
        if pair.degenerate {
            return Err(Error::DegeneratePoint("Prox_θ(X + S) = 0".into()));
        }
        let cone_arg = inst.apply_b(&pt.x) - &inst.b + &pt.y;
        Ok(Linearization { pair, cone_arg, classify_tol })
    }

    pub fn apply(&self, inst: &ProblemInstance, delta: &Triple) -> Result<Triple> {
        let qz = inst.apply_q(&delta.z);
        let first = inst.adj_q(&(&inst.h.m * qz)) + inst.adj_b(&delta.y) + &delta.s;
        let bz = inst.apply_b(&delta.z);
        let dir = &bz + &delta.y;
        let pd = proj_dirderiv_polyhedral_tol(&inst.cone, self.cone_arg.as_slice(), dir.as_slice(), self.classify_tol);
        let second = bz - Vector::from_vec(pd);
        let third = &delta.z - prox_dirderiv(&self.pair, &(&delta.z + &delta.s))?;
        Ok(Triple { z: first, y: second, s: third })
    }
}

/// `F′((X̄, ȳ, S̄); (ΔZ, Δy, ΔS))`.
pub fn kkt_dirderiv(inst: &ProblemInstance, pt: &KktPoint, delta: &Triple) -> Result<Triple> {
    Linearization::at(inst, pt, COMPLEMENTARITY_TOL)?.apply(inst, delta)
}
