//! Instances with a planted KKT point of prescribed spectral structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::instance::{kkt_residual, HQuadratic, KktPoint, ProblemInstance};
use crate::cones::{matrix_cone_model, sample_model, ConeSpec, ConeTag, MatrixCone};
use crate::error::{Error, Result};
use crate::matcore::{Mat, Vector};
use crate::proxlib::prox_spectral;
use crate::sampling::{compose, gaussian_matrix, random_orthogonal, SpectralLayout};

/// Which certificate the generator breaks on purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Plant {
    #[default]
    None,
    /// Multiplier pair in the SSRCQ kernel.
    Ssrcq,
    /// Multiplier pair in the SRCQ kernel (hence also SSRCQ).
    Srcq,
    /// Direction in the WSOSC kernel.
    Wsosc,
    /// Direction in the SOSC kernel.
    Sosc,
}

impl Plant {
    pub fn name(self) -> &'static str {
        match self {
            Plant::None => "none",
            Plant::Ssrcq => "ssrcq",
            Plant::Srcq => "srcq",
            Plant::Wsosc => "wsosc",
            Plant::Sosc => "sosc",
        }
    }

    pub fn parse(s: &str) -> Option<Plant> {
        [Plant::None, Plant::Ssrcq, Plant::Srcq, Plant::Wsosc, Plant::Sosc].into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSpec {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub l: usize,
    /// 0 or 1: an index with `σ(W) = 1`.
    pub alpha1: usize,
    /// Indices with `0 < σ(W) < 1`.
    pub alpha2: usize,
    /// `σ(W)` on α₂; equal weights when `None`.
    pub alpha2_weights: Option<Vec<f64>>,
    /// Active indices with `σ(W) = 0`.
    pub alpha3: usize,
    /// Inactive nonzero singular values, followed by zeros to fill `min(m, n)`.
    pub beta: usize,
    pub lambda: f64,
    pub cone: Option<Vec<ConeTag>>,
    pub plant: Plant,
    pub seed: u64,
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec {
            m: 2,
            n: 3,
            d: 4,
            l: 2,
            alpha1: 1,
            alpha2: 0,
            alpha2_weights: None,
            alpha3: 0,
            beta: 1,
            lambda: 1.0,
            cone: None,
            plant: Plant::None,
            seed: 0,
        }
    }
}

impl SeedSpec {
    pub fn layout(&self) -> Result<SpectralLayout> {
        let r = self.m.min(self.n);
        if self.alpha1 > 1 {
            return Err(Error::InvalidSpec("|α₁| ≤ 1: σ(W) sums to 1".into()));
        }
        if self.alpha1 + self.alpha2 == 0 {
            return Err(Error::InvalidSpec(
                "σ(W) must carry unit trace on α₁ ∪ α₂; an α₃-only configuration has none".into(),
            ));
        }
        if self.alpha1 == 1 && self.alpha2 > 0 {
            return Err(Error::InvalidSpec("α₁ already carries the whole unit trace; α₂ must be empty".into()));
        }
        if self.alpha2 == 1 {
            return Err(Error::InvalidSpec("a single α₂ index would carry σ(W) = 1; use α₁".into()));
        }
        let used = self.alpha1 + self.alpha2 + self.alpha3;
        if used > r || self.beta > r - used {
            return Err(Error::InvalidSpec(format!("α and β sizes exceed min(m, n) = {r}")));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidSpec("λ* must be positive".into()));
        }
        let mut alpha_w = vec![1.0; self.alpha1];
        match &self.alpha2_weights {
            Some(w) => {
                if w.len() != self.alpha2 || w.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                    return Err(Error::InvalidSpec("α₂ weights must be in (0, 1), one per index".into()));
                }
                alpha_w.extend(w);
            }
            None => alpha_w.extend(vec![1.0 / self.alpha2 as f64; self.alpha2]),
        }
        alpha_w.extend(vec![0.0; self.alpha3]);
        let mut beta = Vec::new();
        for k in 0..self.beta {
            beta.push(self.lambda * (0.8 - 0.6 * k as f64 / self.beta.max(1) as f64));
        }
        beta.extend(vec![0.0; r - used - self.beta]);
        let lay = SpectralLayout { lambda: self.lambda, alpha_w, beta };
        lay.validate()?;
        Ok(lay)
    }
}

fn random_tags(l: usize, rng: &mut ChaCha8Rng) -> Vec<ConeTag> {
    (0..l).map(|_| [ConeTag::Nonneg, ConeTag::Zero, ConeTag::Free][rng.random_range(0..3)]).collect()
}

/// Complementary `(z, y)` with `z ∈ 𝒫`, `y ∈ 𝒫°`, `⟨z, y⟩ = 0`.
fn complementary_pair(tags: &[ConeTag], rng: &mut ChaCha8Rng) -> (Vector, Vector) {
    let mut z = Vector::zeros(tags.len());
    let mut y = Vector::zeros(tags.len());
    for (i, t) in tags.iter().enumerate() {
        match t {
            ConeTag::Nonneg => match rng.random_range(0..3) {
                0 => z[i] = rng.random_range(0.2..2.0),
                1 => y[i] = -rng.random_range(0.2..2.0),
                _ => {}
            },
            ConeTag::Zero => y[i] = rng.random_range(-2.0..2.0),
            ConeTag::Free => z[i] = rng.random_range(-2.0..2.0),
        }
    }
    (z, y)
}

fn nonzero_sample(pair: &crate::proxlib::SpectralPair, cone: MatrixCone, rng: &mut ChaCha8Rng) -> Result<Mat> {
    let model = matrix_cone_model(pair, cone)?;
    for _ in 0..50 {
        let z = sample_model(&model, rng);
        let d = pair.from_frame(&model.assemble(z.as_slice()));
        if d.norm() > 1e-3 {
            return Ok(&d / d.norm());
        }
    }
    Err(Error::InvalidSpec(format!("the cone {cone:?} is {{0}} for this configuration; nothing to plant")))
}

/// Removes `vec(D)` from the row space of `op`.
fn annihilate(op: &Mat, d: &Vector) -> Mat {
    let u = d / d.norm();
    op - (op * &u) * u.transpose()
}

pub fn generate_certified(spec: &SeedSpec) -> Result<(ProblemInstance, KktPoint)> {
    let lay = spec.layout()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (r_rows, r_cols) = (m.min(n), m.max(n));
    let u = random_orthogonal(r_rows, &mut rng);
    let v = random_orthogonal(r_cols, &mut rng);
    let orient = |a: Mat| if m <= n { a } else { a.transpose() };
    let x = orient(compose(&u, &lay.sigma_p(), &v));
    let s = orient(compose(&u, &lay.sigma_w(), &v));
    let mn = m * n;
    let mut qop = gaussian_matrix(spec.d, mn, &mut rng);
    let g = gaussian_matrix(spec.d, spec.d, &mut rng);
    let hm = &g * g.transpose() / spec.d.max(1) as f64 + Mat::identity(spec.d, spec.d) * 0.5;
    let hq = Vector::from_iterator(spec.d, (0..spec.d).map(|_| rng.random_range(-1.0..1.0)));
    let mut bop = gaussian_matrix(spec.l, mn, &mut rng);
    let mut tags = match &spec.cone {
        Some(t) if t.len() != spec.l => return Err(Error::InvalidSpec("cone tag count differs from l".into())),
        Some(t) => t.clone(),
        None => random_tags(spec.l, &mut rng),
    };
    let pair = prox_spectral(&(&x + &s))?;
    match spec.plant {
        Plant::None => {}
        Plant::Ssrcq | Plant::Srcq => {
            if spec.l == 0 {
                return Err(Error::InvalidSpec("planting a multiplier kernel needs l ≥ 1".into()));
            }
            let cone = if spec.plant == Plant::Ssrcq { MatrixCone::PolarCritThetaZero } else { MatrixCone::PolarCritTheta };
            let ds = nonzero_sample(&pair, cone, &mut rng)?;
            // 𝓑*e₀ = ΔS on a zero-tagged coordinate, so (Δy, ΔS) = (−e₀, ΔS) is in the kernel.
            tags[0] = ConeTag::Zero;
            bop.set_row(0, &Vector::from_column_slice(ds.as_slice()).transpose());
        }
        Plant::Wsosc | Plant::Sosc => {
            let cone = if spec.plant == Plant::Wsosc {
                MatrixCone::PolarCritThetaStarFlat
            } else {
                MatrixCone::PolarCritThetaStar
            };
            let d = nonzero_sample(&pair, cone, &mut rng)?;
            let dv = Vector::from_column_slice(d.as_slice());
            qop = annihilate(&qop, &dv);
            bop = annihilate(&bop, &dv);
        }
    }
    let (z, y) = complementary_pair(&tags, &mut rng);
    let h = HQuadratic::new(hm, hq)?;
    let probe = ProblemInstance {
        m,
        n,
        qop,
        bop,
        c: Mat::zeros(m, n),
        b: Vector::zeros(spec.l),
        cone: ConeSpec::new(tags),
        h,
    };
    let bx = probe.apply_b(&x);
    let grad = probe.h.grad(&probe.apply_q(&x));
    let c = -(probe.adj_q(&grad) + &s + probe.adj_b(&y));
    let inst = ProblemInstance { c, b: bx - z, ..probe };
    inst.validate()?;
    let point = KktPoint::new(&inst, x, y, s);
    let res = kkt_residual(&inst, &point)?.inf_norm();
    if res > 1e-12 {
        return Err(Error::InvalidSpec(format!("planted point misses the KKT system by {res:e}")));
    }
    Ok((inst, point))
}
