//! Critical cones of the spectral norm and of its conjugate, their polars,
//! and the coordinatewise critical cones of a sign-structured polyhedral cone.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conic::{dykstra, null_basis, BlockCone, ProductCone};
use crate::error::{Error, Result};
use crate::matcore::{lambda_max, lambda_min, skew, submatrix, sym, BlockPartition, Mat, Vector};
use crate::proxlib::SpectralPair;
use crate::sensitivity::nondegenerate;

pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ConeMembershipReport {
    pub member: bool,
    pub residual: f64,
    /// Block conditions that were tested, with their individual violations.
    pub active_pattern: Vec<(String, f64)>,
    /// `sup ⟨H, D⟩/‖D‖` over sampled `D` in the primal cone (polar tests only).
    pub sampled_sup: Option<f64>,
}

struct Checks {
    items: Vec<(String, f64)>,
}

impl Checks {
    fn new() -> Self {
        Checks { items: Vec::new() }
    }

    fn add(&mut self, name: &str, violation: f64) {
        self.items.push((name.to_string(), violation.max(0.0)));
    }

    fn zero_block(&mut self, name: &str, dt: &Mat, rows: &[usize], cols: &[usize]) {
        let v = submatrix(dt, rows, cols).amax();
        self.add(name, v);
    }

    fn finish(self, tol: f64, sampled_sup: Option<f64>) -> ConeMembershipReport {
        let residual = self.items.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        ConeMembershipReport { member: residual <= tol, residual, active_pattern: self.items, sampled_sup }
    }
}

fn non_alpha_prime(part: &BlockPartition, len: usize) -> Vec<usize> {
    let ap = part.alpha_prime();
    (0..len).filter(|i| !ap.contains(i)).collect()
}

fn frame_dir<'a>(pair: &'a SpectralPair, d: &Mat) -> Result<(&'a BlockPartition, Mat)> {
    pair.check_shape(d)?;
    let part = nondegenerate(pair)?;
    Ok((part, pair.to_frame(d)))
}

fn scalar_gap(s: &Mat, tau: f64) -> f64 {
    let mut g = 0.0f64;
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            let target = if i == j { tau } else { 0.0 };
            g = g.max((s[(i, j)] - target).abs());
        }
    }
    g
}

/// `D ∈ C_θ(P, W)`: `S(D̃_αα) = Diag(τ I_{α′}, S(D̃_{α₃α₃}))` with `λ₁(S(D̃_{α₃α₃})) ≤ τ`.
pub fn in_crit_theta(pair: &SpectralPair, d: &Mat, tol: f64) -> Result<ConeMembershipReport> {
    let (part, dt) = frame_dir(pair, d)?;
    let ap = part.alpha_prime();
    let s = sym(&submatrix(&dt, &part.alpha, &part.alpha));
    let tau = lambda_max(&s);
    let mut c = Checks::new();
    c.add("S(D̃) on α′×α′ equals τI", scalar_gap(&sym(&submatrix(&dt, &ap, &ap)), tau));
    let cross = sym_cross(&dt, &ap, &part.alpha3);
    c.add("S(D̃) on α′×α₃ vanishes", cross);
    let s33 = sym(&submatrix(&dt, &part.alpha3, &part.alpha3));
    c.add("λ₁(S(D̃₃₃)) ≤ τ", lambda_max(&s33) - tau);
    Ok(c.finish(tol, None))
}

fn sym_cross(dt: &Mat, rows: &[usize], cols: &[usize]) -> f64 {
    rows.iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| (0.5 * (dt[(i, j)] + dt[(j, i)])).abs())
        .fold(0.0, f64::max)
}

/// `D ∈ C_{θ*}(W, P)`: zero trace on α×α, `D̃_{α₃α₃}` symmetric PSD, and the zero pattern
/// on α₃×β, α₃×c, β×α₃, β×β, β×c.
pub fn in_crit_theta_star(pair: &SpectralPair, d: &Mat, tol: f64) -> Result<ConeMembershipReport> {
    let (part, dt) = frame_dir(pair, d)?;
    let (a3, be, a1) = (&part.alpha3, &part.beta, &part.alpha1);
    let cs: Vec<usize> = (part.m()..dt.ncols()).collect();
    let mut c = Checks::new();
    let tr: f64 = part.alpha.iter().map(|&i| dt[(i, i)]).sum();
    c.add("trace(D̃_αα) = 0", tr.abs());
    c.add("S(D̃_{α₁α₁}) NSD", lambda_max(&sym(&submatrix(&dt, a1, a1))));
    let d33 = submatrix(&dt, a3, a3);
    c.add("D̃_{α₃α₃} symmetric", skew(&d33).amax());
    c.add("D̃_{α₃α₃} PSD", -lambda_min(&d33));
    c.zero_block("D̃_{α₃β} = 0", &dt, a3, be);
    c.zero_block("D̃_{α₃c} = 0", &dt, a3, &cs);
    c.zero_block("D̃_{βα₃} = 0", &dt, be, a3);
    c.zero_block("D̃_{ββ} = 0", &dt, be, be);
    c.zero_block("D̃_{βc} = 0", &dt, be, &cs);
    Ok(c.finish(tol, None))
}

/// `D ∈ C⁰_θ(P, W)`: `S(D̃_αα) = Diag(0, S(D̃_{α₃α₃}))` with the α₃ block NSD.
pub fn in_crit_theta_zero(pair: &SpectralPair, d: &Mat, tol: f64) -> Result<ConeMembershipReport> {
    let (part, dt) = frame_dir(pair, d)?;
    let ap = part.alpha_prime();
    let mut c = Checks::new();
    c.add("S(D̃) on α′×α′ vanishes", sym(&submatrix(&dt, &ap, &ap)).amax());
    c.add("S(D̃) on α′×α₃ vanishes", sym_cross(&dt, &ap, &part.alpha3));
    c.add(
        "S(D̃_{α₃α₃}) NSD",
        lambda_max(&sym(&submatrix(&dt, &part.alpha3, &part.alpha3))),
    );
    Ok(c.finish(tol, None))
}

fn outside_alpha_block(dt: &Mat, part: &BlockPartition) -> f64 {
    let al = &part.alpha;
    let mut v = 0.0f64;
    for i in 0..dt.nrows() {
        for j in 0..dt.ncols() {
            if !(al.contains(&i) && al.contains(&j)) {
                v = v.max(dt[(i, j)].abs());
            }
        }
    }
    v
}

fn polar_alpha_checks(part: &BlockPartition, dt: &Mat) -> Checks {
    let mut c = Checks::new();
    c.add("H̃ supported on α×α", outside_alpha_block(dt, part));
    c.add("H̃_αα symmetric", skew(&submatrix(dt, &part.alpha, &part.alpha)).amax());
    c.add(
        "H̃_{α₃α₃} PSD",
        -lambda_min(&sym(&submatrix(dt, &part.alpha3, &part.alpha3))),
    );
    c
}

/// `H ∈ (C_θ(P, W))°` by the block conditions: support α×α, symmetric, zero trace,
/// `H̃_{α₁α₁}` NSD and `H̃_{α₃α₃}` PSD. Carries a sampled check against `C_θ`.
pub fn in_polar_crit_theta(pair: &SpectralPair, h: &Mat, tol: f64) -> Result<ConeMembershipReport> {
    let (part, dt) = frame_dir(pair, h)?;
    let mut c = polar_alpha_checks(part, &dt);
    let tr: f64 = part.alpha.iter().map(|&i| dt[(i, i)]).sum();
    c.add("trace(H̃_αα) = 0", tr.abs());
    c.add(
        "H̃_{α₁α₁} NSD",
        lambda_max(&sym(&submatrix(&dt, &part.alpha1, &part.alpha1))),
    );
    let sup = default_sampled_sup(pair, h, MatrixCone::CritTheta)?;
    Ok(c.finish(tol, Some(sup)))
}

/// `H ∈ (C⁰_θ(P, W))°`: support α×α, symmetric, `H̃_{α₃α₃}` PSD.
pub fn in_polar_crit_theta_zero(pair: &SpectralPair, h: &Mat, tol: f64) -> Result<ConeMembershipReport> {
    let (part, dt) = frame_dir(pair, h)?;
    let c = polar_alpha_checks(part, &dt);
    let sup = default_sampled_sup(pair, h, MatrixCone::CritThetaZero)?;
    Ok(c.finish(tol, Some(sup)))
}

/// Level `τ″` read off `H̃` on α′: the α₁ entry, or `λ₁` of the symmetric α₂ block.
pub fn polar_level(part: &BlockPartition, dt: &Mat) -> f64 {
    if let Some(&i) = part.alpha1.first() {
        dt[(i, i)]
    } else {
        lambda_max(&sym(&submatrix(dt, &part.alpha2, &part.alpha2)))
    }
}

/// `H ∈ (C_{θ*}(W, P))°`: `H̃_{α′α′} = τ″ I`, `λ₁(S(H̃_{α₃α₃})) ≤ τ″`, the α₃/β rows are free
/// off the α′ columns, and every other block vanishes.
pub fn in_polar_crit_theta_star(pair: &SpectralPair, h: &Mat, tol: f64) -> Result<ConeMembershipReport> {
    let (part, dt) = frame_dir(pair, h)?;
    let ap = part.alpha_prime();
    let rest = non_alpha_prime(part, dt.nrows());
    let rest_cols: Vec<usize> = (0..dt.ncols()).filter(|j| !ap.contains(j)).collect();
    let tau = polar_level(part, &dt);
    let mut c = Checks::new();
    c.add("H̃_{α′α′} = τ″I", scalar_gap(&submatrix(&dt, &ap, &ap), tau));
    c.add(
        "λ₁(S(H̃_{α₃α₃})) ≤ τ″",
        lambda_max(&sym(&submatrix(&dt, &part.alpha3, &part.alpha3))) - tau,
    );
    c.zero_block("H̃ vanishes on α′ rows off α′", &dt, &ap, &rest_cols);
    c.zero_block("H̃ vanishes on α′ columns off α′", &dt, &rest, &ap);
    let sup = default_sampled_sup(pair, h, MatrixCone::CritThetaStar)?;
    Ok(c.finish(tol, Some(sup)))
}

/// The matrix cones attached to a spectral pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixCone {
    CritTheta,
    CritThetaStar,
    CritThetaZero,
    PolarCritTheta,
    PolarCritThetaStar,
    PolarCritThetaZero,
    /// `(C_{θ*})°` with `τ″ = 0`, which is also `C⁰_θ ∩ {ψ* = 0}`.
    PolarCritThetaStarFlat,
}

impl MatrixCone {
    pub fn polar(self) -> MatrixCone {
        match self {
            MatrixCone::CritTheta => MatrixCone::PolarCritTheta,
            MatrixCone::CritThetaStar => MatrixCone::PolarCritThetaStar,
            MatrixCone::CritThetaZero => MatrixCone::PolarCritThetaZero,
            MatrixCone::PolarCritTheta => MatrixCone::CritTheta,
            MatrixCone::PolarCritThetaStar => MatrixCone::CritThetaStar,
            MatrixCone::PolarCritThetaZero => MatrixCone::CritThetaZero,
            MatrixCone::PolarCritThetaStarFlat => MatrixCone::PolarCritThetaStarFlat,
        }
    }
}

/// Orthonormal matrix atom in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Entry(usize, usize),
    /// `(E_ij + E_ji)/√2`.
    Sym(usize, usize),
    /// `(E_ij − E_ji)/√2`.
    Skew(usize, usize),
    /// `I_idx/√|idx|` on the diagonal positions `idx`.
    ScaledIdentity(Vec<usize>),
}

impl Atom {
    pub fn coord(&self, dt: &Mat) -> f64 {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Atom::Entry(i, j) => dt[(*i, *j)],
            Atom::Sym(i, j) => r * (dt[(*i, *j)] + dt[(*j, *i)]),
            Atom::Skew(i, j) => r * (dt[(*i, *j)] - dt[(*j, *i)]),
            Atom::ScaledIdentity(idx) => {
                idx.iter().map(|&i| dt[(i, i)]).sum::<f64>() / (idx.len() as f64).sqrt()
            }
        }
    }

    pub fn add_to(&self, dt: &mut Mat, coef: f64) {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Atom::Entry(i, j) => dt[(*i, *j)] += coef,
            Atom::Sym(i, j) => {
                dt[(*i, *j)] += r * coef;
                dt[(*j, *i)] += r * coef;
            }
            Atom::Skew(i, j) => {
                dt[(*i, *j)] += r * coef;
                dt[(*j, *i)] -= r * coef;
            }
            Atom::ScaledIdentity(idx) => {
                let v = coef / (idx.len() as f64).sqrt();
                for &i in idx {
                    dt[(i, i)] += v;
                }
            }
        }
    }
}

/// A matrix cone as a product cone over orthonormal atoms plus linear equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConeModel {
    pub atoms: Vec<Atom>,
    pub cone: ProductCone,
    /// Rows act on atom coordinates.
    pub equalities: Mat,
    pub rows: usize,
    pub cols: usize,
}

impl MatrixConeModel {
    pub fn coords(&self, dt: &Mat) -> Vector {
        Vector::from_iterator(self.atoms.len(), self.atoms.iter().map(|a| a.coord(dt)))
    }

    pub fn assemble(&self, z: &[f64]) -> Mat {
        let mut dt = Mat::zeros(self.rows, self.cols);
        for (a, &v) in self.atoms.iter().zip(z) {
            a.add_to(&mut dt, v);
        }
        dt
    }

    pub fn dim(&self) -> usize {
        self.atoms.len()
    }
}

struct ModelBuilder {
    atoms: Vec<Atom>,
    cone: ProductCone,
}

impl ModelBuilder {
    fn svec_atoms(idx: &[usize]) -> Vec<Atom> {
        let mut out = Vec::new();
        for (x, &i) in idx.iter().enumerate() {
            out.push(Atom::Entry(i, i));
            for &j in &idx[x + 1..] {
                out.push(Atom::Sym(i, j));
            }
        }
        out
    }

    fn free(&mut self, atoms: Vec<Atom>) {
        if !atoms.is_empty() {
            self.cone.push(BlockCone::Free(atoms.len()));
            self.atoms.extend(atoms);
        }
    }

    fn block(&mut self, block: BlockCone, atoms: Vec<Atom>) {
        debug_assert_eq!(block.dim(), atoms.len());
        self.cone.push(block);
        self.atoms.extend(atoms);
    }

    fn trace_row(&self, alpha: &[usize]) -> Mat {
        Mat::from_fn(1, self.atoms.len(), |_, k| match &self.atoms[k] {
            Atom::Entry(i, j) if i == j && alpha.contains(i) => 1.0,
            _ => 0.0,
        })
    }
}

pub fn matrix_cone_model(pair: &SpectralPair, which: MatrixCone) -> Result<MatrixConeModel> {
    let part = nondegenerate(pair)?;
    let (m, n) = pair.frame_shape();
    let al = &part.alpha;
    let a3 = &part.alpha3;
    let ap = part.alpha_prime();
    let in_alpha = |i: usize| al.contains(&i);
    let in_ap = |i: usize| ap.contains(&i);
    let mut b = ModelBuilder { atoms: Vec::new(), cone: ProductCone::default() };
    let pairs_in = |idx: &[usize]| -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for (x, &i) in idx.iter().enumerate() {
            for &j in &idx[x + 1..] {
                v.push((i, j));
            }
        }
        v
    };
    let all_entries = || (0..m).flat_map(move |i| (0..n).map(move |j| (i, j)));
    let mut trace = false;
    match which {
        MatrixCone::CritTheta | MatrixCone::CritThetaZero => {
            if which == MatrixCone::CritTheta {
                let mut atoms = vec![Atom::ScaledIdentity(ap.clone())];
                atoms.extend(ModelBuilder::svec_atoms(a3));
                b.block(BlockCone::EigCapped { weight: ap.len() as f64, order: a3.len() }, atoms);
            } else {
                b.block(BlockCone::Nsd(a3.len()), ModelBuilder::svec_atoms(a3));
            }
            b.free(pairs_in(al).into_iter().map(|(i, j)| Atom::Skew(i, j)).collect());
            b.free(
                all_entries()
                    .filter(|&(i, j)| !(in_alpha(i) && j < m && in_alpha(j)))
                    .map(|(i, j)| Atom::Entry(i, j))
                    .collect(),
            );
        }
        MatrixCone::CritThetaStar => {
            b.block(BlockCone::Psd(a3.len()), ModelBuilder::svec_atoms(a3));
            b.free(
                all_entries()
                    .filter(|&(i, j)| in_ap(i) || (j < m && in_ap(j)))
                    .map(|(i, j)| Atom::Entry(i, j))
                    .collect(),
            );
            trace = true;
        }
        MatrixCone::PolarCritTheta | MatrixCone::PolarCritThetaZero => {
            let mut atoms: Vec<Atom> = ModelBuilder::svec_atoms(&ap);
            for &i in &ap {
                for &j in a3 {
                    atoms.push(Atom::Sym(i, j));
                }
            }
            b.free(atoms);
            b.block(BlockCone::Psd(a3.len()), ModelBuilder::svec_atoms(a3));
            trace = which == MatrixCone::PolarCritTheta;
        }
        MatrixCone::PolarCritThetaStar | MatrixCone::PolarCritThetaStarFlat => {
            if which == MatrixCone::PolarCritThetaStar {
                let mut atoms = vec![Atom::ScaledIdentity(ap.clone())];
                atoms.extend(ModelBuilder::svec_atoms(a3));
                b.block(BlockCone::EigCapped { weight: ap.len() as f64, order: a3.len() }, atoms);
            } else {
                b.block(BlockCone::Nsd(a3.len()), ModelBuilder::svec_atoms(a3));
            }
            b.free(pairs_in(a3).into_iter().map(|(i, j)| Atom::Skew(i, j)).collect());
            b.free(
                all_entries()
                    .filter(|&(i, j)| {
                        !in_ap(i) && !(j < m && in_ap(j)) && !(a3.contains(&i) && a3.contains(&j))
                    })
                    .map(|(i, j)| Atom::Entry(i, j))
                    .collect(),
            );
        }
    }
    let equalities = if trace { b.trace_row(al) } else { Mat::zeros(0, b.atoms.len()) };
    Ok(MatrixConeModel { atoms: b.atoms, cone: b.cone, equalities, rows: m, cols: n })
}

fn sample_block<R: Rng + ?Sized>(block: BlockCone, rng: &mut R) -> Vec<f64> {
    let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };
    let psd = |k: usize, normal: &mut dyn FnMut() -> f64, rank: usize| -> Mat {
        let g = Mat::from_fn(k, rank, |_, _| normal());
        &g * g.transpose()
    };
    match block {
        BlockCone::Free(k) => (0..k).map(|_| normal()).collect(),
        BlockCone::Zero(k) => vec![0.0; k],
        BlockCone::Nonneg(k) => (0..k).map(|_| normal().abs()).collect(),
        BlockCone::Nonpos(k) => (0..k).map(|_| -normal().abs()).collect(),
        BlockCone::Psd(k) | BlockCone::Nsd(k) => {
            let rank = rng.random_range(0..=k);
            let mut x = psd(k, &mut || StandardNormal.sample(&mut *rng), rank);
            if matches!(block, BlockCone::Nsd(_)) {
                x = -x;
            }
            crate::conic::svec(&x).as_slice().to_vec()
        }
        BlockCone::EigCapped { weight, order } => {
            let rank = rng.random_range(0..=order);
            let t: f64 = StandardNormal.sample(&mut *rng);
            let x = Mat::identity(order, order) * t
                - psd(order, &mut || StandardNormal.sample(&mut *rng), rank);
            let mut v = vec![t * weight.sqrt()];
            v.extend_from_slice(crate::conic::svec(&x).as_slice());
            v
        }
    }
}

/// Random element of the model's cone: each factor is sampled with a random rank, then
/// the equalities are restored by a least-norm correction on the free coordinates.
pub fn sample_model<R: Rng + ?Sized>(model: &MatrixConeModel, rng: &mut R) -> Vector {
    let mut z = Vec::with_capacity(model.dim());
    let mut free = Vec::new();
    for &blk in &model.cone.blocks {
        if let BlockCone::Free(k) = blk {
            free.extend(z.len()..z.len() + k);
        }
        z.extend(sample_block(blk, rng));
    }
    let mut z = Vector::from_vec(z);
    if model.equalities.nrows() > 0 {
        let e = &model.equalities;
        let ef = Mat::from_fn(e.nrows(), free.len(), |r, c| e[(r, free[c])]);
        let resid = e * &z;
        let gram = &ef * ef.transpose();
        if let Some(inv) = gram.try_inverse() {
            let fix = ef.transpose() * (inv * resid);
            for (c, &k) in free.iter().enumerate() {
                z[k] -= fix[c];
            }
        }
    }
    z
}

pub fn sample_matrix_cone<R: Rng + ?Sized>(
    pair: &SpectralPair,
    which: MatrixCone,
    rng: &mut R,
) -> Result<Mat> {
    let model = matrix_cone_model(pair, which)?;
    let z = sample_model(&model, rng);
    Ok(pair.from_frame(&model.assemble(z.as_slice())))
}

/// `sup ⟨H, D⟩/‖D‖` over `samples` random `D` in `cone` (`-inf` if every sample is zero).
pub fn sampled_polar_sup<R: Rng + ?Sized>(
    pair: &SpectralPair,
    h: &Mat,
    cone: MatrixCone,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let model = matrix_cone_model(pair, cone)?;
    let ht = pair.to_frame(h);
    let hz = model.coords(&ht);
    let mut sup = f64::NEG_INFINITY;
    for _ in 0..samples {
        let z = sample_model(&model, rng);
        let nz = z.norm();
        if nz > 0.0 {
            sup = sup.max(hz.dot(&z) / nz);
        }
    }
    Ok(sup)
}

fn default_sampled_sup(pair: &SpectralPair, h: &Mat, cone: MatrixCone) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    sampled_polar_sup(pair, h, cone, 100, &mut rng)
}

/// Nearest point of `x0` in the matrix cone, by Dykstra projections in atom coordinates.
pub fn dykstra_project_crit(pair: &SpectralPair, x0: &Mat, which: MatrixCone) -> Result<Mat> {
    pair.check_shape(x0)?;
    let model = matrix_cone_model(pair, which)?;
    let z0 = model.coords(&pair.to_frame(x0));
    let basis = null_basis(&model.equalities);
    let out = dykstra(&model.cone, basis.as_ref(), &z0, 10_000, 1e-12 * z0.norm().max(1.0));
    if !out.converged {
        return Err(Error::NoConvergence { iterations: out.sweeps, residual: out.gap });
    }
    Ok(pair.from_frame(&model.assemble(out.in_cone.as_slice())))
}

/// Tag of one factor of the polyhedral cone `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeTag {
    Nonneg,
    Zero,
    Free,
}

impl ConeTag {
    pub fn name(self) -> &'static str {
        match self {
            ConeTag::Nonneg => "nonneg",
            ConeTag::Zero => "zero",
            ConeTag::Free => "free",
        }
    }

    pub fn parse(s: &str) -> Option<ConeTag> {
        match s {
            "nonneg" => Some(ConeTag::Nonneg),
            "zero" => Some(ConeTag::Zero),
            "free" => Some(ConeTag::Free),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConeSpec {
    pub tags: Vec<ConeTag>,
}

impl ConeSpec {
    pub fn new(tags: Vec<ConeTag>) -> Self {
        ConeSpec { tags }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// One coordinate of a critical cone of `P` or of its polar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoordCone {
    Free,
    Zero,
    Nonneg,
    Nonpos,
}

impl CoordCone {
    pub fn polar(self) -> CoordCone {
        match self {
            CoordCone::Free => CoordCone::Zero,
            CoordCone::Zero => CoordCone::Free,
            CoordCone::Nonneg => CoordCone::Nonpos,
            CoordCone::Nonpos => CoordCone::Nonneg,
        }
    }

    pub fn contains(self, d: f64, tol: f64) -> bool {
        match self {
            CoordCone::Free => true,
            CoordCone::Zero => d.abs() <= tol,
            CoordCone::Nonneg => d >= -tol,
            CoordCone::Nonpos => d <= tol,
        }
    }

    pub fn block(self) -> BlockCone {
        match self {
            CoordCone::Free => BlockCone::Free(1),
            CoordCone::Zero => BlockCone::Zero(1),
            CoordCone::Nonneg => BlockCone::Nonneg(1),
            CoordCone::Nonpos => BlockCone::Nonpos(1),
        }
    }
}

pub const COMPLEMENTARITY_TOL: f64 = 1e-9;

pub fn cone_project(spec: &ConeSpec, z: &[f64]) -> Vec<f64> {
    spec.tags
        .iter()
        .zip(z)
        .map(|(t, &v)| match t {
            ConeTag::Nonneg => v.max(0.0),
            ConeTag::Zero => 0.0,
            ConeTag::Free => v,
        })
        .collect()
}

/// Checks `P° ∋ y ⟂ z ∈ P` coordinatewise.
pub fn check_complementarity(spec: &ConeSpec, z: &[f64], y: &[f64]) -> Result<()> {
    if z.len() != spec.len() || y.len() != spec.len() {
        return Err(Error::ShapeMismatch("cone vectors differ from the cone spec in length".into()));
    }
    let tol = COMPLEMENTARITY_TOL;
    for (index, (t, (&zi, &yi))) in spec.tags.iter().zip(z.iter().zip(y)).enumerate() {
        let ok = match t {
            ConeTag::Nonneg => zi >= -tol && yi <= tol && (zi * yi).abs() <= tol,
            ConeTag::Zero => zi.abs() <= tol,
            ConeTag::Free => yi.abs() <= tol,
        };
        if !ok {
            return Err(Error::ComplementarityViolated { index, z: zi, y: yi });
        }
    }
    Ok(())
}

/// Per-coordinate description of `C_P(z, y) = T_P(z) ∩ y⊥`.
pub fn crit_cone_p_coords(spec: &ConeSpec, z: &[f64], y: &[f64]) -> Result<Vec<CoordCone>> {
    check_complementarity(spec, z, y)?;
    let tol = COMPLEMENTARITY_TOL;
    Ok(spec
        .tags
        .iter()
        .zip(z.iter().zip(y))
        .map(|(t, (&zi, &yi))| match t {
            ConeTag::Nonneg if zi > tol => CoordCone::Free,
            ConeTag::Nonneg if yi < -tol => CoordCone::Zero,
            ConeTag::Nonneg => CoordCone::Nonneg,
            ConeTag::Zero => CoordCone::Zero,
            ConeTag::Free => CoordCone::Free,
        })
        .collect())
}

pub fn crit_cone_p_member(spec: &ConeSpec, z: &[f64], y: &[f64], d: &[f64]) -> Result<bool> {
    let coords = crit_cone_p_coords(spec, z, y)?;
    Ok(coords.iter().zip(d).all(|(c, &v)| c.contains(v, COMPLEMENTARITY_TOL)))
}

/// Membership in `(C_P(z, y))° = C_{P°}(y, z)`, the dual sign pattern.
pub fn crit_cone_p_polar_member(spec: &ConeSpec, z: &[f64], y: &[f64], d: &[f64]) -> Result<bool> {
    let coords = crit_cone_p_coords(spec, z, y)?;
    Ok(coords.iter().zip(d).all(|(c, &v)| c.polar().contains(v, COMPLEMENTARITY_TOL)))
}
