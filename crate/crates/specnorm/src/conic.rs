//! Separable product cones in isometric coordinates, Dykstra projection onto
//! their intersection with a subspace, and a sampled search for nonzero
//! elements of that intersection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matcore::{capped_level, sym_eigen_desc, Mat, Vector};

/// One factor of a product cone. Semidefinite factors act on `svec` coordinates
/// (upper triangle, row by row, off-diagonal entries scaled by √2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockCone {
    Free(usize),
    Zero(usize),
    Nonneg(usize),
    Nonpos(usize),
    Psd(usize),
    Nsd(usize),
    /// Coordinates `(s, svec X)` with `X ≼ (s/√weight) I`.
    EigCapped { weight: f64, order: usize },
}

pub fn svec_len(order: usize) -> usize {
    order * (order + 1) / 2
}

impl BlockCone {
    pub fn dim(&self) -> usize {
        match *self {
            BlockCone::Free(k) | BlockCone::Zero(k) | BlockCone::Nonneg(k) | BlockCone::Nonpos(k) => k,
            BlockCone::Psd(k) | BlockCone::Nsd(k) => svec_len(k),
            BlockCone::EigCapped { order, .. } => 1 + svec_len(order),
        }
    }
}

pub fn svec(x: &Mat) -> Vector {
    let k = x.nrows();
    let mut out = Vec::with_capacity(svec_len(k));
    for i in 0..k {
        out.push(x[(i, i)]);
        for j in i + 1..k {
            out.push(std::f64::consts::SQRT_2 * 0.5 * (x[(i, j)] + x[(j, i)]));
        }
    }
    Vector::from_vec(out)
}

pub fn smat(v: &[f64], k: usize) -> Mat {
    let mut x = Mat::zeros(k, k);
    let mut pos = 0;
    for i in 0..k {
        x[(i, i)] = v[pos];
        pos += 1;
        for j in i + 1..k {
            let e = v[pos] / std::f64::consts::SQRT_2;
            x[(i, j)] = e;
            x[(j, i)] = e;
            pos += 1;
        }
    }
    x
}

fn clip_eigen(x: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (vals, vecs) = sym_eigen_desc(x);
    let d = Vector::from_iterator(vals.len(), vals.iter().map(|&l| f(l)));
    &vecs * Mat::from_diagonal(&d) * vecs.transpose()
}

fn project_block(block: BlockCone, z: &mut [f64]) {
    match block {
        BlockCone::Free(_) => {}
        BlockCone::Zero(_) => z.iter_mut().for_each(|v| *v = 0.0),
        BlockCone::Nonneg(_) => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        BlockCone::Nonpos(_) => z.iter_mut().for_each(|v| *v = v.min(0.0)),
        BlockCone::Psd(k) => {
            let x = clip_eigen(&smat(z, k), |l| l.max(0.0));
            z.copy_from_slice(svec(&x).as_slice());
        }
        BlockCone::Nsd(k) => {
            let x = clip_eigen(&smat(z, k), |l| l.min(0.0));
            z.copy_from_slice(svec(&x).as_slice());
        }
        BlockCone::EigCapped { weight, order } => {
            let root = weight.sqrt();
            let t0 = z[0] / root;
            let x0 = smat(&z[1..], order);
            let (vals, vecs) = sym_eigen_desc(&x0);
            let t = capped_level(weight, weight * t0, &vals);
            let d = Vector::from_iterator(vals.len(), vals.iter().map(|&l| l.min(t)));
            let x = &vecs * Mat::from_diagonal(&d) * vecs.transpose();
            z[0] = root * t;
            z[1..].copy_from_slice(svec(&x).as_slice());
        }
    }
}

/// Product of [`BlockCone`] factors laid out consecutively.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProductCone {
    pub blocks: Vec<BlockCone>,
}

impl ProductCone {
    pub fn new(blocks: Vec<BlockCone>) -> Self {
        ProductCone { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(BlockCone::dim).sum()
    }

    pub fn push(&mut self, block: BlockCone) -> std::ops::Range<usize> {
        let start = self.dim();
        self.blocks.push(block);
        start..start + block.dim()
    }

    pub fn project(&self, z: &Vector) -> Vector {
        let mut out = z.clone();
        let mut pos = 0;
        for &b in &self.blocks {
            let k = b.dim();
            project_block(b, &mut out.as_mut_slice()[pos..pos + k]);
            pos += k;
        }
        out
    }

    pub fn distance(&self, z: &Vector) -> f64 {
        (self.project(z) - z).norm()
    }
}

/// Orthonormal basis of `{z : E z = 0}`; `None` when `E` has no rows.
pub fn null_basis(equalities: &Mat) -> Option<Mat> {
    if equalities.nrows() == 0 {
        return None;
    }
    let gram = equalities.transpose() * equalities;
    let (vals, vecs) = sym_eigen_desc(&gram);
    let cut = 1e-11 * vals.first().copied().unwrap_or(0.0).max(1.0);
    let cols: Vec<Vector> = vals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= cut)
        .map(|(i, _)| vecs.column(i).into_owned())
        .collect();
    Some(if cols.is_empty() {
        Mat::zeros(equalities.ncols(), 0)
    } else {
        Mat::from_columns(&cols)
    })
}

fn project_subspace(basis: Option<&Mat>, z: &Vector) -> Vector {
    match basis {
        None => z.clone(),
        Some(nb) => nb * (nb.transpose() * z),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DykstraOutcome {
    /// Last iterate of the cone step (exactly in the cone).
    pub in_cone: Vector,
    /// Last iterate of the subspace step (exactly in the subspace).
    pub in_subspace: Vector,
    pub sweeps: usize,
    pub gap: f64,
    pub converged: bool,
}

/// Dykstra's alternating projections onto `cone ∩ span(basis)`.
///
/// Stops when the two iterates agree and the subspace iterate has settled, both within `tol`.
pub fn dykstra(
    cone: &ProductCone,
    basis: Option<&Mat>,
    z0: &Vector,
    max_sweeps: usize,
    tol: f64,
) -> DykstraOutcome {
    let mut x = z0.clone();
    let mut corr = Vector::zeros(z0.len());
    let mut y = x.clone();
    let mut gap = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        y = cone.project(&(&x + &corr));
        corr = &x + &corr - &y;
        let next = project_subspace(basis, &y);
        gap = (&y - &next).norm();
        let moved = (&next - &x).norm();
        x = next;
        if gap <= tol && moved <= tol {
            return DykstraOutcome { in_cone: y, in_subspace: x, sweeps: sweep, gap, converged: true };
        }
    }
    DykstraOutcome { in_cone: y, in_subspace: x, sweeps: max_sweeps, gap, converged: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelStatus {
    /// Only zero was found (or the subspace is trivial).
    Trivial,
    /// A nonzero element was found.
    Nontrivial,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSearch {
    pub status: KernelStatus,
    /// Unit-norm element of the cone, within `witness_gap` of the subspace.
    pub witness: Option<Vector>,
    pub witness_gap: f64,
    pub starts: usize,
    pub largest_norm: f64,
    pub total_sweeps: usize,
    /// True when the subspace itself is `{0}`.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSearchOptions {
    pub starts: usize,
    pub max_sweeps: usize,
    /// Projections above this norm count as nonzero.
    pub nonzero_norm: f64,
    /// Projections at or below this norm count as zero.
    pub zero_norm: f64,
    pub seed: u64,
}

impl Default for KernelSearchOptions {
    fn default() -> Self {
        KernelSearchOptions { starts: 200, max_sweeps: 10_000, nonzero_norm: 1e-6, zero_norm: 1e-8, seed: 0 }
    }
}

/// Looks for a nonzero element of `cone ∩ {z : E z = 0}` by projecting random unit starts.
pub fn kernel_search(cone: &ProductCone, equalities: &Mat, opts: &KernelSearchOptions) -> KernelSearch {
    let dim = cone.dim();
    let basis = null_basis(equalities);
    let mut report = KernelSearch {
        status: KernelStatus::Trivial,
        witness: None,
        witness_gap: 0.0,
        starts: 0,
        largest_norm: 0.0,
        total_sweeps: 0,
        exact: false,
    };
    if dim == 0 || basis.as_ref().is_some_and(|b| b.ncols() == 0) {
        report.exact = true;
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut undecided = false;
    for _ in 0..opts.starts {
        report.starts += 1;
        let mut z0 = Vector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)));
        z0 /= z0.norm();
        match search_from(cone, basis.as_ref(), z0, opts, &mut report.total_sweeps) {
            StartResult::Zero(n) => report.largest_norm = report.largest_norm.max(n),
            StartResult::Witness(w, gap, n) => {
                report.largest_norm = report.largest_norm.max(n);
                report.status = KernelStatus::Nontrivial;
                report.witness = Some(w);
                report.witness_gap = gap;
                return report;
            }
            StartResult::Undecided(n) => {
                report.largest_norm = report.largest_norm.max(n);
                undecided = true;
            }
        }
    }
    if undecided {
        report.status = KernelStatus::Inconclusive;
    }
    report
}

enum StartResult {
    Zero(f64),
    Witness(Vector, f64, f64),
    Undecided(f64),
}

fn search_from(
    cone: &ProductCone,
    basis: Option<&Mat>,
    z0: Vector,
    opts: &KernelSearchOptions,
    sweeps: &mut usize,
) -> StartResult {
    let mut start = z0;
    let mut scale = 1.0;
    // A nonzero limit is renormalised and polished a few times so the witness meets tight residuals.
    for _round in 0..4 {
        let out = dykstra(cone, basis, &start, opts.max_sweeps, 1e-13);
        *sweeps += out.sweeps;
        let n = out.in_cone.norm() * scale;
        if n <= opts.zero_norm {
            return StartResult::Zero(n);
        }
        if n > opts.nonzero_norm && out.gap <= 1e-11 * out.in_cone.norm() {
            let nrm = out.in_cone.norm();
            return StartResult::Witness(out.in_cone / nrm, out.gap / nrm, n);
        }
        if !out.converged && n <= opts.nonzero_norm {
            return StartResult::Undecided(n);
        }
        let nrm = out.in_cone.norm();
        if nrm == 0.0 {
            return StartResult::Zero(0.0);
        }
        scale *= nrm;
        start = out.in_cone / nrm;
    }
    StartResult::Undecided(scale)
}
