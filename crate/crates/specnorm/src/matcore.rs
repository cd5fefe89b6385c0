//! Deterministic SVD frames, the index-set partition around the water-filling
//! level, symmetric/skew parts and a few spectral helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance used to group equal singular values into blocks.
pub const GROUP_REL_TOL: f64 = 1e-8;
/// Absolute tolerance used to classify indices of the active set by σ(W).
pub const CLASS_TOL: f64 = 1e-8;

pub fn group_tol(sigma1: f64) -> f64 {
    GROUP_REL_TOL * sigma1.max(1.0)
}

pub fn ensure_finite(a: &Mat) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Ordered SVD `A = U [Diag(sigma) 0] Vᵀ` with square orthogonal `U` (m×m) and `V` (n×n).
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFrame {
    pub u: Mat,
    pub v: Mat,
    pub sigma: Vector,
}

impl SvdFrame {
    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// `Uᵀ D V`.
    pub fn rotate_in(&self, d: &Mat) -> Mat {
        self.u.transpose() * d * &self.v
    }

    /// `U D̃ Vᵀ`.
    pub fn rotate_out(&self, dt: &Mat) -> Mat {
        &self.u * dt * self.v.transpose()
    }

    pub fn reconstruct(&self) -> Mat {
        let (m, n) = (self.rows(), self.cols());
        let mut s = Mat::zeros(m, n);
        for i in 0..m {
            s[(i, i)] = self.sigma[i];
        }
        self.rotate_out(&s)
    }

    /// Same frame with diagonal values replaced (used to build P and W from Q's frame).
    pub fn with_diag(&self, values: &[f64]) -> Mat {
        let (m, n) = (self.rows(), self.cols());
        let mut s = Mat::zeros(m, n);
        for (i, &x) in values.iter().enumerate() {
            s[(i, i)] = x;
        }
        self.rotate_out(&s)
    }
}

/// Returns the matrix with at most as many rows as columns, and whether it was transposed.
pub fn orient(a: &Mat) -> (Mat, bool) {
    if a.nrows() > a.ncols() {
        (a.transpose(), true)
    } else {
        (a.clone(), false)
    }
}

fn rounded_key(col: &[f64]) -> Vec<i64> {
    col.iter().map(|x| (x * 1e12).round() as i64).collect()
}

/// Completes the `n×k` orthonormal columns to an `n×n` orthogonal matrix.
fn complete_basis(v1: &Mat, n: usize) -> Mat {
    let m = v1.ncols();
    let mut cols: Vec<Vector> = (0..m).map(|j| v1.column(j).into_owned()).collect();
    while cols.len() < n {
        let mut best: Option<(f64, Vector)> = None;
        for k in 0..n {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dot(&e);
                    e.axpy(-proj, c, 1.0);
                }
            }
            let nrm = e.norm();
            if best.as_ref().map_or(true, |(b, _)| nrm > *b + 1e-12) {
                best = Some((nrm, e));
            }
        }
        let (nrm, e) = best.expect("n > 0");
        cols.push(e / nrm);
    }
    Mat::from_columns(&cols)
}

/// One-sided (Hestenes) Jacobi SVD of `a` (m ≤ n): returns `U` (m×m), the unsorted
/// singular values and, for each nonzero value, the matching unit right vector.
fn jacobi_svd(a: &Mat) -> Result<(Mat, Vec<f64>, Vec<Option<Vector>>)> {
    let m = a.nrows();
    let mut b = a.transpose();
    let mut w = Mat::identity(m, m);
    let mut converged = false;
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = b.column(p).norm_squared();
                let beta = b.column(q).norm_squared();
                let gamma = b.column(p).dot(&b.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for target in [&mut b, &mut w] {
                    for r in 0..target.nrows() {
                        let (x, y) = (target[(r, p)], target[(r, q)]);
                        target[(r, p)] = c * x - s * y;
                        target[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure);
    }
    let mut sigma = Vec::with_capacity(m);
    let mut vecs = Vec::with_capacity(m);
    for j in 0..m {
        let col = b.column(j).into_owned();
        let nrm = col.norm();
        sigma.push(nrm);
        vecs.push(if nrm > 1e-200 { Some(col / nrm) } else { None });
    }
    Ok((w, sigma, vecs))
}

/// Deterministic SVD for `m ≤ n`.
///
/// Singular values are sorted nonincreasing; columns tied to within `1e-12·max(1, σ₁)` are ordered by
/// decreasing lexicographic order of their left vectors rounded to 12 decimals; each left
/// vector's largest-magnitude entry is made positive. Right vectors of zero singular values
/// and the trailing `n − m` columns of `V` come from a Gram-Schmidt completion.
pub fn svd_ordered(a: &Mat) -> Result<SvdFrame> {
    ensure_finite(a)?;
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || m > n {
        return Err(Error::ShapeMismatch(format!(
            "svd_ordered needs 1 <= rows <= cols, got {m}x{n}"
        )));
    }
    let (u, sv, vs) = jacobi_svd(a)?;

    let mut cols: Vec<(f64, Vector, Option<Vector>)> = (0..m)
        .map(|j| {
            let mut uj = u.column(j).into_owned();
            let mut vj = vs[j].clone();
            let mut imax = 0;
            for i in 0..m {
                if uj[i].abs() > uj[imax].abs() + 1e-14 {
                    imax = i;
                }
            }
            if uj[imax] < 0.0 {
                uj = -uj;
                vj = vj.map(|v| -v);
            }
            (if vj.is_some() { sv[j] } else { 0.0 }, uj, vj)
        })
        .collect();
    cols.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));

    // Ties for ordering purposes only; values are kept in sorted positions afterwards.
    let sorted: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let tol = 1e-12 * cols[0].0.max(1.0);
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && cols[start].0 - cols[end].0 <= tol {
            end += 1;
        }
        cols[start..end].sort_by(|x, y| {
            rounded_key(y.1.as_slice()).cmp(&rounded_key(x.1.as_slice()))
        });
        start = end;
    }

    let sigma = Vector::from_vec(sorted);
    let u = Mat::from_columns(&cols.iter().map(|c| c.1.clone()).collect::<Vec<_>>());
    let known: Vec<Vector> = cols.iter().filter_map(|c| c.2.clone()).collect();
    let completed = complete_basis(&Mat::from_fn(n, known.len(), |i, j| known[j][i]), n);
    let mut extra = (known.len()..n).map(|j| completed.column(j).into_owned());
    let mut vcols: Vec<Vector> = cols
        .iter()
        .map(|c| c.2.clone().unwrap_or_else(|| extra.next().expect("basis has n columns")))
        .collect();
    vcols.extend(extra);
    Ok(SvdFrame { u, v: Mat::from_columns(&vcols), sigma })
}

/// Singular values, nonincreasing, of a matrix of any shape.
pub fn singular_values(a: &Mat) -> Result<Vector> {
    ensure_finite(a)?;
    if a.is_empty() {
        return Ok(Vector::zeros(0));
    }
    let (ao, _) = orient(a);
    let (_, mut s, vs) = jacobi_svd(&ao)?;
    for (x, v) in s.iter_mut().zip(&vs) {
        if v.is_none() {
            *x = 0.0;
        }
    }
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Vector::from_vec(s))
}

/// Index sets of the partition of `Q = P + W` around `λ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    /// Indices with σ(Q) > 0.
    pub a: Vec<usize>,
    /// Indices with σ(Q) = 0 (among the first m).
    pub b: Vec<usize>,
    /// Column indices m..n.
    pub c: Vec<usize>,
    /// Distinct nonzero singular values, decreasing.
    pub nu: Vec<f64>,
    /// `blocks[k]` holds the indices with σ = nu[k]; a trailing block equal to `b` is appended when `b` is nonempty.
    pub blocks: Vec<Vec<usize>>,
    pub lambda_star: f64,
    /// Number of blocks with ν ≥ λ*.
    pub r_tilde: usize,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub alpha1: Vec<usize>,
    pub alpha2: Vec<usize>,
    pub alpha3: Vec<usize>,
    /// Number of blocks forming α₁ (0 or 1).
    pub r0: usize,
    /// Number of blocks forming α₁ ∪ α₂.
    pub r1: usize,
    /// σ(Q) in frame order.
    pub sigma_q: Vec<f64>,
    /// σ(W) = [σ(Q) − λ*]₊ in frame order.
    pub sigma_w: Vec<f64>,
    pub tol_group: f64,
}

impl BlockPartition {
    pub fn m(&self) -> usize {
        self.sigma_q.len()
    }

    /// α₁ ∪ α₂.
    pub fn alpha_prime(&self) -> Vec<usize> {
        let mut v = self.alpha1.clone();
        v.extend(&self.alpha2);
        v
    }

    /// Number of distinct nonzero values.
    pub fn r(&self) -> usize {
        self.nu.len()
    }

    /// σ(P) entries: λ* on α, σ(Q) on β.
    pub fn sigma_p(&self) -> Vec<f64> {
        self.sigma_q.iter().map(|&s| s.min(self.lambda_star)).collect()
    }

    /// Smallest separation between consecutive distinct levels (block values, λ* and 0).
    pub fn min_level_gap(&self) -> f64 {
        let mut levels: Vec<f64> = self.nu.clone();
        if !self.b.is_empty() {
            levels.push(0.0);
        }
        let mut gap = levels
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min);
        if let Some(&top_beta) = levels.get(self.r_tilde) {
            gap = gap.min(self.lambda_star - top_beta);
        }
        gap
    }

    /// Errors unless every level gap is at least ten grouping tolerances.
    pub fn require_separated(&self) -> Result<()> {
        let need = 10.0 * self.tol_group;
        let gap = self.min_level_gap();
        if gap < need {
            Err(Error::IllConditionedPartition { gap, need })
        } else {
            Ok(())
        }
    }
}

pub fn build_partition(
    frame: &SvdFrame,
    lambda_star: f64,
    tol_group: f64,
    tol_class: f64,
) -> Result<BlockPartition> {
    if !(lambda_star > 0.0) || !lambda_star.is_finite() {
        return Err(Error::DegeneratePoint(format!(
            "water-filling level must be positive, got {lambda_star}"
        )));
    }
    let (m, n) = (frame.rows(), frame.cols());
    let sigma_q: Vec<f64> = frame.sigma.iter().copied().collect();
    let a: Vec<usize> = (0..m).filter(|&i| sigma_q[i] > tol_group).collect();
    let b: Vec<usize> = (0..m).filter(|&i| sigma_q[i] <= tol_group).collect();
    let c: Vec<usize> = (m..n).collect();

    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut nu = Vec::new();
    for &i in &a {
        match blocks.last_mut() {
            Some(last) if sigma_q[last[0]] - sigma_q[i] <= tol_group => last.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    for blk in &blocks {
        nu.push(blk.iter().map(|&i| sigma_q[i]).sum::<f64>() / blk.len() as f64);
    }
    let r_tilde = nu.iter().filter(|&&v| v >= lambda_star - tol_group).count();
    if !b.is_empty() {
        blocks.push(b.clone());
    }

    let sigma_w: Vec<f64> = sigma_q.iter().map(|&s| (s - lambda_star).max(0.0)).collect();
    let mut alpha = Vec::new();
    let (mut alpha1, mut alpha2, mut alpha3) = (Vec::new(), Vec::new(), Vec::new());
    let (mut r0, mut r1) = (0, 0);
    for (k, blk) in blocks.iter().enumerate().take(r_tilde) {
        let w = blk.iter().map(|&i| sigma_w[i]).sum::<f64>() / blk.len() as f64;
        alpha.extend(blk);
        if w >= 1.0 - tol_class {
            alpha1.extend(blk);
            r0 = k + 1;
            r1 = k + 1;
        } else if w > tol_class {
            alpha2.extend(blk);
            r1 = k + 1;
        } else {
            alpha3.extend(blk);
        }
    }
    let beta: Vec<usize> = (0..m).filter(|i| !alpha.contains(i)).collect();
    let sigma_w = sigma_q
        .iter()
        .enumerate()
        .map(|(i, &s)| if alpha3.contains(&i) || beta.contains(&i) { 0.0 } else { s - lambda_star })
        .collect();
    Ok(BlockPartition {
        a,
        b,
        c,
        nu,
        blocks,
        lambda_star,
        r_tilde,
        alpha,
        beta,
        alpha1,
        alpha2,
        alpha3,
        r0,
        r1,
        sigma_q,
        sigma_w,
        tol_group,
    })
}

fn require_square(h: &Mat, what: &str) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{what} needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

/// `(H + Hᵀ)/2`.
pub fn sym_part(h: &Mat) -> Result<Mat> {
    require_square(h, "sym_part")?;
    Ok((h + h.transpose()) * 0.5)
}

/// `(H − Hᵀ)/2`.
pub fn skew_part(h: &Mat) -> Result<Mat> {
    require_square(h, "skew_part")?;
    Ok((h - h.transpose()) * 0.5)
}

pub(crate) fn sym(h: &Mat) -> Mat {
    (h + h.transpose()) * 0.5
}

pub(crate) fn skew(h: &Mat) -> Mat {
    (h - h.transpose()) * 0.5
}

/// Eigenvalues (nonincreasing) and matching eigenvectors of a symmetric matrix.
pub fn sym_eigen_desc(s: &Mat) -> (Vec<f64>, Mat) {
    let k = s.nrows();
    if k == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(sym(s));
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Mat::from_columns(
        &idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    (vals, vecs)
}

pub fn eigenvalues_desc(s: &Mat) -> Vec<f64> {
    sym_eigen_desc(s).0
}

/// Largest eigenvalue of the symmetric part; `-inf` for an empty matrix.
pub fn lambda_max(s: &Mat) -> f64 {
    eigenvalues_desc(&sym(s)).first().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Smallest eigenvalue of the symmetric part; `+inf` for an empty matrix.
pub fn lambda_min(s: &Mat) -> f64 {
    eigenvalues_desc(&sym(s)).last().copied().unwrap_or(f64::INFINITY)
}

/// Projection of the symmetric part onto the negative semidefinite cone.
pub fn project_nsd(s: &Mat) -> Mat {
    let (vals, vecs) = sym_eigen_desc(s);
    let mut out = Mat::zeros(s.nrows(), s.ncols());
    for (i, &l) in vals.iter().enumerate() {
        if l < 0.0 {
            let v = vecs.column(i);
            out += v * v.transpose() * l;
        }
    }
    out
}

/// Projection of the symmetric part onto the positive semidefinite cone.
pub fn project_psd(s: &Mat) -> Mat {
    let (vals, vecs) = sym_eigen_desc(s);
    let mut out = Mat::zeros(s.nrows(), s.ncols());
    for (i, &l) in vals.iter().enumerate() {
        if l > 0.0 {
            let v = vecs.column(i);
            out += v * v.transpose() * l;
        }
    }
    out
}

/// Eigenvalue threshold for semidefinite tests on a block.
pub fn semidef_tol(block: &Mat) -> f64 {
    1e-9 * block.norm().max(1.0)
}

pub fn is_psd(block: &Mat) -> bool {
    block.is_empty() || lambda_min(block) >= -semidef_tol(block)
}

pub fn is_nsd(block: &Mat) -> bool {
    block.is_empty() || lambda_max(block) <= semidef_tol(block)
}

/// `λ(P)ᵀλ(W) − ⟨P, W⟩` for symmetric matrices (nonnegative by Fan's inequality).
pub fn fan_gap(p: &Mat, w: &Mat) -> Result<f64> {
    require_square(p, "fan_gap")?;
    require_square(w, "fan_gap")?;
    if p.shape() != w.shape() {
        return Err(Error::ShapeMismatch("fan_gap arguments differ in size".into()));
    }
    let lp = eigenvalues_desc(p);
    let lw = eigenvalues_desc(w);
    let dot: f64 = lp.iter().zip(&lw).map(|(x, y)| x * y).sum();
    Ok(dot - p.dot(w))
}

/// Root `t` of `weighted_sum − weight·t + Σ [vᵢ − t]₊ = 0` for `weight > 0`, `vals` nonincreasing.
pub fn capped_level(weight: f64, weighted_sum: f64, vals: &[f64]) -> f64 {
    let mut acc = weighted_sum;
    for j in 0..=vals.len() {
        let t = acc / (weight + j as f64);
        if (j == 0 || vals[j - 1] > t) && (j == vals.len() || vals[j] <= t) {
            return t;
        }
        if j < vals.len() {
            acc += vals[j];
        }
    }
    acc / (weight + vals.len() as f64)
}

/// Sub-matrix on the given row and column index lists.
pub fn submatrix(a: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Writes `block` into `a` at the given row and column index lists.
pub fn set_submatrix(a: &mut Mat, rows: &[usize], cols: &[usize], block: &Mat) {
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            a[(r, c)] = block[(i, j)];
        }
    }
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
