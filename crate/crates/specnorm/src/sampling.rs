//! Random matrices with prescribed spectral structure around a spectral pair.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matcore::Mat;

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign of `R` fixed).
pub fn random_orthogonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Mat {
    if k == 0 {
        return Mat::zeros(0, 0);
    }
    let qr = gaussian_matrix(k, k, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Singular values of `Q = P + W` described through `P` and `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLayout {
    /// `λ* = ‖P‖₂`.
    pub lambda: f64,
    /// `σ(W)` on α, nonincreasing, each in `[0, 1]`, summing to 1.
    pub alpha_w: Vec<f64>,
    /// `σ(P) = σ(Q)` on β, nonincreasing, each in `[0, λ*)`.
    pub beta: Vec<f64>,
}

impl SpectralLayout {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidSpec("λ* must be positive".into()));
        }
        let total: f64 = self.alpha_w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "σ(W) on α must sum to 1 (got {total}); nuclear-norm mass has to sit in α"
            )));
        }
        if self.alpha_w.iter().any(|&w| !(0.0..=1.0).contains(&w))
            || self.alpha_w.windows(2).any(|p| p[0] < p[1])
        {
            return Err(Error::InvalidSpec("σ(W) on α must be nonincreasing in [0, 1]".into()));
        }
        if self.beta.iter().any(|&s| !(0.0..self.lambda).contains(&s)) || self.beta.windows(2).any(|p| p[0] < p[1]) {
            return Err(Error::InvalidSpec("β values must be nonincreasing in [0, λ*)".into()));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.alpha_w.len() + self.beta.len()
    }

    pub fn sigma_q(&self) -> Vec<f64> {
        self.alpha_w.iter().map(|w| self.lambda + w).chain(self.beta.iter().copied()).collect()
    }

    pub fn sigma_p(&self) -> Vec<f64> {
        self.alpha_w.iter().map(|_| self.lambda).chain(self.beta.iter().copied()).collect()
    }

    pub fn sigma_w(&self) -> Vec<f64> {
        self.alpha_w.iter().copied().chain(self.beta.iter().map(|_| 0.0)).collect()
    }
}

/// `U [Diag(values) 0] Vᵀ` for given orthogonal `U` (m×m) and `V` (n×n).
pub fn compose(u: &Mat, values: &[f64], v: &Mat) -> Mat {
    let (m, n) = (u.nrows(), v.nrows());
    let mut d = Mat::zeros(m, n);
    for (i, &s) in values.iter().enumerate() {
        d[(i, i)] = s;
    }
    u * d * v.transpose()
}

/// Random layout with engineered ties: α₁ or tied α₂ groups, optional α₃ and
/// β blocks with repeated values and zeros. Distinct levels are separated by at least 0.05.
pub fn random_layout<R: Rng + ?Sized>(m: usize, rng: &mut R) -> SpectralLayout {
    assert!(m >= 1);
    let lambda = rng.random_range(0.5..2.0);
    let alpha_len = rng.random_range(1..=m);
    let a3 = if alpha_len > 1 && rng.random_bool(0.5) { rng.random_range(1..alpha_len) } else { 0 };
    let ap = alpha_len - a3;
    let mut alpha_w = if ap == 1 {
        vec![1.0]
    } else {
        let groups = rng.random_range(1..=ap.min(2));
        if groups == 1 {
            vec![1.0 / ap as f64; ap]
        } else {
            let hi = rng.random_range(1..ap);
            let lo = ap - hi;
            // hi·x + lo·y = 1 with x − y ≥ 0.1.
            let y = rng.random_range(0.02..(1.0 - 0.1 * hi as f64).max(0.03) / ap as f64);
            let x = (1.0 - lo as f64 * y) / hi as f64;
            let mut v = vec![x; hi];
            v.extend(vec![y; lo]);
            v
        }
    };
    alpha_w.extend(vec![0.0; a3]);
    let beta_len = m - alpha_len;
    let mut beta = Vec::with_capacity(beta_len);
    let mut level = lambda - rng.random_range(0.1..0.3) * lambda;
    while beta.len() < beta_len {
        if level <= 0.05 || rng.random_bool(0.15) {
            beta.push(0.0);
            continue;
        }
        let copies = rng.random_range(1..=2).min(beta_len - beta.len());
        beta.extend(vec![level; copies]);
        level -= rng.random_range(0.05..0.3) * lambda;
    }
    beta.sort_by(|a, b| b.partial_cmp(a).unwrap());
    SpectralLayout { lambda, alpha_w, beta }
}
