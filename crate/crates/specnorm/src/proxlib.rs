//! Spectral norm, nuclear norm, the water-filling level and the proximal pair.

use crate::error::{Error, Result};
use crate::matcore::{
    build_partition, ensure_finite, group_tol, lambda_max, orient, singular_values, submatrix,
    svd_ordered, BlockPartition, Mat, SvdFrame, CLASS_TOL,
};

pub fn spectral_norm(x: &Mat) -> Result<f64> {
    Ok(singular_values(x)?.iter().copied().fold(0.0, f64::max))
}

pub fn nuclear_norm(x: &Mat) -> Result<f64> {
    Ok(singular_values(x)?.iter().sum())
}

/// Level `λ* > 0` with `Σ [σᵢ − λ*]₊ = 1`, or `None` when `Σ σᵢ ≤ 1`.
pub fn waterfill(sigma: &[f64]) -> Result<Option<f64>> {
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) || sigma.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::UnsortedInput);
    }
    let total: f64 = sigma.iter().sum();
    if total <= 1.0 {
        return Ok(None);
    }
    // Largest k with σ_k above the k-term level; robust to rounding at ties.
    let mut cum = 0.0;
    let mut level = 0.0;
    for (k, &s) in sigma.iter().enumerate() {
        cum += s;
        let candidate = (cum - 1.0) / (k + 1) as f64;
        if s > candidate {
            level = candidate;
        }
    }
    Ok(Some(level))
}

/// `Q = P + W` with `P = Prox_θ(Q)` and `W` the projection of `Q` onto the unit nuclear ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub p: Mat,
    pub w: Mat,
    pub q: Mat,
    /// SVD frame of `Q` (of `Qᵀ` when `transposed`).
    pub frame: SvdFrame,
    /// `None` exactly when the pair is degenerate.
    pub partition: Option<BlockPartition>,
    pub degenerate: bool,
    pub transposed: bool,
}

impl SpectralPair {
    pub fn lambda_star(&self) -> Option<f64> {
        self.partition.as_ref().map(|p| p.lambda_star)
    }

    pub fn partition(&self) -> Result<&BlockPartition> {
        self.partition
            .as_ref()
            .ok_or_else(|| Error::DegeneratePoint("P = 0 (Q inside the unit nuclear ball)".into()))
    }

    pub fn check_shape(&self, d: &Mat) -> Result<()> {
        if d.shape() != self.q.shape() {
            return Err(Error::ShapeMismatch(format!(
                "direction is {}x{}, point is {}x{}",
                d.nrows(),
                d.ncols(),
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        Ok(())
    }

    /// `D̃ = Uᵀ D V` in the frame of the pair (orientation handled).
    pub fn to_frame(&self, d: &Mat) -> Mat {
        if self.transposed {
            self.frame.rotate_in(&d.transpose())
        } else {
            self.frame.rotate_in(d)
        }
    }

    /// Inverse of [`SpectralPair::to_frame`].
    pub fn from_frame(&self, dt: &Mat) -> Mat {
        let d = self.frame.rotate_out(dt);
        if self.transposed {
            d.transpose()
        } else {
            d
        }
    }

    /// Rows × columns of the oriented frame (rows ≤ columns).
    pub fn frame_shape(&self) -> (usize, usize) {
        (self.frame.rows(), self.frame.cols())
    }
}

pub fn prox_spectral(q: &Mat) -> Result<SpectralPair> {
    ensure_finite(q)?;
    let (qo, transposed) = orient(q);
    let frame = svd_ordered(&qo)?;
    let sigma: Vec<f64> = frame.sigma.iter().copied().collect();
    let level = waterfill(&sigma)?;
    let (p, partition) = match level {
        None => (Mat::zeros(q.nrows(), q.ncols()), None),
        Some(lambda) => {
            let clipped: Vec<f64> = sigma.iter().map(|&s| s.min(lambda)).collect();
            let po = frame.with_diag(&clipped);
            let part = build_partition(&frame, lambda, group_tol(sigma[0]), CLASS_TOL)?;
            (if transposed { po.transpose() } else { po }, Some(part))
        }
    };
    let w = q - &p;
    Ok(SpectralPair {
        p,
        w,
        q: q.clone(),
        frame,
        degenerate: partition.is_none(),
        partition,
        transposed,
    })
}

pub fn nuclear_ball_project(q: &Mat) -> Result<Mat> {
    Ok(prox_spectral(q)?.w)
}

/// Whether `W ∈ ∂θ(P)`, tested through `Prox_θ(P + W) = P`.
pub fn is_subgradient(p: &Mat, w: &Mat, tol: f64) -> Result<bool> {
    if p.shape() != w.shape() {
        return Err(Error::ShapeMismatch("is_subgradient arguments differ in shape".into()));
    }
    ensure_finite(p)?;
    ensure_finite(w)?;
    if p.iter().all(|&x| x == 0.0) {
        return Ok(nuclear_norm(w)? <= 1.0 + tol);
    }
    let pair = prox_spectral(&(p + w))?;
    Ok((pair.p - p).amax() <= tol)
}

pub const SUBGRADIENT_TOL: f64 = 1e-9;

/// `θ′(P; D)`, the largest eigenvalue of `S(U_αᵀ D V_α)`.
///
/// At a degenerate pair (`P = 0`) the value is `‖D‖₂`.
pub fn theta_dirderiv(pair: &SpectralPair, d: &Mat) -> Result<f64> {
    pair.check_shape(d)?;
    ensure_finite(d)?;
    match &pair.partition {
        None => spectral_norm(d),
        Some(part) => {
            let dt = pair.to_frame(d);
            Ok(lambda_max(&submatrix(&dt, &part.alpha, &part.alpha)))
        }
    }
}
