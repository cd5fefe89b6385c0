//! Second-order objects at a spectral pair: the directional derivative of the
//! prox, the sigma term, the fixed-point lift and its verifier, and the kernel
//! test of the prox derivative.

use crate::cones::in_crit_theta;
use crate::error::{Error, Result};
use crate::matcore::{
    capped_level, eigenvalues_desc, ensure_finite, is_nsd, is_psd, project_nsd, skew, submatrix, sym,
    BlockPartition, Mat,
};
use crate::proxlib::SpectralPair;

/// Entrywise coefficient arrays of the prox derivative, indexed inside α, β and c.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMaps {
    /// `2λ*/(σᵢ+σⱼ)` on α×α.
    pub skew_aa: Mat,
    /// `(λ*−σⱼ)/(σᵢ−σⱼ)` on α×β.
    pub sym_ab: Mat,
    /// `(λ*+σⱼ)/(σᵢ+σⱼ)` on α×β.
    pub skew_ab: Mat,
    /// `λ*/σᵢ` on α×c.
    pub cols_ac: Mat,
}

pub(crate) fn nondegenerate(pair: &SpectralPair) -> Result<&BlockPartition> {
    let part = pair.partition()?;
    if part.alpha_prime().is_empty() {
        return Err(Error::DegeneratePoint("σ(W) vanishes on the whole active set".into()));
    }
    part.require_separated()?;
    Ok(part)
}

pub fn coeff_maps(pair: &SpectralPair) -> Result<CoeffMaps> {
    let part = nondegenerate(pair)?;
    Ok(coeffs_of(part, pair.frame_shape().1 - part.m()))
}

fn coeffs_of(part: &BlockPartition, nc: usize) -> CoeffMaps {
    let lam = part.lambda_star;
    let s = &part.sigma_q;
    let (al, be) = (&part.alpha, &part.beta);
    CoeffMaps {
        skew_aa: Mat::from_fn(al.len(), al.len(), |i, j| 2.0 * lam / (s[al[i]] + s[al[j]])),
        sym_ab: Mat::from_fn(al.len(), be.len(), |i, j| {
            (lam - s[be[j]]) / (s[al[i]] - s[be[j]])
        }),
        skew_ab: Mat::from_fn(al.len(), be.len(), |i, j| {
            (lam + s[be[j]]) / (s[al[i]] + s[be[j]])
        }),
        cols_ac: Mat::from_fn(al.len(), nc, |i, _| lam / s[al[i]]),
    }
}

/// Derivative of the water-filling level along a frame direction.
///
/// Root `μ` of `tr S(D̃_{α′α′}) − |α′|μ + Σ_{i∈α₃} [λᵢ(S(D̃_{α₃α₃})) − μ]₊ = 0`.
pub fn level_shift(part: &BlockPartition, dt: &Mat) -> f64 {
    let ap = part.alpha_prime();
    let tr: f64 = ap.iter().map(|&i| dt[(i, i)]).sum();
    let h = eigenvalues_desc(&sym(&submatrix(dt, &part.alpha3, &part.alpha3)));
    capped_level(ap.len() as f64, tr, &h)
}

/// `Prox′_θ(Q; D)` in frame coordinates.
fn prox_dirderiv_frame(part: &BlockPartition, co: &CoeffMaps, g: &Mat) -> Mat {
    let (m, n) = (g.nrows(), g.ncols());
    let (al, be, a3) = (&part.alpha, &part.beta, &part.alpha3);
    let ap = part.alpha_prime();
    let g1 = g.columns(0, m).into_owned();
    let s1 = sym(&g1);
    let t1 = skew(&g1);
    let mu = level_shift(part, g);
    let mut out = Mat::zeros(m, n);

    for (i, &r) in al.iter().enumerate() {
        for (j, &c) in al.iter().enumerate() {
            out[(r, c)] = co.skew_aa[(i, j)] * t1[(r, c)];
        }
    }
    for &i in &ap {
        out[(i, i)] += mu;
    }
    if !a3.is_empty() {
        let mut block = submatrix(&s1, a3, a3);
        for i in 0..a3.len() {
            block[(i, i)] -= mu;
        }
        let mut proj = project_nsd(&block);
        for i in 0..a3.len() {
            proj[(i, i)] += mu;
        }
        for (i, &r) in a3.iter().enumerate() {
            for (j, &c) in a3.iter().enumerate() {
                out[(r, c)] += proj[(i, j)];
            }
        }
    }
    for (i, &r) in al.iter().enumerate() {
        for (j, &c) in be.iter().enumerate() {
            out[(r, c)] = co.sym_ab[(i, j)] * s1[(r, c)] + co.skew_ab[(i, j)] * t1[(r, c)];
            out[(c, r)] = co.sym_ab[(i, j)] * s1[(c, r)] + co.skew_ab[(i, j)] * t1[(c, r)];
        }
        for j in 0..n - m {
            out[(r, m + j)] = co.cols_ac[(i, j)] * g[(r, m + j)];
        }
    }
    for &r in be {
        for &c in be {
            out[(r, c)] = g[(r, c)];
        }
        for c in m..n {
            out[(r, c)] = g[(r, c)];
        }
    }
    out
}

/// Directional derivative of `Prox_θ` at `Q` along `D`.
pub fn prox_dirderiv(pair: &SpectralPair, d: &Mat) -> Result<Mat> {
    pair.check_shape(d)?;
    ensure_finite(d)?;
    let part = nondegenerate(pair)?;
    let (_, n) = pair.frame_shape();
    let co = coeffs_of(part, n - part.m());
    Ok(pair.from_frame(&prox_dirderiv_frame(part, &co, &pair.to_frame(d))))
}

/// `ψ*_{(P,D)}(W)` from its explicit block expansion.
pub fn sigma_term(pair: &SpectralPair, d: &Mat) -> Result<f64> {
    pair.check_shape(d)?;
    ensure_finite(d)?;
    let part = nondegenerate(pair)?;
    let g = pair.to_frame(d);
    Ok(sigma_term_frame(part, &g))
}

pub(crate) fn sigma_term_frame(part: &BlockPartition, g: &Mat) -> f64 {
    let m = part.m();
    let n = g.ncols();
    let g1 = g.columns(0, m).into_owned();
    let s1 = sym(&g1);
    let t1 = skew(&g1);
    let lam = part.lambda_star;
    let nu_p = |t: usize| -> f64 {
        if t < part.r_tilde {
            lam
        } else if t < part.nu.len() {
            part.nu[t]
        } else {
            0.0
        }
    };
    let block_sq = |mat: &Mat, rows: &[usize], cols: &[usize]| -> f64 {
        rows.iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| mat[(i, j)] * mat[(i, j)])
            .sum()
    };
    let mut total = 0.0;
    for l in 0..part.r1 {
        let al = &part.blocks[l];
        let wl = al.iter().map(|&i| part.sigma_w[i]).sum::<f64>() / al.len() as f64;
        for t in part.r_tilde..part.blocks.len() {
            total += 2.0 * wl / (nu_p(t) - lam) * block_sq(&s1, al, &part.blocks[t]);
        }
        let cs: Vec<usize> = (m..n).collect();
        total -= wl / lam * block_sq(g, al, &cs);
        for t in 0..part.blocks.len() {
            total += 2.0 * wl / (-nu_p(t) - lam) * block_sq(&t1, al, &part.blocks[t]);
        }
    }
    total
}

/// Builds `D` with `H = Prox′_θ(Q; H + D)` from a structured `H`.
///
/// `d33` is the PSD block of `D̃` on α₃×α₃ complementary to `S(H̃_{α₃α₃})` (zero when `None`).
pub fn fixed_point_lift(pair: &SpectralPair, h: &Mat, d33: Option<&Mat>) -> Result<Mat> {
    pair.check_shape(h)?;
    ensure_finite(h)?;
    let part = nondegenerate(pair)?;
    let ht = pair.to_frame(h);
    let (m, n) = (ht.nrows(), ht.ncols());
    let lam = part.lambda_star;
    let s = &part.sigma_q;
    let (al, be, a3) = (&part.alpha, &part.beta, &part.alpha3);
    let ap = part.alpha_prime();
    let tol = 1e-9 * ht.amax().max(1.0);

    let mut failures = Vec::new();
    let s_hpp = sym(&submatrix(&ht, &ap, &ap));
    if s_hpp.amax() > tol {
        failures.push(format!("S(H̃) on α′×α′ is nonzero ({:.3e})", s_hpp.amax()));
    }
    let mix = ap
        .iter()
        .flat_map(|&i| a3.iter().map(move |&j| (i, j)))
        .map(|(i, j)| (0.5 * (ht[(i, j)] + ht[(j, i)])).abs())
        .fold(0.0, f64::max);
    if mix > tol {
        failures.push(format!("S(H̃) on α′×α₃ is nonzero ({mix:.3e})"));
    }
    let h33 = sym(&submatrix(&ht, a3, a3));
    if !is_nsd(&h33) {
        failures.push("S(H̃) on α₃×α₃ is not negative semidefinite".to_string());
    }
    let d33 = match d33 {
        Some(blk) => {
            if blk.shape() != (a3.len(), a3.len()) {
                return Err(Error::ShapeMismatch("α₃ block has the wrong size".into()));
            }
            if skew(blk).amax() > tol || !is_psd(blk) {
                failures.push("supplied α₃ block is not symmetric PSD".to_string());
            }
            if h33.dot(blk).abs() > tol * blk.amax().max(1.0) {
                failures.push("supplied α₃ block is not complementary to S(H̃)".to_string());
            }
            blk.clone()
        }
        None => Mat::zeros(a3.len(), a3.len()),
    };
    if !failures.is_empty() {
        return Err(Error::PreconditionViolated(failures.join("; ")));
    }

    let mut dt = Mat::zeros(m, n);
    for &i in &ap {
        for &j in &ap {
            dt[(i, j)] = ((s[i] + s[j]) / (2.0 * lam) - 1.0) * ht[(i, j)];
        }
        for &j in a3 {
            let f = (s[i] - lam) / (2.0 * lam);
            dt[(i, j)] = f * ht[(i, j)];
            dt[(j, i)] = f * ht[(j, i)];
        }
    }
    let shift = d33.trace() / ap.len() as f64;
    for &i in &ap {
        dt[(i, i)] -= shift;
    }
    for (x, &i) in a3.iter().enumerate() {
        for (y, &j) in a3.iter().enumerate() {
            dt[(i, j)] = d33[(x, y)];
        }
    }
    for &i in al {
        for &j in be {
            let den = lam * lam - s[j] * s[j];
            let a = lam * (s[i] - lam) / den;
            let b = s[j] * (s[i] - lam) / den;
            dt[(i, j)] = a * ht[(i, j)] + b * ht[(j, i)];
            dt[(j, i)] = a * ht[(j, i)] + b * ht[(i, j)];
        }
        for j in m..n {
            dt[(i, j)] = (s[i] / lam - 1.0) * ht[(i, j)];
        }
    }
    Ok(pair.from_frame(&dt))
}

/// Outcome of checking `H = Prox′_θ(Q; H + D)` and its consequences.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub fixed_point: bool,
    pub fixed_point_residual: f64,
    pub in_crit_cone: bool,
    /// `|⟨H, D⟩ + ψ*_{(P,H)}(W)|`.
    pub identity_gap: f64,
}

pub const FIXED_POINT_TOL: f64 = 1e-9;

pub fn verify_prop34(pair: &SpectralPair, h: &Mat, d: &Mat) -> Result<FixedPointReport> {
    pair.check_shape(h)?;
    pair.check_shape(d)?;
    let image = prox_dirderiv(pair, &(h + d))?;
    let residual = (h - image).amax();
    let crit = in_crit_theta(pair, h, 1e-8)?;
    let psi = sigma_term(pair, h)?;
    Ok(FixedPointReport {
        fixed_point: residual <= FIXED_POINT_TOL * h.amax().max(1.0),
        fixed_point_residual: residual,
        in_crit_cone: crit.member,
        identity_gap: (h.dot(d) + psi).abs(),
    })
}

/// Whether `Prox′_θ(Q; D) = 0`.
pub fn prox_dir_kernel_member(pair: &SpectralPair, d: &Mat) -> Result<bool> {
    let image = prox_dirderiv(pair, d)?;
    Ok(image.amax() <= 1e-10 * d.amax().max(1.0))
}
