//! Reference computations shared by the test suites and the acceptance harness.

use rand::Rng;
use specnorm::cones::{matrix_cone_model, sample_matrix_cone, sample_model, ConeSpec, ConeTag, MatrixCone};
use specnorm::matcore::{skew_part, submatrix, sym_part, Mat};
use specnorm::proxlib::{nuclear_norm, prox_spectral, spectral_norm, theta_dirderiv, SpectralPair};
use specnorm::sampling::gaussian_matrix;
use specnorm::sensitivity::prox_dirderiv;

use super::direction;

/// Projection onto the unit nuclear ball through nalgebra's SVD and bisection on the
/// dual level `λ ↦ Σ [σᵢ − λ]₊ − 1`.
pub fn ball_projection_oracle(q: &Mat) -> Mat {
    let svd = q.clone().svd(true, true);
    let s = &svd.singular_values;
    if s.sum() <= 1.0 {
        return q.clone();
    }
    let (mut lo, mut hi) = (0.0, s.max());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = s.iter().map(|&x| (x - mid).max(0.0)).sum();
        if mass > 1.0 { lo = mid } else { hi = mid }
    }
    let lam = 0.5 * (lo + hi);
    let shrunk = s.map(|x| (x - lam).max(0.0));
    svd.u.unwrap() * Mat::from_diagonal(&shrunk) * svd.v_t.unwrap()
}

pub fn random_q<R: Rng>(r: &mut R) -> Mat {
    let m = r.random_range(1..=8);
    let n = r.random_range(1..=12);
    gaussian_matrix(m, n, r) * r.random_range(0.05..3.0)
}

/// Worst errors of θ′ and Prox′ against one-sided differences, for a unit direction.
/// Returns (plain difference at the smallest step, two-step extrapolated difference over all steps).
pub fn fd_errors(pair: &SpectralPair, d: &Mat) -> [f64; 4] {
    let d = d / d.norm();
    let dp = prox_dirderiv(pair, &d).unwrap();
    let dth = theta_dirderiv(pair, &d).unwrap();
    let th0 = spectral_norm(&pair.p).unwrap();
    let prox_fd = |t: f64| (prox_spectral(&(&pair.q + &d * t)).unwrap().p - &pair.p) / t;
    let theta_fd = |t: f64| (spectral_norm(&(&pair.p + &d * t)).unwrap() - th0) / t;
    let mut out = [0.0f64; 4];
    for t in [1e-5, 1e-6, 1e-7] {
        let (p1, p2) = (prox_fd(t), prox_fd(t / 2.0));
        let (t1, t2) = (theta_fd(t), theta_fd(t / 2.0));
        out[2] = out[2].max((2.0 * t2 - t1 - dth).abs());
        out[3] = out[3].max((p2 * 2.0 - &p1 - &dp).amax());
        if t == 1e-7 {
            out[0] = (t1 - dth).abs();
            out[1] = (p1 - &dp).amax();
        }
    }
    out
}

/// One-sided derivative of the nuclear norm at `W` along `D`, from the SVD of `W`.
pub fn nuclear_dirderiv(pair: &SpectralPair, d: &Mat) -> f64 {
    let part = pair.partition().unwrap();
    let dt = pair.to_frame(d);
    let ap = part.alpha_prime();
    let rows: Vec<usize> = (0..dt.nrows()).filter(|i| !ap.contains(i)).collect();
    let cols: Vec<usize> = (0..dt.ncols()).filter(|j| !ap.contains(j)).collect();
    let lead: f64 = ap.iter().map(|&i| dt[(i, i)]).sum();
    let rest = submatrix(&dt, &rows, &cols);
    lead + if rest.is_empty() { 0.0 } else { nuclear_norm(&rest).unwrap() }
}

/// Members from sampling, non-members by a small generic push off the cone.
pub fn member_or_not<R: Rng>(pair: &SpectralPair, cone: MatrixCone, r: &mut R) -> Mat {
    let d = sample_matrix_cone(pair, cone, r).unwrap();
    if r.random_bool(0.5) {
        d
    } else {
        d + direction(pair, r) * 1e-3
    }
}

pub fn frame_vectors(pair: &SpectralPair, cone: MatrixCone, count: usize, r: &mut impl Rng) -> Mat {
    let model = matrix_cone_model(pair, cone).unwrap();
    let (m, n) = pair.frame_shape();
    let mut out = Mat::zeros(m * n, count);
    for k in 0..count {
        let dt = model.assemble(sample_model(&model, r).as_slice());
        let nrm = dt.norm();
        if nrm > 0.0 {
            out.column_mut(k).copy_from_slice((dt / nrm).as_slice());
        }
    }
    out
}

pub fn random_triple<R: Rng>(r: &mut R) -> (ConeSpec, Vec<f64>, Vec<f64>, Vec<f64>) {
    let l = r.random_range(1..=6);
    let mut tags = Vec::new();
    let (mut z, mut y, mut d) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..l {
        let tag = [ConeTag::Nonneg, ConeTag::Zero, ConeTag::Free][r.random_range(0..3)];
        let (zi, yi) = match tag {
            ConeTag::Nonneg => match r.random_range(0..3) {
                0 => (r.random_range(0.1..2.0), 0.0),
                1 => (0.0, -r.random_range(0.1..2.0)),
                _ => (0.0, 0.0),
            },
            ConeTag::Zero => (0.0, r.random_range(-2.0..2.0)),
            ConeTag::Free => (r.random_range(-2.0..2.0), 0.0),
        };
        tags.push(tag);
        z.push(zi);
        y.push(yi);
        d.push(match r.random_range(0..3) {
            0 => 0.0,
            1 => r.random_range(0.1..1.0),
            _ => -r.random_range(0.1..1.0),
        });
    }
    (ConeSpec::new(tags), z, y, d)
}

pub fn in_p(spec: &ConeSpec, v: &[f64]) -> bool {
    spec.tags.iter().zip(v).all(|(t, &x)| match t {
        ConeTag::Nonneg => x >= 0.0,
        ConeTag::Zero => x == 0.0,
        ConeTag::Free => true,
    })
}

/// Generators of `C_P(z, y) = T_P(z) ∩ y⊥` found by testing unit coordinate rays against the
/// definition: a ray belongs if a short step stays in `P` and it is orthogonal to `y`.
pub fn sampled_generators(spec: &ConeSpec, z: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let mut gens = Vec::new();
    for i in 0..spec.len() {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; spec.len()];
            e[i] = s;
            let stepped: Vec<f64> = z.iter().zip(&e).map(|(a, b)| a + 1e-3 * b).collect();
            if in_p(spec, &stepped) && (y[i] * s).abs() == 0.0 {
                gens.push(e);
            }
        }
    }
    gens
}

/// `Σ_k σ_k(W) trace(2 Ω_{a_k}(P, D))` assembled from pseudo-inverses.
pub fn omega_sigma_term(pair: &SpectralPair, d: &Mat) -> f64 {
    let part = pair.partition().unwrap();
    let dt = pair.to_frame(d);
    let m = part.m();
    let d1 = dt.columns(0, m).into_owned();
    let s1 = sym_part(&d1).unwrap();
    let t1 = skew_part(&d1).unwrap();
    let lam = part.lambda_star;
    let sp = part.sigma_p();
    let pinv = |sign: f64| {
        Mat::from_fn(m, m, |i, j| {
            let v = sign * sp[i] - lam;
            if i == j && v.abs() > 1e-12 { 1.0 / v } else { 0.0 }
        })
    };
    let (pos, neg) = (pinv(1.0), pinv(-1.0));
    let cs: Vec<usize> = (m..dt.ncols()).collect();
    let rows: Vec<usize> = (0..m).collect();
    let mut total = 0.0;
    for block in part.blocks.iter().take(part.r1) {
        let s = submatrix(&s1, &rows, block);
        let t = submatrix(&t1, &rows, block);
        let c = submatrix(&dt, block, &cs);
        let omega = s.transpose() * &pos * &s - &c * c.transpose() / (2.0 * lam) + t.transpose() * &neg * &t;
        for (x, &i) in block.iter().enumerate() {
            total += part.sigma_w[i] * 2.0 * omega[(x, x)];
        }
    }
    total
}
