#![allow(dead_code)]

pub mod oracles;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use specnorm::matcore::Mat;
use specnorm::proxlib::{prox_spectral, SpectralPair};
use specnorm::sampling::{compose, gaussian_matrix, random_layout, random_orthogonal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `Q` with an engineered spectral layout; returned as `(pair, Q)` in the caller's shape.
pub fn tied_pair<R: Rng>(rng: &mut R) -> SpectralPair {
    let m = rng.random_range(1..=5);
    let n = m + rng.random_range(0..=3);
    let lay = random_layout(m, rng);
    let u = random_orthogonal(m, rng);
    let v = random_orthogonal(n, rng);
    let q = compose(&u, &lay.sigma_q(), &v);
    let q = if rng.random_bool(0.25) { q.transpose() } else { q };
    prox_spectral(&q).unwrap()
}

/// Gaussian `Q` scaled so that `P ≠ 0`.
pub fn random_pair<R: Rng>(rng: &mut R) -> SpectralPair {
    loop {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=8);
        let q = gaussian_matrix(m, n, rng) * rng.random_range(0.3..1.5);
        let pair = prox_spectral(&q).unwrap();
        if !pair.degenerate && pair.partition().unwrap().require_separated().is_ok() {
            return pair;
        }
    }
}

pub fn direction<R: Rng>(pair: &SpectralPair, rng: &mut R) -> Mat {
    gaussian_matrix(pair.q.nrows(), pair.q.ncols(), rng)
}

/// Random `H` meeting the structural requirements of the fixed-point lift, together with a
/// PSD α₃ block complementary to `S(H̃_{α₃α₃})` (zero with probability ½).
pub fn structured_direction<R: Rng>(pair: &SpectralPair, rng: &mut R) -> (Mat, Mat) {
    use specnorm::sampling::random_orthogonal;
    let part = pair.partition().unwrap();
    let (m, n) = pair.frame_shape();
    let mut ht = gaussian_matrix(m, n, rng);
    let ap = part.alpha_prime();
    let a3 = &part.alpha3;
    for &i in &ap {
        for &j in &ap {
            if i < j {
                ht[(j, i)] = -ht[(i, j)];
            }
        }
        ht[(i, i)] = 0.0;
        for &j in a3 {
            ht[(j, i)] = -ht[(i, j)];
        }
    }
    let k = a3.len();
    let mut d33 = Mat::zeros(k, k);
    if k > 0 {
        let basis = random_orthogonal(k, rng);
        let split = rng.random_range(0..=k);
        let mut s33 = Mat::zeros(k, k);
        for c in 0..k {
            let v = basis.column(c);
            let w: f64 = rng.random_range(0.1..1.0);
            if c < split {
                s33 -= v * v.transpose() * w;
            } else if rng.random_bool(0.5) {
                d33 += v * v.transpose() * w;
            }
        }
        let skew = gaussian_matrix(k, k, rng);
        let skew = (&skew - skew.transpose()) * 0.5;
        for (x, &i) in a3.iter().enumerate() {
            for (y, &j) in a3.iter().enumerate() {
                ht[(i, j)] = s33[(x, y)] + skew[(x, y)];
            }
        }
    }
    (pair.from_frame(&ht), d33)
}

/// Same pair with its frame re-mixed by random orthogonal factors inside each tied block.
pub fn remixed<R: Rng>(pair: &SpectralPair, rng: &mut R) -> SpectralPair {
    use specnorm::sampling::random_orthogonal;
    let part = pair.partition().unwrap();
    let (m, n) = pair.frame_shape();
    let mut ru = Mat::identity(m, m);
    let mut rv = Mat::identity(n, n);
    for (k, block) in part.blocks.iter().enumerate() {
        let g = random_orthogonal(block.len(), rng);
        let zero_block = k >= part.nu.len();
        for (x, &i) in block.iter().enumerate() {
            for (y, &j) in block.iter().enumerate() {
                ru[(i, j)] = g[(x, y)];
                if !zero_block {
                    rv[(i, j)] = g[(x, y)];
                }
            }
        }
        if zero_block {
            let h = random_orthogonal(block.len(), rng);
            for (x, &i) in block.iter().enumerate() {
                for (y, &j) in block.iter().enumerate() {
                    rv[(i, j)] = h[(x, y)];
                }
            }
        }
    }
    let c: Vec<usize> = (m..n).collect();
    let h = random_orthogonal(c.len(), rng);
    for (x, &i) in c.iter().enumerate() {
        for (y, &j) in c.iter().enumerate() {
            rv[(i, j)] = h[(x, y)];
        }
    }
    let mut out = pair.clone();
    out.frame.u = &pair.frame.u * ru;
    out.frame.v = &pair.frame.v * rv;
    out
}
