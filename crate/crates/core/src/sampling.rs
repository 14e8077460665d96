//! Seeded random sampling used by validation and the checkers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for sample `index` under `seed`, so parallel sample
/// evaluation stays deterministic.
pub fn substream(seed: u64, index: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index.wrapping_add(1));
    r
}

/// Uniform point on the unit sphere of ℝⁿ.
pub fn unit_sphere<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-8 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Log-uniform scalar in `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let t: f64 = rng.gen();
    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
}

/// Direction uniform on the sphere times a log-uniform radius in `[1e-2, 1e2]`.
pub fn jump_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let r = log_uniform(rng, 1e-2, 1e2);
    unit_sphere(rng, n).into_iter().map(|x| x * r).collect()
}
