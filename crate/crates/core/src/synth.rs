//! Synthetic two-Gaussian classification data for desk-scale experiments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{Dataset, Example, SparseVector};

/// One pair of independent standard normals via Box-Muller.
fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // 1 - u keeps the argument of ln strictly positive.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Two isotropic Gaussian clusters centered at +-(separation/2) on the first
/// coordinate, `noise` standard deviation per coordinate, labels alternating
/// +1/-1 so classes stay balanced. Deterministic in `seed`.
pub fn generate_synthetic(
    n: usize,
    dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Invalid("n must be at least 2".into()));
    }
    if dim < 1 {
        return Err(Error::Invalid("dim must be at least 1".into()));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::Invalid("separation must be finite and >= 0".into()));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::Invalid("noise must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let center = label * separation / 2.0;
        let mut coords = Vec::with_capacity(dim + 1);
        while coords.len() < dim {
            let (a, b) = normal_pair(&mut rng);
            coords.push(a);
            coords.push(b);
        }
        let pairs = coords
            .iter()
            .take(dim)
            .enumerate()
            .map(|(d, z)| (d, noise * z + if d == 0 { center } else { 0.0 }))
            .collect();
        examples.push(Example {
            label,
            features: SparseVector::from_pairs(pairs),
        });
    }
    Ok(Dataset::from_examples(examples))
}
