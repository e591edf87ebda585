//! Seeded, reproducible sampling of points, directions, rotations, and scales.
//!
//! Every randomized check derives one sub-generator per trial from a master
//! seed by counter, so trials can run in any order (or in parallel) and still
//! produce identical reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::region::{Region, Rotation};
use crate::Point;

/// Per-trial generator: counter-derived so trial `i` is independent of how
/// many trials ran before it.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&trial.to_le_bytes());
    seed[16..24].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

pub fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Log-uniform sample in [lo, hi]; scale-free properties are probed this way
/// so small scales are not drowned out by large ones.
pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo > 0.0 && hi >= lo);
    (uniform_in(rng, lo.ln(), hi.ln())).exp()
}

/// Standard normal via Box-Muller (kept local so the sampled stream is pinned
/// by this crate, not by a distribution crate's internals).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1 = rng.random::<f64>();
        let u2 = rng.random::<f64>();
        if u1 > 1e-300 {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// Uniform direction on the unit sphere of R^n.
pub fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    loop {
        let mut c = [0.0; 3];
        for ci in c.iter_mut().take(dim) {
            *ci = standard_normal(rng);
        }
        let p = Point::new(&c[..dim]);
        let n = p.norm();
        if n > 1e-9 {
            return p.scale(1.0 / n);
        }
    }
}

/// Uniform rotation: orthonormalization of a standard-normal matrix with the
/// sign fixed so the determinant is +1.
pub fn random_rotation(rng: &mut ChaCha8Rng, dim: usize) -> Rotation {
    if dim == 1 {
        return Rotation::identity(1);
    }
    loop {
        let mut cols: Vec<Point> = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut c = [0.0; 3];
            for ci in c.iter_mut().take(dim) {
                *ci = standard_normal(rng);
            }
            cols.push(Point::new(&c[..dim]));
        }
        // Gram-Schmidt
        let mut ok = true;
        for i in 0..dim {
            let mut v = cols[i];
            for j in 0..i {
                let proj = cols[j].scale(v.dot(&cols[j]));
                v = v.sub(&proj);
            }
            let n = v.norm();
            if n < 1e-9 {
                ok = false;
                break;
            }
            cols[i] = v.scale(1.0 / n);
        }
        if !ok {
            continue;
        }
        let rot = Rotation::from_columns(&cols).expect("orthonormal by construction");
        if rot.det() < 0.0 {
            let mut flipped = cols;
            flipped[0] = flipped[0].scale(-1.0);
            return Rotation::from_columns(&flipped).expect("orthonormal");
        }
        return rot;
    }
}

/// Uniform point in a region (rejection from the bounding box).
pub fn uniform_in_region(rng: &mut ChaCha8Rng, region: &Region) -> Point {
    let (lo, hi) = region.bounding_box();
    let dim = region.dim();
    loop {
        let mut c = [0.0; 3];
        for (i, ci) in c.iter_mut().enumerate().take(dim) {
            *ci = uniform_in(rng, lo.get(i), hi.get(i));
        }
        let p = Point::new(&c[..dim]);
        if region.contains(&p) {
            return p;
        }
    }
}
