//! Counter-addressed Gaussian noise.
//!
//! Every step `n` of a run reads ChaCha8 stream `n`; particle `i` owns a
//! fixed block of words in that stream, so the noise it receives depends only
//! on `(seed, n, i)` and never on the order in which particles are visited.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream index reserved for drawing random initial positions.
const INIT_STREAM: u64 = u64::MAX;
/// Stream index reserved for clamp directions of coincident particles.
const CLAMP_STREAM: u64 = u64::MAX - 1;

#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

/// u64 words consumed per particle: one Box–Muller pair per two components.
#[inline]
fn words_per_particle(dim: usize) -> usize {
    2 * dim.div_ceil(2)
}

#[inline]
fn unit_open(u: u64) -> f64 {
    // (0, 1]: never zero, so ln() stays finite
    ((u >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let r = (-2.0 * unit_open(a).ln()).sqrt();
    let theta = std::f64::consts::TAU * unit_open(b);
    let (s, c) = theta.sin_cos();
    (r * c, r * s)
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn seek(&mut self, stream: u64, word: u128) {
        self.rng.set_stream(stream);
        self.rng.set_word_pos(word);
    }

    /// Fills `out` (length `K·dim`) with independent standard normals for step `step`.
    pub fn fill_step(&mut self, step: u64, dim: usize, out: &mut [f64]) {
        self.seek(step, 0);
        let w = words_per_particle(dim);
        for chunk in out.chunks_mut(dim) {
            self.fill_from_current(chunk, w);
        }
    }

    /// Normals of a single particle at a given step, read by direct seek.
    pub fn particle_normals(&mut self, step: u64, particle: usize, dim: usize) -> Vec<f64> {
        let w = words_per_particle(dim);
        // set_word_pos counts 32-bit words
        self.seek(step, (particle * w * 2) as u128);
        let mut out = vec![0.0; dim];
        self.fill_from_current(&mut out, w);
        out
    }

    fn fill_from_current(&mut self, out: &mut [f64], words: usize) {
        let dim = out.len();
        let mut k = 0;
        for _ in 0..words / 2 {
            let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
            if k < dim {
                out[k] = z0;
            }
            if k + 1 < dim {
                out[k + 1] = z1;
            }
            k += 2;
        }
    }

    /// Uniform samples in `[0, 1)` for initial placement.
    pub fn init_uniforms(&mut self, n: usize) -> Vec<f64> {
        self.seek(INIT_STREAM, 0);
        (0..n)
            .map(|_| (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
            .collect()
    }

    /// A random unit vector for the `index`-th coincidence event.
    pub fn clamp_direction(&mut self, index: u64, dim: usize) -> Vec<f64> {
        let w = words_per_particle(dim);
        self.seek(CLAMP_STREAM, index as u128 * w as u128 * 2);
        let mut v = vec![0.0; dim];
        self.fill_from_current(&mut v, w);
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|c| *c /= n);
        } else {
            v[0] = 1.0;
        }
        v
    }
}

/// Derives an independent seed for sub-run `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
