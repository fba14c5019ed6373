//! Direct O(K²) oracles shared by the integration tests.
#![allow(dead_code)]

use virialab::dynamics::ParticleState;
use virialab::potential::PotentialSpec;
use virialab::rng::NoiseStream;
use virialab::torus::TorusBox;

pub fn specs() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::PowerLawRepulsive {
            alpha: 2.0,
            r1: Some(1.0),
        },
        PotentialSpec::PowerLawRepulsive {
            alpha: 0.5,
            r1: None,
        },
        PotentialSpec::PowerLawRepulsive {
            alpha: 3.3,
            r1: Some(0.8),
        },
        PotentialSpec::PowerLawAttractiveRepulsive {
            alpha: 2.0,
            beta: 1.5,
            r0: 1.0,
            r1: 1.5,
        },
        PotentialSpec::GaussianRepulsive { width: 0.4 },
        PotentialSpec::GaussianCubic { width: 0.3 },
    ]
}

pub fn random_state(seed: u64, dim: usize, side: f64, k: usize) -> ParticleState {
    let u = NoiseStream::new(seed).init_uniforms(k * dim);
    ParticleState::new(
        TorusBox::new(dim, side).unwrap(),
        u.iter().map(|x| x * side).collect(),
    )
    .unwrap()
}

pub fn within(spec: &PotentialSpec, t: &TorusBox, disp: &[f64]) -> bool {
    let r = disp.iter().map(|c| c * c).sum::<f64>().sqrt();
    r <= spec.interaction_cutoff(t.side()) * (1.0 + 1e-12)
}

/// Direct double loop over all pairs through the public pair-force API.
pub fn brute_forces(state: &ParticleState, spec: &PotentialSpec) -> (Vec<f64>, Vec<f64>) {
    let d = state.dimension();
    let k = state.n_particles();
    let t = state.torus();
    let mut f = vec![0.0; k * d];
    let mut scale = vec![0.0; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let disp = t.minimal_image(state.position(i), state.position(j)).unwrap();
            if !within(spec, t, &disp) {
                continue;
            }
            let fij = spec.force(&disp).unwrap();
            let mag: f64 = fij.iter().map(|c| c.abs()).sum();
            for a in 0..d {
                f[i * d + a] += fij[a];
                f[j * d + a] -= fij[a];
            }
            scale[i] += mag;
            scale[j] += mag;
        }
    }
    (f, scale)
}

pub fn brute_virial(state: &ParticleState, spec: &PotentialSpec) -> f64 {
    let t = state.torus();
    let k = state.n_particles();
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let disp = t.minimal_image(state.position(i), state.position(j)).unwrap();
                if within(spec, t, &disp) {
                    s += spec.virial_kernel(&disp).unwrap();
                }
            }
        }
    }
    s / t.volume()
}

pub fn min_pair_distance(state: &ParticleState) -> f64 {
    let t = state.torus();
    let mut m = f64::INFINITY;
    for i in 0..state.n_particles() {
        for j in (i + 1)..state.n_particles() {
            m = m.min(t.distance(state.position(i), state.position(j)).unwrap());
        }
    }
    m
}

/// Energy of particle `i` with all others.
pub fn energy_of(state: &ParticleState, spec: &PotentialSpec, i: usize) -> f64 {
    let t = state.torus();
    let mut e = 0.0;
    for j in 0..state.n_particles() {
        if j != i {
            let r = t.distance(state.position(i), state.position(j)).unwrap();
            if r <= spec.interaction_cutoff(t.side()) {
                e += spec.value(r).unwrap();
            }
        }
    }
    e
}

/// Cubic lattice of `n^dim` sites with each coordinate jittered by up to
/// `±0.3` spacings, so pairs stay at least `0.4` spacings apart.
pub fn jittered_state(seed: u64, dim: usize, side: f64, n: usize) -> ParticleState {
    let k = n.pow(dim as u32);
    let h = side / n as f64;
    let u = NoiseStream::new(seed).init_uniforms(k * dim);
    let mut x = Vec::with_capacity(k * dim);
    for idx in 0..k {
        let mut rest = idx;
        for a in 0..dim {
            x.push(((rest % n) as f64 + 0.6 * (u[idx * dim + a] - 0.5)) * h);
            rest /= n;
        }
    }
    ParticleState::new(TorusBox::new(dim, side).unwrap(), x).unwrap()
}
