//! Cell-list pair search on the torus.
//!
//! The box is cut into `m^d` cells of side `L/m >= cutoff`. Each unordered
//! pair within the cutoff is visited exactly once: pairs inside a cell, plus
//! pairs between a cell and its forward half-stencil. With fewer than three
//! cells per axis the half-stencil would alias, so the list falls back to the
//! O(K²) loop.

use crate::dynamics::ParticleState;
use crate::error::{Error, Result};
use crate::potential::TRUNCATION_SLACK;
use crate::torus::MAX_DIM;

#[derive(Clone, Debug)]
pub struct NeighborList {
    cutoff: f64,
    dim: usize,
    side: f64,
    /// 0 selects the all-pairs loop.
    cells_per_axis: usize,
    cell_start: Vec<usize>,
    members: Vec<usize>,
    cell_of: Vec<usize>,
    stencil: Vec<[isize; MAX_DIM]>,
}

fn half_stencil(dim: usize) -> Vec<[isize; MAX_DIM]> {
    let mut out = Vec::new();
    let range = |k: usize| if k < dim { -1..=1 } else { 0..=0 };
    for dz in range(2) {
        for dy in range(1) {
            for dx in range(0) {
                let o = [dx, dy, dz];
                // lexicographically positive offsets, highest axis first
                let first = o.iter().rev().copied().find(|&c| c != 0);
                if first == Some(1) {
                    out.push(o);
                }
            }
        }
    }
    out
}

impl NeighborList {
    /// Builds a list for the current positions. `cutoff` may not exceed `L/2`.
    pub fn build(state: &ParticleState, cutoff: f64) -> Result<Self> {
        let torus = state.torus();
        let side = torus.side();
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::Config(format!("cutoff must be positive, got {cutoff}")));
        }
        if cutoff > 0.5 * side * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "interaction cutoff {cutoff} exceeds half the box side {side}; \
                 minimal-image convention requires cutoff <= L/2"
            )));
        }
        let dim = torus.dimension();
        let m = (side / cutoff).floor() as usize;
        let cells_per_axis = if m >= 3 { m } else { 0 };
        let mut list = NeighborList {
            cutoff,
            dim,
            side,
            cells_per_axis,
            cell_start: Vec::new(),
            members: Vec::new(),
            cell_of: Vec::new(),
            stencil: half_stencil(dim),
        };
        list.rebuild(state);
        Ok(list)
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn uses_cells(&self) -> bool {
        self.cells_per_axis > 0
    }

    fn n_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    /// Re-bins particles after they moved; reuses the allocations.
    pub fn rebuild(&mut self, state: &ParticleState) {
        if self.cells_per_axis == 0 {
            return;
        }
        let m = self.cells_per_axis;
        let inv = m as f64 / self.side;
        let k = state.n_particles();
        let n_cells = self.n_cells();
        self.cell_of.clear();
        self.cell_start.clear();
        self.cell_start.resize(n_cells + 1, 0);
        for i in 0..k {
            let p = state.position(i);
            let mut c = 0;
            for a in (0..self.dim).rev() {
                let idx = ((p[a] * inv) as usize).min(m - 1);
                c = c * m + idx;
            }
            self.cell_of.push(c);
            self.cell_start[c + 1] += 1;
        }
        for c in 0..n_cells {
            self.cell_start[c + 1] += self.cell_start[c];
        }
        self.members.clear();
        self.members.resize(k, 0);
        let mut fill = self.cell_start.clone();
        for (i, &c) in self.cell_of.iter().enumerate() {
            self.members[fill[c]] = i;
            fill[c] += 1;
        }
    }

    fn cell_coords(&self, c: usize) -> [usize; MAX_DIM] {
        let m = self.cells_per_axis;
        let mut out = [0; MAX_DIM];
        let mut rest = c;
        for slot in out.iter_mut().take(self.dim) {
            *slot = rest % m;
            rest /= m;
        }
        out
    }

    fn cell_index(&self, coords: [isize; MAX_DIM]) -> usize {
        let m = self.cells_per_axis as isize;
        let mut c = 0isize;
        for a in (0..self.dim).rev() {
            c = c * m + coords[a].rem_euclid(m);
        }
        c as usize
    }

    fn members_of(&self, c: usize) -> &[usize] {
        &self.members[self.cell_start[c]..self.cell_start[c + 1]]
    }

    /// Calls `f(i, j, x_i − x_j, |x_i − x_j|²)` once for every unordered pair
    /// within the cutoff (up to a relative roundoff slack). The displacement is
    /// the minimal image.
    #[inline]
    pub fn for_each_pair<F>(&self, state: &ParticleState, f: F)
    where
        F: FnMut(usize, usize, &[f64; MAX_DIM], f64),
    {
        match self.dim {
            1 => self.pairs_in::<1, F>(state, f),
            2 => self.pairs_in::<2, F>(state, f),
            _ => self.pairs_in::<3, F>(state, f),
        }
    }

    fn pairs_in<const D: usize, F>(&self, state: &ParticleState, mut f: F)
    where
        F: FnMut(usize, usize, &[f64; MAX_DIM], f64),
    {
        let torus = state.torus();
        let pos = state.positions();
        let rc = self.cutoff * (1.0 + TRUNCATION_SLACK);
        let rc2 = rc * rc;
        let visit = |i: usize, j: usize, f: &mut F| {
            let (pi, pj) = (&pos[i * D..i * D + D], &pos[j * D..j * D + D]);
            let mut d = [0.0; MAX_DIM];
            let mut r2 = 0.0;
            for a in 0..D {
                let v = torus.image_coord(pi[a] - pj[a]);
                d[a] = v;
                r2 += v * v;
            }
            if r2 <= rc2 {
                f(i, j, &d, r2);
            }
        };
        if self.cells_per_axis == 0 {
            let k = state.n_particles();
            for i in 0..k {
                for j in (i + 1)..k {
                    visit(i, j, &mut f);
                }
            }
            return;
        }
        for c in 0..self.n_cells() {
            let own = self.members_of(c);
            if own.is_empty() {
                continue;
            }
            for (a, &i) in own.iter().enumerate() {
                for &j in &own[a + 1..] {
                    visit(i, j, &mut f);
                }
            }
            let base = self.cell_coords(c);
            for off in &self.stencil {
                let mut nc = [0isize; MAX_DIM];
                for a in 0..D {
                    nc[a] = base[a] as isize + off[a];
                }
                let other = self.members_of(self.cell_index(nc));
                for &i in own {
                    for &j in other {
                        visit(i, j, &mut f);
                    }
                }
            }
        }
    }

    /// All unordered pairs within the cutoff as `(min, max)` index tuples, sorted.
    pub fn pairs(&self, state: &ParticleState) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.for_each_pair(state, |i, j, _, _| out.push((i.min(j), i.max(j))));
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusBox;

    fn state_1d(l: f64, xs: &[f64]) -> ParticleState {
        ParticleState::new(TorusBox::new(1, l).unwrap(), xs.to_vec()).unwrap()
    }

    fn brute(state: &ParticleState, cutoff: f64) -> Vec<(usize, usize)> {
        let t = state.torus();
        let mut out = Vec::new();
        for i in 0..state.n_particles() {
            for j in (i + 1)..state.n_particles() {
                if t.distance(state.position(i), state.position(j)).unwrap() <= cutoff {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn half_stencil_sizes() {
        assert_eq!(half_stencil(1).len(), 1);
        assert_eq!(half_stencil(2).len(), 4);
        assert_eq!(half_stencil(3).len(), 13);
    }

    #[test]
    fn single_particle_has_no_pairs() {
        let s = state_1d(10.0, &[3.0]);
        assert!(NeighborList::build(&s, 1.0).unwrap().pairs(&s).is_empty());
    }

    #[test]
    fn sparse_lattice_has_no_pairs() {
        let xs: Vec<f64> = (0..5).map(|i| 2.0 * i as f64).collect();
        let s = state_1d(10.0, &xs);
        assert!(NeighborList::build(&s, 1.0).unwrap().pairs(&s).is_empty());
    }

    #[test]
    fn ring_of_four_includes_wraparound() {
        let s = state_1d(4.0, &[0.0, 1.0, 2.0, 3.0]);
        let nl = NeighborList::build(&s, 1.0).unwrap();
        assert_eq!(nl.pairs(&s), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(nl.pairs(&s), brute(&s, 1.0));
    }

    #[test]
    fn cutoff_larger_than_half_box_is_rejected() {
        let s = state_1d(4.0, &[0.0]);
        assert!(matches!(NeighborList::build(&s, 2.5), Err(Error::Config(_))));
        assert!(NeighborList::build(&s, 2.0).is_ok());
    }

    #[test]
    fn matches_brute_force_in_two_and_three_dimensions() {
        let mut noise = crate::rng::NoiseStream::new(11);
        for (dim, l, cutoff) in [(2usize, 7.3, 1.1), (3, 6.1, 1.9), (2, 5.0, 2.4), (1, 9.0, 0.7)] {
            let k = 60;
            let u = noise.init_uniforms(k * dim);
            let pos: Vec<f64> = u.iter().map(|x| x * l).collect();
            let s = ParticleState::new(TorusBox::new(dim, l).unwrap(), pos).unwrap();
            let nl = NeighborList::build(&s, cutoff).unwrap();
            assert_eq!(nl.pairs(&s), brute(&s, cutoff), "dim={dim}");
        }
    }
}
