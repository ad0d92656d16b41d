//! Uniform spatial hash over predicted particle positions.

use crate::error::FluidError;
use crate::fluid::particles::ParticleSet;
use crate::math::Vec3;

/// Spatial hash with cell size equal to the query radius.
///
/// Buckets are built by a counting sort, so a rebuild is two linear passes
/// and queries touch contiguous index ranges. Distinct cells may share a
/// bucket, so every entry keeps its exact cell key and queries skip entries
/// from other cells.
#[derive(Debug, Clone, Default)]
pub struct NeighborGrid {
    radius: f64,
    inv_cell: f64,
    mask: usize,
    start: Vec<u32>,
    entries: Vec<u32>,
    entry_cell: Vec<u64>,
    keys: Vec<u32>,
    cells: Vec<u64>,
    generation: u64,
    count: usize,
}

#[inline]
fn cell_of(x: &Vec3, inv: f64) -> [i64; 3] {
    [
        (x.x * inv).floor() as i64,
        (x.y * inv).floor() as i64,
        (x.z * inv).floor() as i64,
    ]
}

/// Pack a cell coordinate into 21 bits per axis.
#[inline]
fn pack(c: [i64; 3]) -> u64 {
    const OFF: i64 = 1 << 20;
    const MASK: u64 = (1 << 21) - 1;
    (((c[0] + OFF) as u64 & MASK) << 42) | (((c[1] + OFF) as u64 & MASK) << 21) | ((c[2] + OFF) as u64 & MASK)
}

#[inline]
fn hash(c: [i64; 3], mask: usize) -> usize {
    let h = (c[0].wrapping_mul(73_856_093)) ^ (c[1].wrapping_mul(19_349_663)) ^ (c[2].wrapping_mul(83_492_791));
    (h as u64 as usize) & mask
}

impl NeighborGrid {
    pub fn new(radius: f64) -> Result<Self, FluidError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(FluidError::Parameter {
                name: "h",
                message: format!("grid radius must be positive, got {radius}"),
            });
        }
        Ok(Self { radius, inv_cell: 1.0 / radius, generation: u64::MAX, ..Default::default() })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Index the predicted positions of `particles`.
    pub fn build(&mut self, particles: &ParticleSet) {
        let positions = &particles.predicted;
        let n = positions.len();
        let table = (2 * n).next_power_of_two().max(64);
        self.mask = table - 1;
        self.count = n;
        self.start.clear();
        self.start.resize(table + 1, 0);
        self.keys.clear();
        self.keys.reserve(n);
        self.cells.clear();
        self.cells.reserve(n);
        for x in positions {
            let c = cell_of(x, self.inv_cell);
            let k = hash(c, self.mask);
            self.keys.push(k as u32);
            self.cells.push(pack(c));
            self.start[k + 1] += 1;
        }
        for b in 0..table {
            self.start[b + 1] += self.start[b];
        }
        self.entries.clear();
        self.entries.resize(n, 0);
        self.entry_cell.clear();
        self.entry_cell.resize(n, 0);
        let mut fill = self.start.clone();
        for (i, &k) in self.keys.iter().enumerate() {
            let slot = &mut fill[k as usize];
            self.entries[*slot as usize] = i as u32;
            self.entry_cell[*slot as usize] = self.cells[i];
            *slot += 1;
        }
        self.generation = particles.generation();
    }

    pub fn check(&self, particles: &ParticleSet) -> Result<(), FluidError> {
        if self.generation != particles.generation() || self.count != particles.len() {
            return Err(FluidError::StaleGrid { grid: self.generation, particles: particles.generation() });
        }
        Ok(())
    }

    /// Visit every indexed particle strictly within the grid radius of `center`.
    /// The callback receives the index, `center - x_j` and its squared length.
    #[inline]
    pub fn for_each_within<F: FnMut(usize, Vec3, f64)>(&self, positions: &[Vec3], center: &Vec3, mut f: F) {
        if self.count == 0 {
            return;
        }
        let r2max = self.radius * self.radius;
        let c = cell_of(center, self.inv_cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let cell = [c[0] + dx, c[1] + dy, c[2] + dz];
                    let key = pack(cell);
                    let b = hash(cell, self.mask);
                    let (s, e) = (self.start[b] as usize, self.start[b + 1] as usize);
                    for (&j, &k) in self.entries[s..e].iter().zip(&self.entry_cell[s..e]) {
                        if k != key {
                            continue;
                        }
                        let j = j as usize;
                        let r = center - positions[j];
                        let r2 = r.norm_squared();
                        if r2 < r2max {
                            f(j, r, r2);
                        }
                    }
                }
            }
        }
    }

    /// Sorted indices of particles within the radius of particle `i`, itself included.
    pub fn neighbors(&self, particles: &ParticleSet, i: usize) -> Result<Vec<usize>, FluidError> {
        self.check(particles)?;
        particles.check_index(i)?;
        let mut out = Vec::new();
        self.for_each_within(&particles.predicted, &particles.predicted[i], |j, _, _| out.push(j));
        out.sort_unstable();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, seed: u64, extent: f64) -> ParticleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParticleSet::new();
        for _ in 0..n {
            let x = Vec3::new(
                rng.random_range(-extent..extent),
                rng.random_range(-extent..extent),
                rng.random_range(-extent..extent),
            );
            p.push_fluid(x, 1.0);
        }
        p
    }

    fn brute(p: &ParticleSet, i: usize, h: f64) -> Vec<usize> {
        (0..p.len())
            .filter(|&j| (p.predicted[i] - p.predicted[j]).norm_squared() < h * h)
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        for seed in 0..5 {
            let p = random_set(500, seed, 0.5);
            let h = 0.12;
            let mut g = NeighborGrid::new(h).unwrap();
            g.build(&p);
            for i in 0..p.len() {
                assert_eq!(g.neighbors(&p, i).unwrap(), brute(&p, i, h), "seed {seed} particle {i}");
            }
        }
    }

    #[test]
    fn detects_stale_grid() {
        let mut p = random_set(10, 1, 1.0);
        let mut g = NeighborGrid::new(0.3).unwrap();
        g.build(&p);
        assert!(g.check(&p).is_ok());
        p.predicted[0].x += 0.1;
        p.touch();
        assert!(matches!(g.neighbors(&p, 0), Err(FluidError::StaleGrid { .. })));
    }

    #[test]
    fn negative_coordinates_and_empty_set() {
        let p = ParticleSet::new();
        let mut g = NeighborGrid::new(0.1).unwrap();
        g.build(&p);
        let mut hits = 0;
        g.for_each_within(&p.predicted, &Vec3::zeros(), |_, _, _| hits += 1);
        assert_eq!(hits, 0);
        let p = random_set(200, 9, 3.0);
        let mut g = NeighborGrid::new(1.0).unwrap();
        g.build(&p);
        for i in 0..p.len() {
            assert_eq!(g.neighbors(&p, i).unwrap(), brute(&p, i, 1.0));
        }
    }
}
