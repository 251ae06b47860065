//! Reproducible driving noise: Brownian motion and a finite-activity marked
//! Poisson random measure on a jump-adapted partition.
//!
//! Every random stream is a ChaCha8 generator keyed by
//! `SHA-256(master_seed, path_index, purpose)`, so paths can be produced in
//! any order on any number of threads.
//!
//! The Brownian path is stored as cumulative values `W(t_i)` at the
//! partition points. Refinement only inserts points, so values at existing
//! points (and therefore every coarse increment) survive bit for bit.

use std::io::{self, Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coefficients::MarkSpace;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("invalid noise parameters: {0}")]
    Invalid(String),
    #[error("noise dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Key of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScenarioSeed {
    pub master_seed: u64,
    pub path_index: u64,
}

impl ScenarioSeed {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        ScenarioSeed { master_seed, path_index }
    }

    /// Independent generator for `purpose`.
    pub fn stream(&self, purpose: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.master_seed.to_le_bytes());
        h.update(self.path_index.to_le_bytes());
        h.update((purpose.len() as u64).to_le_bytes());
        h.update(purpose.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

/// One atom of the Poisson random measure.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub mark: Vec<f64>,
    /// Index of `time` in the partition.
    pub point: usize,
}

/// A sampled scenario on its jump-adapted partition.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: ScenarioSeed,
    horizon: f64,
    /// Number of grid cells; the grid is `T k / cells`.
    cells: u64,
    brownian_dim: usize,
    mark_dim: usize,
    lambda: f64,
    times: Vec<f64>,
    /// Row-major `times.len() x brownian_dim`.
    w: Vec<f64>,
    jumps: Vec<JumpRecord>,
}

/// A noise path shared by several simulations.
pub type SharedNoise = Arc<NoisePath>;

/// Common random numbers: every holder of the handle sees the same realization.
pub fn couple(noise: NoisePath) -> SharedNoise {
    Arc::new(noise)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `T k / n` computed on the reduced fraction, so equal fractions give equal
/// times whatever grid they come from.
fn grid_time(horizon: f64, k: u64, n: u64) -> f64 {
    if k == n {
        return horizon;
    }
    let g = gcd(k, n).max(1);
    horizon * (k / g) as f64 / (n / g) as f64
}

/// Number of cells for step `dt`: `ceil(T / dt)`, ignoring rounding noise.
pub fn cell_count(horizon: f64, dt: f64) -> u64 {
    ((horizon / dt) - 1e-9).ceil().max(1.0) as u64
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Sample `W` at `s` between `(s0, w0)` and `(s1, w1)` from the bridge law.
fn bridge_point<R: Rng>(rng: &mut R, s0: f64, w0: &[f64], s1: f64, w1: &[f64], s: f64, out: &mut [f64]) {
    let span = s1 - s0;
    let frac = (s - s0) / span;
    let sd = ((s - s0) * (s1 - s) / span).max(0.0).sqrt();
    for j in 0..out.len() {
        out[j] = w0[j] + frac * (w1[j] - w0[j]) + sd * normal(rng);
    }
}

/// Sample a scenario on `[0, T]` with grid step at most `dt`.
///
/// The grid Brownian path comes from the `"brownian"` stream and is the same
/// for every mark space; jump times, marks and the Brownian values at jump
/// times come from their own streams.
pub fn sample_noise(
    seed: ScenarioSeed,
    horizon: f64,
    dt: f64,
    brownian_dim: usize,
    marks: &MarkSpace,
) -> Result<NoisePath, NoiseError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(NoiseError::Invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(NoiseError::Invalid(format!("step must be positive, got {dt}")));
    }
    let lambda = marks.total_mass();
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(NoiseError::Invalid(format!("intensity must be finite, got {lambda}")));
    }
    let cells = cell_count(horizon, dt);
    let n = brownian_dim;

    let mut grid_w = vec![0.0; (cells as usize + 1) * n];
    let mut rng = seed.stream("brownian");
    for k in 1..=cells as usize {
        let h = grid_time(horizon, k as u64, cells) - grid_time(horizon, k as u64 - 1, cells);
        let sd = h.sqrt();
        for j in 0..n {
            grid_w[k * n + j] = grid_w[(k - 1) * n + j] + sd * normal(&mut rng);
        }
    }

    let grid: Vec<f64> = (0..=cells).map(|k| grid_time(horizon, k, cells)).collect();
    let (jump_times, jump_marks) = sample_jumps(&seed, horizon, marks, &grid)?;

    let mut times = Vec::with_capacity(grid.len() + jump_times.len());
    let mut w = Vec::with_capacity((grid.len() + jump_times.len()) * n);
    let mut jumps = Vec::with_capacity(jump_times.len());
    let mut bridge = seed.stream("brownian/jumps");
    let mut next = 0;
    let mut buf = vec![0.0; n];
    for k in 0..grid.len() {
        // Jumps strictly inside the cell (grid[k-1], grid[k]).
        while next < jump_times.len() && jump_times[next] < grid[k] {
            let s = jump_times[next];
            let last = times.len() - 1;
            let (s0, w0) = (times[last], w[last * n..(last + 1) * n].to_vec());
            bridge_point(&mut bridge, s0, &w0, grid[k], &grid_w[k * n..(k + 1) * n], s, &mut buf);
            times.push(s);
            w.extend_from_slice(&buf);
            jumps.push(JumpRecord { time: s, mark: jump_marks[next].clone(), point: times.len() - 1 });
            next += 1;
        }
        times.push(grid[k]);
        w.extend_from_slice(&grid_w[k * n..(k + 1) * n]);
    }
    Ok(NoisePath { seed, horizon, cells, brownian_dim: n, mark_dim: marks.dim(), lambda, times, w, jumps })
}

/// Poisson count, then sorted uniform times in `(0, T)` avoiding grid
/// points and ties (redrawn), then independent marks.
fn sample_jumps(
    seed: &ScenarioSeed,
    horizon: f64,
    marks: &MarkSpace,
    grid: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), NoiseError> {
    let mean = marks.total_mass() * horizon;
    let mut rng = seed.stream("jumps");
    let count = if mean > 0.0 {
        let p = Poisson::new(mean).map_err(|e| NoiseError::Invalid(e.to_string()))?;
        p.sample(&mut rng) as usize
    } else {
        0
    };
    let mut times = Vec::with_capacity(count);
    loop {
        times.clear();
        times.extend((0..count).map(|_| horizon * rng.random::<f64>()));
        times.sort_by(f64::total_cmp);
        let distinct = times.windows(2).all(|w| w[0] < w[1]);
        let off_grid = times.iter().all(|t| *t > 0.0 && grid.binary_search_by(|g| g.total_cmp(t)).is_err());
        if distinct && off_grid {
            break;
        }
    }
    let mut mark_rng = seed.stream("marks");
    let d = marks.dim();
    let jump_marks = (0..count)
        .map(|_| {
            let mut u = vec![0.0; d];
            marks.sample(&mut mark_rng, &mut u);
            u
        })
        .collect();
    Ok((times, jump_marks))
}

impl NoisePath {
    pub fn seed(&self) -> ScenarioSeed {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn cells(&self) -> u64 {
        self.cells
    }

    /// Grid step `T / cells`.
    pub fn step(&self) -> f64 {
        self.horizon / self.cells as f64
    }

    pub fn brownian_dim(&self) -> usize {
        self.brownian_dim
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Partition points: the grid merged with the jump times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `W` at partition point `i`.
    pub fn w(&self, i: usize) -> &[f64] {
        let n = self.brownian_dim;
        &self.w[i * n..(i + 1) * n]
    }

    pub fn jumps(&self) -> &[JumpRecord] {
        &self.jumps
    }

    pub fn jump_count_by(&self, t: f64) -> usize {
        self.jumps.partition_point(|j| j.time <= t)
    }

    /// `W(t_{i+1}) - W(t_i)` for every partition cell, flattened.
    pub fn increments(&self) -> Vec<f64> {
        let n = self.brownian_dim;
        (0..self.times.len() - 1)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.w[(i + 1) * n + j] - self.w[i * n + j])
            .collect()
    }

    /// Partition index of grid point `k` of a grid with `cells` cells, when
    /// that point is in the partition.
    pub fn grid_index(&self, k: u64, cells: u64) -> Option<usize> {
        let t = grid_time(self.horizon, k, cells);
        self.times.binary_search_by(|s| s.total_cmp(&t)).ok()
    }

    /// Increments over the cells of the coarser grid with `self.cells / factor`
    /// cells and the same jump times, read off the cumulative path.
    pub fn aggregate(&self, factor: u64) -> Result<Vec<f64>, NoiseError> {
        if factor == 0 || !self.cells.is_multiple_of(factor) {
            return Err(NoiseError::Invalid(format!("{factor} does not divide {} cells", self.cells)));
        }
        let coarse = self.cells / factor;
        let mut points = (0..=coarse)
            .map(|k| self.grid_index(k, coarse).ok_or_else(|| NoiseError::Invalid(format!("grid point {k} missing"))))
            .collect::<Result<Vec<_>, _>>()?;
        points.extend(self.jumps.iter().map(|j| j.point));
        points.sort_unstable();
        let n = self.brownian_dim;
        Ok(points
            .windows(2)
            .flat_map(|p| (0..n).map(move |j| (p[0], p[1], j)))
            .map(|(a, b, j)| self.w[b * n + j] - self.w[a * n + j])
            .collect())
    }

    /// Subdivide every grid cell into `factor` cells, filling new points from
    /// the Brownian bridge between their partition neighbours. Jumps and all
    /// existing values are kept exactly.
    pub fn refine(&self, factor: u64, seed: &ScenarioSeed) -> Result<NoisePath, NoiseError> {
        if factor < 2 {
            return Err(NoiseError::Invalid(format!("refinement factor must be at least 2, got {factor}")));
        }
        let fine =
            self.cells.checked_mul(factor).ok_or_else(|| NoiseError::Invalid("refined grid too large".into()))?;
        let n = self.brownian_dim;
        let mut rng = seed.stream(&format!("bridge/{}x{factor}", self.cells));
        let mut times = Vec::with_capacity(self.times.len() + (fine - self.cells) as usize);
        let mut w = Vec::with_capacity(times.capacity() * n);
        let mut jumps = self.jumps.clone();
        let mut jump_cursor = 0;
        let mut buf = vec![0.0; n];
        let mut k = 1u64;
        times.push(self.times[0]);
        w.extend_from_slice(self.w(0));
        for i in 1..self.times.len() {
            let s1 = self.times[i];
            let w1 = self.w(i);
            loop {
                let s = grid_time(self.horizon, k, fine);
                if s >= s1 {
                    if s == s1 {
                        k += 1;
                    }
                    break;
                }
                let last = times.len() - 1;
                let (s0, w0) = (times[last], w[last * n..(last + 1) * n].to_vec());
                bridge_point(&mut rng, s0, &w0, s1, w1, s, &mut buf);
                times.push(s);
                w.extend_from_slice(&buf);
                k += 1;
            }
            times.push(s1);
            w.extend_from_slice(w1);
            if jump_cursor < jumps.len() && jumps[jump_cursor].time == s1 {
                jumps[jump_cursor].point = times.len() - 1;
                jump_cursor += 1;
            }
        }
        Ok(NoisePath { seed: self.seed, cells: fine, times, w, jumps, ..self.clone_header() })
    }

    fn clone_header(&self) -> NoisePath {
        NoisePath {
            seed: self.seed,
            horizon: self.horizon,
            cells: self.cells,
            brownian_dim: self.brownian_dim,
            mark_dim: self.mark_dim,
            lambda: self.lambda,
            times: Vec::new(),
            w: Vec::new(),
            jumps: Vec::new(),
        }
    }

    /// Copy of this path with the Brownian part set to zero (jumps kept).
    pub fn without_brownian(&self) -> NoisePath {
        let mut out = self.clone();
        out.w.iter_mut().for_each(|v| *v = 0.0);
        out
    }
}

const MAGIC: &[u8; 8] = b"JSDENOIS";
const VERSION: u32 = 1;

impl NoisePath {
    /// Versioned little-endian dump.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        for v in [self.seed.master_seed, self.seed.path_index, self.cells] {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in [self.brownian_dim, self.mark_dim, self.times.len(), self.jumps.len()] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in [self.horizon, self.lambda] {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in self.times.iter().chain(&self.w) {
            out.write_all(&v.to_le_bytes())?;
        }
        for j in &self.jumps {
            out.write_all(&(j.point as u64).to_le_bytes())?;
            out.write_all(&j.time.to_le_bytes())?;
            for u in &j.mark {
                out.write_all(&u.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec");
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<NoisePath, NoiseError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NoiseError::Format("bad magic".into()));
        }
        let mut v4 = [0u8; 4];
        input.read_exact(&mut v4)?;
        let version = u32::from_le_bytes(v4);
        if version != VERSION {
            return Err(NoiseError::Format(format!("unsupported version {version}")));
        }
        let mut u64_ = || -> io::Result<u64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let master_seed = u64_()?;
        let path_index = u64_()?;
        let cells = u64_()?;
        let brownian_dim = u64_()? as usize;
        let mark_dim = u64_()? as usize;
        let points = u64_()? as usize;
        let njumps = u64_()? as usize;
        let horizon = f64::from_bits(u64_()?);
        let lambda = f64::from_bits(u64_()?);
        let limit = 1usize << 32;
        if points < 2 || points > limit || brownian_dim > 1024 || mark_dim > 1024 || njumps >= points {
            return Err(NoiseError::Format("implausible sizes in header".into()));
        }
        let times = (0..points).map(|_| u64_().map(f64::from_bits)).collect::<io::Result<Vec<_>>>()?;
        let w = (0..points * brownian_dim).map(|_| u64_().map(f64::from_bits)).collect::<io::Result<Vec<_>>>()?;
        let mut jumps = Vec::with_capacity(njumps);
        for _ in 0..njumps {
            let point = u64_()? as usize;
            let time = f64::from_bits(u64_()?);
            let mark = (0..mark_dim).map(|_| u64_().map(f64::from_bits)).collect::<io::Result<Vec<_>>>()?;
            if point >= points || times[point] != time {
                return Err(NoiseError::Format(format!("jump at {time} does not match partition point {point}")));
            }
            jumps.push(JumpRecord { time, mark, point });
        }
        if times[0] != 0.0 || times.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(NoiseError::Format("partition not strictly increasing from 0".into()));
        }
        Ok(NoisePath {
            seed: ScenarioSeed::new(master_seed, path_index),
            horizon,
            cells,
            brownian_dim,
            mark_dim,
            lambda,
            times,
            w,
            jumps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::MarkLaw;

    fn marks(lambda: f64) -> MarkSpace {
        MarkSpace::new(MarkLaw::Uniform { low: 0.0, high: 1.0 }, lambda).unwrap()
    }

    #[test]
    fn zero_intensity_gives_brownian_skeleton() {
        let p = sample_noise(ScenarioSeed::new(1, 0), 1.0, 0.1, 1, &marks(0.0)).unwrap();
        assert!(p.jumps().is_empty());
        assert_eq!(p.times().len(), 11);
        assert_eq!(*p.times().last().unwrap(), 1.0);
    }

    #[test]
    fn grid_count_ignores_rounding() {
        assert_eq!(cell_count(1.0, 0.1), 10);
        assert_eq!(cell_count(1.0, 1e-3), 1000);
        assert_eq!(cell_count(1.0, 0.3), 4);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = sample_noise(ScenarioSeed::new(9, 3), 1.0, 0.01, 2, &marks(3.0)).unwrap();
        let b = sample_noise(ScenarioSeed::new(9, 3), 1.0, 0.01, 2, &marks(3.0)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = sample_noise(ScenarioSeed::new(9, 4), 1.0, 0.01, 2, &marks(3.0)).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn jumps_sit_on_partition() {
        let p = sample_noise(ScenarioSeed::new(5, 0), 2.0, 0.05, 1, &marks(10.0)).unwrap();
        assert!(!p.jumps().is_empty());
        for j in p.jumps() {
            assert_eq!(p.times()[j.point], j.time);
            assert!(j.time > 0.0 && j.time < 2.0);
        }
        assert!(p.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dump_round_trip() {
        let p = sample_noise(ScenarioSeed::new(2, 7), 1.0, 0.05, 2, &marks(4.0)).unwrap();
        let q = NoisePath::read_from(&p.to_bytes()[..]).unwrap();
        assert_eq!(p, q);
        let mut bad = p.to_bytes();
        bad[0] = b'X';
        assert!(NoisePath::read_from(&bad[..]).is_err());
    }

    #[test]
    fn refinement_keeps_coarse_values() {
        let seed = ScenarioSeed::new(11, 2);
        let p = sample_noise(seed, 1.0, 0.125, 1, &marks(5.0)).unwrap();
        let f = p.refine(4, &seed).unwrap();
        assert_eq!(f.cells(), 32);
        assert_eq!(f.jumps().len(), p.jumps().len());
        for (i, t) in p.times().iter().enumerate() {
            let k = f.times().iter().position(|s| s == t).unwrap();
            assert_eq!(f.w(k), p.w(i));
        }
        assert_eq!(f.aggregate(4).unwrap(), p.increments());
        for j in f.jumps() {
            assert_eq!(f.times()[j.point], j.time);
        }
    }
}
