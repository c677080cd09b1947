//! Lattice geometry, spin fields and the sufficient statistics built on them.
//!
//! Sites are addressed row-major inside a frame; frames are outermost, so the
//! global index of `(t, r, c)` is `t * rows * cols + r * cols + c`. The
//! neighbourhood is first order (4-connected) with a free boundary.
//!
//! Every pairwise statistic counts each unordered edge once. `S(z)` is the
//! sum of `z_i z_j` over spatial edges of one frame, `T1` sums `S` over all
//! frames and `T2` sums `z_{t,w} z_{t-1,w}` over consecutive frames.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

pub type Spin = i8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeDims {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
}

impl LatticeDims {
    pub fn new(rows: usize, cols: usize, frames: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || frames == 0 {
            return Err(invalid(format!("lattice dimensions must be positive, got {rows}x{cols}x{frames}")));
        }
        Ok(Self { rows, cols, frames })
    }

    pub fn spatial(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, 1)
    }

    /// Sites in one frame.
    pub fn frame_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn site_count(&self) -> usize {
        self.rows * self.cols * self.frames
    }

    /// Spatial edges in one frame; `2N(N-1)` on an `N x N` frame.
    pub fn edge_count(&self) -> usize {
        self.rows * (self.cols - 1) + self.cols * (self.rows - 1)
    }

    /// Temporal edges between consecutive frames.
    pub fn temporal_edge_count(&self) -> usize {
        (self.frames - 1) * self.frame_len()
    }

    pub fn is_spatial(&self) -> bool {
        self.frames == 1
    }

    pub fn index(&self, frame: usize, row: usize, col: usize) -> usize {
        frame * self.frame_len() + row * self.cols + col
    }

    /// `(frame, row, col)` of a global site index.
    pub fn coords(&self, site: usize) -> (usize, usize, usize) {
        let fl = self.frame_len();
        let local = site % fl;
        (site / fl, local / self.cols, local % self.cols)
    }

    /// The same dims with a single frame.
    pub fn frame_dims(&self) -> LatticeDims {
        LatticeDims { frames: 1, ..*self }
    }
}

/// First-order neighbours of a frame-local site, in the order up, down, left,
/// right, with sites outside the lattice dropped.
pub fn neighbors(site: usize, dims: &LatticeDims) -> Result<Vec<usize>> {
    if site >= dims.frame_len() {
        return Err(invalid(format!("site {site} outside a {}x{} frame", dims.rows, dims.cols)));
    }
    Ok(neighbors_unchecked(site, dims))
}

fn neighbors_unchecked(site: usize, dims: &LatticeDims) -> Vec<usize> {
    let (r, c) = (site / dims.cols, site % dims.cols);
    let mut out = Vec::with_capacity(4);
    if r > 0 {
        out.push(site - dims.cols);
    }
    if r + 1 < dims.rows {
        out.push(site + dims.cols);
    }
    if c > 0 {
        out.push(site - 1);
    }
    if c + 1 < dims.cols {
        out.push(site + 1);
    }
    out
}

/// Precomputed neighbour lists for every site of one frame.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    offsets: Vec<usize>,
    list: Vec<usize>,
}

impl Neighborhood {
    pub fn new(dims: &LatticeDims) -> Self {
        let n = dims.frame_len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut list = Vec::with_capacity(4 * n);
        offsets.push(0);
        for site in 0..n {
            list.extend(neighbors_unchecked(site, dims));
            offsets.push(list.len());
        }
        Self { offsets, list }
    }

    #[inline]
    pub fn of(&self, site: usize) -> &[usize] {
        &self.list[self.offsets[site]..self.offsets[site + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Field of `+1/-1` spins over one or more frames.
///
/// A purely spatial field (the hidden state of a spatial model) has
/// `frames == 1`; a spatio-temporal one stacks `frames` of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinField {
    dims: LatticeDims,
    values: Vec<Spin>,
}

/// Spatial spin field (`frames == 1`).
pub type BinaryField = SpinField;
/// Stack of spatial spin fields over time.
pub type SpatioTemporalField = SpinField;

impl SpinField {
    pub fn new(dims: LatticeDims, values: Vec<Spin>) -> Result<Self> {
        if values.len() != dims.site_count() {
            return Err(invalid(format!("expected {} spins, got {}", dims.site_count(), values.len())));
        }
        if let Some(pos) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(invalid(format!("spin at {pos} is {}, not +1/-1", values[pos])));
        }
        Ok(Self { dims, values })
    }

    pub fn filled(dims: LatticeDims, spin: Spin) -> Self {
        assert!(spin == 1 || spin == -1, "spin must be +1 or -1");
        Self { dims, values: vec![spin; dims.site_count()] }
    }

    pub fn random<R: Rng + ?Sized>(dims: LatticeDims, rng: &mut R) -> Self {
        let values = (0..dims.site_count()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self { dims, values }
    }

    /// Field with `+1` at even `row + col` and `-1` elsewhere, in every frame.
    pub fn checkerboard(dims: LatticeDims) -> Self {
        let values = (0..dims.site_count())
            .map(|i| {
                let (_, r, c) = dims.coords(i);
                if (r + c) % 2 == 0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        Self { dims, values }
    }

    /// Decode bit `i` of `state` as site `i` (`1` means `+1`).
    pub fn from_state_index(dims: LatticeDims, state: u64) -> Self {
        let values = (0..dims.site_count()).map(|i| if (state >> i) & 1 == 1 { 1 } else { -1 }).collect();
        Self { dims, values }
    }

    /// Inverse of [`SpinField::from_state_index`]; needs at most 64 sites.
    pub fn state_index(&self) -> u64 {
        assert!(self.values.len() <= 64);
        self.values.iter().enumerate().fold(0u64, |acc, (i, &v)| if v == 1 { acc | (1 << i) } else { acc })
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    pub fn values(&self) -> &[Spin] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Spin> {
        self.values
    }

    #[inline]
    pub fn get(&self, site: usize) -> Spin {
        self.values[site]
    }

    pub fn at(&self, frame: usize, row: usize, col: usize) -> Spin {
        self.values[self.dims.index(frame, row, col)]
    }

    #[inline]
    pub fn set(&mut self, site: usize, spin: Spin) {
        debug_assert!(spin == 1 || spin == -1);
        self.values[site] = spin;
    }

    #[inline]
    pub fn flip(&mut self, site: usize) {
        self.values[site] = -self.values[site];
    }

    pub fn frame(&self, t: usize) -> &[Spin] {
        let n = self.dims.frame_len();
        &self.values[t * n..(t + 1) * n]
    }

    /// Copy of frame `t` as a spatial field.
    pub fn frame_field(&self, t: usize) -> SpinField {
        SpinField { dims: self.dims.frame_dims(), values: self.frame(t).to_vec() }
    }

    /// Stack spatial fields of identical shape into one spatio-temporal field.
    pub fn stack(frames: &[SpinField]) -> Result<Self> {
        let first = frames.first().ok_or_else(|| invalid("no frames to stack"))?;
        let fd = first.dims;
        if frames.iter().any(|f| f.dims != fd) {
            return Err(invalid("frames differ in shape"));
        }
        let dims = LatticeDims::new(fd.rows, fd.cols, fd.frames * frames.len())?;
        let values = frames.iter().flat_map(|f| f.values.iter().copied()).collect();
        Ok(Self { dims, values })
    }

    pub fn negated(&self) -> Self {
        Self { dims: self.dims, values: self.values.iter().map(|v| -v).collect() }
    }

    pub fn spin_sum(&self) -> i64 {
        self.values.iter().map(|&v| v as i64).sum()
    }

    pub fn mean_spin(&self) -> f64 {
        self.spin_sum() as f64 / self.values.len() as f64
    }
}

/// Real-valued observations laid out like the hidden field.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedField<T> {
    dims: LatticeDims,
    values: Vec<T>,
}

impl<T: Real> ObservedField<T> {
    pub fn new(dims: LatticeDims, values: Vec<T>) -> Result<Self> {
        if values.len() != dims.site_count() {
            return Err(invalid(format!("expected {} observations, got {}", dims.site_count(), values.len())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("observation at {pos} is not finite")));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, site: usize) -> T {
        self.values[site]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_count(self.values.len())
    }

    /// Population variance.
    pub fn variance(&self) -> T {
        let m = self.mean();
        self.values.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_count(self.values.len())
    }
}

/// Sum of the spins neighbouring frame-local `site` within frame `frame`.
#[inline]
pub fn neighbor_spin_sum(z: &SpinField, nb: &Neighborhood, frame: usize, site: usize) -> i32 {
    let base = frame * z.dims.frame_len();
    nb.of(site).iter().map(|&j| z.values[base + j] as i32).sum()
}

fn frame_edges(dims: &LatticeDims) -> impl Iterator<Item = (usize, usize)> + '_ {
    let horizontal =
        (0..dims.rows).flat_map(move |r| (0..dims.cols - 1).map(move |c| (r * dims.cols + c, r * dims.cols + c + 1)));
    let vertical =
        (0..dims.rows - 1).flat_map(move |r| (0..dims.cols).map(move |c| (r * dims.cols + c, (r + 1) * dims.cols + c)));
    horizontal.chain(vertical)
}

/// Number of disagreeing spatial edges `d_z`, summed over frames.
pub fn disagree_count(z: &SpinField) -> u64 {
    let dims = z.dims;
    (0..dims.frames)
        .map(|t| {
            let f = z.frame(t);
            frame_edges(&dims).filter(|&(a, b)| f[a] != f[b]).count() as u64
        })
        .sum()
}

/// `S` of frame `t`: sum of `z_i z_j` over its unordered spatial edges.
pub fn frame_spatial_stat(z: &SpinField, t: usize) -> i64 {
    let f = z.frame(t);
    frame_edges(&z.dims).map(|(a, b)| (f[a] * f[b]) as i64).sum()
}

/// `S(z)` for a spatial field; `T1(z)`, the sum over frames, in general.
pub fn spatial_stat(z: &SpinField) -> i64 {
    (0..z.dims.frames).map(|t| frame_spatial_stat(z, t)).sum()
}

/// `T2(z)`: temporal agreement summed over consecutive frames; 0 for one frame.
pub fn temporal_stat(z: &SpinField) -> i64 {
    let n = z.dims.frame_len();
    (1..z.dims.frames)
        .map(|t| z.frame(t).iter().zip(&z.values[(t - 1) * n..t * n]).map(|(&a, &b)| (a * b) as i64).sum::<i64>())
        .sum()
}

/// Change in `S` (and `T1`) caused by flipping global site `site`.
pub fn flip_delta(z: &SpinField, nb: &Neighborhood, site: usize) -> i64 {
    let n = z.dims.frame_len();
    let (t, local) = (site / n, site % n);
    -2 * z.values[site] as i64 * neighbor_spin_sum(z, nb, t, local) as i64
}

/// A group of at most four sites sampled jointly by the block Gibbs sampler.
///
/// All indices are frame-local; the same partition is reused in every frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub sites: Vec<usize>,
    /// Edges with both endpoints inside the block, as site pairs.
    pub inner_edges: Vec<(usize, usize)>,
    /// For each entry of `sites`, its neighbours outside the block.
    pub boundary: Vec<Vec<usize>>,
}

/// Tile a frame with non-overlapping 2x2 blocks anchored at even offsets.
///
/// An odd trailing row or column yields 2x1, 1x2 and 1x1 remainder blocks.
/// Blocks are listed row-major by anchor.
pub fn block_partition(dims: &LatticeDims) -> Vec<Block> {
    let mut blocks = Vec::new();
    for r0 in (0..dims.rows).step_by(2) {
        for c0 in (0..dims.cols).step_by(2) {
            let mut sites = Vec::with_capacity(4);
            for r in r0..(r0 + 2).min(dims.rows) {
                for c in c0..(c0 + 2).min(dims.cols) {
                    sites.push(r * dims.cols + c);
                }
            }
            let mut inner_edges = Vec::new();
            let mut boundary = Vec::with_capacity(sites.len());
            for (k, &s) in sites.iter().enumerate() {
                let nbrs = neighbors_unchecked(s, dims);
                for &j in &nbrs {
                    if let Some(pos) = sites.iter().position(|&x| x == j) {
                        if pos > k {
                            inner_edges.push((s, j));
                        }
                    }
                }
                boundary.push(nbrs.into_iter().filter(|j| !sites.contains(j)).collect());
            }
            blocks.push(Block { sites, inner_edges, boundary });
        }
    }
    blocks
}
