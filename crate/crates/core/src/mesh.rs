//! Tensor-product grids with per-cell spacings and block domain decomposition.
//!
//! A grid dimension with `n` interior points carries `n + 1` spacings: the
//! intervals between consecutive nodes, boundary nodes included. Boundary
//! nodes themselves are never unknowns; Dirichlet data is folded into the
//! right-hand side by the operator assembly.

use crate::config::Config;
use crate::error::{Error, Result};

/// Rectilinear grid: one spacing array per dimension plus a coordinate origin.
#[derive(Debug, Clone, PartialEq)]
pub struct NonuniformGrid {
    spacings: Vec<Vec<f64>>,
    origin: Vec<f64>,
}

impl NonuniformGrid {
    /// 1-D grid with `n` interior points over `length`, equal spacings.
    pub fn uniform(n: usize, length: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("uniform grid needs at least 1 interior point".into()));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidArgument(format!("grid length must be positive, got {length}")));
        }
        let h = length / (n + 1) as f64;
        Ok(Self { spacings: vec![vec![h; n + 1]], origin: vec![0.0] })
    }

    /// 1-D grid whose spacings grow by a fixed ratio:
    /// `first, first*ratio, ..., first*ratio^n`.
    pub fn geometric(n: usize, first_spacing: f64, ratio: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("geometric grid needs at least 1 interior point".into()));
        }
        if !(first_spacing > 0.0) {
            return Err(Error::InvalidArgument(format!("first spacing must be positive, got {first_spacing}")));
        }
        if !(ratio > 0.0 && ratio < 2.0) {
            return Err(Error::InvalidArgument(format!("spacing ratio must lie in (0, 2), got {ratio}")));
        }
        let mut spacings = Vec::with_capacity(n + 1);
        let mut h = first_spacing;
        for _ in 0..=n {
            spacings.push(h);
            h *= ratio;
        }
        Ok(Self { spacings: vec![spacings], origin: vec![0.0] })
    }

    /// Geometric growth clamped at a limiting spacing: grows (or shrinks) by
    /// `ratio` until `cap` is reached, then stays at `cap`.
    pub fn geometric_capped(n: usize, first_spacing: f64, ratio: f64, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::InvalidArgument(format!("spacing cap must be positive, got {cap}")));
        }
        let mut grid = Self::geometric(n, first_spacing, ratio)?;
        for h in &mut grid.spacings[0] {
            if ratio >= 1.0 {
                *h = h.min(cap);
            } else {
                *h = h.max(cap);
            }
        }
        Ok(grid)
    }

    /// Combine 1-D grids into one multi-dimensional tensor grid.
    pub fn product(dims: &[NonuniformGrid]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("tensor grid needs at least one dimension".into()));
        }
        let mut spacings = Vec::new();
        let mut origin = Vec::new();
        for g in dims {
            if g.ndim() != 1 {
                return Err(Error::InvalidArgument("tensor factors must be 1-D grids".into()));
            }
            spacings.push(g.spacings[0].clone());
            origin.push(g.origin[0]);
        }
        Ok(Self { spacings, origin })
    }

    /// Build directly from spacing arrays (one per dimension).
    pub fn from_spacings(spacings: Vec<Vec<f64>>, origin: Vec<f64>) -> Result<Self> {
        if spacings.is_empty() || spacings.len() != origin.len() {
            return Err(Error::InvalidArgument("spacings/origin dimension mismatch".into()));
        }
        for dim in &spacings {
            if dim.len() < 2 {
                return Err(Error::InvalidArgument("each dimension needs at least 2 spacings".into()));
            }
            if dim.iter().any(|h| !(*h > 0.0)) {
                return Err(Error::InvalidArgument("all spacings must be positive".into()));
            }
        }
        Ok(Self { spacings, origin })
    }

    pub fn ndim(&self) -> usize {
        self.spacings.len()
    }

    /// Interior point count along one dimension.
    pub fn n_interior(&self, dim: usize) -> usize {
        self.spacings[dim].len() - 1
    }

    /// Interior point counts for every dimension.
    pub fn shape(&self) -> Vec<usize> {
        (0..self.ndim()).map(|d| self.n_interior(d)).collect()
    }

    /// Total number of interior unknowns.
    pub fn n_points(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn spacings(&self, dim: usize) -> &[f64] {
        &self.spacings[dim]
    }

    pub fn origin(&self, dim: usize) -> f64 {
        self.origin[dim]
    }

    /// Domain extent along a dimension (sum of spacings).
    pub fn length(&self, dim: usize) -> f64 {
        self.spacings[dim].iter().sum()
    }

    /// Coordinates of the interior nodes along one dimension.
    pub fn node_positions(&self, dim: usize) -> Vec<f64> {
        let mut x = self.origin[dim];
        let n = self.n_interior(dim);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            x += self.spacings[dim][i];
            out.push(x);
        }
        out
    }

    /// Half-sum cell widths: node `i` owns `(h_i + h_{i+1}) / 2`.
    pub fn cell_widths(&self, dim: usize) -> Vec<f64> {
        let h = &self.spacings[dim];
        (0..self.n_interior(dim)).map(|i| 0.5 * (h[i] + h[i + 1])).collect()
    }

    /// Largest relative change between consecutive spacings along a
    /// dimension: `max_i |1 - h_{i+1}/h_i|`.
    pub fn max_stretching(&self, dim: usize) -> f64 {
        let h = &self.spacings[dim];
        h.windows(2)
            .map(|w| (1.0 - w[1] / w[0]).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest spacing along a dimension.
    pub fn min_spacing(&self, dim: usize) -> f64 {
        self.spacings[dim].iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Block decomposition of a tensor grid over a processor grid. Each
/// dimension is split into near-equal contiguous chunks; the first
/// `N mod P` ranks along a dimension receive one extra point.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    proc_counts: Vec<usize>,
    chunks: Vec<Vec<usize>>,
}

/// Split `n` points into `p` near-equal chunks, larger chunks first.
pub fn split_counts(n: usize, p: usize) -> Vec<usize> {
    let base = n / p;
    let extra = n % p;
    (0..p).map(|i| if i < extra { base + 1 } else { base }).collect()
}

/// Decompose a grid of `grid_sizes` points over `proc_counts` processors
/// per dimension.
pub fn decompose(grid_sizes: &[usize], proc_counts: &[usize]) -> Result<Decomposition> {
    if grid_sizes.is_empty() || grid_sizes.len() != proc_counts.len() {
        return Err(Error::InvalidArgument("grid and processor dimension counts must match".into()));
    }
    let mut chunks = Vec::new();
    for (d, (&n, &p)) in grid_sizes.iter().zip(proc_counts).enumerate() {
        if p == 0 {
            return Err(Error::InvalidArgument(format!("dimension {d}: processor count must be positive")));
        }
        if p > n {
            return Err(Error::InvalidArgument(format!(
                "dimension {d}: {p} processors exceed {n} grid points"
            )));
        }
        chunks.push(split_counts(n, p));
    }
    Ok(Decomposition { proc_counts: proc_counts.to_vec(), chunks })
}

impl Decomposition {
    pub fn ndim(&self) -> usize {
        self.proc_counts.len()
    }

    pub fn proc_counts(&self) -> &[usize] {
        &self.proc_counts
    }

    /// Chunk sizes along one dimension.
    pub fn chunks(&self, dim: usize) -> &[usize] {
        &self.chunks[dim]
    }

    pub fn rank_count(&self) -> usize {
        self.proc_counts.iter().product()
    }

    /// Per-dimension chunk coordinates of a linear rank (row-major, first
    /// dimension slowest).
    pub fn coords(&self, rank: usize) -> Vec<usize> {
        let mut c = vec![0; self.ndim()];
        let mut r = rank;
        for d in (0..self.ndim()).rev() {
            c[d] = r % self.proc_counts[d];
            r /= self.proc_counts[d];
        }
        c
    }

    fn rank_of(&self, coords: &[usize]) -> usize {
        let mut r = 0;
        for d in 0..self.ndim() {
            r = r * self.proc_counts[d] + coords[d];
        }
        r
    }

    /// Interior points owned by a rank.
    pub fn points(&self, rank: usize) -> usize {
        let c = self.coords(rank);
        (0..self.ndim()).map(|d| self.chunks[d][c[d]]).product()
    }

    /// Largest per-rank point count (product of per-dimension maxima).
    pub fn max_points(&self) -> usize {
        (0..self.ndim())
            .map(|d| *self.chunks[d].iter().max().unwrap())
            .product()
    }

    /// Smallest per-rank point count.
    pub fn min_points(&self) -> usize {
        (0..self.ndim())
            .map(|d| *self.chunks[d].iter().min().unwrap())
            .product()
    }

    /// Ratio of the largest to the smallest per-rank point count (>= 1).
    pub fn max_load_imbalance(&self) -> f64 {
        self.max_points() as f64 / self.min_points() as f64
    }

    /// Ranks sharing a face with `rank` (up to two per dimension).
    pub fn neighbors(&self, rank: usize) -> Vec<usize> {
        let c = self.coords(rank);
        let mut out = Vec::new();
        for d in 0..self.ndim() {
            if c[d] > 0 {
                let mut cc = c.clone();
                cc[d] -= 1;
                out.push(self.rank_of(&cc));
            }
            if c[d] + 1 < self.proc_counts[d] {
                let mut cc = c.clone();
                cc[d] += 1;
                out.push(self.rank_of(&cc));
            }
        }
        out
    }

    /// Points on the faces a rank exchanges with its neighbors (sum of the
    /// face areas toward existing neighbors).
    pub fn surface_points(&self, rank: usize) -> usize {
        let c = self.coords(rank);
        let sizes: Vec<usize> = (0..self.ndim()).map(|d| self.chunks[d][c[d]]).collect();
        let mut surface = 0;
        for d in 0..self.ndim() {
            let face: usize = (0..self.ndim()).filter(|&e| e != d).map(|e| sizes[e]).product();
            if c[d] > 0 {
                surface += face;
            }
            if c[d] + 1 < self.proc_counts[d] {
                surface += face;
            }
        }
        surface
    }
}

/// Names accepted by [`preset_grid`].
pub const GRID_PRESETS: &[&str] = &["mas-corona", "mas-corona-1d"];

/// Built-in grid geometries.
///
/// `mas-corona`: a 3-D solar-corona style mesh. The radial dimension grows
/// geometrically by 6% from a 340 km first cell up to a 500,000 km cap; the
/// latitudinal dimension grows by 3% from 0.55 deg up to 1.76 deg; the
/// longitudinal dimension is uniform at 0.6 deg. `mas-corona-1d` is the
/// radial dimension alone.
pub fn preset_grid(name: &str) -> Result<NonuniformGrid> {
    match name {
        "mas-corona" => {
            let r = NonuniformGrid::geometric_capped(181, 340.0, 1.06, 500_000.0)?;
            let theta = NonuniformGrid::geometric_capped(251, 0.55, 1.03, 1.76)?;
            let phi = NonuniformGrid::uniform(602, 0.6 * 603.0)?;
            NonuniformGrid::product(&[r, theta, phi])
        }
        "mas-corona-1d" => NonuniformGrid::geometric_capped(181, 340.0, 1.06, 500_000.0),
        _ => Err(Error::UnknownPreset {
            name: name.to_string(),
            available: GRID_PRESETS.join(", "),
        }),
    }
}

/// Build a 1-D grid from a `[grid]` config section with keys
/// `n`, `mode` (uniform | geometric | geometric-capped), and the
/// mode-specific keys `length`, `first`, `ratio`, `cap`. A `preset` key
/// delegates to [`preset_grid`].
pub fn grid_from_config(cfg: &Config, section: &str) -> Result<NonuniformGrid> {
    if let Some(name) = cfg.get(section, "preset") {
        return preset_grid(name);
    }
    let n = cfg
        .get_usize(section, "n")?
        .ok_or_else(|| Error::Config(format!("[{section}] needs n (interior points)")))?;
    let mode = cfg.get(section, "mode").unwrap_or("uniform");
    match mode {
        "uniform" => {
            let length = cfg.get_f64(section, "length")?.unwrap_or(1.0);
            NonuniformGrid::uniform(n, length)
        }
        "geometric" => {
            let first = cfg
                .get_f64(section, "first")?
                .ok_or_else(|| Error::Config(format!("[{section}] geometric mode needs first")))?;
            let ratio = cfg
                .get_f64(section, "ratio")?
                .ok_or_else(|| Error::Config(format!("[{section}] geometric mode needs ratio")))?;
            NonuniformGrid::geometric(n, first, ratio)
        }
        "geometric-capped" => {
            let first = cfg
                .get_f64(section, "first")?
                .ok_or_else(|| Error::Config(format!("[{section}] geometric-capped mode needs first")))?;
            let ratio = cfg
                .get_f64(section, "ratio")?
                .ok_or_else(|| Error::Config(format!("[{section}] geometric-capped mode needs ratio")))?;
            let cap = cfg
                .get_f64(section, "cap")?
                .ok_or_else(|| Error::Config(format!("[{section}] geometric-capped mode needs cap")))?;
            NonuniformGrid::geometric_capped(n, first, ratio, cap)
        }
        other => Err(Error::Config(format!("[{section}] unknown grid mode '{other}'"))),
    }
}
