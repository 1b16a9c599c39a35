//! Uniform grids over a square box and cell-mask sets on them.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A square box `[x0, x0 + side] × [y0, y0 + side]` split into `n × n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    pub origin: [f64; 2],
    pub side: f64,
    pub n: usize,
}

impl GridGeometry {
    pub fn new(origin: [f64; 2], side: f64, n: usize) -> Result<Self> {
        let g = GridGeometry { origin, side, n };
        g.validate()?;
        Ok(g)
    }

    /// Unit box `[0, 1]²` with `n` cells per side.
    pub fn unit(n: usize) -> Self {
        GridGeometry { origin: [0.0, 0.0], side: 1.0, n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 cells per side, got {}", self.n)));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::Domain(format!("box side must be positive, got {}", self.side)));
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return Err(Error::Domain("box origin must be finite".into()));
        }
        Ok(())
    }

    /// Cell spacing h.
    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    /// Center of cell `(i, j)`: the sample point of the cell.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [self.origin[0] + (i as f64 + 0.5) * h, self.origin[1] + (j as f64 + 0.5) * h]
    }

    /// Physical position of node `(i, j)`, `0 ≤ i, j ≤ n`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [self.origin[0] + i as f64 * h, self.origin[1] + j as f64 * h]
    }

    /// Cell containing `p`, if `p` lies in the box.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let h = self.h();
        let fx = (p[0] - self.origin[0]) / h;
        let fy = (p[1] - self.origin[1]) / h;
        if fx < 0.0 || fy < 0.0 || fx >= self.n as f64 || fy >= self.n as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Same box refined by `factor` cells per cell.
    pub fn refined(&self, factor: usize) -> Self {
        GridGeometry { origin: self.origin, side: self.side, n: self.n * factor }
    }

    pub fn contains_box(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        let eps = 1e-12 * self.side;
        lo[0] >= self.origin[0] - eps
            && lo[1] >= self.origin[1] - eps
            && hi[0] <= self.origin[0] + self.side + eps
            && hi[1] <= self.origin[1] + self.side + eps
    }
}

/// Open subset of the box represented by the cells whose centers belong to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterSet {
    grid: GridGeometryKey,
    mask: Vec<bool>,
}

// GridGeometry holds floats; compare them bitwise so RasterSet can be Eq.
#[derive(Debug, Clone, Copy)]
struct GridGeometryKey(GridGeometry);

impl PartialEq for GridGeometryKey {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.0, other.0);
        a.n == b.n
            && a.side.to_bits() == b.side.to_bits()
            && a.origin[0].to_bits() == b.origin[0].to_bits()
            && a.origin[1].to_bits() == b.origin[1].to_bits()
    }
}

impl Eq for GridGeometryKey {}

impl RasterSet {
    pub fn from_mask(grid: GridGeometry, mask: Vec<bool>) -> Result<Self> {
        grid.validate()?;
        if mask.len() != grid.cell_count() {
            return Err(Error::Domain(format!(
                "mask has {} cells, grid has {}",
                mask.len(),
                grid.cell_count()
            )));
        }
        Ok(RasterSet { grid: GridGeometryKey(grid), mask })
    }

    pub fn empty(grid: GridGeometry) -> Self {
        RasterSet { grid: GridGeometryKey(grid), mask: vec![false; grid.cell_count()] }
    }

    /// Every cell of the box.
    pub fn full(grid: GridGeometry) -> Self {
        RasterSet { grid: GridGeometryKey(grid), mask: vec![true; grid.cell_count()] }
    }

    pub fn from_fn(grid: GridGeometry, mut inside: impl FnMut([f64; 2]) -> bool) -> Self {
        let mut mask = vec![false; grid.cell_count()];
        for j in 0..grid.n {
            for i in 0..grid.n {
                mask[grid.index(i, j)] = inside(grid.center(i, j));
            }
        }
        RasterSet { grid: GridGeometryKey(grid), mask }
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid.0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.0.index(i, j)]
    }

    /// Membership of a possibly out-of-box lattice position; outside counts as
    /// outside the set.
    #[inline]
    pub fn contains_signed(&self, i: i64, j: i64) -> bool {
        let n = self.grid.0.n as i64;
        i >= 0 && j >= 0 && i < n && j < n && self.mask[(j * n + i) as usize]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    /// Cell count times h².
    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.0.h().powi(2)
    }

    pub fn same_grid(&self, other: &RasterSet) -> bool {
        self.grid == other.grid
    }

    pub(crate) fn require_same_grid(&self, other: &RasterSet) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Domain("raster sets live on different grids".into()))
        }
    }

    /// Complement within the box.
    pub fn complement(&self) -> RasterSet {
        RasterSet { grid: self.grid, mask: self.mask.iter().map(|b| !b).collect() }
    }

    fn zip(&self, other: &RasterSet, f: impl Fn(bool, bool) -> bool) -> Result<RasterSet> {
        self.require_same_grid(other)?;
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| f(a, b)).collect();
        Ok(RasterSet { grid: self.grid, mask })
    }

    pub fn union(&self, other: &RasterSet) -> Result<RasterSet> {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &RasterSet) -> Result<RasterSet> {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &RasterSet) -> Result<RasterSet> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, other: &RasterSet) -> Result<RasterSet> {
        self.zip(other, |a, b| a != b)
    }

    pub fn is_subset_of(&self, other: &RasterSet) -> bool {
        self.same_grid(other) && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    /// True when no cell of the set lies in the outermost ring of the box.
    pub fn respects_margin(&self) -> bool {
        let n = self.grid.0.n;
        (0..n).all(|k| {
            !self.contains(k, 0) && !self.contains(k, n - 1) && !self.contains(0, k) && !self.contains(n - 1, k)
        })
    }

    /// Lattice coordinates of the member cells in index order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let g = self.grid.0;
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(move |(k, _)| g.coords(k))
    }

    /// Discrete boundary: member cells with an 8-neighbour outside the set,
    /// plus non-member cells with an 8-neighbour inside. Symmetric under
    /// complementation.
    pub fn boundary(&self) -> RasterSet {
        let n = self.grid.0.n as i64;
        let mut mask = vec![false; self.mask.len()];
        for j in 0..n {
            for i in 0..n {
                let me = self.contains_signed(i, j);
                'nb: for dj in -1..=1 {
                    for di in -1..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (a, b) = (i + di, j + dj);
                        if a < 0 || b < 0 || a >= n || b >= n {
                            continue;
                        }
                        if self.contains_signed(a, b) != me {
                            mask[(j * n + i) as usize] = true;
                            break 'nb;
                        }
                    }
                }
            }
        }
        RasterSet { grid: self.grid, mask }
    }
}

/// Exact squared lattice distance (in cell units) from every cell center to the
/// nearest member of `sites`; `None` when there are no sites.
///
/// Separable lower-envelope transform in integer arithmetic, so results match
/// a brute-force search bit for bit.
pub fn squared_distance_field(grid: &GridGeometry, sites: &[bool]) -> Option<Vec<i64>> {
    if !sites.iter().any(|&b| b) {
        return None;
    }
    let n = grid.n;
    const INF: i64 = i64::MAX / 4;
    // pass 1: columns
    let mut col = vec![INF; n * n];
    let mut f = vec![0i64; n];
    let mut out = vec![0i64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    for i in 0..n {
        for j in 0..n {
            f[j] = if sites[j * n + i] { 0 } else { INF };
        }
        lower_envelope(&f, &mut out, &mut v, &mut z);
        for j in 0..n {
            col[j * n + i] = out[j];
        }
    }
    // pass 2: rows
    let mut dist = vec![0i64; n * n];
    for j in 0..n {
        f.copy_from_slice(&col[j * n..(j + 1) * n]);
        lower_envelope(&f, &mut out, &mut v, &mut z);
        dist[j * n..(j + 1) * n].copy_from_slice(&out);
    }
    Some(dist)
}

// One-dimensional squared distance transform of a sampled function.
fn lower_envelope(f: &[i64], out: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    const INF: i64 = i64::MAX / 4;
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if f[q] >= INF {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64 / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out.iter_mut().for_each(|o| *o = INF);
        return;
    }
    let mut kk = 0usize;
    for q in 0..n {
        while z[kk + 1] < q as f64 {
            kk += 1;
        }
        let p = v[kk];
        let d = q as i64 - p as i64;
        out[q] = d * d + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_field(grid: &GridGeometry, sites: &[bool]) -> Vec<i64> {
        let n = grid.n as i64;
        let pts: Vec<(i64, i64)> =
            (0..sites.len()).filter(|&k| sites[k]).map(|k| (k as i64 % n, k as i64 / n)).collect();
        (0..sites.len())
            .map(|k| {
                let (i, j) = (k as i64 % n, k as i64 / n);
                pts.iter().map(|&(a, b)| (a - i).pow(2) + (b - j).pow(2)).min().unwrap()
            })
            .collect()
    }

    #[test]
    fn distance_field_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 7, 16, 23] {
            let grid = GridGeometry::unit(n);
            for density in [0.01, 0.1, 0.5] {
                let mut sites: Vec<bool> = (0..n * n).map(|_| rng.gen_bool(density)).collect();
                sites[rng.gen_range(0..n * n)] = true;
                assert_eq!(squared_distance_field(&grid, &sites).unwrap(), brute_field(&grid, &sites));
            }
        }
        assert!(squared_distance_field(&GridGeometry::unit(4), &[false; 16]).is_none());
    }

    #[test]
    fn boundary_is_complement_symmetric() {
        let grid = GridGeometry::unit(16);
        let x = RasterSet::from_fn(grid, |p| (p[0] - 0.5).hypot(p[1] - 0.4) < 0.3);
        assert_eq!(x.boundary(), x.complement().boundary());
        assert!(x.boundary().count() > 0);
    }

    #[test]
    fn margin_detection() {
        let grid = GridGeometry::unit(8);
        assert!(!RasterSet::full(grid).respects_margin());
        let inner = RasterSet::from_fn(grid, |p| p[0] > 0.2 && p[0] < 0.8 && p[1] > 0.2 && p[1] < 0.8);
        assert!(inner.respects_margin());
    }

    #[test]
    fn mask_length_is_checked() {
        assert!(RasterSet::from_mask(GridGeometry::unit(4), vec![true; 15]).is_err());
    }
}
