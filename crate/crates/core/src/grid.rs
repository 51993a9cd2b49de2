//! Grids, stencils, boundary policies and the stencil sweep.
//!
//! A sweep updates every cell to a weighted sum of its neighbors plus an
//! optional constant term:
//!
//! ```text
//! out[x,y] = C[x,y] + sum over (di,dj,w) of w * in[x+di, y+dj]
//! ```
//!
//! Out-of-range neighbor reads are resolved by a [`BoundaryCondition`].
//! Updates are Jacobi-style: all reads come from the input grid, all writes
//! go to a fresh output grid. The per-cell accumulation order is fixed
//! (constant term first, then stencil points in list order, then vertical
//! neighbors below/above), so outputs are bit-reproducible and independent
//! of the parallelism degree.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::Parallelism;

/// One stencil point: integer offsets and a weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilPoint {
    pub di: i32,
    pub dj: i32,
    pub w: f64,
}

impl StencilPoint {
    pub fn new(di: i32, dj: i32, w: f64) -> Self {
        StencilPoint { di, dj, w }
    }
}

/// An ordered set of stencil points.
///
/// The evaluation order of the points is the list order; floating-point
/// summation is order-sensitive, so reordering points changes results at
/// the round-off level.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    points: Vec<StencilPoint>,
    name: String,
}

impl Stencil {
    pub fn new(name: impl Into<String>, points: Vec<StencilPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParams("stencil needs at least one point".into()));
        }
        for (n, p) in points.iter().enumerate() {
            for q in &points[..n] {
                if p.di == q.di && p.dj == q.dj {
                    return Err(Error::InvalidParams(format!(
                        "duplicate stencil offset ({}, {})",
                        p.di, p.dj
                    )));
                }
            }
        }
        Ok(Stencil { points, name: name.into() })
    }

    /// The single-point stencil that copies its input.
    pub fn identity() -> Self {
        Stencil {
            points: vec![StencilPoint::new(0, 0, 1.0)],
            name: "identity".into(),
        }
    }

    pub fn points(&self) -> &[StencilPoint] {
        &self.points
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of stencil points (the `k` of the cost bounds).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of all weights; 1.0 marks a convex-combination (fixed-point)
    /// kernel.
    pub fn weight_sum(&self) -> f64 {
        self.points.iter().map(|p| p.w).sum()
    }

    /// Distinct nonzero x-offsets, ascending.
    pub fn x_offsets(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self.points.iter().map(|p| p.di).filter(|&d| d != 0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct nonzero y-offsets, ascending.
    pub fn y_offsets(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self.points.iter().map(|p| p.dj).filter(|&d| d != 0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub(crate) fn weights_as<T: Element>(&self) -> Vec<(i32, i32, T)> {
        self.points
            .iter()
            .map(|p| (p.di, p.dj, T::from_f64(p.w)))
            .collect()
    }
}

/// Policy for resolving out-of-range neighbor reads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition<T> {
    /// Out-of-range indices clamp to the nearest in-domain index.
    BounceBack,
    /// Indices wrap modulo the dimension extent.
    Periodic,
    /// Out-of-range reads return a fixed value.
    ConstantGhost(T),
    /// Out-of-range reads return zero.
    ZeroGhost,
}

/// Result of resolving one index against one dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GhostResolution<T> {
    InDomain(usize),
    GhostValue(T),
}

/// Resolves `index` against a dimension of `extent` cells. Total function:
/// every index maps to either an in-domain index or a ghost value.
#[inline]
pub fn resolve<T: Element>(index: isize, extent: usize, bc: BoundaryCondition<T>) -> GhostResolution<T> {
    debug_assert!(extent >= 1);
    if (0..extent as isize).contains(&index) {
        return GhostResolution::InDomain(index as usize);
    }
    match bc {
        BoundaryCondition::BounceBack => {
            GhostResolution::InDomain(index.clamp(0, extent as isize - 1) as usize)
        }
        BoundaryCondition::Periodic => {
            GhostResolution::InDomain(index.rem_euclid(extent as isize) as usize)
        }
        BoundaryCondition::ConstantGhost(v) => GhostResolution::GhostValue(v),
        BoundaryCondition::ZeroGhost => GhostResolution::GhostValue(T::zero()),
    }
}

/// Dense 2D grid, row-major: `data[y * nx + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D<T> {
    nx: usize,
    ny: usize,
    data: Vec<T>,
    iteration: u64,
}

impl<T: Element> Grid2D<T> {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self::uniform(nx, ny, T::zero())
    }

    pub fn uniform(nx: usize, ny: usize, v: T) -> Self {
        assert!(nx >= 1 && ny >= 1, "grid dimensions must be at least 1x1");
        Grid2D { nx, ny, data: vec![v; nx * ny], iteration: 0 }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(Error::LengthMismatch { left: nx * ny, right: data.len() });
        }
        Ok(Grid2D { nx, ny, data, iteration: 0 })
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                data.push(f(x, y));
            }
        }
        Grid2D { nx, ny, data, iteration: 0 }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny);
        y * self.nx + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.nx..(y + 1) * self.nx]
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn set_iteration(&mut self, t: u64) {
        self.iteration = t;
    }

    /// Sum of all cells, accumulated in f64.
    pub fn total_f64(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum()
    }
}

/// The constant term `C` of the sweep, with cached column sums `c_x` and
/// row sums `c_y` used by checksum interpolation.
///
/// The field is immutable after construction, so the cached sums cannot go
/// stale.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantField<T> {
    nx: usize,
    ny: usize,
    cells: Option<Vec<T>>,
    uniform: T,
    col_sums: Vec<T>,
    row_sums: Vec<T>,
}

impl<T: Element> ConstantField<T> {
    pub fn zero(nx: usize, ny: usize) -> Self {
        Self::uniform(T::zero(), nx, ny)
    }

    pub fn uniform(c: T, nx: usize, ny: usize) -> Self {
        let col_sums = vec![c * T::from_f64(ny as f64); nx];
        let row_sums = vec![c * T::from_f64(nx as f64); ny];
        ConstantField { nx, ny, cells: None, uniform: c, col_sums, row_sums }
    }

    pub fn per_cell(nx: usize, ny: usize, cells: Vec<T>) -> Result<Self> {
        if cells.len() != nx * ny {
            return Err(Error::LengthMismatch { left: nx * ny, right: cells.len() });
        }
        let mut col_sums = vec![T::zero(); nx];
        let mut row_sums = vec![T::zero(); ny];
        for y in 0..ny {
            let row = &cells[y * nx..(y + 1) * nx];
            let mut acc = T::zero();
            for (x, &v) in row.iter().enumerate() {
                col_sums[x] = col_sums[x] + v;
                acc = acc + v;
            }
            row_sums[y] = acc;
        }
        Ok(ConstantField { nx, ny, cells: Some(cells), uniform: T::zero(), col_sums, row_sums })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn value_at(&self, x: usize, y: usize) -> T {
        match &self.cells {
            Some(cells) => cells[y * self.nx + x],
            None => self.uniform,
        }
    }

    /// `c_x[x] = sum over y of C[x,y]`, length `nx`.
    pub fn col_sums(&self) -> &[T] {
        &self.col_sums
    }

    /// `c_y[y] = sum over x of C[x,y]`, length `ny`.
    pub fn row_sums(&self) -> &[T] {
        &self.row_sums
    }

    fn matches(&self, nx: usize, ny: usize) -> Result<()> {
        if self.nx != nx || self.ny != ny {
            return Err(Error::DimensionMismatch {
                expected: (nx, ny),
                found: (self.nx, self.ny),
            });
        }
        Ok(())
    }

    #[inline]
    fn fill_row(&self, y: usize, out: &mut [T]) {
        match &self.cells {
            Some(cells) => out.copy_from_slice(&cells[y * self.nx..(y + 1) * self.nx]),
            None => out.fill(self.uniform),
        }
    }
}

/// A 3D tile: a stack of 2D layers sharing dimensions and iteration number.
///
/// Layers are protected independently (each keeps its own 2D checksums);
/// vertical coupling enters each layer's update as two extra stencil points
/// read from the adjacent layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Tile3D<T> {
    layers: Vec<Grid2D<T>>,
}

impl<T: Element> Tile3D<T> {
    pub fn from_layers(layers: Vec<Grid2D<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParams("tile needs at least one layer".into()));
        }
        let (nx, ny, t) = (layers[0].nx(), layers[0].ny(), layers[0].iteration());
        for l in &layers {
            if l.nx() != nx || l.ny() != ny {
                return Err(Error::DimensionMismatch {
                    expected: (nx, ny),
                    found: (l.nx(), l.ny()),
                });
            }
            if l.iteration() != t {
                return Err(Error::InvalidParams("layers disagree on iteration".into()));
            }
        }
        Ok(Tile3D { layers })
    }

    pub fn uniform(nx: usize, ny: usize, nz: usize, v: T) -> Self {
        assert!(nz >= 1);
        Tile3D { layers: vec![Grid2D::uniform(nx, ny, v); nz] }
    }

    pub fn from_fn(nx: usize, ny: usize, nz: usize, f: impl Fn(usize, usize, usize) -> T) -> Self {
        assert!(nz >= 1);
        let layers = (0..nz)
            .map(|z| Grid2D::from_fn(nx, ny, |x, y| f(x, y, z)))
            .collect();
        Tile3D { layers }
    }

    pub fn nx(&self) -> usize {
        self.layers[0].nx()
    }

    pub fn ny(&self) -> usize {
        self.layers[0].ny()
    }

    pub fn nz(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, z: usize) -> &Grid2D<T> {
        &self.layers[z]
    }

    pub fn layers(&self) -> &[Grid2D<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Grid2D<T>] {
        &mut self.layers
    }

    pub fn iteration(&self) -> u64 {
        self.layers[0].iteration()
    }

    pub fn set_iteration(&mut self, t: u64) {
        for l in &mut self.layers {
            l.set_iteration(t);
        }
    }

    /// All cell values, layer-major then row-major.
    pub fn cells(&self) -> impl Iterator<Item = T> + '_ {
        self.layers.iter().flat_map(|l| l.data().iter().copied())
    }
}

/// A bit flip applied to one freshly computed cell of one layer, after the
/// update and before the checksum accumulation reads the stored value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellFault {
    pub x: usize,
    pub y: usize,
    pub bit: u32,
}

/// Vertical-neighbor source for one layer sweep.
#[derive(Clone, Copy)]
pub(crate) enum VerticalSlice<'a, T> {
    Layer(&'a [T]),
    Ghost(T),
}

#[inline]
fn flip_raw<T: Element>(v: T, bit: u32) -> T {
    T::from_bits_u64(v.to_bits_u64() ^ (1u64 << bit))
}

/// Adds `w * src[x + shift]` to every `dst[x]`, resolving out-of-range
/// source indices with `bc`. The interior span is a contiguous slice
/// operation; only up to `|shift|` cells per border take the resolve path.
#[inline]
fn add_shifted_row<T: Element>(dst: &mut [T], src: &[T], shift: i32, w: T, bc: BoundaryCondition<T>) {
    let nx = dst.len();
    let s = shift as isize;
    let lo = (-s).clamp(0, nx as isize) as usize;
    let hi = (nx as isize - s).clamp(lo as isize, nx as isize) as usize;
    for x in 0..lo {
        match resolve(x as isize + s, nx, bc) {
            GhostResolution::InDomain(xi) => dst[x] = dst[x] + w * src[xi],
            GhostResolution::GhostValue(g) => dst[x] = dst[x] + w * g,
        }
    }
    if hi > lo {
        let src_span = &src[(lo as isize + s) as usize..(hi as isize + s) as usize];
        for (d, &v) in dst[lo..hi].iter_mut().zip(src_span) {
            *d = *d + w * v;
        }
    }
    for x in hi..nx {
        match resolve(x as isize + s, nx, bc) {
            GhostResolution::InDomain(xi) => dst[x] = dst[x] + w * src[xi],
            GhostResolution::GhostValue(g) => dst[x] = dst[x] + w * g,
        }
    }
}

#[inline]
fn add_uniform<T: Element>(dst: &mut [T], v: T) {
    for d in dst.iter_mut() {
        *d = *d + v;
    }
}

/// Strict left-to-right sum of each row, four rows at a time so the four
/// dependency chains pipeline. Per-row accumulation order is x-ascending.
pub(crate) fn row_sums_strict<T: Element>(data: &[T], nx: usize, ny: usize, out: &mut [T]) {
    debug_assert_eq!(data.len(), nx * ny);
    debug_assert_eq!(out.len(), ny);
    let mut y = 0;
    while y + 4 <= ny {
        let r0 = &data[y * nx..(y + 1) * nx];
        let r1 = &data[(y + 1) * nx..(y + 2) * nx];
        let r2 = &data[(y + 2) * nx..(y + 3) * nx];
        let r3 = &data[(y + 3) * nx..(y + 4) * nx];
        let (mut s0, mut s1, mut s2, mut s3) = (T::zero(), T::zero(), T::zero(), T::zero());
        for x in 0..nx {
            s0 = s0 + r0[x];
            s1 = s1 + r1[x];
            s2 = s2 + r2[x];
            s3 = s3 + r3[x];
        }
        out[y] = s0;
        out[y + 1] = s1;
        out[y + 2] = s2;
        out[y + 3] = s3;
        y += 4;
    }
    while y < ny {
        let row = &data[y * nx..(y + 1) * nx];
        let mut acc = T::zero();
        for &v in row {
            acc = acc + v;
        }
        out[y] = acc;
        y += 1;
    }
}

/// Strict top-to-bottom sum of each column (y-ascending per column).
pub(crate) fn col_sums_strict<T: Element>(data: &[T], nx: usize, ny: usize, out: &mut [T]) {
    debug_assert_eq!(data.len(), nx * ny);
    debug_assert_eq!(out.len(), nx);
    out.fill(T::zero());
    for y in 0..ny {
        let row = &data[y * nx..(y + 1) * nx];
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
}

/// Core layer sweep. Computes one output layer from iteration-t inputs,
/// optionally injecting a single-cell bit flip and accumulating the column
/// checksum vector `b` (one bin per row, strict x-ascending order, reading
/// the stored — possibly corrupted — values).
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_layer_into<T: Element>(
    src: &[T],
    nx: usize,
    ny: usize,
    points: &[(i32, i32, T)],
    constant: &ConstantField<T>,
    bc: BoundaryCondition<T>,
    vertical: &[(VerticalSlice<'_, T>, T)],
    fault: Option<CellFault>,
    dst: &mut [T],
    mut b_out: Option<&mut [T]>,
) {
    debug_assert_eq!(src.len(), nx * ny);
    debug_assert_eq!(dst.len(), nx * ny);
    const ROW_CHUNK: usize = 4;
    let mut y0 = 0;
    while y0 < ny {
        let y1 = (y0 + ROW_CHUNK).min(ny);
        for y in y0..y1 {
            let row = &mut dst[y * nx..(y + 1) * nx];
            constant.fill_row(y, row);
            for &(di, dj, w) in points {
                match resolve(y as isize + dj as isize, ny, bc) {
                    GhostResolution::InDomain(ry) => {
                        add_shifted_row(row, &src[ry * nx..(ry + 1) * nx], di, w, bc);
                    }
                    GhostResolution::GhostValue(g) => add_uniform(row, w * g),
                }
            }
            for &(vsrc, w) in vertical {
                match vsrc {
                    VerticalSlice::Layer(l) => {
                        add_shifted_row(row, &l[y * nx..(y + 1) * nx], 0, w, bc)
                    }
                    VerticalSlice::Ghost(g) => add_uniform(row, w * g),
                }
            }
            if let Some(f) = fault {
                if f.y == y {
                    row[f.x] = flip_raw(row[f.x], f.bit);
                }
            }
        }
        if let Some(b) = b_out.as_deref_mut() {
            row_sums_strict(&dst[y0 * nx..y1 * nx], nx, y1 - y0, &mut b[y0..y1]);
        }
        y0 = y1;
    }
}

/// One stencil sweep of a 2D grid (Jacobi update). The input grid is
/// unchanged; the output carries `iteration + 1`.
pub fn sweep<T: Element>(
    grid: &Grid2D<T>,
    stencil: &Stencil,
    constant: &ConstantField<T>,
    bc: BoundaryCondition<T>,
) -> Result<Grid2D<T>> {
    constant.matches(grid.nx(), grid.ny())?;
    let mut out = Grid2D::zeros(grid.nx(), grid.ny());
    let points = stencil.weights_as::<T>();
    sweep_layer_into(
        grid.data(),
        grid.nx(),
        grid.ny(),
        &points,
        constant,
        bc,
        &[],
        None,
        out.data_mut(),
        None,
    );
    out.set_iteration(grid.iteration() + 1);
    Ok(out)
}

/// Builds the vertical-neighbor sources for layer `z` of an `nz`-layer tile,
/// resolving the tile's top/bottom boundary with the kernel's own policy.
/// A zero vertical weight means "no vertical point" and contributes nothing.
pub(crate) fn vertical_sources<'a, T: Element>(
    layers: &'a [Grid2D<T>],
    z: usize,
    kernel: &KernelSpec<T>,
) -> Vec<(VerticalSlice<'a, T>, T)> {
    let nz = layers.len();
    let mut out = Vec::with_capacity(2);
    for (dz, w) in [(-1isize, kernel.w_below), (1isize, kernel.w_above)] {
        if w == 0.0 {
            continue;
        }
        let entry = match resolve(z as isize + dz, nz, kernel.bc) {
            GhostResolution::InDomain(zi) => VerticalSlice::Layer(layers[zi].data()),
            GhostResolution::GhostValue(g) => VerticalSlice::Ghost(g),
        };
        out.push((entry, T::from_f64(w)));
    }
    out
}

/// Sweeps every layer of a tile with the kernel's in-layer stencil plus its
/// vertical couplings. `constants` holds one constant field per layer.
pub fn sweep_tile<T: Element>(
    tile: &Tile3D<T>,
    kernel: &KernelSpec<T>,
    constants: &[ConstantField<T>],
) -> Result<Tile3D<T>> {
    let mut out = tile.clone();
    sweep_tile_into(tile, kernel, constants, &[], &Parallelism::Sequential, &mut out, None)?;
    Ok(out)
}

/// Double-buffered tile sweep. `faults[z]` optionally injects one bit flip
/// into layer `z`; `b_out[z]`, when present, receives layer `z`'s column
/// checksum vector.
pub(crate) fn sweep_tile_into<T: Element>(
    src: &Tile3D<T>,
    kernel: &KernelSpec<T>,
    constants: &[ConstantField<T>],
    faults: &[Option<CellFault>],
    par: &Parallelism,
    dst: &mut Tile3D<T>,
    b_out: Option<&mut [Vec<T>]>,
) -> Result<()> {
    let (nx, ny, nz) = (src.nx(), src.ny(), src.nz());
    if dst.nx() != nx || dst.ny() != ny || dst.nz() != nz {
        return Err(Error::DimensionMismatch { expected: (nx, ny), found: (dst.nx(), dst.ny()) });
    }
    if constants.len() != nz {
        return Err(Error::LengthMismatch { left: nz, right: constants.len() });
    }
    for c in constants {
        c.matches(nx, ny)?;
    }
    let points = kernel.stencil.weights_as::<T>();
    let next_t = src.iteration() + 1;

    // Per-layer checksum bins, threaded through as owned slots so layers can
    // proceed in parallel.
    let mut slots: Vec<(usize, &mut Grid2D<T>, Option<&mut Vec<T>>)> = match b_out {
        Some(bins) => dst
            .layers_mut()
            .iter_mut()
            .zip(bins.iter_mut())
            .enumerate()
            .map(|(z, (l, b))| (z, l, Some(b)))
            .collect(),
        None => dst
            .layers_mut()
            .iter_mut()
            .enumerate()
            .map(|(z, l)| (z, l, None))
            .collect(),
    };

    par.map_mut(&mut slots, |_, (z, layer, bins)| {
        let z = *z;
        let vertical = vertical_sources(src.layers(), z, kernel);
        let fault = faults.get(z).copied().flatten();
        let b = bins.as_deref_mut().map(|v| {
            v.resize(ny, T::zero());
            &mut v[..]
        });
        sweep_layer_into(
            src.layer(z).data(),
            nx,
            ny,
            &points,
            &constants[z],
            kernel.bc,
            &vertical,
            fault,
            layer.data_mut(),
            b,
        );
        layer.set_iteration(next_t);
    });
    Ok(())
}
