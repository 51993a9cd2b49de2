//! Brute-force oracles and generators shared by the integration tests.
//!
//! The oracles evaluate the update rule cell by cell with scalar loops and
//! their own boundary resolution, independent of the library's kernels.
//! They accumulate in the same fixed order (constant term, stencil points
//! in list order, vertical below then above) so comparisons can be bitwise.

#![allow(dead_code)]

use stencilguard::grid::{BoundaryCondition, ConstantField, Grid2D, Stencil, Tile3D};
use stencilguard::kernels::KernelSpec;
use stencilguard::rng::SplitMix64;
use stencilguard::Element;

/// Scalar boundary resolution, reimplemented here so the oracle does not
/// share code with the library.
fn oracle_read<T: Element>(grid: &Grid2D<T>, x: isize, y: isize, bc: BoundaryCondition<T>) -> T {
    let nx = grid.nx() as isize;
    let ny = grid.ny() as isize;
    let in_x = (0..nx).contains(&x);
    let in_y = (0..ny).contains(&y);
    if in_x && in_y {
        return grid.get(x as usize, y as usize);
    }
    match bc {
        BoundaryCondition::BounceBack => {
            let cx = x.max(0).min(nx - 1);
            let cy = y.max(0).min(ny - 1);
            grid.get(cx as usize, cy as usize)
        }
        BoundaryCondition::Periodic => {
            let wx = ((x % nx) + nx) % nx;
            let wy = ((y % ny) + ny) % ny;
            grid.get(wx as usize, wy as usize)
        }
        BoundaryCondition::ConstantGhost(v) => v,
        BoundaryCondition::ZeroGhost => T::zero(),
    }
}

/// Cell-by-cell evaluation of the 2D update rule.
pub fn naive_sweep<T: Element>(
    grid: &Grid2D<T>,
    stencil: &Stencil,
    constant: &ConstantField<T>,
    bc: BoundaryCondition<T>,
) -> Grid2D<T> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Grid2D::zeros(nx, ny);
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = constant.value_at(x, y);
            for p in stencil.points() {
                let w = T::from_f64(p.w);
                let v = oracle_read(grid, x as isize + p.di as isize, y as isize + p.dj as isize, bc);
                acc = acc + w * v;
            }
            out.set(x, y, acc);
        }
    }
    out.set_iteration(grid.iteration() + 1);
    out
}

/// Cell-by-cell evaluation of the layered 3D update: in-layer stencil plus
/// vertical neighbors below then above, resolved by the kernel's policy.
pub fn naive_tile_sweep<T: Element>(
    tile: &Tile3D<T>,
    kernel: &KernelSpec<T>,
    constants: &[ConstantField<T>],
) -> Tile3D<T> {
    let (nx, ny, nz) = (tile.nx(), tile.ny(), tile.nz());
    let mut layers = Vec::with_capacity(nz);
    for z in 0..nz {
        let mut out = Grid2D::zeros(nx, ny);
        for y in 0..ny {
            for x in 0..nx {
                let mut acc = constants[z].value_at(x, y);
                for p in kernel.stencil.points() {
                    let w = T::from_f64(p.w);
                    let v = oracle_read(
                        tile.layer(z),
                        x as isize + p.di as isize,
                        y as isize + p.dj as isize,
                        kernel.bc,
                    );
                    acc = acc + w * v;
                }
                for (dz, w) in [(-1isize, kernel.w_below), (1isize, kernel.w_above)] {
                    if w == 0.0 {
                        continue;
                    }
                    let zi = z as isize + dz;
                    let v = if (0..nz as isize).contains(&zi) {
                        tile.layer(zi as usize).get(x, y)
                    } else {
                        match kernel.bc {
                            BoundaryCondition::BounceBack => {
                                tile.layer(zi.max(0).min(nz as isize - 1) as usize).get(x, y)
                            }
                            BoundaryCondition::Periodic => {
                                tile.layer((((zi % nz as isize) + nz as isize) % nz as isize) as usize)
                                    .get(x, y)
                            }
                            BoundaryCondition::ConstantGhost(g) => g,
                            BoundaryCondition::ZeroGhost => T::zero(),
                        }
                    };
                    acc = acc + T::from_f64(w) * v;
                }
                out.set(x, y, acc);
            }
        }
        out.set_iteration(tile.iteration() + 1);
        layers.push(out);
    }
    Tile3D::from_layers(layers).unwrap()
}

/// Double-loop checksums in the pinned orders: `a[x]` sums y-ascending,
/// `b[y]` sums x-ascending.
pub fn naive_checksums<T: Element>(grid: &Grid2D<T>) -> (Vec<T>, Vec<T>) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut a = vec![T::zero(); nx];
    let mut b = vec![T::zero(); ny];
    for x in 0..nx {
        for y in 0..ny {
            a[x] = a[x] + grid.get(x, y);
        }
    }
    for y in 0..ny {
        for x in 0..nx {
            b[y] = b[y] + grid.get(x, y);
        }
    }
    (a, b)
}

pub fn random_grid<T: Element>(rng: &mut SplitMix64, nx: usize, ny: usize) -> Grid2D<T> {
    let mut g = Grid2D::zeros(nx, ny);
    for y in 0..ny {
        for x in 0..nx {
            g.set(x, y, T::from_f64(rng.next_f64() * 2.0 - 1.0));
        }
    }
    g
}

/// Random grid with values in [0.5, 1.5), the magnitude profile of the
/// thermal runs.
pub fn random_positive_grid<T: Element>(rng: &mut SplitMix64, nx: usize, ny: usize) -> Grid2D<T> {
    let mut g = Grid2D::zeros(nx, ny);
    for y in 0..ny {
        for x in 0..nx {
            g.set(x, y, T::from_f64(rng.next_f64() + 0.5));
        }
    }
    g
}

/// Random stencil with up to `max_points` distinct offsets within
/// `±max_offset` and weights in [-0.6, 0.6).
pub fn random_stencil(rng: &mut SplitMix64, max_points: usize, max_offset: i32) -> Stencil {
    let k = 1 + rng.next_below(max_points as u64) as usize;
    let span = (2 * max_offset + 1) as u64;
    let mut points: Vec<(i32, i32)> = Vec::new();
    while points.len() < k {
        let di = rng.next_below(span) as i32 - max_offset;
        let dj = rng.next_below(span) as i32 - max_offset;
        if !points.contains(&(di, dj)) {
            points.push((di, dj));
        }
    }
    let points = points
        .into_iter()
        .map(|(di, dj)| {
            stencilguard::grid::StencilPoint::new(di, dj, rng.next_f64() * 1.2 - 0.6)
        })
        .collect();
    Stencil::new("random", points).unwrap()
}

/// One of the four boundary policies, chosen by `pick`.
pub fn bc_variant<T: Element>(pick: u64) -> BoundaryCondition<T> {
    match pick % 4 {
        0 => BoundaryCondition::BounceBack,
        1 => BoundaryCondition::Periodic,
        2 => BoundaryCondition::ZeroGhost,
        _ => BoundaryCondition::ConstantGhost(T::from_f64(0.75)),
    }
}

pub fn assert_grid_bits_eq<T: Element>(left: &Grid2D<T>, right: &Grid2D<T>, context: &str) {
    assert_eq!(left.nx(), right.nx(), "{context}: nx differs");
    assert_eq!(left.ny(), right.ny(), "{context}: ny differs");
    for (i, (l, r)) in left.data().iter().zip(right.data()).enumerate() {
        assert_eq!(
            l.to_bits_u64(),
            r.to_bits_u64(),
            "{context}: cell {i} differs: {l:?} vs {r:?}"
        );
    }
}

pub fn assert_slice_bits_eq<T: Element>(left: &[T], right: &[T], context: &str) {
    assert_eq!(left.len(), right.len(), "{context}: length differs");
    for (i, (l, r)) in left.iter().zip(right).enumerate() {
        assert_eq!(
            l.to_bits_u64(),
            r.to_bits_u64(),
            "{context}: entry {i} differs: {l:?} vs {r:?}"
        );
    }
}

pub fn assert_tile_bits_eq<T: Element>(left: &Tile3D<T>, right: &Tile3D<T>, context: &str) {
    assert_eq!(left.nz(), right.nz(), "{context}: nz differs");
    for z in 0..left.nz() {
        assert_grid_bits_eq(left.layer(z), right.layer(z), &format!("{context} (layer {z})"));
    }
}

/// Largest relative gap between paired entries, with the same near-zero
/// fallback the detector uses.
pub fn max_rel_gap<T: Element>(direct: &[T], interp: &[T]) -> f64 {
    direct
        .iter()
        .zip(interp)
        .map(|(&d, &p)| {
            let d = d.as_f64();
            let p = p.as_f64();
            if d.abs() < 1e-20 {
                (p - d).abs()
            } else {
                (p / d - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}
