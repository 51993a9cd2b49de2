//! Direct checksum computation and the fused sweep-plus-checksum kernel.
//!
//! The row checksum `a` has one entry per column of cells (`a[x]` sums over
//! y, ascending) and the column checksum `b` has one entry per row (`b[y]`
//! sums over x, ascending). Summation orders are fixed so that independent
//! computations of the same checksum agree bitwise.
//!
//! Only `b` is accumulated during the fused sweep — one extra addition per
//! cell. Detection needs just one checksum vector; `a` is computed lazily
//! when an error has actually been flagged and a location is needed.

use crate::element::Element;
use crate::error::Result;
use crate::grid::{
    col_sums_strict, row_sums_strict, sweep_layer_into, BoundaryCondition, ConstantField, Grid2D,
    Stencil,
};

/// Which checksum vectors are populated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    BOnly,
    Both,
}

/// Row and column checksum vectors of one layer at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChecksumPair<T> {
    a: Option<Vec<T>>,
    b: Vec<T>,
    iteration: u64,
}

impl<T: Element> ChecksumPair<T> {
    pub fn new(a: Option<Vec<T>>, b: Vec<T>, iteration: u64) -> Self {
        ChecksumPair { a, b, iteration }
    }

    pub fn from_b(b: Vec<T>, iteration: u64) -> Self {
        ChecksumPair { a: None, b, iteration }
    }

    pub fn which(&self) -> Which {
        if self.a.is_some() {
            Which::Both
        } else {
            Which::BOnly
        }
    }

    /// Row checksum `a` (length `nx`), if populated.
    pub fn a(&self) -> Option<&[T]> {
        self.a.as_deref()
    }

    /// Column checksum `b` (length `ny`).
    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Mutable access for diagnostics and checksum-corruption experiments.
    pub fn b_mut(&mut self) -> &mut [T] {
        &mut self.b
    }
}

/// Computes checksums directly from grid data in the fixed summation order.
pub fn compute_checksums<T: Element>(grid: &Grid2D<T>, which: Which) -> ChecksumPair<T> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut b = vec![T::zero(); ny];
    row_sums_strict(grid.data(), nx, ny, &mut b);
    let a = match which {
        Which::BOnly => None,
        Which::Both => {
            let mut a = vec![T::zero(); nx];
            col_sums_strict(grid.data(), nx, ny, &mut a);
            Some(a)
        }
    };
    ChecksumPair { a, b, iteration: grid.iteration() }
}

/// Stencil sweep fused with column-checksum accumulation.
///
/// The grid result is bitwise identical to [`crate::grid::sweep`] on the
/// same inputs: the checksum is accumulated from the stored output values
/// and never participates in the update arithmetic. `b[y]` receives each
/// output cell of row `y` exactly once, in x-ascending order.
pub fn sweep_with_checksum<T: Element>(
    grid: &Grid2D<T>,
    stencil: &Stencil,
    constant: &ConstantField<T>,
    bc: BoundaryCondition<T>,
) -> Result<(Grid2D<T>, Vec<T>)> {
    // Mirror the dimension check in `sweep` before touching buffers.
    if constant.nx() != grid.nx() || constant.ny() != grid.ny() {
        return Err(crate::error::Error::DimensionMismatch {
            expected: (grid.nx(), grid.ny()),
            found: (constant.nx(), constant.ny()),
        });
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Grid2D::zeros(nx, ny);
    let mut b = vec![T::zero(); ny];
    let points = stencil.weights_as::<T>();
    sweep_layer_into(
        grid.data(),
        nx,
        ny,
        &points,
        constant,
        bc,
        &[],
        None,
        out.data_mut(),
        Some(&mut b),
    );
    out.set_iteration(grid.iteration() + 1);
    Ok((out, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sweep, Stencil};

    #[test]
    fn zero_grid_zero_checksums() {
        let grid = Grid2D::<f32>::zeros(5, 5);
        let cs = compute_checksums(&grid, Which::Both);
        assert!(cs.a().unwrap().iter().all(|&v| v == 0.0));
        assert!(cs.b().iter().all(|&v| v == 0.0));
        assert_eq!(cs.which(), Which::Both);
    }

    #[test]
    fn two_by_two_hand_sums() {
        // Row-major [[1,2],[3,4]]: rows are y, so u(0,0)=1, u(1,0)=2,
        // u(0,1)=3, u(1,1)=4.
        let grid = Grid2D::<f32>::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cs = compute_checksums(&grid, Which::Both);
        assert_eq!(cs.a().unwrap(), &[4.0, 6.0]);
        assert_eq!(cs.b(), &[3.0, 7.0]);
    }

    #[test]
    fn identity_sweep_checksum_matches_input_checksum() {
        let grid = Grid2D::<f32>::from_fn(9, 7, |x, y| (x as f32 - 2.0) * 0.5 + y as f32 * 0.25);
        let c = ConstantField::zero(9, 7);
        let (out, b) = sweep_with_checksum(&grid, &Stencil::identity(), &c, BoundaryCondition::BounceBack)
            .unwrap();
        assert_eq!(out.data(), grid.data());
        let direct = compute_checksums(&grid, Which::BOnly);
        let bits: Vec<u32> = b.iter().map(|v| v.to_bits()).collect();
        let bits2: Vec<u32> = direct.b().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, bits2);
    }

    #[test]
    fn fused_grid_bitwise_equals_plain_sweep() {
        let grid = Grid2D::<f32>::from_fn(11, 6, |x, y| ((x * 31 + y * 17) % 23) as f32 * 0.21 - 1.5);
        let stencil = Stencil::new(
            "asym",
            vec![
                crate::grid::StencilPoint::new(0, 0, 0.4),
                crate::grid::StencilPoint::new(1, 0, 0.3),
                crate::grid::StencilPoint::new(0, -1, 0.2),
            ],
        )
        .unwrap();
        let c = ConstantField::uniform(0.01f32, 11, 6);
        for bc in [
            BoundaryCondition::BounceBack,
            BoundaryCondition::Periodic,
            BoundaryCondition::ZeroGhost,
            BoundaryCondition::ConstantGhost(2.0),
        ] {
            let plain = sweep(&grid, &stencil, &c, bc).unwrap();
            let (fused, b) = sweep_with_checksum(&grid, &stencil, &c, bc).unwrap();
            assert_eq!(
                plain.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                fused.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            let recomputed = compute_checksums(&fused, Which::BOnly);
            assert_eq!(
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                recomputed.b().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
