//! Deferred detection with checkpoint/rollback correction.
//!
//! Direct checksums are still fused into every sweep; only the
//! interpolate-and-compare step is deferred. At the end of each block of
//! `delta` iterations the checkpoint's checksums are interpolated `delta`
//! times (consuming one recorded boundary ledger per step where the
//! boundary policy needs one) and compared against the fused checksums of
//! the current state. A clean comparison promotes the current state to the
//! new checkpoint; a mismatch rolls back and recomputes the block.
//!
//! Recomputation assumes transient faults, so a block that fails detection
//! twice signals a reproducible fault and aborts the run.

use crate::checksum::{compute_checksums, ChecksumPair, Which};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::grid::{sweep_tile_into, ConstantField, Stencil, Tile3D};
use crate::fault::FaultInjector;
use crate::kernels::KernelSpec;
use crate::online::{
    detect, interpolate_checksums, ledger_free, record_boundary_ledger, vertical_checksum_sources,
    BoundaryLedger,
};
use crate::grid::BoundaryCondition;
use crate::Parallelism;

/// A verified state the run can roll back to, plus the per-iteration
/// boundary ledgers recorded since it was taken.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub iteration: u64,
    pub tile: Tile3D<T>,
    pub checksums: Vec<ChecksumPair<T>>,
    /// `ledgers[step][layer]`, one entry per completed iteration since this
    /// checkpoint; empty when the boundary policy needs no corrections.
    pub ledgers: Vec<Vec<BoundaryLedger<T>>>,
}

/// Outcome of one detection block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockOutcome {
    Clean,
    /// Detection fired; the block was rolled back and recomputed cleanly.
    RolledBack,
}

/// Applies the interpolation step `delta` times, consuming one ledger per
/// step. For boundary policies with no correction terms `ledgers` may be
/// empty; otherwise it must supply one ledger per step.
#[allow(clippy::too_many_arguments)]
pub fn iterate_interpolation<T: Element>(
    cs: &ChecksumPair<T>,
    delta: usize,
    stencil: &Stencil,
    cx: &[T],
    cy: &[T],
    ledgers: &[BoundaryLedger<T>],
    bc: BoundaryCondition<T>,
    which: Which,
) -> Result<ChecksumPair<T>> {
    let needs_ledger = !ledger_free(stencil, bc);
    if needs_ledger && ledgers.len() < delta {
        return Err(Error::MissingLedger {
            axis: crate::Axis::Y,
            offset: stencil.y_offsets().first().copied().unwrap_or(0),
        });
    }
    let empty = BoundaryLedger::empty();
    let mut current = cs.clone();
    for step in 0..delta {
        let ledger = if needs_ledger { &ledgers[step] } else { &empty };
        current = interpolate_checksums(&current, stencil, cx, cy, ledger, bc, &[], which)?;
    }
    Ok(current)
}

/// A tile under offline protection.
pub struct OfflineState<T: Element> {
    kernel: KernelSpec<T>,
    constants: Vec<ConstantField<T>>,
    front: Tile3D<T>,
    back: Tile3D<T>,
    checksums: Vec<ChecksumPair<T>>,
    checkpoint: Checkpoint<T>,
    epsilon: f64,
    delta: usize,
    detections: u64,
    rollbacks: u64,
}

impl<T: Element> OfflineState<T> {
    pub fn new(
        tile: Tile3D<T>,
        kernel: KernelSpec<T>,
        constants: Vec<ConstantField<T>>,
        epsilon: f64,
        delta: usize,
    ) -> Result<Self> {
        if constants.len() != tile.nz() {
            return Err(Error::LengthMismatch { left: tile.nz(), right: constants.len() });
        }
        if delta == 0 {
            return Err(Error::InvalidParams("detection period must be at least 1".into()));
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidParams("epsilon must be positive".into()));
        }
        let checksums: Vec<ChecksumPair<T>> = tile
            .layers()
            .iter()
            .map(|l| compute_checksums(l, Which::BOnly))
            .collect();
        let checkpoint = Checkpoint {
            iteration: tile.iteration(),
            tile: tile.clone(),
            checksums: checksums.clone(),
            ledgers: Vec::new(),
        };
        let back = tile.clone();
        Ok(OfflineState {
            kernel,
            constants,
            front: tile,
            back,
            checksums,
            checkpoint,
            epsilon,
            delta,
            detections: 0,
            rollbacks: 0,
        })
    }

    pub fn tile(&self) -> &Tile3D<T> {
        &self.front
    }

    pub fn iteration(&self) -> u64 {
        self.front.iteration()
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn checkpoint(&self) -> &Checkpoint<T> {
        &self.checkpoint
    }

    /// Mutable checkpoint access for spill tooling and corruption
    /// experiments.
    pub fn checkpoint_mut(&mut self) -> &mut Checkpoint<T> {
        &mut self.checkpoint
    }

    pub fn detections(&self) -> u64 {
        self.detections
    }

    pub fn rollbacks(&self) -> u64 {
        self.rollbacks
    }

    /// Runs one detection block of `len` iterations (normally `delta`; the
    /// final block of a run may be shorter). On mismatch the block is
    /// rolled back and recomputed once.
    pub fn step_block(
        &mut self,
        len: usize,
        par: &Parallelism,
        mut injector: Option<&mut FaultInjector>,
    ) -> Result<BlockOutcome> {
        if len == 0 {
            return Err(Error::InvalidParams("block length must be at least 1".into()));
        }
        self.run_block(len, par, injector.as_deref_mut())?;
        if self.block_is_clean(len)? {
            self.take_checkpoint();
            return Ok(BlockOutcome::Clean);
        }
        self.detections += 1;
        self.rollback_and_recompute(len, par, injector)?;
        Ok(BlockOutcome::RolledBack)
    }

    /// Restores the last checkpoint and re-executes the block. The fault
    /// model is transient, so a spent single-shot injector does not
    /// re-fire; if detection fails again the fault is reproducible and the
    /// run aborts.
    pub fn rollback_and_recompute(
        &mut self,
        len: usize,
        par: &Parallelism,
        mut injector: Option<&mut FaultInjector>,
    ) -> Result<()> {
        self.rollbacks += 1;
        self.front = self.checkpoint.tile.clone();
        self.checksums = self.checkpoint.checksums.clone();
        self.checkpoint.ledgers.clear();
        self.run_block(len, par, injector.as_deref_mut())?;
        if self.block_is_clean(len)? {
            self.take_checkpoint();
            Ok(())
        } else {
            Err(Error::PersistentError { iteration: self.front.iteration() })
        }
    }

    fn take_checkpoint(&mut self) {
        self.checkpoint = Checkpoint {
            iteration: self.front.iteration(),
            tile: self.front.clone(),
            checksums: self.checksums.clone(),
            ledgers: Vec::new(),
        };
    }

    fn run_block(
        &mut self,
        len: usize,
        par: &Parallelism,
        mut injector: Option<&mut FaultInjector>,
    ) -> Result<()> {
        let nz = self.front.nz();
        let ny = self.front.ny();
        let record_ledgers = !ledger_free(&self.kernel.stencil, self.kernel.bc);
        for _ in 0..len {
            let t = self.front.iteration();
            if record_ledgers {
                let step_ledgers: Vec<BoundaryLedger<T>> = (0..nz)
                    .map(|z| {
                        record_boundary_ledger(self.front.layer(z), &self.kernel.stencil, self.kernel.bc)
                    })
                    .collect();
                self.checkpoint.ledgers.push(step_ledgers);
            }
            let faults: Vec<_> = match injector.as_deref_mut() {
                Some(inj) => (0..nz).map(|z| inj.take_for(t, z)).collect(),
                None => vec![None; nz],
            };
            let mut bins: Vec<Vec<T>> = vec![vec![T::zero(); ny]; nz];
            sweep_tile_into(
                &self.front,
                &self.kernel,
                &self.constants,
                &faults,
                par,
                &mut self.back,
                Some(&mut bins),
            )?;
            std::mem::swap(&mut self.front, &mut self.back);
            self.checksums = bins
                .into_iter()
                .map(|b| ChecksumPair::from_b(b, t + 1))
                .collect();
        }
        Ok(())
    }

    /// Interpolates the checkpoint's checksums across the block (coupling
    /// layers through the vertical weights) and compares against the fused
    /// direct checksums of the current state.
    fn block_is_clean(&self, len: usize) -> Result<bool> {
        let needs_ledger = !ledger_free(&self.kernel.stencil, self.kernel.bc);
        if needs_ledger && self.checkpoint.ledgers.len() < len {
            return Err(Error::MissingLedger {
                axis: crate::Axis::Y,
                offset: self.kernel.stencil.y_offsets().first().copied().unwrap_or(0),
            });
        }
        let empty: Vec<BoundaryLedger<T>> = Vec::new();
        let mut cs = self.checkpoint.checksums.clone();
        for step in 0..len {
            let step_ledgers = if needs_ledger { &self.checkpoint.ledgers[step] } else { &empty };
            let empty_single = BoundaryLedger::empty();
            let next: Result<Vec<ChecksumPair<T>>> = (0..cs.len())
                .map(|z| {
                    let ledger = step_ledgers.get(z).unwrap_or(&empty_single);
                    let vcs = vertical_checksum_sources(&cs, z, &self.kernel);
                    interpolate_checksums(
                        &cs[z],
                        &self.kernel.stencil,
                        self.constants[z].col_sums(),
                        self.constants[z].row_sums(),
                        ledger,
                        self.kernel.bc,
                        &vcs,
                        Which::BOnly,
                    )
                })
                .collect();
            cs = next?;
        }
        for (z, interp) in cs.iter().enumerate() {
            if !detect(self.checksums[z].b(), interp.b(), self.epsilon).is_empty() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
