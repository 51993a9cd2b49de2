//! Per-iteration checksum interpolation, mismatch detection, localization
//! and in-place correction.
//!
//! The key identity: applying the stencil's 1D analogue to the checksum
//! vectors of iteration t reproduces the checksum vectors of iteration t+1,
//! up to boundary-correction terms. For the row checksum `a`:
//!
//! ```text
//! a'[x] = c_x[x] + sum over (di,dj,w) of w * (a[x+di] + alpha[x+di, dj])
//! ```
//!
//! and symmetrically for `b` with the x-offsets and a `beta` term.
//! Out-of-range checksum indices are resolved by the same boundary policy
//! as the 2D kernel, applied in 1D. `alpha`/`beta` capture what the
//! boundary rows/columns contribute differently from interior cells:
//!
//! - periodic boundaries: the wrapped contributions match exactly, so the
//!   terms vanish;
//! - bounce-back: the clamped border reads differ from the rows/columns
//!   that shift out, except when every off-axis offset is +-1 with equal
//!   paired weights, where the differences cancel identically;
//! - constant/zero ghosts: the ghost part has a closed form, the in-domain
//!   part is a border sum.
//!
//! A direct checksum diverging from its interpolated prediction by more
//! than the relative threshold epsilon flags the row/column; the flagged
//! (x, y) pair localizes the corrupted cell, and subtracting the corrupted
//! value from either checksum reconstructs the original.

use serde::Serialize;

use crate::checksum::{compute_checksums, ChecksumPair, Which};
use crate::element::Element;
use crate::error::{Axis, Error, Result, Uncorrectable};
use crate::fault::FaultInjector;
use crate::grid::{
    col_sums_strict, resolve, sweep_tile_into, BoundaryCondition, ConstantField, GhostResolution,
    Grid2D, Stencil, Tile3D,
};
use crate::kernels::KernelSpec;
use crate::Parallelism;

/// Below this magnitude the relative error is meaningless; detection falls
/// back to an absolute comparison.
pub const DETECT_ABS_FLOOR: f64 = 1e-20;

/// Boundary-correction terms recorded from the iteration-t grid before a
/// sweep.
///
/// `alpha` holds one vector per distinct nonzero y-offset `dj` (indexed by
/// x, corrected into the row checksum `a`); `beta` holds one vector per
/// distinct nonzero x-offset `di` (indexed by y, corrected into `b`).
/// Both sides are empty when the boundary policy makes every term zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryLedger<T> {
    alpha: Vec<(i32, Vec<T>)>,
    beta: Vec<(i32, Vec<T>)>,
}

impl<T: Element> BoundaryLedger<T> {
    pub fn empty() -> Self {
        BoundaryLedger { alpha: Vec::new(), beta: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty() && self.beta.is_empty()
    }

    pub fn alpha(&self, dj: i32) -> Option<&[T]> {
        self.alpha.iter().find(|(o, _)| *o == dj).map(|(_, v)| v.as_slice())
    }

    pub fn beta(&self, di: i32) -> Option<&[T]> {
        self.beta.iter().find(|(o, _)| *o == di).map(|(_, v)| v.as_slice())
    }
}

/// True when the bounce-back corrections into the row checksum cancel for
/// every grid: all off-axis offsets are +-1 and the +1/-1 weights agree for
/// each x-offset.
fn bounceback_alpha_cancels(stencil: &Stencil) -> bool {
    let mut net: Vec<(i32, f64)> = Vec::new();
    for p in stencil.points() {
        match p.dj {
            0 => {}
            1 | -1 => {
                let signed = if p.dj == 1 { p.w } else { -p.w };
                match net.iter_mut().find(|(di, _)| *di == p.di) {
                    Some((_, acc)) => *acc += signed,
                    None => net.push((p.di, signed)),
                }
            }
            _ => return false,
        }
    }
    net.iter().all(|&(_, d)| d == 0.0)
}

fn bounceback_beta_cancels(stencil: &Stencil) -> bool {
    let mut net: Vec<(i32, f64)> = Vec::new();
    for p in stencil.points() {
        match p.di {
            0 => {}
            1 | -1 => {
                let signed = if p.di == 1 { p.w } else { -p.w };
                match net.iter_mut().find(|(dj, _)| *dj == p.dj) {
                    Some((_, acc)) => *acc += signed,
                    None => net.push((p.dj, signed)),
                }
            }
            _ => return false,
        }
    }
    net.iter().all(|&(_, d)| d == 0.0)
}

/// Distinct y-offsets whose alpha terms must be recorded for this stencil
/// and boundary policy.
pub(crate) fn required_alpha_offsets<T: Element>(
    stencil: &Stencil,
    bc: BoundaryCondition<T>,
) -> Vec<i32> {
    match bc {
        BoundaryCondition::Periodic => Vec::new(),
        BoundaryCondition::BounceBack if bounceback_alpha_cancels(stencil) => Vec::new(),
        _ => stencil.y_offsets(),
    }
}

pub(crate) fn required_beta_offsets<T: Element>(
    stencil: &Stencil,
    bc: BoundaryCondition<T>,
) -> Vec<i32> {
    match bc {
        BoundaryCondition::Periodic => Vec::new(),
        BoundaryCondition::BounceBack if bounceback_beta_cancels(stencil) => Vec::new(),
        _ => stencil.x_offsets(),
    }
}

/// True when interpolation under this stencil/policy needs no recorded
/// ledger at all.
pub fn ledger_free<T: Element>(stencil: &Stencil, bc: BoundaryCondition<T>) -> bool {
    required_alpha_offsets(stencil, bc).is_empty() && required_beta_offsets(stencil, bc).is_empty()
}

/// Records the boundary-correction terms from the iteration-t grid. Must be
/// called before the grid is swept.
pub fn record_boundary_ledger<T: Element>(
    grid: &Grid2D<T>,
    stencil: &Stencil,
    bc: BoundaryCondition<T>,
) -> BoundaryLedger<T> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut ledger = BoundaryLedger::empty();

    for dj in required_alpha_offsets(stencil, bc) {
        let m = dj.unsigned_abs() as usize;
        debug_assert!(m < ny, "stencil y-offset exceeds grid height");
        let mut v = vec![T::zero(); nx];
        for (x, out) in v.iter_mut().enumerate() {
            let (ghost, interior) = if dj > 0 {
                // Rows ny..ny+m read beyond the top; the first m rows shift out.
                let ghost = ghost_sum(m, bc, grid.get(x, ny - 1));
                let mut acc = T::zero();
                for y in 0..m {
                    acc = acc + grid.get(x, y);
                }
                (ghost, acc)
            } else {
                // Rows -m..-1 read below zero; the last m rows shift out.
                let ghost = ghost_sum(m, bc, grid.get(x, 0));
                let mut acc = T::zero();
                for y in ny - m..ny {
                    acc = acc + grid.get(x, y);
                }
                (ghost, acc)
            };
            *out = ghost - interior;
        }
        ledger.alpha.push((dj, v));
    }

    for di in required_beta_offsets(stencil, bc) {
        let m = di.unsigned_abs() as usize;
        debug_assert!(m < nx, "stencil x-offset exceeds grid width");
        let mut v = vec![T::zero(); ny];
        for (y, out) in v.iter_mut().enumerate() {
            let (ghost, interior) = if di > 0 {
                let ghost = ghost_sum(m, bc, grid.get(nx - 1, y));
                let mut acc = T::zero();
                for x in 0..m {
                    acc = acc + grid.get(x, y);
                }
                (ghost, acc)
            } else {
                let ghost = ghost_sum(m, bc, grid.get(0, y));
                let mut acc = T::zero();
                for x in nx - m..nx {
                    acc = acc + grid.get(x, y);
                }
                (ghost, acc)
            };
            *out = ghost - interior;
        }
        ledger.beta.push((di, v));
    }

    ledger
}

/// Sum of `m` ghost reads next to a border cell holding `border`.
#[inline]
fn ghost_sum<T: Element>(m: usize, bc: BoundaryCondition<T>, border: T) -> T {
    match bc {
        BoundaryCondition::BounceBack => T::from_f64(m as f64) * border,
        BoundaryCondition::ConstantGhost(v) => T::from_f64(m as f64) * v,
        BoundaryCondition::ZeroGhost => T::zero(),
        // Periodic never records a ledger.
        BoundaryCondition::Periodic => T::zero(),
    }
}

/// Checksum source of a vertical neighbor during interpolation.
#[derive(Clone, Copy)]
pub enum VerticalCs<'a, T> {
    Layer(&'a ChecksumPair<T>),
    /// An out-of-tile ghost layer of this uniform value.
    Ghost(T),
}

/// Interpolates iteration-(t+1) checksums from the iteration-t pair by
/// applying the stencil in 1D, with ledger corrections and the same
/// boundary policy on checksum indices. `vertical` carries the adjacent
/// layers' checksums for 3D kernels (weights there are the kernel's
/// vertical weights; the offsets are in-plane zero, so no corrections
/// apply).
pub fn interpolate_checksums<T: Element>(
    cs: &ChecksumPair<T>,
    stencil: &Stencil,
    cx: &[T],
    cy: &[T],
    ledger: &BoundaryLedger<T>,
    bc: BoundaryCondition<T>,
    vertical: &[(VerticalCs<'_, T>, f64)],
    which: Which,
) -> Result<ChecksumPair<T>> {
    let nx = cx.len();
    let ny = cy.len();
    if cs.b().len() != ny {
        return Err(Error::LengthMismatch { left: ny, right: cs.b().len() });
    }
    for dj in required_alpha_offsets(stencil, bc) {
        if which == Which::Both && ledger.alpha(dj).is_none() {
            return Err(Error::MissingLedger { axis: Axis::Y, offset: dj });
        }
    }
    for di in required_beta_offsets(stencil, bc) {
        if ledger.beta(di).is_none() {
            return Err(Error::MissingLedger { axis: Axis::X, offset: di });
        }
    }
    let points = stencil.weights_as::<T>();
    let nx_t = T::from_f64(nx as f64);
    let ny_t = T::from_f64(ny as f64);

    // Column checksum b: indices move by dj, beta corrections keyed by di.
    let b = cs.b();
    let mut b_out = vec![T::zero(); ny];
    for (y, out) in b_out.iter_mut().enumerate() {
        let mut acc = cy[y];
        for &(di, dj, w) in &points {
            let term = match resolve(y as isize + dj as isize, ny, bc) {
                GhostResolution::InDomain(ry) => match ledger.beta(di) {
                    Some(beta) => b[ry] + beta[ry],
                    None => b[ry],
                },
                GhostResolution::GhostValue(g) => nx_t * g,
            };
            acc = acc + w * term;
        }
        for &(src, w) in vertical {
            let term = match src {
                VerticalCs::Layer(n) => n.b()[y],
                VerticalCs::Ghost(g) => nx_t * g,
            };
            acc = acc + T::from_f64(w) * term;
        }
        *out = acc;
    }

    // Row checksum a: indices move by di, alpha corrections keyed by dj.
    let a_out = match which {
        Which::BOnly => None,
        Which::Both => {
            let a = cs.a().ok_or_else(|| {
                Error::InvalidParams("row checksum not populated in input pair".into())
            })?;
            if a.len() != nx {
                return Err(Error::LengthMismatch { left: nx, right: a.len() });
            }
            let mut a_out = vec![T::zero(); nx];
            for (x, out) in a_out.iter_mut().enumerate() {
                let mut acc = cx[x];
                for &(di, dj, w) in &points {
                    let term = match resolve(x as isize + di as isize, nx, bc) {
                        GhostResolution::InDomain(rx) => match ledger.alpha(dj) {
                            Some(alpha) => a[rx] + alpha[rx],
                            None => a[rx],
                        },
                        GhostResolution::GhostValue(g) => ny_t * g,
                    };
                    acc = acc + w * term;
                }
                for &(src, w) in vertical {
                    let term = match src {
                        VerticalCs::Layer(n) => match n.a() {
                            Some(na) => na[x],
                            None => {
                                return Err(Error::InvalidParams(
                                    "vertical neighbor lacks row checksum".into(),
                                ))
                            }
                        },
                        VerticalCs::Ghost(g) => ny_t * g,
                    };
                    acc = acc + T::from_f64(w) * term;
                }
                *out = acc;
            }
            Some(a_out)
        }
    };

    Ok(ChecksumPair::new(a_out, b_out, cs.iteration() + 1))
}

/// Flags indices where `interp` disagrees with `direct` by more than
/// `epsilon` in relative terms, where either entry is non-finite, or — for
/// near-zero direct entries — where the absolute gap exceeds `epsilon`.
/// Returns `(index, relative_error)` pairs.
pub fn detect<T: Element>(direct: &[T], interp: &[T], epsilon: f64) -> Vec<(usize, f64)> {
    assert_eq!(direct.len(), interp.len());
    let mut flags = Vec::new();
    for (i, (&d, &p)) in direct.iter().zip(interp).enumerate() {
        let d = d.as_f64();
        let p = p.as_f64();
        if !d.is_finite() || !p.is_finite() {
            flags.push((i, f64::INFINITY));
        } else if d.abs() < DETECT_ABS_FLOOR {
            let gap = (p - d).abs();
            if gap > epsilon {
                flags.push((i, gap));
            }
        } else {
            let rel = (p / d - 1.0).abs();
            if rel > epsilon {
                flags.push((i, rel));
            }
        }
    }
    flags
}

/// Outcome of comparing both checksum axes.
#[derive(Clone, Debug, Default)]
pub struct DetectionReport {
    /// Flagged row-checksum indices (x coordinates) with relative errors.
    pub err_x: Vec<(usize, f64)>,
    /// Flagged column-checksum indices (y coordinates) with relative errors.
    pub err_y: Vec<(usize, f64)>,
    pub any_nonfinite: bool,
}

impl DetectionReport {
    pub fn from_flags(err_x: Vec<(usize, f64)>, err_y: Vec<(usize, f64)>) -> Self {
        let any_nonfinite = err_x
            .iter()
            .chain(err_y.iter())
            .any(|(_, rel)| !rel.is_finite());
        DetectionReport { err_x, err_y, any_nonfinite }
    }
}

/// One repaired cell.
#[derive(Clone, Debug, Serialize)]
pub struct CorrectionRecord {
    pub layer: usize,
    pub iteration: u64,
    pub ex: usize,
    pub ey: usize,
    pub observed: f64,
    pub corrected: f64,
    /// Reconstruction from the row checksum.
    pub vx: f64,
    /// Reconstruction from the column checksum.
    pub vy: f64,
    /// Whether the two reconstructions agreed within tolerance.
    pub consistent: bool,
}

struct PairCandidate<T> {
    vx: T,
    vy: T,
    consistent: bool,
}

fn reconstruction<T: Element>(
    grid: &Grid2D<T>,
    a: &[T],
    b: &[T],
    a_interp: &[T],
    b_interp: &[T],
    ex: usize,
    ey: usize,
    epsilon: f64,
) -> PairCandidate<T> {
    let u = grid.get(ex, ey);
    let vx = a_interp[ex] - (a[ex] - u);
    let vy = b_interp[ey] - (b[ey] - u);
    let fx = vx.as_f64();
    let fy = vy.as_f64();
    let consistent = fx.is_finite()
        && fy.is_finite()
        && (fx - fy).abs() <= epsilon * fx.abs().max(fy.abs()).max(1.0);
    PairCandidate { vx, vy, consistent }
}

/// Pairs flagged row/column indices, validates each candidate pair by
/// requiring the two reconstructions to agree, and writes the corrected
/// values back into the grid and both direct checksums.
///
/// With `m` errors the flagged index lists must have equal length `m`; a
/// perfect matching in which every pair is consistent must exist. Matching
/// is searched in index order, so results are deterministic.
pub fn locate_and_correct<T: Element>(
    grid: &mut Grid2D<T>,
    a: &mut [T],
    b: &mut [T],
    a_interp: &[T],
    b_interp: &[T],
    report: &DetectionReport,
    epsilon: f64,
) -> Result<Vec<CorrectionRecord>> {
    let xs: Vec<usize> = report.err_x.iter().map(|&(i, _)| i).collect();
    let ys: Vec<usize> = report.err_y.iter().map(|&(i, _)| i).collect();
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Uncorrectable(Uncorrectable::CountMismatch {
            xs: xs.len(),
            ys: ys.len(),
        }));
    }
    let m = xs.len();

    if m == 1 {
        let cand = reconstruction(grid, a, b, a_interp, b_interp, xs[0], ys[0], epsilon);
        if !cand.vx.as_f64().is_finite() || !cand.vy.as_f64().is_finite() {
            return Err(Error::Uncorrectable(Uncorrectable::NonfiniteReconstruction));
        }
        if !cand.consistent {
            return Err(Error::Uncorrectable(Uncorrectable::NoConsistentPairing));
        }
        return Ok(vec![apply_correction(grid, a, b, xs[0], ys[0], &cand)]);
    }

    // Multi-error: search for a perfect matching whose pairs all cross-
    // validate. Error counts beyond a handful mean the single-error model
    // no longer applies.
    const MAX_PAIRING: usize = 16;
    if m > MAX_PAIRING {
        return Err(Error::Uncorrectable(Uncorrectable::NoConsistentPairing));
    }
    let mut candidates: Vec<Option<PairCandidate<T>>> = (0..m * m).map(|_| None).collect();
    for (xi, &ex) in xs.iter().enumerate() {
        for (yi, &ey) in ys.iter().enumerate() {
            let cand = reconstruction(grid, a, b, a_interp, b_interp, ex, ey, epsilon);
            if cand.consistent {
                candidates[xi * m + yi] = Some(cand);
            }
        }
    }
    let mut assignment = vec![usize::MAX; m];
    let mut used = vec![false; m];
    if !match_rows(0, m, &candidates, &mut used, &mut assignment) {
        return Err(Error::Uncorrectable(Uncorrectable::NoConsistentPairing));
    }
    let mut records = Vec::with_capacity(m);
    for (xi, &yi) in assignment.iter().enumerate() {
        let cand = candidates[xi * m + yi].as_ref().expect("matched pairs are consistent");
        records.push(apply_correction(grid, a, b, xs[xi], ys[yi], cand));
    }
    Ok(records)
}

fn match_rows<T>(
    xi: usize,
    m: usize,
    candidates: &[Option<PairCandidate<T>>],
    used: &mut [bool],
    assignment: &mut [usize],
) -> bool {
    if xi == m {
        return true;
    }
    for yi in 0..m {
        if !used[yi] && candidates[xi * m + yi].is_some() {
            used[yi] = true;
            assignment[xi] = yi;
            if match_rows(xi + 1, m, candidates, used, assignment) {
                return true;
            }
            used[yi] = false;
        }
    }
    false
}

fn apply_correction<T: Element>(
    grid: &mut Grid2D<T>,
    a: &mut [T],
    b: &mut [T],
    ex: usize,
    ey: usize,
    cand: &PairCandidate<T>,
) -> CorrectionRecord {
    let observed = grid.get(ex, ey);
    let corrected = (cand.vx + cand.vy) / T::from_f64(2.0);
    let delta = corrected - observed;
    a[ex] = a[ex] + delta;
    b[ey] = b[ey] + delta;
    grid.set(ex, ey, corrected);
    CorrectionRecord {
        layer: 0,
        iteration: grid.iteration(),
        ex,
        ey,
        observed: observed.as_f64(),
        corrected: corrected.as_f64(),
        vx: cand.vx.as_f64(),
        vy: cand.vy.as_f64(),
        consistent: cand.consistent,
    }
}

/// Builds the vertical checksum sources for layer `z`, mirroring the sweep's
/// vertical-neighbor resolution.
pub(crate) fn vertical_checksum_sources<'a, T: Element>(
    checksums: &'a [ChecksumPair<T>],
    z: usize,
    kernel: &KernelSpec<T>,
) -> Vec<(VerticalCs<'a, T>, f64)> {
    let nz = checksums.len();
    let mut out = Vec::with_capacity(2);
    for (dz, w) in [(-1isize, kernel.w_below), (1isize, kernel.w_above)] {
        if w == 0.0 {
            continue;
        }
        let entry = match resolve(z as isize + dz, nz, kernel.bc) {
            GhostResolution::InDomain(zi) => VerticalCs::Layer(&checksums[zi]),
            GhostResolution::GhostValue(g) => VerticalCs::Ghost(g),
        };
        out.push((entry, w));
    }
    out
}

/// A tile under online protection: every step sweeps with the fused
/// checksum, interpolates the column checksum, and compares. The row
/// checksum is only computed when a mismatch needs localizing.
pub struct ProtectedState<T: Element> {
    kernel: KernelSpec<T>,
    constants: Vec<ConstantField<T>>,
    front: Tile3D<T>,
    back: Tile3D<T>,
    checksums: Vec<ChecksumPair<T>>,
    epsilon: f64,
    detection_events: u64,
    uncorrectable_events: u64,
}

struct LayerOutcome<T> {
    cs: ChecksumPair<T>,
    detected: bool,
    records: Vec<CorrectionRecord>,
    failure: Option<Uncorrectable>,
}

impl<T: Element> ProtectedState<T> {
    pub fn new(
        tile: Tile3D<T>,
        kernel: KernelSpec<T>,
        constants: Vec<ConstantField<T>>,
        epsilon: f64,
    ) -> Result<Self> {
        if constants.len() != tile.nz() {
            return Err(Error::LengthMismatch { left: tile.nz(), right: constants.len() });
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidParams("epsilon must be positive".into()));
        }
        let checksums = tile
            .layers()
            .iter()
            .map(|l| compute_checksums(l, Which::BOnly))
            .collect();
        let back = tile.clone();
        Ok(ProtectedState {
            kernel,
            constants,
            front: tile,
            back,
            checksums,
            epsilon,
            detection_events: 0,
            uncorrectable_events: 0,
        })
    }

    pub fn tile(&self) -> &Tile3D<T> {
        &self.front
    }

    pub fn iteration(&self) -> u64 {
        self.front.iteration()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn checksums(&self) -> &[ChecksumPair<T>] {
        &self.checksums
    }

    /// Mutable checksum access, for corruption experiments against the
    /// detection theory (errors striking the checksum vectors themselves).
    pub fn checksums_mut(&mut self) -> &mut [ChecksumPair<T>] {
        &mut self.checksums
    }

    /// Layer-iteration events where detection flagged at least one index.
    pub fn detection_events(&self) -> u64 {
        self.detection_events
    }

    pub fn uncorrectable_events(&self) -> u64 {
        self.uncorrectable_events
    }

    /// Advances one iteration: fused sweep, interpolate, detect, and — on
    /// mismatch — localize and repair. Returns the corrections applied.
    ///
    /// On an uncorrectable detection the state still advances, adopting the
    /// corrupted values and their direct checksums so later iterations do
    /// not re-flag the same damage, and `Err(Uncorrectable)` reports the
    /// failure.
    pub fn step(
        &mut self,
        par: &Parallelism,
        injector: Option<&mut FaultInjector>,
    ) -> Result<Vec<CorrectionRecord>> {
        let (nx, ny, nz) = (self.front.nx(), self.front.ny(), self.front.nz());
        let t = self.front.iteration();
        let faults = match injector {
            Some(inj) => (0..nz).map(|z| inj.take_for(t, z)).collect(),
            None => vec![None; nz],
        };

        let kernel = &self.kernel;
        let constants = &self.constants;
        let front = &self.front;
        let checksums = &self.checksums;
        let epsilon = self.epsilon;
        let points = kernel.stencil.weights_as::<T>();

        let mut slots: Vec<(usize, &mut Grid2D<T>)> =
            self.back.layers_mut().iter_mut().enumerate().collect();

        let outcomes: Vec<Result<LayerOutcome<T>>> = par.map_mut(&mut slots, |_, (z, layer)| {
            let z = *z;
            let constant = &constants[z];
            let bc = kernel.bc;

            // Boundary terms must be captured from the t-state before the
            // sweep conceptually replaces it.
            let ledger = if ledger_free(&kernel.stencil, bc) {
                BoundaryLedger::empty()
            } else {
                record_boundary_ledger(front.layer(z), &kernel.stencil, bc)
            };

            let vertical = crate::grid::vertical_sources(front.layers(), z, kernel);
            let mut b_direct = vec![T::zero(); ny];
            crate::grid::sweep_layer_into(
                front.layer(z).data(),
                nx,
                ny,
                &points,
                constant,
                bc,
                &vertical,
                faults[z],
                layer.data_mut(),
                Some(&mut b_direct),
            );
            layer.set_iteration(t + 1);

            let vcs = vertical_checksum_sources(checksums, z, kernel);
            let interp_b = interpolate_checksums(
                &checksums[z],
                &kernel.stencil,
                constant.col_sums(),
                constant.row_sums(),
                &ledger,
                bc,
                &vcs,
                Which::BOnly,
            )?;
            let err_y = detect(&b_direct, interp_b.b(), epsilon);
            if err_y.is_empty() {
                return Ok(LayerOutcome {
                    cs: ChecksumPair::from_b(b_direct, t + 1),
                    detected: false,
                    records: Vec::new(),
                    failure: None,
                });
            }

            // Mismatch: build the row-checksum side lazily and localize.
            let mut a_t = vec![T::zero(); nx];
            col_sums_strict(front.layer(z).data(), nx, ny, &mut a_t);
            let cs_full = ChecksumPair::new(Some(a_t), checksums[z].b().to_vec(), t);
            let neighbor_full: Vec<ChecksumPair<T>> = front
                .layers()
                .iter()
                .map(|l| compute_checksums(l, Which::Both))
                .collect();
            let vcs_full = vertical_checksum_sources(&neighbor_full, z, kernel);
            let interp_both = interpolate_checksums(
                &cs_full,
                &kernel.stencil,
                constant.col_sums(),
                constant.row_sums(),
                &ledger,
                bc,
                &vcs_full,
                Which::Both,
            )?;
            let mut a_direct = vec![T::zero(); nx];
            col_sums_strict(layer.data(), nx, ny, &mut a_direct);
            let err_x = detect(&a_direct, interp_both.a().expect("requested Both"), epsilon);
            let report = DetectionReport::from_flags(err_x, err_y);

            match locate_and_correct(
                layer,
                &mut a_direct,
                &mut b_direct,
                interp_both.a().expect("requested Both"),
                interp_b.b(),
                &report,
                epsilon,
            ) {
                Ok(mut records) => {
                    for r in &mut records {
                        r.layer = z;
                        r.iteration = t + 1;
                    }
                    Ok(LayerOutcome {
                        cs: ChecksumPair::new(Some(a_direct), b_direct, t + 1),
                        detected: true,
                        records,
                        failure: None,
                    })
                }
                Err(Error::Uncorrectable(reason)) => Ok(LayerOutcome {
                    // Adopt the corrupted state's own checksums so the run
                    // can continue without re-flagging it.
                    cs: ChecksumPair::new(Some(a_direct), b_direct, t + 1),
                    detected: true,
                    records: Vec::new(),
                    failure: Some(reason),
                }),
                Err(e) => Err(e),
            }
        });

        let mut records = Vec::new();
        let mut failure = None;
        let mut new_cs = Vec::with_capacity(nz);
        for outcome in outcomes {
            let o = outcome?;
            if o.detected {
                self.detection_events += 1;
            }
            if let Some(reason) = o.failure {
                self.uncorrectable_events += 1;
                failure.get_or_insert(reason);
            }
            records.extend(o.records);
            new_cs.push(o.cs);
        }
        self.checksums = new_cs;
        std::mem::swap(&mut self.front, &mut self.back);
        match failure {
            Some(reason) => Err(Error::Uncorrectable(reason)),
            None => Ok(records),
        }
    }

    /// Runs an unprotected sweep of the same tile (no checksum work at
    /// all); used for overhead baselines.
    pub fn unprotected_reference_step(
        tile: &Tile3D<T>,
        scratch: &mut Tile3D<T>,
        kernel: &KernelSpec<T>,
        constants: &[ConstantField<T>],
        par: &Parallelism,
        faults: &[Option<crate::grid::CellFault>],
    ) -> Result<()> {
        sweep_tile_into(tile, kernel, constants, faults, par, scratch, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detect_exact_match_is_empty() {
        let v = vec![1.0f32, 2.0, 3.0];
        assert!(detect(&v, &v, 1e-5).is_empty());
    }

    #[test]
    fn detect_flags_relative_perturbation() {
        let direct = vec![10.0f32, 20.0, 30.0, 40.0];
        let mut interp = direct.clone();
        interp[3] = 40.0 * (1.0 + 1e-3);
        let flags = detect(&direct, &interp, 1e-5);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].0, 3);
        assert!((flags[0].1 - 1e-3).abs() < 1e-5);
    }

    #[test]
    fn detect_flags_nonfinite() {
        let direct = vec![1.0f32, f32::INFINITY, 3.0];
        let interp = vec![1.0f32, 2.0, 3.0];
        let flags = detect(&direct, &interp, 1e-5);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].0, 1);
        assert!(flags[0].1.is_infinite());
        let nan = vec![1.0f32, f32::NAN, 3.0];
        assert_eq!(detect(&nan, &interp, 1e-5).len(), 1);
    }

    #[test]
    fn detect_near_zero_uses_absolute_floor() {
        let direct = vec![0.0f32];
        // Tiny absolute deviation below epsilon: not an error.
        assert!(detect(&direct, &[1e-9f32], 1e-5).is_empty());
        // Large absolute deviation on a zero denominator: flagged.
        assert_eq!(detect(&direct, &[1e-3f32], 1e-5).len(), 1);
    }

    #[test]
    fn bounceback_cancellation_predicate() {
        // Symmetric five-point: +-1 pairs with equal weights on both axes.
        let sym = crate::kernels::make_five_point::<f32>(0.2, 0.2, 0.2, 0.2, 0.2);
        assert!(bounceback_alpha_cancels(&sym.stencil));
        assert!(bounceback_beta_cancels(&sym.stencil));
        // Asymmetric vertical weights break the alpha cancellation only.
        let asym = crate::kernels::make_five_point::<f32>(0.2, 0.2, 0.2, 0.3, 0.1);
        assert!(!bounceback_alpha_cancels(&asym.stencil));
        assert!(bounceback_beta_cancels(&asym.stencil));
        // Offsets beyond +-1 always need the ledger.
        let wide = Stencil::new(
            "wide",
            vec![
                crate::grid::StencilPoint::new(0, 2, 0.5),
                crate::grid::StencilPoint::new(0, -2, 0.5),
            ],
        )
        .unwrap();
        assert!(!bounceback_alpha_cancels(&wide));
    }
}
