//! Deterministic, seeded bit-flip injection.
//!
//! A fault targets one cell of one layer during one iteration: the freshly
//! computed value has one bit of its IEEE-754 representation flipped after
//! the update and before it is stored, so the corruption lands in the data
//! (direct checksums include it, interpolated checksums do not — which is
//! exactly what makes it detectable). Scheduling is uniform over iterations,
//! cells and bit positions and fully determined by the seed.

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::{Error, Result};
use crate::grid::CellFault;
use crate::rng::SplitMix64;

/// Flips one bit of the value's IEEE-754 representation.
pub fn flip_bit<T: Element>(value: T, bit: u32) -> Result<T> {
    if bit >= T::BIT_WIDTH {
        return Err(Error::BitOutOfRange { bit, width: T::BIT_WIDTH });
    }
    Ok(T::from_bits_u64(value.to_bits_u64() ^ (1u64 << bit)))
}

/// A scheduled single bit flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub iteration: u64,
    pub z: usize,
    pub y: usize,
    pub x: usize,
    pub bit: u32,
    pub armed: bool,
}

/// Draws a fault uniformly over `iteration x cells x bits`. Identical seeds
/// produce identical specs on every platform. Draw order: iteration, z, y,
/// x, bit.
pub fn schedule_random_fault(
    seed: u64,
    dims: (usize, usize, usize),
    max_iteration: u64,
    element_width: u32,
) -> FaultSpec {
    assert!(max_iteration >= 1);
    let (nx, ny, nz) = dims;
    let mut rng = SplitMix64::new(seed);
    let iteration = rng.next_below(max_iteration);
    let z = rng.next_below(nz as u64) as usize;
    let y = rng.next_below(ny as u64) as usize;
    let x = rng.next_below(nx as u64) as usize;
    let bit = rng.next_below(element_width as u64) as u32;
    FaultSpec { iteration, z, y, x, bit, armed: true }
}

/// Carries a [`FaultSpec`] into the sweep. Single-shot by default: the
/// fault disarms after firing, modeling a transient upset. The persistent
/// variant re-arms after every hit and models a reproducible (stuck-at)
/// fault; recomputing a block does not clear it.
#[derive(Clone, Debug)]
pub struct FaultInjector {
    spec: FaultSpec,
    armed: bool,
    single_shot: bool,
    fired: u64,
}

impl FaultInjector {
    pub fn new(spec: FaultSpec) -> Self {
        FaultInjector { armed: spec.armed, spec, single_shot: true, fired: 0 }
    }

    pub fn persistent(spec: FaultSpec) -> Self {
        FaultInjector { armed: spec.armed, spec, single_shot: false, fired: 0 }
    }

    pub fn spec(&self) -> &FaultSpec {
        &self.spec
    }

    pub fn fired(&self) -> u64 {
        self.fired
    }

    /// Hands out the cell fault if this sweep (iteration, layer) is the
    /// target. Called once per layer per sweep on the coordinating thread.
    pub fn take_for(&mut self, iteration: u64, z: usize) -> Option<CellFault> {
        if self.armed && self.spec.iteration == iteration && self.spec.z == z {
            if self.single_shot {
                self.armed = false;
            }
            self.fired += 1;
            Some(CellFault { x: self.spec.x, y: self.spec.y, bit: self.spec.bit })
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_bit_flip_negates() {
        assert_eq!(flip_bit(1.0f32, 31).unwrap(), -1.0);
        assert_eq!(flip_bit(-2.5f32, 31).unwrap(), 2.5);
        assert_eq!(flip_bit(1.0f64, 63).unwrap(), -1.0);
    }

    #[test]
    fn zero_bit_zero_gives_smallest_subnormal() {
        let v = flip_bit(0.0f32, 0).unwrap();
        assert_eq!(v.to_bits(), 0x0000_0001);
    }

    #[test]
    fn out_of_range_bit_rejected() {
        assert!(matches!(flip_bit(1.0f32, 32), Err(Error::BitOutOfRange { .. })));
        assert!(matches!(flip_bit(1.0f64, 64), Err(Error::BitOutOfRange { .. })));
        assert!(flip_bit(1.0f64, 63).is_ok());
    }

    #[test]
    fn schedule_is_deterministic() {
        let a = schedule_random_fault(99, (64, 64, 8), 128, 32);
        let b = schedule_random_fault(99, (64, 64, 8), 128, 32);
        assert_eq!(a, b);
        assert!(a.iteration < 128);
        assert!(a.x < 64 && a.y < 64 && a.z < 8);
        assert!(a.bit < 32);
    }

    #[test]
    fn injector_is_single_shot() {
        let spec = FaultSpec { iteration: 3, z: 1, y: 2, x: 4, bit: 7, armed: true };
        let mut inj = FaultInjector::new(spec);
        assert!(inj.take_for(2, 1).is_none());
        assert!(inj.take_for(3, 0).is_none());
        assert!(inj.take_for(3, 1).is_some());
        assert!(inj.take_for(3, 1).is_none(), "single-shot must not re-fire");
        assert_eq!(inj.fired(), 1);
    }

    #[test]
    fn persistent_injector_refires() {
        let spec = FaultSpec { iteration: 3, z: 1, y: 2, x: 4, bit: 7, armed: true };
        let mut inj = FaultInjector::persistent(spec);
        assert!(inj.take_for(3, 1).is_some());
        assert!(inj.take_for(3, 1).is_some());
        assert_eq!(inj.fired(), 2);
    }

    #[test]
    fn disarmed_spec_never_fires() {
        let spec = FaultSpec { iteration: 3, z: 1, y: 2, x: 4, bit: 7, armed: false };
        let mut inj = FaultInjector::new(spec);
        assert!(inj.take_for(3, 1).is_none());
    }
}
