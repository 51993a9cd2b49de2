//! Built-in stencil kernels.
//!
//! A [`KernelSpec`] bundles the in-layer stencil, the vertical coupling
//! weights, the boundary policy, and recipes for the constant field and the
//! initial state. Kernels are dimension-independent; `constants` and
//! `initial_tile` materialize them for concrete tile sizes.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, ConstantField, Stencil, StencilPoint, Tile3D};

/// Material parameters of the thermal kernel.
///
/// The update redistributes heat to the four in-layer neighbors with weight
/// `conductance_xy` each and to the two vertical neighbors with weight
/// `conductance_z` each; the center keeps the remainder so the weights sum
/// to exactly 1 (a pure diffusion step). Power densities are added per cell
/// per iteration through the constant field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HotspotParams {
    pub conductance_xy: f64,
    pub conductance_z: f64,
    /// Initial temperature everywhere.
    pub ambient: f64,
    /// Multiplier on the built-in power-density floorplan.
    pub power_scale: f64,
}

impl Default for HotspotParams {
    fn default() -> Self {
        // Defaults keep the field inside the [1, 2) binade for the default
        // iteration counts, which keeps bit-flip sensitivity uniform across
        // the domain.
        HotspotParams {
            conductance_xy: 0.125,
            conductance_z: 0.0625,
            ambient: 1.0,
            power_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ConstantSpec {
    Zero,
    /// Two rectangular heat sources per layer, scaled by layer depth.
    HotspotFloorplan { scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
enum InitialSpec {
    Uniform(f64),
    /// `base + amplitude * max(0, 1 - d^2/r^2)` around the tile center,
    /// where `r = radius_frac * min(nx, ny) / 2`.
    CenteredBump { base: f64, amplitude: f64, radius_frac: f64 },
}

/// A complete kernel definition.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec<T> {
    pub name: String,
    pub stencil: Stencil,
    /// Weight on the layer below (z-1); 0 means no vertical point.
    pub w_below: f64,
    /// Weight on the layer above (z+1); 0 means no vertical point.
    pub w_above: f64,
    pub bc: BoundaryCondition<T>,
    constant: ConstantSpec,
    initial: InitialSpec,
}

impl<T: Element> KernelSpec<T> {
    /// Constant fields for each layer of an `nx x ny x nz` tile.
    pub fn constants(&self, nx: usize, ny: usize, nz: usize) -> Vec<ConstantField<T>> {
        match &self.constant {
            ConstantSpec::Zero => (0..nz).map(|_| ConstantField::zero(nx, ny)).collect(),
            ConstantSpec::HotspotFloorplan { scale } => (0..nz)
                .map(|z| {
                    let mut cells = Vec::with_capacity(nx * ny);
                    for y in 0..ny {
                        for x in 0..nx {
                            cells.push(T::from_f64(floorplan_power(x, y, z, nx, ny, nz) * scale));
                        }
                    }
                    ConstantField::per_cell(nx, ny, cells).expect("sized above")
                })
                .collect(),
        }
    }

    /// Initial state for an `nx x ny x nz` tile (iteration 0).
    pub fn initial_tile(&self, nx: usize, ny: usize, nz: usize) -> Tile3D<T> {
        match self.initial {
            InitialSpec::Uniform(v) => Tile3D::uniform(nx, ny, nz, T::from_f64(v)),
            InitialSpec::CenteredBump { base, amplitude, radius_frac } => {
                let cx = (nx as f64 - 1.0) / 2.0;
                let cy = (ny as f64 - 1.0) / 2.0;
                let r = radius_frac * (nx.min(ny) as f64) / 2.0;
                Tile3D::from_fn(nx, ny, nz, |x, y, _z| {
                    let dx = x as f64 - cx;
                    let dy = y as f64 - cy;
                    let s = 1.0 - (dx * dx + dy * dy) / (r * r);
                    T::from_f64(base + amplitude * s.max(0.0))
                })
            }
        }
    }

    /// Looks a built-in kernel up by name (`hotspot3d`, `five-point`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "hotspot3d" => make_hotspot3d_like(&HotspotParams::default()),
            "five-point" => {
                let mut k = make_five_point(0.6, 0.1, 0.1, 0.1, 0.1);
                k.initial = InitialSpec::CenteredBump { base: 1.0, amplitude: 0.5, radius_frac: 0.7 };
                Ok(k)
            }
            other => Err(Error::UnknownKernel(other.to_string())),
        }
    }
}

/// Synthetic power-density floorplan: two rectangular cores, hotter toward
/// the top layer. This table is the single source of truth for the thermal
/// kernel's constants.
fn floorplan_power(x: usize, y: usize, z: usize, nx: usize, ny: usize, nz: usize) -> f64 {
    const CORE_A_DENSITY: f64 = 2.0e-3;
    const CORE_B_DENSITY: f64 = 1.0e-3;
    let layer_factor = (z + 1) as f64 / nz as f64;
    let in_a = x >= nx / 8 && x < 3 * nx / 8 && y >= ny / 8 && y < 3 * ny / 8;
    let in_b = x >= 5 * nx / 8 && x < 7 * nx / 8 && y >= ny / 2 && y < 3 * ny / 4;
    let density = if in_a {
        CORE_A_DENSITY
    } else if in_b {
        CORE_B_DENSITY
    } else {
        0.0
    };
    density * layer_factor
}

/// The five-point kernel of a center cell and its four neighbors:
/// `S = {(0,0,w1), (-1,0,w2), (1,0,w3), (0,1,w4), (0,-1,w5)}`,
/// bounce-back boundaries, zero constant term. Weights are arbitrary.
pub fn make_five_point<T: Element>(w1: f64, w2: f64, w3: f64, w4: f64, w5: f64) -> KernelSpec<T> {
    let stencil = Stencil::new(
        "five-point",
        vec![
            StencilPoint::new(0, 0, w1),
            StencilPoint::new(-1, 0, w2),
            StencilPoint::new(1, 0, w3),
            StencilPoint::new(0, 1, w4),
            StencilPoint::new(0, -1, w5),
        ],
    )
    .expect("five-point offsets are distinct");
    KernelSpec {
        name: "five-point".into(),
        stencil,
        w_below: 0.0,
        w_above: 0.0,
        bc: BoundaryCondition::BounceBack,
        constant: ConstantSpec::Zero,
        initial: InitialSpec::Uniform(1.0),
    }
}

/// A seven-point thermal kernel in the style of stacked-die temperature
/// simulators: five-point in-layer diffusion, vertical coupling between
/// layers, and per-cell heat injection from a power map.
pub fn make_hotspot3d_like<T: Element>(params: &HotspotParams) -> Result<KernelSpec<T>> {
    let HotspotParams { conductance_xy, conductance_z, ambient, power_scale } = *params;
    if conductance_xy < 0.0 || conductance_z < 0.0 || power_scale < 0.0 {
        return Err(Error::InvalidParams("conductances and power scale must be non-negative".into()));
    }
    let w_center = 1.0 - 4.0 * conductance_xy - 2.0 * conductance_z;
    if w_center < 0.0 {
        return Err(Error::InvalidParams(format!(
            "conductances too large: center weight would be {w_center}"
        )));
    }
    let stencil = Stencil::new(
        "hotspot3d",
        vec![
            StencilPoint::new(0, 0, w_center),
            StencilPoint::new(-1, 0, conductance_xy),
            StencilPoint::new(1, 0, conductance_xy),
            StencilPoint::new(0, 1, conductance_xy),
            StencilPoint::new(0, -1, conductance_xy),
        ],
    )
    .expect("hotspot offsets are distinct");
    Ok(KernelSpec {
        name: "hotspot3d".into(),
        stencil,
        w_below: conductance_z,
        w_above: conductance_z,
        bc: BoundaryCondition::BounceBack,
        constant: ConstantSpec::HotspotFloorplan { scale: power_scale },
        initial: InitialSpec::Uniform(ambient),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sweep, sweep_tile, ConstantField, Grid2D};

    #[test]
    fn five_point_weight_layout() {
        let k = make_five_point::<f32>(0.1, 0.2, 0.3, 0.4, 0.5);
        let pts = k.stencil.points();
        assert_eq!(pts[0], StencilPoint::new(0, 0, 0.1));
        assert_eq!(pts[1], StencilPoint::new(-1, 0, 0.2));
        assert_eq!(pts[2], StencilPoint::new(1, 0, 0.3));
        assert_eq!(pts[3], StencilPoint::new(0, 1, 0.4));
        assert_eq!(pts[4], StencilPoint::new(0, -1, 0.5));
    }

    #[test]
    fn five_point_identity_weights() {
        let k = make_five_point::<f32>(1.0, 0.0, 0.0, 0.0, 0.0);
        let grid = Grid2D::from_fn(6, 5, |x, y| 0.5 + (x + 2 * y) as f32 * 0.125);
        let c = ConstantField::zero(6, 5);
        let out = sweep(&grid, &k.stencil, &c, k.bc).unwrap();
        assert_eq!(out.data(), grid.data());
    }

    #[test]
    fn five_point_neighbor_average_fixed_point() {
        // The 4-neighbor average with exactly representable weights.
        let k = make_five_point::<f32>(0.0, 0.25, 0.25, 0.25, 0.25);
        assert_eq!(k.stencil.weight_sum(), 1.0);
        let grid = Grid2D::uniform(8, 8, 3.25f32);
        let c = ConstantField::zero(8, 8);
        let out = sweep(&grid, &k.stencil, &c, k.bc).unwrap();
        assert_eq!(out.data(), grid.data());
    }

    #[test]
    fn hotspot_rejects_bad_params() {
        let bad = HotspotParams { conductance_xy: 0.3, ..Default::default() };
        assert!(make_hotspot3d_like::<f32>(&bad).is_err());
        let neg = HotspotParams { conductance_z: -0.1, ..Default::default() };
        assert!(make_hotspot3d_like::<f32>(&neg).is_err());
    }

    #[test]
    fn hotspot_zero_power_uniform_steady_state() {
        let params = HotspotParams { power_scale: 0.0, ..Default::default() };
        let k = make_hotspot3d_like::<f32>(&params).unwrap();
        let tile = k.initial_tile(6, 6, 3);
        let constants = k.constants(6, 6, 3);
        let out = sweep_tile(&tile, &k, &constants).unwrap();
        for (a, b) in out.cells().zip(tile.cells()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn builtin_lookup() {
        assert!(KernelSpec::<f32>::by_name("hotspot3d").is_ok());
        assert!(KernelSpec::<f32>::by_name("five-point").is_ok());
        assert!(matches!(
            KernelSpec::<f32>::by_name("nope"),
            Err(Error::UnknownKernel(_))
        ));
    }

    #[test]
    fn floorplan_is_deterministic_and_bounded() {
        for z in 0..8 {
            for y in 0..64 {
                for x in 0..64 {
                    let p = floorplan_power(x, y, z, 64, 64, 8);
                    assert!((0.0..=2.0e-3).contains(&p));
                }
            }
        }
        assert!(floorplan_power(10, 10, 7, 64, 64, 8) > 0.0);
    }
}
