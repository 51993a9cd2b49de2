//! Sweep correctness against the scalar brute-force oracle.

mod common;

use common::*;
use stencilguard::grid::{
    sweep, sweep_tile, BoundaryCondition, ConstantField, Grid2D, Stencil, StencilPoint, Tile3D,
};
use stencilguard::kernels::{make_five_point, make_hotspot3d_like, HotspotParams, KernelSpec};
use stencilguard::rng::SplitMix64;
use stencilguard::Parallelism;

#[test]
fn five_point_3x3_matches_oracle_bitwise() {
    let grid = Grid2D::<f32>::from_vec(
        3,
        3,
        vec![0.3, -1.2, 2.0, 0.7, 1.1, -0.4, 2.2, 0.0, 1.9],
    )
    .unwrap();
    let stencil = Stencil::new(
        "five",
        vec![
            StencilPoint::new(0, 0, 0.31),
            StencilPoint::new(-1, 0, 0.17),
            StencilPoint::new(1, 0, 0.23),
            StencilPoint::new(0, 1, 0.11),
            StencilPoint::new(0, -1, 0.18),
        ],
    )
    .unwrap();
    let c = ConstantField::zero(3, 3);
    let expected = naive_sweep(&grid, &stencil, &c, BoundaryCondition::BounceBack);
    let got = sweep(&grid, &stencil, &c, BoundaryCondition::BounceBack).unwrap();
    assert_grid_bits_eq(&got, &expected, "3x3 five-point bounce-back");
}

#[test]
fn random_sweeps_match_oracle_bitwise() {
    let mut rng = SplitMix64::new(0xC0FFEE);
    for case in 0..60 {
        let nx = 1 + rng.next_below(12) as usize;
        let ny = 1 + rng.next_below(12) as usize;
        let max_off = 1 + rng.next_below(2) as i32;
        if nx as i32 <= max_off || ny as i32 <= max_off {
            continue;
        }
        let grid = random_grid::<f32>(&mut rng, nx, ny);
        let stencil = random_stencil(&mut rng, 9, max_off);
        let bc = bc_variant::<f32>(rng.next_u64());
        let constant = if rng.next_below(2) == 0 {
            ConstantField::uniform(0.05f32, nx, ny)
        } else {
            let cells = (0..nx * ny).map(|i| (i % 5) as f32 * 0.01).collect();
            ConstantField::per_cell(nx, ny, cells).unwrap()
        };
        let expected = naive_sweep(&grid, &stencil, &constant, bc);
        let got = sweep(&grid, &stencil, &constant, bc).unwrap();
        assert_grid_bits_eq(&got, &expected, &format!("random case {case}"));
    }
}

#[test]
fn hotspot_like_tile_matches_oracle_bitwise() {
    let kernel = make_hotspot3d_like::<f32>(&HotspotParams::default()).unwrap();
    let constants = kernel.constants(4, 4, 3);
    let mut rng = SplitMix64::new(7);
    let tile = Tile3D::from_fn(4, 4, 3, |_, _, _| rng.next_f64() as f32 + 0.5);
    let expected = naive_tile_sweep(&tile, &kernel, &constants);
    let got = sweep_tile(&tile, &kernel, &constants).unwrap();
    assert_tile_bits_eq(&got, &expected, "4x4x3 hotspot tile");
}

#[test]
fn every_builtin_kernel_matches_oracle() {
    let mut rng = SplitMix64::new(99);
    for name in ["hotspot3d", "five-point"] {
        let kernel = KernelSpec::<f32>::by_name(name).unwrap();
        let constants = kernel.constants(6, 5, 2);
        let tile = Tile3D::from_fn(6, 5, 2, |_, _, _| rng.next_f64() as f32 + 0.5);
        let expected = naive_tile_sweep(&tile, &kernel, &constants);
        let got = sweep_tile(&tile, &kernel, &constants).unwrap();
        assert_tile_bits_eq(&got, &expected, name);
    }
}

#[test]
fn single_layer_tile_equals_folded_2d_sweep() {
    // With one layer under bounce-back, both vertical reads clamp to the
    // layer itself, so the update equals a 2D sweep with the vertical
    // weights folded onto the center (up to round-off from the changed
    // accumulation order).
    let kernel = make_hotspot3d_like::<f64>(&HotspotParams::default()).unwrap();
    let constants = kernel.constants(8, 8, 1);
    let mut rng = SplitMix64::new(3);
    let tile = Tile3D::from_fn(8, 8, 1, |_, _, _| rng.next_f64() + 0.5);
    let got = sweep_tile(&tile, &kernel, &constants).unwrap();

    let mut folded_points: Vec<StencilPoint> = kernel.stencil.points().to_vec();
    folded_points[0].w += kernel.w_below + kernel.w_above;
    let folded = Stencil::new("folded", folded_points).unwrap();
    let flat = sweep(tile.layer(0), &folded, &constants[0], kernel.bc).unwrap();
    for (a, b) in got.layer(0).data().iter().zip(flat.data()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn uniform_tile_is_fixed_point_of_hotspot_weights() {
    let params = HotspotParams { power_scale: 0.0, ..Default::default() };
    let kernel = make_hotspot3d_like::<f32>(&params).unwrap();
    let constants = kernel.constants(5, 7, 4);
    let tile = Tile3D::uniform(5, 7, 4, 1.0f32);
    let got = sweep_tile(&tile, &kernel, &constants).unwrap();
    assert_tile_bits_eq(&got, &tile, "uniform hotspot tile");
}

#[test]
fn periodic_conservation() {
    // With periodic boundaries and no constant term every input cell is
    // read exactly once per stencil point, so the total scales by the
    // weight sum.
    let mut rng = SplitMix64::new(0xAB);
    for _ in 0..10 {
        let grid32 = random_grid::<f32>(&mut rng, 8, 8);
        let stencil = random_stencil(&mut rng, 7, 2);
        let c = ConstantField::zero(8, 8);
        let out = sweep(&grid32, &stencil, &c, BoundaryCondition::Periodic).unwrap();
        let expected = grid32.total_f64() * stencil.weight_sum();
        let got = out.total_f64();
        assert!(
            (got - expected).abs() <= 1e-5 * expected.abs().max(1.0),
            "f32 conservation: {got} vs {expected}"
        );

        let grid64 = random_grid::<f64>(&mut rng, 8, 8);
        let c = ConstantField::zero(8, 8);
        let out = sweep(&grid64, &stencil, &c, BoundaryCondition::Periodic).unwrap();
        let expected = grid64.total_f64() * stencil.weight_sum();
        let got = out.total_f64();
        assert!(
            (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "f64 conservation: {got} vs {expected}"
        );
    }
}

#[test]
fn sweep_results_independent_of_parallelism() {
    let kernel = make_hotspot3d_like::<f32>(&HotspotParams::default()).unwrap();
    let constants = kernel.constants(16, 16, 4);
    let tile = kernel.initial_tile(16, 16, 4);

    let run = |par: &Parallelism| {
        let mut front = tile.clone();
        let mut back = tile.clone();
        let faults = vec![None; 4];
        for _ in 0..12 {
            stencilguard::online::ProtectedState::unprotected_reference_step(
                &front,
                &mut back,
                &kernel,
                &constants,
                par,
                &faults,
            )
            .unwrap();
            std::mem::swap(&mut front, &mut back);
        }
        front
    };

    let seq = run(&Parallelism::sequential());
    let par4 = run(&Parallelism::new(4));
    let par0 = run(&Parallelism::new(0));
    assert_tile_bits_eq(&seq, &par4, "sequential vs 4 threads");
    assert_tile_bits_eq(&seq, &par0, "sequential vs default pool");
}

#[test]
fn point_heat_source_decays_monotonically_with_distance() {
    // A single heated cell in the center of an otherwise unpowered tile:
    // after many sweeps the temperature decreases along a ray leaving the
    // source.
    let params = HotspotParams { power_scale: 0.0, ..Default::default() };
    let kernel = make_hotspot3d_like::<f32>(&params).unwrap();
    let (nx, ny, nz) = (17, 17, 3);
    let mut cells = vec![0.0f32; nx * ny];
    cells[8 * nx + 8] = 1e-3;
    let mut constants = Vec::new();
    for _ in 0..nz {
        constants.push(ConstantField::per_cell(nx, ny, cells.clone()).unwrap());
    }
    let mut front = Tile3D::uniform(nx, ny, nz, 1.0f32);
    for _ in 0..128 {
        front = sweep_tile(&front, &kernel, &constants).unwrap();
    }
    let mid = front.layer(1);
    for x in 8..nx - 1 {
        assert!(
            mid.get(x, 8) >= mid.get(x + 1, 8),
            "temperature must not increase away from the source: x={x}"
        );
    }
    assert!(mid.get(8, 8) > 1.0);
}
