//! Grid files and checkpoint spills.
//!
//! `ABFTGRID v1` layout: the 8-byte magic `ABFTGRID`, five little-endian
//! u32 fields `{version=1, nx, ny, nz, dtype}` (dtype 0 = binary32,
//! 1 = binary64), then `nz * ny * nx` values, row-major within a layer,
//! layers in order. A plain-text CSV reader/writer exists for debugging
//! grids up to 64x64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::checksum::ChecksumPair;
use crate::element::{Dtype, Element};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Tile3D};
use crate::offline::Checkpoint;

pub const MAGIC: &[u8; 8] = b"ABFTGRID";
pub const VERSION: u32 = 1;
const CSV_DEBUG_LIMIT: usize = 64;

/// A tile read back from an `ABFTGRID` file, in whichever precision the
/// file declared.
#[derive(Clone, Debug)]
pub enum TileData {
    F32(Tile3D<f32>),
    F64(Tile3D<f64>),
}

pub fn write_tile<T: Element, W: Write>(w: &mut W, tile: &Tile3D<T>) -> Result<()> {
    w.write_all(MAGIC)?;
    for field in [VERSION, tile.nx() as u32, tile.ny() as u32, tile.nz() as u32, T::DTYPE.file_tag()]
    {
        w.write_all(&field.to_le_bytes())?;
    }
    match T::DTYPE {
        Dtype::F32 => {
            for layer in tile.layers() {
                for &v in layer.data() {
                    w.write_all(&(v.to_bits_u64() as u32).to_le_bytes())?;
                }
            }
        }
        Dtype::F64 => {
            for layer in tile.layers() {
                for &v in layer.data() {
                    w.write_all(&v.to_bits_u64().to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_tile_file<T: Element>(path: &Path, tile: &Tile3D<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tile(&mut w, tile)?;
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_tile<R: Read>(r: &mut R) -> Result<TileData> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not an ABFTGRID file".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported ABFTGRID version {version}")));
    }
    let nx = read_u32(r)? as usize;
    let ny = read_u32(r)? as usize;
    let nz = read_u32(r)? as usize;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::Format("zero dimension in header".into()));
    }
    let dtype = read_u32(r)?;
    match dtype {
        0 => {
            let mut layers = Vec::with_capacity(nz);
            let mut buf = vec![0u8; nx * ny * 4];
            for _ in 0..nz {
                r.read_exact(&mut buf)?;
                let data: Vec<f32> = buf
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                layers.push(Grid2D::from_vec(nx, ny, data)?);
            }
            Ok(TileData::F32(Tile3D::from_layers(layers)?))
        }
        1 => {
            let mut layers = Vec::with_capacity(nz);
            let mut buf = vec![0u8; nx * ny * 8];
            for _ in 0..nz {
                r.read_exact(&mut buf)?;
                let data: Vec<f64> = buf
                    .chunks_exact(8)
                    .map(|c| {
                        f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
                    })
                    .collect();
                layers.push(Grid2D::from_vec(nx, ny, data)?);
            }
            Ok(TileData::F64(Tile3D::from_layers(layers)?))
        }
        other => Err(Error::Format(format!("unknown dtype tag {other}"))),
    }
}

pub fn read_tile_file(path: &Path) -> Result<TileData> {
    let mut r = BufReader::new(File::open(path)?);
    read_tile(&mut r)
}

/// Writes a small 2D grid as CSV text, one row of cells per line.
pub fn write_grid_csv<T: Element, W: Write>(w: &mut W, grid: &Grid2D<T>) -> Result<()> {
    if grid.nx() > CSV_DEBUG_LIMIT || grid.ny() > CSV_DEBUG_LIMIT {
        return Err(Error::InvalidParams(format!(
            "CSV debug format is limited to {CSV_DEBUG_LIMIT}x{CSV_DEBUG_LIMIT} grids"
        )));
    }
    for y in 0..grid.ny() {
        let row: Vec<String> = grid.row(y).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a CSV grid written by [`write_grid_csv`].
pub fn read_grid_csv<T: Element, R: Read>(r: &mut R) -> Result<Grid2D<T>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map(T::from_f64)
                    .map_err(|_| Error::Format(format!("bad number on line {}", lineno + 1)))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty CSV grid".into()));
    }
    let nx = rows[0].len();
    let ny = rows.len();
    if nx > CSV_DEBUG_LIMIT || ny > CSV_DEBUG_LIMIT {
        return Err(Error::InvalidParams(format!(
            "CSV debug format is limited to {CSV_DEBUG_LIMIT}x{CSV_DEBUG_LIMIT} grids"
        )));
    }
    let mut data = Vec::with_capacity(nx * ny);
    for (y, row) in rows.into_iter().enumerate() {
        if row.len() != nx {
            return Err(Error::Format(format!("ragged CSV: row {} has {} cells", y + 1, row.len())));
        }
        data.extend(row);
    }
    Grid2D::from_vec(nx, ny, data)
}

fn checksum_json<T: Element>(cs: &ChecksumPair<T>) -> serde_json::Value {
    serde_json::json!({
        "iteration": cs.iteration(),
        "a": cs.a().map(|a| a.iter().map(|v| v.as_f64()).collect::<Vec<f64>>()),
        "b": cs.b().iter().map(|v| v.as_f64()).collect::<Vec<f64>>(),
    })
}

/// Spills a checkpoint for post-mortem inspection: the tile in `ABFTGRID`
/// format at `<stem>.abftgrid` plus a `<stem>.json` sidecar carrying the
/// iteration, the detection settings and the checksum vectors.
pub fn write_checkpoint_spill<T: Element>(
    dir: &Path,
    stem: &str,
    checkpoint: &Checkpoint<T>,
    epsilon: f64,
    delta: usize,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_tile_file(&dir.join(format!("{stem}.abftgrid")), &checkpoint.tile)?;
    let sidecar = serde_json::json!({
        "iteration": checkpoint.iteration,
        "epsilon": epsilon,
        "delta": delta,
        "checksums": checkpoint.checksums.iter().map(checksum_json).collect::<Vec<_>>(),
    });
    let json =
        serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}
