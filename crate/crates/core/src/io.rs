//! Snapshot files: raw `.grid` dumps, PGM previews and small CSV tables.
//!
//! `.grid` layout, all little-endian: magic `AMCF`, version `1` (u32), `N`
//! (u32), `dims[N]` (u32), `spacing[N]`, `origin[N]`, `time` (f64), then the
//! values as f32 in row-major order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const GRID_MAGIC: &[u8; 4] = b"AMCF";
pub const GRID_VERSION: u32 = 1;

/// Bytes before the first value of an `n`-dimensional `.grid` file.
pub const fn grid_header_len(n: usize) -> usize {
    4 + 4 + 4 + 4 * n + 8 * (2 * n + 1)
}

pub fn encode_grid(grid: &Grid) -> Vec<u8> {
    let n = grid.dim();
    let mut buf = Vec::with_capacity(grid_header_len(n) + 4 * grid.len());
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    for &d in grid.dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for _ in 0..n {
        buf.extend_from_slice(&grid.dx().to_le_bytes());
    }
    for &o in grid.origin() {
        buf.extend_from_slice(&o.to_le_bytes());
    }
    buf.extend_from_slice(&grid.time.to_le_bytes());
    for &v in &grid.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

pub fn write_grid(grid: &Grid, path: &Path) -> Result<()> {
    std::fs::write(path, encode_grid(grid)).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let end = self.pos + K;
        let bytes = self.data.get(self.pos..end).ok_or_else(|| Error::Format {
            path: self.path.to_path_buf(),
            reason: format!("truncated at byte {}", self.pos),
        })?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length is K"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

pub fn decode_grid(data: &[u8], path: &Path) -> Result<Grid> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut c = Cursor { data, pos: 0, path };
    if &c.take::<4>()? != GRID_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = c.u32()?;
    if version != GRID_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n = c.u32()? as usize;
    if n == 0 || n > 8 {
        return Err(bad(format!("implausible dimension {n}")));
    }
    let dims: Vec<usize> = (0..n).map(|_| c.u32().map(|d| d as usize)).collect::<Result<_>>()?;
    let spacing: Vec<f64> = (0..n).map(|_| c.f64()).collect::<Result<_>>()?;
    let origin: Vec<f64> = (0..n).map(|_| c.f64()).collect::<Result<_>>()?;
    let time = c.f64()?;
    if spacing.iter().any(|&s| s != spacing[0]) {
        return Err(bad("anisotropic spacing is not supported".into()));
    }
    let len: usize = dims.iter().product();
    if data.len() != grid_header_len(n) + 4 * len {
        return Err(bad(format!(
            "expected {} bytes, found {}",
            grid_header_len(n) + 4 * len,
            data.len()
        )));
    }
    let mut g = Grid::new(dims, spacing[0], origin, 0.0).map_err(|e| bad(e.to_string()))?;
    for v in g.values.iter_mut() {
        *v = f32::from_le_bytes(c.take::<4>()?) as f64;
    }
    g.time = time;
    Ok(g)
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    decode_grid(&data, path)
}

/// Binary greymap of a 2-D grid; `-1` maps to 0 and `+1` to 255, values in
/// between linearly. The first axis runs along image columns and the second
/// upwards, so the picture has the usual orientation.
pub fn encode_pgm(grid: &Grid) -> Result<Vec<u8>> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported(format!("PGM of a {}-D grid", grid.dim())));
    }
    let (nx, ny) = (grid.dims()[0], grid.dims()[1]);
    let mut buf = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for j in (0..ny).rev() {
        for i in 0..nx {
            let v = grid.at2(i, j);
            buf.push(((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8);
        }
    }
    Ok(buf)
}

pub fn write_pgm(grid: &Grid, path: &Path) -> Result<()> {
    let buf = encode_pgm(grid)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Header plus string rows, written through the `csv` crate.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fmt = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    w.write_record(header).map_err(fmt)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(fmt)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    inner.flush().map_err(|e| Error::io(path, e))
}
