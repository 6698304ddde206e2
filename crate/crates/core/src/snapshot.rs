//! Binary field snapshots.
//!
//! Layout (little-endian throughout):
//!
//! | bytes | content                         |
//! |-------|---------------------------------|
//! | 4     | magic `b"CNLS"`                 |
//! | 4     | version (`u32`, currently 1)    |
//! | 4     | dimension (`u32`)               |
//! | 4     | points per axis (`u32`)         |
//! | 8     | half width `L` (`f64`)          |
//! | 32    | `p`, `beta`, `omega1`, `omega2` |
//! | 16·Nⁿ | `c1` as interleaved `(re, im)`  |
//! | 16·Nⁿ | `c2` as interleaved `(re, im)`  |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{FieldPair, C64};
use crate::grid::Grid;
use crate::params::SystemParams;

pub const MAGIC: [u8; 4] = *b"CNLS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 56;

pub fn write_snapshot<W: Write>(mut w: W, field: &FieldPair, params: &SystemParams) -> Result<()> {
    let g = field.grid();
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_axis() as u32).to_le_bytes())?;
    for v in [g.half_width(), params.p, params.beta, params.omega1, params.omega2] {
        w.write_all(&v.to_le_bytes())?;
    }
    for j in 0..2 {
        for z in field.component(j) {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(FieldPair, SystemParams)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = u32_at(8) as usize;
    let n = u32_at(12) as usize;
    let half_width = f64_at(16);
    let params = SystemParams {
        p: f64_at(24),
        beta: f64_at(32),
        omega1: f64_at(40),
        omega2: f64_at(48),
    };
    let grid = Grid::new(dim, n, half_width).map_err(|e| Error::Format(e.to_string()))?;
    let mut read_component = || -> Result<Vec<C64>> {
        let mut buf = vec![0u8; grid.len() * 16];
        r.read_exact(&mut buf)
            .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
        Ok(buf
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    };
    let c1 = read_component()?;
    let c2 = read_component()?;
    Ok((FieldPair::new(&grid, c1, c2)?, params))
}

pub fn save(path: impl AsRef<Path>, field: &FieldPair, params: &SystemParams) -> Result<()> {
    write_snapshot(BufWriter::new(File::create(path)?), field, params)
}

pub fn load(path: impl AsRef<Path>) -> Result<(FieldPair, SystemParams)> {
    read_snapshot(BufReader::new(File::open(path)?))
}
