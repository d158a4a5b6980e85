//! On-disk cache of frame Gram matrices.
//!
//! File layout (little endian): 8-byte magic, then `u64` header fields
//! `version, d, n, J, m, base_level, p`, then the two `p × p` Gram matrices
//! (full and interior quadrature) as `f64`. A file whose header does not
//! match the requested frame is ignored and rewritten.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{Frame, FrameOptions};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::numerics::Grid;
use crate::scalar::Real;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "INVLAB_CACHE";

const MAGIC: &[u8; 8] = b"INVLFRM\0";
const VERSION: u64 = 1;

fn file_name(grid: &Grid, j: usize, o: &FrameOptions) -> String {
    format!(
        "frame_d{}_n{}_J{}_m{}_b{}.bin",
        grid.d(),
        grid.n(),
        j,
        o.order,
        o.base_level
    )
}

fn header(grid: &Grid, j: usize, o: &FrameOptions, p: usize) -> [u64; 7] {
    [
        VERSION,
        grid.d() as u64,
        grid.n() as u64,
        j as u64,
        o.order as u64,
        o.base_level as u64,
        p as u64,
    ]
}

/// Builds the frame, reusing Gram matrices from `dir` (or from the directory
/// in `INVLAB_CACHE` when `dir` is `None`) if a matching file exists.
/// Without any cache directory this is [`Frame::with_options`].
pub fn load_or_build<T: Real>(
    dir: Option<&Path>,
    grid: Grid,
    j: usize,
    options: FrameOptions,
) -> Result<Frame<T>> {
    let dir: Option<PathBuf> = match dir {
        Some(d) => Some(d.to_path_buf()),
        None => std::env::var_os(CACHE_ENV).map(PathBuf::from),
    };
    let Some(dir) = dir else {
        return Frame::with_options(grid, j, options);
    };
    let path = dir.join(file_name(&grid, j, &options));
    if let Some(frame) = read(&path, grid, j, options)? {
        log::debug!("frame cache hit {}", path.display());
        return Ok(frame);
    }
    let frame = Frame::with_options(grid, j, options)?;
    fs::create_dir_all(&dir)?;
    write(&path, &frame)?;
    Ok(frame)
}

fn read<T: Real>(
    path: &Path,
    grid: Grid,
    j: usize,
    options: FrameOptions,
) -> Result<Option<Frame<T>>> {
    let mut bytes = Vec::new();
    match fs::File::open(path) {
        Ok(mut f) => f.read_to_end(&mut bytes)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if bytes.len() < 8 + 7 * 8 || &bytes[..8] != MAGIC {
        return Ok(None);
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    let p = word(6) as usize;
    if (0..7).map(word).collect::<Vec<_>>() != header(&grid, j, &options, p) {
        return Ok(None);
    }
    let body = &bytes[8 + 7 * 8..];
    if body.len() != 2 * p * p * 8 {
        return Ok(None);
    }
    let mut vals = body
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())));
    let full: Vec<T> = vals.by_ref().take(p * p).collect();
    let interior: Vec<T> = vals.collect();
    let full = DenseMatrix::from_row_major(p, p, full)?;
    let interior = DenseMatrix::from_row_major(p, p, interior)?;
    match Frame::from_grams(grid, j, options, full, interior) {
        Ok(f) => Ok(Some(f)),
        Err(Error::InvalidInput(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn write<T: Real>(path: &Path, frame: &Frame<T>) -> Result<()> {
    let p = frame.len();
    let mut buf = Vec::with_capacity(8 + 7 * 8 + 2 * p * p * 8);
    buf.extend_from_slice(MAGIC);
    for w in header(frame.grid(), frame.j(), &frame.options(), p) {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    for g in [frame.gram(), frame.interior_gram()] {
        for &v in g.as_slice() {
            buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    // Write to a sibling file first so concurrent readers never see a torn blob.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
