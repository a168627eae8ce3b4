//! Grid artifacts on disk.
//!
//! Raw format (bit-exact):
//!   magic  8 bytes  b"HLMGRID1"
//!   nx     u32 LE
//!   ny     u32 LE
//!   bbox   4 x f64 LE  (x0, x1, y0, y1)
//!   data   nx*ny pairs of f64 LE (re, im), row-major from y0;
//!          masked points carry NaN in both slots.
//!
//! Text format: CSV with a header row, full float64 precision.
//! PGM format: 8-bit magnitude image, linear clamp at a configured max.

use anyhow::{bail, Context};
use helmarc::{FieldGrid, GridSpec};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"HLMGRID1";

pub fn write_raw(path: &Path, grid: &FieldGrid) -> anyhow::Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(32 + 16 * grid.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(grid.spec.nx as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.spec.ny as u32).to_le_bytes());
    for v in grid.spec.bbox {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for (v, &masked) in grid.values.iter().zip(&grid.mask) {
        let (re, im) = if masked { (f64::NAN, f64::NAN) } else { (v.re, v.im) };
        buf.extend_from_slice(&re.to_le_bytes());
        buf.extend_from_slice(&im.to_le_bytes());
    }
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

pub fn read_raw(path: &Path) -> anyhow::Result<FieldGrid> {
    let mut file =
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut header = [0u8; 8];
    file.read_exact(&mut header)?;
    if &header != MAGIC {
        bail!("{} is not a raw grid file", path.display());
    }
    let mut u32buf = [0u8; 4];
    file.read_exact(&mut u32buf)?;
    let nx = u32::from_le_bytes(u32buf) as usize;
    file.read_exact(&mut u32buf)?;
    let ny = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    let mut bbox = [0.0; 4];
    for b in &mut bbox {
        file.read_exact(&mut f64buf)?;
        *b = f64::from_le_bytes(f64buf);
    }
    let mut values = Vec::with_capacity(nx * ny);
    let mut mask = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        file.read_exact(&mut f64buf)?;
        let re = f64::from_le_bytes(f64buf);
        file.read_exact(&mut f64buf)?;
        let im = f64::from_le_bytes(f64buf);
        mask.push(re.is_nan() && im.is_nan());
        values.push(helmarc::C64::new(re, im));
    }
    Ok(FieldGrid { spec: GridSpec { bbox, nx, ny }, values, mask })
}

pub fn write_text(path: &Path, grid: &FieldGrid) -> anyhow::Result<()> {
    let mut out = String::with_capacity(grid.values.len() * 64);
    out.push_str("x,y,re,im\n");
    let [x0, x1, y0, y1] = grid.spec.bbox;
    for iy in 0..grid.spec.ny {
        let y = if grid.spec.ny > 1 {
            y0 + (y1 - y0) * iy as f64 / (grid.spec.ny - 1) as f64
        } else {
            y0
        };
        for ix in 0..grid.spec.nx {
            let x = if grid.spec.nx > 1 {
                x0 + (x1 - x0) * ix as f64 / (grid.spec.nx - 1) as f64
            } else {
                x0
            };
            let i = iy * grid.spec.nx + ix;
            let (re, im) = if grid.mask[i] {
                (f64::NAN, f64::NAN)
            } else {
                (grid.values[i].re, grid.values[i].im)
            };
            out.push_str(&format!("{x:.17e},{y:.17e},{re:.17e},{im:.17e}\n"));
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Parse the text format back (the grid shape is recovered from the
/// coordinate pattern).
pub fn read_text(path: &Path) -> anyhow::Result<FieldGrid> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut xs: Vec<f64> = Vec::new();
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || -> anyhow::Result<f64> {
            let s = parts.next().ok_or_else(|| anyhow::anyhow!("short row {ln}"))?;
            Ok(s.parse::<f64>()?)
        };
        let row = (next()?, next()?, next()?, next()?);
        if rows.is_empty() || row.1 == rows[0].1 {
            xs.push(row.0);
        }
        rows.push(row);
    }
    let nx = xs.len();
    if nx == 0 || rows.len() % nx != 0 {
        bail!("text grid is not rectangular");
    }
    let ny = rows.len() / nx;
    let bbox = [rows[0].0, rows[nx - 1].0, rows[0].1, rows[rows.len() - 1].1];
    let mut values = Vec::with_capacity(rows.len());
    let mut mask = Vec::with_capacity(rows.len());
    for &(_, _, re, im) in &rows {
        mask.push(re.is_nan() && im.is_nan());
        values.push(helmarc::C64::new(re, im));
    }
    Ok(FieldGrid { spec: GridSpec { bbox, nx, ny }, values, mask })
}

/// 8-bit magnitude image; masked points map to black. `clamp_max` of None
/// uses the largest unmasked magnitude.
pub fn write_pgm(path: &Path, grid: &FieldGrid, clamp_max: Option<f64>) -> anyhow::Result<()> {
    let max = clamp_max.unwrap_or_else(|| {
        grid.values
            .iter()
            .zip(&grid.mask)
            .filter(|(_, &m)| !m)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    });
    let max = if max > 0.0 { max } else { 1.0 };
    let mut out = Vec::with_capacity(64 + grid.values.len());
    write!(out, "P5\n{} {}\n255\n", grid.spec.nx, grid.spec.ny)?;
    // image rows top-down: flip y so the picture reads naturally
    for iy in (0..grid.spec.ny).rev() {
        for ix in 0..grid.spec.nx {
            let i = iy * grid.spec.nx + ix;
            let byte = if grid.mask[i] {
                0u8
            } else {
                let v = (grid.values[i].norm() / max).clamp(0.0, 1.0);
                (v * 255.0).round() as u8
            };
            out.push(byte);
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
