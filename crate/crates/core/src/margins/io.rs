//! Marginal-model persistence and CSV export.
//!
//! HZGM layout (little-endian):
//!
//! ```text
//! magic  "HZGM"            4 bytes
//! ver    u32               format version (1)
//! C,H,W  u32 x3
//! n      u64               table length (shared by every pixel-channel)
//! block  u32               block_days used for the GEV fit
//! names  per channel: u16 length + utf-8 bytes
//! mask   H*W bytes
//! then one record per valid pixel-channel, channel-major row-major:
//!        f64 shape, f64 location, f64 scale, f64 log-likelihood,
//!        u8 converged, n x f64 sorted table
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};

use super::{GevParams, MarginalModel, PixelMarginal};

const MAGIC: &[u8; 4] = b"HZGM";
const VERSION: u32 = 1;

pub(super) fn save_model(model: &MarginalModel, path: &Path) -> Result<()> {
    let table_len = model
        .marginals
        .iter()
        .flatten()
        .map(|pm| pm.table.len())
        .next()
        .ok_or_else(|| Error::InvalidArgument("model has no fitted marginals".into()))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(model.channels as u32)?;
    w.write_u32::<LittleEndian>(model.height as u32)?;
    w.write_u32::<LittleEndian>(model.width as u32)?;
    w.write_u64::<LittleEndian>(table_len as u64)?;
    w.write_u32::<LittleEndian>(model.block_days as u32)?;
    for name in &model.channel_names {
        let bytes = name.as_bytes();
        w.write_u16::<LittleEndian>(bytes.len() as u16)?;
        w.write_all(bytes)?;
    }
    for &m in model.valid_mask.iter() {
        w.write_u8(m as u8)?;
    }
    for pm in model.marginals.iter().flatten() {
        w.write_f64::<LittleEndian>(pm.gev.shape())?;
        w.write_f64::<LittleEndian>(pm.gev.location())?;
        w.write_f64::<LittleEndian>(pm.gev.scale())?;
        w.write_f64::<LittleEndian>(pm.log_likelihood)?;
        w.write_u8(pm.converged as u8)?;
        for &t in &pm.table {
            w.write_f64::<LittleEndian>(t)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(super) fn load_model(path: &Path) -> Result<MarginalModel> {
    let mut r = BufReader::new(File::open(path)?);
    let err = |msg: &str| Error::format(0, msg.to_string());

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(err("bad magic, expected \"HZGM\""));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(err(&format!("unsupported version {}", version)));
    }
    let c = r.read_u32::<LittleEndian>()? as usize;
    let h = r.read_u32::<LittleEndian>()? as usize;
    let w = r.read_u32::<LittleEndian>()? as usize;
    let table_len = r.read_u64::<LittleEndian>()? as usize;
    let block_days = r.read_u32::<LittleEndian>()? as usize;
    if c == 0 || h == 0 || w == 0 || table_len == 0 || block_days == 0 {
        return Err(err("dimension mismatch in header"));
    }

    let mut channel_names = Vec::with_capacity(c);
    for _ in 0..c {
        let len = r.read_u16::<LittleEndian>()? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        channel_names.push(
            String::from_utf8(buf).map_err(|_| err("channel name is not valid utf-8"))?,
        );
    }

    let mut mask_bytes = vec![0u8; h * w];
    r.read_exact(&mut mask_bytes)?;
    let valid_mask =
        Array2::from_shape_vec((h, w), mask_bytes.iter().map(|&b| b == 1).collect())
            .expect("mask shape");

    let mut marginals = vec![None; c * h * w];
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                if !valid_mask[[y, x]] {
                    continue;
                }
                let shape = r.read_f64::<LittleEndian>()?;
                let location = r.read_f64::<LittleEndian>()?;
                let scale = r.read_f64::<LittleEndian>()?;
                let log_likelihood = r.read_f64::<LittleEndian>()?;
                let converged = r.read_u8()? != 0;
                let mut table = vec![0.0f64; table_len];
                r.read_f64_into::<LittleEndian>(&mut table)?;
                marginals[(ci * h + y) * w + x] = Some(PixelMarginal {
                    table,
                    gev: GevParams::new(shape, location, scale)?,
                    log_likelihood,
                    converged,
                });
            }
        }
    }

    Ok(MarginalModel {
        channels: c,
        height: h,
        width: w,
        channel_names,
        valid_mask,
        marginals,
        block_days,
    })
}

/// No-data sentinel written into exported CSV maps.
pub const NO_DATA: f64 = -999.0;

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|ch| if ch.is_ascii_alphanumeric() { ch.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Write per-channel shape/location/scale maps as `gev_<param>_<channel>.csv`
/// grids (H rows of W values, masked cells as [`NO_DATA`]). Returns the
/// paths written.
pub fn export_parameter_maps(model: &MarginalModel, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let (shape, location, scale) = model.parameter_maps();
    let mut written = Vec::new();
    for (label, map) in [("shape", &shape), ("location", &location), ("scale", &scale)] {
        for (ci, name) in model.channel_names().iter().enumerate() {
            let path = dir.join(format!("gev_{}_{}.csv", label, sanitize(name)));
            let mut out = BufWriter::new(File::create(&path)?);
            for y in 0..model.height() {
                let row: Vec<String> = (0..model.width())
                    .map(|x| {
                        let v = map[[ci, y, x]];
                        if v.is_nan() {
                            NO_DATA.to_string()
                        } else {
                            v.to_string()
                        }
                    })
                    .collect();
                writeln!(out, "{}", row.join(","))?;
            }
            out.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
