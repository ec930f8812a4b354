//! HZG flat binary dataset files.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic  "HZG1"                      4 bytes
//! C      u32   channels
//! H      u32   grid height
//! W      u32   grid width
//! N      u64   number of fields
//! cad    u8    cadence code (0 = hourly, 1 = daily-max)
//! mask   H*W bytes, 0 = no-data, 1 = valid, row-major
//! data   N*C*H*W f64, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Array4};

use crate::error::{Error, Result};

use super::{default_channel_names, Cadence, Dataset, SplitTag};

const MAGIC: &[u8; 4] = b"HZG1";

struct Counting<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Counting<R> {
    fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::format(self.offset, message)
    }
}

impl<R: Read> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.offset += n as u64;
        Ok(n)
    }
}

fn map_eof(offset: u64, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::format(offset, "truncated file")
    } else {
        Error::Io(e)
    }
}

/// Write a dataset to an HZG file. The split tag is not persisted; it
/// describes the dataset's role in a run, not its contents.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(dataset.channels() as u32)?;
    w.write_u32::<LittleEndian>(dataset.height() as u32)?;
    w.write_u32::<LittleEndian>(dataset.width() as u32)?;
    w.write_u64::<LittleEndian>(dataset.len() as u64)?;
    w.write_u8(dataset.cadence().code())?;
    for &m in dataset.valid_mask().iter() {
        w.write_u8(m as u8)?;
    }
    for &v in dataset.values().iter() {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

/// Read an HZG file. Loaded datasets are tagged [`SplitTag::Train`];
/// retag with [`Dataset::with_split_tag`] as needed.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut r = Counting::new(BufReader::new(File::open(path)?));

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| map_eof(r.offset, e))?;
    if &magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {:?}, expected \"HZG1\"", magic)));
    }

    let c = r.read_u32::<LittleEndian>().map_err(|e| map_eof(r.offset, e))? as usize;
    let h = r.read_u32::<LittleEndian>().map_err(|e| map_eof(r.offset, e))? as usize;
    let w = r.read_u32::<LittleEndian>().map_err(|e| map_eof(r.offset, e))? as usize;
    let n = r.read_u64::<LittleEndian>().map_err(|e| map_eof(r.offset, e))? as usize;
    if n == 0 {
        return Err(r.err("empty dataset"));
    }
    if c == 0 || h == 0 || w == 0 {
        return Err(r.err(format!("dimension mismatch: C={} H={} W={}", c, h, w)));
    }
    let cad_code = r.read_u8().map_err(|e| map_eof(r.offset, e))?;
    let cadence = Cadence::from_code(cad_code)
        .ok_or_else(|| r.err(format!("unknown cadence code {}", cad_code)))?;

    let mut mask_bytes = vec![0u8; h * w];
    r.read_exact(&mut mask_bytes).map_err(|e| map_eof(r.offset, e))?;
    for (i, &b) in mask_bytes.iter().enumerate() {
        if b > 1 {
            return Err(r.err(format!("mask byte {} has value {}, expected 0 or 1", i, b)));
        }
    }
    let mask = Array2::from_shape_vec((h, w), mask_bytes.iter().map(|&b| b == 1).collect())
        .expect("mask shape");

    let total = n * c * h * w;
    let mut values = vec![0.0f64; total];
    r.read_f64_into::<LittleEndian>(&mut values)
        .map_err(|e| map_eof(r.offset, e))?;

    // anything after the value block is a malformed file
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::format(r.offset - 1, "trailing bytes after value block"));
    }

    let values = Array4::from_shape_vec((n, c, h, w), values).expect("value shape");
    Dataset::from_values(values, default_channel_names(c), mask, cadence, SplitTag::Train)
}
