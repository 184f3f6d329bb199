//! Binary model checkpoints.
//!
//! Layout, all little-endian: magic `CVRM`, format version (u32), flags
//! (u32, bit 0 = salted hashing), d (u32), alpha (f64), rows trained
//! (u64), then d weights (f64) and d touch counts (u64). Loading
//! validates the vector lengths against d.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CvrModel, HashMode, ModelError};

const MAGIC: &[u8; 4] = b"CVRM";
const FORMAT_VERSION: u32 = 1;
const FLAG_SALTED: u32 = 1;

/// Serializes `model` to a writer.
pub fn save_checkpoint<W: Write>(model: &CvrModel, w: &mut W) -> Result<(), ModelError> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let flags = match model.mode() {
        HashMode::Direct => 0,
        HashMode::Salted => FLAG_SALTED,
    };
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&model.d().to_le_bytes())?;
    w.write_all(&model.alpha().to_le_bytes())?;
    w.write_all(&model.rows_trained().to_le_bytes())?;
    for weight in model.weights() {
        w.write_all(&weight.to_le_bytes())?;
    }
    for count in model.counts() {
        w.write_all(&count.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a model back from a reader.
pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<CvrModel, ModelError> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let flags = read_u32(r)?;
    let mode = if flags & FLAG_SALTED != 0 {
        HashMode::Salted
    } else {
        HashMode::Direct
    };
    let d = read_u32(r)?;
    let alpha = f64::from_bits(read_u64(r)?);
    let rows_trained = read_u64(r)?;

    let mut weights = vec![0.0f64; d as usize];
    for w in &mut weights {
        *w = f64::from_bits(read_u64(r)?);
    }
    let mut counts = vec![0u64; d as usize];
    for c in &mut counts {
        *c = read_u64(r)?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    CvrModel::from_parts(d, alpha, mode, weights, counts, rows_trained)
}

/// Writes a checkpoint file at `path`.
pub fn write_checkpoint(model: &CvrModel, path: &Path) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    save_checkpoint(model, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Loads a checkpoint file from `path`.
pub fn load_checkpoint(path: &Path) -> Result<CvrModel, ModelError> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), ModelError> {
    r.read_exact(buf)
        .map_err(|_| ModelError::Checkpoint("truncated file".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ModelError> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, ModelError> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
