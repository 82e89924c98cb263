// SPDX-License-Identifier: MIT OR Apache-2.0

//! Flat binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"RUDR" | version: u32
//! n_layers, d_model, n_heads, d_ff, vocab_size, max_seq_len: u32
//! tied_embeddings: u32 (0 or 1) | seed_lo: u32 | seed_hi: u32
//! parameters as f64, in `Model::named_params` order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{Model, ModelConfig};
use crate::error::{Result, RudderError};

pub const MAGIC: &[u8; 4] = b"RUDR";
pub const VERSION: u32 = 1;

fn u32_field(name: &str, value: usize) -> Result<u32> {
    u32::try_from(value).map_err(|_| RudderError::Checkpoint(format!("{name} does not fit in u32")))
}

pub fn write_checkpoint<W: Write>(model: &Model, mut w: W) -> Result<()> {
    let cfg = &model.config;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for (name, v) in [
        ("n_layers", cfg.n_layers),
        ("d_model", cfg.d_model),
        ("n_heads", cfg.n_heads),
        ("d_ff", cfg.d_ff),
        ("vocab_size", cfg.vocab_size),
        ("max_seq_len", cfg.max_seq_len),
    ] {
        w.write_all(&u32_field(name, v)?.to_le_bytes())?;
    }
    w.write_all(&u32::from(cfg.tied_embeddings).to_le_bytes())?;
    w.write_all(&(cfg.seed as u32).to_le_bytes())?;
    w.write_all(&((cfg.seed >> 32) as u32).to_le_bytes())?;
    for (_, tensor) in model.named_params() {
        for x in tensor {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| RudderError::Checkpoint("truncated header".into()))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Model> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| RudderError::Checkpoint("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(RudderError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(RudderError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 6];
    for d in dims.iter_mut() {
        *d = read_u32(&mut r)? as usize;
    }
    let tied = match read_u32(&mut r)? {
        0 => false,
        1 => true,
        other => return Err(RudderError::Checkpoint(format!("bad tied flag {other}"))),
    };
    let seed = u64::from(read_u32(&mut r)?) | (u64::from(read_u32(&mut r)?) << 32);
    let config = ModelConfig {
        n_layers: dims[0],
        d_model: dims[1],
        n_heads: dims[2],
        d_ff: dims[3],
        vocab_size: dims[4],
        max_seq_len: dims[5],
        tied_embeddings: tied,
        seed,
    };
    let mut model = Model::zeroed(config)?;
    let mut buf = [0u8; 8];
    for (name, tensor) in model.named_params_mut() {
        for x in tensor.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| RudderError::Checkpoint(format!("truncated tensor {name}")))?;
            *x = f64::from_le_bytes(buf);
        }
    }
    if r.read(&mut buf)? != 0 {
        return Err(RudderError::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(model)
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(model, std::io::BufWriter::new(file))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let cfg = ModelConfig {
            tied_embeddings: false,
            seed: 0xDEAD_BEEF_0000_0042,
            ..ModelConfig::tiny(0)
        };
        let model = Model::init(cfg).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"RUDR");
        let header = 4 + 4 + 9 * 4;
        assert_eq!(bytes.len(), header + 8 * model.n_params());
        let back = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let model = Model::init(ModelConfig::tiny(1)).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());

        let short = &bytes[..bytes.len() - 3];
        assert!(read_checkpoint(short).is_err());

        let mut long = bytes.clone();
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
    }
}
