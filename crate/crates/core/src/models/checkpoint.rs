//! Binary checkpoint format.
//!
//! Layout: magic `I2IU`, version u32 LE, array count u32 LE, then per array
//! a name (u16 LE length + UTF-8 bytes), rank u8, dims (u32 LE each) and the
//! payload as IEEE-754 f64 LE values; the file ends with a CRC32 (LE) of all
//! bytes between the header and the checksum. Training metadata rides along
//! as reserved `__meta.*` arrays so the framing stays uniform.

use crate::numerics::Tensor;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"I2IU";
const VERSION: u32 = 1;

/// Provenance of a checkpoint: enough to reproduce or audit the run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epochs: u32,
    pub config_hash: String,
}

/// Named parameter arrays plus metadata. Array order is preserved and the
/// save → load round trip is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arrays: Vec<(String, Tensor)>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta) -> Self {
        Checkpoint { arrays: Vec::new(), meta }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.arrays.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint missing array '{}'", name)))
    }
}

fn meta_arrays(meta: &CheckpointMeta) -> Vec<(String, Tensor)> {
    let seed = Tensor::new(
        vec![2],
        vec![(meta.seed >> 32) as f64, (meta.seed & 0xffff_ffff) as f64],
    )
    .expect("fixed shape");
    let epochs = Tensor::new(vec![1], vec![meta.epochs as f64]).expect("fixed shape");
    let hash = Tensor::new(
        vec![meta.config_hash.len()],
        meta.config_hash.bytes().map(|b| b as f64).collect(),
    )
    .expect("fixed shape");
    vec![
        ("__meta.seed".into(), seed),
        ("__meta.epochs".into(), epochs),
        ("__meta.config_hash".into(), hash),
    ]
}

fn meta_from_arrays(arrays: &[(String, Tensor)], path: &str) -> Result<CheckpointMeta> {
    let find = |name: &str| {
        arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::format(path, format!("missing {}", name)))
    };
    let seed_t = find("__meta.seed")?;
    if seed_t.len() != 2 {
        return Err(Error::format(path, "malformed __meta.seed"));
    }
    let seed = ((seed_t.data()[0] as u64) << 32) | (seed_t.data()[1] as u64);
    let epochs = find("__meta.epochs")?.data()[0] as u32;
    let hash_bytes: Vec<u8> = find("__meta.config_hash")?
        .data()
        .iter()
        .map(|&v| v as u8)
        .collect();
    let config_hash = String::from_utf8(hash_bytes)
        .map_err(|_| Error::format(path, "config hash is not UTF-8"))?;
    Ok(CheckpointMeta { seed, epochs, config_hash })
}

macro_rules! params_io {
    ($to:ident, $from:ident, $ty:ident, $prefix:literal) => {
        pub fn $to(params: &$ty, ckpt: &mut Checkpoint) {
            for (name, tensor) in params.named() {
                ckpt.push(format!(concat!($prefix, ".{}"), name), tensor.clone());
            }
        }

        pub fn $from(ckpt: &Checkpoint) -> Result<$ty> {
            let g = |n: &str| ckpt.require(&format!(concat!($prefix, ".{}"), n)).cloned();
            Ok($ty {
                w1: g("w1")?,
                b1: g("b1")?,
                w2: g("w2")?,
                b2: g("b2")?,
                w3: g("w3")?,
                b3: g("b3")?,
            })
        }
    };
}

use super::{DecoderParams, EncoderParams, ProbeParams};

params_io!(encoder_to_checkpoint, encoder_from_checkpoint, EncoderParams, "enc");
params_io!(decoder_to_checkpoint, decoder_from_checkpoint, DecoderParams, "dec");
params_io!(probe_to_checkpoint, probe_from_checkpoint, ProbeParams, "probe");

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let p = path.display().to_string();
    let mut body: Vec<u8> = Vec::new();
    let all: Vec<(String, Tensor)> = ckpt
        .arrays
        .iter()
        .cloned()
        .chain(meta_arrays(&ckpt.meta))
        .collect();
    for (name, tensor) in &all {
        let name_bytes = name.as_bytes();
        body.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        body.extend_from_slice(name_bytes);
        body.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            body.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            body.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&body);

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&p, e))?;
    file.write_all(MAGIC).map_err(|e| Error::io(&p, e))?;
    file.write_all(&VERSION.to_le_bytes()).map_err(|e| Error::io(&p, e))?;
    file.write_all(&(all.len() as u32).to_le_bytes())
        .map_err(|e| Error::io(&p, e))?;
    file.write_all(&body).map_err(|e| Error::io(&p, e))?;
    file.write_all(&crc.to_le_bytes()).map_err(|e| Error::io(&p, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let p = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(&p, e))?;
    if bytes.len() < 16 {
        return Err(Error::format(&p, "file shorter than checkpoint framing"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(&p, "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(&p, format!("unsupported version {}", version)));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..bytes.len() - 4];
    let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::format(&p, "checksum mismatch"));
    }

    let mut arrays = Vec::with_capacity(count);
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > body.len() {
            return Err(Error::format(&p, "truncated array record"));
        }
        let s = &body[*off..*off + n];
        *off += n;
        Ok(s)
    };
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut off, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut off, name_len)?.to_vec())
            .map_err(|_| Error::format(&p, "array name is not UTF-8"))?;
        let rank = take(&mut off, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let raw = take(&mut off, n * 8)?;
        for chunk in raw.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        arrays.push((name, Tensor::new(shape, data)?));
    }
    if off != body.len() {
        return Err(Error::format(&p, "trailing bytes after last array"));
    }

    let meta = meta_from_arrays(&arrays, &p)?;
    arrays.retain(|(n, _)| !n.starts_with("__meta."));
    Ok(Checkpoint { arrays, meta })
}
