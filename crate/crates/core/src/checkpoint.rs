//! Portable checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SPNN"  u32 version
//! u64 len, config text (UTF-8)
//! u64 step, f64 best_dev, u64 best_step
//! u64 len, rng state
//! u64 count, then per tensor: u32 name len, name, u64 rows, u64 cols, rows*cols f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SpinnError};
use crate::tensor::{Float, Matrix};

pub const MAGIC: &[u8; 4] = b"SPNN";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub step: u64,
    pub best_dev: f64,
    pub best_step: u64,
    pub rng: Vec<u8>,
    pub tensors: Vec<(String, Matrix)>,
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| SpinnError::Format(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

fn read_len<R: Read>(r: &mut R, limit: u64, what: &str) -> Result<usize> {
    let n = read_u64(r)?;
    if n > limit {
        return Err(SpinnError::Format(format!("{what} length {n} is implausible")));
    }
    Ok(n as usize)
}

fn read_bytes<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut v = vec![0u8; n];
    r.read_exact(&mut v).map_err(|e| SpinnError::Format(format!("truncated checkpoint: {e}")))?;
    Ok(v)
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Result<&Matrix> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| SpinnError::Format(format!("checkpoint has no tensor {name:?}")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.config.len() as u64).to_le_bytes())?;
        w.write_all(self.config.as_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&self.best_dev.to_le_bytes())?;
        w.write_all(&self.best_step.to_le_bytes())?;
        w.write_all(&(self.rng.len() as u64).to_le_bytes())?;
        w.write_all(&self.rng)?;
        w.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for (name, m) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            let mut buf = Vec::with_capacity(m.len() * 8);
            for &v in m.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let magic: [u8; 4] = read_exact(&mut r)?;
        if &magic != MAGIC {
            return Err(SpinnError::Format("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(read_exact(&mut r)?);
        if version != VERSION {
            return Err(SpinnError::Format(format!("unsupported checkpoint version {version}")));
        }
        let n = read_len(&mut r, 1 << 20, "config")?;
        let config = String::from_utf8(read_bytes(&mut r, n)?)
            .map_err(|_| SpinnError::Format("config text is not UTF-8".into()))?;
        let step = read_u64(&mut r)?;
        let best_dev = f64::from_le_bytes(read_exact(&mut r)?);
        let best_step = read_u64(&mut r)?;
        let n = read_len(&mut r, 1 << 10, "rng state")?;
        let rng = read_bytes(&mut r, n)?;
        let count = read_len(&mut r, 1 << 16, "tensor count")?;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let len = u32::from_le_bytes(read_exact(&mut r)?) as usize;
            if len > 1 << 12 {
                return Err(SpinnError::Format(format!("tensor name length {len} is implausible")));
            }
            let name = String::from_utf8(read_bytes(&mut r, len)?)
                .map_err(|_| SpinnError::Format("tensor name is not UTF-8".into()))?;
            let rows = read_len(&mut r, 1 << 32, "rows")?;
            let cols = read_len(&mut r, 1 << 32, "cols")?;
            let total = rows.checked_mul(cols).filter(|&t| t <= 1 << 31).ok_or_else(|| {
                SpinnError::Format(format!("tensor {name} shape {rows}x{cols} is implausible"))
            })?;
            let raw = read_bytes(&mut r, total * 8)?;
            let data: Vec<Float> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")) as Float)
                .collect();
            tensors.push((name, Matrix::new(rows, cols, data)?));
        }
        Ok(Checkpoint { config, step, best_dev, best_step, rng, tensors })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let f = std::fs::File::create(&tmp)?;
            self.write_to(std::io::BufWriter::new(f))?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejects_garbage() {
        let ck = Checkpoint {
            config: "dim = 3\n".into(),
            step: 7,
            best_dev: 0.5,
            best_step: 4,
            rng: vec![1, 2, 3],
            tensors: vec![("a".into(), Matrix::row_vector(&[1.5, -2.0])), ("b".into(), Matrix::zeros(2, 0))],
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SPNN");
        assert_eq!(Checkpoint::read_from(buf.as_slice()).unwrap(), ck);
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
        assert!(Checkpoint::read_from(&b"XXXX"[..]).is_err());
    }
}
