//! VTF tensor container.
//!
//! ```text
//! magic     4 bytes   "VTF1"
//! count     u32 LE
//! record × count:
//!   name_len  u16 LE
//!   name      UTF-8 bytes
//!   rank      u8 (1..=5)
//!   dims      rank × u32 LE
//!   values    product(dims) × f32 LE, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Tensor, MAX_RANK};

pub const MAGIC: &[u8; 4] = b"VTF1";

pub fn write_to<W: Write>(mut w: W, tensors: &[(&str, &Tensor<f32>)]) -> Result<()> {
    let count =
        u32::try_from(tensors.len()).map_err(|_| Error::Format("too many records".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    for (name, t) in tensors {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("name too long: {} bytes", name.len())))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[t.rank() as u8])?;
        for &d in t.dims() {
            let d =
                u32::try_from(d).map_err(|_| Error::Format(format!("extent {d} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated {what}"))
        } else {
            Error::Io(e)
        }
    })
}

pub fn read_from<R: Read>(mut r: R) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "header")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut u32buf = [0u8; 4];
    read_exact(&mut r, &mut u32buf, "header")?;
    let count = u32::from_le_bytes(u32buf) as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let mut u16buf = [0u8; 2];
        read_exact(&mut r, &mut u16buf, "record name")?;
        let mut name = vec![0u8; u16::from_le_bytes(u16buf) as usize];
        read_exact(&mut r, &mut name, "record name")?;
        let name =
            String::from_utf8(name).map_err(|_| Error::Format("name is not UTF-8".into()))?;
        let mut rank = [0u8; 1];
        read_exact(&mut r, &mut rank, "record rank")?;
        let rank = rank[0] as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!(
                "`{name}`: rank {rank} outside 1..={MAX_RANK}"
            )));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            read_exact(&mut r, &mut u32buf, "record dims")?;
            dims.push(u32::from_le_bytes(u32buf) as usize);
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("`{name}`: dims {dims:?} overflow")))?;
        let mut bytes = vec![0u8; len * 4];
        read_exact(&mut r, &mut bytes, "payload")?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let t = Tensor::new(dims, data).map_err(|e| Error::Format(format!("`{name}`: {e}")))?;
        out.push((name, t));
    }
    Ok(out)
}

pub fn save(path: impl AsRef<Path>, tensors: &[(&str, &Tensor<f32>)]) -> Result<()> {
    write_to(BufWriter::new(File::create(path)?), tensors)
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<(String, Tensor<f32>)>> {
    read_from(BufReader::new(File::open(path)?))
}

/// Looks up a record by name.
pub fn take(records: &mut Vec<(String, Tensor<f32>)>, name: &str) -> Result<Tensor<f32>> {
    let pos = records
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::Format(format!("missing record `{name}`")))?;
    Ok(records.remove(pos).1)
}
