//! Little-endian binary file helpers shared by the on-disk formats.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Reader wrapper that tracks the byte offset so truncation errors can say
/// where the file ended.
pub(crate) struct CountingReader<R> {
    inner: R,
    pos: u64,
}

impl<R: Read> CountingReader<R> {
    pub fn new(inner: R) -> Self {
        CountingReader { inner, pos: 0 }
    }

    pub fn read_exact_at(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.pos += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::Data(format!(
                "truncated file: expected {what} at byte {}",
                self.pos
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact_at(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn read_u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact_at(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    /// Read `n` little-endian f32 values.
    pub fn read_f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let mut bytes = vec![0u8; n * 4];
        self.read_exact_at(&mut bytes, what)?;
        Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
    }

    /// Fail unless the stream starts with `magic`; `format_name` labels the
    /// error.
    pub fn expect_magic(&mut self, magic: &[u8], format_name: &str) -> Result<()> {
        let mut got = vec![0u8; magic.len()];
        self.read_exact_at(&mut got, "format magic")?;
        if got != magic {
            return Err(Error::Data(format!("not a {format_name} file: bad magic")));
        }
        Ok(())
    }
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, vs: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(vs.len() * 4);
    for v in vs {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}
