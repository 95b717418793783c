//! Little-endian primitives shared by the binary file formats.

use std::io::{Read, Write};

use crate::{Error, Result};

pub(crate) struct LeWriter<W: Write>(pub W);

impl<W: Write> LeWriter<W> {
    pub fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.0.write_all(&[v])?)
    }
    pub fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    pub fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    pub fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    pub fn f64s(&mut self, v: &[f64]) -> Result<()> {
        v.iter().try_for_each(|&x| self.f64(x))
    }
    pub fn bytes(&mut self, v: &[u8]) -> Result<()> {
        Ok(self.0.write_all(v)?)
    }
}

pub(crate) struct LeReader<R: Read>(pub R);

impl<R: Read> LeReader<R> {
    fn fill<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("file is truncated".into()),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.fill::<1>()?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.fill()?))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.fill()?))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.fill()?))
    }
    pub fn f64_array<const N: usize>(&mut self) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for x in &mut out {
            *x = self.f64()?;
        }
        Ok(out)
    }
    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got: [u8; 4] = self.fill()?;
        if &got != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }
    pub fn expect_eof(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.0.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes after payload".into())),
        }
    }
}
