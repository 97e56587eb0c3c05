//! Little-endian framing shared by the corpus and checkpoint formats:
//! 8-byte magic, `u64` header length, UTF-8 JSON header, then a payload.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8], header: &impl Serialize) -> Result<Self> {
        let json = serde_json::to_vec(header)?;
        let mut buf = Vec::with_capacity(16 + json.len());
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        Ok(Writer { buf })
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) struct Reader<'a> {
    kind: &'static str,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks the magic and parses the JSON header.
    pub fn open<H: DeserializeOwned>(kind: &'static str, magic: &[u8; 8], data: &'a [u8]) -> Result<(Self, H)> {
        let mut reader = Reader { kind, data, pos: 0 };
        let found = reader.take(8)?;
        if found != magic {
            return Err(Error::BadMagic {
                kind,
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        let len = reader.u64()?;
        let header_at = reader.offset();
        let len = usize::try_from(len).map_err(|_| reader.malformed("header length overflows"))?;
        let raw = reader.take(len)?;
        let header = serde_json::from_slice(raw).map_err(|e| Error::Malformed {
            kind,
            offset: header_at,
            detail: format!("header: {e}"),
        })?;
        Ok((reader, header))
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn malformed(&self, detail: impl Into<String>) -> Error {
        Error::Malformed {
            kind: self.kind,
            offset: self.offset(),
            detail: detail.into(),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.data.len() - self.pos;
        if n > available {
            return Err(Error::Truncated {
                kind: self.kind,
                offset: self.data.len() as u64,
                needed: n - available,
            });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(self.malformed(format!("{} trailing bytes after payload", self.data.len() - self.pos)));
        }
        Ok(())
    }
}
