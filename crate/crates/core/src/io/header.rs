use std::str::FromStr;

use crate::error::{Error, Result};

/// Whitespace-separated ASCII tokens at the start of a binary file.
pub(crate) struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn token(&mut self) -> Result<&'a str> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos || self.pos - start > 64 {
            return Err(Error::Format("truncated or malformed header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Format("non-ASCII header".into()))
    }

    pub fn parse_token<T: FromStr>(&mut self) -> Result<T> {
        let t = self.token()?;
        t.parse().map_err(|_| Error::Format(format!("bad header field {t:?}")))
    }

    /// Consumes the single whitespace byte that ends the header and returns
    /// the offset of the data that follows.
    pub fn skip_single_whitespace(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::Format("header not terminated".into())),
        }
    }
}
