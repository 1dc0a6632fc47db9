//! Packed binary sequences and their on-disk formats.
//!
//! Bits are packed most-significant-bit first within each byte. Pad bits in
//! the last byte are always zero.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Magic prefix of the binary bit-file format.
pub const BIT_FILE_MAGIC: &[u8; 8] = b"QRNGBITS";
/// Header length of the binary bit-file format (magic + little-endian u64 bit count).
pub const BIT_FILE_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum BitsError {
    #[error("invalid character {0:?} in ASCII bit data")]
    InvalidAscii(char),
    #[error("bad bit-file magic")]
    BadMagic,
    #[error("bit file truncated: header says {expected} bits, payload holds {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("bit file has non-zero pad bits")]
    DirtyPadding,
    #[error("range {start}..{end} out of bounds for {len} bits")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("length mismatch: {0} vs {1} bits")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A packed binary sequence with an exact bit length.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: usize,
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "BitStream({})", self.to_ascii())
        } else {
            write!(f, "BitStream({} bits)", self.len)
        }
    }
}

/// Serialised as a string of `0`/`1` characters.
impl serde::Serialize for BitStream {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_ascii())
    }
}

impl<'de> serde::Deserialize<'de> for BitStream {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        Self::from_ascii(&text).map_err(serde::de::Error::custom)
    }
}

impl BitStream {
    pub fn zeros(len: usize) -> Self {
        Self {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    /// Wraps packed bytes; bits past `len` are cleared.
    pub fn from_bytes(mut bytes: Vec<u8>, len: usize) -> Result<Self, BitsError> {
        let needed = len.div_ceil(8);
        if bytes.len() < needed {
            return Err(BitsError::Truncated {
                expected: len as u64,
                actual: bytes.len() as u64 * 8,
            });
        }
        bytes.truncate(needed);
        let mut s = Self { bytes, len };
        s.clear_padding();
        Ok(s)
    }

    pub fn from_ascii(text: &str) -> Result<Self, BitsError> {
        let mut out = Self::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                c if c.is_whitespace() => {}
                c => return Err(BitsError::InvalidAscii(c)),
            }
        }
        Ok(out)
    }

    /// Builds from 0/1 bytes (any non-zero byte counts as 1).
    pub fn from_unpacked(bits: &[u8]) -> Self {
        let mut bytes = vec![0u8; bits.len().div_ceil(8)];
        for (chunk, byte) in bits.chunks(8).zip(bytes.iter_mut()) {
            let mut b = 0u8;
            for (k, &bit) in chunk.iter().enumerate() {
                if bit != 0 {
                    b |= 0x80 >> k;
                }
            }
            *byte = b;
        }
        Self {
            bytes,
            len: bits.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for {} bits", self.len);
        self.bytes[i >> 3] & (0x80 >> (i & 7)) != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for {} bits", self.len);
        let mask = 0x80 >> (i & 7);
        if value {
            self.bytes[i >> 3] |= mask;
        } else {
            self.bytes[i >> 3] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if value {
            self.bytes[self.len >> 3] |= 0x80 >> (self.len & 7);
        }
        self.len += 1;
    }

    pub fn extend_from(&mut self, other: &BitStream) {
        if self.len % 8 == 0 {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
        } else {
            for bit in other.iter() {
                self.push(bit);
            }
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bytes[i >> 3] & (0x80 >> (i & 7)) != 0)
    }

    /// One byte (0 or 1) per bit.
    pub fn to_unpacked(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len);
        for &b in &self.bytes {
            for k in 0..8 {
                out.push((b >> (7 - k)) & 1);
            }
        }
        out.truncate(self.len);
        out
    }

    pub fn to_ascii(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    pub fn count_ones(&self) -> u64 {
        self.bytes.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    /// True when every bit has the same value (or the stream is empty).
    pub fn is_constant(&self) -> bool {
        let ones = self.count_ones();
        ones == 0 || ones == self.len as u64
    }

    pub fn complement(&self) -> Self {
        let mut out = Self {
            bytes: self.bytes.iter().map(|b| !b).collect(),
            len: self.len,
        };
        out.clear_padding();
        out
    }

    pub fn xor(&self, other: &BitStream) -> Result<Self, BitsError> {
        if self.len != other.len {
            return Err(BitsError::LengthMismatch(self.len, other.len));
        }
        Ok(Self {
            bytes: self
                .bytes
                .iter()
                .zip(&other.bytes)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        })
    }

    pub fn slice(&self, start: usize, end: usize) -> Result<Self, BitsError> {
        if start > end || end > self.len {
            return Err(BitsError::OutOfRange {
                start,
                end,
                len: self.len,
            });
        }
        let len = end - start;
        if start % 8 == 0 {
            let first = start / 8;
            return Self::from_bytes(self.bytes[first..first + len.div_ceil(8)].to_vec(), len);
        }
        let mut out = Self::with_capacity(len);
        for i in start..end {
            out.push(self.get(i));
        }
        Ok(out)
    }

    /// Splits into `count` consecutive streams of `len / count` bits each; the
    /// remainder is dropped and returned as the second element.
    pub fn split_streams(&self, count: usize) -> (Vec<BitStream>, usize) {
        assert!(count > 0, "stream count must be positive");
        let each = self.len / count;
        let streams = (0..count)
            .map(|k| {
                self.slice(k * each, (k + 1) * each)
                    .expect("split bounds are within the stream")
            })
            .collect();
        (streams, self.len - each * count)
    }

    /// Packs bits into u64 words, MSB-first, zero padded.
    pub fn to_words(&self) -> Vec<u64> {
        self.bytes
            .chunks(8)
            .map(|chunk| {
                let mut w = [0u8; 8];
                w[..chunk.len()].copy_from_slice(chunk);
                u64::from_be_bytes(w)
            })
            .collect()
    }

    pub fn from_words(words: &[u64], len: usize) -> Self {
        let mut bytes: Vec<u8> = words.iter().flat_map(|w| w.to_be_bytes()).collect();
        bytes.truncate(len.div_ceil(8));
        let mut out = Self { bytes, len };
        out.clear_padding();
        out
    }

    fn clear_padding(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xFFu8 << (8 - rem);
            }
        }
    }

    fn padding_is_clean(&self) -> bool {
        let rem = self.len % 8;
        rem == 0 || self.bytes.last().is_none_or(|b| b & !(0xFFu8 << (8 - rem)) == 0)
    }

    /// Writes the 16-byte header followed by the packed payload.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), BitsError> {
        w.write_all(BIT_FILE_MAGIC)?;
        w.write_all(&(self.len as u64).to_le_bytes())?;
        w.write_all(&self.bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, BitsError> {
        let mut header = [0u8; BIT_FILE_HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[..8] != BIT_FILE_MAGIC {
            return Err(BitsError::BadMagic);
        }
        let len = u64::from_le_bytes(header[8..].try_into().expect("8 header bytes"));
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let needed = len.div_ceil(8);
        if (bytes.len() as u64) < needed {
            return Err(BitsError::Truncated {
                expected: len,
                actual: bytes.len() as u64 * 8,
            });
        }
        bytes.truncate(needed as usize);
        let out = Self {
            bytes,
            len: len as usize,
        };
        if !out.padding_is_clean() {
            return Err(BitsError::DirtyPadding);
        }
        Ok(out)
    }

    /// ASCII '0'/'1' characters followed by a single newline.
    pub fn write_ascii<W: Write>(&self, mut w: W) -> Result<(), BitsError> {
        let mut line = Vec::with_capacity(self.len + 1);
        line.extend(self.iter().map(|b| if b { b'1' } else { b'0' }));
        line.push(b'\n');
        w.write_all(&line)?;
        Ok(())
    }

    pub fn read_ascii<R: Read>(r: R) -> Result<Self, BitsError> {
        let mut out = Self::default();
        for line in BufReader::new(r).lines() {
            for c in line?.chars() {
                match c {
                    '0' => out.push(false),
                    '1' => out.push(true),
                    c if c.is_whitespace() => {}
                    c => return Err(BitsError::InvalidAscii(c)),
                }
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path, format: BitFormat) -> Result<(), BitsError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        match format {
            BitFormat::Binary => self.write_binary(&mut w)?,
            BitFormat::Ascii => self.write_ascii(&mut w)?,
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a bit file, sniffing the format from the magic.
    pub fn load(path: &Path) -> Result<Self, BitsError> {
        let data = fs::read(path)?;
        if data.starts_with(BIT_FILE_MAGIC) {
            Self::read_binary(&data[..])
        } else {
            Self::read_ascii(&data[..])
        }
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = Self::default();
        for b in iter {
            out.push(b);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitFormat {
    #[default]
    Binary,
    Ascii,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_packing() {
        let s = BitStream::from_ascii("1000000001").unwrap();
        assert_eq!(s.as_bytes(), &[0x80, 0x40]);
        assert_eq!(s.len(), 10);
    }

    #[test]
    fn binary_header_layout() {
        let s = BitStream::from_ascii("101").unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"QRNGBITS");
        assert_eq!(&buf[8..16], &3u64.to_le_bytes());
        assert_eq!(&buf[16..], &[0xA0]);
    }

    #[test]
    fn rejects_dirty_padding_and_truncation() {
        let mut buf = Vec::new();
        buf.extend_from_slice(BIT_FILE_MAGIC);
        buf.extend_from_slice(&3u64.to_le_bytes());
        buf.push(0xA1);
        assert!(matches!(
            BitStream::read_binary(&buf[..]),
            Err(BitsError::DirtyPadding)
        ));
        buf.truncate(16);
        assert!(matches!(
            BitStream::read_binary(&buf[..]),
            Err(BitsError::Truncated { .. })
        ));
    }

    #[test]
    fn split_reports_remainder() {
        let s = BitStream::zeros(6_153_984);
        let (streams, rest) = s.split_streams(10);
        assert_eq!(streams.len(), 10);
        assert!(streams.iter().all(|x| x.len() == 615_398));
        assert_eq!(rest, 4);
    }

    #[test]
    fn complement_keeps_padding_clear() {
        let s = BitStream::from_ascii("10110").unwrap().complement();
        assert_eq!(s.to_ascii(), "01001");
        assert_eq!(s.as_bytes(), &[0b0100_1000]);
    }

    proptest! {
        #[test]
        fn binary_and_ascii_roundtrip(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let s: BitStream = bits.iter().copied().collect();
            let mut bin = Vec::new();
            s.write_binary(&mut bin).unwrap();
            prop_assert_eq!(&BitStream::read_binary(&bin[..]).unwrap(), &s);
            let mut asc = Vec::new();
            s.write_ascii(&mut asc).unwrap();
            prop_assert_eq!(&BitStream::read_ascii(&asc[..]).unwrap(), &s);
            prop_assert_eq!(BitStream::from_words(&s.to_words(), s.len()), s.clone());
            prop_assert_eq!(BitStream::from_unpacked(&s.to_unpacked()), s);
        }

        #[test]
        fn slice_matches_bitwise(bits in proptest::collection::vec(any::<bool>(), 1..200), a in 0usize..200, b in 0usize..200) {
            let s: BitStream = bits.iter().copied().collect();
            let (lo, hi) = (a.min(b).min(s.len()), a.max(b).min(s.len()));
            let sl = s.slice(lo, hi).unwrap();
            let expect: BitStream = bits[lo..hi].iter().copied().collect();
            prop_assert_eq!(sl, expect);
        }
    }
}
