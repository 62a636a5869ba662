//! Minimal NPY v1.0 reader/writer for C-ordered little-endian arrays.
//!
//! Only the three element types the toolkit exchanges are supported:
//! `<f4` (embeddings, head parameters), `<f8` (scores, fitted state) and
//! `<i8` (labels). Files are always written as version 1.0 with the header
//! padded so that the payload starts on a 64-byte boundary, which is what
//! `numpy.save` produces.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

/// Element types with a fixed little-endian NPY encoding.
pub trait Element: Copy {
    const DESCR: &'static str;
    const SIZE: usize;
    fn put(self, out: &mut Vec<u8>);
    fn get(bytes: &[u8]) -> Self;
}

impl Element for f32 {
    const DESCR: &'static str = "<f4";
    const SIZE: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Element for f64 {
    const DESCR: &'static str = "<f8";
    const SIZE: usize = 8;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

impl Element for i64 {
    const DESCR: &'static str = "<i8";
    const SIZE: usize = 8;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        i64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

/// Parsed NPY header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub descr: String,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

impl Header {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn header_text(descr: &str, shape: &[usize]) -> String {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => {
            let parts: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            format!("({})", parts.join(", "))
        }
    };
    let mut text = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    // magic(6) + version(2) + header_len(2) + text + '\n'
    let unpadded = MAGIC.len() + 4 + text.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    text.extend(std::iter::repeat_n(' ', pad));
    text.push('\n');
    text
}

/// Encode an array into NPY bytes.
pub fn encode<T: Element>(shape: &[usize], data: &[T]) -> Result<Vec<u8>> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::Shape(format!(
            "shape {shape:?} holds {expected} elements, got {}",
            data.len()
        )));
    }
    let header = header_text(T::DESCR, shape);
    let header_len = u16::try_from(header.len())
        .map_err(|_| Error::Format("header exceeds v1.0 size limit".into()))?;
    let mut out = Vec::with_capacity(10 + header.len() + data.len() * T::SIZE);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for &x in data {
        x.put(&mut out);
    }
    Ok(out)
}

/// Split raw file bytes into a parsed header and the payload slice.
pub fn parse(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let major = bytes[6];
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Format("truncated header".into()));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => return Err(Error::Format(format!("unsupported version {v}"))),
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(Error::Format("truncated header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| Error::Format("header is not valid text".into()))?;
    Ok((parse_header(text)?, &bytes[end..]))
}

fn dict_value<'a>(text: &'a str, key: &str) -> Result<&'a str> {
    let needle = format!("'{key}'");
    let at = text
        .find(&needle)
        .ok_or_else(|| Error::Format(format!("header missing '{key}'")))?;
    let rest = text[at + needle.len()..].trim_start();
    rest.strip_prefix(':')
        .map(str::trim_start)
        .ok_or_else(|| Error::Format(format!("malformed '{key}' entry")))
}

fn parse_header(text: &str) -> Result<Header> {
    let descr = {
        let v = dict_value(text, "descr")?;
        let quote = v
            .chars()
            .next()
            .filter(|c| *c == '\'' || *c == '"')
            .ok_or_else(|| Error::Format("malformed descr".into()))?;
        let body = &v[1..];
        let close = body
            .find(quote)
            .ok_or_else(|| Error::Format("malformed descr".into()))?;
        body[..close].to_string()
    };
    let fortran_order = {
        let v = dict_value(text, "fortran_order")?;
        if v.starts_with("True") {
            true
        } else if v.starts_with("False") {
            false
        } else {
            return Err(Error::Format("malformed fortran_order".into()));
        }
    };
    let shape = {
        let v = dict_value(text, "shape")?;
        let body = v
            .strip_prefix('(')
            .and_then(|s| s.find(')').map(|i| &s[..i]))
            .ok_or_else(|| Error::Format("malformed shape".into()))?;
        body.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim_end_matches('L')
                    .parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad dimension '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Header {
        descr,
        fortran_order,
        shape,
    })
}

/// Decode a typed array, checking dtype, layout and payload length.
pub fn decode<T: Element>(bytes: &[u8]) -> Result<(Vec<usize>, Vec<T>)> {
    let (header, payload) = parse(bytes)?;
    if header.descr != T::DESCR {
        return Err(Error::Format(format!(
            "dtype {} where {} was expected",
            header.descr,
            T::DESCR
        )));
    }
    if header.fortran_order {
        return Err(Error::Format(
            "fortran-ordered arrays are not supported".into(),
        ));
    }
    let expected = header.len() * T::SIZE;
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    let data = payload.chunks_exact(T::SIZE).map(T::get).collect();
    Ok((header.shape, data))
}

/// Read only the header of an NPY file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Header> {
    use std::io::Read;
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut prefix = [0u8; 12];
    let mut got = 0;
    while got < prefix.len() {
        let n = file
            .read(&mut prefix[got..])
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        got += n;
    }
    if got < 10 || &prefix[..6] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let (len, start) = match prefix[6] {
        1 => (u16::from_le_bytes([prefix[8], prefix[9]]) as usize, 10),
        _ => (
            u32::from_le_bytes([prefix[8], prefix[9], prefix[10], prefix[11]]) as usize,
            12,
        ),
    };
    let mut buf = prefix[..got].to_vec();
    buf.resize(start + len, 0);
    if got < start + len {
        file.read_exact(&mut buf[got..])
            .map_err(|_| Error::Format("truncated header".into()))?;
    }
    parse(&buf).map(|(h, _)| h)
}

pub fn write<T: Element>(path: impl AsRef<Path>, shape: &[usize], data: &[T]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(shape, data)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read<T: Element>(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<T>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_64_byte_aligned() {
        let bytes = encode::<f32>(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!((bytes.len() - 24) % 64, 0);
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let text = std::str::from_utf8(&bytes[10..10 + header_len]).unwrap();
        assert!(text.starts_with("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }"));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn one_dimensional_shape_has_trailing_comma() {
        let bytes = encode::<i64>(&[3], &[0, 1, 0]).unwrap();
        let (h, _) = parse(&bytes).unwrap();
        assert_eq!(h.shape, vec![3]);
        assert!(std::str::from_utf8(&bytes[10..bytes.len() - 24])
            .unwrap()
            .contains("(3,)"));
    }

    #[test]
    fn parses_numpy_style_header_variants() {
        let h =
            parse_header("{'descr': '<f4', 'fortran_order': False, 'shape': (10L, 4L), }").unwrap();
        assert_eq!(h.shape, vec![10, 4]);
        let h = parse_header("{\"descr\": \"<i8\", \"fortran_order\": True, \"shape\": (), }");
        assert!(h.is_err(), "double-quoted keys are not numpy output");
        let h = parse_header("{'descr': '<i8', 'fortran_order': True, 'shape': (), }").unwrap();
        assert!(h.fortran_order);
        assert!(h.shape.is_empty());
    }

    #[test]
    fn rejects_bad_magic_and_dtype() {
        assert!(matches!(
            decode::<f32>(b"NOTNUMPYATALL"),
            Err(Error::Format(_))
        ));
        let bytes = encode::<f64>(&[1], &[1.0]).unwrap();
        assert!(matches!(decode::<f32>(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_reported() {
        let mut bytes = encode::<f32>(&[2, 2], &[1.0; 4]).unwrap();
        bytes.truncate(bytes.len() - 3);
        let err = decode::<f32>(&bytes).unwrap_err();
        assert!(err.to_string().starts_with("payload length mismatch"));
    }
}
