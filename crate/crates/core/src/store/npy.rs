//! The subset of the NPY v1.0 format used for activation dumps.
//!
//! Only little-endian `<f4`/`<f8` payloads in C order with exactly four
//! dimensions are accepted. Anything else is rejected with a specific error
//! rather than coerced.

use std::io::Read;

use thiserror::Error;

use crate::store::{Element, TensorShape};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;

#[derive(Debug, Error)]
pub enum NpyError {
    #[error("missing NPY magic string")]
    BadMagic,
    #[error("unsupported NPY version {0}.{1}, only 1.0 is accepted")]
    UnsupportedVersion(u8, u8),
    #[error("malformed NPY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype {0:?}, expected '<f4' or '<f8'")]
    UnsupportedDtype(String),
    #[error("unsupported byte order in dtype {0:?}, payload must be little-endian")]
    UnsupportedByteOrder(String),
    #[error("unsupported layout: fortran_order is True, only C order is accepted")]
    FortranOrder,
    #[error("expected a 4-dimensional shape, got {0} dimensions")]
    BadRank(usize),
    #[error("shape {shape:?} has a zero dimension")]
    ZeroDimension { shape: Vec<usize> },
    #[error("payload holds {actual} bytes, shape {shape:?} needs {expected}")]
    PayloadLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn parse(descr: &str) -> Result<Self, NpyError> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "<f8" => Ok(Dtype::F64),
            ">f4" | ">f8" => Err(NpyError::UnsupportedByteOrder(descr.to_owned())),
            other => Err(NpyError::UnsupportedDtype(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NpyHeader {
    pub dtype: Dtype,
    pub shape: TensorShape,
    /// Offset of the first payload byte.
    pub data_offset: usize,
}

/// Parses the preamble and header dict from the start of a file.
pub fn read_header(mut reader: impl Read) -> Result<NpyHeader, NpyError> {
    let mut preamble = [0u8; PREAMBLE_LEN];
    reader
        .read_exact(&mut preamble)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => NpyError::BadMagic,
            _ => NpyError::Io(e),
        })?;
    if &preamble[..6] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    if (preamble[6], preamble[7]) != (1, 0) {
        return Err(NpyError::UnsupportedVersion(preamble[6], preamble[7]));
    }
    let header_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut raw = vec![0u8; header_len];
    reader
        .read_exact(&mut raw)
        .map_err(|_| NpyError::MalformedHeader("header truncated".into()))?;
    let text = std::str::from_utf8(&raw)
        .map_err(|_| NpyError::MalformedHeader("header is not ASCII".into()))?;
    let dict = parse_dict(text)?;

    let descr = dict
        .descr
        .ok_or_else(|| NpyError::MalformedHeader("missing 'descr'".into()))?;
    let fortran = dict
        .fortran_order
        .ok_or_else(|| NpyError::MalformedHeader("missing 'fortran_order'".into()))?;
    let shape = dict
        .shape
        .ok_or_else(|| NpyError::MalformedHeader("missing 'shape'".into()))?;
    let dtype = Dtype::parse(&descr)?;
    if fortran {
        return Err(NpyError::FortranOrder);
    }
    let dims: [usize; 4] = shape
        .as_slice()
        .try_into()
        .map_err(|_| NpyError::BadRank(shape.len()))?;
    if dims.contains(&0) {
        return Err(NpyError::ZeroDimension { shape });
    }
    Ok(NpyHeader {
        dtype,
        shape: TensorShape::from(dims),
        data_offset: PREAMBLE_LEN + header_len,
    })
}

/// Decodes a complete file image into values of element type `T`, which must
/// match the header dtype.
pub fn decode_payload<T: Element>(header: &NpyHeader, bytes: &[u8]) -> Result<Vec<T>, NpyError> {
    debug_assert_eq!(header.dtype, T::DTYPE);
    let payload = &bytes[header.data_offset.min(bytes.len())..];
    let count = header.shape.len();
    let expected = count * T::DTYPE.size();
    if payload.len() != expected {
        return Err(NpyError::PayloadLength {
            shape: header.shape.dims().to_vec(),
            expected,
            actual: payload.len(),
        });
    }
    let values: Vec<T> = payload
        .chunks_exact(T::DTYPE.size())
        .map(T::from_le)
        .collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(NpyError::NonFinite { index });
    }
    Ok(values)
}

/// Encodes a C-order array as an NPY v1.0 file image.
pub fn encode<T: Element>(shape: TensorShape, values: &[T]) -> Result<Vec<u8>, NpyError> {
    if values.len() != shape.len() {
        return Err(NpyError::PayloadLength {
            shape: shape.dims().to_vec(),
            expected: shape.len() * T::DTYPE.size(),
            actual: values.len() * T::DTYPE.size(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(NpyError::NonFinite { index });
    }
    let [n, h, w, c] = shape.dims();
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({n}, {h}, {w}, {c}), }}",
        T::DTYPE.descr()
    );
    // Pad with spaces so the payload starts on an aligned offset; the header
    // ends with a newline.
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', padding));
    dict.push('\n');

    let header_len = u16::try_from(dict.len())
        .map_err(|_| NpyError::MalformedHeader("header exceeds v1.0 size limit".into()))?;
    let mut out = Vec::with_capacity(PREAMBLE_LEN + dict.len() + values.len() * T::DTYPE.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    for &v in values {
        v.write_le(&mut out);
    }
    Ok(out)
}

#[derive(Default)]
struct HeaderDict {
    descr: Option<String>,
    fortran_order: Option<bool>,
    shape: Option<Vec<usize>>,
}

/// Parses the Python dict literal numpy writes into the header.
fn parse_dict(text: &str) -> Result<HeaderDict, NpyError> {
    let malformed =
        |msg: &str| NpyError::MalformedHeader(format!("{msg} in {:?}", text.trim_end()));
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| malformed("expected a dict"))?;

    let mut dict = HeaderDict::default();
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after_key) =
            parse_quoted(rest).ok_or_else(|| malformed("expected quoted key"))?;
        let after_colon = after_key
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| malformed("expected ':'"))?
            .trim_start();
        let after_value = match key {
            "descr" => {
                let (v, r) = parse_quoted(after_colon).ok_or_else(|| malformed("bad descr"))?;
                dict.descr = Some(v.to_owned());
                r
            }
            "fortran_order" => {
                if let Some(r) = after_colon.strip_prefix("False") {
                    dict.fortran_order = Some(false);
                    r
                } else if let Some(r) = after_colon.strip_prefix("True") {
                    dict.fortran_order = Some(true);
                    r
                } else {
                    return Err(malformed("bad fortran_order"));
                }
            }
            "shape" => {
                let inner = after_colon
                    .strip_prefix('(')
                    .ok_or_else(|| malformed("bad shape"))?;
                let close = inner
                    .find(')')
                    .ok_or_else(|| malformed("unterminated shape"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| malformed("bad shape entry"))?;
                dict.shape = Some(dims);
                &inner[close + 1..]
            }
            _ => return Err(malformed("unexpected key")),
        };
        let after_value = after_value.trim_start();
        rest = match after_value.strip_prefix(',') {
            Some(r) => r.trim_start(),
            None if after_value.is_empty() => after_value,
            None => return Err(malformed("expected ','")),
        };
    }
    Ok(dict)
}

fn parse_quoted(s: &str) -> Option<(&str, &str)> {
    let quote = s.chars().next().filter(|&c| c == '\'' || c == '"')?;
    let inner = &s[1..];
    let end = inner.find(quote)?;
    Some((&inner[..end], &inner[end + 1..]))
}
