//! Portable graymap, plain (`P2`) and raw (`P5`).

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each `<= maxval`.
    pub samples: Vec<u16>,
}

impl PgmImage {
    /// Samples divided by `maxval`.
    pub fn normalized(&self) -> Vec<f64> {
        let m = self.maxval as f64;
        self.samples.iter().map(|&s| s as f64 / m).collect()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn uint(&mut self, what: &str) -> Result<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            let msg = if start == self.bytes.len() {
                format!("unexpected end of file, expected {what}")
            } else {
                format!("expected {what}, found byte 0x{:02x}", self.bytes[start])
            };
            return Err(Error::parse(start, msg));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse().map_err(|_| Error::parse(start, format!("{what} `{text}` is out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<PgmImage> {
    if bytes.len() < 2 {
        return Err(Error::parse(bytes.len(), "unexpected end of file in magic number"));
    }
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(Error::parse(0, "not a PGM file (expected P2 or P5)")),
    };
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.uint("width")? as usize;
    let height = c.uint("height")? as usize;
    let maxval_at = c.pos;
    let maxval = c.uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(maxval_at, format!("empty image ({width}x{height})")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    let maxval = maxval as u16;
    let count = width
        .checked_mul(height)
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| Error::parse(maxval_at, format!("image {width}x{height} is too large")))?;

    let mut samples = Vec::with_capacity(count);
    if binary {
        if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
            return Err(Error::parse(c.pos, "expected a single whitespace byte before the raster"));
        }
        let start = c.pos + 1;
        let width_bytes = if maxval < 256 { 1 } else { 2 };
        let need = count * width_bytes;
        let available = bytes.len() - start;
        if available < need {
            return Err(Error::parse(
                bytes.len(),
                format!("truncated raster: expected {need} bytes starting at byte {start}, found {available}"),
            ));
        }
        for k in 0..count {
            let at = start + k * width_bytes;
            let s = if width_bytes == 1 { bytes[at] as u16 } else { u16::from_be_bytes([bytes[at], bytes[at + 1]]) };
            if s > maxval {
                return Err(Error::parse(at, format!("sample {s} exceeds maxval {maxval}")));
            }
            samples.push(s);
        }
    } else {
        for k in 0..count {
            c.skip_space_and_comments();
            let at = c.pos;
            if at >= bytes.len() {
                return Err(Error::parse(at, format!("truncated raster: expected {count} samples, found {k}")));
            }
            let s = c.uint("sample")?;
            if s > maxval as u64 {
                return Err(Error::parse(at, format!("sample {s} exceeds maxval {maxval}")));
            }
            samples.push(s as u16);
        }
    }
    Ok(PgmImage { width, height, maxval, samples })
}

/// Encode values in `[0, 1]` (clamped) as a graymap with the given `maxval`.
pub fn encode_pgm(rows: usize, cols: usize, values: &[f64], maxval: u16, binary: bool) -> Result<Vec<u8>> {
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch { what: "image", expected: rows * cols, found: values.len() });
    }
    if maxval == 0 {
        return Err(Error::InvalidParameter("maxval must be positive".into()));
    }
    let m = maxval as f64;
    let samples: Vec<u16> = values.iter().map(|v| (v.clamp(0.0, 1.0) * m).round() as u16).collect();
    let mut out = format!("{}\n{} {}\n{}\n", if binary { "P5" } else { "P2" }, cols, rows, maxval).into_bytes();
    if binary {
        for s in samples {
            if maxval < 256 {
                out.push(s as u8);
            } else {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
    } else {
        for row in samples.chunks(cols.max(1)) {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_with_comments() {
        let img = decode_pgm(b"P2\n# hi\n2 2 # dims\n255\n0 255\n255 0\n").unwrap();
        assert_eq!((img.width, img.height, img.maxval), (2, 2, 255));
        assert_eq!(img.normalized(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn raw_round_trip() {
        let v = [0.0, 0.5, 1.0, 0.25, 0.75, 0.125];
        for maxval in [255u16, 65535] {
            for binary in [true, false] {
                let bytes = encode_pgm(2, 3, &v, maxval, binary).unwrap();
                let img = decode_pgm(&bytes).unwrap();
                assert_eq!((img.height, img.width), (2, 3));
                for (a, b) in img.normalized().iter().zip(v) {
                    assert!((a - b).abs() <= 0.5 / maxval as f64 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn truncation_names_offset() {
        let mut bytes = encode_pgm(2, 2, &[0.0, 1.0, 1.0, 0.0], 255, true).unwrap();
        bytes.pop();
        let len = bytes.len();
        match decode_pgm(&bytes) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, len),
            other => panic!("unexpected {other:?}"),
        }
        match decode_pgm(b"P2 2 2 255 1 2 3") {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 16);
                assert!(message.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_pgm(b"").is_err());
        assert!(decode_pgm(b"P6 1 1 255 x").is_err());
        assert!(decode_pgm(b"P2 0 3 255").is_err());
        assert!(decode_pgm(b"P2 1 1 0 0").is_err());
        assert!(decode_pgm(b"P2 1 1 9 10").is_err());
        assert!(decode_pgm(b"P2 99999999999999999999 1 9").is_err());
    }
}
