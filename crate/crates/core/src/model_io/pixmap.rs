//! Binary portable pixmaps: P5 (gray) and P6 (RGB), maxval 255.

use super::{write_atomic, ModelIoError};
use crate::image::Image;
use std::path::Path;

pub fn read_image(path: &Path) -> Result<Image, ModelIoError> {
    let bytes = std::fs::read(path).map_err(|e| ModelIoError::io(path, e))?;
    decode_pixmap(&bytes).map_err(|e| match e {
        ModelIoError::Parse { line, message, .. } => ModelIoError::Parse { file: path.to_path_buf(), line, message },
        other => other,
    })
}

pub fn write_image(path: &Path, image: &Image) -> Result<(), ModelIoError> {
    write_atomic(path, &encode_pixmap(image))
}

pub fn encode_pixmap(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.byte_len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(image.data());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: &str) -> ModelIoError {
        ModelIoError::parse(Path::new("<pixmap>"), self.line, message)
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], ModelIoError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("truncated header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32, ModelIoError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| self.err(&format!("invalid {what}")))
    }
}

pub fn decode_pixmap(bytes: &[u8]) -> Result<Image, ModelIoError> {
    let mut cur = Cursor { bytes, pos: 0, line: 1 };
    let magic = cur.token()?;
    let channels = match magic {
        b"P5" => 1u8,
        b"P6" => 3u8,
        b"P1" | b"P2" | b"P3" | b"P4" => {
            return Err(ModelIoError::UnsupportedFormat(format!(
                "pixmap variant {} (only binary P5/P6 are supported)",
                String::from_utf8_lossy(magic)
            )))
        }
        _ => return Err(cur.err("not a P5/P6 pixmap")),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ModelIoError::UnsupportedFormat(format!("maxval {maxval} (only 255 is supported)")));
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("missing raster separator"));
    }
    let start = cur.pos + 1;
    let len = (width as usize)
        .checked_mul(height as usize)
        .and_then(|v| v.checked_mul(channels as usize))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let end = start.checked_add(len).ok_or_else(|| cur.err("image dimensions overflow"))?;
    if end > bytes.len() {
        return Err(cur.err(&format!("truncated raster: expected {len} bytes, found {}", bytes.len() - start)));
    }
    Image::from_raw(width, height, channels, bytes[start..end].to_vec()).ok_or_else(|| cur.err("inconsistent raster"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_black_p5() {
        let img = decode_pixmap(b"P5\n1 1\n255\n\0").unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (1, 1, 1));
        assert_eq!(img.data(), &[0]);
    }

    #[test]
    fn header_comments() {
        let img = decode_pixmap(b"P6 # made by hand\n2 # width\n1\n255\n\x01\x02\x03\x04\x05\x06").unwrap();
        assert_eq!(img.rgb(1, 0), [4, 5, 6]);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(matches!(decode_pixmap(b"P6\n4 4\n255\n\x00\x01"), Err(ModelIoError::Parse { .. })));
        assert!(matches!(decode_pixmap(b"P6\n4"), Err(ModelIoError::Parse { .. })));
        assert!(matches!(decode_pixmap(b""), Err(ModelIoError::Parse { .. })));
        assert!(matches!(decode_pixmap(b"P5\n1 1\n65535\n\0\0"), Err(ModelIoError::UnsupportedFormat(_))));
        assert!(matches!(decode_pixmap(b"P3\n1 1\n255\n0 0 0"), Err(ModelIoError::UnsupportedFormat(_))));
        assert!(matches!(decode_pixmap(b"JFIF"), Err(ModelIoError::Parse { .. })));
        assert!(matches!(decode_pixmap(b"P5\n99999999 99999999\n255\n"), Err(ModelIoError::Parse { .. })));
    }

    #[test]
    fn encode_layout() {
        let img = Image::from_raw(2, 1, 1, vec![7, 9]).unwrap();
        assert_eq!(encode_pixmap(&img), b"P5\n2 1\n255\n\x07\x09".to_vec());
    }
}
