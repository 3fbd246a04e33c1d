//! Plain-text graymap (P2) export of binary masks: 255 foreground, 0 background.

use std::fmt::Write as _;
use std::path::Path;

use super::{read_bytes, write_bytes, IoError};
use crate::cam::BinaryMask;

pub fn write_pgm(path: &Path, mask: &BinaryMask) -> Result<(), IoError> {
    let mut s = format!("P2\n{} {}\n255\n", mask.width, mask.height);
    for row in mask.data.chunks(mask.width) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "255" } else { "0" }).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    write_bytes(path, s.as_bytes())
}

/// Reads a P2 graymap; any nonzero value is foreground.
pub fn read_pgm(path: &Path) -> Result<BinaryMask, IoError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::schema(path, "not valid UTF-8"))?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(IoError::schema(path, "expected P2 header"));
    }
    let mut num = |what: &str| -> Result<usize, IoError> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| IoError::schema(path, format!("missing or bad {what}")))
    };
    let (w, h, _max) = (num("width")?, num("height")?, num("maxval")?);
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        data.push(num("pixel value")? != 0);
    }
    BinaryMask::new(h, w, data).map_err(|e| IoError::schema(path, e.to_string()))
}
