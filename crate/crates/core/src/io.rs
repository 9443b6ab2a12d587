//! Binary heatmap and mask files, and a plain-text world export.
//!
//! Heatmap: `LRNH`, u32 LE width, u32 LE height, then `width * height` f32 LE
//! values row-major. Mask: `LRNM`, the same header, then one byte per pixel.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::affordance::Heatmap;
use crate::error::{LrnError, Result};
use crate::world::OccupancyWorld;

const HEATMAP_MAGIC: &[u8; 4] = b"LRNH";
const MASK_MAGIC: &[u8; 4] = b"LRNM";

fn header(magic: &[u8; 4], width: u32, height: u32, cap: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + cap);
    out.extend_from_slice(magic);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out
}

/// Checks the magic and returns `(width, height, payload)`.
fn split_header<'a>(bytes: &'a [u8], magic: &[u8; 4], elem: usize) -> Result<(u32, u32, &'a [u8])> {
    let name = String::from_utf8_lossy(magic).into_owned();
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(LrnError::Format(format!("missing {name} header")));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let want = width as usize * height as usize * elem;
    let payload = &bytes[12..];
    if payload.len() != want {
        return Err(LrnError::Format(format!(
            "{name} {width}x{height} needs {want} payload bytes, found {}",
            payload.len()
        )));
    }
    Ok((width, height, payload))
}

pub fn encode_heatmap(hm: &Heatmap) -> Vec<u8> {
    let mut out = header(HEATMAP_MAGIC, hm.width(), hm.height(), hm.values().len() * 4);
    for v in hm.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_heatmap(bytes: &[u8]) -> Result<Heatmap> {
    let (w, h, payload) = split_header(bytes, HEATMAP_MAGIC, 4)?;
    let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Heatmap::new(w, h, values)
}

pub fn encode_mask(width: u32, height: u32, mask: &[u8]) -> Result<Vec<u8>> {
    if mask.len() != width as usize * height as usize {
        return Err(LrnError::DimensionMismatch {
            expected: format!("{} mask bytes", width as usize * height as usize),
            actual: format!("{}", mask.len()),
        });
    }
    let mut out = header(MASK_MAGIC, width, height, mask.len());
    out.extend_from_slice(mask);
    Ok(out)
}

/// Returns `(width, height, bytes)`.
pub fn decode_mask(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>)> {
    let (w, h, payload) = split_header(bytes, MASK_MAGIC, 1)?;
    Ok((w, h, payload.to_vec()))
}

pub fn read_heatmap(path: &Path) -> Result<Heatmap> {
    decode_heatmap(&std::fs::read(path)?).map_err(|e| LrnError::Format(format!("{}: {e}", path.display())))
}

pub fn write_heatmap(path: &Path, hm: &Heatmap) -> Result<()> {
    Ok(std::fs::write(path, encode_heatmap(hm))?)
}

/// Files in `dir` with extension `ext`, sorted by file name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Plain PGM (`P2`): 0 for lethal, 255 for free, top row is the largest `y`.
pub fn world_pgm(world: &OccupancyWorld) -> String {
    let (w, h) = (world.width(), world.height());
    let mut out = format!(
        "P2\n# resolution {} origin {} {}\n{w} {h}\n255\n",
        world.resolution(),
        world.origin().x,
        world.origin().y
    );
    for iy in (0..h as i64).rev() {
        let row: Vec<&str> = (0..w as i64).map(|ix| if world.is_lethal(ix, iy) { "0" } else { "255" }).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn heatmap_round_trip() {
        let hm = Heatmap::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125]).unwrap();
        let bytes = encode_heatmap(&hm);
        assert_eq!(&bytes[..4], b"LRNH");
        assert_eq!(bytes.len(), 12 + 24);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(f32::from_le_bytes(bytes[16..20].try_into().unwrap()), 0.25);
        assert_eq!(decode_heatmap(&bytes).unwrap(), hm);
    }

    #[test]
    fn heatmap_rejects_truncation_and_magic() {
        let bytes = encode_heatmap(&Heatmap::filled(2, 2, 0.5).unwrap());
        assert!(decode_heatmap(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_heatmap(&bad).is_err());
        assert!(decode_heatmap(&[]).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let bytes = encode_mask(2, 2, &[0, 1, 2, 2]).unwrap();
        assert_eq!(decode_mask(&bytes).unwrap(), (2, 2, vec![0, 1, 2, 2]));
        assert!(encode_mask(2, 2, &[0]).is_err());
        assert!(decode_heatmap(&bytes).is_err());
    }

    #[test]
    fn pgm_marks_border_lethal() {
        let w = OccupancyWorld::new(4, 3, 0.5, Point2::new(0.0, 0.0)).unwrap();
        let text = world_pgm(&w);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "4 3");
        assert_eq!(lines[4], "0 0 0 0");
        assert_eq!(lines[5], "0 255 255 0");
    }
}
