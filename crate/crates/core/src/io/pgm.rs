//! Binary grayscale (P5) slice export.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::VoxelGrid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Slice of a per-voxel scalar normal to `axis` at `index`, scaled so the
/// slice maximum maps to 255. Columns run along the lower remaining axis,
/// rows along the higher one.
pub fn slice_image(grid: &VoxelGrid, values: &[f64], axis: usize, index: usize) -> Result<GrayImage> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} voxels",
            values.len(),
            grid.len()
        )));
    }
    if axis > 2 || index >= grid.dims[axis] {
        return Err(Error::InvalidArgument(format!("slice {index} on axis {axis} is out of range")));
    }
    let (u, w) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (width, height) = (grid.dims[u], grid.dims[w]);
    let mut slice = Vec::with_capacity(width * height);
    for b in 0..height {
        for a in 0..width {
            let mut ijk = [0; 3];
            ijk[axis] = index;
            ijk[u] = a;
            ijk[w] = b;
            slice.push(values[grid.index(ijk[0], ijk[1], ijk[2])].abs());
        }
    }
    let max = slice.iter().copied().fold(0.0, f64::max);
    let pixels = slice
        .iter()
        .map(|v| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 })
        .collect();
    Ok(GrayImage { width, height, pixels })
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    bytes.extend_from_slice(&image.pixels);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // header: magic, width, height, maxval, each followed by whitespace
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::format(path, "expected an 8-bit P5 image"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::format(path, e.to_string()));
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let pixels = bytes.get(pos..).unwrap_or_default().to_vec();
    if pixels.len() != width * height {
        return Err(Error::format(path, "pixel count does not match the header"));
    }
    Ok(GrayImage { width, height, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_layout_and_round_trip() {
        let g = VoxelGrid::new([0.0; 3], 1.0, [3, 2, 4]).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|v| v as f64).collect();
        let img = slice_image(&g, &vals, 2, 3).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert_eq!(*img.pixels.last().unwrap(), 255);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.pgm");
        write_pgm(&p, &img).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), img);
        assert!(slice_image(&g, &vals, 2, 4).is_err());
    }
}
