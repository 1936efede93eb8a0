use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes an 8-bit binary PGM; values are clipped to `[0,1]`.
pub fn write_pgm(path: &Path, w: usize, h: usize, values: &[f64]) -> Result<()> {
    if values.len() != w * h {
        return Err(Error::Dimension(format!(
            "{}x{} image needs {} values, got {}",
            w,
            h,
            w * h,
            values.len()
        )));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(
        values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, out)?;
    Ok(())
}

/// Grid of equally sized grey tiles separated by a one-pixel gutter.
#[derive(Clone, Debug)]
pub struct Panel {
    tile_h: usize,
    tile_w: usize,
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl Panel {
    pub fn new(rows: usize, cols: usize, tile_h: usize, tile_w: usize) -> Self {
        let (h, w) = (rows * (tile_h + 1) - 1, cols * (tile_w + 1) - 1);
        Self {
            tile_h,
            tile_w,
            rows,
            cols,
            pixels: vec![1.0; h * w],
        }
    }

    pub fn width(&self) -> usize {
        self.cols * (self.tile_w + 1) - 1
    }

    pub fn height(&self) -> usize {
        self.rows * (self.tile_h + 1) - 1
    }

    pub fn set_tile(&mut self, row: usize, col: usize, tile: &[f64]) {
        assert_eq!(tile.len(), self.tile_h * self.tile_w);
        let w = self.width();
        let (oy, ox) = (row * (self.tile_h + 1), col * (self.tile_w + 1));
        for y in 0..self.tile_h {
            let dst = &mut self.pixels[(oy + y) * w + ox..(oy + y) * w + ox + self.tile_w];
            dst.copy_from_slice(&tile[y * self.tile_w..(y + 1) * self.tile_w]);
        }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_pgm(path, self.width(), self.height(), &self.pixels)
    }
}
