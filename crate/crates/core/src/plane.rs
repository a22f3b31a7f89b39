//! Row-major 2D arrays of reals, one per image channel.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid(format!("plane must be non-empty, got {width}x{height}"));
        }
        if data.len() != width * height {
            return invalid(format!("plane data has {} samples, expected {}x{}", data.len(), width, height));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Extends the plane to `width`x`height` by replicating its last column
    /// and last row.
    pub fn pad_replicate(&self, width: usize, height: usize) -> Plane {
        debug_assert!(width >= self.width && height >= self.height);
        Plane::from_fn(width, height, |x, y| self.get(x.min(self.width - 1), y.min(self.height - 1)))
    }

    /// Top-left `width`x`height` window.
    pub fn crop(&self, width: usize, height: usize) -> Plane {
        debug_assert!(width <= self.width && height <= self.height);
        Plane::from_fn(width, height, |x, y| self.get(x, y))
    }

    /// Copies the `n`x`n` block at (`x0`, `y0`) into `out`, row-major.
    pub fn read_block(&self, x0: usize, y0: usize, n: usize, out: &mut Vec<f64>) {
        out.clear();
        for y in y0..y0 + n {
            out.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + n]);
        }
    }

    /// Writes a row-major `n`x`n` block at (`x0`, `y0`).
    pub fn write_block(&mut self, x0: usize, y0: usize, n: usize, block: &[f64]) {
        debug_assert_eq!(block.len(), n * n);
        for (r, src) in block.chunks_exact(n).enumerate() {
            let start = (y0 + r) * self.width + x0;
            self.data[start..start + n].copy_from_slice(src);
        }
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}
