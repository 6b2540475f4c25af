use serde::{Deserialize, Serialize};

/// Axis-aligned pixel (or cell) rectangle: origin `(x, y)`, extent `w × h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl CropRect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    /// True when the rect is non-empty and lies inside a `width × height` frame.
    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w > 0
            && self.h > 0
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height)
    }

    /// Whether a continuous point falls in `[x, x+w) × [y, y+h)`.
    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        let (x0, y0) = (f64::from(self.x), f64::from(self.y));
        px >= x0 && px < x0 + f64::from(self.w) && py >= y0 && py < y0 + f64::from(self.h)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }
}
