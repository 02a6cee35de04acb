/// Axis-aligned world rectangle `[x0, x1) x [y0, y1)`.
///
/// Raster row 0 lies at `y0`; rows advance toward `y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// Finite with positive extent on both axes.
    pub fn is_valid(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// World position of the center of cell `(col, row)` in a `w x h` grid.
    pub fn cell_center(&self, col: usize, row: usize, w: usize, h: usize) -> (f64, f64) {
        (
            self.x0 + (col as f64 + 0.5) * self.width() / w as f64,
            self.y0 + (row as f64 + 0.5) * self.height() / h as f64,
        )
    }

    /// World position of lattice corner `(i, j)` in a `w x h` grid.
    pub fn corner(&self, i: usize, j: usize, w: usize, h: usize) -> (f64, f64) {
        (
            self.x0 + i as f64 * self.width() / w as f64,
            self.y0 + j as f64 * self.height() / h as f64,
        )
    }
}
