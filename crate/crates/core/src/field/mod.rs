//! Control fields: the parameter `u(p)` and the density `d(p)`.

pub mod expr;
pub mod image;
pub mod noise;

pub use expr::{FieldProgram, ParseError};
pub use image::{ImageError, ImageField};

/// Default floor on `|grad u|` for distortion-compensated density.
pub const DEFAULT_GRADIENT_FLOOR: f64 = 1e-6;

pub trait ScalarField {
    fn value(&self, x: f64, y: f64, t: f64) -> f64;
}

impl ScalarField for FieldProgram {
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.eval(x, y, t)
    }
}

impl ScalarField for f64 {
    fn value(&self, _x: f64, _y: f64, _t: f64) -> f64 {
        *self
    }
}

/// Central-difference gradient with step `h`.
pub fn gradient<F: ScalarField + ?Sized>(field: &F, x: f64, y: f64, t: f64, h: f64) -> (f64, f64) {
    let gx = (field.value(x + h, y, t) - field.value(x - h, y, t)) / (2.0 * h);
    let gy = (field.value(x, y + h, t) - field.value(x, y - h, t)) / (2.0 * h);
    (gx, gy)
}

/// Density giving bands roughly `spacing` world units apart:
/// `1 / (spacing * max(|grad u|, floor))`.
pub fn compensated_density<F: ScalarField + ?Sized>(
    u: &F,
    x: f64,
    y: f64,
    t: f64,
    spacing: f64,
    floor: f64,
    h: f64,
) -> f64 {
    let (gx, gy) = gradient(u, x, y, t, h);
    let norm = libm::hypot(gx, gy);
    // NaN gradients stay NaN instead of being floored away.
    let norm = if norm.is_nan() { norm } else { norm.max(floor) };
    1.0 / (spacing * norm)
}
