//! Seeded value noise on the integer lattice.

use crate::band::{mix64, unit_from_bits};

/// Hashed value in `[0,1)` at lattice point `(ix, iy)`.
pub fn lattice_value(ix: i64, iy: i64, seed: u64) -> f64 {
    let h = mix64(seed ^ mix64(ix as u64 ^ mix64(iy as u64).rotate_left(17)));
    unit_from_bits(h)
}

/// Bilinear blend of the four surrounding lattice values.
pub fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (tx, ty) = (x - fx, y - fy);
    let (ix, iy) = (fx as i64, fy as i64);
    let v00 = lattice_value(ix, iy, seed);
    let v10 = lattice_value(ix + 1, iy, seed);
    let v01 = lattice_value(ix, iy + 1, seed);
    let v11 = lattice_value(ix + 1, iy + 1, seed);
    let top = v00 + (v10 - v00) * tx;
    let bottom = v01 + (v11 - v01) * tx;
    top + (bottom - top) * ty
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_points_return_corner_hash() {
        for (ix, iy) in [(0, 0), (2, 3), (-5, 7)] {
            assert_eq!(
                value_noise(ix as f64, iy as f64, 11),
                lattice_value(ix, iy, 11)
            );
        }
    }

    #[test]
    fn stays_in_unit_range_and_depends_on_seed() {
        let mut differs = false;
        for k in 0..500 {
            let (x, y) = (k as f64 * 0.137 - 20.0, k as f64 * 0.071);
            let v = value_noise(x, y, 3);
            assert!((0.0..1.0).contains(&v));
            differs |= v != value_noise(x, y, 4);
        }
        assert!(differs);
    }

    #[test]
    fn continuous_across_cells() {
        let eps = 1e-9;
        let a = value_noise(3.0 - eps, 0.4, 1);
        let b = value_noise(3.0 + eps, 0.4, 1);
        assert!((a - b).abs() < 1e-6);
    }
}
