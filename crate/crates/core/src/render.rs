//! Images from id maps, and the id-driven effects: tearing, thinning, weaving.

use rayon::prelude::*;

use crate::band::{mix64, BandConfig, BandError, BandSample};
use crate::raster::{rasterize_band_set, rasterize_with_threads, Cell, IdMap, RasterError};
use crate::scene::{OutputMode, Scene};

pub const INVALID_COLOR: [u8; 3] = [255, 0, 255];
pub const BACKGROUND_COLOR: [u8; 3] = [245, 242, 235];

/// Salt for the secondary band set in weaves, so both sets get distinct palettes.
pub const SECOND_SET_SALT: u64 = 0x5bd1_e995;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ColorStyle {
    #[default]
    HashColor,
    Grayscale,
    BorderShade,
}

/// 8-bit RGB raster, row-major, row 0 at the view's `y0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Self {
        assert_eq!(pixels.len(), width * height);
        Image {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    /// Binary PPM (P6, maxval 255).
    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

/// Fixed color for an id. `salt` separates palettes of different band sets.
pub fn hash_color(id: u64, salt: u64) -> [u8; 3] {
    let h = mix64(id ^ mix64(salt));
    // Keep channels away from black so shading stays visible.
    let channel = |shift: u32| 40 + ((h >> shift) & 0xff) as u8 % 200;
    [channel(0), channel(16), channel(32)]
}

fn gray(id: u64, salt: u64) -> [u8; 3] {
    let g = 30 + ((mix64(id ^ mix64(salt)) >> 40) & 0xff) as u8 % 200;
    [g, g, g]
}

/// Darkening factor near band edges; 1 across the middle 80% of the band.
pub fn border_shade_factor(local_coord: f64) -> f64 {
    1.0 - 0.5 * ((local_coord - 0.5).abs() * 2.0 - 0.8).max(0.0) / 0.2
}

fn cell_color(cell: &Cell, style: ColorStyle, salt: u64) -> [u8; 3] {
    if !cell.valid {
        return INVALID_COLOR;
    }
    match style {
        ColorStyle::HashColor => hash_color(cell.id, salt),
        ColorStyle::Grayscale => gray(cell.id, salt),
        ColorStyle::BorderShade => {
            let f = border_shade_factor(cell.local_coord);
            hash_color(cell.id, salt).map(|c| libm::round(c as f64 * f) as u8)
        }
    }
}

pub fn colorize(map: &IdMap, style: ColorStyle) -> Image {
    let pixels = map
        .cells()
        .par_iter()
        .map(|c| cell_color(c, style, 0))
        .collect();
    Image::new(map.width(), map.height(), pixels)
}

fn check_level(cfg: &BandConfig, level: i32) -> Result<(), BandError> {
    if level < cfg.top_level() || level > cfg.deepest_level() {
        return Err(BandError::ShiftLevelOutOfRange(level));
    }
    Ok(())
}

/// Keeps bands born at or above `cutoff_level`; finer insertions are torn away.
pub fn tear_keep(
    sample: &BandSample,
    cutoff_level: i32,
    cfg: &BandConfig,
) -> Result<bool, BandError> {
    check_level(cfg, cutoff_level)?;
    Ok(sample.birth_level <= cutoff_level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Front {
    A,
    B,
}

fn front_of(a: u64, b: u64) -> Front {
    if (a ^ b).count_ones().is_multiple_of(2) {
        Front::A
    } else {
        Front::B
    }
}

/// Which of two crossing bands lies on top: `A` iff their ids differ in an
/// even number of bits.
pub fn weave_front(a: &BandSample, b: &BandSample) -> Front {
    front_of(a.id, b.id)
}

/// Whether a point lies in the middle `2 * half_width` fraction of its band.
pub fn thin_band(sample: &BandSample, half_width: f64) -> bool {
    (sample.local_coord - 0.5).abs() < half_width
}

fn covers(cell: &Cell, half_width: f64) -> bool {
    cell.valid && (cell.local_coord - 0.5).abs() < half_width
}

/// Thin lines of the primary set, keeping only bands born at or above `cutoff_level`.
pub fn render_tear(
    scene: &Scene,
    width: usize,
    height: usize,
    threads: usize,
    cutoff_level: i32,
) -> Result<Image, RenderError> {
    check_level(&scene.primary.bands, cutoff_level)?;
    let map = rasterize_with_threads(scene, width, height, threads)?;
    let (style, half) = (scene.output.style, scene.output.thin);
    let pixels = map
        .cells()
        .par_iter()
        .map(|c| {
            if !c.valid {
                INVALID_COLOR
            } else if c.birth_level <= cutoff_level && covers(c, half) {
                cell_color(c, style, 0)
            } else {
                BACKGROUND_COLOR
            }
        })
        .collect();
    Ok(Image::new(width, height, pixels))
}

/// Interleaves thin bands of the primary and secondary sets.
pub fn render_weave(
    scene: &Scene,
    width: usize,
    height: usize,
    threads: usize,
) -> Result<Image, RenderError> {
    let second = scene
        .secondary
        .as_ref()
        .ok_or(RasterError::MissingSecondSet)?;
    let a = rasterize_band_set(&scene.primary, scene.view, scene.t, width, height, threads)?;
    let b = rasterize_band_set(second, scene.view, scene.t, width, height, threads)?;
    Ok(weave_maps(
        &a,
        &b,
        scene.output.thin,
        scene.output.style,
        [0, SECOND_SET_SALT],
    ))
}

/// Combines two rasterized sets; `salts[k]` colors set `k`.
pub fn weave_maps(
    a: &IdMap,
    b: &IdMap,
    half_width: f64,
    style: ColorStyle,
    salts: [u64; 2],
) -> Image {
    assert_eq!((a.width(), a.height()), (b.width(), b.height()));
    let pixels = a
        .cells()
        .par_iter()
        .zip(b.cells().par_iter())
        .map(
            |(ca, cb)| match (covers(ca, half_width), covers(cb, half_width)) {
                (true, true) => match front_of(ca.id, cb.id) {
                    Front::A => cell_color(ca, style, salts[0]),
                    Front::B => cell_color(cb, style, salts[1]),
                },
                (true, false) => cell_color(ca, style, salts[0]),
                (false, true) => cell_color(cb, style, salts[1]),
                (false, false) if !ca.valid && !cb.valid => INVALID_COLOR,
                (false, false) => BACKGROUND_COLOR,
            },
        )
        .collect();
    Image::new(a.width(), a.height(), pixels)
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Band(#[from] BandError),
}

/// Renders a scene according to its output mode. Curve modes show the plain
/// band image the curves were extracted from.
pub fn render_scene(
    scene: &Scene,
    width: usize,
    height: usize,
    threads: usize,
) -> Result<Image, RenderError> {
    match scene.output.mode {
        OutputMode::Tear(k) => render_tear(scene, width, height, threads, k),
        OutputMode::Weave => render_weave(scene, width, height, threads),
        OutputMode::Bands | OutputMode::Curves | OutputMode::Centerlines => {
            let map = rasterize_with_threads(scene, width, height, threads)?;
            Ok(colorize(&map, scene.output.style))
        }
    }
}
