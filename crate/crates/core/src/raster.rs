//! Band lookups over a pixel grid.
//!
//! Every cell is sampled at its center. Rows are filled independently into
//! disjoint slices, so the result does not depend on the number of workers.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::band::{BandConfig, BandSample};
use crate::rect::Rect;
use crate::scene::{BandSet, Scene};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("resolution must be at least 1x1, got {0}x{1}")]
    InvalidResolution(usize, usize),
    #[error("view rectangle is degenerate")]
    InvalidView,
    #[error("{invalid} of {total} cells could not be evaluated")]
    TooManyInvalid { invalid: usize, total: usize },
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
    #[error("scene has no second band set")]
    MissingSecondSet,
}

/// One rasterized lookup. Invalid cells carry zeros.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cell {
    pub valid: bool,
    pub clamped: bool,
    pub just_appeared: bool,
    pub level: i32,
    pub birth_level: i32,
    pub id: u64,
    pub local_coord: f64,
    /// Deformed band width in parameter units.
    pub width_v: f64,
    pub alpha: f64,
}

impl Cell {
    pub fn from_sample(s: &BandSample) -> Self {
        Cell {
            valid: true,
            clamped: s.clamped,
            just_appeared: s.just_appeared,
            level: s.level,
            birth_level: s.birth_level,
            id: s.id,
            local_coord: s.local_coord,
            width_v: s.width(),
            alpha: s.alpha,
        }
    }

    /// Band id, or `None` for cells that could not be evaluated.
    pub fn label(&self) -> Option<u64> {
        self.valid.then_some(self.id)
    }

    pub fn fully_deployed(&self) -> bool {
        !(self.just_appeared && self.alpha > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdMap {
    width: usize,
    height: usize,
    view: Rect,
    cells: Vec<Cell>,
}

impl IdMap {
    pub fn from_cells(width: usize, height: usize, view: Rect, cells: Vec<Cell>) -> Self {
        assert_eq!(cells.len(), width * height);
        IdMap {
            width,
            height,
            view,
            cells,
        }
    }

    /// Map with valid cells carrying the given ids and nothing else.
    pub fn from_ids(width: usize, height: usize, view: Rect, ids: &[u64]) -> Self {
        let cells = ids
            .iter()
            .map(|&id| Cell {
                valid: true,
                id,
                local_coord: 0.5,
                ..Cell::default()
            })
            .collect();
        Self::from_cells(width, height, view, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn view(&self) -> Rect {
        self.view
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, col: usize, row: usize) -> &Cell {
        &self.cells[row * self.width + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        self.view.cell_center(col, row, self.width, self.height)
    }

    pub fn corner(&self, i: usize, j: usize) -> (f64, f64) {
        self.view.corner(i, j, self.width, self.height)
    }

    /// Cell containing world point `(x, y)`, if inside the view.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.view.x0) / self.view.width() * self.width as f64;
        let fy = (y - self.view.y0) / self.view.height() * self.height as f64;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (col, row) = (fx as usize, fy as usize);
        (col < self.width && row < self.height).then_some((col, row))
    }

    pub fn invalid_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.valid).count()
    }

    pub fn clamped_count(&self) -> usize {
        self.cells.iter().filter(|c| c.valid && c.clamped).count()
    }

    /// Diagnostics used by the `info` command.
    pub fn summary(&self, cfg: &BandConfig) -> MapSummary {
        let valid: Vec<&Cell> = self.cells.iter().filter(|c| c.valid).collect();
        let ids: BTreeSet<u64> = valid.iter().map(|c| c.id).collect();
        let deepest = valid
            .iter()
            .map(|c| c.level)
            .max()
            .unwrap_or(cfg.top_level());
        let closures = (cfg.top_level() + 1..=deepest)
            .map(|level| {
                let bit = cfg.birth_bit(level);
                // Distinct bands born at this level among the visible ids' ancestors.
                let born: BTreeSet<u64> = ids
                    .iter()
                    .filter(|&&id| id & bit != 0)
                    .map(|&id| id & !(bit - 1))
                    .collect();
                (level, born.len())
            })
            .collect();
        let just = valid.iter().filter(|c| c.just_appeared).count();
        MapSummary {
            cells: self.cells.len(),
            invalid: self.cells.len() - valid.len(),
            clamped: valid.iter().filter(|c| c.clamped).count(),
            distinct_ids: ids.len(),
            just_appeared_fraction: if valid.is_empty() {
                0.0
            } else {
                just as f64 / valid.len() as f64
            },
            closures_per_transition: closures,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSummary {
    pub cells: usize,
    pub invalid: usize,
    pub clamped: usize,
    pub distinct_ids: usize,
    pub just_appeared_fraction: f64,
    /// `(level, n)`: `n` distinct bands born at `level` (closing at the
    /// transition `level -> level-1`) are visible or have visible descendants.
    pub closures_per_transition: Vec<(i32, usize)>,
}

/// Fills a `width x height` row-major buffer, one row per task. `threads == 0`
/// lets the pool pick the worker count.
pub(crate) fn fill_rows<T, F>(
    width: usize,
    height: usize,
    threads: usize,
    fill: F,
) -> Result<Vec<T>, RasterError>
where
    T: Send + Clone + Default,
    F: Fn(usize, &mut [T]) + Sync,
{
    if width == 0 || height == 0 {
        return Err(RasterError::InvalidResolution(width, height));
    }
    let mut out = vec![T::default(); width * height];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RasterError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(row, slice)| fill(row, slice));
    });
    Ok(out)
}

/// Rasterizes one band set over `view`.
pub fn rasterize_band_set(
    set: &BandSet,
    view: Rect,
    t: f64,
    width: usize,
    height: usize,
    threads: usize,
) -> Result<IdMap, RasterError> {
    if !view.is_valid() {
        return Err(RasterError::InvalidView);
    }
    let h = 1e-4 * view.width();
    let cells = fill_rows(width, height, threads, |row, slice: &mut [Cell]| {
        for (col, cell) in slice.iter_mut().enumerate() {
            let (x, y) = view.cell_center(col, row, width, height);
            if let Ok(s) = set.sample(x, y, t, h) {
                *cell = Cell::from_sample(&s);
            }
        }
    })?;
    let map = IdMap::from_cells(width, height, view, cells);
    let invalid = map.invalid_count();
    if invalid * 2 > map.cells.len() {
        return Err(RasterError::TooManyInvalid {
            invalid,
            total: map.cells.len(),
        });
    }
    Ok(map)
}

/// Rasterizes the primary band set of a scene using all available cores.
pub fn rasterize(scene: &Scene, width: usize, height: usize) -> Result<IdMap, RasterError> {
    rasterize_with_threads(scene, width, height, 0)
}

pub fn rasterize_with_threads(
    scene: &Scene,
    width: usize,
    height: usize,
    threads: usize,
) -> Result<IdMap, RasterError> {
    rasterize_band_set(&scene.primary, scene.view, scene.t, width, height, threads)
}
