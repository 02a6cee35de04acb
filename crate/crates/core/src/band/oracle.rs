//! Reference band tree built by explicit enumeration.
//!
//! Used to verify [`BandConfig::lookup`]. Nothing here goes through the lookup
//! path: borders are listed level by level, nearest coarse borders are found by
//! scanning, and ids are assigned top-down from parents to children.

use std::collections::HashMap;
use std::ops::Range;

use super::{BandConfig, TIE_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBand {
    pub level: i32,
    pub index: i64,
    /// Deformed borders at the requested pull factor.
    pub left: f64,
    pub right: f64,
    pub id: u64,
    pub just_appeared: bool,
    pub birth_level: i32,
}

#[derive(Debug, Clone)]
pub struct OracleTable {
    fine_level: i32,
    bands: Vec<OracleBand>,
    // (level, index) -> band closes at the transition to level - 1
    closures: HashMap<(i32, i64), bool>,
}

impl OracleTable {
    pub fn fine_level(&self) -> i32 {
        self.fine_level
    }

    /// Bands of the fine level with nonzero width, ordered by position.
    pub fn bands(&self) -> &[OracleBand] {
        &self.bands
    }

    pub fn find(&self, v: f64) -> Option<&OracleBand> {
        let k = self.bands.partition_point(|b| b.right <= v);
        self.bands.get(k).filter(|b| b.left <= v)
    }

    /// Distance from `v` to the nearest deformed border.
    pub fn border_distance(&self, v: f64) -> f64 {
        self.bands
            .iter()
            .flat_map(|b| [b.left, b.right])
            .map(|x| (x - v).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether band `index` at `level` closes, if it was enumerated.
    pub fn closes(&self, level: i32, index: i64) -> Option<bool> {
        self.closures.get(&(level, index)).copied()
    }
}

struct LevelBorders {
    first: i64,
    spacing: f64,
    positions: Vec<f64>,
}

impl LevelBorders {
    fn enumerate(cfg: &BandConfig, level: i32, lo: f64, hi: f64) -> Self {
        let spacing = cfg.level_spacing(level);
        let shift = cfg.level_shift(level).unwrap_or(0.0);
        let first = (lo / spacing - shift).floor() as i64 - 1;
        let last = (hi / spacing - shift).ceil() as i64 + 1;
        let positions = (first..=last)
            .map(|i| (i as f64 + shift) * spacing)
            .collect();
        LevelBorders {
            first,
            spacing,
            positions,
        }
    }

    fn position(&self, index: i64) -> Option<f64> {
        usize::try_from(index - self.first)
            .ok()
            .and_then(|k| self.positions.get(k).copied())
    }

    fn indices(&self) -> Range<i64> {
        self.first..self.first + self.positions.len() as i64
    }

    // Closest border by scanning every candidate; distances equal up to
    // TIE_EPSILON spacings go to the larger position.
    fn nearest(&self, x: f64) -> (i64, f64) {
        let slack = TIE_EPSILON * self.spacing;
        let mut best = (self.first, self.positions[0]);
        for (k, &c) in self.positions.iter().enumerate() {
            if (x - c).abs() <= (x - best.1).abs() + slack {
                best = (self.first + k as i64, c);
            }
        }
        best
    }
}

/// Enumerates the band tree from the top level down to `fine_level` over
/// `window` and returns the fine bands deformed with pull factor `alpha`.
pub fn oracle_bands(
    cfg: &BandConfig,
    window: Range<f64>,
    fine_level: i32,
    alpha: f64,
) -> OracleTable {
    let top = cfg.top_level();
    assert!(fine_level >= top && fine_level <= cfg.deepest_level());
    let top_spacing = cfg.level_spacing(top);

    // Coarser levels get wider margins so every enumerated band has a parent.
    let levels: Vec<LevelBorders> = (top..=fine_level)
        .map(|level| {
            let margin = (fine_level - level + 2) as f64 * top_spacing;
            LevelBorders::enumerate(cfg, level, window.start - margin, window.end + margin)
        })
        .collect();

    let mut ids: HashMap<(i32, i64), (u64, i32)> = HashMap::new();
    let mut closures = HashMap::new();
    let top_borders = &levels[0];
    for i in top_borders.indices().take(top_borders.positions.len() - 1) {
        let id = (i as u64) << cfg.depth();
        ids.insert((top, i), (id, top));
    }
    for (k, level) in (top + 1..=fine_level).enumerate() {
        let coarse = &levels[k];
        let fine = &levels[k + 1];
        let bit = 1u64 << (cfg.depth() as i32 - (level - top));
        for i in fine.indices().take(fine.positions.len() - 1) {
            let (jl, _) = coarse.nearest(fine.position(i).unwrap());
            let (jr, _) = coarse.nearest(fine.position(i + 1).unwrap());
            let closes = jl == jr;
            closures.insert((level, i), closes);
            if let Some(&(parent, parent_birth)) = ids.get(&(level - 1, jl)) {
                let entry = if closes {
                    (parent | bit, level)
                } else {
                    (parent, parent_birth)
                };
                ids.insert((level, i), entry);
            }
        }
    }

    let fine = &levels[(fine_level - top) as usize];
    let deform = |x: f64| -> f64 {
        if fine_level == top {
            return x;
        }
        let (_, c) = levels[(fine_level - top - 1) as usize].nearest(x);
        x + alpha * (c - x)
    };
    let lo = window.start - top_spacing;
    let hi = window.end + top_spacing;
    let mut bands = Vec::new();
    for i in fine.indices().take(fine.positions.len() - 1) {
        let (b0, b1) = (fine.position(i).unwrap(), fine.position(i + 1).unwrap());
        if b1 < lo || b0 > hi {
            continue;
        }
        let Some(&(id, birth_level)) = ids.get(&(fine_level, i)) else {
            continue;
        };
        let (left, right) = (deform(b0), deform(b1));
        if right > left {
            bands.push(OracleBand {
                level: fine_level,
                index: i,
                left,
                right,
                id,
                just_appeared: fine_level > top && birth_level == fine_level,
                birth_level,
            });
        }
    }
    OracleTable {
        fine_level,
        bands,
        closures,
    }
}
