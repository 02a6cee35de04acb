//! Density-adaptive band lookup.
//!
//! A band of level `L` is a half-open interval of the parameter `v` whose width
//! is `step^-L`. For a target density `d` (bands per unit of `v`) the two
//! levels bracketing `d` are blended: every border of the finer level is pulled
//! toward its nearest border on the coarser level by a factor `alpha`. A finer
//! band whose two borders are pulled onto the same coarse border *closes*.
//!
//! Bands are numbered like the leaves of a binary tree. The index of the band
//! at the top level fills the most significant bits of the id, and each level
//! transition owns one fixed path bit which is set when the band is born at
//! that level. Because the bit positions are fixed, a band that persists across
//! a change of level keeps its id.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub mod oracle;

/// Default number of path bits below the top-level index.
pub const DEFAULT_DEPTH: u32 = 24;

/// Largest supported depth budget; leaves room for the top-level index.
pub const MAX_DEPTH: u32 = 56;

// Keeps densities sitting exactly on a level density on the alpha = 0 branch.
const LEVEL_EPSILON: f64 = 1e-9;

/// Fine borders closer than this (in coarse spacings) to the midpoint between
/// two coarse borders count as ties and go to the larger one. Without it,
/// rounding decides exact ties such as those of halves shifts with step 3/2.
pub const TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandError {
    #[error("step must lie in (1,2], got {num}/{den}")]
    StepOutOfRange { num: u32, den: u32 },
    #[error("step {num}/{den} is not an irreducible fraction")]
    StepNotReduced { num: u32, den: u32 },
    #[error("invalid step {0:?}, expected N/M")]
    StepSyntax(String),
    #[error("depth budget must be in 1..={MAX_DEPTH}, got {0}")]
    InvalidDepth(u32),
    #[error("explicit shifts must list {depth} or {} values, got {got}", depth + 1)]
    ShiftCount { depth: u32, got: usize },
    #[error("shift {value} for level {level} is outside [0,1)")]
    ShiftOutOfRange { level: i32, value: f64 },
    #[error("no explicit shift configured for level {0}")]
    ShiftLevelOutOfRange(i32),
    #[error("density {0} is not a positive finite number")]
    InvalidDensity(f64),
    #[error("density {d} outside ({lo}, {hi}]")]
    DensityOutOfRange { d: f64, lo: f64, hi: f64 },
    #[error("parameter value {0} is not finite")]
    NonFiniteParameter(f64),
    #[error("depth budget exceeded at level {level}: top level {top}, depth {depth}")]
    DepthExceeded { level: i32, top: i32, depth: u32 },
    #[error("top band index {index} does not fit beside {depth} path bits")]
    IdOverflow { index: i64, depth: u32 },
}

/// Rational level ratio `num/den` in `(1, 2]`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    num: u32,
    den: u32,
}

impl Step {
    pub const TWO: Step = Step { num: 2, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, BandError> {
        if den == 0 || num <= den || num > 2 * den {
            return Err(BandError::StepOutOfRange { num, den });
        }
        if gcd(num, den) != 1 {
            return Err(BandError::StepNotReduced { num, den });
        }
        Ok(Step { num, den })
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_two(self) -> bool {
        self == Step::TWO
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Step {
    type Err = BandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || BandError::StepSyntax(s.to_string());
        let (num, den) = match s.split_once('/') {
            Some((n, m)) => (n.trim(), m.trim()),
            None => (s.trim(), "1"),
        };
        let num = num.parse::<u32>().map_err(|_| syntax())?;
        let den = den.parse::<u32>().map_err(|_| syntax())?;
        Step::new(num, den)
    }
}

/// Per-level translation of the band lattice, in units of the level spacing.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftMode {
    /// Every level shifted by half a band: the balanced subdivision for step 2.
    Halves,
    /// Pseudo-random shift per level derived from a seed.
    Hashed(u64),
    /// Explicit shifts. `depth` entries cover levels `top+1 ..= top+depth` with
    /// the top level unshifted; `depth + 1` entries start at the top level.
    Explicit(Vec<f64>),
}

/// Shape applied to the linear pull factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Linear,
    Smoothstep,
}

impl Profile {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Profile::Linear => t,
            Profile::Smoothstep => t * t * (3.0 - 2.0 * t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LevelGeometry {
    spacing: f64,
    shift: f64,
}

/// Validated band-pattern parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BandConfig {
    step: Step,
    top_level: i32,
    depth: u32,
    shifts: ShiftMode,
    profile: Profile,
    clamp: bool,
    // levels top_level ..= top_level + depth
    table: Vec<LevelGeometry>,
}

pub struct BandConfigBuilder {
    step: Step,
    top_level: i32,
    depth: u32,
    shifts: Option<ShiftMode>,
    profile: Profile,
    clamp: bool,
}

impl BandConfigBuilder {
    pub fn top_level(mut self, level: i32) -> Self {
        self.top_level = level;
        self
    }

    pub fn depth(mut self, depth: u32) -> Self {
        self.depth = depth;
        self
    }

    pub fn shifts(mut self, shifts: ShiftMode) -> Self {
        self.shifts = Some(shifts);
        self
    }

    pub fn profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    /// When false, densities outside the supported range are rejected instead
    /// of clamped.
    pub fn clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn build(self) -> Result<BandConfig, BandError> {
        let shifts = self
            .shifts
            .unwrap_or_else(|| BandConfig::default_shifts(self.step));
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return Err(BandError::InvalidDepth(self.depth));
        }
        if let ShiftMode::Explicit(values) = &shifts {
            let n = values.len();
            if n != self.depth as usize && n != self.depth as usize + 1 {
                return Err(BandError::ShiftCount {
                    depth: self.depth,
                    got: n,
                });
            }
            let first = self.top_level + (self.depth as usize + 1 - n) as i32;
            for (k, &value) in values.iter().enumerate() {
                if !(0.0..1.0).contains(&value) {
                    return Err(BandError::ShiftOutOfRange {
                        level: first + k as i32,
                        value,
                    });
                }
            }
        }
        let mut cfg = BandConfig {
            step: self.step,
            top_level: self.top_level,
            depth: self.depth,
            shifts,
            profile: self.profile,
            clamp: self.clamp,
            table: Vec::new(),
        };
        cfg.table = (0..=self.depth as i32)
            .map(|k| {
                let level = self.top_level + k;
                LevelGeometry {
                    spacing: cfg.compute_spacing(level),
                    shift: cfg.compute_shift(level).unwrap_or(0.0),
                }
            })
            .collect();
        Ok(cfg)
    }
}

/// Local band at the fine level of a lookup, after border deformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBand {
    pub level: i32,
    /// Undeformed rank of the band at `level`.
    pub index: i64,
    pub left: f64,
    pub right: f64,
    /// Position of `v` inside the deformed band, in `[0,1)`.
    pub local_coord: f64,
}

/// Result of quantizing a density to its bracketing levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedDensity {
    pub fine_level: i32,
    pub coarse_level: i32,
    /// Pull strength toward the coarse level, after the profile.
    pub alpha: f64,
    /// The density was clamped into the supported range.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GlobalBandId {
    pub id: u64,
    /// The band is born at the lookup level: it is still opening.
    pub just_appeared: bool,
    pub birth_level: i32,
}

/// Full result of a band lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSample {
    pub v: f64,
    pub d: f64,
    pub clamped: bool,
    pub alpha: f64,
    pub level: i32,
    pub index: i64,
    pub left: f64,
    pub right: f64,
    pub local_coord: f64,
    pub id: u64,
    pub just_appeared: bool,
    pub birth_level: i32,
}

impl BandSample {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    /// A just-appeared band is still opening unless the density sits exactly
    /// on its level, where no deformation happens.
    pub fn fully_deployed(&self) -> bool {
        !(self.just_appeared && self.alpha > 0.0)
    }
}

impl BandConfig {
    pub fn builder(step: Step) -> BandConfigBuilder {
        BandConfigBuilder {
            step,
            top_level: 0,
            depth: DEFAULT_DEPTH,
            shifts: None,
            profile: Profile::Linear,
            clamp: true,
        }
    }

    /// Defaults: top level 0, depth 24, linear profile, clamping on, shifts
    /// by halves for step 2 and hashed with seed 0 otherwise.
    pub fn new(step: Step) -> Self {
        Self::builder(step)
            .build()
            .expect("default config is valid")
    }

    pub fn default_shifts(step: Step) -> ShiftMode {
        if step.is_two() {
            ShiftMode::Halves
        } else {
            ShiftMode::Hashed(0)
        }
    }

    pub fn step(&self) -> Step {
        self.step
    }

    pub fn top_level(&self) -> i32 {
        self.top_level
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn shifts(&self) -> &ShiftMode {
        &self.shifts
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn clamps(&self) -> bool {
        self.clamp
    }

    pub fn deepest_level(&self) -> i32 {
        self.top_level + self.depth as i32
    }

    fn table_entry(&self, level: i32) -> Option<&LevelGeometry> {
        let k = level.checked_sub(self.top_level)?;
        usize::try_from(k).ok().and_then(|k| self.table.get(k))
    }

    fn compute_spacing(&self, level: i32) -> f64 {
        ratio_pow(self.step.den, self.step.num, level)
    }

    fn compute_shift(&self, level: i32) -> Result<f64, BandError> {
        match &self.shifts {
            ShiftMode::Halves => Ok(0.5),
            ShiftMode::Hashed(seed) => Ok(hashed_shift(level, *seed)),
            ShiftMode::Explicit(values) => {
                let first = self.top_level + (self.depth as usize + 1 - values.len()) as i32;
                if level == self.top_level && first > level {
                    return Ok(0.0);
                }
                level
                    .checked_sub(first)
                    .and_then(|k| usize::try_from(k).ok())
                    .and_then(|k| values.get(k).copied())
                    .ok_or(BandError::ShiftLevelOutOfRange(level))
            }
        }
    }

    /// Band width at `level`: `step^-level`.
    pub fn level_spacing(&self, level: i32) -> f64 {
        match self.table_entry(level) {
            Some(g) => g.spacing,
            None => self.compute_spacing(level),
        }
    }

    /// Number of bands per unit at `level`: `step^level`.
    pub fn level_density(&self, level: i32) -> f64 {
        ratio_pow(self.step.num, self.step.den, level)
    }

    pub fn level_shift(&self, level: i32) -> Result<f64, BandError> {
        match self.table_entry(level) {
            Some(g) => Ok(g.shift),
            None => self.compute_shift(level),
        }
    }

    pub fn border_position(&self, level: i32, index: i64) -> Result<f64, BandError> {
        let shift = self.level_shift(level)?;
        Ok((index as f64 + shift) * self.level_spacing(level))
    }

    // Infallible geometry for levels reached by valid lookups. Levels outside
    // the table only occur as the unused coarse level at alpha = 0.
    fn geometry(&self, level: i32) -> LevelGeometry {
        match self.table_entry(level) {
            Some(g) => *g,
            None => LevelGeometry {
                spacing: self.compute_spacing(level),
                shift: self.compute_shift(level).unwrap_or(0.0),
            },
        }
    }

    fn border(&self, level: i32, index: i64) -> f64 {
        let g = self.geometry(level);
        (index as f64 + g.shift) * g.spacing
    }

    fn nearest_index(&self, x: f64, coarse_level: i32) -> i64 {
        let g = self.geometry(coarse_level);
        (x / g.spacing - g.shift + 0.5 + TIE_EPSILON).floor() as i64
    }

    /// Nearest border of `coarse_level` to `x`: (index, position). Ties go to
    /// the larger index.
    pub fn nearest_coarse_border(
        &self,
        x: f64,
        coarse_level: i32,
    ) -> Result<(i64, f64), BandError> {
        self.level_shift(coarse_level)?;
        let j = self.nearest_index(x, coarse_level);
        Ok((j, self.border(coarse_level, j)))
    }

    /// Supported density range `(step^top, step^(top+depth)]`.
    pub fn density_range(&self) -> (f64, f64) {
        (
            self.level_density(self.top_level),
            self.level_density(self.deepest_level()),
        )
    }

    /// Applies the clamping policy. Returns the density to use and whether it
    /// was clamped.
    pub fn clamp_density(&self, d: f64) -> Result<(f64, bool), BandError> {
        if !d.is_finite() || d <= 0.0 {
            return Err(BandError::InvalidDensity(d));
        }
        let (lo, hi) = self.density_range();
        if d > lo && d <= hi {
            return Ok((d, false));
        }
        if !self.clamp {
            return Err(BandError::DensityOutOfRange { d, lo, hi });
        }
        Ok((d.clamp(lo, hi), true))
    }

    /// Finds the levels bracketing `d` and the pull factor toward the coarse one.
    pub fn quantize(&self, d: f64) -> Result<QuantizedDensity, BandError> {
        let (d, clamped) = self.clamp_density(d)?;
        let ratio = libm::log(d) / libm::log(self.step.value());
        let fine_level =
            ((ratio - LEVEL_EPSILON).ceil() as i32).clamp(self.top_level, self.deepest_level());
        let coarse_level = fine_level - 1;
        let alpha = if fine_level == self.top_level {
            0.0
        } else {
            let fine = self.level_density(fine_level);
            let coarse = self.level_density(coarse_level);
            ((fine - d) / (fine - coarse)).clamp(0.0, 1.0)
        };
        Ok(QuantizedDensity {
            fine_level,
            coarse_level,
            alpha: self.profile.apply(alpha),
            clamped,
        })
    }

    fn deformed_border(&self, q: &QuantizedDensity, index: i64) -> f64 {
        let b = self.border(q.fine_level, index);
        if q.alpha == 0.0 {
            return b;
        }
        let c = self.border(q.coarse_level, self.nearest_index(b, q.coarse_level));
        b + q.alpha * (c - b)
    }

    // Returns the band and the number of index adjustments needed.
    fn locate(&self, v: f64, q: &QuantizedDensity) -> (LocalBand, u32) {
        let g = self.geometry(q.fine_level);
        let mut index = (v / g.spacing - g.shift).floor() as i64;
        let mut left = self.deformed_border(q, index);
        let mut right = self.deformed_border(q, index + 1);
        let mut steps = 0;
        // Deformed borders are nondecreasing, so these walks terminate; for
        // alpha < 1 a single step is always enough.
        while v < left {
            index -= 1;
            right = left;
            left = self.deformed_border(q, index);
            steps += 1;
        }
        while v >= right {
            index += 1;
            left = right;
            right = self.deformed_border(q, index + 1);
            steps += 1;
        }
        let local_coord = ((v - left) / (right - left)).min(1.0 - f64::EPSILON / 2.0);
        let band = LocalBand {
            level: q.fine_level,
            index,
            left,
            right,
            local_coord,
        };
        (band, steps)
    }

    /// Band containing `v` at density `d`, with deformed borders.
    pub fn local_band(&self, v: f64, d: f64) -> Result<LocalBand, BandError> {
        if !v.is_finite() {
            return Err(BandError::NonFiniteParameter(v));
        }
        let q = self.quantize(d)?;
        Ok(self.locate(v, &q).0)
    }

    /// Indices of the coarse borders nearest to the undeformed borders of band
    /// `index` at `level`.
    pub fn parent_borders(&self, level: i32, index: i64) -> (i64, i64) {
        let left = self.border(level, index);
        let right = self.border(level, index + 1);
        (
            self.nearest_index(left, level - 1),
            self.nearest_index(right, level - 1),
        )
    }

    /// Whether band `index` at `level` closes at the transition to `level - 1`.
    pub fn closes(&self, level: i32, index: i64) -> bool {
        let (jl, jr) = self.parent_borders(level, index);
        jl == jr
    }

    /// Path bit recording a birth at `level` (transition `level -> level-1`).
    pub fn birth_bit(&self, level: i32) -> u64 {
        let pos = self.depth as i32 - (level - self.top_level);
        debug_assert!((0..self.depth as i32).contains(&pos));
        1u64 << pos
    }

    /// Hierarchical id of band `index` at `level`, walking up to the top level
    /// over undeformed borders.
    pub fn global_id(&self, level: i32, index: i64) -> Result<GlobalBandId, BandError> {
        if level < self.top_level || level > self.deepest_level() {
            return Err(BandError::DepthExceeded {
                level,
                top: self.top_level,
                depth: self.depth,
            });
        }
        let mut index = index;
        let mut path = 0u64;
        let mut birth_level = None;
        for lvl in (self.top_level + 1..=level).rev() {
            let (jl, jr) = self.parent_borders(lvl, index);
            if jl == jr {
                path |= self.birth_bit(lvl);
                birth_level.get_or_insert(lvl);
            }
            index = jl;
        }
        let birth_level = birth_level.unwrap_or(self.top_level);
        Ok(GlobalBandId {
            id: self.compose_id(index, path)?,
            just_appeared: level > self.top_level && birth_level == level,
            birth_level,
        })
    }

    /// `top_index * 2^depth + path`, with negative top indices in two's complement.
    pub fn compose_id(&self, top_index: i64, path: u64) -> Result<u64, BandError> {
        let limit = 1i64 << (63 - self.depth);
        if top_index < -limit || top_index >= limit {
            return Err(BandError::IdOverflow {
                index: top_index,
                depth: self.depth,
            });
        }
        Ok(((top_index as u64) << self.depth) | path)
    }

    /// Splits an id into its top-level index and path bits.
    pub fn split_id(&self, id: u64) -> (i64, u64) {
        let top = (id as i64) >> self.depth;
        let path = id & ((1u64 << self.depth) - 1);
        (top, path)
    }

    /// The band lookup: unique id and local geometry of the band enclosing `v`
    /// at density `d`.
    pub fn lookup(&self, v: f64, d: f64) -> Result<BandSample, BandError> {
        if !v.is_finite() {
            return Err(BandError::NonFiniteParameter(v));
        }
        let q = self.quantize(d)?;
        let (band, _) = self.locate(v, &q);
        let gid = self.global_id(band.level, band.index)?;
        Ok(BandSample {
            v,
            d,
            clamped: q.clamped,
            alpha: q.alpha,
            level: band.level,
            index: band.index,
            left: band.left,
            right: band.right,
            local_coord: band.local_coord,
            id: gid.id,
            just_appeared: gid.just_appeared,
            birth_level: gid.birth_level,
        })
    }
}

// (num/den)^exp by repeated multiplication, so results do not depend on the
// platform's pow.
fn ratio_pow(num: u32, den: u32, exp: i32) -> f64 {
    let ratio = if exp >= 0 {
        num as f64 / den as f64
    } else {
        den as f64 / num as f64
    };
    (0..exp.unsigned_abs()).fold(1.0, |acc, _| acc * ratio)
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn hashed_shift(level: i32, seed: u64) -> f64 {
    unit_from_bits(mix64(seed ^ mix64(level as i64 as u64)))
}
