//! Procedural bands whose number adapts to a target density while every band
//! keeps a unique, hierarchical integer id.
//!
//! The pipeline runs from [`band`] (the one-dimensional lookup), through
//! [`field`] and [`scene`] (mapping the plane to a parameter and a density),
//! to [`raster`] (id maps), [`render`] (images) and [`extract`] / [`export`]
//! (curves).
//!
//! ```
//! use bands_core::band::{BandConfig, ShiftMode, Step};
//!
//! let cfg = BandConfig::builder(Step::new(17, 13)?)
//!     .depth(12)
//!     .shifts(ShiftMode::Hashed(3))
//!     .build()?;
//! let s = cfg.lookup(0.37, 5.2)?;
//! assert!(s.left <= 0.37 && 0.37 < s.right);
//! // The id depends only on the band's level and index.
//! assert_eq!(cfg.lookup(0.37, 5.2)?.id, cfg.global_id(s.level, s.index)?.id);
//! # Ok::<(), bands_core::BandError>(())
//! ```

pub mod band;
pub mod export;
pub mod extract;
pub mod field;
pub mod raster;
pub mod rect;
pub mod render;
pub mod scene;

pub use band::{BandConfig, BandError, BandSample, Profile, ShiftMode, Step};
pub use extract::LabeledPolyline;
pub use raster::{Cell, IdMap, RasterError};
pub use rect::Rect;
pub use render::{ColorStyle, Image};
pub use scene::{ConfigError, OutputMode, Scene};
