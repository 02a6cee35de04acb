//! Scenes and their text configuration format.
//!
//! ```text
//! [bands]
//! step = "17/13"
//! shifts = explicit:0.1,0.7,0.3
//! depth = 3
//!
//! [fields]
//! u = "hypot(x, y)"
//! d = stretch:0.05
//!
//! [view]
//! rect = -1,-1,1,1
//!
//! [output]
//! mode = curves
//! resolution = 256x256
//! ```
//!
//! Field values are a quoted expression, `const:V`, `stretch:W` (density
//! only) or `image:PATH:LO:HI` (an 8-bit PGM stretched over the view).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::band::{BandConfig, BandError, BandSample, Profile, ShiftMode, Step, DEFAULT_DEPTH};
use crate::field::{
    compensated_density, FieldProgram, ImageField, ScalarField, DEFAULT_GRADIENT_FLOOR,
};
use crate::rect::Rect;
use crate::render::ColorStyle;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based line number; 0 when the problem is a missing key or section.
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    /// Path as written in the config.
    pub path: String,
    pub lo: f64,
    pub hi: f64,
    pub field: ImageField,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Expr(FieldProgram),
    Const(f64),
    /// Density compensating the stretch of `u` so bands sit about `spacing`
    /// world units apart.
    Stretch {
        spacing: f64,
    },
    Image(ImageSource),
}

impl ScalarField for FieldSource {
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            FieldSource::Expr(p) => p.eval(x, y, t),
            FieldSource::Const(v) => *v,
            FieldSource::Stretch { .. } => f64::NAN,
            FieldSource::Image(img) => img.field.sample(x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("field evaluated to a non-finite value")]
    NonFinite,
    #[error(transparent)]
    Band(#[from] BandError),
}

/// One parameter field, its density field and band parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    pub u: FieldSource,
    pub d: FieldSource,
    pub bands: BandConfig,
}

impl BandSet {
    pub fn new(u: FieldSource, d: FieldSource, bands: BandConfig) -> Self {
        BandSet { u, d, bands }
    }

    /// Density at a point; `h` is the finite-difference step for `stretch`.
    pub fn density(&self, x: f64, y: f64, t: f64, h: f64) -> f64 {
        match &self.d {
            FieldSource::Stretch { spacing } => {
                compensated_density(&self.u, x, y, t, *spacing, DEFAULT_GRADIENT_FLOOR, h)
            }
            d => d.value(x, y, t),
        }
    }

    pub fn sample(&self, x: f64, y: f64, t: f64, h: f64) -> Result<BandSample, SampleError> {
        let u = self.u.value(x, y, t);
        let d = self.density(x, y, t, h);
        if !u.is_finite() || !d.is_finite() {
            return Err(SampleError::NonFinite);
        }
        Ok(self.bands.lookup(u, d)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Bands,
    Curves,
    Centerlines,
    /// Keep only bands born at or above this level.
    Tear(i32),
    Weave,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSpec {
    pub mode: OutputMode,
    pub width: usize,
    pub height: usize,
    pub style: ColorStyle,
    /// Half-width fraction kept by band thinning in weave mode.
    pub thin: f64,
    /// Douglas-Peucker tolerance for extracted curves, world units; 0 keeps all.
    pub simplify: f64,
    /// Neighbor-averaging passes over extracted curves.
    pub smooth: u32,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            mode: OutputMode::Bands,
            width: 512,
            height: 512,
            style: ColorStyle::HashColor,
            thin: 0.25,
            simplify: 0.0,
            smooth: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub primary: BandSet,
    /// Second band set, used for weaving.
    pub secondary: Option<BandSet>,
    pub view: Rect,
    pub t: f64,
    pub output: OutputSpec,
}

impl Scene {
    pub fn new(primary: BandSet, view: Rect) -> Self {
        Scene {
            primary,
            secondary: None,
            view,
            t: 0.0,
            output: OutputSpec::default(),
        }
    }

    /// Finite-difference step for density compensation: 1e-4 of the view width.
    pub fn gradient_step(&self) -> f64 {
        1e-4 * self.view.width()
    }

    pub fn parse(text: &str) -> Result<Scene, ConfigError> {
        parse_scene_config(text, Path::new("."))
    }

    pub fn load(path: &Path) -> Result<Scene, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(0, format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        parse_scene_config(&text, base)
    }

    /// Config text that parses back to an equal scene.
    pub fn to_config(&self) -> String {
        print_scene_config(self)
    }
}

#[derive(Debug, Clone)]
struct Value {
    text: String,
    quoted: bool,
    line: usize,
}

type Section = BTreeMap<String, Value>;

const SECTIONS: [(&str, &[&str]); 6] = [
    (
        "bands",
        &["step", "top_level", "depth", "shifts", "profile", "clamp"],
    ),
    ("fields", &["u", "d"]),
    ("view", &["rect", "t"]),
    (
        "bands2",
        &["step", "top_level", "depth", "shifts", "profile", "clamp"],
    ),
    ("fields2", &["u", "d"]),
    (
        "output",
        &["mode", "resolution", "style", "thin", "simplify", "smooth"],
    ),
];

/// Parses a scene config; relative image paths resolve against `base_dir`.
pub fn parse_scene_config(text: &str, base_dir: &Path) -> Result<Scene, ConfigError> {
    let sections = split_sections(text)?;
    let empty = Section::new();
    let get = |name: &str| sections.get(name).map(|(_, s)| s).unwrap_or(&empty);
    let require_section = |name: &str| {
        sections
            .get(name)
            .map(|(_, s)| s)
            .ok_or_else(|| ConfigError::new(0, format!("missing section [{name}]")))
    };

    let view_sec = require_section("view")?;
    let view = parse_rect(required(view_sec, "view", "rect")?)?;
    let t = optional(view_sec, "t", 0.0, parse_f64)?;

    let bands = parse_bands(require_section("bands")?)?;
    let primary = parse_fields(require_section("fields")?, "fields", bands, view, base_dir)?;

    let secondary = match (sections.get("bands2"), sections.get("fields2")) {
        (_, Some((_, fields))) => {
            let bands = match sections.get("bands2") {
                Some((_, b)) => parse_bands(b)?,
                None => primary.bands.clone(),
            };
            Some(parse_fields(fields, "fields2", bands, view, base_dir)?)
        }
        (Some((line, _)), None) => {
            return Err(ConfigError::new(
                *line,
                "[bands2] requires a [fields2] section",
            ));
        }
        (None, None) => None,
    };

    let output = parse_output(get("output"))?;
    if output.mode == OutputMode::Weave && secondary.is_none() {
        return Err(ConfigError::new(
            0,
            "mode = weave requires a [fields2] section",
        ));
    }
    if let OutputMode::Tear(level) = output.mode {
        let cfg = &primary.bands;
        if level < cfg.top_level() || level > cfg.deepest_level() {
            let line = get("output").get("mode").map_or(0, |v| v.line);
            return Err(ConfigError::new(
                line,
                format!(
                    "tear level must lie in {}..={}",
                    cfg.top_level(),
                    cfg.deepest_level()
                ),
            ));
        }
    }

    Ok(Scene {
        primary,
        secondary,
        view,
        t,
        output,
    })
}

fn split_sections(text: &str) -> Result<BTreeMap<String, (usize, Section)>, ConfigError> {
    let mut sections: BTreeMap<String, (usize, Section)> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = strip_comment(rest)
                .trim()
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(line, "unterminated section header"))?
                .trim()
                .to_string();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::new(line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(&name) {
                return Err(ConfigError::new(
                    line,
                    format!("duplicate section [{name}]"),
                ));
            }
            sections.insert(name.clone(), (line, Section::new()));
            current = Some(name);
            continue;
        }
        let (key, rest) = trimmed
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line, "expected key = value"))?;
        let key = key.trim();
        let Some(section) = current.as_ref() else {
            return Err(ConfigError::new(
                line,
                format!("key {key:?} outside of a section"),
            ));
        };
        let allowed = SECTIONS.iter().find(|(s, _)| s == section).unwrap().1;
        if !allowed.contains(&key) {
            return Err(ConfigError::new(
                line,
                format!("unknown key {key:?} in [{section}]"),
            ));
        }
        let value = parse_value(rest.trim(), line)?;
        let entries = &mut sections.get_mut(section).unwrap().1;
        if entries.insert(key.to_string(), value).is_some() {
            return Err(ConfigError::new(line, format!("duplicate key {key:?}")));
        }
    }
    Ok(sections)
}

fn strip_comment(s: &str) -> &str {
    s.split_once('#').map_or(s, |(a, _)| a)
}

fn parse_value(s: &str, line: usize) -> Result<Value, ConfigError> {
    let Some(body) = s.strip_prefix('"') else {
        let text = strip_comment(s).trim().to_string();
        if text.is_empty() {
            return Err(ConfigError::new(line, "empty value"));
        }
        return Ok(Value {
            text,
            quoted: false,
            line,
        });
    };
    let mut text = String::new();
    let mut chars = body.char_indices();
    while let Some((k, c)) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some((_, e @ ('"' | '\\'))) => text.push(e),
                _ => return Err(ConfigError::new(line, "invalid escape in string")),
            },
            '"' => {
                let tail = strip_comment(&body[k + 1..]).trim();
                if !tail.is_empty() {
                    return Err(ConfigError::new(line, "unexpected text after string"));
                }
                return Ok(Value {
                    text,
                    quoted: true,
                    line,
                });
            }
            c => text.push(c),
        }
    }
    Err(ConfigError::new(line, "unterminated string"))
}

fn required<'a>(sec: &'a Section, section: &str, key: &str) -> Result<&'a Value, ConfigError> {
    sec.get(key)
        .ok_or_else(|| ConfigError::new(0, format!("missing required key {key:?} in [{section}]")))
}

fn optional<T>(
    sec: &Section,
    key: &str,
    default: T,
    parse: impl Fn(&Value) -> Result<T, ConfigError>,
) -> Result<T, ConfigError> {
    sec.get(key).map_or(Ok(default), parse)
}

fn parse_f64(v: &Value) -> Result<f64, ConfigError> {
    parse_number(&v.text, v.line)
}

fn parse_number(s: &str, line: usize) -> Result<f64, ConfigError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::new(line, format!("expected a finite number, got {s:?}")))
}

fn parse_int<T: std::str::FromStr>(v: &Value) -> Result<T, ConfigError> {
    v.text
        .trim()
        .parse::<T>()
        .map_err(|_| ConfigError::new(v.line, format!("expected an integer, got {:?}", v.text)))
}

fn parse_rect(v: &Value) -> Result<Rect, ConfigError> {
    let parts: Vec<&str> = v.text.split(',').collect();
    if parts.len() != 4 {
        return Err(ConfigError::new(v.line, "rect must be x0,y0,x1,y1"));
    }
    let n: Vec<f64> = parts
        .iter()
        .map(|p| parse_number(p, v.line))
        .collect::<Result<_, _>>()?;
    let rect = Rect::new(n[0], n[1], n[2], n[3]);
    if !rect.is_valid() {
        return Err(ConfigError::new(
            v.line,
            "rect must satisfy x0 < x1 and y0 < y1",
        ));
    }
    Ok(rect)
}

fn parse_bands(sec: &Section) -> Result<BandConfig, ConfigError> {
    let step_value = required(sec, "bands", "step")?;
    let step: Step = step_value
        .text
        .parse()
        .map_err(|e: BandError| ConfigError::new(step_value.line, e.to_string()))?;
    let mut builder = BandConfig::builder(step)
        .top_level(optional(sec, "top_level", 0, parse_int)?)
        .depth(optional(sec, "depth", DEFAULT_DEPTH, parse_int)?);
    if let Some(v) = sec.get("shifts") {
        builder = builder.shifts(parse_shifts(v)?);
    }
    if let Some(v) = sec.get("profile") {
        let profile = match v.text.as_str() {
            "linear" => Profile::Linear,
            "smoothstep" => Profile::Smoothstep,
            other => {
                return Err(ConfigError::new(
                    v.line,
                    format!("unknown profile {other:?}"),
                ));
            }
        };
        builder = builder.profile(profile);
    }
    builder = builder.clamp(optional(sec, "clamp", true, |v| {
        v.text
            .parse::<bool>()
            .map_err(|_| ConfigError::new(v.line, "clamp must be true or false"))
    })?);
    let line = sec.values().map(|v| v.line).min().unwrap_or(0);
    builder
        .build()
        .map_err(|e| ConfigError::new(line, e.to_string()))
}

fn parse_shifts(v: &Value) -> Result<ShiftMode, ConfigError> {
    let text = v.text.as_str();
    if text == "halves" {
        return Ok(ShiftMode::Halves);
    }
    if let Some(seed) = text.strip_prefix("hashed:") {
        return seed
            .trim()
            .parse()
            .map(ShiftMode::Hashed)
            .map_err(|_| ConfigError::new(v.line, "hashed seed must be an unsigned integer"));
    }
    if let Some(list) = text.strip_prefix("explicit:") {
        let values = list
            .split(',')
            .map(|s| parse_number(s, v.line))
            .collect::<Result<_, _>>()?;
        return Ok(ShiftMode::Explicit(values));
    }
    Err(ConfigError::new(
        v.line,
        format!("unknown shifts {text:?}; expected halves, hashed:SEED or explicit:R1,R2,..."),
    ))
}

fn parse_fields(
    sec: &Section,
    section: &str,
    bands: BandConfig,
    view: Rect,
    base_dir: &Path,
) -> Result<BandSet, ConfigError> {
    let u_value = required(sec, section, "u")?;
    let u = parse_field(u_value, view, base_dir)?;
    if matches!(u, FieldSource::Stretch { .. }) {
        return Err(ConfigError::new(
            u_value.line,
            "stretch is only valid for d",
        ));
    }
    let d_value = required(sec, section, "d")?;
    let d = parse_field(d_value, view, base_dir)?;
    if let FieldSource::Const(c) = d {
        if c <= 0.0 {
            return Err(ConfigError::new(
                d_value.line,
                "constant density must be positive",
            ));
        }
    }
    Ok(BandSet { u, d, bands })
}

fn parse_field(v: &Value, view: Rect, base_dir: &Path) -> Result<FieldSource, ConfigError> {
    let expr = |text: &str| {
        FieldProgram::parse(text)
            .map(FieldSource::Expr)
            .map_err(|e| ConfigError::new(v.line, format!("in expression: {e}")))
    };
    if v.quoted {
        return expr(&v.text);
    }
    let text = v.text.as_str();
    if let Some(c) = text.strip_prefix("const:") {
        return Ok(FieldSource::Const(parse_number(c, v.line)?));
    }
    if let Some(w) = text.strip_prefix("stretch:") {
        let spacing = parse_number(w, v.line)?;
        if spacing <= 0.0 {
            return Err(ConfigError::new(v.line, "stretch spacing must be positive"));
        }
        return Ok(FieldSource::Stretch { spacing });
    }
    if let Some(rest) = text.strip_prefix("image:") {
        let mut parts = rest.rsplitn(3, ':');
        let (hi, lo, path) = match (parts.next(), parts.next(), parts.next()) {
            (Some(hi), Some(lo), Some(path)) if !path.is_empty() => (hi, lo, path),
            _ => {
                return Err(ConfigError::new(
                    v.line,
                    "image field must be image:PATH:LO:HI",
                ))
            }
        };
        let (lo, hi) = (parse_number(lo, v.line)?, parse_number(hi, v.line)?);
        let field = ImageField::load(&base_dir.join(path), view, lo, hi)
            .map_err(|e| ConfigError::new(v.line, e.to_string()))?;
        return Ok(FieldSource::Image(ImageSource {
            path: path.to_string(),
            lo,
            hi,
            field,
        }));
    }
    expr(text)
}

fn parse_output(sec: &Section) -> Result<OutputSpec, ConfigError> {
    let mut out = OutputSpec::default();
    if let Some(v) = sec.get("mode") {
        out.mode = match v.text.as_str() {
            "bands" => OutputMode::Bands,
            "curves" => OutputMode::Curves,
            "centerlines" => OutputMode::Centerlines,
            "weave" => OutputMode::Weave,
            other => match other.strip_prefix("tear:") {
                Some(k) => OutputMode::Tear(
                    k.trim()
                        .parse()
                        .map_err(|_| ConfigError::new(v.line, "tear level must be an integer"))?,
                ),
                None => return Err(ConfigError::new(v.line, format!("unknown mode {other:?}"))),
            },
        };
    }
    if let Some(v) = sec.get("resolution") {
        let parsed = v
            .text
            .split_once('x')
            .and_then(|(w, h)| Some((w.trim().parse().ok()?, h.trim().parse().ok()?)));
        match parsed {
            Some((w, h)) if w >= 1 && h >= 1 => (out.width, out.height) = (w, h),
            _ => {
                return Err(ConfigError::new(
                    v.line,
                    "resolution must be WxH with W, H >= 1",
                ))
            }
        }
    }
    if let Some(v) = sec.get("style") {
        out.style = match v.text.as_str() {
            "hash" => ColorStyle::HashColor,
            "gray" => ColorStyle::Grayscale,
            "shade" => ColorStyle::BorderShade,
            other => return Err(ConfigError::new(v.line, format!("unknown style {other:?}"))),
        };
    }
    if let Some(v) = sec.get("thin") {
        out.thin = parse_f64(v)?;
        if !(out.thin > 0.0 && out.thin <= 0.5) {
            return Err(ConfigError::new(v.line, "thin must lie in (0, 0.5]"));
        }
    }
    if let Some(v) = sec.get("simplify") {
        out.simplify = parse_f64(v)?;
        if out.simplify < 0.0 {
            return Err(ConfigError::new(v.line, "simplify must be >= 0"));
        }
    }
    out.smooth = optional(sec, "smooth", 0, parse_int)?;
    Ok(out)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn print_field(f: &FieldSource) -> String {
    match f {
        FieldSource::Expr(p) => quote(&p.to_string()),
        FieldSource::Const(c) => format!("const:{c}"),
        FieldSource::Stretch { spacing } => format!("stretch:{spacing}"),
        FieldSource::Image(img) => format!("image:{}:{}:{}", img.path, img.lo, img.hi),
    }
}

fn print_bands(out: &mut String, name: &str, cfg: &BandConfig) {
    let shifts = match cfg.shifts() {
        ShiftMode::Halves => "halves".to_string(),
        ShiftMode::Hashed(seed) => format!("hashed:{seed}"),
        ShiftMode::Explicit(values) => {
            let list: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            format!("explicit:{}", list.join(","))
        }
    };
    let profile = match cfg.profile() {
        Profile::Linear => "linear",
        Profile::Smoothstep => "smoothstep",
    };
    let _ = writeln!(out, "[{name}]");
    let _ = writeln!(out, "step = \"{}\"", cfg.step());
    let _ = writeln!(out, "top_level = {}", cfg.top_level());
    let _ = writeln!(out, "depth = {}", cfg.depth());
    let _ = writeln!(out, "shifts = {shifts}");
    let _ = writeln!(out, "profile = {profile}");
    let _ = writeln!(out, "clamp = {}\n", cfg.clamps());
}

fn print_fields(out: &mut String, name: &str, set: &BandSet) {
    let _ = writeln!(out, "[{name}]");
    let _ = writeln!(out, "u = {}", print_field(&set.u));
    let _ = writeln!(out, "d = {}\n", print_field(&set.d));
}

pub fn print_scene_config(scene: &Scene) -> String {
    let mut out = String::new();
    print_bands(&mut out, "bands", &scene.primary.bands);
    print_fields(&mut out, "fields", &scene.primary);
    if let Some(second) = &scene.secondary {
        print_bands(&mut out, "bands2", &second.bands);
        print_fields(&mut out, "fields2", second);
    }
    let v = scene.view;
    let _ = writeln!(out, "[view]");
    let _ = writeln!(out, "rect = {},{},{},{}", v.x0, v.y0, v.x1, v.y1);
    let _ = writeln!(out, "t = {}\n", scene.t);
    let o = &scene.output;
    let mode = match o.mode {
        OutputMode::Bands => "bands".to_string(),
        OutputMode::Curves => "curves".to_string(),
        OutputMode::Centerlines => "centerlines".to_string(),
        OutputMode::Tear(k) => format!("tear:{k}"),
        OutputMode::Weave => "weave".to_string(),
    };
    let style = match o.style {
        ColorStyle::HashColor => "hash",
        ColorStyle::Grayscale => "gray",
        ColorStyle::BorderShade => "shade",
    };
    let _ = writeln!(out, "[output]");
    let _ = writeln!(out, "mode = {mode}");
    let _ = writeln!(out, "resolution = {}x{}", o.width, o.height);
    let _ = writeln!(out, "style = {style}");
    let _ = writeln!(out, "thin = {}", o.thin);
    let _ = writeln!(out, "simplify = {}", o.simplify);
    let _ = writeln!(out, "smooth = {}", o.smooth);
    out
}
