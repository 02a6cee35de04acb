//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use bands_core::band::oracle::oracle_bands;
use bands_core::band::{BandConfig, ShiftMode, Step};
use bands_core::export::polylines_to_json;
use bands_core::extract::{
    differing_edge_count, extract_borders, extract_centerlines, scene_curves, CurveKind,
};
use bands_core::field::FieldProgram;
use bands_core::raster::{rasterize, rasterize_with_threads, IdMap};
use bands_core::render::{colorize, render_scene, ColorStyle};
use bands_core::scene::{BandSet, FieldSource};
use bands_core::{Rect, Scene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

// Criterion 1
const ORACLE_SAMPLES: usize = 10_000;
const ORACLE_DEPTH: u32 = 5;
const ORACLE_ALPHAS: [f64; 3] = [0.0, 0.25, 0.75];
const BOUNDARY_EPS: f64 = 1e-9;
const ORACLE_TIME_LIMIT_S: f64 = 10.0;
// Criterion 2
const CLOSURE_WINDOWS: i64 = 10;
// Criterion 3
const STABILITY_PAIRS: usize = 1_000;
const STABILITY_REL: f64 = 1e-6;
const MAX_EXCEPTION_RATE: f64 = 0.05;
// Criterion 4
const COUNT_DENSITIES: [f64; 4] = [2.0, 2.5, 3.0, 3.9];
const COUNT_SAMPLES: usize = 4096;
// Criterion 5
const PERIOD_TOP_BANDS: i64 = 4;
const PERIOD_FINE_BANDS: i64 = 9;
const PERIOD_WINDOW_TOP: i64 = 40;
// Criterion 6
const HALVING_BANDS: i64 = 64;
// Criterion 7
const CENTERLINE_RES: usize = 512;
const CENTERLINE_SPACING: f64 = 0.25;
const CENTERLINE_TOL_CELLS: f64 = 2.0;
// Criterion 8
const EXTRACT_RES: usize = 256;
const MIDPOINT_QUERIES: usize = 100;
// Criterion 9
const SPEED_RES: usize = 1024;
const SINGLE_THREAD_LIMIT_S: f64 = 2.0;
const MIN_SPEEDUP: f64 = 2.0;
const SPEEDUP_THREADS: usize = 4;

// Criterion 10: sha256 of the rendered PPM and of the border JSON, as written
// by `bands render` and `bands curves`.
const GOLDEN: [(&str, &str, &str); 3] = [
    (
        "linear_tear",
        "46c7880d3d3d5b47d8d4ba602ea05c7262a4df6e711b3b1ef7f7d810aa0a82e5",
        "472648ce63edd5c04f53515e7c122f01743504d0ed63dfc2f9bb105bdae9d446",
    ),
    (
        "radial",
        "77d6505e37b04328ae1d99d1d46c53e88161164bd2b3d083d1df84cfbe3ae0b2",
        "e7d98dc2163b789b9de0395aee52ace0f2af8cd85c4435170fb32e7ff8fe92b0",
    ),
    (
        "weave",
        "ffc61b43a4ecf6e33a5b67cebbeb8693ec547c2850e26bf3379942bb9b520743",
        "da5382118c3609b9e9d4ac757a113875fe08e2a73b1c7f32f9d6a6ce0a480331",
    ),
];

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn record(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        println!(
            "{} {id:>3} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn workspace_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn load_scene(name: &str) -> Scene {
    Scene::load(&workspace_file(&format!("scenes/{name}.scene"))).expect("shipped scene parses")
}

fn steps() -> [Step; 3] {
    [
        Step::TWO,
        Step::new(3, 2).unwrap(),
        Step::new(17, 13).unwrap(),
    ]
}

fn shift_modes(depth: u32) -> [(&'static str, ShiftMode); 3] {
    [
        ("zeros", ShiftMode::Explicit(vec![0.0; depth as usize])),
        ("halves", ShiftMode::Halves),
        ("hashed(7)", ShiftMode::Hashed(7)),
    ]
}

fn configs(depth: u32) -> Vec<(String, BandConfig)> {
    let mut out = Vec::new();
    for step in steps() {
        for (name, shifts) in shift_modes(depth) {
            let cfg = BandConfig::builder(step)
                .depth(depth)
                .shifts(shifts)
                .build()
                .unwrap();
            out.push((format!("{step} {name}"), cfg));
        }
    }
    out
}

/// Density at `level` pulled toward `level - 1` by `alpha` (linear profile).
fn density_for(cfg: &BandConfig, level: i32, alpha: f64) -> f64 {
    let fine = cfg.level_density(level);
    fine - alpha * (fine - cfg.level_density(level - 1))
}

fn closes_by_id(cfg: &BandConfig, level: i32, index: i64) -> bool {
    cfg.global_id(level, index).unwrap().id & cfg.birth_bit(level) != 0
}

fn linear_scene(step: Step, d: f64, view: Rect) -> Scene {
    let bands = BandConfig::new(step);
    let set = BandSet::new(
        FieldSource::Expr(FieldProgram::parse("x").unwrap()),
        FieldSource::Const(d),
        bands,
    );
    Scene::new(set, view)
}

fn oracle_equivalence(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut compared, mut skipped, mut mismatches) = (0usize, 0usize, 0usize);
    let mut first_mismatch = None;
    for (name, cfg) in configs(ORACLE_DEPTH) {
        for level in 1..=ORACLE_DEPTH as i32 {
            for alpha in ORACLE_ALPHAS {
                let d = density_for(&cfg, level, alpha);
                let q = cfg.quantize(d).unwrap();
                if q.fine_level != level {
                    mismatches += 1;
                    continue;
                }
                let table = oracle_bands(&cfg, 0.0..4.0, level, q.alpha);
                for _ in 0..ORACLE_SAMPLES {
                    let v = rng.gen_range(0.0..4.0);
                    let band = match table.find(v) {
                        Some(b) if (v - b.left).min(b.right - v) >= BOUNDARY_EPS => b,
                        _ => {
                            skipped += 1;
                            continue;
                        }
                    };
                    compared += 1;
                    let s = cfg.lookup(v, d).unwrap();
                    if s.id != band.id {
                        mismatches += 1;
                        first_mismatch.get_or_insert(format!("{name} L={level} a={alpha} v={v}"));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mut detail = format!(
        "{compared} samples, {mismatches} mismatches, {skipped} boundary skips, {secs:.2} s (limit {ORACLE_TIME_LIMIT_S} s)"
    );
    if let Some(m) = first_mismatch {
        detail.push_str(&format!(", first at {m}"));
    }
    report.record(
        "1",
        "oracle equivalence",
        mismatches == 0 && secs < ORACLE_TIME_LIMIT_S,
        detail,
    );
}

fn closure_counts(report: &mut Report) {
    let depth = ORACLE_DEPTH;
    let mut bad = Vec::new();
    let mut windows = 0;
    for (name, cfg) in configs(depth) {
        let (n, m) = (cfg.step().num() as i64, cfg.step().den() as i64);
        for level in 1..=depth as i32 {
            for w in 0..CLOSURE_WINDOWS {
                let first = (w - CLOSURE_WINDOWS / 2) * n;
                let closures = (first..first + n)
                    .filter(|&i| closes_by_id(&cfg, level, i))
                    .count() as i64;
                windows += 1;
                if closures != n - m {
                    bad.push(format!("{name} L={level} window {w}: {closures}"));
                }
            }
        }
    }
    report.record(
        "2",
        "closure counts",
        bad.is_empty(),
        format!(
            "{windows} windows, expected N-M closures each, {} off{}",
            bad.len(),
            first_of(&bad)
        ),
    );
}

fn first_of(items: &[String]) -> String {
    items
        .first()
        .map(|s| format!(" (e.g. {s})"))
        .unwrap_or_default()
}

fn cross_level_stability(report: &mut Report) {
    let depth = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut total, mut exceptions, mut violations) = (0usize, 0usize, Vec::new());
    for (name, cfg) in configs(depth) {
        for _ in 0..STABILITY_PAIRS {
            let v = rng.gen_range(-4.0..4.0);
            let level = rng.gen_range(1..depth as i32);
            let rho = cfg.level_density(level);
            let coarse = cfg.lookup(v, rho * (1.0 - STABILITY_REL)).unwrap();
            let fine = cfg.lookup(v, rho * (1.0 + STABILITY_REL)).unwrap();
            total += 1;
            if coarse.id != fine.id {
                if fine.just_appeared {
                    exceptions += 1;
                } else {
                    violations.push(format!("{name} L={level} v={v}"));
                }
            }
        }
    }
    let rate = exceptions as f64 / total as f64;
    report.record(
        "3",
        "cross-level id stability",
        violations.is_empty() && rate < MAX_EXCEPTION_RATE,
        format!(
            "{total} pairs, {} unexplained changes, just-appeared exception rate {:.4} (limit {MAX_EXCEPTION_RATE}){}",
            violations.len(),
            rate,
            first_of(&violations)
        ),
    );
}

fn band_count_vs_density(report: &mut Report) {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in COUNT_DENSITIES {
        let scene = linear_scene(Step::TWO, d, Rect::UNIT);
        let map = rasterize(&scene, COUNT_SAMPLES, 1).unwrap();
        let ids: BTreeSet<u64> = map.cells().iter().map(|c| c.id).collect();
        let n = ids.len() as f64;
        let fine_level = scene.primary.bands.quantize(d).unwrap().fine_level;
        let expected = scene.primary.bands.level_density(fine_level);
        let ok = n >= d && n <= 2.0 * d && (n - expected).abs() <= 1.0;
        pass &= ok;
        parts.push(format!("d={d}: {n} ids (2^{fine_level}={expected})"));
    }
    report.record("4", "band count vs density", pass, parts.join(", "));
}

fn periodicity(report: &mut Report) {
    let step = Step::new(3, 2).unwrap();
    let depth = 4;
    let cfg = BandConfig::builder(step)
        .depth(depth)
        .shifts(ShiftMode::Explicit(vec![0.0; depth as usize]))
        .build()
        .unwrap();
    let level = 2;
    let count = PERIOD_WINDOW_TOP * PERIOD_FINE_BANDS / PERIOD_TOP_BANDS;
    let ids: Vec<(i64, u64)> = (0..count)
        .map(|i| cfg.split_id(cfg.global_id(level, i).unwrap().id))
        .collect();
    let repeats = |p: usize| {
        let offset = ids[p].0 - ids[0].0;
        (0..ids.len() - p).all(|i| ids[i + p].1 == ids[i].1 && ids[i + p].0 - ids[i].0 == offset)
    };
    let period = PERIOD_FINE_BANDS as usize;
    let structural = repeats(period) && ids[period].0 - ids[0].0 == PERIOD_TOP_BANDS;
    let minimal = (1..period).all(|p| !repeats(p));

    // Same check through lookups at a blended density.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = density_for(&cfg, level, 0.5);
    let top = PERIOD_TOP_BANDS as f64;
    let mut lookup_bad = 0;
    let mut lookups = 0;
    while lookups < 2000 {
        let v = rng.gen_range(0.0..(PERIOD_WINDOW_TOP as f64 - top));
        let (a, b) = (cfg.lookup(v, d).unwrap(), cfg.lookup(v + top, d).unwrap());
        let near = |s: &bands_core::BandSample| (s.v - s.left).min(s.right - s.v) < BOUNDARY_EPS;
        if near(&a) || near(&b) {
            continue;
        }
        lookups += 1;
        let (ta, pa) = cfg.split_id(a.id);
        let (tb, pb) = cfg.split_id(b.id);
        if pa != pb || tb - ta != PERIOD_TOP_BANDS {
            lookup_bad += 1;
        }
    }
    report.record(
        "5",
        "periodicity",
        structural && minimal && lookup_bad == 0,
        format!(
            "step 3/2 level {level}: period {period} bands = {PERIOD_TOP_BANDS} top bands: {structural}, no shorter period: {minimal}, {lookup_bad}/{lookups} lookup pairs off"
        ),
    );
}

fn balanced_halving(report: &mut Report) {
    let depth = 6;
    let cfg = BandConfig::builder(Step::TWO)
        .depth(depth)
        .shifts(ShiftMode::Halves)
        .build()
        .unwrap();
    let half = HALVING_BANDS / 2;
    let table = oracle_bands(&cfg, -(half as f64)..half as f64, depth as i32, 0.0);
    let mut bad = Vec::new();
    for level in 1..=depth as i32 {
        for i in -half..half {
            let even = i.rem_euclid(2) == 0;
            let by_id = closes_by_id(&cfg, level, i);
            let by_oracle = table.closes(level, i);
            if by_id != even || by_oracle != Some(even) {
                bad.push(format!("L={level} i={i}"));
            }
        }
    }
    report.record(
        "6",
        "balanced halving",
        bad.is_empty(),
        format!(
            "{} transitions x {HALVING_BANDS} bands, {} not closing exactly at even indices{}",
            depth,
            bad.len(),
            first_of(&bad)
        ),
    );
}

fn centerline_evenness(report: &mut Report) {
    let scene = linear_scene(Step::TWO, 4.0, Rect::UNIT);
    let polys = extract_centerlines(&scene, CENTERLINE_RES, CENTERLINE_RES).unwrap();
    let mut xs: Vec<f64> = polys
        .iter()
        .map(|p| p.points.iter().map(|q| q[0]).sum::<f64>() / p.points.len() as f64)
        .collect();
    xs.sort_by(f64::total_cmp);
    let tol = CENTERLINE_TOL_CELLS / CENTERLINE_RES as f64;
    let gaps: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let worst = gaps
        .iter()
        .map(|g| (g - CENTERLINE_SPACING).abs())
        .fold(0.0, f64::max);
    report.record(
        "7",
        "centerline evenness",
        gaps.len() >= 2 && worst <= tol,
        format!(
            "{} centerlines at x = {:?}, worst gap error {worst:.2e} (limit {tol:.2e})",
            xs.len(),
            xs.iter()
                .map(|x| (x * 1e6).round() / 1e6)
                .collect::<Vec<_>>()
        ),
    );
}

fn corner_ids(map: &IdMap, i: usize, j: usize) -> BTreeSet<Option<u64>> {
    let mut out = BTreeSet::new();
    for (c, r) in [
        (i.wrapping_sub(1), j.wrapping_sub(1)),
        (i, j.wrapping_sub(1)),
        (i.wrapping_sub(1), j),
        (i, j),
    ] {
        if c < map.width() && r < map.height() {
            out.insert(map.cell(c, r).label());
        }
    }
    out
}

fn extraction_conservation(report: &mut Report) {
    let scene = load_scene("radial");
    let (w, h) = (EXTRACT_RES, EXTRACT_RES);
    let map = rasterize(&scene, w, h).unwrap();
    let polys = extract_borders(&map);
    let view = scene.view;
    let (cw, ch) = (view.width() / w as f64, view.height() / h as f64);
    let lattice = |p: [f64; 2]| {
        (
            ((p[0] - view.x0) / cw).round() as usize,
            ((p[1] - view.y0) / ch).round() as usize,
        )
    };

    let mut units = 0usize;
    for p in &polys {
        for s in p.points.windows(2) {
            let (a, b) = (lattice(s[0]), lattice(s[1]));
            units += a.0.abs_diff(b.0) + a.1.abs_diff(b.1);
        }
    }
    let edges = differing_edge_count(&map);

    let mut unterminated = 0;
    for p in polys.iter().filter(|p| !p.closed) {
        for end in [p.points[0], *p.points.last().unwrap()] {
            let (i, j) = lattice(end);
            let boundary = i == 0 || j == 0 || i == w || j == h;
            if !boundary && corner_ids(&map, i, j).len() < 3 {
                unterminated += 1;
            }
        }
    }

    // Re-query the band set at the cell centers on both sides of random unit edges.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut label_bad = 0;
    for _ in 0..MIDPOINT_QUERIES {
        let p = &polys[rng.gen_range(0..polys.len())];
        let k = rng.gen_range(0..p.points.len() - 1);
        let (a, b) = (lattice(p.points[k]), lattice(p.points[k + 1]));
        let len = a.0.abs_diff(b.0) + a.1.abs_diff(b.1);
        let t = rng.gen_range(0..len);
        let sides = if a.0 == b.0 {
            let j = a.1.min(b.1) + t;
            [(a.0 - 1, j), (a.0, j)]
        } else {
            let i = a.0.min(b.0) + t;
            [(i, a.1 - 1), (i, a.1)]
        };
        let mut ids: Vec<u64> = sides
            .iter()
            .map(|&(c, r)| {
                let (x, y) = map.cell_center(c, r);
                scene
                    .primary
                    .sample(x, y, scene.t, scene.gradient_step())
                    .unwrap()
                    .id
            })
            .collect();
        ids.sort();
        if ids != [p.id_a, p.id_b] {
            label_bad += 1;
        }
    }
    report.record(
        "8",
        "extraction conservation",
        units == edges && unterminated == 0 && label_bad == 0,
        format!(
            "{} polylines, {units} unit segments vs {edges} differing edges, {unterminated} dangling ends, {label_bad}/{MIDPOINT_QUERIES} midpoint labels off",
            polys.len()
        ),
    );
}

fn timed_render(scene: &Scene, threads: usize) -> (IdMap, Vec<u8>, f64) {
    let start = Instant::now();
    let map = rasterize_with_threads(scene, SPEED_RES, SPEED_RES, threads).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ppm = colorize(&map, ColorStyle::HashColor).encode_ppm();
    (map, ppm, secs)
}

fn determinism_and_speed(report: &mut Report) {
    let scene = load_scene("radial");
    // Warm up code and allocator.
    let _ = rasterize_with_threads(&scene, 128, 128, 1).unwrap();
    let (map1, ppm1, t1) = timed_render(&scene, 1);
    let (map2, ppm2, _) = timed_render(&scene, 2);
    let (map4, ppm4, t4) = timed_render(&scene, SPEEDUP_THREADS);
    report.record(
        "9a",
        "deterministic across 1/2/4 threads",
        map1 == map2 && map1 == map4 && ppm1 == ppm2 && ppm1 == ppm4,
        format!("{SPEED_RES}x{SPEED_RES} id maps and PPM bytes compared"),
    );
    report.record(
        "9b",
        "single-thread rasterization time",
        t1 < SINGLE_THREAD_LIMIT_S,
        format!("{t1:.3} s (limit {SINGLE_THREAD_LIMIT_S} s)"),
    );
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let speedup = t1 / t4;
    let mut detail = format!("{speedup:.2}x with {SPEEDUP_THREADS} threads (need {MIN_SPEEDUP}x) on {cores} available core(s)");
    if cores < SPEEDUP_THREADS {
        detail.push_str("; this host cannot run 4 threads in parallel");
    }
    report.record("9c", "parallel speedup", speedup >= MIN_SPEEDUP, detail);
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn golden_files(report: &mut Report) {
    let mut mismatched = Vec::new();
    let mut unstable = Vec::new();
    for (name, ppm_digest, json_digest) in GOLDEN {
        let scene = load_scene(name);
        let (w, h) = (scene.output.width, scene.output.height);
        let run = || {
            let ppm = render_scene(&scene, w, h, 0).unwrap().encode_ppm();
            let json = polylines_to_json(&scene_curves(&scene, CurveKind::Borders, 0).unwrap());
            (sha256_hex(&ppm), sha256_hex(json.as_bytes()))
        };
        let first = run();
        if run() != first {
            unstable.push(name);
        }
        if first.0 != ppm_digest {
            mismatched.push(format!("{name}.ppm={}", first.0));
        }
        if first.1 != json_digest {
            mismatched.push(format!("{name}.json={}", first.1));
        }
    }
    report.record(
        "10",
        "golden files",
        mismatched.is_empty() && unstable.is_empty(),
        format!(
            "{} scenes, {} digests differ, {} unstable between runs{}",
            GOLDEN.len(),
            mismatched.len(),
            unstable.len(),
            if mismatched.is_empty() {
                String::new()
            } else {
                format!(": {}", mismatched.join(" "))
            }
        ),
    );
}

fn main() {
    let mut report = Report { failed: Vec::new() };
    oracle_equivalence(&mut report);
    closure_counts(&mut report);
    cross_level_stability(&mut report);
    band_count_vs_density(&mut report);
    periodicity(&mut report);
    balanced_halving(&mut report);
    centerline_evenness(&mut report);
    extraction_conservation(&mut report);
    determinism_and_speed(&mut report);
    golden_files(&mut report);
    if report.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {}", report.failed.join(", "));
        std::process::exit(1);
    }
}
