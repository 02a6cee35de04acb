//! Curve extraction from id maps.
//!
//! Borders are the staircase contours between 4-neighbor cells with different
//! ids, labeled by the id pair on either side. Centerlines are the
//! `local_coord = 0.5` isolines of fully deployed bands.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::raster::{rasterize_with_threads, IdMap, RasterError};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPolyline {
    /// Smaller id of the two bands on either side; equals `id_b` for centerlines.
    pub id_a: u64,
    pub id_b: u64,
    /// World coordinates. Closed polylines repeat their first point at the end.
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl LabeledPolyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// Lattice corner (i, j), 0 <= i <= width, 0 <= j <= height.
type Corner = (usize, usize);

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Corner,
    b: Corner,
    labels: (u64, u64),
}

fn pair(p: u64, q: u64) -> (u64, u64) {
    (p.min(q), p.max(q))
}

/// Unit border segments in scanline order: for each row, vertical edges left
/// to right, then the horizontal edges below that row.
fn border_segments(map: &IdMap) -> Vec<Segment> {
    let (w, h) = (map.width(), map.height());
    let rows: Vec<Vec<Segment>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::new();
            for c in 0..w.saturating_sub(1) {
                if let (Some(p), Some(q)) = (map.cell(c, r).label(), map.cell(c + 1, r).label()) {
                    if p != q {
                        out.push(Segment {
                            a: (c + 1, r),
                            b: (c + 1, r + 1),
                            labels: pair(p, q),
                        });
                    }
                }
            }
            if r + 1 < h {
                for c in 0..w {
                    if let (Some(p), Some(q)) = (map.cell(c, r).label(), map.cell(c, r + 1).label())
                    {
                        if p != q {
                            out.push(Segment {
                                a: (c, r + 1),
                                b: (c + 1, r + 1),
                                labels: pair(p, q),
                            });
                        }
                    }
                }
            }
            out
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Number of 4-neighbor cell pairs with different ids (both cells valid).
pub fn differing_edge_count(map: &IdMap) -> usize {
    border_segments(map).len()
}

// Distinct labels of the up-to-four cells around an interior corner.
fn corner_labels(map: &IdMap, (i, j): Corner) -> Vec<Option<u64>> {
    let mut out = Vec::with_capacity(4);
    for (dc, dr) in [(-1i64, -1i64), (0, -1), (-1, 0), (0, 0)] {
        let (c, r) = (i as i64 + dc, j as i64 + dr);
        if c >= 0 && r >= 0 && (c as usize) < map.width() && (r as usize) < map.height() {
            out.push(map.cell(c as usize, r as usize).label());
        }
    }
    out
}

fn is_junction(map: &IdMap, corner: Corner) -> bool {
    let mut labels = corner_labels(map, corner);
    labels.sort();
    labels.dedup();
    labels.len() >= 3
}

/// Extracts the labeled border network of an id map.
pub fn extract_borders(map: &IdMap) -> Vec<LabeledPolyline> {
    let segments = border_segments(map);
    let mut incident: HashMap<Corner, Vec<usize>> = HashMap::new();
    for (k, s) in segments.iter().enumerate() {
        incident.entry(s.a).or_default().push(k);
        incident.entry(s.b).or_default().push(k);
    }

    // links[k] = [segment continuing at end a, segment continuing at end b]
    let mut links: Vec<[Option<usize>; 2]> = vec![[None, None]; segments.len()];
    let connect = |links: &mut Vec<[Option<usize>; 2]>, corner: Corner, p: usize, q: usize| {
        for (s, o) in [(p, q), (q, p)] {
            let end = if segments[s].a == corner { 0 } else { 1 };
            links[s][end] = Some(o);
        }
    };
    let mut corners: Vec<&Corner> = incident.keys().collect();
    corners.sort();
    for &corner in corners {
        let segs = &incident[&corner];
        if is_junction(map, corner) {
            continue;
        }
        match segs.len() {
            2 => connect(&mut links, corner, segs[0], segs[1]),
            4 => {
                // Checkerboard saddle: the smaller id stays connected diagonally,
                // so each larger-id cell gets its own turn.
                let (i, j) = corner;
                let tl = map.cell(i - 1, j - 1).id;
                let tr = map.cell(i, j - 1).id;
                let find = |dir: (i64, i64)| {
                    *segs
                        .iter()
                        .find(|&&s| {
                            let seg = &segments[s];
                            let other = if seg.a == corner { seg.b } else { seg.a };
                            (other.0 as i64 - i as i64, other.1 as i64 - j as i64) == dir
                        })
                        .unwrap()
                };
                let (up, down, left, right) =
                    (find((0, -1)), find((0, 1)), find((-1, 0)), find((1, 0)));
                if tl < tr {
                    connect(&mut links, corner, up, right);
                    connect(&mut links, corner, left, down);
                } else {
                    connect(&mut links, corner, up, left);
                    connect(&mut links, corner, right, down);
                }
            }
            _ => {}
        }
    }

    let mut visited = vec![false; segments.len()];
    let mut out = Vec::new();
    for start in 0..segments.len() {
        if visited[start] {
            continue;
        }
        // Walk backward from `start`, leaving each segment through `exit`, until
        // a free end or a return to `start`.
        let (mut seg, mut exit) = (start, 0usize);
        let mut closed = false;
        while let Some(prev) = links[seg][exit] {
            let shared = if exit == 0 {
                segments[seg].a
            } else {
                segments[seg].b
            };
            exit = if segments[prev].a == shared { 1 } else { 0 };
            seg = prev;
            if seg == start {
                closed = true;
                break;
            }
        }
        // The chain starts at the free end of `seg`; cycles start at `start`.
        let (first, mut entry_end) = if closed { (start, 0) } else { (seg, exit) };
        let mut corners_path = vec![if entry_end == 0 {
            segments[first].a
        } else {
            segments[first].b
        }];
        let mut cur = first;
        loop {
            visited[cur] = true;
            let exit = if entry_end == 0 {
                segments[cur].b
            } else {
                segments[cur].a
            };
            corners_path.push(exit);
            let exit_end = 1 - entry_end;
            match links[cur][exit_end] {
                Some(next) if !(closed && next == first) => {
                    entry_end = if segments[next].a == exit { 0 } else { 1 };
                    cur = next;
                }
                _ => break,
            }
        }
        let points = simplify_lattice(&corners_path, closed);
        let labels = segments[first].labels;
        out.push(LabeledPolyline {
            id_a: labels.0,
            id_b: labels.1,
            points: points
                .iter()
                .map(|&(i, j)| {
                    let (x, y) = map.corner(i, j);
                    [x, y]
                })
                .collect(),
            closed,
        });
    }
    out
}

fn collinear(p: Corner, q: Corner, r: Corner) -> bool {
    (p.0 == q.0 && q.0 == r.0) || (p.1 == q.1 && q.1 == r.1)
}

// Drops interior vertices lying on straight runs of the staircase.
fn simplify_lattice(path: &[Corner], closed: bool) -> Vec<Corner> {
    if closed {
        let ring = &path[..path.len() - 1];
        let n = ring.len();
        let mut keep: Vec<Corner> = (0..n)
            .filter(|&k| !collinear(ring[(k + n - 1) % n], ring[k], ring[(k + 1) % n]))
            .map(|k| ring[k])
            .collect();
        keep.push(keep[0]);
        keep
    } else {
        let mut keep = vec![path[0]];
        for k in 1..path.len() - 1 {
            if !collinear(path[k - 1], path[k], path[k + 1]) {
                keep.push(path[k]);
            }
        }
        keep.push(path[path.len() - 1]);
        keep
    }
}

/// Centerlines of fully deployed bands over a rasterized scene.
pub fn extract_centerlines(
    scene: &Scene,
    width: usize,
    height: usize,
) -> Result<Vec<LabeledPolyline>, RasterError> {
    extract_centerlines_with_threads(scene, width, height, 0)
}

pub fn extract_centerlines_with_threads(
    scene: &Scene,
    width: usize,
    height: usize,
    threads: usize,
) -> Result<Vec<LabeledPolyline>, RasterError> {
    let map = rasterize_with_threads(scene, width, height, threads)?;
    Ok(centerlines_of(&map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Borders,
    Centerlines,
}

/// Curves of a scene's primary set at its output resolution, post-processed
/// with the scene's simplify and smooth settings.
pub fn scene_curves(
    scene: &Scene,
    kind: CurveKind,
    threads: usize,
) -> Result<Vec<LabeledPolyline>, RasterError> {
    let out = &scene.output;
    let map = rasterize_with_threads(scene, out.width, out.height, threads)?;
    let polys = match kind {
        CurveKind::Borders => extract_borders(&map),
        CurveKind::Centerlines => centerlines_of(&map),
    };
    Ok(polys
        .iter()
        .map(|p| smooth_polyline(&simplify_polyline(p, out.simplify), out.smooth))
        .collect())
}

// Crossing on the edge between two sample points, keyed by their indices.
type EdgeKey = (usize, usize);

/// Marching squares over cell-center samples of `local_coord - 0.5`,
/// restricted to squares whose four samples share one fully deployed band.
pub fn centerlines_of(map: &IdMap) -> Vec<LabeledPolyline> {
    let (w, h) = (map.width(), map.height());
    let idx = |c: usize, r: usize| r * w + c;
    let value = |k: usize| map.cells()[k].local_coord - 0.5;
    let point = |(p, q): EdgeKey| -> [f64; 2] {
        let (gp, gq) = (value(p), value(q));
        let t = gp / (gp - gq);
        let (xp, yp) = map.cell_center(p % w, p / w);
        let (xq, yq) = map.cell_center(q % w, q / w);
        [xp + t * (xq - xp), yp + t * (yq - yp)]
    };

    // Segments per square row, discovered in scanline order.
    let rows: Vec<Vec<(EdgeKey, EdgeKey, u64)>> = (0..h.saturating_sub(1))
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::new();
            for c in 0..w.saturating_sub(1) {
                let corners = [idx(c, r), idx(c + 1, r), idx(c + 1, r + 1), idx(c, r + 1)];
                let cells = corners.map(|k| &map.cells()[k]);
                let id = cells[0].id;
                if !cells
                    .iter()
                    .all(|cell| cell.valid && cell.id == id && cell.fully_deployed())
                {
                    continue;
                }
                let inside = corners.map(|k| value(k) > 0.0);
                let edges: [EdgeKey; 4] = [
                    ordered(corners[0], corners[1]),
                    ordered(corners[1], corners[2]),
                    ordered(corners[2], corners[3]),
                    ordered(corners[3], corners[0]),
                ];
                let crossing: Vec<usize> = (0..4)
                    .filter(|&e| inside[e] != inside[(e + 1) % 4])
                    .collect();
                match crossing.len() {
                    2 => out.push((edges[crossing[0]], edges[crossing[1]], id)),
                    4 => {
                        let center = corners.iter().map(|&k| value(k)).sum::<f64>() / 4.0;
                        // Pair edges so the center's side stays connected.
                        if (center > 0.0) == inside[0] {
                            out.push((edges[0], edges[1], id));
                            out.push((edges[2], edges[3], id));
                        } else {
                            out.push((edges[3], edges[0], id));
                            out.push((edges[1], edges[2], id));
                        }
                    }
                    _ => {}
                }
            }
            out
        })
        .collect();
    let segments: Vec<(EdgeKey, EdgeKey, u64)> = rows.into_iter().flatten().collect();

    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (k, s) in segments.iter().enumerate() {
        incident.entry(s.0).or_default().push(k);
        incident.entry(s.1).or_default().push(k);
    }
    let other = |seg: usize, key: EdgeKey| -> Option<usize> {
        incident[&key].iter().copied().find(|&s| s != seg)
    };

    let mut visited = vec![false; segments.len()];
    let mut out = Vec::new();
    for start in 0..segments.len() {
        if visited[start] {
            continue;
        }
        // Back up to an open end if there is one.
        let (mut seg, mut key) = (start, segments[start].0);
        let mut closed = false;
        while let Some(prev) = other(seg, key) {
            let (k0, k1, _) = segments[prev];
            key = if k0 == key { k1 } else { k0 };
            seg = prev;
            if seg == start {
                closed = true;
                break;
            }
        }
        let (first, mut entry) = if closed {
            (start, segments[start].0)
        } else {
            (seg, key)
        };
        let mut keys = vec![entry];
        let mut cur = first;
        loop {
            visited[cur] = true;
            let (k0, k1, _) = segments[cur];
            let exit = if k0 == entry { k1 } else { k0 };
            keys.push(exit);
            match other(cur, exit) {
                Some(next) if !visited[next] => {
                    entry = exit;
                    cur = next;
                }
                _ => break,
            }
        }
        let mut points: Vec<[f64; 2]> = Vec::with_capacity(keys.len());
        for key in keys {
            let p = point(key);
            if points.last() != Some(&p) {
                points.push(p);
            }
        }
        if points.len() >= 2 {
            let id = segments[first].2;
            out.push(LabeledPolyline {
                id_a: id,
                id_b: id,
                points,
                closed,
            });
        }
    }
    out
}

fn ordered(p: usize, q: usize) -> EdgeKey {
    (p.min(q), p.max(q))
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return libm::hypot(p[0] - a[0], p[1] - a[1]);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    libm::hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy))
}

/// Douglas-Peucker simplification; endpoints and the closed flag are kept.
pub fn simplify_polyline(poly: &LabeledPolyline, tolerance: f64) -> LabeledPolyline {
    let pts = &poly.points;
    if tolerance <= 0.0 || pts.len() <= 2 {
        return poly.clone();
    }
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0, pts.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        let mut best = (0.0, lo);
        for k in lo + 1..hi {
            let dist = point_segment_distance(pts[k], pts[lo], pts[hi]);
            if dist > best.0 {
                best = (dist, k);
            }
        }
        if best.0 > tolerance {
            keep[best.1] = true;
            stack.push((lo, best.1));
            stack.push((best.1, hi));
        }
    }
    LabeledPolyline {
        points: pts
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| *p)
            .collect(),
        ..poly.clone()
    }
}

/// Averages each vertex with its neighbors `passes` times. Endpoints of open
/// polylines stay fixed; closed polylines wrap around.
pub fn smooth_polyline(poly: &LabeledPolyline, passes: u32) -> LabeledPolyline {
    let mut pts = poly.points.clone();
    if pts.len() < 3 {
        return poly.clone();
    }
    for _ in 0..passes {
        let prev = pts.clone();
        if poly.closed {
            let n = prev.len() - 1;
            for k in 0..n {
                let (a, b, c) = (prev[(k + n - 1) % n], prev[k], prev[(k + 1) % n]);
                pts[k] = [
                    (a[0] + 2.0 * b[0] + c[0]) / 4.0,
                    (a[1] + 2.0 * b[1] + c[1]) / 4.0,
                ];
            }
            pts[n] = pts[0];
        } else {
            for k in 1..prev.len() - 1 {
                let (a, b, c) = (prev[k - 1], prev[k], prev[k + 1]);
                pts[k] = [
                    (a[0] + 2.0 * b[0] + c[0]) / 4.0,
                    (a[1] + 2.0 * b[1] + c[1]) / 4.0,
                ];
            }
        }
    }
    LabeledPolyline {
        points: pts,
        ..poly.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rect::Rect;

    fn map(w: usize, h: usize, ids: &[u64]) -> IdMap {
        IdMap::from_ids(w, h, Rect::new(0.0, 0.0, w as f64, h as f64), ids)
    }

    fn unit_segments(poly: &LabeledPolyline) -> usize {
        poly.points
            .windows(2)
            .map(|p| ((p[1][0] - p[0][0]).abs() + (p[1][1] - p[0][1]).abs()).round() as usize)
            .sum()
    }

    #[test]
    fn two_columns_give_one_vertical_line() {
        let polys = extract_borders(&map(2, 2, &[1, 2, 1, 2]));
        assert_eq!(polys.len(), 1);
        let p = &polys[0];
        assert_eq!((p.id_a, p.id_b, p.closed), (1, 2, false));
        assert_eq!(p.points, vec![[1.0, 0.0], [1.0, 2.0]]);
    }

    #[test]
    fn uniform_map_has_no_borders() {
        assert!(extract_borders(&map(3, 3, &[7; 9])).is_empty());
    }

    #[test]
    fn island_gives_closed_ring() {
        let polys = extract_borders(&map(3, 3, &[1, 1, 1, 1, 2, 1, 1, 1, 1]));
        assert_eq!(polys.len(), 1);
        let p = &polys[0];
        assert!(p.closed);
        assert_eq!((p.id_a, p.id_b), (1, 2));
        assert_eq!(p.points.len(), 5);
        assert_eq!(p.points[0], p.points[4]);
        let mut corners = p.points[..4].to_vec();
        corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            corners,
            vec![[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [2.0, 2.0]]
        );
        assert_eq!(unit_segments(p), 4);
    }

    #[test]
    fn junctions_split_chains() {
        // Three ids meet at corner (1, 1).
        let m = map(2, 2, &[1, 2, 3, 3]);
        let polys = extract_borders(&m);
        assert_eq!(
            polys.iter().map(unit_segments).sum::<usize>(),
            differing_edge_count(&m)
        );
        for p in &polys {
            let ends = [p.points[0], *p.points.last().unwrap()];
            assert!(ends.contains(&[1.0, 1.0]));
        }
        let mut labels: Vec<(u64, u64)> = polys.iter().map(|p| (p.id_a, p.id_b)).collect();
        labels.sort();
        assert_eq!(labels, vec![(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn checkerboard_saddle_conserves_segments() {
        let m = map(2, 2, &[1, 2, 2, 1]);
        let polys = extract_borders(&m);
        assert_eq!(polys.len(), 2);
        assert_eq!(polys.iter().map(unit_segments).sum::<usize>(), 4);
        let m = map(4, 4, &[1, 2, 1, 2, 2, 1, 2, 1, 1, 2, 1, 2, 2, 1, 2, 1]);
        let polys = extract_borders(&m);
        assert_eq!(
            polys.iter().map(unit_segments).sum::<usize>(),
            differing_edge_count(&m)
        );
    }

    #[test]
    fn invalid_cells_do_not_produce_edges() {
        let mut m = map(2, 1, &[1, 2]);
        let mut cells = m.cells().to_vec();
        cells[1].valid = false;
        m = IdMap::from_cells(2, 1, m.view(), cells);
        assert!(extract_borders(&m).is_empty());
    }

    fn poly(points: Vec<[f64; 2]>, closed: bool) -> LabeledPolyline {
        LabeledPolyline {
            id_a: 1,
            id_b: 2,
            points,
            closed,
        }
    }

    #[test]
    fn simplify_examples() {
        let line = poly((0..5).map(|k| [k as f64, 2.0 * k as f64]).collect(), false);
        let s = simplify_polyline(&line, 1e-6);
        assert_eq!(s.points, vec![[0.0, 0.0], [4.0, 8.0]]);
        assert_eq!(simplify_polyline(&line, 0.0), line);
        let corner = poly(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], false);
        assert_eq!(simplify_polyline(&corner, 0.5).points.len(), 3);
        assert_eq!(simplify_polyline(&corner, 0.8).points.len(), 2);
        let ring = poly(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]],
            true,
        );
        let s = simplify_polyline(&ring, 0.1);
        assert!(s.closed);
        assert_eq!(s.points.first(), s.points.last());
    }

    #[test]
    fn smoothing_keeps_open_endpoints_and_closure() {
        let p = poly(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [2.0, 1.0]], false);
        let s = smooth_polyline(&p, 3);
        assert_eq!(s.points[0], [0.0, 0.0]);
        assert_eq!(s.points[3], [2.0, 1.0]);
        let ring = poly(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]],
            true,
        );
        let s = smooth_polyline(&ring, 2);
        assert_eq!(s.points.first(), s.points.last());
        assert!((s.points[0][0] - 0.375).abs() < 1e-12);
    }
}
