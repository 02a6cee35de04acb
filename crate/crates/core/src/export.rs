//! Polyline serialization: JSON and SVG 1.1.

use std::fmt::Write as _;

use serde::Serialize;

use crate::extract::LabeledPolyline;
use crate::rect::Rect;

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

#[derive(Serialize)]
struct JsonPolyline<'a> {
    #[serde(rename = "idA")]
    id_a: u64,
    #[serde(rename = "idB")]
    id_b: u64,
    closed: bool,
    points: &'a [[f64; 2]],
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    polylines: Vec<JsonPolyline<'a>>,
}

/// `{"polylines":[{"idA":..,"idB":..,"closed":..,"points":[[x,y],..]}]}`
pub fn polylines_to_json(polys: &[LabeledPolyline]) -> String {
    let rounded: Vec<Vec<[f64; 2]>> = polys
        .iter()
        .map(|p| p.points.iter().map(|q| q.map(round_sig9)).collect())
        .collect();
    let doc = JsonDocument {
        polylines: polys
            .iter()
            .zip(&rounded)
            .map(|(p, pts)| JsonPolyline {
                id_a: p.id_a,
                id_b: p.id_b,
                closed: p.closed,
                points: pts,
            })
            .collect(),
    };
    let mut out = serde_json::to_string(&doc).expect("polylines serialize");
    out.push('\n');
    out
}

/// One `<path>` per polyline over a `viewBox` equal to the view rectangle.
pub fn polylines_to_svg(polys: &[LabeledPolyline], view: Rect) -> String {
    let stroke = round_sig9(view.width().max(view.height()) / 1000.0);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        round_sig9(view.x0),
        round_sig9(view.y0),
        round_sig9(view.width()),
        round_sig9(view.height())
    );
    let _ = writeln!(
        out,
        r#"<g fill="none" stroke="black" stroke-width="{stroke}" stroke-linejoin="round" stroke-linecap="round">"#
    );
    for p in polys {
        let mut d = String::new();
        let n = if p.closed {
            p.points.len() - 1
        } else {
            p.points.len()
        };
        for (k, q) in p.points[..n].iter().enumerate() {
            let _ = write!(
                d,
                "{}{} {}",
                if k == 0 { "M" } else { " L" },
                round_sig9(q[0]),
                round_sig9(q[1])
            );
        }
        if p.closed {
            d.push_str(" Z");
        }
        let _ = writeln!(
            out,
            r#"<path data-id-a="{}" data-id-b="{}" d="{d}"/>"#,
            p.id_a, p.id_b
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}
