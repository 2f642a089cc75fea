use std::fmt::Write as _;

use crate::mdp::{Cell, GridMap, ObservationSequence};
use crate::observer::PosteriorSnapshot;

const CELL: usize = 20;

fn center(c: Cell) -> (usize, usize) {
    (c.x * CELL + CELL / 2, c.y * CELL + CELL / 2)
}

/// Draws the map, the goals (true goal orange, others red), the start
/// (green) and the trajectory as one polyline through every visited cell.
/// When snapshots are given, each goal's `<title>` carries its final
/// posterior probability.
pub fn render_svg(
    map: &GridMap,
    obs: &ObservationSequence,
    snapshots: &[PosteriorSnapshot],
    true_goal: Option<usize>,
) -> String {
    let (w, h) = (map.width() * CELL, map.height() * CELL);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);

    out.push_str(r##"<g stroke="#d0d0d0" stroke-width="1">"##);
    out.push('\n');
    for x in 0..=map.width() {
        let _ = writeln!(out, r#"<line x1="{0}" y1="0" x2="{0}" y2="{h}"/>"#, x * CELL);
    }
    for y in 0..=map.height() {
        let _ = writeln!(out, r#"<line x1="0" y1="{0}" x2="{w}" y2="{0}"/>"#, y * CELL);
    }
    out.push_str("</g>\n");

    out.push_str(r##"<g fill="#404040">"##);
    out.push('\n');
    for y in 0..map.height() {
        for x in 0..map.width() {
            if map.is_blocked(Cell::new(x, y)) {
                let _ = writeln!(out, r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}"/>"#, x * CELL, y * CELL);
            }
        }
    }
    out.push_str("</g>\n");

    let start = map.start();
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#2ca02c"><title>start</title></rect>"##,
        start.x * CELL,
        start.y * CELL
    );

    let last = snapshots.last();
    for (i, &g) in map.goals().iter().enumerate() {
        let colour = if Some(i) == true_goal { "#ff8c00" } else { "#d62728" };
        let title = match last.and_then(|s| s.probabilities.get(i)) {
            Some(p) => format!("goal {i}: P = {p:.4}"),
            None => format!("goal {i}"),
        };
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{colour}"><title>{title}</title></rect>"#,
            g.x * CELL,
            g.y * CELL
        );
        let (cx, cy) = center(g);
        let _ = writeln!(
            out,
            r##"<text x="{cx}" y="{}" font-family="monospace" font-size="12" text-anchor="middle" fill="#ffffff">{i}</text>"##,
            cy + 4
        );
    }

    if let Some(end) = obs.end_state() {
        let points: Vec<String> = obs
            .pairs()
            .iter()
            .map(|&(s, _)| s)
            .chain(std::iter::once(end))
            .map(|c| {
                let (x, y) = center(c);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="3" stroke-linejoin="round"/>"##,
            points.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
