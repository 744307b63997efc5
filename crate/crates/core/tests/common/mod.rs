#![allow(dead_code)]

use std::time::Duration;

use chart_reward::{
    BBox, ChartDocument, Color, EngineConfig, GraphicalKind, GraphicalObject, RunnerConfig,
    TextObject, Vec2,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const WORDS: &[&str] = &["Sales", "2024", "Revenue", "Q1", "Q2", "Total", "Growth (%)", "Année"];
pub const FONTS: &[&str] = &["DejaVu Sans", "serif", "sans-serif", "monospace"];

pub fn random_color(rng: &mut impl Rng) -> Color {
    Color::new(rng.gen(), rng.gen(), rng.gen())
}

pub fn random_bbox(rng: &mut impl Rng) -> BBox {
    let x0 = rng.gen_range(-0.1..0.9);
    let y0 = rng.gen_range(-0.1..0.9);
    let w = if rng.gen_bool(0.05) { 0.0 } else { rng.gen_range(0.0..0.3) };
    let h = rng.gen_range(0.0..0.5);
    BBox::new(x0, y0, x0 + w, y0 + h)
}

pub fn random_graphical(rng: &mut impl Rng, id: String) -> GraphicalObject {
    let kind = *GraphicalKind::ALL.choose(rng).unwrap();
    let mut bbox = random_bbox(rng);
    let mut points = None;
    let mut marker_size = None;
    match kind {
        GraphicalKind::Line => {
            let n = rng.gen_range(2..8);
            let ps: Vec<Vec2> = (0..n)
                .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                .collect();
            bbox = BBox::new(
                ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
                ps.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
                ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
                ps.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
            );
            points = Some(ps);
        }
        GraphicalKind::Point => {
            let c = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let r = 0.01;
            bbox = BBox::new(c.x - r, c.y - r, c.x + r, c.y + r);
            marker_size = Some(rng.gen_range(1.0..100.0));
        }
        GraphicalKind::Patch => {}
    }
    GraphicalObject {
        id,
        kind,
        color: random_color(rng),
        bbox,
        center: bbox.center(),
        points,
        marker_size,
        axes_index: rng.gen_range(0..3),
    }
}

pub fn random_text(rng: &mut impl Rng, id: String) -> TextObject {
    TextObject {
        id,
        content: WORDS.choose(rng).unwrap().to_string(),
        anchor: Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
        color: random_color(rng),
        font_family: FONTS.choose(rng).unwrap().to_string(),
        font_size: rng.gen_range(6.0..24.0),
        axes_index: rng.gen_range(0..3),
    }
}

/// A valid document with up to `max_objects` graphical objects and texts each.
pub fn random_document(rng: &mut impl Rng, max_objects: usize) -> ChartDocument {
    let ng = rng.gen_range(0..=max_objects);
    let nt = rng.gen_range(0..=max_objects);
    let doc = ChartDocument {
        graphical: (0..ng).map(|i| random_graphical(rng, format!("g{i}"))).collect(),
        texts: (0..nt).map(|i| random_text(rng, format!("t{i}"))).collect(),
        ..ChartDocument::default()
    };
    doc.validate().expect("generator produces valid documents");
    doc
}

pub fn patch(id: &str, bbox: BBox, color: Color) -> GraphicalObject {
    GraphicalObject {
        id: id.into(),
        kind: GraphicalKind::Patch,
        color,
        bbox,
        center: bbox.center(),
        points: None,
        marker_size: None,
        axes_index: 0,
    }
}

pub fn text(id: &str, content: &str) -> TextObject {
    TextObject {
        id: id.into(),
        content: content.into(),
        anchor: Vec2::new(0.5, 0.95),
        color: Color::BLACK,
        font_family: "DejaVu Sans".into(),
        font_size: 12.0,
        axes_index: 0,
    }
}

/// A small bar chart with a title and tick labels.
pub fn bar_chart() -> ChartDocument {
    ChartDocument {
        graphical: vec![
            patch("bar0", BBox::new(0.15, 0.1, 0.25, 0.5), Color::new(1.0, 0.0, 0.0)),
            patch("bar1", BBox::new(0.45, 0.1, 0.55, 0.7), Color::new(0.0, 0.5, 0.0)),
            patch("bar2", BBox::new(0.75, 0.1, 0.85, 0.3), Color::new(0.0, 0.0, 1.0)),
        ],
        texts: vec![text("title", "Sales 2024"), text("xt0", "A"), text("xt1", "B")],
        ..ChartDocument::default()
    }
}

/// Exhaustive maximum over all injections of the smaller side into the larger.
pub fn brute_force_max(m: &[Vec<f64>]) -> f64 {
    let rows = m.len();
    let cols = m[0].len();
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| m[i][j]).collect()).collect();
        return brute_force_max(&t);
    }
    fn go(m: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == m.len() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(m[row][c] + go(m, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(m, 0, &mut vec![false; cols])
}

/// Runner that executes the "code" as a POSIX shell script; `$1` is the
/// output path.
pub fn shell_runner() -> RunnerConfig {
    RunnerConfig {
        command_template: vec!["sh".into(), "{script}".into(), "{out}".into()],
        script_name: "script.sh".into(),
        ..RunnerConfig::default()
    }
}

pub fn shell_engine(timeout: Duration) -> EngineConfig {
    let mut cfg = EngineConfig {
        runner: shell_runner(),
        ..EngineConfig::default()
    };
    cfg.reward.exec_timeout = timeout;
    cfg
}

/// A shell script that writes `doc` as its artifact.
pub fn script_emitting(doc: &ChartDocument) -> String {
    let json = String::from_utf8(chart_reward::serialize_chart_document(doc)).unwrap();
    format!("cat > \"$1\" <<'CHART_EOF'\n{json}\nCHART_EOF\n")
}

pub fn response_wrapping(code: &str) -> String {
    format!("<think>reproduce the chart</think>\n<code>\n```sh\n{code}```\n</code>")
}
