//! Pairwise similarity kernels between single objects.
//!
//! Every kernel returns a value in `[0, 1]`, is `1` for identical inputs and
//! is symmetric in its arguments (the text kernel compares attributes that
//! are symmetric too). Distances are normalized by the diagonal of their
//! space: `√3` for the RGB cube and `√2` for the unit figure square, so a
//! kernel reaches `0` exactly at maximal separation.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::chart::{BBox, Color, GraphicalKind, GraphicalObject, TextObject, Vec2};
use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    /// Penalty for a font family mismatch.
    pub lambda_font: f64,
    /// Penalty for a font size mismatch.
    pub alpha_size: f64,
    /// Relative size difference above which font sizes count as different.
    pub size_rel_tol: f64,
    pub eps: f64,
    pub line_resample_count: usize,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            lambda_font: 0.3,
            alpha_size: 0.3,
            size_rel_tol: 0.02,
            eps: 1e-6,
            line_resample_count: 50,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("lambda_font", self.lambda_font)?;
        unit("alpha_size", self.alpha_size)?;
        if self.lambda_font + self.alpha_size > 1.0 {
            return Err(Error::Config(format!(
                "lambda_font + alpha_size must not exceed 1, got {}",
                self.lambda_font + self.alpha_size
            )));
        }
        if !(self.size_rel_tol.is_finite() && self.size_rel_tol >= 0.0) {
            return Err(Error::Config("size_rel_tol must be finite and nonnegative".into()));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.line_resample_count < 2 {
            return Err(Error::Config("line_resample_count must be at least 2".into()));
        }
        Ok(())
    }
}

fn unit_clamp(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

pub fn color_similarity(a: &Color, b: &Color) -> f64 {
    let d2: f64 = a
        .channels()
        .iter()
        .zip(b.channels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    unit_clamp(1.0 - d2.sqrt() / SQRT_3)
}

pub fn position_similarity(a: &Vec2, b: &Vec2) -> f64 {
    unit_clamp(1.0 - a.distance(b) / SQRT_2)
}

fn ratio_similarity(a: f64, b: f64) -> f64 {
    if a == b {
        return 1.0;
    }
    unit_clamp(a.min(b) / a.max(b))
}

fn aspect_ratio(bbox: &BBox, eps: f64) -> f64 {
    (bbox.width() + eps) / (bbox.height() + eps)
}

/// Resample a polyline to `count` points spaced evenly along its length.
pub fn resample_polyline(points: &[Vec2], count: usize) -> Vec<Vec2> {
    debug_assert!(count >= 2 && !points.is_empty());
    let mut cumulative = Vec::with_capacity(points.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for w in points.windows(2) {
        total += w[0].distance(&w[1]);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return vec![points[0]; count];
    }

    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for i in 0..count {
        if i == count - 1 {
            out.push(*points.last().unwrap());
            break;
        }
        let target = total * i as f64 / (count - 1) as f64;
        while seg + 1 < points.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 {
            ((target - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (points[seg], points[seg + 1]);
        out.push(Vec2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
    }
    out
}

/// Mean pointwise distance between two resampled polylines, mapped to `[0, 1]`.
pub fn polyline_similarity(a: &[Vec2], b: &[Vec2], count: usize) -> f64 {
    let ra = resample_polyline(a, count);
    let rb = resample_polyline(b, count);
    let mean = ra.iter().zip(&rb).map(|(p, q)| p.distance(q)).sum::<f64>() / count as f64;
    unit_clamp(1.0 - mean / SQRT_2)
}

fn line_points(obj: &GraphicalObject) -> Vec<Vec2> {
    match &obj.points {
        Some(ps) if !ps.is_empty() => ps.clone(),
        // Validated lines always carry points; fall back to the bbox diagonal.
        _ => vec![
            Vec2::new(obj.bbox.x0, obj.bbox.y0),
            Vec2::new(obj.bbox.x1, obj.bbox.y1),
        ],
    }
}

fn same_kind(a: &GraphicalObject, b: &GraphicalObject) -> Result<GraphicalKind> {
    if a.kind != b.kind {
        return Err(Error::Usage(format!(
            "cannot compare {} `{}` with {} `{}`",
            a.kind, a.id, b.kind, b.id
        )));
    }
    Ok(a.kind)
}

pub fn shape_similarity(a: &GraphicalObject, b: &GraphicalObject, params: &KernelParams) -> Result<f64> {
    Ok(match same_kind(a, b)? {
        GraphicalKind::Patch => {
            ratio_similarity(aspect_ratio(&a.bbox, params.eps), aspect_ratio(&b.bbox, params.eps))
        }
        GraphicalKind::Point => ratio_similarity(
            a.marker_size.unwrap_or(1.0),
            b.marker_size.unwrap_or(1.0),
        ),
        GraphicalKind::Line => {
            polyline_similarity(&line_points(a), &line_points(b), params.line_resample_count)
        }
    })
}

/// Color × position × shape similarity of two graphical objects of one kind.
pub fn layout_similarity(p: &GraphicalObject, g: &GraphicalObject, params: &KernelParams) -> Result<f64> {
    let shape = shape_similarity(p, g, params)?;
    Ok(color_similarity(&p.color, &g.color) * position_similarity(&p.center, &g.center) * shape)
}

/// Content equality after NFC normalization and whitespace collapsing.
pub fn text_content_matches(a: &str, b: &str) -> bool {
    normalize_content(a) == normalize_content(b)
}

fn normalize_content(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn font_family_differs(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() != b.trim().to_lowercase()
}

fn font_size_differs(a: f64, b: f64, rel_tol: f64) -> bool {
    (a - b).abs() / a.max(b) > rel_tol
}

/// Exact-content text similarity with font family and size penalties.
pub fn text_similarity(p: &TextObject, g: &TextObject, params: &KernelParams) -> f64 {
    if !text_content_matches(&p.content, &g.content) {
        return 0.0;
    }
    let mismatch_f = f64::from(u8::from(font_family_differs(&p.font_family, &g.font_family)));
    let mismatch_s = f64::from(u8::from(font_size_differs(p.font_size, g.font_size, params.size_rel_tol)));
    unit_clamp(1.0 - (params.lambda_font * mismatch_f + params.alpha_size * mismatch_s))
}

/// Intersection over union of two boxes.
///
/// Boxes whose union is degenerate (area below `eps²`) score 1 when they
/// coincide within `eps` and 0 otherwise.
pub fn iou(a: &BBox, b: &BBox, eps: f64) -> f64 {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union < eps * eps {
        let coincide = (a.x0 - b.x0).abs() <= eps
            && (a.y0 - b.y0).abs() <= eps
            && (a.x1 - b.x1).abs() <= eps
            && (a.y1 - b.y1).abs() <= eps;
        return if coincide { 1.0 } else { 0.0 };
    }
    unit_clamp(inter / union)
}

/// Kernel used by the rendering reward for graphical objects.
pub fn render_similarity(p: &GraphicalObject, g: &GraphicalObject, params: &KernelParams) -> Result<f64> {
    Ok(match same_kind(p, g)? {
        GraphicalKind::Patch => iou(&p.bbox, &g.bbox, params.eps),
        GraphicalKind::Point => position_similarity(&p.center, &g.center),
        GraphicalKind::Line => {
            polyline_similarity(&line_points(p), &line_points(g), params.line_resample_count)
        }
    })
}

/// Kernel used by the rendering reward for text: content match × anchor proximity.
pub fn render_text_similarity(p: &TextObject, g: &TextObject) -> f64 {
    if text_content_matches(&p.content, &g.content) {
        position_similarity(&p.anchor, &g.anchor)
    } else {
        0.0
    }
}
