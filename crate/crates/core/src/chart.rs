//! The Chart JSON document model.
//!
//! A [`ChartDocument`] lists every rendered object of one figure. Geometry is
//! in figure-fraction coordinates: origin at the bottom-left corner, the full
//! figure spanning the unit square. Objects that were clipped by the renderer
//! may poke slightly outside the figure, so coordinates are accepted anywhere
//! in `[-1, 2]`.
//!
//! [`parse_chart_document`] is the only way documents enter the engine from
//! the outside; it returns fully validated values. Unknown JSON keys are
//! ignored so older engines keep reading documents from newer extractors.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1.0";

const COORD_MIN: f64 = -1.0;
const COORD_MAX: f64 = 2.0;
const CENTER_TOL: f64 = 1e-6;

/// Normalized RGB color, each channel in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Color {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Color {
    pub const BLACK: Color = Color::new(0.0, 0.0, 0.0);
    pub const WHITE: Color = Color::new(1.0, 1.0, 1.0);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Color { r, g, b }
    }

    pub fn channels(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

/// A point in figure-fraction coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn distance(&self, other: &Vec2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Axis-aligned bounding box in figure-fraction coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, p: &Vec2, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1 + tol && p.y >= self.y0 - tol && p.y <= self.y1 + tol
    }

    /// Shift the box by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphicalKind {
    Patch,
    Line,
    Point,
}

impl GraphicalKind {
    pub const ALL: [GraphicalKind; 3] = [GraphicalKind::Patch, GraphicalKind::Line, GraphicalKind::Point];
}

/// The four scored object kinds, used for per-kind weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Patch,
    Line,
    Point,
    Text,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 4] = [
        ObjectKind::Patch,
        ObjectKind::Line,
        ObjectKind::Point,
        ObjectKind::Text,
    ];
}

impl From<GraphicalKind> for ObjectKind {
    fn from(kind: GraphicalKind) -> Self {
        match kind {
            GraphicalKind::Patch => ObjectKind::Patch,
            GraphicalKind::Line => ObjectKind::Line,
            GraphicalKind::Point => ObjectKind::Point,
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectKind::Patch => "patch",
            ObjectKind::Line => "line",
            ObjectKind::Point => "point",
            ObjectKind::Text => "text",
        })
    }
}

impl fmt::Display for GraphicalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ObjectKind::from(*self).fmt(f)
    }
}

/// A bar, wedge, stroke, or scatter marker.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicalObject {
    pub id: String,
    pub kind: GraphicalKind,
    pub color: Color,
    pub bbox: BBox,
    pub center: Vec2,
    /// Vertices of a stroke; required with at least two entries for lines.
    pub points: Option<Vec<Vec2>>,
    /// Marker area in points²; required for point objects.
    pub marker_size: Option<f64>,
    pub axes_index: u32,
}

/// Any rendered string: titles, axis labels, tick labels, legend entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TextObject {
    pub id: String,
    pub content: String,
    pub anchor: Vec2,
    pub color: Color,
    pub font_family: String,
    pub font_size: f64,
    pub axes_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartDocument {
    pub schema_version: String,
    pub figure_width: f64,
    pub figure_height: f64,
    pub graphical: Vec<GraphicalObject>,
    pub texts: Vec<TextObject>,
}

impl Default for ChartDocument {
    fn default() -> Self {
        ChartDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            figure_width: 6.4,
            figure_height: 4.8,
            graphical: Vec::new(),
            texts: Vec::new(),
        }
    }
}

impl ChartDocument {
    pub fn graphical_of(&self, kind: GraphicalKind) -> impl Iterator<Item = &GraphicalObject> {
        self.graphical.iter().filter(move |o| o.kind == kind)
    }

    pub fn is_empty(&self) -> bool {
        self.graphical.is_empty() && self.texts.is_empty()
    }

    /// Check every document and object invariant.
    pub fn validate(&self) -> Result<()> {
        check_positive("document", "figure_width", self.figure_width)?;
        check_positive("document", "figure_height", self.figure_height)?;

        let mut ids = HashSet::new();
        for obj in &self.graphical {
            if !ids.insert(obj.id.as_str()) {
                return Err(Error::validation(&obj.id, "id", "duplicate object id"));
            }
            obj.validate()?;
        }
        for text in &self.texts {
            if !ids.insert(text.id.as_str()) {
                return Err(Error::validation(&text.id, "id", "duplicate object id"));
            }
            text.validate()?;
        }
        Ok(())
    }
}

impl GraphicalObject {
    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        check_color(id, &self.color)?;
        check_bbox(id, &self.bbox)?;
        check_coord(id, "center", &self.center)?;
        if !self.bbox.contains(&self.center, CENTER_TOL) {
            return Err(Error::validation(id, "center", "center lies outside bbox"));
        }
        if let Some(points) = &self.points {
            for p in points {
                check_coord(id, "points", p)?;
            }
        }
        match self.kind {
            GraphicalKind::Line => {
                let n = self.points.as_ref().map_or(0, Vec::len);
                if n < 2 {
                    return Err(Error::validation(
                        id,
                        "points",
                        format!("line requires points length ≥ 2, got {n}"),
                    ));
                }
            }
            GraphicalKind::Point => match self.marker_size {
                Some(s) if s.is_finite() && s > 0.0 => {}
                Some(s) => {
                    return Err(Error::validation(
                        id,
                        "marker_size",
                        format!("marker_size must be positive, got {s}"),
                    ))
                }
                None => {
                    return Err(Error::validation(
                        id,
                        "marker_size",
                        "marker_size is required for point objects",
                    ))
                }
            },
            GraphicalKind::Patch => {}
        }
        if let Some(s) = self.marker_size {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::validation(id, "marker_size", "marker_size must be positive"));
            }
        }
        Ok(())
    }
}

impl TextObject {
    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        if self.content.trim().is_empty() {
            return Err(Error::validation(id, "content", "content is empty after trimming"));
        }
        check_coord(id, "anchor", &self.anchor)?;
        check_color(id, &self.color)?;
        check_positive(id, "font_size", self.font_size)
    }
}

fn check_positive(object: &str, field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(object, field, format!("must be positive and finite, got {v}")))
    }
}

fn check_color(object: &str, c: &Color) -> Result<()> {
    for v in c.channels() {
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(Error::validation(
                object,
                "color",
                format!("channel {v} outside [0, 1]"),
            ));
        }
    }
    Ok(())
}

fn in_frame(v: f64) -> bool {
    v.is_finite() && (COORD_MIN..=COORD_MAX).contains(&v)
}

fn check_coord(object: &str, field: &str, p: &Vec2) -> Result<()> {
    if in_frame(p.x) && in_frame(p.y) {
        Ok(())
    } else {
        Err(Error::validation(
            object,
            field,
            format!("coordinate ({}, {}) outside [-1, 2]", p.x, p.y),
        ))
    }
}

fn check_bbox(object: &str, b: &BBox) -> Result<()> {
    if ![b.x0, b.y0, b.x1, b.y1].into_iter().all(in_frame) {
        return Err(Error::validation(object, "bbox", "coordinate outside [-1, 2]"));
    }
    if b.x0 > b.x1 || b.y0 > b.y1 {
        return Err(Error::validation(object, "bbox", "requires x0 ≤ x1 and y0 ≤ y1"));
    }
    Ok(())
}

// Wire representation. Field order here is the serialized key order.

#[derive(Serialize, Deserialize)]
struct WireDocument {
    schema_version: String,
    figure_width: f64,
    figure_height: f64,
    #[serde(default)]
    graphical: Vec<WireGraphical>,
    #[serde(default)]
    texts: Vec<WireText>,
}

#[derive(Serialize, Deserialize)]
struct WireGraphical {
    id: String,
    kind: GraphicalKind,
    color: [f64; 3],
    bbox: [f64; 4],
    center: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    marker_size: Option<f64>,
    axes_index: u32,
}

#[derive(Serialize, Deserialize)]
struct WireText {
    id: String,
    content: String,
    anchor: [f64; 2],
    color: [f64; 3],
    font_family: String,
    font_size: f64,
    axes_index: u32,
}

fn color_from([r, g, b]: [f64; 3]) -> Color {
    Color::new(r, g, b)
}

fn vec_from([x, y]: [f64; 2]) -> Vec2 {
    Vec2::new(x, y)
}

impl From<WireDocument> for ChartDocument {
    fn from(w: WireDocument) -> Self {
        ChartDocument {
            schema_version: w.schema_version,
            figure_width: w.figure_width,
            figure_height: w.figure_height,
            graphical: w
                .graphical
                .into_iter()
                .map(|g| GraphicalObject {
                    id: g.id,
                    kind: g.kind,
                    color: color_from(g.color),
                    bbox: BBox::new(g.bbox[0], g.bbox[1], g.bbox[2], g.bbox[3]),
                    center: vec_from(g.center),
                    points: g.points.map(|ps| ps.into_iter().map(vec_from).collect()),
                    marker_size: g.marker_size,
                    axes_index: g.axes_index,
                })
                .collect(),
            texts: w
                .texts
                .into_iter()
                .map(|t| TextObject {
                    id: t.id,
                    content: t.content,
                    anchor: vec_from(t.anchor),
                    color: color_from(t.color),
                    font_family: t.font_family,
                    font_size: t.font_size,
                    axes_index: t.axes_index,
                })
                .collect(),
        }
    }
}

impl From<&ChartDocument> for WireDocument {
    fn from(d: &ChartDocument) -> Self {
        WireDocument {
            schema_version: d.schema_version.clone(),
            figure_width: d.figure_width,
            figure_height: d.figure_height,
            graphical: d
                .graphical
                .iter()
                .map(|g| WireGraphical {
                    id: g.id.clone(),
                    kind: g.kind,
                    color: g.color.channels(),
                    bbox: [g.bbox.x0, g.bbox.y0, g.bbox.x1, g.bbox.y1],
                    center: [g.center.x, g.center.y],
                    points: g
                        .points
                        .as_ref()
                        .map(|ps| ps.iter().map(|p| [p.x, p.y]).collect()),
                    marker_size: g.marker_size,
                    axes_index: g.axes_index,
                })
                .collect(),
            texts: d
                .texts
                .iter()
                .map(|t| WireText {
                    id: t.id.clone(),
                    content: t.content.clone(),
                    anchor: [t.anchor.x, t.anchor.y],
                    color: t.color.channels(),
                    font_family: t.font_family.clone(),
                    font_size: t.font_size,
                    axes_index: t.axes_index,
                })
                .collect(),
        }
    }
}

/// Parse and validate a Chart JSON document.
pub fn parse_chart_document(bytes: &[u8]) -> Result<ChartDocument> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "input is not valid UTF-8".to_string(),
    })?;
    let wire: WireDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let doc = ChartDocument::from(wire);
    doc.validate()?;
    Ok(doc)
}

/// Serialize a document to canonical Chart JSON bytes.
///
/// Keys appear in schema order and reals use the shortest representation
/// that parses back to the identical `f64`.
pub fn serialize_chart_document(doc: &ChartDocument) -> Vec<u8> {
    serde_json::to_vec(&WireDocument::from(doc)).expect("chart document serialization is infallible")
}

pub fn read_chart_document(path: &std::path::Path) -> Result<ChartDocument> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_chart_document(&bytes)
}

/// Convert serde_json's 1-based line/column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return text.len();
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}
