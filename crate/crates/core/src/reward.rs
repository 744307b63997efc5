//! Benchmark metrics and the RL reward stack.
//!
//! Two metric families share the kernels and the assignment solver:
//!
//! * [`layout_metric`] and [`text_metric`] are the benchmark scores. Graphical
//!   objects are compared with color × position × shape similarity, texts with
//!   exact content match penalized by font mismatches.
//! * [`rendering_reward`] is the training reward. It uses the render kernels
//!   (IoU for patches, center distance for points, polyline distance for
//!   lines, content × anchor distance for texts), combines kinds with weights
//!   and is gated on executability.
//!
//! In both, each kind is matched separately and normalized by the larger of
//! the two object counts, so missing and hallucinated objects both cost.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assignment::matched_type_score;
use crate::chart::{ChartDocument, GraphicalKind, GraphicalObject, ObjectKind, TextObject};
use crate::error::{Error, Result};
use crate::kernels::{
    layout_similarity, render_similarity, render_text_similarity, text_similarity, KernelParams,
};

pub const DEFAULT_EXEC_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub kernel_params: KernelParams,
    /// Per-kind weights. `None` weighs every present kind equally; kinds
    /// missing from an explicit map get weight 0.
    pub type_weights: Option<BTreeMap<ObjectKind, f64>>,
    pub exec_timeout: Duration,
    pub zscore_eps: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            kernel_params: KernelParams::default(),
            type_weights: None,
            exec_timeout: DEFAULT_EXEC_TIMEOUT,
            zscore_eps: 1e-8,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel_params.validate()?;
        if let Some(weights) = &self.type_weights {
            if let Some((kind, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
                return Err(Error::Config(format!(
                    "weight for {kind} must be finite and nonnegative, got {w}"
                )));
            }
            if weights.values().all(|w| *w == 0.0) {
                return Err(Error::Config("all type weights are zero".into()));
            }
        }
        if self.exec_timeout.is_zero() {
            return Err(Error::Config("exec_timeout must be positive".into()));
        }
        if !(self.zscore_eps.is_finite() && self.zscore_eps >= 0.0) {
            return Err(Error::Config("zscore_eps must be finite and nonnegative".into()));
        }
        Ok(())
    }

    fn weight(&self, kind: ObjectKind) -> f64 {
        match &self.type_weights {
            None => 1.0,
            Some(w) => w.get(&kind).copied().unwrap_or(0.0),
        }
    }
}

/// Rewards for one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutScore {
    pub format: u8,
    pub exec: u8,
    pub render: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extracted_code: Option<String>,
}

impl RolloutScore {
    pub fn new(format: u8, exec: u8, render: f64, extracted_code: Option<String>) -> Self {
        let render = if exec == 0 { 0.0 } else { render };
        RolloutScore {
            format,
            exec,
            render,
            total: total_reward(format, render),
            extracted_code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAdvantages {
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Find a tagged segment: first opening tag, then the first closing tag after it.
fn tagged_segment<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let len = text[start..].find(close)?;
    Some(&text[start..start + len])
}

/// Strip a surrounding markdown code fence, with or without a language tag.
fn strip_code_fence(code: &str) -> &str {
    let trimmed = code.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    // Drop the info string (e.g. "python") on the opening fence line.
    let body = match rest.find('\n') {
        Some(nl) => &rest[nl + 1..],
        None => rest.trim_start_matches(|c: char| c.is_alphanumeric()),
    };
    body.strip_suffix("```").unwrap_or(body).trim()
}

/// Score 1 and return the code when both a non-empty `<think>` segment and a
/// non-empty `<code>` segment are present.
pub fn format_reward(response: &str) -> (u8, Option<String>) {
    let Some(think) = tagged_segment(response, "<think>", "</think>") else {
        return (0, None);
    };
    if think.trim().is_empty() {
        return (0, None);
    }
    let Some(code) = tagged_segment(response, "<code>", "</code>") else {
        return (0, None);
    };
    let code = strip_code_fence(code);
    if code.is_empty() {
        return (0, None);
    }
    (1, Some(code.to_string()))
}

fn graphical_by_kind(doc: &ChartDocument, kind: GraphicalKind) -> Vec<&GraphicalObject> {
    doc.graphical_of(kind).collect()
}

fn texts(doc: &ChartDocument) -> Vec<&TextObject> {
    doc.texts.iter().collect()
}

/// Layout score: mean over graphical kinds of the matched color × position ×
/// shape similarity. Two documents without graphical objects score 1.
pub fn layout_metric(pred: &ChartDocument, gt: &ChartDocument, cfg: &RewardConfig) -> Result<f64> {
    let params = &cfg.kernel_params;
    let mut scores = Vec::new();
    for kind in GraphicalKind::ALL {
        let (p, g) = (graphical_by_kind(pred, kind), graphical_by_kind(gt, kind));
        if let Some(s) = matched_type_score(&p, &g, |a, b| layout_similarity(a, b, params))? {
            scores.push(s);
        }
    }
    if scores.is_empty() {
        return Ok(1.0);
    }
    Ok((scores.iter().sum::<f64>() / scores.len() as f64).clamp(0.0, 1.0))
}

/// Text score: matched font-penalized content similarity. Two documents
/// without texts score 1.
pub fn text_metric(pred: &ChartDocument, gt: &ChartDocument, cfg: &RewardConfig) -> Result<f64> {
    let params = &cfg.kernel_params;
    let score = matched_type_score(&texts(pred), &texts(gt), |a, b| {
        Ok(text_similarity(a, b, params))
    })?;
    Ok(score.unwrap_or(1.0))
}

/// Per-kind render scores; kinds empty on both sides are omitted.
pub fn render_type_scores(
    pred: &ChartDocument,
    gt: &ChartDocument,
    params: &KernelParams,
) -> Result<BTreeMap<ObjectKind, f64>> {
    let mut out = BTreeMap::new();
    for kind in GraphicalKind::ALL {
        let (p, g) = (graphical_by_kind(pred, kind), graphical_by_kind(gt, kind));
        if let Some(s) = matched_type_score(&p, &g, |a, b| render_similarity(a, b, params))? {
            out.insert(kind.into(), s);
        }
    }
    if let Some(s) = matched_type_score(&texts(pred), &texts(gt), |a, b| {
        Ok(render_text_similarity(a, b))
    })? {
        out.insert(ObjectKind::Text, s);
    }
    Ok(out)
}

/// Executability-gated weighted sum of per-kind render scores.
///
/// Weights are renormalized over the kinds present in either document. Two
/// documents with no objects at all score 1 when executable.
pub fn rendering_reward(
    pred: &ChartDocument,
    gt: &ChartDocument,
    exec: u8,
    cfg: &RewardConfig,
) -> Result<f64> {
    if exec == 0 {
        return Ok(0.0);
    }
    let scores = render_type_scores(pred, gt, &cfg.kernel_params)?;
    if scores.is_empty() {
        return Ok(1.0);
    }
    let mut weighted = 0.0;
    let mut weight_sum = 0.0;
    for (&kind, &s) in &scores {
        let w = cfg.weight(kind);
        weighted += w * s;
        weight_sum += w;
    }
    if weight_sum <= 0.0 {
        let kinds: Vec<String> = scores.keys().map(ToString::to_string).collect();
        return Err(Error::Config(format!(
            "every present kind ({}) has zero weight",
            kinds.join(", ")
        )));
    }
    Ok((weighted / weight_sum).clamp(0.0, 1.0))
}

pub fn total_reward(format: u8, render: f64) -> f64 {
    f64::from(format) + render
}

/// Z-score rewards within a group using the population standard deviation.
pub fn group_advantages(rewards: &[f64], cfg: &RewardConfig) -> Result<GroupAdvantages> {
    if rewards.is_empty() {
        return Err(Error::Usage("cannot normalize an empty reward group".into()));
    }
    if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(Error::Usage(format!("non-finite reward {bad}")));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt();

    let advantages = if std <= cfg.zscore_eps {
        vec![0.0; rewards.len()]
    } else {
        rewards
            .iter()
            .map(|r| (r - mean) / (std + cfg.zscore_eps))
            .collect()
    };
    Ok(GroupAdvantages {
        rewards: rewards.to_vec(),
        advantages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{BBox, Color, Vec2};

    fn patch(id: &str, bbox: BBox, color: Color) -> GraphicalObject {
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

    fn text(id: &str, content: &str, family: &str) -> TextObject {
        TextObject {
            id: id.into(),
            content: content.into(),
            anchor: Vec2::new(0.5, 0.95),
            color: Color::BLACK,
            font_family: family.into(),
            font_size: 12.0,
            axes_index: 0,
        }
    }

    fn doc(graphical: Vec<GraphicalObject>, texts: Vec<TextObject>) -> ChartDocument {
        ChartDocument {
            graphical,
            texts,
            ..ChartDocument::default()
        }
    }

    #[test]
    fn format_examples() {
        assert_eq!(
            format_reward("<think>plan</think><code>x=1</code>"),
            (1, Some("x=1".into()))
        );
        assert_eq!(format_reward("<think>plan</think> final answer"), (0, None));
        assert_eq!(
            format_reward("<think>t</think><code>```\nx=1\n```</code>"),
            (1, Some("x=1".into()))
        );
    }

    #[test]
    fn format_edge_cases() {
        assert_eq!(
            format_reward("<think>t</think><code>```python\nimport a\nx=1\n```</code>"),
            (1, Some("import a\nx=1".into()))
        );
        assert_eq!(format_reward("<think>  </think><code>x</code>"), (0, None));
        assert_eq!(format_reward("<think>t</think><code>```\n```</code>"), (0, None));
        assert_eq!(format_reward("<code>x</code>"), (0, None));
        assert_eq!(format_reward("<think>t<code>x</code>"), (0, None));
        // first pair wins
        assert_eq!(
            format_reward("<think>a</think><code>one</code><code>two</code>"),
            (1, Some("one".into()))
        );
    }

    #[test]
    fn layout_examples() {
        let cfg = RewardConfig::default();
        let b = BBox::new(0.2, 0.2, 0.4, 0.6);
        let gt = doc(vec![patch("a", b, Color::BLACK), patch("b", b, Color::BLACK)], vec![]);
        assert_eq!(layout_metric(&gt, &gt, &cfg).unwrap(), 1.0);
        assert_eq!(layout_metric(&doc(vec![], vec![]), &gt, &cfg).unwrap(), 0.0);

        let pred = doc(vec![patch("a", b, Color::BLACK), patch("b", b, Color::WHITE)], vec![]);
        assert_eq!(layout_metric(&pred, &gt, &cfg).unwrap(), 0.5);

        let empty = doc(vec![], vec![]);
        assert_eq!(layout_metric(&empty, &empty, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn text_examples() {
        let cfg = RewardConfig::default();
        let gt = doc(vec![], vec![text("t0", "A", "serif"), text("t1", "B", "serif")]);
        assert_eq!(text_metric(&gt, &gt, &cfg).unwrap(), 1.0);
        let pred = doc(vec![], vec![text("t0", "A", "serif")]);
        assert_eq!(text_metric(&pred, &gt, &cfg).unwrap(), 0.5);

        let one = doc(vec![], vec![text("t0", "A", "serif")]);
        let other = doc(vec![], vec![text("t0", "A", "monospace")]);
        assert_eq!(text_metric(&other, &one, &cfg).unwrap(), 0.7);

        let empty = doc(vec![], vec![]);
        assert_eq!(text_metric(&empty, &empty, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn rendering_examples() {
        let cfg = RewardConfig::default();
        let gt = doc(
            vec![patch("a", BBox::new(0.0, 0.0, 1.0, 1.0), Color::BLACK)],
            vec![text("t", "Title", "serif")],
        );
        assert_eq!(rendering_reward(&gt, &gt, 0, &cfg).unwrap(), 0.0);
        assert_eq!(rendering_reward(&gt, &gt, 1, &cfg).unwrap(), 1.0);

        let g = doc(vec![patch("a", BBox::new(0.0, 0.0, 1.0, 1.0), Color::BLACK)], vec![]);
        let p = doc(vec![patch("a", BBox::new(0.5, 0.0, 1.5, 1.0), Color::BLACK)], vec![]);
        assert!((rendering_reward(&p, &g, 1, &cfg).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_on_present_kinds_is_config_error() {
        let cfg = RewardConfig {
            type_weights: Some(BTreeMap::from([(ObjectKind::Line, 1.0)])),
            ..RewardConfig::default()
        };
        let g = doc(vec![patch("a", BBox::new(0.0, 0.0, 1.0, 1.0), Color::BLACK)], vec![]);
        assert!(matches!(rendering_reward(&g, &g, 1, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn explicit_weights() {
        let cfg = RewardConfig {
            type_weights: Some(BTreeMap::from([(ObjectKind::Patch, 3.0), (ObjectKind::Text, 1.0)])),
            ..RewardConfig::default()
        };
        let g = doc(
            vec![patch("a", BBox::new(0.0, 0.0, 1.0, 1.0), Color::BLACK)],
            vec![text("t", "Title", "serif")],
        );
        let p = doc(vec![patch("a", BBox::new(0.0, 0.0, 1.0, 1.0), Color::BLACK)], vec![]);
        // patch 1.0 (w 3), text 0.0 (w 1)
        assert_eq!(rendering_reward(&p, &g, 1, &cfg).unwrap(), 0.75);
    }

    #[test]
    fn totals() {
        assert_eq!(total_reward(1, 1.0), 2.0);
        assert_eq!(total_reward(0, 0.0), 0.0);
        assert!((total_reward(1, 1.0 / 3.0) - 4.0 / 3.0).abs() < 1e-15);
        let s = RolloutScore::new(1, 0, 0.9, None);
        assert_eq!(s.render, 0.0);
        assert_eq!(s.total, 1.0);
    }

    #[test]
    fn advantages() {
        let cfg = RewardConfig::default();
        assert_eq!(group_advantages(&[1.0; 4], &cfg).unwrap().advantages, vec![0.0; 4]);
        assert_eq!(group_advantages(&[0.1; 3], &cfg).unwrap().advantages, vec![0.0; 3]);
        let a = group_advantages(&[0.0, 1.0], &cfg).unwrap().advantages;
        assert!((a[0] + 1.0).abs() < 1e-6 && (a[1] - 1.0).abs() < 1e-6);
        let a = group_advantages(&[0.0, 0.0, 2.0, 2.0], &cfg).unwrap().advantages;
        for (x, e) in a.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((x - e).abs() < 1e-6);
        }
        assert!(matches!(group_advantages(&[], &cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        let zero = RewardConfig {
            type_weights: Some(BTreeMap::from([(ObjectKind::Patch, 0.0)])),
            ..RewardConfig::default()
        };
        assert!(zero.validate().is_err());
        let no_time = RewardConfig {
            exec_timeout: Duration::ZERO,
            ..RewardConfig::default()
        };
        assert!(no_time.validate().is_err());
    }
}
