//! The thirteen-metric evaluation report and its serialized forms.
//!
//! Markdown output follows a two-table layout: no-reference quality per
//! scope, then input alignment and frame consistency. Values use two decimals
//! and unavailable entries print as `n/a`. Nothing time-dependent is written,
//! so identical inputs give byte-identical reports.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const DEFAULT_LABEL: &str = "avatarforge";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Frame,
    Body,
    Background,
    Pose,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Lower,
    Higher,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Lower => "↓",
            Direction::Higher => "↑",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    FrameNiqe,
    BodyNiqe,
    BackgroundNiqe,
    FrameBrisque,
    BodyBrisque,
    BackgroundBrisque,
    PoseMse,
    TextAlignment,
    FrameMse,
    FrameL1,
    FrameClip,
    BodyClip,
    BackgroundClip,
}

/// Quality table columns.
pub const QUALITY_METRICS: [MetricId; 6] = [
    MetricId::FrameNiqe,
    MetricId::BodyNiqe,
    MetricId::BackgroundNiqe,
    MetricId::FrameBrisque,
    MetricId::BodyBrisque,
    MetricId::BackgroundBrisque,
];

/// Alignment and consistency table columns.
pub const CONSISTENCY_METRICS: [MetricId; 7] = [
    MetricId::PoseMse,
    MetricId::TextAlignment,
    MetricId::FrameMse,
    MetricId::FrameL1,
    MetricId::FrameClip,
    MetricId::BodyClip,
    MetricId::BackgroundClip,
];

impl MetricId {
    /// All thirteen metrics in report order.
    pub const ALL: [MetricId; 13] = [
        MetricId::FrameNiqe,
        MetricId::BodyNiqe,
        MetricId::BackgroundNiqe,
        MetricId::FrameBrisque,
        MetricId::BodyBrisque,
        MetricId::BackgroundBrisque,
        MetricId::PoseMse,
        MetricId::TextAlignment,
        MetricId::FrameMse,
        MetricId::FrameL1,
        MetricId::FrameClip,
        MetricId::BodyClip,
        MetricId::BackgroundClip,
    ];

    /// Column header. The pose metric keeps its established table spelling.
    pub fn display_name(self) -> &'static str {
        match self {
            MetricId::FrameNiqe => "Frame NIQE",
            MetricId::BodyNiqe => "Body NIQE",
            MetricId::BackgroundNiqe => "Background NIQE",
            MetricId::FrameBrisque => "Frame BRISQUE",
            MetricId::BodyBrisque => "Body BRISQUE",
            MetricId::BackgroundBrisque => "Background BRISQUE",
            MetricId::PoseMse => "Pose MES",
            MetricId::TextAlignment => "Text Alignment",
            MetricId::FrameMse => "Frame MSE",
            MetricId::FrameL1 => "Frame L1",
            MetricId::FrameClip => "Frame CLIP",
            MetricId::BodyClip => "Body CLIP",
            MetricId::BackgroundClip => "Background CLIP",
        }
    }

    /// Machine key used in JSON and CSV.
    pub fn key(self) -> &'static str {
        match self {
            MetricId::FrameNiqe => "frame_niqe",
            MetricId::BodyNiqe => "body_niqe",
            MetricId::BackgroundNiqe => "background_niqe",
            MetricId::FrameBrisque => "frame_brisque",
            MetricId::BodyBrisque => "body_brisque",
            MetricId::BackgroundBrisque => "background_brisque",
            MetricId::PoseMse => "pose_mse",
            MetricId::TextAlignment => "text_alignment",
            MetricId::FrameMse => "frame_mse",
            MetricId::FrameL1 => "frame_l1",
            MetricId::FrameClip => "frame_clip",
            MetricId::BodyClip => "body_clip",
            MetricId::BackgroundClip => "background_clip",
        }
    }

    pub fn scope(self) -> Scope {
        use MetricId::*;
        match self {
            FrameNiqe | FrameBrisque | FrameMse | FrameL1 | FrameClip => Scope::Frame,
            BodyNiqe | BodyBrisque | BodyClip => Scope::Body,
            BackgroundNiqe | BackgroundBrisque | BackgroundClip => Scope::Background,
            PoseMse => Scope::Pose,
            TextAlignment => Scope::Text,
        }
    }

    pub fn direction(self) -> Direction {
        use MetricId::*;
        match self {
            TextAlignment | FrameClip | BodyClip | BackgroundClip => Direction::Higher,
            _ => Direction::Lower,
        }
    }

    pub fn header(self) -> String {
        format!("{} {}", self.display_name(), self.direction().arrow())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: MetricId,
    pub name: String,
    pub scope: Scope,
    pub direction: Direction,
    /// `None` when the metric could not be computed.
    pub value: Option<f64>,
    /// Why the value is missing.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{metric} value {value} is not finite")]
    NonFinite { metric: &'static str, value: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One row of results: all thirteen metrics for one labelled run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub entries: Vec<MetricEntry>,
}

impl MetricReport {
    /// Every metric present and marked unavailable.
    pub fn new(label: impl Into<String>) -> Self {
        MetricReport {
            label: label.into(),
            entries: MetricId::ALL
                .iter()
                .map(|&m| MetricEntry {
                    metric: m,
                    name: m.display_name().to_string(),
                    scope: m.scope(),
                    direction: m.direction(),
                    value: None,
                    note: Some("not computed".into()),
                })
                .collect(),
        }
    }

    fn entry_mut(&mut self, metric: MetricId) -> &mut MetricEntry {
        self.entries
            .iter_mut()
            .find(|e| e.metric == metric)
            .expect("report holds every metric")
    }

    pub fn entry(&self, metric: MetricId) -> &MetricEntry {
        self.entries
            .iter()
            .find(|e| e.metric == metric)
            .expect("report holds every metric")
    }

    pub fn value(&self, metric: MetricId) -> Option<f64> {
        self.entry(metric).value
    }

    pub fn set(&mut self, metric: MetricId, value: f64) -> Result<(), ReportError> {
        if !value.is_finite() {
            return Err(ReportError::NonFinite {
                metric: metric.key(),
                value,
            });
        }
        let e = self.entry_mut(metric);
        e.value = Some(value);
        e.note = None;
        Ok(())
    }

    pub fn set_unavailable(&mut self, metric: MetricId, note: impl Into<String>) {
        let e = self.entry_mut(metric);
        e.value = None;
        e.note = Some(note.into());
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per metric: `label,metric,name,scope,direction,value,note`.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "metric", "name", "scope", "direction", "value", "note"])?;
        for e in &self.entries {
            let scope = serde_json::to_value(e.scope)?;
            let dir = serde_json::to_value(e.direction)?;
            w.write_record([
                self.label.as_str(),
                e.metric.key(),
                e.name.as_str(),
                scope.as_str().unwrap_or_default(),
                dir.as_str().unwrap_or_default(),
                &e.value.map(|v| format!("{v}")).unwrap_or_default(),
                e.note.as_deref().unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        render_markdown(std::slice::from_ref(self))
    }
}

fn format_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "n/a".to_string(),
    }
}

fn table(out: &mut String, reports: &[MetricReport], metrics: &[MetricId]) {
    let headers: Vec<String> = metrics.iter().map(|m| m.header()).collect();
    let _ = writeln!(out, "| Model | {} |", headers.join(" | "));
    let _ = writeln!(out, "|---{}|", "|---".repeat(metrics.len()));
    for r in reports {
        let cells: Vec<String> = metrics.iter().map(|&m| format_value(r.value(m))).collect();
        let _ = writeln!(out, "| {} | {} |", r.label, cells.join(" | "));
    }
}

/// Both tables with one row per report, followed by notes for missing values.
pub fn render_markdown(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    out.push_str("## Video quality\n\n");
    table(&mut out, reports, &QUALITY_METRICS);
    out.push_str("\n## Input alignment and frame consistency\n\n");
    table(&mut out, reports, &CONSISTENCY_METRICS);
    let notes: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.entries.iter().filter_map(move |e| {
                e.note
                    .as_ref()
                    .map(|n| format!("- {} / {}: {}", r.label, e.name, n))
            })
        })
        .collect();
    if !notes.is_empty() {
        out.push_str("\nUnavailable:\n\n");
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_ordered() {
        let mut all: Vec<MetricId> = QUALITY_METRICS.to_vec();
        all.extend(CONSISTENCY_METRICS);
        assert_eq!(all, MetricId::ALL.to_vec());
        let keys: std::collections::HashSet<_> = MetricId::ALL.iter().map(|m| m.key()).collect();
        assert_eq!(keys.len(), 13);
    }

    #[test]
    fn directions() {
        for m in MetricId::ALL {
            let higher = matches!(
                m,
                MetricId::TextAlignment | MetricId::FrameClip | MetricId::BodyClip | MetricId::BackgroundClip
            );
            assert_eq!(m.direction() == Direction::Higher, higher, "{m:?}");
        }
    }

    #[test]
    fn markdown_layout_fixture() {
        let mut r = MetricReport::new("fixture");
        for (m, v) in [
            (MetricId::PoseMse, 1.48),
            (MetricId::TextAlignment, 31.92),
            (MetricId::FrameMse, 26.66),
            (MetricId::FrameL1, 270.31),
            (MetricId::FrameClip, 80.63),
            (MetricId::BodyClip, 77.43),
            (MetricId::BackgroundClip, 81.82),
        ] {
            r.set(m, v).unwrap();
        }
        let md = r.to_markdown();
        assert!(md.contains(
            "| Model | Frame NIQE ↓ | Body NIQE ↓ | Background NIQE ↓ | Frame BRISQUE ↓ | Body BRISQUE ↓ | Background BRISQUE ↓ |"
        ));
        assert!(md.contains(
            "| Model | Pose MES ↓ | Text Alignment ↑ | Frame MSE ↓ | Frame L1 ↓ | Frame CLIP ↑ | Body CLIP ↑ | Background CLIP ↑ |"
        ));
        assert!(md.contains("| fixture | 1.48 | 31.92 | 26.66 | 270.31 | 80.63 | 77.43 | 81.82 |"));
        assert!(md.contains("| fixture | n/a | n/a | n/a | n/a | n/a | n/a |"));
        assert!(md.contains("- fixture / Frame NIQE: not computed"));
    }

    #[test]
    fn json_and_csv() {
        let mut r = MetricReport::new(DEFAULT_LABEL);
        r.set(MetricId::FrameMse, 0.1 + 0.2).unwrap();
        r.set_unavailable(MetricId::FrameBrisque, "no SVR model");
        assert!(r.set(MetricId::FrameL1, f64::NAN).is_err());
        let json = r.to_json().unwrap();
        assert_eq!(MetricReport::from_json(&json).unwrap(), r);
        assert_eq!(json, r.clone().to_json().unwrap());
        let csv = r.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 14);
        assert_eq!(lines[0], "label,metric,name,scope,direction,value,note");
        assert!(lines.contains(&"avatarforge,frame_mse,Frame MSE,frame,lower,0.30000000000000004,"));
        assert!(lines.contains(&"avatarforge,frame_brisque,Frame BRISQUE,frame,lower,,no SVR model"));
    }
}
