//! Report structures for experiment runs, their aggregation and the
//! plot-ready figure files.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;

use super::{ExperimentId, ExperimentSpec};
use crate::search::ScoredConfiguration;

/// The winning configuration of one search, without timing metadata.
#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub avg_profitability: f64,
    pub quality_score: f64,
    pub matched_rows: usize,
    pub selected_columns: Vec<usize>,
    pub values: Vec<u64>,
}

impl From<&ScoredConfiguration> for Selection {
    fn from(s: &ScoredConfiguration) -> Self {
        Selection {
            avg_profitability: s.avg_profitability,
            quality_score: s.quality_score,
            matched_rows: s.matched_rows,
            selected_columns: s.config.attribute_indices().to_vec(),
            values: s.config.values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSweepCell {
    pub limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallCampaignsCell {
    pub required_visits: usize,
    pub round_limit: usize,
    pub rounds_requested: usize,
    pub rounds_completed: usize,
    pub early_stop: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequential_avg: Option<f64>,
    pub sequential_visits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrefixExtrapolationCell {
    pub fraction: f64,
    pub limit: usize,
    pub prefix_rows: usize,
    pub prefix_limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix_best: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reevaluated_avg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reevaluated_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_optimum: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MedianThresholdCell {
    pub limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_value: Option<f64>,
    pub kept_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholded: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxedLimitCell {
    pub limit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxed: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cell {
    LimitSweep(LimitSweepCell),
    SmallCampaigns(SmallCampaignsCell),
    PrefixExtrapolation(PrefixExtrapolationCell),
    MedianThreshold(MedianThresholdCell),
    RelaxedLimit(RelaxedLimitCell),
}

impl Cell {
    /// Stable key identifying the cell's position in its grid.
    pub fn key(&self) -> String {
        match self {
            Cell::LimitSweep(c) => format!("limit={}", c.limit),
            Cell::SmallCampaigns(c) => {
                format!("visits={} round={}", c.required_visits, c.round_limit)
            }
            Cell::PrefixExtrapolation(c) => {
                format!("limit={} fraction={}", c.limit, c.fraction)
            }
            Cell::MedianThreshold(c) => format!("limit={}", c.limit),
            Cell::RelaxedLimit(c) => format!("limit={}", c.limit),
        }
    }

    /// Metric values this cell contributes to the cross-slice aggregate.
    fn metrics(&self) -> Vec<(&'static str, Option<f64>)> {
        match self {
            Cell::LimitSweep(c) => vec![(
                "best_avg_profitability",
                c.best.as_ref().map(|b| b.avg_profitability),
            )],
            Cell::SmallCampaigns(c) => vec![
                ("sequential_avg", c.sequential_avg),
                (
                    "baseline_avg",
                    c.baseline.as_ref().map(|b| b.avg_profitability),
                ),
                ("early_stops", Some(c.early_stop as u8 as f64)),
            ],
            Cell::PrefixExtrapolation(c) => vec![
                ("ratio", c.ratio),
                ("reevaluated_avg", c.reevaluated_avg),
                (
                    "full_optimum_avg",
                    c.full_optimum.as_ref().map(|b| b.avg_profitability),
                ),
            ],
            Cell::MedianThreshold(c) => vec![
                (
                    "baseline_avg",
                    c.baseline.as_ref().map(|b| b.avg_profitability),
                ),
                (
                    "thresholded_avg",
                    c.thresholded.as_ref().map(|b| b.avg_profitability),
                ),
            ],
            Cell::RelaxedLimit(c) => vec![
                (
                    "strict_top_score",
                    c.strict.as_ref().map(|b| b.quality_score),
                ),
                (
                    "relaxed_top_score",
                    c.relaxed.as_ref().map(|b| b.quality_score),
                ),
                ("delta", c.delta),
            ],
        }
    }

    fn strip_timing(&mut self) {
        match self {
            Cell::LimitSweep(c) => c.runtime_seconds = None,
            Cell::SmallCampaigns(c) => c.runtime_seconds = None,
            Cell::PrefixExtrapolation(c) => c.runtime_seconds = None,
            Cell::MedianThreshold(c) => c.runtime_seconds = None,
            Cell::RelaxedLimit(c) => c.runtime_seconds = None,
        }
    }
}

/// One slice's cell series.
#[derive(Debug, Clone, Serialize)]
pub struct SliceSeries {
    pub dataset_id: String,
    pub rows: usize,
    pub cells: Vec<Cell>,
}

/// Sum and mean of one metric over the slices where it was present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub sum: f64,
    pub mean: f64,
    pub slices: usize,
}

/// Cross-slice aggregation of every metric of one cell key.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub key: String,
    pub metrics: BTreeMap<String, Aggregate>,
}

/// Full outcome of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub spec: ExperimentSpec,
    pub code_version: String,
    pub slices: Vec<SliceSeries>,
    pub aggregate: Vec<AggregateRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl ExperimentReport {
    /// Drops every wall-clock field, leaving only content that is
    /// reproducible bit-exact from (dataset, spec).
    pub fn without_timings(mut self) -> Self {
        self.runtime_seconds = None;
        for series in &mut self.slices {
            for cell in &mut series.cells {
                cell.strip_timing();
            }
        }
        self
    }

    /// Pretty-printed JSON with stable key order.
    pub fn write_json<W: Write>(&self, w: &mut W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

/// Builds the cross-slice aggregate rows, keyed in the first slice's cell
/// order (every slice shares the same grid).
pub(super) fn aggregate(slices: &[SliceSeries]) -> Vec<AggregateRow> {
    let Some(first) = slices.first() else {
        return Vec::new();
    };
    first
        .cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let key = cell.key();
            let mut metrics = BTreeMap::new();
            for (name, _) in cell.metrics() {
                let values: Vec<f64> = slices
                    .iter()
                    .filter_map(|s| {
                        s.cells[i]
                            .metrics()
                            .into_iter()
                            .find(|(n, _)| *n == name)
                            .and_then(|(_, v)| v)
                    })
                    .collect();
                let sum: f64 = values.iter().sum();
                metrics.insert(
                    name.to_string(),
                    Aggregate {
                        sum,
                        mean: if values.is_empty() {
                            0.0
                        } else {
                            sum / values.len() as f64
                        },
                        slices: values.len(),
                    },
                );
            }
            AggregateRow { key, metrics }
        })
        .collect()
}

/// Writes the aggregate as one plot-ready TSV: a key column, then per
/// metric its sum, mean and contributing slice count.
pub fn write_figure_tsv<W: Write>(report: &ExperimentReport, w: &mut W) -> io::Result<()> {
    let metric_names: Vec<String> = report
        .aggregate
        .first()
        .map(|row| row.metrics.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = vec!["key".to_string()];
    for m in &metric_names {
        header.push(format!("sum_{m}"));
        header.push(format!("mean_{m}"));
        header.push(format!("n_{m}"));
    }
    writeln!(w, "{}", header.join("\t"))?;
    for row in &report.aggregate {
        let mut line = row.key.clone();
        for m in &metric_names {
            let agg = &row.metrics[m];
            line.push_str(&format!("\t{}\t{}\t{}", agg.sum, agg.mean, agg.slices));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
