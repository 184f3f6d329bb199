//! Parameterized analysis strategies over campaign slices.
//!
//! Five runs, selected by [`ExperimentId`] (the CLI addresses them as
//! I..V):
//!
//! * **I — limit sweep**: best qualifying configuration per required-visit
//!   limit; shows profitability decaying as the requirement grows.
//! * **II — sequential small campaigns**: several small-limit
//!   configurations selected sequentially (matched rows removed between
//!   rounds) versus one configuration at the full requirement.
//! * **III — prefix extrapolation**: search a time-prefix of the slice,
//!   then re-evaluate the winner on the full slice.
//! * **IV — median threshold**: drop the expensive (or unprofitable) half
//!   of the rows before searching, against the unfiltered baseline.
//! * **V — relaxed limit**: score below-limit configurations instead of
//!   rejecting them, against the strict search.
//!
//! Slices run concurrently; one report assembles per-slice series plus
//! cross-slice aggregates (sum and mean per cell key). Cells are
//! reproducible bit-exact from (dataset, spec); wall-clock runtimes are
//! carried separately and stripped from default serializations.

mod report;

pub use report::{
    write_figure_tsv, Aggregate, AggregateRow, Cell, ExperimentReport, LimitSweepCell,
    MedianThresholdCell, PrefixExtrapolationCell, RelaxedLimitCell, Selection, SliceSeries,
    SmallCampaignsCell,
};

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{CampaignDataset, MIXED_CAMPAIGNS};
use crate::scoring::{average_profitability, ScoringError};
use crate::search::{
    search, search_sequential, ScoredConfiguration, SearchError, SearchParams,
};

#[derive(Debug, Error)]
pub enum StrategiesError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Which strategy to run. Parses from the Roman numerals I..V or the
/// descriptive names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentId {
    #[serde(rename = "I")]
    LimitSweep,
    #[serde(rename = "II")]
    SmallCampaigns,
    #[serde(rename = "III")]
    PrefixExtrapolation,
    #[serde(rename = "IV")]
    MedianThreshold,
    #[serde(rename = "V")]
    RelaxedLimit,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::LimitSweep,
        ExperimentId::SmallCampaigns,
        ExperimentId::PrefixExtrapolation,
        ExperimentId::MedianThreshold,
        ExperimentId::RelaxedLimit,
    ];

    pub fn numeral(&self) -> &'static str {
        match self {
            ExperimentId::LimitSweep => "I",
            ExperimentId::SmallCampaigns => "II",
            ExperimentId::PrefixExtrapolation => "III",
            ExperimentId::MedianThreshold => "IV",
            ExperimentId::RelaxedLimit => "V",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.numeral())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" | "LIMIT-SWEEP" | "LIMIT_SWEEP" => Ok(ExperimentId::LimitSweep),
            "II" | "2" | "SMALL-CAMPAIGNS" | "SMALL_CAMPAIGNS" => Ok(ExperimentId::SmallCampaigns),
            "III" | "3" | "PREFIX-EXTRAPOLATION" | "PREFIX_EXTRAPOLATION" => {
                Ok(ExperimentId::PrefixExtrapolation)
            }
            "IV" | "4" | "MEDIAN-THRESHOLD" | "MEDIAN_THRESHOLD" => {
                Ok(ExperimentId::MedianThreshold)
            }
            "V" | "5" | "RELAXED-LIMIT" | "RELAXED_LIMIT" => Ok(ExperimentId::RelaxedLimit),
            other => Err(format!("unknown experiment id `{other}`")),
        }
    }
}

/// Which variable the median threshold of experiment IV filters on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    /// Keep rows with cost at or below the median cost.
    Cost,
    /// Keep rows with profitability at or above the median profitability.
    Profitability,
    /// No filtering; degenerates to the limit sweep.
    None,
}

impl std::str::FromStr for ThresholdKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cost" => Ok(ThresholdKind::Cost),
            "profitability" => Ok(ThresholdKind::Profitability),
            "none" => Ok(ThresholdKind::None),
            other => Err(format!("unknown threshold kind `{other}`")),
        }
    }
}

/// Full parameterization of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    /// Required-visit limits, ascending.
    pub limits: Vec<usize>,
    /// Per-round limits for the sequential strategy (II).
    pub slice_sizes: Vec<usize>,
    /// Time-prefix fractions in (0, 1] for extrapolation (III).
    pub prefix_fractions: Vec<f64>,
    /// Threshold variable for experiment IV.
    pub threshold_kind: ThresholdKind,
    /// Cap on the attribute-subset size; `None` searches all attributes.
    pub max_subset_size: Option<usize>,
    /// Echoed into reports; the strategies themselves draw no randomness.
    pub rng_seed: u64,
}

impl ExperimentSpec {
    /// Documented defaults: limits 5k..50k step 5k (II stops at 30k),
    /// round limits 1000 and 2500, fractions 0.1..1.0 step 0.1, cost
    /// threshold.
    pub fn defaults(experiment: ExperimentId) -> Self {
        let limit_top = match experiment {
            ExperimentId::SmallCampaigns => 30_000,
            _ => 50_000,
        };
        ExperimentSpec {
            experiment,
            limits: (1..=10)
                .map(|k| k * 5000)
                .filter(|&l| l <= limit_top)
                .collect(),
            slice_sizes: vec![1000, 2500],
            prefix_fractions: (1..=10).map(|k| k as f64 / 10.0).collect(),
            threshold_kind: ThresholdKind::Cost,
            max_subset_size: None,
            rng_seed: 0,
        }
    }

    fn validate(&self) -> Result<(), StrategiesError> {
        if self.limits.is_empty() {
            return Err(StrategiesError::InvalidSpec("no limits given".into()));
        }
        if self.limits.iter().any(|&l| l == 0) {
            return Err(StrategiesError::InvalidSpec("limits must be >= 1".into()));
        }
        if self.limits.windows(2).any(|w| w[0] >= w[1]) {
            return Err(StrategiesError::InvalidSpec(
                "limits must be strictly ascending".into(),
            ));
        }
        if self.experiment == ExperimentId::SmallCampaigns
            && (self.slice_sizes.is_empty() || self.slice_sizes.iter().any(|&s| s == 0))
        {
            return Err(StrategiesError::InvalidSpec(
                "slice_sizes must be non-empty and positive".into(),
            ));
        }
        if self.experiment == ExperimentId::PrefixExtrapolation
            && (self.prefix_fractions.is_empty()
                || self
                    .prefix_fractions
                    .iter()
                    .any(|&f| !(f > 0.0 && f <= 1.0)))
        {
            return Err(StrategiesError::InvalidSpec(
                "prefix fractions must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn search_params(&self, limit: usize) -> SearchParams {
        SearchParams {
            limit,
            allow_below_limit: false,
            max_subset_size: self.max_subset_size.unwrap_or(usize::MAX),
            prune: true,
        }
    }
}

/// Runs the spec's experiment over the given scored slices.
pub fn run_experiment(
    slices: &[CampaignDataset],
    spec: &ExperimentSpec,
) -> Result<ExperimentReport, StrategiesError> {
    match spec.experiment {
        ExperimentId::LimitSweep => run_limit_sweep(slices, spec),
        ExperimentId::SmallCampaigns => run_small_campaigns(slices, spec),
        ExperimentId::PrefixExtrapolation => run_prefix_extrapolation(slices, spec),
        ExperimentId::MedianThreshold => run_median_threshold(slices, spec),
        ExperimentId::RelaxedLimit => run_relaxed_limit(slices, spec),
    }
}

fn slice_id(index: usize, slice: &CampaignDataset) -> String {
    if slice.campaign_id() == MIXED_CAMPAIGNS {
        format!("slice-{index}:mixed")
    } else {
        format!("slice-{index}:campaign-{}", slice.campaign_id())
    }
}

fn rank1(
    d: &CampaignDataset,
    params: &SearchParams,
) -> Result<(Option<ScoredConfiguration>, f64), SearchError> {
    let started = Instant::now();
    let ranked = search(d, params)?;
    Ok((ranked.into_iter().next(), started.elapsed().as_secs_f64()))
}

fn per_slice<F>(
    slices: &[CampaignDataset],
    spec: &ExperimentSpec,
    run: F,
) -> Result<ExperimentReport, StrategiesError>
where
    F: Fn(&CampaignDataset) -> Result<Vec<Cell>, StrategiesError> + Sync,
{
    spec.validate()?;
    let started = Instant::now();
    let series: Vec<SliceSeries> = slices
        .par_iter()
        .enumerate()
        .map(|(i, slice)| {
            Ok(SliceSeries {
                dataset_id: slice_id(i, slice),
                rows: slice.len(),
                cells: run(slice)?,
            })
        })
        .collect::<Result<_, StrategiesError>>()?;
    let aggregate = report::aggregate(&series);
    Ok(ExperimentReport {
        experiment: spec.experiment,
        spec: spec.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        slices: series,
        aggregate,
        runtime_seconds: Some(started.elapsed().as_secs_f64()),
    })
}

/// Experiment I: rank-1 search result per (slice, limit).
pub fn run_limit_sweep(
    slices: &[CampaignDataset],
    spec: &ExperimentSpec,
) -> Result<ExperimentReport, StrategiesError> {
    per_slice(slices, spec, |slice| {
        let mut cells = Vec::new();
        for &limit in &spec.limits {
            let (best, runtime) = rank1(slice, &spec.search_params(limit))?;
            cells.push(Cell::LimitSweep(LimitSweepCell {
                limit,
                best: best.as_ref().map(Selection::from),
                runtime_seconds: Some(runtime),
            }));
        }
        Ok(cells)
    })
}

/// Experiment II: for each required total `V` and round limit `s`, select
/// ceil(V / s) configurations sequentially (removing matched rows between
/// rounds) and compare their visit-weighted mean profitability with the
/// single rank-1 configuration at limit `V`.
pub fn run_small_campaigns(
    slices: &[CampaignDataset],
    spec: &ExperimentSpec,
) -> Result<ExperimentReport, StrategiesError> {
    per_slice(slices, spec, |slice| {
        let mut cells = Vec::new();
        for &required in &spec.limits {
            let (baseline, base_runtime) = rank1(slice, &spec.search_params(required))?;
            for &round_limit in &spec.slice_sizes {
                let rounds_requested = required.div_ceil(round_limit);
                let started = Instant::now();
                let rounds = search_sequential(
                    slice,
                    &spec.search_params(round_limit),
                    rounds_requested,
                )?;
                let runtime = started.elapsed().as_secs_f64() + base_runtime;

                let sequential_visits: usize =
                    rounds.iter().map(|r| r.selected.matched_rows).sum();
                // The weighted mean of a single round is its average
                // outright; the general formula divides a product by the
                // same count, which is not a bitwise identity in floats.
                let sequential_avg = match rounds.len() {
                    0 => None,
                    1 => Some(rounds[0].selected.avg_profitability),
                    _ => Some(
                        rounds
                            .iter()
                            .map(|r| {
                                r.selected.avg_profitability * r.selected.matched_rows as f64
                            })
                            .sum::<f64>()
                            / sequential_visits as f64,
                    ),
                };
                cells.push(Cell::SmallCampaigns(SmallCampaignsCell {
                    required_visits: required,
                    round_limit,
                    rounds_requested,
                    rounds_completed: rounds.len(),
                    early_stop: rounds.len() < rounds_requested,
                    sequential_avg,
                    sequential_visits,
                    baseline: baseline.as_ref().map(Selection::from),
                    runtime_seconds: Some(runtime),
                }));
            }
        }
        Ok(cells)
    })
}

/// Experiment III: search the first `f` of the slice's rows at a limit
/// scaled by `f`, then re-evaluate the winner over the whole slice and
/// compare with the full-data optimum at the unscaled limit.
pub fn run_prefix_extrapolation(
    slices: &[CampaignDataset],
    spec: &ExperimentSpec,
) -> Result<ExperimentReport, StrategiesError> {
    per_slice(slices, spec, |slice| {
        let mut cells = Vec::new();
        for &limit in &spec.limits {
            let (optimum, optimum_runtime) = rank1(slice, &spec.search_params(limit))?;
            for &fraction in &spec.prefix_fractions {
                let prefix_rows = ((fraction * slice.len() as f64).round() as usize)
                    .clamp(1.min(slice.len()), slice.len());
                let prefix_limit = ((fraction * limit as f64).round() as usize).max(1);
                let started = Instant::now();
                let prefix = slice.slice_rows(0..prefix_rows);
                let (prefix_best, _) = rank1(&prefix, &spec.search_params(prefix_limit))?;

                let mut reevaluated_avg = None;
                let mut reevaluated_rows = None;
                if let Some(best) = &prefix_best {
                    let rows = best.config.matching_rows(slice)?;
                    let (avg, count) = average_profitability(slice, &rows)?;
                    reevaluated_avg = Some(avg);
                    reevaluated_rows = Some(count);
                }
                let ratio = match (reevaluated_avg, &optimum) {
                    (Some(re), Some(opt)) if opt.avg_profitability > 0.0 => {
                        Some(re / opt.avg_profitability)
                    }
                    _ => None,
                };
                cells.push(Cell::PrefixExtrapolation(PrefixExtrapolationCell {
                    fraction,
                    limit,
                    prefix_rows,
                    prefix_limit,
                    prefix_best: prefix_best.as_ref().map(Selection::from),
                    reevaluated_avg,
                    reevaluated_rows,
                    full_optimum: optimum.as_ref().map(Selection::from),
                    ratio,
                    runtime_seconds: Some(
                        started.elapsed().as_secs_f64() + optimum_runtime,
                    ),
                }));
            }
        }
        Ok(cells)
    })
}

/// Experiment IV: keep the cheap (or profitable) half of the slice, split
/// at the median of the threshold variable with ties kept, and search the
/// kept half against the unfiltered baseline.
pub fn run_median_threshold(
    slices: &[CampaignDataset],
    spec: &ExperimentSpec,
) -> Result<ExperimentReport, StrategiesError> {
    per_slice(slices, spec, |slice| {
        let (threshold_value, kept) = match spec.threshold_kind {
            ThresholdKind::None => (None, slice.clone()),
            ThresholdKind::Cost => {
                let m = median(slice.costs());
                let mask: Vec<bool> = slice.costs().iter().map(|&c| c <= m).collect();
                (Some(m), slice.retain_rows(&mask))
            }
            ThresholdKind::Profitability => {
                let col = slice
                    .profitability()
                    .ok_or(ScoringError::MissingProfitability)?;
                let m = median(col.values());
                let mask: Vec<bool> = col.values().iter().map(|&v| v >= m).collect();
                (Some(m), slice.retain_rows(&mask))
            }
        };
        let mut cells = Vec::new();
        for &limit in &spec.limits {
            let (baseline, base_runtime) = rank1(slice, &spec.search_params(limit))?;
            let (thresholded, run_runtime) = rank1(&kept, &spec.search_params(limit))?;
            cells.push(Cell::MedianThreshold(MedianThresholdCell {
                limit,
                threshold_value,
                kept_rows: kept.len(),
                baseline: baseline.as_ref().map(Selection::from),
                thresholded: thresholded.as_ref().map(Selection::from),
                runtime_seconds: Some(base_runtime + run_runtime),
            }));
        }
        Ok(cells)
    })
}

/// Experiment V: strict search versus one that keeps (and scores)
/// below-limit configurations, per limit.
pub fn run_relaxed_limit(
    slices: &[CampaignDataset],
    spec: &ExperimentSpec,
) -> Result<ExperimentReport, StrategiesError> {
    per_slice(slices, spec, |slice| {
        let mut cells = Vec::new();
        for &limit in &spec.limits {
            let (strict, strict_runtime) = rank1(slice, &spec.search_params(limit))?;
            let relaxed_params = SearchParams {
                allow_below_limit: true,
                ..spec.search_params(limit)
            };
            let (relaxed, relaxed_runtime) = rank1(slice, &relaxed_params)?;
            let delta = match (&strict, &relaxed) {
                (Some(s), Some(r)) => Some(r.quality_score - s.quality_score),
                _ => None,
            };
            cells.push(Cell::RelaxedLimit(RelaxedLimitCell {
                limit,
                strict: strict.as_ref().map(Selection::from),
                relaxed: relaxed.as_ref().map(Selection::from),
                delta,
                runtime_seconds: Some(strict_runtime + relaxed_runtime),
            }));
        }
        Ok(cells)
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}
