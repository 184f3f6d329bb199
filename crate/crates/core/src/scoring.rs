//! Per-impression profitability and the configuration quality score.
//!
//! Profitability of an impression is its predicted conversion probability
//! divided by its price; rows with non-positive price carry no
//! profitability and are *excluded*. Excluded rows still count as visits:
//! they contribute 0 to profitability sums but are included in row counts
//! (a malformed price still consumes an impression slot).
//!
//! A configuration's quality score is its matching rows' average
//! profitability multiplied by `min(matched_rows, required_visits)`, which
//! stops the ranking from drifting toward configurations with far more
//! visits than the advertiser asked for.

use std::cmp::Ordering;

use thiserror::Error;

use crate::data::CampaignDataset;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("dataset has no cvr column; run prediction first")]
    MissingCvr,
    #[error("dataset has no profitability column; attach one first")]
    MissingProfitability,
    #[error("required_visits must be >= 1")]
    InvalidThreshold,
}

/// Per-row profitability values aligned with a dataset, plus the set of
/// rows excluded for non-positive cost. Excluded rows hold value 0.0.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitabilityColumn {
    values: Vec<f64>,
    excluded: Vec<bool>,
    n_excluded: usize,
}

impl ProfitabilityColumn {
    pub(crate) fn from_parts(values: Vec<f64>, excluded: Vec<bool>) -> Self {
        debug_assert_eq!(values.len(), excluded.len());
        debug_assert!(values
            .iter()
            .zip(&excluded)
            .all(|(v, &e)| if e { *v == 0.0 } else { v.is_finite() && *v >= 0.0 }));
        let n_excluded = excluded.iter().filter(|&&e| e).count();
        ProfitabilityColumn {
            values,
            excluded,
            n_excluded,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row values; excluded rows read as 0.0.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_excluded(&self, row: usize) -> bool {
        self.excluded[row]
    }

    /// Profitability of `row`, or `None` if the row is excluded.
    pub fn get(&self, row: usize) -> Option<f64> {
        (!self.excluded[row]).then(|| self.values[row])
    }

    pub fn n_excluded(&self) -> usize {
        self.n_excluded
    }

    pub fn excluded_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.excluded
            .iter()
            .enumerate()
            .filter_map(|(i, &e)| e.then_some(i))
    }

    pub(crate) fn gather(&self, idx: &[u32]) -> Self {
        Self::from_parts(
            idx.iter().map(|&i| self.values[i as usize]).collect(),
            idx.iter().map(|&i| self.excluded[i as usize]).collect(),
        )
    }
}

/// The advertiser's required visit count, capping the quality score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityScoreParams {
    required_visits: usize,
}

impl QualityScoreParams {
    pub fn new(required_visits: usize) -> Result<Self, ScoringError> {
        if required_visits == 0 {
            return Err(ScoringError::InvalidThreshold);
        }
        Ok(QualityScoreParams { required_visits })
    }

    pub fn required_visits(&self) -> usize {
        self.required_visits
    }
}

/// Profitability of one impression: conversion probability over price.
///
/// Returns `None` for non-positive prices: the row joins the excluded set
/// instead of producing an infinite or negative value.
pub fn impression_profitability(cvr: f64, price: f64) -> Option<f64> {
    (price > 0.0).then(|| cvr / price)
}

/// Quality score of a configuration with the given average profitability
/// and matched row count.
pub fn quality_score(
    avg_profitability: f64,
    matched_rows: usize,
    params: &QualityScoreParams,
) -> f64 {
    avg_profitability * matched_rows.min(params.required_visits) as f64
}

/// Mean profitability over the given rows, and the subset size.
///
/// Excluded rows count toward the size but add 0 to the sum, so the mean
/// divides by the full subset size. An empty subset yields `(0.0, 0)`.
pub fn average_profitability(
    d: &CampaignDataset,
    rows: &[usize],
) -> Result<(f64, usize), ScoringError> {
    let col = d.profitability().ok_or(ScoringError::MissingProfitability)?;
    if rows.is_empty() {
        return Ok((0.0, 0));
    }
    let sum: f64 = rows.iter().map(|&i| col.values()[i]).sum();
    Ok((sum / rows.len() as f64, rows.len()))
}

/// Computes the profitability column from the dataset's cvr and cost
/// columns and attaches it. Rows with non-positive cost become excluded.
pub fn attach_profitability(d: &mut CampaignDataset) -> Result<(), ScoringError> {
    let cvr = d.cvr().ok_or(ScoringError::MissingCvr)?;
    let mut values = Vec::with_capacity(d.len());
    let mut excluded = Vec::with_capacity(d.len());
    for (p, &cost) in cvr.iter().zip(d.costs()) {
        match impression_profitability(*p, cost) {
            Some(v) => {
                values.push(v);
                excluded.push(false);
            }
            None => {
                values.push(0.0);
                excluded.push(true);
            }
        }
    }
    let col = ProfitabilityColumn::from_parts(values, excluded);
    d.set_profitability(col);
    Ok(())
}

/// One candidate's ranking key: quality score first, then the tie-break.
#[derive(Debug, Clone, Copy)]
pub struct RankEntry<'a> {
    pub quality_score: f64,
    pub matched_rows: usize,
    pub attribute_indices: &'a [usize],
    pub values: &'a [u64],
}

/// Total order on ranked candidates: higher quality score first, ties
/// broken by higher matched rows, then lexicographically smaller attribute
/// index set, then lexicographically smaller value tuple. Distinct
/// configurations never compare equal, so rankings are deterministic.
pub fn rank_order(a: &RankEntry<'_>, b: &RankEntry<'_>) -> Ordering {
    b.quality_score
        .total_cmp(&a.quality_score)
        .then_with(|| b.matched_rows.cmp(&a.matched_rows))
        .then_with(|| a.attribute_indices.cmp(b.attribute_indices))
        .then_with(|| a.values.cmp(b.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ImpressionRecord;

    #[test]
    fn impression_profitability_divides_cvr_by_price() {
        assert_eq!(impression_profitability(0.5, 0.25), Some(2.0));
        assert_eq!(impression_profitability(0.001, 10.0), Some(0.0001));
    }

    #[test]
    fn zero_price_is_excluded_not_infinite() {
        assert_eq!(impression_profitability(0.5, 0.0), None);
        assert_eq!(impression_profitability(0.5, -1.0), None);
    }

    #[test]
    fn quality_score_caps_at_required_visits() {
        let t = QualityScoreParams::new(1000).unwrap();
        assert_eq!(quality_score(2.0, 500, &t), 1000.0);
        assert_eq!(quality_score(2.0, 5000, &t), 2000.0);
        assert_eq!(quality_score(0.0, 5000, &t), 0.0);
    }

    #[test]
    fn quality_score_is_monotone_in_rows_and_linear_in_avg() {
        let t = QualityScoreParams::new(100).unwrap();
        let mut last = f64::NEG_INFINITY;
        for rows in 0..300 {
            let s = quality_score(1.5, rows, &t);
            assert!(s >= last);
            last = s;
            if rows >= 100 {
                assert_eq!(s, 1.5 * 100.0);
            }
            assert_eq!(quality_score(3.0, rows, &t), 2.0 * s);
        }
    }

    fn scored_dataset(rows: &[(f64, Option<f64>)]) -> CampaignDataset {
        // (cost, profitability); cvr fixed so the column is well formed
        let recs: Vec<ImpressionRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(cost, prof))| ImpressionRecord {
                timestamp: i as u64,
                campaign: 1,
                conversion: false,
                click: false,
                cost,
                cpo: None,
                attributes: vec![0],
                cvr: Some(0.5),
                profitability: prof,
            })
            .collect();
        CampaignDataset::from_records(recs, 1).unwrap()
    }

    #[test]
    fn average_profitability_over_plain_rows() {
        let d = scored_dataset(&[(1.0, Some(1.0)), (1.0, Some(3.0))]);
        assert_eq!(average_profitability(&d, &[0, 1]).unwrap(), (2.0, 2));
    }

    #[test]
    fn average_profitability_of_empty_subset_is_zero() {
        let d = scored_dataset(&[(1.0, Some(1.0))]);
        assert_eq!(average_profitability(&d, &[]).unwrap(), (0.0, 0));
    }

    #[test]
    fn excluded_rows_count_as_visits_but_add_nothing() {
        let d = scored_dataset(&[(1.0, Some(1.0)), (0.0, None), (1.0, Some(2.0))]);
        assert_eq!(average_profitability(&d, &[0, 1, 2]).unwrap(), (1.0, 3));
        // oracle that drops excluded rows entirely, for comparison
        let col = d.profitability().unwrap();
        let kept: Vec<f64> = [0usize, 1, 2]
            .iter()
            .filter_map(|&i| col.get(i))
            .collect();
        let dropped_avg = kept.iter().sum::<f64>() / kept.len() as f64;
        assert_eq!(dropped_avg, 1.5);
        assert_ne!(dropped_avg, 1.0);
    }

    #[test]
    fn attach_profitability_marks_non_positive_costs() {
        let mut d = scored_dataset(&[(0.25, None), (0.0, None)]);
        attach_profitability(&mut d).unwrap();
        let col = d.profitability().unwrap();
        assert_eq!(col.get(0), Some(2.0));
        assert_eq!(col.get(1), None);
        assert_eq!(col.values()[1], 0.0);
        assert_eq!(col.n_excluded(), 1);
        assert_eq!(col.excluded_rows().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn rank_order_breaks_ties_deterministically() {
        let a = RankEntry {
            quality_score: 10.0,
            matched_rows: 5,
            attribute_indices: &[0, 2],
            values: &[7, 9],
        };
        let higher_rows = RankEntry {
            matched_rows: 6,
            ..a
        };
        let smaller_attrs = RankEntry {
            attribute_indices: &[0, 1],
            ..a
        };
        let smaller_vals = RankEntry {
            values: &[7, 8],
            ..a
        };
        assert_eq!(rank_order(&higher_rows, &a), Ordering::Less);
        assert_eq!(rank_order(&smaller_attrs, &a), Ordering::Less);
        assert_eq!(rank_order(&smaller_vals, &a), Ordering::Less);
        let better = RankEntry {
            quality_score: 11.0,
            ..a
        };
        assert_eq!(rank_order(&better, &a), Ordering::Less);
    }

    #[test]
    fn scaling_prices_scales_profitability_inversely() {
        for c in [0.5, 2.0, 10.0] {
            let base = impression_profitability(0.3, 0.6).unwrap();
            let scaled = impression_profitability(0.3, 0.6 * c).unwrap();
            assert!((scaled - base / c).abs() < 1e-15);
        }
    }
}
