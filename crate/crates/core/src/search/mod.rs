//! Exhaustive attribute-configuration search with anti-monotone pruning.
//!
//! A configuration is a conjunction of `(attribute, value)` constraints.
//! The search enumerates attribute subsets level by level (all size-k
//! subsets before any size-(k+1) subset), groups the dataset rows of each
//! subset by their projected value tuple in a single scan, and scores
//! every group by average profitability times `min(rows, limit)`.
//!
//! Pruning rests on anti-monotonicity: a configuration can never match
//! more rows than any of its sub-configurations. Once every occurring
//! value tuple of some subset has fallen below the limit, every superset
//! of that subset can only produce below-limit candidates, so its scan is
//! skipped outright. Because match counts come for free from the grouping
//! scan, this subset-level skip is where the time goes; it is exactly the
//! per-candidate sub-configuration rule applied batchwise, and the output
//! is identical to an unpruned search (`SearchParams::prune` switches the
//! optimization off for comparison). [`RejectedSet::prune_check`] exposes
//! the per-candidate rule for callers that track individual rejections.

mod output;
mod rejected;

pub use output::{ranked_rows, write_ranked_json, write_ranked_text, RankedRow};
pub use rejected::RejectedSet;

use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::time::Instant;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::CampaignDataset;
use crate::scoring::{quality_score, rank_order, QualityScoreParams, RankEntry};

/// Hard cap on attribute columns the search supports.
pub const MAX_ATTRIBUTES: usize = 16;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("dataset has no profitability column; attach one before searching")]
    MissingProfitability,
    #[error("limit must be >= 1")]
    InvalidLimit,
    #[error("search supports at most {MAX_ATTRIBUTES} attributes, dataset has {0}")]
    TooManyAttributes(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("attribute {attr} out of range for dataset with {n_attributes} attributes")]
    AttributeOutOfRange { attr: usize, n_attributes: usize },
}

/// A conjunction of `(attribute index, value)` constraints. Indices are
/// strictly increasing and aligned with `values`; never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Configuration {
    attribute_indices: Vec<usize>,
    values: Vec<u64>,
}

impl Configuration {
    /// Builds a configuration from `(attribute, value)` pairs, sorting
    /// them by attribute. Duplicate attributes and empty input are
    /// rejected.
    pub fn new(mut pairs: Vec<(usize, u64)>) -> Result<Self, SearchError> {
        if pairs.is_empty() {
            return Err(SearchError::InvalidConfiguration(
                "configuration must constrain at least one attribute".into(),
            ));
        }
        pairs.sort_by_key(|&(a, _)| a);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(SearchError::InvalidConfiguration(
                "duplicate attribute index".into(),
            ));
        }
        Ok(Configuration {
            attribute_indices: pairs.iter().map(|&(a, _)| a).collect(),
            values: pairs.iter().map(|&(_, v)| v).collect(),
        })
    }

    pub fn attribute_indices(&self) -> &[usize] {
        &self.attribute_indices
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.attribute_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.attribute_indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Value this configuration pins for `attr`, if any.
    pub fn value_for(&self, attr: usize) -> Option<u64> {
        self.attribute_indices
            .binary_search(&attr)
            .ok()
            .map(|i| self.values[i])
    }

    /// True when every `(attribute, value)` pair of `sub` also appears in
    /// `self`; a configuration contains itself.
    pub fn contains(&self, sub: &Configuration) -> bool {
        sub.pairs().all(|(a, v)| self.value_for(a) == Some(v))
    }

    /// True when the given full attribute-code row satisfies every
    /// constraint.
    pub fn matches_values(&self, row_attributes: &[u64]) -> bool {
        self.pairs().all(|(a, v)| row_attributes[a] == v)
    }

    /// Per-row match mask against a dataset.
    pub fn matched_mask(&self, d: &CampaignDataset) -> Result<Vec<bool>, SearchError> {
        for &a in &self.attribute_indices {
            if a >= d.n_attributes() {
                return Err(SearchError::AttributeOutOfRange {
                    attr: a,
                    n_attributes: d.n_attributes(),
                });
            }
        }
        let mut mask = vec![true; d.len()];
        for (a, v) in self.pairs() {
            for (m, &code) in mask.iter_mut().zip(d.attribute(a)) {
                *m &= code == v;
            }
        }
        Ok(mask)
    }

    /// Indices of the rows matching this configuration.
    pub fn matching_rows(&self, d: &CampaignDataset) -> Result<Vec<usize>, SearchError> {
        Ok(self
            .matched_mask(d)?
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect())
    }
}

/// One scored candidate configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredConfiguration {
    pub config: Configuration,
    pub matched_rows: usize,
    pub avg_profitability: f64,
    pub quality_score: f64,
    /// Wall time of the search (or sequential round) that produced this
    /// entry. Excluded from default serializations, which must be
    /// reproducible byte for byte.
    pub elapsed_seconds: f64,
}

impl ScoredConfiguration {
    fn rank_entry(&self) -> RankEntry<'_> {
        RankEntry {
            quality_score: self.quality_score,
            matched_rows: self.matched_rows,
            attribute_indices: self.config.attribute_indices(),
            values: self.config.values(),
        }
    }
}

/// Search controls.
#[derive(Debug, Clone, Copy)]
pub struct SearchParams {
    /// Required visits: candidates matching fewer rows are rejected
    /// (unless `allow_below_limit`) and cap the quality score.
    pub limit: usize,
    /// Keep and score below-limit candidates instead of rejecting them.
    pub allow_below_limit: bool,
    /// Largest attribute-subset size to enumerate; clamped to the
    /// dataset's attribute count.
    pub max_subset_size: usize,
    /// Disable to force the exhaustive scan (identical output, slower).
    pub prune: bool,
}

impl SearchParams {
    pub fn new(limit: usize) -> Self {
        SearchParams {
            limit,
            allow_below_limit: false,
            max_subset_size: usize::MAX,
            prune: true,
        }
    }
}

/// Number of non-empty attribute subsets of `n` attributes, computed as
/// the sum over k of n-choose-k (equal to 2^n - 1).
pub fn count_attribute_subsets(n: usize) -> u64 {
    assert!((1..=63).contains(&n), "n must lie in 1..=63");
    (1..=n).map(|k| binomial(n as u64, k as u64)).sum()
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial overflow")
}

/// All non-empty attribute subsets of size at most `max_size`, ordered by
/// size ascending, then lexicographically. Size-ascending order is what
/// the level-synchronous pruning relies on.
pub fn enumerate_subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    assert!(n >= 1 && (1..=n).contains(&max_size));
    let mut out = Vec::new();
    for size in 1..=max_size {
        out.extend((0..n).combinations(size));
    }
    out
}

/// Groups every dataset row by its value tuple projected onto `attrs`.
/// Each row lands in exactly one bucket.
pub fn unique_value_tuples(
    d: &CampaignDataset,
    attrs: &[usize],
) -> Result<HashMap<Vec<u64>, Vec<usize>>, SearchError> {
    for &a in attrs {
        if a >= d.n_attributes() {
            return Err(SearchError::AttributeOutOfRange {
                attr: a,
                n_attributes: d.n_attributes(),
            });
        }
    }
    let cols: Vec<&[u64]> = attrs.iter().map(|&a| d.attribute(a)).collect();
    let mut buckets: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for row in 0..d.len() {
        let tuple: Vec<u64> = cols.iter().map(|col| col[row]).collect();
        buckets.entry(tuple).or_default().push(row);
    }
    Ok(buckets)
}

/// Projected value tuple with a fixed-capacity backing array, so grouping
/// scans allocate nothing per row.
#[derive(Clone, Copy, Debug)]
struct TupleKey {
    len: u8,
    vals: [u64; MAX_ATTRIBUTES],
}

impl TupleKey {
    #[inline]
    fn from_row(cols: &[&[u64]], row: usize) -> Self {
        let mut vals = [0u64; MAX_ATTRIBUTES];
        for (slot, col) in vals.iter_mut().zip(cols) {
            *slot = col[row];
        }
        TupleKey {
            len: cols.len() as u8,
            vals,
        }
    }

    fn as_slice(&self) -> &[u64] {
        &self.vals[..self.len as usize]
    }
}

impl PartialEq for TupleKey {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.as_slice() == other.as_slice()
    }
}

impl Eq for TupleKey {}

impl Hash for TupleKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for v in self.as_slice() {
            state.write_u64(*v);
        }
    }
}

#[derive(Clone, Copy, Default)]
struct GroupAcc {
    count: u32,
    profitability_sum: f64,
}

enum ScanOutcome {
    /// Some child subset already had every occurring tuple rejected.
    Skipped,
    Scanned {
        kept: Vec<(TupleKey, GroupAcc)>,
        all_rejected: bool,
    },
}

/// Evaluates every non-pruned `(attribute subset, value tuple)` pair and
/// returns the qualifying candidates ranked by quality score (with the
/// scoring module's total tie order). With `allow_below_limit`, below-limit
/// candidates are scored and retained instead of rejected, and pruning is
/// inert. The result is identical to an exhaustive unpruned search; an
/// empty result (nothing reaches the limit) is a valid outcome, not an
/// error.
pub fn search(
    d: &CampaignDataset,
    params: &SearchParams,
) -> Result<Vec<ScoredConfiguration>, SearchError> {
    let started = Instant::now();
    if params.limit == 0 {
        return Err(SearchError::InvalidLimit);
    }
    if d.n_attributes() > MAX_ATTRIBUTES {
        return Err(SearchError::TooManyAttributes(d.n_attributes()));
    }
    let profitability = d
        .profitability()
        .ok_or(SearchError::MissingProfitability)?;
    let prof_values = profitability.values();
    let score_params =
        QualityScoreParams::new(params.limit).map_err(|_| SearchError::InvalidLimit)?;

    let n_attr = d.n_attributes();
    let max_size = params.max_subset_size.clamp(1, n_attr);
    let prune = params.prune && !params.allow_below_limit;

    let mut results: Vec<ScoredConfiguration> = Vec::new();
    let mut all_rejected_subsets: HashSet<Vec<usize>> = HashSet::new();

    for size in 1..=max_size {
        let subsets: Vec<Vec<usize>> = (0..n_attr).combinations(size).collect();
        let outcomes: Vec<ScanOutcome> = subsets
            .par_iter()
            .map(|attrs| {
                if prune && has_rejected_child(attrs, &all_rejected_subsets) {
                    return ScanOutcome::Skipped;
                }
                scan_subset(d, prof_values, attrs, params)
            })
            .collect();

        // Level barrier: merge in enumeration order so rejection state and
        // result contents never depend on worker scheduling.
        for (attrs, outcome) in subsets.into_iter().zip(outcomes) {
            match outcome {
                ScanOutcome::Skipped => {
                    all_rejected_subsets.insert(attrs);
                }
                ScanOutcome::Scanned { kept, all_rejected } => {
                    for (key, acc) in &kept {
                        let avg = acc.profitability_sum / acc.count as f64;
                        results.push(ScoredConfiguration {
                            config: Configuration {
                                attribute_indices: attrs.clone(),
                                values: key.as_slice().to_vec(),
                            },
                            matched_rows: acc.count as usize,
                            avg_profitability: avg,
                            quality_score: quality_score(
                                avg,
                                acc.count as usize,
                                &score_params,
                            ),
                            elapsed_seconds: 0.0,
                        });
                    }
                    if prune && all_rejected {
                        all_rejected_subsets.insert(attrs);
                    }
                }
            }
        }
    }

    results.sort_by(|a, b| rank_order(&a.rank_entry(), &b.rank_entry()));
    let elapsed = started.elapsed().as_secs_f64();
    for r in &mut results {
        r.elapsed_seconds = elapsed;
    }
    Ok(results)
}

fn has_rejected_child(attrs: &[usize], all_rejected: &HashSet<Vec<usize>>) -> bool {
    if attrs.len() < 2 || all_rejected.is_empty() {
        return false;
    }
    let mut child = Vec::with_capacity(attrs.len() - 1);
    for drop in 0..attrs.len() {
        child.clear();
        child.extend(attrs.iter().enumerate().filter_map(|(i, &a)| (i != drop).then_some(a)));
        if all_rejected.contains(&child) {
            return true;
        }
    }
    false
}

fn scan_subset(
    d: &CampaignDataset,
    prof_values: &[f64],
    attrs: &[usize],
    params: &SearchParams,
) -> ScanOutcome {
    let cols: Vec<&[u64]> = attrs.iter().map(|&a| d.attribute(a)).collect();
    let mut groups: HashMap<TupleKey, GroupAcc> = HashMap::new();
    for row in 0..d.len() {
        let acc = groups.entry(TupleKey::from_row(&cols, row)).or_default();
        acc.count += 1;
        acc.profitability_sum += prof_values[row];
    }

    let mut kept = Vec::new();
    if params.allow_below_limit {
        kept.extend(groups);
        return ScanOutcome::Scanned {
            kept,
            all_rejected: false,
        };
    }
    for (key, acc) in groups {
        if acc.count as usize >= params.limit {
            kept.push((key, acc));
        }
    }
    let all_rejected = kept.is_empty();
    ScanOutcome::Scanned { kept, all_rejected }
}

/// One round of [`search_sequential`].
#[derive(Debug, Clone, Serialize)]
pub struct SequentialRound {
    pub selected: ScoredConfiguration,
    /// Rows left in the working dataset after removing the selection.
    pub remaining_rows: usize,
}

/// Repeatedly searches, takes the rank-1 configuration, removes its
/// matching rows from the working dataset, and continues — up to
/// `n_rounds` times. Stops early (truncated result, not an error) as soon
/// as a round yields no qualifying configuration.
pub fn search_sequential(
    d: &CampaignDataset,
    params: &SearchParams,
    n_rounds: usize,
) -> Result<Vec<SequentialRound>, SearchError> {
    if n_rounds == 0 {
        return Err(SearchError::InvalidLimit);
    }
    let mut working = d.clone();
    let mut rounds = Vec::new();
    for _ in 0..n_rounds {
        let ranked = search(&working, params)?;
        let Some(best) = ranked.into_iter().next() else {
            break;
        };
        let matched = best.config.matched_mask(&working)?;
        let keep: Vec<bool> = matched.iter().map(|&m| !m).collect();
        working = working.retain_rows(&keep);
        rounds.push(SequentialRound {
            selected: best,
            remaining_rows: working.len(),
        });
    }
    Ok(rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ImpressionRecord;
    use crate::scoring::attach_profitability;

    pub(crate) fn dataset(rows: &[(&[u64], f64)]) -> CampaignDataset {
        // (attributes, cost); cvr fixed at 0.5 so profitability = 0.5/cost
        let n_attr = rows[0].0.len();
        let recs: Vec<ImpressionRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(attrs, cost))| ImpressionRecord {
                timestamp: i as u64,
                campaign: 1,
                conversion: false,
                click: false,
                cost,
                cpo: None,
                attributes: attrs.to_vec(),
                cvr: Some(0.5),
                profitability: None,
            })
            .collect();
        let mut d = CampaignDataset::from_records(recs, n_attr).unwrap();
        attach_profitability(&mut d).unwrap();
        d
    }

    #[test]
    fn count_matches_the_closed_form() {
        assert_eq!(count_attribute_subsets(1), 1);
        assert_eq!(count_attribute_subsets(3), 7);
        assert_eq!(count_attribute_subsets(9), 511);
        for n in 1..=16 {
            assert_eq!(count_attribute_subsets(n), (1u64 << n) - 1);
        }
    }

    #[test]
    fn enumerate_subsets_is_size_then_lex_ordered() {
        assert_eq!(
            enumerate_subsets(2, 2),
            vec![vec![0], vec![1], vec![0, 1]]
        );
        assert_eq!(enumerate_subsets(3, 1), vec![vec![0], vec![1], vec![2]]);
        let all = enumerate_subsets(9, 9);
        assert_eq!(all.len() as u64, count_attribute_subsets(9));
        for w in all.windows(2) {
            assert!(w[0].len() < w[1].len() || (w[0].len() == w[1].len() && w[0] < w[1]));
        }
    }

    #[test]
    fn unique_value_tuples_buckets_by_projection() {
        let d = dataset(&[
            (&[85, 58], 1.0),
            (&[7714, 424], 1.0),
            (&[596, 3458], 1.0),
            (&[85, 58], 1.0),
        ]);
        let buckets = unique_value_tuples(&d, &[0, 1]).unwrap();
        assert_eq!(buckets.len(), 3);
        assert_eq!(buckets[&vec![85, 58]], vec![0, 3]);
        let total: usize = buckets.values().map(Vec::len).sum();
        assert_eq!(total, d.len());
    }

    #[test]
    fn unique_value_tuples_degenerate_cases() {
        let single = dataset(&[(&[5], 1.0)]);
        let buckets = unique_value_tuples(&single, &[0]).unwrap();
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[&vec![5]], vec![0]);

        let same = dataset(&[(&[5, 6], 1.0), (&[5, 6], 1.0), (&[5, 6], 1.0)]);
        let buckets = unique_value_tuples(&same, &[0, 1]).unwrap();
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[&vec![5, 6]].len(), 3);
    }

    #[test]
    fn configuration_rejects_duplicates_and_empty() {
        assert!(Configuration::new(vec![]).is_err());
        assert!(Configuration::new(vec![(1, 5), (1, 6)]).is_err());
        let c = Configuration::new(vec![(4, 9), (1, 5)]).unwrap();
        assert_eq!(c.attribute_indices(), &[1, 4]);
        assert_eq!(c.values(), &[5, 9]);
    }

    #[test]
    fn constant_attributes_yield_every_subset_once() {
        let rows: Vec<(&[u64], f64)> = (0..10).map(|_| (&[3u64, 7, 9][..], 1.0)).collect();
        let d = dataset(&rows);
        let ranked = search(&d, &SearchParams::new(5)).unwrap();
        assert_eq!(ranked.len() as u64, count_attribute_subsets(3));
        for r in &ranked {
            assert_eq!(r.matched_rows, 10);
            assert_eq!(r.avg_profitability, 0.5);
            assert_eq!(r.quality_score, 0.5 * 5.0);
        }
    }

    #[test]
    fn limit_above_rows_yields_empty_ranking() {
        let d = dataset(&[(&[1], 1.0), (&[2], 1.0)]);
        let ranked = search(&d, &SearchParams::new(100)).unwrap();
        assert!(ranked.is_empty());
    }

    #[test]
    fn relaxed_mode_is_a_superset_with_dominating_top_score() {
        let d = dataset(&[
            (&[1, 1], 0.1),
            (&[1, 1], 0.1),
            (&[1, 2], 1.0),
            (&[2, 2], 1.0),
            (&[2, 2], 1.0),
        ]);
        let strict = search(&d, &SearchParams::new(3)).unwrap();
        let relaxed = search(
            &d,
            &SearchParams {
                allow_below_limit: true,
                ..SearchParams::new(3)
            },
        )
        .unwrap();
        assert!(relaxed.len() >= strict.len());
        for s in &strict {
            assert!(relaxed
                .iter()
                .any(|r| r.config == s.config && r.quality_score == s.quality_score));
        }
        if let (Some(r), Some(s)) = (relaxed.first(), strict.first()) {
            assert!(r.quality_score >= s.quality_score);
        }
    }

    #[test]
    fn sequential_removal_recovers_disjoint_niches() {
        // two disjoint niches on attribute 0, plus filler
        let mut rows: Vec<(Vec<u64>, f64)> = Vec::new();
        for _ in 0..30 {
            rows.push((vec![1, 0], 0.05)); // high profitability niche
        }
        for _ in 0..30 {
            rows.push((vec![2, 0], 0.1)); // second niche
        }
        for i in 0..40 {
            rows.push((vec![3 + i % 5, 1], 10.0)); // cheap filler
        }
        let borrowed: Vec<(&[u64], f64)> =
            rows.iter().map(|(a, c)| (a.as_slice(), *c)).collect();
        let d = dataset(&borrowed);
        let params = SearchParams::new(20);
        let rounds = search_sequential(&d, &params, 2).unwrap();
        assert_eq!(rounds.len(), 2);
        assert_eq!(rounds[0].selected.config.value_for(0), Some(1));
        assert_eq!(rounds[1].selected.config.value_for(0), Some(2));
        assert!(rounds[0].selected.avg_profitability > rounds[1].selected.avg_profitability);
        assert_eq!(rounds[0].remaining_rows, 70);
        assert_eq!(rounds[1].remaining_rows, 40);
    }

    #[test]
    fn sequential_with_one_round_equals_search_rank1() {
        let d = dataset(&[
            (&[1, 5], 0.1),
            (&[1, 5], 0.2),
            (&[2, 5], 1.0),
            (&[2, 6], 2.0),
        ]);
        let params = SearchParams::new(2);
        let rounds = search_sequential(&d, &params, 1).unwrap();
        let ranked = search(&d, &params).unwrap();
        assert_eq!(rounds.len(), 1);
        assert_eq!(rounds[0].selected.config, ranked[0].config);
        assert_eq!(
            rounds[0].selected.quality_score.to_bits(),
            ranked[0].quality_score.to_bits()
        );
    }

    #[test]
    fn missing_profitability_is_an_error() {
        let recs = vec![ImpressionRecord {
            timestamp: 0,
            campaign: 1,
            conversion: false,
            click: false,
            cost: 1.0,
            cpo: None,
            attributes: vec![0],
            cvr: None,
            profitability: None,
        }];
        let d = CampaignDataset::from_records(recs, 1).unwrap();
        assert!(matches!(
            search(&d, &SearchParams::new(1)),
            Err(SearchError::MissingProfitability)
        ));
    }
}
