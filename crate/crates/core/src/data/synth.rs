//! Synthetic impression-log generation with planted profitable segments.
//!
//! Rows draw their attribute codes uniformly per attribute; a row matching
//! a planted segment draws its conversion label at the segment's rate and
//! its cost from the segment's range, everything else uses the background
//! parameters. Generation is bit-reproducible for a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{CampaignDataset, Columns, DataError};
use crate::search::Configuration;

/// Campaign id carried by generated datasets.
pub const SYNTHETIC_CAMPAIGN: u64 = 1;

const CVR_CLAMP: f64 = 1e-6;

/// Uniform cost range; both ends strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRange {
    pub min: f64,
    pub max: f64,
}

impl CostRange {
    pub fn new(min: f64, max: f64) -> Result<Self, DataError> {
        if !(min.is_finite() && max.is_finite()) || min <= 0.0 || max < min {
            return Err(DataError::SyntheticSpec(format!(
                "cost range must satisfy 0 < min <= max, got [{min}, {max}]"
            )));
        }
        Ok(CostRange { min, max })
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..self.max)
        }
    }
}

/// A targeting rule with its own conversion rate and cost distribution.
#[derive(Debug, Clone)]
pub struct PlantedSegment {
    pub config: Configuration,
    pub conversion_rate: f64,
    pub cost: CostRange,
}

/// Everything needed to generate one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub n_attributes: usize,
    /// Number of distinct codes per attribute, `cardinalities[a] >= 1`.
    pub cardinalities: Vec<u64>,
    pub planted_segments: Vec<PlantedSegment>,
    pub background_rate: f64,
    pub background_cost: CostRange,
    /// Fill the cvr column with each row's true conversion rate (clamped
    /// into the open unit interval) so desk-scale pipelines can score
    /// profitability without a trained model.
    pub fill_true_cvr: bool,
    pub rng_seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), DataError> {
        if self.n_attributes == 0 {
            return Err(DataError::SyntheticSpec("n_attributes must be >= 1".into()));
        }
        if self.cardinalities.len() != self.n_attributes {
            return Err(DataError::SyntheticSpec(format!(
                "expected {} cardinalities, got {}",
                self.n_attributes,
                self.cardinalities.len()
            )));
        }
        if self.cardinalities.iter().any(|&c| c == 0) {
            return Err(DataError::SyntheticSpec(
                "every cardinality must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.background_rate) {
            return Err(DataError::SyntheticSpec(format!(
                "background rate must lie in [0, 1], got {}",
                self.background_rate
            )));
        }
        for (i, seg) in self.planted_segments.iter().enumerate() {
            if !(0.0..=1.0).contains(&seg.conversion_rate) {
                return Err(DataError::SyntheticSpec(format!(
                    "segment {i}: conversion rate must lie in [0, 1], got {}",
                    seg.conversion_rate
                )));
            }
            for (attr, value) in seg.config.pairs() {
                if attr >= self.n_attributes {
                    return Err(DataError::SyntheticSpec(format!(
                        "segment {i}: attribute {attr} out of range (have {})",
                        self.n_attributes
                    )));
                }
                if value >= self.cardinalities[attr] {
                    return Err(DataError::SyntheticSpec(format!(
                        "segment {i}: value {value} for attribute {attr} exceeds cardinality {}",
                        self.cardinalities[attr]
                    )));
                }
            }
        }
        // Two segments overlap when no shared attribute pins different
        // values: some row could then match both, making the planted
        // ground truth ambiguous.
        for i in 0..self.planted_segments.len() {
            for j in i + 1..self.planted_segments.len() {
                let a = &self.planted_segments[i].config;
                let b = &self.planted_segments[j].config;
                let disjoint = a
                    .pairs()
                    .any(|(attr, value)| b.value_for(attr).is_some_and(|v| v != value));
                if !disjoint {
                    return Err(DataError::SyntheticSpec(format!(
                        "segments {i} and {j} overlap: ambiguous ground truth"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generates a dataset per `spec`. Timestamps are consecutive integers
/// starting at 0 (only their order matters downstream).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<CampaignDataset, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let n = spec.n_rows;
    let mut cols = Columns {
        timestamps: Vec::with_capacity(n),
        campaigns: vec![SYNTHETIC_CAMPAIGN; n],
        conversions: Vec::with_capacity(n),
        clicks: Vec::with_capacity(n),
        costs: Vec::with_capacity(n),
        cpo: None,
        attributes: vec![Vec::with_capacity(n); spec.n_attributes],
        cvr: spec.fill_true_cvr.then(|| Vec::with_capacity(n)),
        profitability: None,
    };

    let mut row_attrs = vec![0u64; spec.n_attributes];
    for i in 0..n {
        for (a, v) in row_attrs.iter_mut().enumerate() {
            *v = rng.gen_range(0..spec.cardinalities[a]);
            cols.attributes[a].push(*v);
        }
        let segment = spec
            .planted_segments
            .iter()
            .find(|seg| seg.config.matches_values(&row_attrs));
        let (rate, cost_range) = match segment {
            Some(seg) => (seg.conversion_rate, seg.cost),
            None => (spec.background_rate, spec.background_cost),
        };
        let converted = rng.gen_bool(rate);
        let cost = cost_range.sample(&mut rng);

        cols.timestamps.push(i as u64);
        cols.conversions.push(converted);
        cols.clicks.push(converted);
        cols.costs.push(cost);
        if let Some(cvr) = cols.cvr.as_mut() {
            cvr.push(rate.clamp(CVR_CLAMP, 1.0 - CVR_CLAMP));
        }
    }

    CampaignDataset::from_columns(cols)
}

/// Parses planted segments from flat key-value text, e.g.:
///
/// ```text
/// segment.1.where = cat1=5, cat3=2
/// segment.1.rate = 0.9
/// segment.1.cost-min = 0.05
/// segment.1.cost-max = 0.15
/// ```
///
/// Attribute names are 1-based (`cat1` is attribute index 0); `#` starts
/// a comment. All four keys are required per segment.
pub fn parse_planted_segments(text: &str) -> Result<Vec<PlantedSegment>, DataError> {
    use std::collections::BTreeMap;

    #[derive(Default)]
    struct Partial {
        where_clause: Option<String>,
        rate: Option<f64>,
        cost_min: Option<f64>,
        cost_max: Option<f64>,
    }

    let bad = |line: usize, msg: String| DataError::SyntheticSpec(format!("line {line}: {msg}"));
    let mut partials: BTreeMap<u64, Partial> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(line_no, format!("expected `key = value`, got `{line}`")))?;
        let mut parts = key.trim().splitn(3, '.');
        let (Some("segment"), Some(index), Some(field)) =
            (parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(line_no, format!("unknown key `{}`", key.trim())));
        };
        let index: u64 = index
            .parse()
            .map_err(|_| bad(line_no, format!("bad segment index `{index}`")))?;
        let value = value.trim();
        let entry = partials.entry(index).or_default();
        match field {
            "where" => entry.where_clause = Some(value.to_string()),
            "rate" => {
                entry.rate = Some(value.parse().map_err(|_| {
                    bad(line_no, format!("bad rate `{value}`"))
                })?)
            }
            "cost-min" | "cost_min" => {
                entry.cost_min = Some(value.parse().map_err(|_| {
                    bad(line_no, format!("bad cost-min `{value}`"))
                })?)
            }
            "cost-max" | "cost_max" => {
                entry.cost_max = Some(value.parse().map_err(|_| {
                    bad(line_no, format!("bad cost-max `{value}`"))
                })?)
            }
            other => return Err(bad(line_no, format!("unknown field `{other}`"))),
        }
    }

    let mut segments = Vec::new();
    for (index, partial) in partials {
        let miss = |what: &str| {
            DataError::SyntheticSpec(format!("segment {index}: missing `{what}`"))
        };
        let where_clause = partial.where_clause.ok_or_else(|| miss("where"))?;
        let mut pairs = Vec::new();
        for term in where_clause.split(',') {
            let term = term.trim();
            let (name, value) = term.split_once('=').ok_or_else(|| {
                DataError::SyntheticSpec(format!(
                    "segment {index}: expected `catK=value`, got `{term}`"
                ))
            })?;
            let name = name.trim();
            let k: usize = name
                .strip_prefix("cat")
                .and_then(|s| s.parse().ok())
                .filter(|&k| k >= 1)
                .ok_or_else(|| {
                    DataError::SyntheticSpec(format!(
                        "segment {index}: bad attribute name `{name}`"
                    ))
                })?;
            let value: u64 = value.trim().parse().map_err(|_| {
                DataError::SyntheticSpec(format!(
                    "segment {index}: bad value `{}`",
                    value.trim()
                ))
            })?;
            pairs.push((k - 1, value));
        }
        let config = Configuration::new(pairs)
            .map_err(|e| DataError::SyntheticSpec(format!("segment {index}: {e}")))?;
        segments.push(PlantedSegment {
            config,
            conversion_rate: partial.rate.ok_or_else(|| miss("rate"))?,
            cost: CostRange::new(
                partial.cost_min.ok_or_else(|| miss("cost-min"))?,
                partial.cost_max.ok_or_else(|| miss("cost-max"))?,
            )?,
        });
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ingest::save_log;

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_rows: 1000,
            n_attributes: 3,
            cardinalities: vec![4, 5, 6],
            planted_segments: Vec::new(),
            background_rate: 0.0,
            background_cost: CostRange::new(0.5, 1.5).unwrap(),
            fill_true_cvr: false,
            rng_seed: 7,
        }
    }

    fn segment(pairs: &[(usize, u64)], rate: f64) -> PlantedSegment {
        PlantedSegment {
            config: Configuration::new(pairs.to_vec()).unwrap(),
            conversion_rate: rate,
            cost: CostRange::new(0.1, 0.2).unwrap(),
        }
    }

    #[test]
    fn zero_background_rate_means_no_conversions() {
        let d = generate_synthetic(&base_spec()).unwrap();
        assert_eq!(d.len(), 1000);
        assert!(d.conversions().iter().all(|&c| !c));
        // timestamps strictly increasing
        assert!(d.timestamps().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn degenerate_segment_rate_is_exact() {
        let mut spec = base_spec();
        spec.planted_segments = vec![segment(&[(0, 1)], 1.0)];
        let d = generate_synthetic(&spec).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.conversions()[i], d.attribute(0)[i] == 1);
        }
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let mut spec = base_spec();
        spec.n_rows = 10_000;
        spec.background_rate = 0.1;
        spec.rng_seed = 42;
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        save_log(&a, &mut buf_a).unwrap();
        save_log(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn planted_rate_is_hit_within_five_points() {
        let mut spec = base_spec();
        spec.n_rows = 20_000;
        spec.cardinalities = vec![4, 5, 6];
        spec.planted_segments = vec![segment(&[(0, 2)], 0.4)];
        spec.rng_seed = 11;
        let d = generate_synthetic(&spec).unwrap();
        let matching: Vec<usize> = (0..d.len()).filter(|&i| d.attribute(0)[i] == 2).collect();
        assert!(matching.len() >= 1000, "need >= 1000 matching rows");
        let hits = matching.iter().filter(|&&i| d.conversions()[i]).count();
        let rate = hits as f64 / matching.len() as f64;
        assert!((rate - 0.4).abs() < 0.05, "empirical rate {rate}");
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        let mut spec = base_spec();
        // shares no conflicting attribute: a row with attr0=1, attr1=2
        // would match both
        spec.planted_segments = vec![segment(&[(0, 1)], 0.5), segment(&[(1, 2)], 0.5)];
        let err = generate_synthetic(&spec).unwrap_err();
        assert!(matches!(err, DataError::SyntheticSpec(_)));

        // same attribute, different values: fine
        spec.planted_segments = vec![segment(&[(0, 1)], 0.5), segment(&[(0, 2)], 0.5)];
        assert!(generate_synthetic(&spec).is_ok());
    }

    #[test]
    fn out_of_range_segment_values_are_rejected() {
        let mut spec = base_spec();
        spec.planted_segments = vec![segment(&[(0, 99)], 0.5)];
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn planted_segment_file_parses() {
        let text = "\
# two disjoint niches
segment.1.where = cat1=5, cat3=2
segment.1.rate = 0.9
segment.1.cost-min = 0.05
segment.1.cost-max = 0.15

segment.2.where = cat1=4
segment.2.rate = 0.2
segment.2.cost-min = 0.5
segment.2.cost-max = 0.5
";
        let segments = parse_planted_segments(text).unwrap();
        assert_eq!(segments.len(), 2);
        assert_eq!(
            segments[0].config.pairs().collect::<Vec<_>>(),
            vec![(0, 5), (2, 2)]
        );
        assert_eq!(segments[0].conversion_rate, 0.9);
        assert_eq!(segments[1].cost, CostRange::new(0.5, 0.5).unwrap());

        assert!(parse_planted_segments("segment.1.rate = 0.5").is_err());
        assert!(parse_planted_segments("bogus = 1").is_err());
        assert!(parse_planted_segments("segment.1.where = cat0=1").is_err());
    }

    #[test]
    fn true_cvr_fill_matches_planted_rates() {
        let mut spec = base_spec();
        spec.fill_true_cvr = true;
        spec.background_rate = 0.25;
        spec.planted_segments = vec![segment(&[(0, 1)], 0.75)];
        let d = generate_synthetic(&spec).unwrap();
        let cvr = d.cvr().unwrap();
        for i in 0..d.len() {
            let expect = if d.attribute(0)[i] == 1 { 0.75 } else { 0.25 };
            assert_eq!(cvr[i], expect);
        }
    }
}
