use std::collections::HashMap;

use thiserror::Error;

use crate::scoring::ProfitabilityColumn;

/// Sentinel campaign id for datasets that mix rows from several campaigns
/// (the raw log before slicing). Slices always carry a real id.
pub const MIXED_CAMPAIGNS: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("input has no data rows")]
    EmptyInput,
    #[error("{failed} of {total} rows failed to parse (limit is 1%); first: {first}")]
    TooManyBadRows {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("column `{0}` is only partially filled")]
    PartialColumn(&'static str),
    #[error("record {index}: expected {expected} attributes, got {got}")]
    RecordShape {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("synthetic spec: {0}")]
    SyntheticSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One displayed advert. Row view over [`CampaignDataset`]; also the unit
/// accepted by [`CampaignDataset::from_records`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImpressionRecord {
    /// Seconds from the log's epoch 0.
    pub timestamp: u64,
    /// Opaque campaign identifier.
    pub campaign: u64,
    /// Binary conversion label.
    pub conversion: bool,
    /// Whether the impression was clicked.
    pub click: bool,
    /// Transformed price paid for the impression.
    pub cost: f64,
    /// Cost-per-order, when the log carries it. Parsed but unused.
    pub cpo: Option<f64>,
    /// Opaque categorical attribute codes, one per attribute column.
    pub attributes: Vec<u64>,
    /// Predicted conversion probability, once filled.
    pub cvr: Option<f64>,
    /// Per-impression profitability, once filled. Absent on rows excluded
    /// for non-positive cost.
    pub profitability: Option<f64>,
}

/// Immutable-after-construction columnar collection of impressions for one
/// campaign (or the mixed-campaign raw log), sorted by timestamp.
///
/// Columns are stored attribute-major so the configuration search can
/// project attribute subsets without touching unrelated fields. The struct
/// is safe to share read-only across any number of workers.
#[derive(Debug, Clone)]
pub struct CampaignDataset {
    campaign_id: u64,
    n_attributes: usize,
    timestamps: Vec<u64>,
    campaigns: Vec<u64>,
    conversions: Vec<bool>,
    clicks: Vec<bool>,
    costs: Vec<f64>,
    /// Per-row cost-per-order; NaN marks an absent cell.
    cpo: Option<Vec<f64>>,
    /// `attributes[a][row]` is the code of attribute `a` on `row`.
    attributes: Vec<Vec<u64>>,
    cvr: Option<Vec<f64>>,
    profitability: Option<ProfitabilityColumn>,
}

pub(crate) struct Columns {
    pub timestamps: Vec<u64>,
    pub campaigns: Vec<u64>,
    pub conversions: Vec<bool>,
    pub clicks: Vec<bool>,
    pub costs: Vec<f64>,
    pub cpo: Option<Vec<f64>>,
    pub attributes: Vec<Vec<u64>>,
    pub cvr: Option<Vec<f64>>,
    pub profitability: Option<ProfitabilityColumn>,
}

impl CampaignDataset {
    /// Builds a dataset from row records, sorting them by timestamp
    /// (stable, so file order is preserved among equal timestamps).
    ///
    /// The cvr column is materialized only when every record carries one;
    /// the profitability column when every positive-cost record carries
    /// one. A column filled on some rows but not others is rejected.
    pub fn from_records(
        records: Vec<ImpressionRecord>,
        n_attributes: usize,
    ) -> Result<Self, DataError> {
        if n_attributes == 0 {
            return Err(DataError::Argument("n_attributes must be >= 1".into()));
        }
        let n = records.len();
        let mut timestamps = Vec::with_capacity(n);
        let mut campaigns = Vec::with_capacity(n);
        let mut conversions = Vec::with_capacity(n);
        let mut clicks = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);
        let mut cpo_vals = Vec::with_capacity(n);
        let mut any_cpo = false;
        let mut attributes: Vec<Vec<u64>> = (0..n_attributes)
            .map(|_| Vec::with_capacity(n))
            .collect();
        let mut cvr_vals = Vec::with_capacity(n);
        let mut n_cvr = 0usize;
        let mut prof_vals = Vec::with_capacity(n);
        let mut prof_excluded = Vec::with_capacity(n);
        let mut n_prof = 0usize;

        for (index, rec) in records.into_iter().enumerate() {
            if rec.attributes.len() != n_attributes {
                return Err(DataError::RecordShape {
                    index,
                    expected: n_attributes,
                    got: rec.attributes.len(),
                });
            }
            if !rec.cost.is_finite() || rec.cost < 0.0 {
                return Err(DataError::InvalidValue(format!(
                    "record {index}: cost must be finite and >= 0, got {}",
                    rec.cost
                )));
            }
            if let Some(p) = rec.cvr {
                if !(p > 0.0 && p < 1.0) {
                    return Err(DataError::InvalidValue(format!(
                        "record {index}: cvr must lie in (0, 1), got {p}"
                    )));
                }
                n_cvr += 1;
            }
            if let Some(v) = rec.profitability {
                if !v.is_finite() || v < 0.0 {
                    return Err(DataError::InvalidValue(format!(
                        "record {index}: profitability must be finite and >= 0, got {v}"
                    )));
                }
                n_prof += 1;
            }
            timestamps.push(rec.timestamp);
            campaigns.push(rec.campaign);
            conversions.push(rec.conversion);
            clicks.push(rec.click);
            costs.push(rec.cost);
            any_cpo |= rec.cpo.is_some();
            cpo_vals.push(rec.cpo.unwrap_or(f64::NAN));
            for (a, col) in attributes.iter_mut().enumerate() {
                col.push(rec.attributes[a]);
            }
            cvr_vals.push(rec.cvr.unwrap_or(f64::NAN));
            prof_vals.push(rec.profitability.unwrap_or(0.0));
            prof_excluded.push(rec.profitability.is_none());
        }

        let cvr = match n_cvr {
            0 => None,
            k if k == n => Some(cvr_vals),
            _ => return Err(DataError::PartialColumn("cvr")),
        };
        let profitability = if n_prof == 0 {
            None
        } else {
            // Rows without a value must be the excluded (non-positive cost)
            // ones; anything else means the column was half-written.
            for (i, excl) in prof_excluded.iter().enumerate() {
                if *excl && costs[i] > 0.0 {
                    return Err(DataError::PartialColumn("profitability"));
                }
            }
            Some(ProfitabilityColumn::from_parts(prof_vals, prof_excluded))
        };

        Self::from_columns(Columns {
            timestamps,
            campaigns,
            conversions,
            clicks,
            costs,
            cpo: any_cpo.then_some(cpo_vals),
            attributes,
            cvr,
            profitability,
        })
    }

    /// Assembles a dataset directly from columns, sorting by timestamp.
    pub(crate) fn from_columns(mut cols: Columns) -> Result<Self, DataError> {
        let n = cols.timestamps.len();
        let n_attributes = cols.attributes.len();
        if !cols.timestamps.is_sorted() {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by_key(|&i| cols.timestamps[i as usize]);
            cols = gather_columns(&cols, &order);
        }
        let campaign_id = uniform_campaign(&cols.campaigns);
        Ok(CampaignDataset {
            campaign_id,
            n_attributes,
            timestamps: cols.timestamps,
            campaigns: cols.campaigns,
            conversions: cols.conversions,
            clicks: cols.clicks,
            costs: cols.costs,
            cpo: cols.cpo,
            attributes: cols.attributes,
            cvr: cols.cvr,
            profitability: cols.profitability,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Number of categorical attribute columns (9 for the production schema).
    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    /// Campaign id shared by every row, or [`MIXED_CAMPAIGNS`].
    pub fn campaign_id(&self) -> u64 {
        self.campaign_id
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn campaigns(&self) -> &[u64] {
        &self.campaigns
    }

    pub fn conversions(&self) -> &[bool] {
        &self.conversions
    }

    pub fn clicks(&self) -> &[bool] {
        &self.clicks
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Column of attribute `a`, one code per row.
    pub fn attribute(&self, a: usize) -> &[u64] {
        &self.attributes[a]
    }

    pub fn cvr(&self) -> Option<&[f64]> {
        self.cvr.as_deref()
    }

    pub fn profitability(&self) -> Option<&ProfitabilityColumn> {
        self.profitability.as_ref()
    }

    pub(crate) fn set_cvr(&mut self, col: Vec<f64>) {
        debug_assert_eq!(col.len(), self.len());
        self.cvr = Some(col);
    }

    pub(crate) fn set_profitability(&mut self, col: ProfitabilityColumn) {
        debug_assert_eq!(col.len(), self.len());
        self.profitability = Some(col);
    }

    /// Materializes row `i` as a record.
    pub fn record(&self, i: usize) -> ImpressionRecord {
        ImpressionRecord {
            timestamp: self.timestamps[i],
            campaign: self.campaigns[i],
            conversion: self.conversions[i],
            click: self.clicks[i],
            cost: self.costs[i],
            cpo: self
                .cpo
                .as_ref()
                .and_then(|c| (!c[i].is_nan()).then_some(c[i])),
            attributes: self.attributes.iter().map(|col| col[i]).collect(),
            cvr: self.cvr.as_ref().map(|c| c[i]),
            profitability: self.profitability.as_ref().and_then(|p| p.get(i)),
        }
    }

    pub(crate) fn cpo_raw(&self) -> Option<&[f64]> {
        self.cpo.as_deref()
    }

    /// Splits off the first `train_rows` rows (time order) as a training
    /// set; the remainder becomes the test set. The two parts are disjoint
    /// and their union is the input.
    pub fn split_train_test(&self, train_rows: usize) -> Result<(Self, Self), DataError> {
        if train_rows == 0 || train_rows >= self.len() {
            return Err(DataError::Argument(format!(
                "train_rows must lie in 1..{} (got {train_rows})",
                self.len()
            )));
        }
        Ok((
            self.slice_rows(0..train_rows),
            self.slice_rows(train_rows..self.len()),
        ))
    }

    /// Cuts fixed-size single-campaign slices out of a scored dataset.
    ///
    /// Campaigns with at least `2 * slice_size` rows contribute two slices,
    /// campaigns with at least `slice_size` rows one, in order of first
    /// appearance; rows beyond the emitted slices are discarded and
    /// campaigns below `slice_size` are skipped (both counted in the
    /// report). Every slice holds exactly `slice_size` rows of one campaign
    /// in time order.
    pub fn campaign_slices(
        &self,
        slice_size: usize,
    ) -> Result<(Vec<CampaignDataset>, SliceReport), DataError> {
        if slice_size == 0 {
            return Err(DataError::Argument("slice_size must be >= 1".into()));
        }
        let mut order: Vec<u64> = Vec::new();
        let mut rows_by_campaign: HashMap<u64, Vec<u32>> = HashMap::new();
        for (i, &c) in self.campaigns.iter().enumerate() {
            let rows = rows_by_campaign.entry(c).or_insert_with(|| {
                order.push(c);
                Vec::new()
            });
            rows.push(i as u32);
        }

        let mut slices = Vec::new();
        let mut report = SliceReport::default();
        for c in order {
            let rows = &rows_by_campaign[&c];
            let n_slices = if rows.len() >= 2 * slice_size {
                2
            } else if rows.len() >= slice_size {
                1
            } else {
                0
            };
            if n_slices == 0 {
                report.campaigns_skipped += 1;
                report.rows_discarded += rows.len();
                continue;
            }
            for k in 0..n_slices {
                let idx = &rows[k * slice_size..(k + 1) * slice_size];
                let mut slice = self.gather(idx);
                slice.campaign_id = c;
                report.slices.push(SliceInfo {
                    campaign: c,
                    rows: slice.len(),
                });
                slices.push(slice);
            }
            report.rows_discarded += rows.len() - n_slices * slice_size;
        }
        Ok((slices, report))
    }

    /// Copies the rows in `range` into a new dataset.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        let idx: Vec<u32> = (range.start as u32..range.end as u32).collect();
        self.gather(&idx)
    }

    /// Copies the rows whose mask entry is true into a new dataset.
    pub fn retain_rows(&self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.len());
        let idx: Vec<u32> = keep
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i as u32))
            .collect();
        self.gather(&idx)
    }

    fn gather(&self, idx: &[u32]) -> Self {
        let cols = Columns {
            timestamps: gather_vec(&self.timestamps, idx),
            campaigns: gather_vec(&self.campaigns, idx),
            conversions: gather_vec(&self.conversions, idx),
            clicks: gather_vec(&self.clicks, idx),
            costs: gather_vec(&self.costs, idx),
            cpo: self.cpo.as_ref().map(|c| gather_vec(c, idx)),
            attributes: self
                .attributes
                .iter()
                .map(|col| gather_vec(col, idx))
                .collect(),
            cvr: self.cvr.as_ref().map(|c| gather_vec(c, idx)),
            profitability: self.profitability.as_ref().map(|p| p.gather(idx)),
        };
        // Rows are gathered in ascending index order, so timestamps stay
        // sorted and from_columns will not re-sort.
        Self::from_columns(cols).expect("gather preserves column invariants")
    }
}

fn gather_vec<T: Copy>(src: &[T], idx: &[u32]) -> Vec<T> {
    idx.iter().map(|&i| src[i as usize]).collect()
}

pub(crate) fn gather_columns(cols: &Columns, idx: &[u32]) -> Columns {
    Columns {
        timestamps: gather_vec(&cols.timestamps, idx),
        campaigns: gather_vec(&cols.campaigns, idx),
        conversions: gather_vec(&cols.conversions, idx),
        clicks: gather_vec(&cols.clicks, idx),
        costs: gather_vec(&cols.costs, idx),
        cpo: cols.cpo.as_ref().map(|c| gather_vec(c, idx)),
        attributes: cols
            .attributes
            .iter()
            .map(|col| gather_vec(col, idx))
            .collect(),
        cvr: cols.cvr.as_ref().map(|c| gather_vec(c, idx)),
        profitability: cols.profitability.as_ref().map(|p| p.gather(idx)),
    }
}

fn uniform_campaign(campaigns: &[u64]) -> u64 {
    match campaigns.first() {
        None => MIXED_CAMPAIGNS,
        Some(&first) => {
            if campaigns.iter().all(|&c| c == first) {
                first
            } else {
                MIXED_CAMPAIGNS
            }
        }
    }
}

/// What [`CampaignDataset::campaign_slices`] kept and dropped.
#[derive(Debug, Clone, Default)]
pub struct SliceReport {
    pub slices: Vec<SliceInfo>,
    pub campaigns_skipped: usize,
    pub rows_discarded: usize,
}

#[derive(Debug, Clone)]
pub struct SliceInfo {
    pub campaign: u64,
    pub rows: usize,
}
