//! Online logistic regression over hashed categorical features.
//!
//! Each impression's attribute codes are mapped into a fixed-size index
//! space of `D` slots (collisions are accepted), one index per attribute.
//! The model keeps a weight per slot and a touch count per slot; a single
//! pass over the training rows predicts each row and then applies one
//! gradient step with a per-slot learning rate that decays as the square
//! root of the slot's touch count. Training is strictly sequential in row
//! order — online updates are order-dependent and determinism is part of
//! the contract — while inference partitions rows across workers against
//! the read-only model.

mod checkpoint;
mod metrics;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use metrics::{compute_metrics, ConfusionMatrix, ModelMetrics};

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{CampaignDataset, ImpressionRecord};

/// Default hash-space size (2^20 slots).
pub const DEFAULT_HASH_BITS: u32 = 20;
/// Default learning rate.
pub const DEFAULT_ALPHA: f64 = 0.1;
/// Rows per monitoring window of the training log-loss average.
pub const DEFAULT_LOSS_WINDOW: usize = 100_000;

/// Largest representable probability below 1.0.
const SIGMOID_MAX: f64 = 1.0 - f64::EPSILON / 2.0;
const SIGMOID_MIN: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("hash-space size must be a positive power of two, got {0}")]
    InvalidHashSize(u64),
    #[error("learning rate must be finite and > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How attribute codes map to hash-space indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashMode {
    /// `value mod D`. All attributes share one code space, so equal codes
    /// in different attribute positions collide; production logs carry
    /// pre-hashed codes spread over a wide range, which makes collisions
    /// rare.
    Direct,
    /// Mixes the attribute position into the code before the modulus, so
    /// small per-attribute code spaces (synthetic data) do not collide
    /// across positions. Stable across runs and platforms.
    Salted,
}

/// A row mapped into hash space: one index per attribute, plus its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedRow {
    pub indices: Vec<u32>,
    pub label: bool,
}

/// Maps a record's attribute codes into `[0, d)`, one index per attribute.
pub fn hash_row(record: &ImpressionRecord, d: u32, mode: HashMode) -> HashedRow {
    HashedRow {
        indices: record
            .attributes
            .iter()
            .enumerate()
            .map(|(position, &value)| hash_value(mode, position, value, d))
            .collect(),
        label: record.conversion,
    }
}

#[inline]
fn hash_value(mode: HashMode, position: usize, value: u64, d: u32) -> u32 {
    let mixed = match mode {
        HashMode::Direct => value,
        HashMode::Salted => splitmix64(
            value.wrapping_add((position as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        ),
    };
    (mixed % d as u64) as u32
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Numerically safe logistic function: never returns exactly 0 or 1 and
/// never overflows, whatever the magnitude of `s`.
pub fn sigmoid(s: f64) -> f64 {
    let p = if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    };
    p.clamp(SIGMOID_MIN, SIGMOID_MAX)
}

/// The conversion model: weights and touch counts over `d` hash slots.
#[derive(Debug, Clone, PartialEq)]
pub struct CvrModel {
    d: u32,
    alpha: f64,
    mode: HashMode,
    weights: Vec<f64>,
    counts: Vec<u64>,
    rows_trained: u64,
}

/// Per-window mean training log loss, predictions taken before each
/// row's update.
#[derive(Debug, Clone)]
pub struct TrainingLog {
    pub window_rows: usize,
    pub windows: Vec<LossWindow>,
    pub rows: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LossWindow {
    pub rows: usize,
    pub mean_log_loss: f64,
}

impl CvrModel {
    /// Fresh zero-weight model with `d` hash slots (a positive power of
    /// two) and learning rate `alpha`.
    pub fn new(d: u32, alpha: f64, mode: HashMode) -> Result<Self, ModelError> {
        if d == 0 || !d.is_power_of_two() {
            return Err(ModelError::InvalidHashSize(d as u64));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(ModelError::InvalidAlpha(alpha));
        }
        Ok(CvrModel {
            d,
            alpha,
            mode,
            weights: vec![0.0; d as usize],
            counts: vec![0; d as usize],
            rows_trained: 0,
        })
    }

    pub(crate) fn from_parts(
        d: u32,
        alpha: f64,
        mode: HashMode,
        weights: Vec<f64>,
        counts: Vec<u64>,
        rows_trained: u64,
    ) -> Result<Self, ModelError> {
        let mut model = Self::new(d, alpha, mode)?;
        if weights.len() != d as usize || counts.len() != d as usize {
            return Err(ModelError::Checkpoint(format!(
                "vector lengths {}/{} do not match d={d}",
                weights.len(),
                counts.len()
            )));
        }
        model.weights = weights;
        model.counts = counts;
        model.rows_trained = rows_trained;
        model
            .weights
            .iter()
            .all(|w| w.is_finite())
            .then_some(model)
            .ok_or_else(|| ModelError::Checkpoint("non-finite weight".into()))
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> HashMode {
        self.mode
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn rows_trained(&self) -> u64 {
        self.rows_trained
    }

    /// Hashes a record with this model's space size and mode.
    pub fn hash_row(&self, record: &ImpressionRecord) -> HashedRow {
        hash_row(record, self.d, self.mode)
    }

    /// Conversion probability for a hashed row: the logistic function of
    /// the sum of one weight per attribute, duplicate indices counted with
    /// multiplicity. Pure; always in (0, 1).
    pub fn predict(&self, row: &HashedRow) -> f64 {
        self.predict_indices(&row.indices)
    }

    #[inline]
    fn predict_indices(&self, indices: &[u32]) -> f64 {
        let sum: f64 = indices.iter().map(|&i| self.weights[i as usize]).sum();
        sigmoid(sum)
    }

    /// One gradient step for `row`, where `p` is the prediction made for
    /// it under the current state (the update follows the prediction).
    /// Each active slot moves by `-alpha * (p - y) / sqrt(count + 1)` with
    /// the count read before its increment; slots hit twice by one row are
    /// updated twice.
    pub fn sgd_update(&mut self, row: &HashedRow, p: f64) {
        self.update_indices(&row.indices, row.label, p);
    }

    #[inline]
    fn update_indices(&mut self, indices: &[u32], label: bool, p: f64) {
        let gradient = p - label as u8 as f64;
        for &i in indices {
            let i = i as usize;
            self.weights[i] -= self.alpha * gradient / ((self.counts[i] + 1) as f64).sqrt();
            self.counts[i] += 1;
        }
    }

    /// Single sequential pass over `data` in row order: hash, predict,
    /// update. Returns the per-window mean log loss of the pre-update
    /// predictions for monitoring.
    pub fn train(&mut self, data: &CampaignDataset) -> TrainingLog {
        self.train_with_window(data, DEFAULT_LOSS_WINDOW)
    }

    /// [`CvrModel::train`] with an explicit monitoring window size.
    pub fn train_with_window(
        &mut self,
        data: &CampaignDataset,
        window_rows: usize,
    ) -> TrainingLog {
        let window_rows = window_rows.max(1);
        let n_attr = data.n_attributes();
        let mut indices = vec![0u32; n_attr];
        let mut windows = Vec::new();
        let mut window_loss = 0.0;
        let mut window_count = 0usize;

        for row in 0..data.len() {
            for (position, slot) in indices.iter_mut().enumerate() {
                *slot = hash_value(self.mode, position, data.attribute(position)[row], self.d);
            }
            let label = data.conversions()[row];
            let p = self.predict_indices(&indices);
            window_loss += log_loss_term(p, label);
            window_count += 1;
            if window_count == window_rows {
                windows.push(LossWindow {
                    rows: window_count,
                    mean_log_loss: window_loss / window_count as f64,
                });
                window_loss = 0.0;
                window_count = 0;
            }
            self.update_indices(&indices, label, p);
        }
        if window_count > 0 {
            windows.push(LossWindow {
                rows: window_count,
                mean_log_loss: window_loss / window_count as f64,
            });
        }
        self.rows_trained += data.len() as u64;
        TrainingLog {
            window_rows,
            windows,
            rows: data.len(),
        }
    }

    /// Predictions for every row, in row order. Pure inference; rows are
    /// partitioned across workers and results do not depend on the worker
    /// count.
    pub fn predict_column(&self, data: &CampaignDataset) -> Vec<f64> {
        let n_attr = data.n_attributes();
        let mut cvr = vec![0.0f64; data.len()];
        const CHUNK: usize = 8192;
        cvr.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * CHUNK;
            let mut indices = vec![0u32; n_attr];
            for (offset, slot_out) in out.iter_mut().enumerate() {
                let row = base + offset;
                for (position, slot) in indices.iter_mut().enumerate() {
                    *slot =
                        hash_value(self.mode, position, data.attribute(position)[row], self.d);
                }
                *slot_out = self.predict_indices(&indices);
            }
        });
        cvr
    }

    /// Fills the cvr column of `data` with this model's predictions and
    /// returns it. The model is not modified.
    pub fn predict_all(&self, mut data: CampaignDataset) -> CampaignDataset {
        let cvr = self.predict_column(&data);
        data.set_cvr(cvr);
        data
    }

    /// Evaluates the model on labelled data at the given decision
    /// threshold (probabilities clipped to `[1e-15, 1 - 1e-15]` for the
    /// log loss).
    pub fn evaluate(
        &self,
        data: &CampaignDataset,
        threshold: f64,
    ) -> Result<ModelMetrics, ModelError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ModelError::InvalidThreshold(threshold));
        }
        let predictions = self.predict_column(data);
        Ok(compute_metrics(&predictions, data.conversions(), threshold))
    }
}

/// Negative log likelihood of one prediction, clipped away from 0 and 1.
pub fn log_loss_term(p: f64, label: bool) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}
