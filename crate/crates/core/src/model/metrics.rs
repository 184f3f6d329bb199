//! Classification metrics for the conversion model.

use serde::Serialize;

use super::log_loss_term;

/// Above this row count the AUC switches from the exact rank statistic to
/// a trapezoidal sum over quantile-spaced points of the curve.
const EXACT_AUC_MAX_ROWS: usize = 100_000;
const ROC_POINTS: usize = 1000;

/// Binary confusion matrix with the conversion class as positive. Axes
/// are labelled explicitly to leave no orientation ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }
}

/// Evaluation summary. Rate metrics with an empty denominator report 0.
#[derive(Debug, Clone, Serialize)]
pub struct ModelMetrics {
    pub log_loss: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// Absent when the data holds a single class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub avg_accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    pub rows: usize,
    pub threshold: f64,
}

/// Computes all metrics for predictions against binary labels at the
/// given decision threshold.
pub fn compute_metrics(predictions: &[f64], labels: &[bool], threshold: f64) -> ModelMetrics {
    assert_eq!(predictions.len(), labels.len());
    let n = predictions.len();

    let mut confusion = ConfusionMatrix {
        true_positive: 0,
        false_positive: 0,
        false_negative: 0,
        true_negative: 0,
    };
    let mut loss_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (&p, &y) in predictions.iter().zip(labels) {
        let predicted_positive = p >= threshold;
        match (predicted_positive, y) {
            (true, true) => confusion.true_positive += 1,
            (true, false) => confusion.false_positive += 1,
            (false, true) => confusion.false_negative += 1,
            (false, false) => confusion.true_negative += 1,
        }
        loss_sum += log_loss_term(p, y);
        let err = p - y as u8 as f64;
        abs_sum += err.abs();
        sq_sum += err * err;
    }

    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let sensitivity = ratio(
        confusion.true_positive,
        confusion.true_positive + confusion.false_negative,
    );
    let specificity = ratio(
        confusion.true_negative,
        confusion.true_negative + confusion.false_positive,
    );
    let precision = ratio(
        confusion.true_positive,
        confusion.true_positive + confusion.false_positive,
    );
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    let mse = if n == 0 { 0.0 } else { sq_sum / n as f64 };

    ModelMetrics {
        log_loss: if n == 0 { 0.0 } else { loss_sum / n as f64 },
        mae: if n == 0 { 0.0 } else { abs_sum / n as f64 },
        mse,
        rmse: mse.sqrt(),
        auc: auc(predictions, labels),
        accuracy: ratio(
            confusion.true_positive + confusion.true_negative,
            confusion.total(),
        ),
        avg_accuracy: (sensitivity + specificity) / 2.0,
        sensitivity,
        specificity,
        precision,
        f1,
        confusion,
        rows: n,
        threshold,
    }
}

/// Area under the ROC curve, `None` when only one class is present.
///
/// Up to [`EXACT_AUC_MAX_ROWS`] rows this is the exact rank statistic over
/// all (positive, negative) pairs, ties sharing their average rank. Above
/// that it is a trapezoidal sum over a 1000-point curve whose thresholds
/// sit at score quantiles, boundaries extended so equal scores never land
/// on both sides of a cut.
pub fn auc(predictions: &[f64], labels: &[bool]) -> Option<f64> {
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    if labels.len() <= EXACT_AUC_MAX_ROWS {
        Some(exact_auc(predictions, labels, positives, negatives))
    } else {
        Some(trapezoid_auc(predictions, labels, positives, negatives))
    }
}

fn exact_auc(predictions: &[f64], labels: &[bool], positives: usize, negatives: usize) -> f64 {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_unstable_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));

    // rank sum of the positive class, ties averaged
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && predictions[order[j]] == predictions[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    (rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64)
}

fn trapezoid_auc(
    predictions: &[f64],
    labels: &[bool],
    positives: usize,
    negatives: usize,
) -> f64 {
    let mut order: Vec<u32> = (0..predictions.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        predictions[b as usize].total_cmp(&predictions[a as usize])
    });

    // cumulative (fpr, tpr) at ~1000 quantile cuts, each extended past ties
    let n = order.len();
    let mut points = Vec::with_capacity(ROC_POINTS + 2);
    points.push((0.0f64, 0.0f64));
    let mut taken = 0usize;
    let mut tp = 0u64;
    let mut fp = 0u64;
    for k in 1..=ROC_POINTS {
        let mut target = k * n / ROC_POINTS;
        if target <= taken {
            continue;
        }
        // never split a run of equal scores across the cut
        while target < n
            && predictions[order[target] as usize] == predictions[order[target - 1] as usize]
        {
            target += 1;
        }
        for &idx in &order[taken..target] {
            if labels[idx as usize] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        taken = target;
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        if taken == n {
            break;
        }
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }

    let mut area = 0.0;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_scores_one() {
        let predictions = [0.9, 0.95, 0.1, 0.05, 0.92, 0.08];
        let labels = [true, true, false, false, true, false];
        let m = compute_metrics(&predictions, &labels, 0.5);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.auc, Some(1.0));
        assert!(m.log_loss < 0.11);
        assert_eq!(m.confusion.true_positive, 3);
        assert_eq!(m.confusion.true_negative, 3);
        assert_eq!(m.confusion.total(), 6);
        assert_eq!(m.rmse, m.mse.sqrt());
    }

    #[test]
    fn constant_predictor_has_auc_half() {
        let predictions = [0.5; 10];
        let labels: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let m = compute_metrics(&predictions, &labels, 0.5);
        assert_eq!(m.auc, Some(0.5));
    }

    #[test]
    fn single_class_has_no_auc() {
        let predictions = [0.2, 0.3, 0.4];
        let labels = [false, false, false];
        let m = compute_metrics(&predictions, &labels, 0.5);
        assert_eq!(m.auc, None);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.sensitivity, 0.0);
        assert_eq!(m.specificity, 1.0);
    }

    #[test]
    fn rank_statistic_handles_ties() {
        // positives {0.8, 0.5}, negatives {0.5, 0.2}:
        // pairs: (0.8>0.5)=1, (0.8>0.2)=1, (0.5=0.5)=0.5, (0.5>0.2)=1
        // AUC = 3.5/4
        let predictions = [0.8, 0.5, 0.5, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(auc(&predictions, &labels), Some(3.5 / 4.0));
    }

    #[test]
    fn trapezoid_tracks_the_exact_statistic() {
        // deterministic pseudo-random scores, correlated with labels
        let n = 150_000;
        let mut predictions = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut state = 0x2545_F491_4F6C_DD1Du64;
        for _ in 0..n {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let v = (state >> 11) as f64 / (1u64 << 53) as f64;
            let label = v < 0.3;
            // signal: positives skew higher
            let score = if label { (u + v).min(1.0) } else { u * 0.9 };
            predictions.push(score);
            labels.push(label);
        }
        let approx = auc(&predictions, &labels).unwrap();
        let exact = exact_auc(
            &predictions,
            &labels,
            labels.iter().filter(|&&y| y).count(),
            labels.iter().filter(|&&y| !y).count(),
        );
        assert!(
            (approx - exact).abs() < 2e-3,
            "approx {approx} vs exact {exact}"
        );
    }

    #[test]
    fn avg_accuracy_is_the_mean_of_sensitivity_and_specificity() {
        let predictions = [0.9, 0.2, 0.8, 0.3, 0.6];
        let labels = [true, true, false, false, false];
        let m = compute_metrics(&predictions, &labels, 0.5);
        assert_eq!(m.avg_accuracy, (m.sensitivity + m.specificity) / 2.0);
        assert_eq!(m.confusion.total() as usize, m.rows);
    }

    #[test]
    fn log_loss_is_clipped_finite() {
        let predictions = [1e-300, 1.0 - 1e-16];
        let labels = [true, false];
        let m = compute_metrics(&predictions, &labels, 0.5);
        assert!(m.log_loss.is_finite());
    }
}
