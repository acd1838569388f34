//! Per-term AUPRC and protein-centric Fmax.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::labels::LabelMatrix;

/// Non-interpolated average precision. Scores are visited in descending
/// order and tied scores form a single threshold step.
pub fn auprc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let total_pos = labels.iter().filter(|&&y| y > 0.0).count();
    if total_pos == 0 || total_pos == labels.len() {
        return Err(Error::Degenerate(
            "AUPRC undefined: labels contain a single class".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut acc) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut group_pos = 0usize;
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] > 0.0 {
                group_pos += 1;
            }
            seen += 1;
            i += 1;
        }
        tp += group_pos;
        if group_pos > 0 {
            acc += group_pos as f64 * tp as f64 / seen as f64;
        }
    }
    Ok(acc / total_pos as f64)
}

/// How per-protein precisions are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionAveraging {
    /// Over every evaluated protein; a protein without predictions contributes 0.
    #[default]
    AllProteins,
    /// Over proteins with at least one prediction at the threshold.
    PredictedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FmaxResult {
    pub value: f64,
    pub threshold: f64,
}

/// Maximum over thresholds `t` (every distinct score) of the harmonic mean
/// of protein-averaged precision and recall, predicting `score >= t`.
/// Proteins (rows) without positive labels are left out. Ties between
/// thresholds go to the smallest one.
pub fn fmax(
    scores: &DMatrix<f64>,
    labels: &LabelMatrix,
    averaging: PrecisionAveraging,
) -> Result<FmaxResult> {
    let (n, m) = (labels.n(), labels.m());
    if scores.nrows() != n || scores.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            found: scores.nrows() * scores.ncols(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let positives: Vec<usize> = (0..n)
        .map(|i| (0..m).filter(|&k| labels.is_positive(i, k)).count())
        .collect();
    let evaluated = positives.iter().filter(|&&p| p > 0).count();
    if evaluated == 0 {
        return Err(Error::Degenerate(
            "Fmax undefined: no protein has a positive label".into(),
        ));
    }

    let mut entries: Vec<(f64, usize, bool)> = Vec::with_capacity(n * m);
    for i in 0..n {
        for k in 0..m {
            entries.push((scores[(i, k)], i, labels.is_positive(i, k)));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut tp = vec![0usize; n];
    let mut predicted = vec![0usize; n];
    let (mut prec_sum, mut rec_sum, mut predicting) = (0.0, 0.0, 0usize);
    let mut best = FmaxResult {
        value: 0.0,
        threshold: entries[0].0,
    };
    let mut idx = 0;
    while idx < entries.len() {
        let t = entries[idx].0;
        while idx < entries.len() && entries[idx].0 == t {
            let (_, i, pos) = entries[idx];
            idx += 1;
            if positives[i] == 0 {
                continue;
            }
            if predicted[i] > 0 {
                prec_sum -= tp[i] as f64 / predicted[i] as f64;
            } else {
                predicting += 1;
            }
            rec_sum -= tp[i] as f64 / positives[i] as f64;
            predicted[i] += 1;
            if pos {
                tp[i] += 1;
            }
            prec_sum += tp[i] as f64 / predicted[i] as f64;
            rec_sum += tp[i] as f64 / positives[i] as f64;
        }
        let prec_den = match averaging {
            PrecisionAveraging::AllProteins => evaluated,
            PrecisionAveraging::PredictedOnly => predicting,
        };
        let prec = if prec_den > 0 {
            prec_sum / prec_den as f64
        } else {
            0.0
        };
        let rec = rec_sum / evaluated as f64;
        let f = if prec + rec > 0.0 {
            2.0 * prec * rec / (prec + rec)
        } else {
            0.0
        };
        if f >= best.value {
            best = FmaxResult {
                value: f,
                threshold: t,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auprc_examples() {
        let v = auprc(&[0.9, 0.8, 0.7, 0.6], &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((v - 5.0 / 6.0).abs() <= f64::EPSILON);
        assert_eq!(
            auprc(&[0.9, 0.8, 0.1, 0.0], &[1.0, 1.0, -1.0, -1.0]).unwrap(),
            1.0
        );
        // Two positives tied below three negatives: one step at full recall.
        let v = auprc(&[0.1, 0.1, 0.5, 0.6, 0.7], &[1.0, 1.0, -1.0, -1.0, -1.0]).unwrap();
        assert_eq!(v, 2.0 / 5.0);
        // Everything tied: precision equals prevalence.
        assert_eq!(auprc(&[0.0; 4], &[1.0, -1.0, -1.0, -1.0]).unwrap(), 0.25);
    }

    #[test]
    fn auprc_single_class() {
        let err = auprc(&[0.1, 0.2], &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("AUPRC undefined"));
        assert!(auprc(&[0.1, 0.2], &[-1.0, -1.0]).is_err());
        assert!(auprc(&[0.1], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn fmax_single_protein() {
        let y = LabelMatrix::from_positives(1, 3, [(0, 0), (0, 1)]);
        let f = DMatrix::from_row_slice(1, 3, &[0.9, 0.4, 0.8]);
        let r = fmax(&f, &y, PrecisionAveraging::AllProteins).unwrap();
        assert!((r.value - 0.8).abs() < 1e-15);
        assert_eq!(r.threshold, 0.4);
    }

    #[test]
    fn fmax_perfect_and_duplicated() {
        let y = LabelMatrix::from_positives(2, 3, [(0, 0), (1, 2)]);
        let f = DMatrix::from_row_slice(2, 3, &[0.9, 0.1, 0.2, 0.0, 0.3, 0.5]);
        assert_eq!(
            fmax(&f, &y, PrecisionAveraging::AllProteins).unwrap().value,
            1.0
        );

        let y1 = LabelMatrix::from_positives(1, 3, [(0, 0), (0, 1)]);
        let f1 = DMatrix::from_row_slice(1, 3, &[0.9, 0.4, 0.8]);
        let y2 = LabelMatrix::from_positives(2, 3, [(0, 0), (0, 1), (1, 0), (1, 1)]);
        let f2 = DMatrix::from_row_slice(2, 3, &[0.9, 0.4, 0.8, 0.9, 0.4, 0.8]);
        let a = fmax(&f1, &y1, PrecisionAveraging::AllProteins).unwrap();
        let b = fmax(&f2, &y2, PrecisionAveraging::AllProteins).unwrap();
        assert!((a.value - b.value).abs() < 1e-15);
        assert_eq!(a.threshold, b.threshold);
    }

    #[test]
    fn fmax_excludes_proteins_without_positives() {
        let y = LabelMatrix::from_positives(2, 2, [(0, 0)]);
        let f = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.95, 0.95]);
        let r = fmax(&f, &y, PrecisionAveraging::AllProteins).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.threshold, 0.9);
        let none = LabelMatrix::from_positives(1, 2, []);
        assert!(fmax(
            &DMatrix::zeros(1, 2),
            &none,
            PrecisionAveraging::AllProteins
        )
        .is_err());
    }

    #[test]
    fn predicted_only_averaging() {
        // Protein 1 scores every task 0, so it predicts nothing above 0.
        let y = LabelMatrix::from_positives(2, 3, [(0, 0), (1, 1)]);
        let f = DMatrix::from_row_slice(2, 3, &[0.9, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let all = fmax(&f, &y, PrecisionAveraging::AllProteins).unwrap();
        let cafa = fmax(&f, &y, PrecisionAveraging::PredictedOnly).unwrap();
        // t = 0.9: all-proteins P = R = 1/2; t = 0: P = 1/3, R = 1. Both give 1/2.
        assert!((all.value - 0.5).abs() < 1e-15);
        // Predicted-only at t = 0.9: P = 1, R = 1/2.
        assert!((cafa.value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cafa.threshold, 0.9);
    }
}
