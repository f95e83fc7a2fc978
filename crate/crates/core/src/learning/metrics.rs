use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Detection (true-positive) and false-alarm (false-positive) rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub detection: f64,
    pub false_alarm: f64,
    pub accuracy: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// `predicted` and `actual` hold `+1` / `-1`.
pub fn classification_metrics(predicted: &[f64], actual: &[f64]) -> Result<ClassificationMetrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension {
            what: "predictions",
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty("classification metrics"));
    }
    let (mut tp, mut fp, mut n_pos, mut n_neg, mut correct) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for (&p, &a) in predicted.iter().zip(actual) {
        if a > 0.0 {
            n_pos += 1;
            tp += (p > 0.0) as usize;
        } else {
            n_neg += 1;
            fp += (p > 0.0) as usize;
        }
        correct += ((p > 0.0) == (a > 0.0)) as usize;
    }
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(ClassificationMetrics {
        detection: rate(tp, n_pos),
        false_alarm: rate(fp, n_neg),
        accuracy: rate(correct, actual.len()),
        n_pos,
        n_neg,
    })
}

/// Detection rate when the decision threshold is set so that the false-alarm
/// rate does not exceed `fa`. Returns `(detection, achieved_fa)`.
pub fn detection_at_false_alarm(scores: &[f64], actual: &[f64], fa: f64) -> Result<(f64, f64)> {
    if scores.len() != actual.len() {
        return Err(Error::Dimension {
            what: "scores",
            expected: actual.len(),
            got: scores.len(),
        });
    }
    let mut neg: Vec<f64> = scores.iter().zip(actual).filter(|(_, a)| **a <= 0.0).map(|(s, _)| *s).collect();
    let pos: Vec<f64> = scores.iter().zip(actual).filter(|(_, a)| **a > 0.0).map(|(s, _)| *s).collect();
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::SingleClass(alloc::string::String::from("detection at false alarm")));
    }
    neg.sort_by(|a, b| b.total_cmp(a));
    // Largest number of negatives allowed above the threshold.
    let allowed = libm::floor(fa * neg.len() as f64 + 1e-9) as usize;
    // Declare positive when score > threshold.
    let threshold = if allowed >= neg.len() {
        f64::NEG_INFINITY
    } else {
        neg[allowed]
    };
    let fp = neg.iter().filter(|&&s| s > threshold).count();
    let tp = pos.iter().filter(|&&s| s > threshold).count();
    Ok((tp as f64 / pos.len() as f64, fp as f64 / neg.len() as f64))
}

/// Error statistics and the least-squares line of predicted against actual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub slope: f64,
    pub intercept: f64,
    /// `1 - SS_res / SS_tot` of the predictions.
    pub r2: f64,
    pub n: usize,
}

/// Ordinary least squares `y = slope * x + intercept`; zero slope when `x`
/// is constant.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

pub fn regression_metrics(predicted: &[f64], actual: &[f64]) -> Result<RegressionMetrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension {
            what: "predictions",
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty("regression metrics"));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_res: f64 = predicted.iter().zip(actual).map(|(p, a)| (a - p) * (a - p)).sum();
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    let (slope, intercept) = fit_line(actual, predicted);
    Ok(RegressionMetrics {
        mse: ss_res / n,
        slope,
        intercept,
        r2: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 },
        n: actual.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let a = [1.0, -1.0, 1.0, -1.0];
        let m = classification_metrics(&a, &a).unwrap();
        assert_eq!((m.detection, m.false_alarm), (1.0, 0.0));
    }

    #[test]
    fn regression_identities() {
        let a = [1.0, 2.0, 4.0, 8.0];
        let m = regression_metrics(&a, &a).unwrap();
        assert_eq!((m.slope, m.intercept, m.r2, m.mse), (1.0, 0.0, 1.0, 0.0));
        let m = regression_metrics(&[3.0; 4], &a).unwrap();
        assert_eq!(m.slope, 0.0);
    }

    #[test]
    fn threshold_matching() {
        let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2];
        let actual = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let (det, fa) = detection_at_false_alarm(&scores, &actual, 0.25).unwrap();
        assert_eq!(fa, 0.25);
        assert_eq!(det, 0.75);
        let (det, fa) = detection_at_false_alarm(&scores, &actual, 0.0).unwrap();
        assert_eq!((det, fa), (0.25, 0.0));
    }
}
