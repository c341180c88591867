//! Ranking metrics with hallucinated items as the positive class.

use super::EvaluationError;

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), EvaluationError> {
    if scores.len() != labels.len() {
        return Err(EvaluationError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(EvaluationError::InvalidScore(*s));
    }
    let positives = labels.iter().filter(|l| **l).count();
    Ok((positives, labels.len() - positives))
}

/// Indices sorted by descending score, split into runs of equal scores.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Mann-Whitney statistic: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvaluationError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvaluationError::DegenerateClasses {
            positives: n_pos,
            negatives: n_neg,
        });
    }
    // walk from the top; every negative below a positive is a win
    let mut negatives_above = 0usize;
    let mut losses = 0.0;
    for group in tie_groups(scores) {
        let pos = group.iter().filter(|&&i| labels[i]).count();
        let neg = group.len() - pos;
        losses += pos as f64 * negatives_above as f64 + 0.5 * (pos * neg) as f64;
        negatives_above += neg;
    }
    let pairs = n_pos as f64 * n_neg as f64;
    Ok(1.0 - losses / pairs)
}

/// Step-wise average precision over distinct thresholds.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64, EvaluationError> {
    let (n_pos, _) = check(scores, labels)?;
    if n_pos == 0 {
        return Err(EvaluationError::NoPositives);
    }
    let (mut tp, mut predicted) = (0usize, 0usize);
    let mut ap = 0.0;
    for group in tie_groups(scores) {
        let pos = group.iter().filter(|&&i| labels[i]).count();
        tp += pos;
        predicted += group.len();
        if pos > 0 {
            ap += (pos as f64 / n_pos as f64) * (tp as f64 / predicted as f64);
        }
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Point {
    /// Items with `score >= threshold` are predicted positive.
    pub threshold: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Best F1 over thresholds at midpoints between distinct scores plus the two
/// infinite sentinels. Ties go to the larger threshold.
pub fn best_f1(scores: &[f64], labels: &[bool]) -> Result<F1Point, EvaluationError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    if n_pos == 0 {
        return Err(EvaluationError::NoPositives);
    }
    let n = scores.len() as f64;
    // nothing predicted positive
    let mut best = F1Point {
        threshold: f64::INFINITY,
        f1: 0.0,
        accuracy: n_neg as f64 / n,
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let groups = tie_groups(scores);
    for (k, group) in groups.iter().enumerate() {
        let pos = group.iter().filter(|&&i| labels[i]).count();
        tp += pos;
        fp += group.len() - pos;
        let threshold = match groups.get(k + 1) {
            Some(next) => {
                let (hi, lo) = (scores[group[0]], scores[next[0]]);
                let mid = lo + (hi - lo) / 2.0;
                if mid > lo && mid <= hi {
                    mid
                } else {
                    hi
                }
            }
            None => f64::NEG_INFINITY,
        };
        let f1 = f1_score(tp, fp, n_pos - tp);
        if f1 > best.f1 {
            let tn = n_neg - fp;
            best = F1Point {
                threshold,
                f1,
                accuracy: (tp + tn) as f64 / n,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: bool = true;
    const N: bool = false;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[N, N, P, P]).unwrap(), 0.75);
        assert_eq!(auroc(&[0.9, 0.8, 0.2, 0.1], &[P, P, N, N]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &[P, N, P, N]).unwrap(), 0.5);
        assert!(matches!(
            auroc(&[0.3, 0.4], &[P, P]),
            Err(EvaluationError::DegenerateClasses { .. })
        ));
    }

    #[test]
    fn auc_pr_examples() {
        assert_eq!(auc_pr(&[0.9, 0.1], &[P, N]).unwrap(), 1.0);
        assert_eq!(auc_pr(&[0.9, 0.1], &[N, P]).unwrap(), 0.5);
        assert_eq!(
            auc_pr(&[0.9, 0.1], &[N, N]).unwrap_err(),
            EvaluationError::NoPositives
        );
    }

    #[test]
    fn best_f1_examples() {
        let r = best_f1(&[0.9, 0.1], &[P, N]).unwrap();
        assert_eq!((r.f1, r.accuracy, r.threshold), (1.0, 1.0, 0.5));
        let r = best_f1(&[0.9, 0.8, 0.1], &[P, N, P]).unwrap();
        assert!((r.f1 - 0.8).abs() < 1e-15);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.threshold, f64::NEG_INFINITY);
        let r = best_f1(&[0.2, 0.6, 0.6], &[P, P, P]).unwrap();
        assert_eq!((r.f1, r.threshold), (1.0, f64::NEG_INFINITY));
    }

    #[test]
    fn mismatched_lengths() {
        assert!(matches!(
            auroc(&[0.1], &[P, N]),
            Err(EvaluationError::LengthMismatch { .. })
        ));
    }
}
