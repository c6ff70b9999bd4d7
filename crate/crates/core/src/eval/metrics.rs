use super::{EvalError, Result};

fn check_pair(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    Ok(())
}

/// Fraction of positions where `preds` and `labels` agree.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_pair(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp == 0 {
        // Covers P + R = 0 as well as the class being absent everywhere.
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

/// F1 of `positive` against everything else; 0 when precision and recall
/// are both 0.
pub fn f1_binary(preds: &[usize], labels: &[usize], positive: usize) -> Result<f64> {
    check_pair(preds, labels)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &l) in preds.iter().zip(labels) {
        match (p == positive, l == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fn_))
}

/// One-vs-rest F1 per class read off a confusion matrix (rows are labels).
pub fn per_class_f1(confusion: &[Vec<u64>]) -> Vec<f64> {
    let n = confusion.len();
    (0..n)
        .map(|c| {
            let tp = confusion[c][c];
            let fn_: u64 = confusion[c].iter().sum::<u64>() - tp;
            let fp: u64 = (0..n).map(|r| confusion[r][c]).sum::<u64>() - tp;
            f1_from_counts(tp, fp, fn_)
        })
        .collect()
}

/// Unweighted mean of per-class F1 over all `n_classes`; a class absent
/// from both labels and predictions contributes 0.
pub fn macro_f1(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<f64> {
    let cm = confusion_matrix(preds, labels, n_classes)?;
    Ok(per_class_f1(&cm).iter().sum::<f64>() / n_classes as f64)
}

/// `M[i][j]` counts graphs with label `i` predicted as `j`.
pub fn confusion_matrix(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<Vec<Vec<u64>>> {
    check_pair(preds, labels)?;
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= n_classes || l >= n_classes {
            return Err(EvalError::ClassOutOfRange { class: p.max(l), n_classes });
        }
        m[l][p] += 1;
    }
    Ok(m)
}

/// ROC staircase and trapezoid AUC. Scores are swept from high to low with
/// equal scores grouped into a single step, so ties produce diagonal
/// segments.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if scores.len() != positives.len() {
        return Err(EvalError::LengthMismatch { preds: scores.len(), labels: positives.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::NanScore);
    }
    let p = positives.iter().filter(|&&b| b).count();
    let n = positives.len() - p;
    if p == 0 || n == 0 {
        return Err(EvalError::AucUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let (x1, y1) = (fp as f64 / n as f64, tp as f64 / p as f64);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok((points, auc))
}
