//! Ranking metrics and the binary cross-entropy loss.

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Probabilities are clamped this far from 0 and 1 before taking logs.
pub const BCE_CLAMP: f64 = 1e-12;

fn check_finite(scores: &[f64]) -> Result<()> {
    match scores.iter().position(|s| !s.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("score {i} is {}", scores[i]))),
        None => Ok(()),
    }
}

/// Step-wise average precision.
///
/// Candidates are sorted by descending score; equal scores keep their input
/// order. `AP = sum_k (R_k - R_{k-1}) P_k` over the ranks `k` holding a
/// positive.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dim(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    check_finite(scores)?;
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs a positive label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Rank of a positive among its negatives; ties count half.
pub fn average_rank(positive: f64, negatives: &[f64]) -> f64 {
    let greater = negatives.iter().filter(|&&s| s > positive).count();
    let ties = negatives.iter().filter(|&&s| s == positive).count();
    1.0 + greater as f64 + 0.5 * ties as f64
}

/// Mean reciprocal rank over `(positive score, negative scores)` groups.
pub fn mrr(groups: &[(f64, Vec<f64>)]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Contract("mean reciprocal rank over zero groups".into()));
    }
    let mut sum = 0.0;
    for (i, (p, negs)) in groups.iter().enumerate() {
        if negs.is_empty() {
            return Err(Error::Contract(format!("group {i} has no negatives")));
        }
        check_finite(std::slice::from_ref(p))?;
        check_finite(negs)?;
        sum += 1.0 / average_rank(*p, negs);
    }
    Ok(sum / groups.len() as f64)
}

/// `-mean(y ln p + (1 - y) ln(1 - p))` with `p` clamped to
/// `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub fn bce_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::dim(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = if p.is_nan() {
                0.5
            } else {
                p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
            };
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    Ok(-total / scores.len() as f64)
}

/// [`bce_loss`] on the tape for an `n x 1` column of probabilities.
pub fn bce_var(tape: &mut Tape, probs: Var, labels: &[f64]) -> Result<Var> {
    let n = labels.len();
    if tape.shape(probs) != [n, 1] || n == 0 {
        return Err(Error::dim(format!(
            "probabilities {:?} for {n} labels",
            tape.shape(probs)
        )));
    }
    let p = tape.clamp(probs, BCE_CLAMP, 1.0 - BCE_CLAMP);
    let q = tape.affine(p, -1.0, 1.0);
    let ln_p = tape.ln(p)?;
    let ln_q = tape.ln(q)?;
    let y = tape.constant(Tensor::from_vec(n, 1, labels.to_vec())?);
    let not_y = tape.constant(Tensor::from_vec(n, 1, labels.iter().map(|y| 1.0 - y).collect())?);
    let a = tape.mul(y, ln_p)?;
    let b = tape.mul(not_y, ln_q)?;
    let s = tape.add(a, b)?;
    let m = tape.mean(s)?;
    Ok(tape.scale(m, -1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auprc_examples() {
        assert_eq!(auprc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        let v = auprc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(auprc(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
        assert!(matches!(auprc(&[0.3], &[false]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auprc_ties_keep_input_order() {
        assert_eq!(auprc(&[0.5, 0.5], &[true, false]).unwrap(), 1.0);
        assert_eq!(auprc(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn mrr_examples() {
        assert_eq!(mrr(&[(0.9, vec![0.1, 0.2])]).unwrap(), 1.0);
        assert_eq!(mrr(&[(0.5, vec![0.6, 0.7, 0.1])]).unwrap(), 1.0 / 3.0);
        assert_eq!(mrr(&[(0.9, vec![0.1]), (0.5, vec![0.6])]).unwrap(), 0.75);
        assert_eq!(mrr(&[(0.5, vec![0.5])]).unwrap(), 1.0 / 1.5);
        assert!(matches!(mrr(&[]), Err(Error::Contract(_))));
        assert!(matches!(mrr(&[(0.5, vec![])]), Err(Error::Contract(_))));
    }

    #[test]
    fn bce_examples() {
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() < 1e-11);
        assert!(bce_loss(&[0.0], &[1.0]).unwrap().is_finite());
        let v = bce_loss(&[0.2, 0.7, 0.9], &[1.0, 0.0, 1.0]).unwrap();
        let each: f64 = [(0.2, 1.0), (0.7, 0.0), (0.9, 1.0)]
            .iter()
            .map(|&(p, y)| bce_loss(&[p], &[y]).unwrap())
            .sum();
        assert!((v - each / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tape_bce_matches_plain() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::from_vec(3, 1, vec![0.2, 0.7, 1.0]).unwrap());
        let l = bce_var(&mut tape, p, &[1.0, 0.0, 1.0]).unwrap();
        let plain = bce_loss(&[0.2, 0.7, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!((tape.value(l).item() - plain).abs() < 1e-15);
    }
}
