use crate::error::{dim_err, PrefError, Result};
use crate::linalg::Matrix;

/// Denominator floor of the relative (MAPE) loss.
pub const MAPE_EPS: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    L1,
    L2,
    /// Mean absolute percentage error with a floored denominator.
    Mape,
}

impl std::str::FromStr for LossKind {
    type Err = PrefError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "l2" => Ok(LossKind::L2),
            "mape" => Ok(LossKind::Mape),
            other => Err(PrefError::Usage(format!("unknown loss '{other}'"))),
        }
    }
}

/// Mean-reduced loss over every element and its gradient with respect to `pred`.
pub fn loss(kind: LossKind, pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.rows != target.rows || pred.cols != target.cols {
        return Err(dim_err(format!(
            "prediction is {}x{}, target is {}x{}",
            pred.rows, pred.cols, target.rows, target.cols
        )));
    }
    if !pred.all_finite() || !target.all_finite() {
        return Err(PrefError::Numeric("non-finite value in loss input".into()));
    }
    let count = pred.data.len().max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows, pred.cols);
    let mut total = 0.0;
    for ((g, &p), &t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let r = p - t;
        match kind {
            LossKind::L1 => {
                total += r.abs();
                *g = sign(r) / count;
            }
            LossKind::L2 => {
                total += r * r;
                *g = 2.0 * r / count;
            }
            LossKind::Mape => {
                let denom = t.abs() + MAPE_EPS;
                total += r.abs() / denom;
                *g = sign(r) / denom / count;
            }
        }
    }
    Ok((total / count, grad))
}

#[inline]
fn sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Peak signal-to-noise ratio in dB for signals in `[0, 1]`.
pub fn psnr(pred: &[f64], target: &[f64]) -> f64 {
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len().max(1) as f64;
    -10.0 * mse.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_have_zero_loss() {
        let a = Matrix::from_vec(2, 2, vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        for kind in [LossKind::L1, LossKind::L2, LossKind::Mape] {
            let (l, g) = loss(kind, &a, &a).unwrap();
            assert_eq!(l, 0.0);
            assert!(g.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn l2_constant_offset() {
        let t = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let c = 0.5;
        let p = Matrix::from_vec(4, 1, t.data.iter().map(|v| v + c).collect()).unwrap();
        let (l, g) = loss(LossKind::L2, &p, &t).unwrap();
        assert!((l - c * c).abs() < 1e-15);
        assert!(g.data.iter().all(|&v| (v - 2.0 * c / 4.0).abs() < 1e-15));
    }

    #[test]
    fn mape_matches_reference() {
        let t = Matrix::from_vec(5, 1, vec![0.5, -0.01, 0.0, 2.0, -1.5]).unwrap();
        let p = Matrix::from_vec(5, 1, vec![0.4, 0.02, 0.1, 2.5, -1.0]).unwrap();
        let (l, _) = loss(LossKind::Mape, &p, &t).unwrap();
        let mut reference = 0.0;
        for i in 0..5 {
            reference += (p.data[i] - t.data[i]).abs() / (t.data[i].abs() + 1e-2);
        }
        reference /= 5.0;
        assert!((l - reference).abs() < 1e-7);
    }

    #[test]
    fn nan_is_rejected() {
        let t = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        let p = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert!(matches!(loss(LossKind::L1, &p, &t), Err(PrefError::Numeric(_))));
        assert!(loss(LossKind::L1, &Matrix::zeros(2, 1), &t).is_err());
    }
}
