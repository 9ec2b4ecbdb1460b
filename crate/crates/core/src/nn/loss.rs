use super::Tensor;
use crate::{Error, Result};

/// Floor applied to the true-class probability before taking the log.
pub const CE_FLOOR: f64 = 1e-12;

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean squared elementwise difference.
pub fn loss_mse(predicted: &Tensor, target: &Tensor) -> Result<f64> {
    same_shape(predicted, target)?;
    let n = predicted.data().len().max(1) as f64;
    Ok(predicted
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Loss value and its gradient with respect to `predicted`.
pub fn mse_with_grad(predicted: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    let loss = loss_mse(predicted, target)?;
    let n = predicted.data().len().max(1) as f64;
    let g: Vec<f64> = predicted
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Ok((loss, Tensor::from_vec(predicted.rows(), predicted.cols(), g)?))
}

fn true_class(row: &[f64]) -> Result<usize> {
    let mut idx = None;
    for (i, &t) in row.iter().enumerate() {
        if t == 1.0 {
            if idx.is_some() {
                return Err(Error::InvalidParameter("target row is not one-hot".into()));
            }
            idx = Some(i);
        } else if t != 0.0 {
            return Err(Error::InvalidParameter("target row is not one-hot".into()));
        }
    }
    idx.ok_or_else(|| Error::InvalidParameter("target row is not one-hot".into()))
}

/// Mean of -ln p(true class) over rows, with p floored at [`CE_FLOOR`].
pub fn loss_cross_entropy(predicted: &Tensor, onehot: &Tensor) -> Result<f64> {
    Ok(cross_entropy_with_grad(predicted, onehot)?.0)
}

/// Cross-entropy and its gradient with respect to the probabilities.
pub fn cross_entropy_with_grad(predicted: &Tensor, onehot: &Tensor) -> Result<(f64, Tensor)> {
    same_shape(predicted, onehot)?;
    let b = predicted.rows().max(1) as f64;
    let mut loss = 0.0;
    let mut g = Tensor::zeros(predicted.rows(), predicted.cols());
    for r in 0..predicted.rows() {
        let row = predicted.row(r);
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "prediction row {r} sums to {s}, expected a distribution"
            )));
        }
        let k = true_class(onehot.row(r))?;
        let p = row[k].max(CE_FLOOR);
        loss -= p.ln();
        g.set(r, k, -1.0 / (p * b));
    }
    Ok((loss / b, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_cases() {
        let a = Tensor::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        let b = Tensor::from_vec(1, 2, vec![-1.0, -1.0]).unwrap();
        assert_eq!(loss_mse(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_mse(&a, &b).unwrap(), 4.0);
        assert!(loss_mse(&a, &Tensor::zeros(2, 1)).is_err());
    }

    #[test]
    fn cross_entropy_cases() {
        let u = Tensor::filled(1, 16, 1.0 / 16.0);
        let mut t = Tensor::zeros(1, 16);
        t.set(0, 3, 1.0);
        assert!((loss_cross_entropy(&u, &t).unwrap() - 16f64.ln()).abs() < 1e-12);
        let p = Tensor::from_vec(1, 3, vec![0.7, 0.2, 0.1]).unwrap();
        let t = Tensor::from_vec(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((loss_cross_entropy(&p, &t).unwrap() + 0.7f64.ln()).abs() < 1e-12);
        let p = Tensor::from_vec(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(loss_cross_entropy(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn zero_probability_is_floored() {
        let p = Tensor::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let t = Tensor::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert!((loss_cross_entropy(&p, &t).unwrap() + CE_FLOOR.ln()).abs() < 1e-9);
    }
}
