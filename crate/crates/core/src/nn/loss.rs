use super::Matrix;
use crate::error::{Error, Result};

/// Mean squared error over every element and its gradient wrt `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(
            "mse_loss",
            format!("{:?}", target.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    let n = pred.len().max(1) as f64;
    let diff = pred.sub(target);
    let loss = diff.sum_sq() / n;
    let grad = diff.map(|d| 2.0 * d / n);
    Ok((loss, grad))
}

/// MSE between two equally long vectors.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dim("mse", target.len(), pred.len()));
    }
    let n = pred.len().max(1) as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let t = Matrix::from_rows(&[[0.3, -1.0]]).unwrap();
        assert_eq!(mse_loss(&t, &t).unwrap().0, 0.0);
        let p = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let z = Matrix::zeros(1, 2);
        assert_eq!(mse_loss(&p, &z).unwrap().0, 0.5);
        assert!(mse_loss(&p, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = Matrix::from_rows(&[[0.4, -0.7, 1.3], [2.0, 0.1, -0.2]]).unwrap();
        let t = Matrix::from_rows(&[[0.0, 0.5, 1.0], [1.5, -0.5, 0.0]]).unwrap();
        let (_, g) = mse_loss(&p, &t).unwrap();
        let h = 1e-5;
        for i in 0..p.len() {
            let mut up = p.clone();
            up.as_mut_slice()[i] += h;
            let mut dn = p.clone();
            dn.as_mut_slice()[i] -= h;
            let fd = (mse_loss(&up, &t).unwrap().0 - mse_loss(&dn, &t).unwrap().0) / (2.0 * h);
            assert!((fd - g.as_slice()[i]).abs() < 1e-9);
        }
    }
}
