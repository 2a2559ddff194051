use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalerKind {
    ZScore,
    MinMax,
    Constant { k: f64 },
}

/// Per-column affine map `v ↦ (v − shift) / divisor`. A zero divisor
/// marks a degenerate column whose output is always 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalerKind,
    shift: Vec<f64>,
    divisor: Vec<f64>,
    fitted: bool,
}

impl Scaler {
    pub fn new(kind: ScalerKind) -> Self {
        Self {
            kind,
            shift: Vec::new(),
            divisor: Vec::new(),
            fitted: false,
        }
    }

    /// MinMax with declared bounds instead of fitted ones.
    pub fn min_max_fixed(cols: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Config(format!("min-max bounds must satisfy lo < hi, got ({lo}, {hi})")));
        }
        Ok(Self {
            kind: ScalerKind::MinMax,
            shift: vec![lo; cols],
            divisor: vec![hi - lo; cols],
            fitted: true,
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    /// Fits per-column statistics. Only ever pass training rows.
    pub fn fit(&mut self, train: &Matrix) -> Result<()> {
        if train.rows() == 0 {
            return Err(Error::InvalidInput("cannot fit a scaler on zero rows".into()));
        }
        train.ensure_finite("scaler fit input")?;
        let cols = train.cols();
        let (shift, divisor) = match self.kind {
            ScalerKind::ZScore => {
                let mean = train.col_means();
                let n = train.rows() as f64;
                let mut var = vec![0.0; cols];
                for row in train.row_iter() {
                    for (c, v) in row.iter().enumerate() {
                        var[c] += (v - mean[c]).powi(2);
                    }
                }
                let std = var.iter().map(|s| (s / n).sqrt()).collect();
                (mean, std)
            }
            ScalerKind::MinMax => {
                let mut lo = vec![f64::INFINITY; cols];
                let mut hi = vec![f64::NEG_INFINITY; cols];
                for row in train.row_iter() {
                    for (c, &v) in row.iter().enumerate() {
                        lo[c] = lo[c].min(v);
                        hi[c] = hi[c].max(v);
                    }
                }
                let range = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
                (lo, range)
            }
            ScalerKind::Constant { k } => {
                if !(k.is_finite() && k != 0.0) {
                    return Err(Error::Config(format!("constant scale must be finite and non-zero, got {k}")));
                }
                (vec![0.0; cols], vec![1.0 / k; cols])
            }
        };
        self.shift = shift;
        self.divisor = divisor
            .into_iter()
            .map(|d: f64| if d.abs() < 1e-12 { 0.0 } else { d })
            .collect();
        self.fitted = true;
        Ok(())
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if !self.fitted {
            return Err(Error::State("scaler used before fit".into()));
        }
        if x.cols() != self.shift.len() {
            return Err(Error::dim("scaler input", self.shift.len(), x.cols()));
        }
        Ok(())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if self.divisor[c] == 0.0 {
                    0.0
                } else {
                    (*v - self.shift[c]) / self.divisor[c]
                };
            }
        }
        Ok(out)
    }

    /// Inverse map; degenerate columns return their fitted shift.
    pub fn inverse(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.divisor[c] + self.shift[c];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted(kind: ScalerKind, x: &Matrix) -> Scaler {
        let mut s = Scaler::new(kind);
        s.fit(x).unwrap();
        s
    }

    #[test]
    fn examples() {
        let x = Matrix::column(&[0.0, 50.0, 100.0]);
        assert_eq!(fitted(ScalerKind::MinMax, &x).transform(&x).unwrap().as_slice(), &[0.0, 0.5, 1.0]);

        let c = Matrix::column(&[3.0, 3.0, 3.0]);
        let z = fitted(ScalerKind::ZScore, &c).transform(&c).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(fitted(ScalerKind::MinMax, &c).transform(&c).unwrap().as_slice(), &[0.0; 3]);

        let e = Matrix::column(&[0.0031]);
        let s = fitted(ScalerKind::Constant { k: 100.0 }, &e);
        assert!((s.transform(&e).unwrap().as_slice()[0] - 0.31).abs() < 1e-15);
    }

    #[test]
    fn unfitted_and_wrong_width_error() {
        let x = Matrix::zeros(2, 2);
        assert!(Scaler::new(ScalerKind::ZScore).transform(&x).is_err());
        let s = fitted(ScalerKind::ZScore, &Matrix::from_rows(&[[1.0, 2.0], [3.0, 5.0]]).unwrap());
        assert!(s.transform(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let x = Matrix::from_rows(&[[1.0, -2.0], [3.0, 5.0], [0.5, 0.0]]).unwrap();
        for kind in [ScalerKind::ZScore, ScalerKind::MinMax, ScalerKind::Constant { k: 100.0 }] {
            let s = fitted(kind, &x);
            let back = s.inverse(&s.transform(&x).unwrap()).unwrap();
            for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn test_rows_never_move_parameters() {
        let train = Matrix::from_rows(&[[1.0], [2.0], [4.0]]).unwrap();
        let s1 = fitted(ScalerKind::ZScore, &train);
        let mut s2 = Scaler::new(ScalerKind::ZScore);
        s2.fit(&train).unwrap();
        let _ = s2.transform(&Matrix::column(&[1e9])).unwrap();
        assert_eq!(s1, s2);
        let json = serde_json::to_string(&s1).unwrap();
        assert_eq!(serde_json::from_str::<Scaler>(&json).unwrap(), s1);
    }
}
