use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(y: &[f64], yp: &[f64], min: usize) -> Result<()> {
    if y.len() != yp.len() {
        return Err(Error::shape(format!("{} predictions", y.len()), yp.len()));
    }
    if y.len() < min {
        return Err(Error::TooShort { len: y.len(), min });
    }
    Ok(())
}

fn sse(y: &[f64], yp: &[f64]) -> f64 {
    y.iter().zip(yp).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Mean squared error `(1/N) sum (y_i - yp_i)^2`.
pub fn mse(y: &[f64], yp: &[f64]) -> Result<f64> {
    check_pair(y, yp, 1)?;
    Ok(sse(y, yp) / y.len() as f64)
}

/// Coefficient of determination `1 - sum (y_i - yp_i)^2 / sum (y_i - mean)^2`.
pub fn r_squared(y: &[f64], yp: &[f64]) -> Result<f64> {
    check_pair(y, yp, 2)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if tss == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(1.0 - sse(y, yp) / tss)
}

/// Mean squared second difference of a uniformly spaced series.
pub fn roughness(series: &[f64]) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::TooShort {
            len: series.len(),
            min: 3,
        });
    }
    let total: f64 = series
        .windows(3)
        .map(|w| {
            let d = w[2] - 2.0 * w[1] + w[0];
            d * d
        })
        .sum();
    Ok(total / (series.len() - 2) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMetrics {
    pub name: String,
    /// `None` when the labels in this column are constant.
    pub r2: Option<f64>,
    pub mse: f64,
}

/// Per-output R² and MSE in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub columns: Vec<ColumnMetrics>,
    pub count: usize,
}

impl MetricReport {
    /// Metrics of flat row-major `labels` and `predictions` with one column per name.
    pub fn compute<S: AsRef<str>>(names: &[S], labels: &[f64], predictions: &[f64]) -> Result<Self> {
        let width = names.len();
        if width == 0 || labels.len() % width != 0 {
            return Err(Error::shape(format!("rows of {width} labels"), labels.len()));
        }
        if labels.len() != predictions.len() {
            return Err(Error::shape(format!("{} predictions", labels.len()), predictions.len()));
        }
        let count = labels.len() / width;
        let column = |v: &[f64], c: usize| -> Vec<f64> { v.iter().skip(c).step_by(width).copied().collect() };
        let columns = names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let (y, yp) = (column(labels, c), column(predictions, c));
                let r2 = match r_squared(&y, &yp) {
                    Ok(r) => Some(r),
                    Err(Error::ZeroVariance | Error::TooShort { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok(ColumnMetrics {
                    name: name.as_ref().to_owned(),
                    r2,
                    mse: mse(&y, &yp)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { columns, count })
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMetrics> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn r2(&self, name: &str) -> Option<f64> {
        self.column(name).and_then(|c| c.r2)
    }

    /// Mean R² over the columns where it is defined.
    pub fn mean_r2(&self) -> Option<f64> {
        let defined: Vec<f64> = self.columns.iter().filter_map(|c| c.r2).collect();
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap(), 0.5);
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap(), 1.0 / 3.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[4.0], &[4.0]).unwrap(), 0.0);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(r_squared(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ZeroVariance)));
        assert!(matches!(
            r_squared(&[1.0], &[1.0]),
            Err(Error::TooShort { len: 1, min: 2 })
        ));
        assert!(mse(&[1.0, 2.0], &[1.0]).is_err());
        assert!(r_squared(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() < 0.0);
    }

    #[test]
    fn roughness_examples() {
        assert_eq!(roughness(&[0.0, 1.0, 0.0]).unwrap(), 4.0);
        assert_eq!(roughness(&[1.0, 3.0, 5.0, 7.0]).unwrap(), 0.0);
        assert!(matches!(
            roughness(&[1.0, 2.0]),
            Err(Error::TooShort { len: 2, min: 3 })
        ));
    }

    #[test]
    fn report_per_column() {
        let labels = [1.0, 5.0, 2.0, 5.0, 3.0, 5.0];
        let preds = [1.0, 5.0, 2.0, 4.0, 2.0, 6.0];
        let r = MetricReport::compute(&["a", "b"], &labels, &preds).unwrap();
        assert_eq!(r.count, 3);
        assert_eq!(r.r2("a"), Some(0.5));
        assert_eq!(r.column("b").unwrap().r2, None);
        assert_eq!(r.column("b").unwrap().mse, 2.0 / 3.0);
        assert_eq!(r.mean_r2(), Some(0.5));
    }

    proptest! {
        #[test]
        fn cross_metric_identity(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..200)) {
            let (y, yp): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            prop_assume!(tss > 1e-6);
            let r2 = r_squared(&y, &yp).unwrap();
            let via_mse = 1.0 - mse(&y, &yp).unwrap() * y.len() as f64 / tss;
            prop_assert!((r2 - via_mse).abs() <= 1e-12 * (1.0 + r2.abs()));
        }

        #[test]
        fn mse_is_permutation_invariant(pairs in proptest::collection::vec((-10f64..10.0, -10f64..10.0), 1..50), rot in 0usize..50) {
            let (y, yp): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let k = rot % y.len();
            let mut y2 = y.clone();
            let mut yp2 = yp.clone();
            y2.rotate_left(k);
            yp2.rotate_left(k);
            prop_assert!((mse(&y, &yp).unwrap() - mse(&y2, &yp2).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn roughness_is_translation_invariant(xs in proptest::collection::vec(-10f64..10.0, 3..60), c in -100f64..100.0) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let (a, b) = (roughness(&xs).unwrap(), roughness(&shifted).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }
    }
}
