use serde::{Deserialize, Serialize};

use super::{FeatureError, Result};

/// Per-feature min-max scaling into `[0, 1]`, learned on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(FeatureError::EmptyFit)?.as_ref();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in rows {
            let row = row.as_ref();
            if row.len() != min.len() {
                return Err(FeatureError::DimensionMismatch { line: None, expected: min.len(), found: row.len() });
            }
            for (j, &x) in row.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(FeatureScaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `(x - min) / (max - min)` clamped to `[0, 1]`; constant features map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let s = FeatureScaler::fit(&[[0.0], [10.0]]).unwrap();
        assert_eq!(s.apply(&[5.0]), [0.5]);
        assert_eq!(s.apply(&[20.0]), [1.0]);
        assert_eq!(s.apply(&[-3.0]), [0.0]);
        let c = FeatureScaler::fit(&[[2.0], [2.0]]).unwrap();
        assert_eq!(c.apply(&[2.0]), [0.0]);
        assert!(matches!(FeatureScaler::fit::<[f64; 1]>(&[]), Err(FeatureError::EmptyFit)));
        assert!(FeatureScaler::fit(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn unit_range_and_rank_order(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 1..20),
                                     probe in proptest::collection::vec(-1e4f64..1e4, 3)) {
            let s = FeatureScaler::fit(&rows).unwrap();
            prop_assert!(s.apply(&probe).iter().all(|v| (0.0..=1.0).contains(v)));
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
            for j in 0..3 {
                for a in 0..rows.len() {
                    for b in 0..rows.len() {
                        if rows[a][j] < rows[b][j] {
                            prop_assert!(scaled[a][j] < scaled[b][j]);
                        }
                    }
                }
            }
        }
    }
}
