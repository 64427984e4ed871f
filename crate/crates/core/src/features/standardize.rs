//! Per-dimension centering and range scaling fitted on training data.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizationMode {
    None,
    MeanOnly,
    #[default]
    Standardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mode: StandardizationMode,
    pub mean: Vec<f64>,
    /// `max - min` per dimension, with 0 replaced by 1.
    pub scale: Vec<f64>,
}

impl Standardization {
    /// # Panics
    ///
    /// If `train` is empty or its rows differ in length.
    pub fn fit(train: &[Vec<f64>], mode: StandardizationMode) -> Self {
        assert!(!train.is_empty(), "cannot fit standardization on no data");
        let dim = train[0].len();
        let n = train.len() as f64;
        let mut mean = vec![0.0; dim];
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in train {
            assert_eq!(row.len(), dim, "ragged feature matrix");
            for (k, &v) in row.iter().enumerate() {
                mean[k] += v;
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let scale = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h - l == 0.0 { 1.0 } else { h - l })
            .collect();
        Standardization { mode, mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Standardization {
            mode: StandardizationMode::None,
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_in_place(&self, v: &mut [f64]) {
        match self.mode {
            StandardizationMode::None => {}
            StandardizationMode::MeanOnly => {
                v.iter_mut().zip(&self.mean).for_each(|(x, m)| *x -= m);
            }
            StandardizationMode::Standardize => {
                for ((x, m), s) in v.iter_mut().zip(&self.mean).zip(&self.scale) {
                    *x = (*x - m) / s;
                }
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.apply_in_place(&mut out);
        out
    }
}
