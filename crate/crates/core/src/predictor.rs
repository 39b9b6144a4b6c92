use crate::error::{Error, Result};

/// Anything that maps a feature row to a scalar target estimate.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    /// Predict a single row. The row length is assumed to match
    /// [`Predictor::n_features`]; use [`Predictor::predict`] for checked input.
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let expected = self.n_features();
        if let Some(bad) = rows.iter().find(|r| r.len() != expected) {
            return Err(Error::Arity { expected, found: bad.len() });
        }
        Ok(rows.iter().map(|r| self.predict_row(r)).collect())
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (**self).predict_row(row)
    }
}
