//! Uniformly sampled observations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A uniformly sampled, possibly multichannel, record. Rows are the discrete
/// time index `k`, columns are channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: DMatrix<f64>,
    dt: f64,
    labels: Vec<String>,
}

impl TimeSeries {
    pub fn new(values: DMatrix<f64>, dt: f64, labels: Vec<String>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("sampling interval must be positive, got {dt}")));
        }
        if values.nrows() < 2 {
            return Err(Error::InsufficientData(format!(
                "a time series needs at least 2 samples, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidInput("a time series needs at least one channel".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidInput(format!("non-finite sample at row {row}, channel {col}")));
        }
        let labels = if labels.is_empty() {
            (0..values.ncols()).map(|c| format!("x{c}")).collect()
        } else if labels.len() != values.ncols() {
            return Err(Error::LengthMismatch { left: labels.len(), right: values.ncols() });
        } else {
            labels
        };
        Ok(Self { values, dt, labels })
    }

    /// Single-channel series from a sample vector.
    pub fn from_samples(samples: &[f64], dt: f64) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(samples.len(), 1, samples), dt, Vec::new())
    }

    /// Multichannel series from equally long channel vectors.
    pub fn from_channels(channels: &[Vec<f64>], dt: f64, labels: Vec<String>) -> Result<Self> {
        let len = channels.first().map_or(0, Vec::len);
        if let Some(bad) = channels.iter().find(|c| c.len() != len) {
            return Err(Error::LengthMismatch { left: len, right: bad.len() });
        }
        let values = DMatrix::from_fn(len, channels.len(), |r, c| channels[c][r]);
        Self::new(values, dt, labels)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Samples of one channel, copied out contiguously.
    pub fn channel(&self, channel: usize) -> Result<Vec<f64>> {
        if channel >= self.channels() {
            return Err(Error::InvalidInput(format!(
                "channel {channel} out of range ({} channels)",
                self.channels()
            )));
        }
        Ok(self.values.column(channel).iter().copied().collect())
    }

    /// Keep the first `len` rows.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        let len = len.min(self.len());
        Self::new(self.values.rows(0, len).into_owned(), self.dt, self.labels.clone())
    }

    /// Restrict to the given channels, in order.
    pub fn select(&self, channels: &[usize]) -> Result<Self> {
        let cols = channels.iter().map(|&c| self.channel(c)).collect::<Result<Vec<_>>>()?;
        let labels = channels.iter().map(|&c| self.labels[c].clone()).collect();
        Self::from_channels(&cols, self.dt, labels)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(values: &[f64]) -> f64 {
    let mu = mean(values);
    (values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}
