//! Delay and dimension estimation, and the delay-coordinate reconstruction
//! itself.
//!
//! The usual recipe is: pick `tau` at the first minimum of the average mutual
//! information (falling back to the 1/e decay of the autocorrelation), pick
//! `m` as the first dimension where the false-nearest-neighbor fraction drops
//! below 5%, then call [`delay_embed`].

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::neighbors::NeighborIndex;
use crate::series::{mean, std_dev, TimeSeries};

/// Reconstructed state vectors `states[i][j] = s[i + j * tau]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayEmbedding {
    states: DMatrix<f64>,
    tau: usize,
    m: usize,
    source_channel: usize,
}

impl DelayEmbedding {
    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    pub fn source_channel(&self) -> usize {
        self.source_channel
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayEstimate {
    pub lag: usize,
    /// Set when the autocorrelation never fell below 1/e within `max_lag`.
    pub fallback: bool,
    /// Normalized autocorrelation for lags `0..=max_lag`.
    pub acf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmiCurve {
    /// `(lag, ami)` in nats for lags `0..=max_lag`.
    pub values: Vec<(usize, f64)>,
    pub bins: usize,
    /// First strict local minimum, or the autocorrelation lag when there is none.
    pub first_minimum: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FnnParams {
    pub r_tol: f64,
    pub a_tol: f64,
    /// Candidate neighbors closer than this in time are skipped.
    pub theiler_window: usize,
    /// Upper bound on the number of query points per dimension; queries are
    /// spread evenly over the embedding. `None` queries every point.
    pub max_queries: Option<usize>,
}

impl Default for FnnParams {
    fn default() -> Self {
        Self { r_tol: 10.0, a_tol: 2.0, theiler_window: 0, max_queries: Some(2000) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FnnCurve {
    /// `(m, fraction)` for `m = 1..=m_max`.
    pub fractions: Vec<(usize, f64)>,
}

impl FnnCurve {
    /// First dimension whose false-neighbor fraction is below `threshold`.
    /// `None` means no finite dimension was found up to `m_max`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.fractions.iter().find(|(_, f)| *f < threshold).map(|(m, _)| *m)
    }
}

fn checked_channel(series: &TimeSeries, channel: usize) -> Result<Vec<f64>> {
    let values = series.channel(channel)?;
    if std_dev(&values) == 0.0 {
        return Err(Error::ZeroVariance { channel });
    }
    Ok(values)
}

/// Biased normalized autocorrelation for lags `0..=max_lag`.
pub fn autocorrelation(values: &[f64], max_lag: usize) -> Vec<f64> {
    let mu = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - mu).collect();
    let var: f64 = centered.iter().map(|v| v * v).sum();
    (0..=max_lag)
        .map(|lag| {
            let cov: f64 = centered.iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum();
            cov / var
        })
        .collect()
}

/// Smallest lag at which the autocorrelation first drops below 1/e.
pub fn autocorrelation_delay(series: &TimeSeries, channel: usize, max_lag: usize) -> Result<DelayEstimate> {
    let values = checked_channel(series, channel)?;
    if max_lag == 0 || max_lag >= values.len() {
        return Err(Error::LagOutOfRange { max_lag, len: values.len() });
    }
    let acf = autocorrelation(&values, max_lag);
    let threshold = (-1.0f64).exp();
    match (1..=max_lag).find(|&lag| acf[lag] < threshold) {
        Some(lag) => Ok(DelayEstimate { lag, fallback: false, acf }),
        None => Ok(DelayEstimate { lag: max_lag, fallback: true, acf }),
    }
}

/// Bin count used when none is given: `ceil(sqrt(n))`, capped at 64.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(2, 64)
}

pub(crate) fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    values
        .iter()
        .map(|v| {
            if width > 0.0 {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Plug-in mutual information (nats) between paired bin labels.
pub(crate) fn histogram_mi(x: &[usize], y: &[usize], bins: usize) -> f64 {
    let n = x.len() as f64;
    let mut joint = vec![0u32; bins * bins];
    let mut px = vec![0u32; bins];
    let mut py = vec![0u32; bins];
    for (&a, &b) in x.iter().zip(y) {
        joint[a * bins + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (pxy * n * n / (px[a] as f64 * py[b] as f64)).ln();
            }
        }
    }
    mi
}

/// Average mutual information between `s[k]` and `s[k + lag]`, estimated from
/// an equal-width histogram over the channel's range.
///
/// Every lag uses the same `N - max_lag` pairs, so the first member of each
/// pair always has the same marginal and `ami(0)` bounds every other lag.
pub fn average_mutual_information(
    series: &TimeSeries,
    channel: usize,
    max_lag: usize,
    bins: usize,
) -> Result<AmiCurve> {
    if bins < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 bins, got {bins}")));
    }
    let values = checked_channel(series, channel)?;
    let len = values.len();
    if max_lag == 0 || max_lag + 1 >= len {
        return Err(Error::LagOutOfRange { max_lag, len });
    }
    let labels = bin_indices(&values, bins);
    let pairs = len - max_lag;
    let values: Vec<(usize, f64)> = (0..=max_lag)
        .map(|lag| (lag, histogram_mi(&labels[..pairs], &labels[lag..lag + pairs], bins)))
        .collect();
    let minimum = (1..max_lag).find(|&l| values[l].1 < values[l - 1].1 && values[l].1 < values[l + 1].1);
    let (first_minimum, fallback) = match minimum {
        Some(lag) => (lag, false),
        None => (autocorrelation_delay(series, channel, max_lag)?.lag, true),
    };
    Ok(AmiCurve { values, bins, first_minimum, fallback })
}

/// Fraction of false nearest neighbors for `m = 1..=m_max` (Kennel criteria).
///
/// A neighbor pair at distance `R` in dimension `m` is false when the extra
/// coordinate gap `g` satisfies `g / R > r_tol` or `g > a_tol * std(s)`.
pub fn false_nearest_neighbors(
    series: &TimeSeries,
    channel: usize,
    tau: usize,
    m_max: usize,
    params: &FnnParams,
) -> Result<FnnCurve> {
    if !(params.r_tol > 0.0 && params.a_tol > 0.0) {
        return Err(Error::InvalidInput("FNN tolerances must be positive".into()));
    }
    if tau == 0 || m_max == 0 {
        return Err(Error::InvalidInput("tau and m_max must be positive".into()));
    }
    let values = series.channel(channel)?;
    let len = values.len();
    if len < m_max * tau + 2 {
        return Err(Error::InsufficientData(format!(
            "{len} samples cannot be embedded at m = {} with tau = {tau}",
            m_max + 1
        )));
    }
    let sigma = std_dev(&values);
    let mut fractions = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let rows = len - m * tau;
        let mut data = Vec::with_capacity(rows * m);
        for i in 0..rows {
            data.extend((0..m).map(|j| values[i + j * tau]));
        }
        let index = NeighborIndex::new(data, m);
        let queries = params.max_queries.map_or(rows, |q| q.clamp(1, rows));
        let mut considered = 0usize;
        let mut false_count = 0usize;
        for q in 0..queries {
            let i = q * rows / queries;
            let Some((j, d2)) = index.nearest(i, |j| j.abs_diff(i) > params.theiler_window) else {
                continue;
            };
            considered += 1;
            let r = d2.sqrt();
            let gap = (values[i + m * tau] - values[j + m * tau]).abs();
            let is_false = if r > 0.0 { gap / r > params.r_tol } else { gap > 0.0 };
            if is_false || gap > params.a_tol * sigma {
                false_count += 1;
            }
        }
        if considered == 0 {
            return Err(Error::InsufficientData(format!("no neighbor pairs at m = {m}")));
        }
        fractions.push((m, false_count as f64 / considered as f64));
    }
    Ok(FnnCurve { fractions })
}

pub(crate) fn embed_values(values: &[f64], tau: usize, m: usize) -> Result<DMatrix<f64>> {
    if tau == 0 || m == 0 {
        return Err(Error::InvalidInput("tau and m must be positive".into()));
    }
    let span = (m - 1) * tau;
    if values.len() <= span {
        return Err(Error::InsufficientData(format!(
            "series of length {} gives no state vectors at m = {m}, tau = {tau}",
            values.len()
        )));
    }
    let rows = values.len() - span;
    Ok(DMatrix::from_fn(rows, m, |i, j| values[i + j * tau]))
}

/// Takens delay-coordinate reconstruction of one channel.
pub fn delay_embed(series: &TimeSeries, channel: usize, tau: usize, m: usize) -> Result<DelayEmbedding> {
    let values = series.channel(channel)?;
    let states = embed_values(&values, tau, m)?;
    Ok(DelayEmbedding { states, tau, m, source_channel: channel })
}

impl DelayEmbedding {
    /// Rebuild from stored states, checking the delay structure.
    pub fn from_parts(states: DMatrix<f64>, tau: usize, m: usize, source_channel: usize) -> Result<Self> {
        if states.ncols() != m || states.nrows() == 0 || tau == 0 {
            return Err(Error::InvalidInput(format!(
                "states are {}x{}, expected m = {m} columns",
                states.nrows(),
                states.ncols()
            )));
        }
        for j in 1..m {
            for i in 0..states.nrows().saturating_sub(j * tau) {
                if states[(i, j)] != states[(i + j * tau, 0)] {
                    return Err(Error::InvalidInput(format!(
                        "state ({i}, {j}) breaks the delay structure"
                    )));
                }
            }
        }
        Ok(Self { states, tau, m, source_channel })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn embed_small_cases() {
        let ts = TimeSeries::from_samples(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0).unwrap();
        let e = delay_embed(&ts, 0, 1, 2).unwrap();
        assert_eq!(e.states(), &DMatrix::from_row_slice(4, 2, &[1., 2., 2., 3., 3., 4., 4., 5.]));

        let s: Vec<f64> = (0..10).map(|k| k as f64 * 1.5).collect();
        let e = delay_embed(&TimeSeries::from_samples(&s, 1.0).unwrap(), 0, 2, 3).unwrap();
        assert_eq!(e.len(), 6);
        assert_eq!(e.states().row(0).iter().copied().collect::<Vec<_>>(), vec![s[0], s[2], s[4]]);

        assert!(matches!(delay_embed(&ts, 0, 3, 3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn acf_of_sinusoid() {
        let s: Vec<f64> = (0..1000).map(|k| (2.0 * std::f64::consts::PI * k as f64 / 100.0).sin()).collect();
        let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
        let est = autocorrelation_delay(&ts, 0, 50).unwrap();
        let analytic = (100.0 / (2.0 * std::f64::consts::PI) * (-1.0f64).exp().acos()).ceil() as usize;
        assert!(est.lag.abs_diff(analytic) <= 1, "lag {} vs {analytic}", est.lag);
        assert!(!est.fallback);
    }

    #[test]
    fn acf_errors_and_fallback() {
        let ts = TimeSeries::from_samples(&[5.0; 20], 1.0).unwrap();
        assert!(matches!(autocorrelation_delay(&ts, 0, 5), Err(Error::ZeroVariance { channel: 0 })));
        let ramp: Vec<f64> = (0..20).map(f64::from).collect();
        let ts = TimeSeries::from_samples(&ramp, 1.0).unwrap();
        assert!(matches!(autocorrelation_delay(&ts, 0, 20), Err(Error::LagOutOfRange { .. })));
        let est = autocorrelation_delay(&ts, 0, 2).unwrap();
        assert!(est.fallback);
        assert_eq!(est.lag, 2);
    }

    #[test]
    fn acf_white_noise_matches_double_loop() {
        let s = noise(10_000, 11);
        let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
        let est = autocorrelation_delay(&ts, 0, 10).unwrap();
        assert_eq!(est.lag, 1);
        // brute-force double loop
        let mu = s.iter().sum::<f64>() / s.len() as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..s.len() {
            den += (s[k] - mu) * (s[k] - mu);
            if k + 1 < s.len() {
                num += (s[k] - mu) * (s[k + 1] - mu);
            }
        }
        assert!((est.acf[1] - num / den).abs() < 1e-12);
        assert!((num / den).abs() < (-1.0f64).exp());
    }

    #[test]
    fn ami_entropy_bound_and_lag_zero() {
        let s = noise(2000, 5);
        let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
        let curve = average_mutual_information(&ts, 0, 40, 16).unwrap();
        // lag 0 is the histogram entropy of the first N - max_lag samples
        let labels = bin_indices(&s, 16);
        let n = s.len() - 40;
        let mut counts = [0usize; 16];
        for &l in &labels[..n] {
            counts[l] += 1;
        }
        let h: f64 = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.ln()
            })
            .sum();
        assert!((curve.values[0].1 - h).abs() < 1e-12);
        assert!(curve.values.iter().all(|(_, v)| *v <= curve.values[0].1 + 1e-12));
    }

    #[test]
    fn ami_noise_is_at_shuffle_null_level() {
        let s = noise(4000, 17);
        let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
        let bins = 16;
        let curve = average_mutual_information(&ts, 0, 50, bins).unwrap();
        let observed = curve.values[50].1;

        // permutation null: shuffle the second member of each pair
        use rand::seq::SliceRandom;
        let labels = bin_indices(&s, bins);
        let n = s.len() - 50;
        let x = &labels[..n];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let null: Vec<f64> = (0..200)
            .map(|_| {
                let mut y = labels[50..50 + n].to_vec();
                y.shuffle(&mut rng);
                histogram_mi(x, &y, bins)
            })
            .collect();
        let mu = mean(&null);
        let sd = std_dev(&null);
        assert!((observed - mu).abs() < 3.0 * sd, "ami {observed}, null {mu} ± {sd}");
    }

    #[test]
    fn ami_errors() {
        let ts = TimeSeries::from_samples(&[2.0; 30], 1.0).unwrap();
        assert!(matches!(average_mutual_information(&ts, 0, 5, 8), Err(Error::ZeroVariance { .. })));
        let ts = TimeSeries::from_samples(&noise(30, 1), 1.0).unwrap();
        assert!(matches!(average_mutual_information(&ts, 0, 30, 8), Err(Error::LagOutOfRange { .. })));
        assert!(average_mutual_information(&ts, 0, 5, 1).is_err());
    }

    #[test]
    fn fnn_ramp_is_unfolded() {
        let s: Vec<f64> = (0..500).map(f64::from).collect();
        let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
        let curve = false_nearest_neighbors(&ts, 0, 1, 3, &FnnParams::default()).unwrap();
        assert_eq!(curve.fractions[0], (1, 0.0));
    }

    #[test]
    fn fnn_noise_has_no_finite_dimension() {
        let ts = TimeSeries::from_samples(&noise(3000, 23), 1.0).unwrap();
        let curve = false_nearest_neighbors(&ts, 0, 1, 6, &FnnParams::default()).unwrap();
        assert!(curve.fractions.iter().all(|(_, f)| *f > 0.05), "{:?}", curve.fractions);
        assert_eq!(curve.first_below(0.05), None);
    }

    #[test]
    fn fnn_insufficient_data() {
        let ts = TimeSeries::from_samples(&noise(10, 2), 1.0).unwrap();
        assert!(matches!(
            false_nearest_neighbors(&ts, 0, 3, 4, &FnnParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn from_parts_checks_structure() {
        let ts = TimeSeries::from_samples(&noise(40, 4), 1.0).unwrap();
        let e = delay_embed(&ts, 0, 3, 3).unwrap();
        let rebuilt = DelayEmbedding::from_parts(e.states().clone(), 3, 3, 0).unwrap();
        assert_eq!(rebuilt, e);
        let mut broken = e.states().clone();
        broken[(0, 1)] += 1.0;
        assert!(DelayEmbedding::from_parts(broken, 3, 3, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn embedding_is_lossless(
            s in proptest::collection::vec(-1e3f64..1e3, 2..120),
            tau in 1usize..6,
            m in 1usize..5,
        ) {
            let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
            match delay_embed(&ts, 0, tau, m) {
                Ok(e) => {
                    let rows = s.len() - (m - 1) * tau;
                    proptest::prop_assert_eq!(e.len(), rows);
                    for i in 0..rows {
                        for j in 0..m {
                            proptest::prop_assert_eq!(e.states()[(i, j)], s[i + j * tau]);
                        }
                    }
                    let first: Vec<f64> = e.states().column(0).iter().copied().collect();
                    proptest::prop_assert_eq!(&first[..], &s[..rows]);
                }
                Err(_) => proptest::prop_assert!(s.len() <= (m - 1) * tau),
            }
        }

        #[test]
        fn ami_lag_zero_is_maximal(
            s in proptest::collection::vec(-10f64..10.0, 20..200),
            bins in 2usize..20,
        ) {
            let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
            let max_lag = s.len() / 3;
            if let Ok(curve) = average_mutual_information(&ts, 0, max_lag, bins) {
                let a0 = curve.values[0].1;
                for (_, v) in &curve.values {
                    proptest::prop_assert!(*v <= a0 + 1e-12);
                }
                let again = average_mutual_information(&ts, 0, max_lag, bins).unwrap();
                proptest::prop_assert_eq!(curve, again);
            }
        }

        #[test]
        fn fnn_fractions_in_unit_interval(
            s in proptest::collection::vec(-10f64..10.0, 40..200),
            tau in 1usize..4,
        ) {
            let ts = TimeSeries::from_samples(&s, 1.0).unwrap();
            if let Ok(curve) = false_nearest_neighbors(&ts, 0, tau, 4, &FnnParams::default()) {
                for (_, f) in &curve.fractions {
                    proptest::prop_assert!((0.0..=1.0).contains(f));
                }
            }
        }
    }
}
