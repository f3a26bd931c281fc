//! Correlation dimension, largest Lyapunov exponent and trajectory comparison.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_values, row_major};
use crate::error::{Error, Result};
use crate::neighbors::NeighborIndex;
use crate::series::{mean, std_dev, TimeSeries};

/// Fits with r² below this are flagged unreliable.
pub const MIN_R_SQUARED: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LinearFit { slope, intercept: my - slope * mx, r_squared }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionOptions {
    /// Number of radii sampled between the lower and upper pair-fraction bounds.
    pub r_count: usize,
    /// Pairs with `|i - j| <= theiler_window` are excluded.
    pub theiler_window: usize,
    /// Points beyond this are thinned by an even stride.
    pub max_points: usize,
    /// Smallest pair count at the lowest radius.
    pub min_pairs: usize,
    /// Largest correlation sum considered.
    pub max_fraction: f64,
    /// Manual scaling region `(r_lo, r_hi)`, overriding auto-selection.
    pub range: Option<(f64, f64)>,
}

impl Default for DimensionOptions {
    fn default() -> Self {
        Self { r_count: 32, theiler_window: 0, max_points: 5000, min_pairs: 100, max_fraction: 0.05, range: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub dimension: f64,
    pub r_range: (f64, f64),
    pub r_squared: f64,
    pub reliable: bool,
    pub n_points_used: usize,
    /// `(r, C(r))` samples the fit was chosen from.
    pub curve: Vec<(f64, f64)>,
}

fn thin(points: &DMatrix<f64>, max_points: usize) -> (Vec<f64>, Vec<usize>) {
    let n = points.nrows();
    let step = n.div_ceil(max_points.max(1)).max(1);
    let idx: Vec<usize> = (0..n).step_by(step).collect();
    let m = points.ncols();
    let mut data = Vec::with_capacity(idx.len() * m);
    for &i in &idx {
        data.extend(points.row(i).iter());
    }
    (data, idx)
}

/// Grassberger-Procaccia estimate over the rows of `points`.
pub fn correlation_dimension(points: &DMatrix<f64>, options: &DimensionOptions) -> Result<DimensionEstimate> {
    let m = points.ncols();
    let (data, idx) = thin(points, options.max_points);
    let n = idx.len();
    if n < 10 || options.r_count < 4 {
        return Err(Error::InsufficientData(format!("{n} points for correlation dimension")));
    }
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = &data[i * m..(i + 1) * m];
            let (data, idx) = (&data, &idx);
            (i + 1..n).filter(move |&j| idx[j] - idx[i] > options.theiler_window).map(move |j| {
                let b = &data[j * m..(j + 1) * m];
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
        })
        .collect();
    let pairs = dists.len();
    if pairs < options.min_pairs {
        return Err(Error::InsufficientData(format!("{pairs} point pairs outside the Theiler window")));
    }
    dists.par_sort_unstable_by(f64::total_cmp);
    let count_within = |r: f64| dists.partition_point(|&d| d <= r);

    let (r_lo, r_hi) = match options.range {
        Some(range) => range,
        None => {
            let hi_idx = ((options.max_fraction * pairs as f64) as usize).clamp(1, pairs - 1);
            let lo_idx = options.min_pairs.min(hi_idx);
            (dists[lo_idx], dists[hi_idx])
        }
    };
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::NoScalingRegion);
    }
    let k = options.r_count;
    let curve: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let r = (r_lo.ln() + (r_hi / r_lo).ln() * i as f64 / (k - 1) as f64).exp();
            (r, count_within(r) as f64 / pairs as f64)
        })
        .filter(|&(_, c)| c > 0.0)
        .collect();
    let (lr, lc): (Vec<f64>, Vec<f64>) = curve.iter().map(|&(r, c)| (r.ln(), c.ln())).unzip();
    if lr.len() < 4 {
        return Err(Error::NoScalingRegion);
    }

    let (a, b) = if options.range.is_some() {
        (0, lr.len() - 1)
    } else {
        let slopes: Vec<f64> = (1..lr.len()).map(|i| (lc[i] - lc[i - 1]) / (lr[i] - lr[i - 1])).collect();
        let run = stable_run(&slopes, 0.10).ok_or(Error::NoScalingRegion)?;
        (run.0, run.1 + 1)
    };
    let fit = linear_fit(&lr[a..=b], &lc[a..=b]);
    if !fit.slope.is_finite() {
        return Err(Error::NoScalingRegion);
    }
    Ok(DimensionEstimate {
        dimension: fit.slope,
        r_range: (curve[a].0, curve[b].0),
        r_squared: fit.r_squared,
        reliable: fit.r_squared >= MIN_R_SQUARED,
        n_points_used: n,
        curve,
    })
}

/// Longest run of at least three slopes within `+-tol` of their midrange;
/// earlier runs win ties.
fn stable_run(slopes: &[f64], tol: f64) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in 0..slopes.len() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (j, &s) in slopes.iter().enumerate().skip(i) {
            lo = lo.min(s);
            hi = hi.max(s);
            let mid = 0.5 * (lo + hi);
            if !(mid > 0.0 && hi - lo <= 2.0 * tol * mid) {
                break;
            }
            let len = j - i + 1;
            if len >= 3 && best.is_none_or(|(a, b)| len > b - a + 1) {
                best = Some((i, j));
            }
        }
    }
    best
}

/// Dominant period in samples from the largest non-DC periodogram peak.
pub fn mean_period(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("{n} samples for a spectral peak")));
    }
    let mu = mean(values);
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v - mu, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (k, power) = (1..=n / 2)
        .map(|k| (k, buf[k].norm_sqr()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if power == 0.0 {
        return Err(Error::ZeroVariance { channel: 0 });
    }
    Ok(n as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    /// Neighbors must be more than this many samples apart.
    pub mean_period: usize,
    /// Steps over which pair divergence is followed.
    pub horizon: usize,
    /// Steps `[start, end]` of the divergence curve used for the slope.
    pub fit_range: Option<(usize, usize)>,
    pub max_points: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self { mean_period: 1, horizon: 20, fit_range: None, max_points: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Per unit time.
    pub exponent: f64,
    pub fit_range: (usize, usize),
    pub r_squared: f64,
    pub reliable: bool,
    pub pairs_used: usize,
    /// Mean log separation after `k` steps.
    pub divergence: Vec<f64>,
}

/// Rosenstein-style estimate from nearest-neighbor divergence.
pub fn largest_lyapunov(points: &DMatrix<f64>, dt: f64, options: &LyapunovOptions) -> Result<LyapunovEstimate> {
    let h = options.horizon.max(1);
    let n = points.nrows();
    if n <= h + options.mean_period + 2 {
        return Err(Error::InsufficientData(format!("{n} states for horizon {h}")));
    }
    let usable = n - h;
    let m = points.ncols();
    let head = points.rows(0, usable).into_owned();
    let index = NeighborIndex::new(row_major(&head), m);
    let step = usable.div_ceil(options.max_points.max(1)).max(1);
    let all = row_major(points);
    let dist = |i: usize, j: usize| {
        all[i * m..(i + 1) * m].iter().zip(&all[j * m..(j + 1) * m]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };

    let pairs: Vec<(usize, usize)> = (0..usable)
        .into_par_iter()
        .step_by(step)
        .filter_map(|i| {
            index
                .nearest(i, |j| i.abs_diff(j) > options.mean_period)
                .filter(|&(_, d2)| d2 > 0.0)
                .map(|(j, _)| (i, j))
        })
        .collect();
    let mut sums = vec![0.0; h + 1];
    let mut counts = vec![0usize; h + 1];
    for &(i, j) in &pairs {
        for k in 0..=h {
            let d = dist(i + k, j + k);
            if d > 0.0 {
                sums[k] += d.ln();
                counts[k] += 1;
            }
        }
    }
    if pairs.is_empty() || counts.contains(&0) {
        return Err(Error::InsufficientData("no separated neighbor pairs".into()));
    }
    let divergence: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let (a, b) = options.fit_range.unwrap_or((0, h));
    if a >= b || b > h {
        return Err(Error::InvalidInput(format!("Lyapunov fit range ({a}, {b}) outside 0..={h}")));
    }
    let ks: Vec<f64> = (a..=b).map(|k| k as f64).collect();
    let fit = linear_fit(&ks, &divergence[a..=b]);
    Ok(LyapunovEstimate {
        exponent: fit.slope / dt,
        fit_range: (a, b),
        r_squared: fit.r_squared,
        reliable: fit.r_squared >= MIN_R_SQUARED,
        pairs_used: pairs.len(),
        divergence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosMetrics {
    pub correlation_dimension: DimensionEstimate,
    pub largest_lyapunov: LyapunovEstimate,
    pub n_points_used: usize,
}

pub fn chaos_metrics(
    points: &DMatrix<f64>,
    dt: f64,
    dimension: &DimensionOptions,
    lyapunov: &LyapunovOptions,
) -> Result<ChaosMetrics> {
    let correlation_dimension = correlation_dimension(points, dimension)?;
    let largest_lyapunov = largest_lyapunov(points, dt, lyapunov)?;
    let n_points_used = correlation_dimension.n_points_used;
    Ok(ChaosMetrics { correlation_dimension, largest_lyapunov, n_points_used })
}

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelComparison {
    pub label: String,
    pub nrmse: f64,
    /// L1 distance between normalized 64-bin histograms, in `[0, 2]`.
    pub histogram_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub samples: usize,
    pub channels: Vec<ChannelComparison>,
    /// `|D2(reference) - D2(modeled)|` on channel 0 when an embedding is given.
    pub correlation_dimension_delta: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// `(tau, m)` used to embed channel 0 of both series for the dimension delta.
    pub embedding: Option<(usize, usize)>,
    pub dimension: DimensionOptions,
}

/// RMS error over the reference standard deviation; zero error is zero even
/// for a constant reference.
pub fn nrmse(predicted: &[f64], actual: &[f64]) -> f64 {
    let n = predicted.len().min(actual.len());
    if n == 0 {
        return 0.0;
    }
    let rmse = (predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / n as f64).sqrt();
    if rmse == 0.0 {
        return 0.0;
    }
    rmse / std_dev(&actual[..n])
}

pub fn histogram_l1(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = hi - lo;
    let hist = |v: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in v {
            let i = if width > 0.0 { (((x - lo) / width) * bins as f64) as usize } else { 0 };
            h[i.min(bins - 1)] += 1.0 / v.len() as f64;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum()
}

pub fn compare(reference: &TimeSeries, modeled: &TimeSeries, options: &CompareOptions) -> Result<Comparison> {
    if reference.channels() != modeled.channels() {
        return Err(Error::ChannelMismatch { reference: reference.channels(), modeled: modeled.channels() });
    }
    let len = reference.len().min(modeled.len());
    let mut warnings = Vec::new();
    if reference.len() != modeled.len() {
        warnings.push(format!("lengths {} and {} truncated to {len}", reference.len(), modeled.len()));
    }
    let mut channels = Vec::with_capacity(reference.channels());
    for c in 0..reference.channels() {
        let r = &reference.channel(c)?[..len];
        let m = &modeled.channel(c)?[..len];
        channels.push(ChannelComparison {
            label: reference.labels()[c].clone(),
            nrmse: nrmse(m, r),
            histogram_l1: histogram_l1(r, m, HISTOGRAM_BINS),
        });
    }
    let correlation_dimension_delta = match options.embedding {
        None => None,
        Some((tau, dim)) => {
            let estimate = |s: &TimeSeries| -> Result<f64> {
                let values = &s.channel(0)?[..len];
                let states = embed_values(values, tau, dim)?;
                Ok(correlation_dimension(&states, &options.dimension)?.dimension)
            };
            match (estimate(reference), estimate(modeled)) {
                (Ok(a), Ok(b)) => Some((a - b).abs()),
                (Err(e), _) | (_, Err(e)) => {
                    warnings.push(format!("correlation dimension unavailable: {e}"));
                    None
                }
            }
        }
    };
    Ok(Comparison { samples: len, channels, correlation_dimension_delta, warnings })
}
