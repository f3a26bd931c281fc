//! Pipeline stages shared by the individual commands and `pipeline`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::dynamics::{fixture, simulate, spectral_radius, FixtureId};
use crate::embedding::{
    autocorrelation_delay, average_mutual_information, default_bins, delay_embed, false_nearest_neighbors,
    AmiCurve, DelayEmbedding, DelayEstimate, FnnCurve,
};
use crate::error::{Error, Result};
use crate::identify::{fit_model, BasisGrid, EmbeddingInfo, FitOptions, FitReport, FittedModel, ForcingBasis, StateSpaceModel};
use crate::io::{
    embedding_from_json, embedding_to_json, fmt_csv, format_csv, model_to_json, read_csv, read_model, read_text,
    write_text, EmbeddingFile, SCHEMA_VERSION,
};
use crate::series::TimeSeries;
use crate::symmetry::{
    classify_symmetry, default_window, extract_segments, ga_search_detailed, GaConfig, SymmetryReport,
    SymmetryTransform,
};
use crate::validate::{
    chaos_metrics, compare, mean_period, ChaosMetrics, CompareOptions, Comparison, DimensionOptions,
    LyapunovOptions,
};

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn curve_csv(header: [&str; 2], rows: impl Iterator<Item = (f64, f64)>) -> String {
    let rows: Vec<(f64, f64)> = rows.collect();
    let m = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { rows[i].0 } else { rows[i].1 });
    format_csv(&[header[0].to_string(), header[1].to_string()], &m, &[])
}

// ---------------------------------------------------------------- embed

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedSummary {
    pub channel: usize,
    pub tau: usize,
    pub m: usize,
    /// `ami`, `acf` (AMI had no minimum) or `config`.
    pub tau_method: String,
    /// `fnn`, `fnn_max` (no dimension met the threshold) or `config`.
    pub m_method: String,
    pub acf_lag: usize,
    pub acf_fallback: bool,
    pub ami_first_minimum: usize,
    pub ami_fallback: bool,
    pub ami_bins: usize,
    pub fnn: Vec<(usize, f64)>,
    pub states: usize,
    pub warnings: Vec<String>,
}

pub struct EmbedStage {
    pub summary: EmbedSummary,
    pub embedding: DelayEmbedding,
    pub acf: DelayEstimate,
    pub ami: AmiCurve,
    pub fnn: Option<FnnCurve>,
}

pub fn stage_embed(series: &TimeSeries, config: &RunConfig) -> Result<EmbedStage> {
    let e = &config.embedding;
    let channel = config.channel;
    let len = series.len();
    let max_lag = e.max_lag.min(len.saturating_sub(2)).max(1);
    let mut warnings = Vec::new();
    if max_lag < e.max_lag {
        warnings.push(format!("max_lag reduced to {max_lag} for {len} samples"));
    }
    let acf = autocorrelation_delay(series, channel, max_lag)?;
    let bins = e.bins.unwrap_or_else(|| default_bins(len));
    let ami = average_mutual_information(series, channel, max_lag, bins)?;
    if acf.fallback {
        warnings.push(format!("autocorrelation stayed above 1/e up to lag {max_lag}"));
    }
    if ami.fallback {
        warnings.push("mutual information has no local minimum; using the autocorrelation delay".into());
    }
    let (tau, tau_method) = match e.tau {
        Some(t) => (t, "config"),
        None if ami.fallback => (ami.first_minimum, "acf"),
        None => (ami.first_minimum, "ami"),
    };

    let (m, m_method, fnn) = match e.m {
        Some(m) => (m, "config", None),
        None => {
            let curve = false_nearest_neighbors(series, channel, tau, e.m_max, &config.fnn_params())?;
            match curve.first_below(e.fnn_threshold) {
                Some(m) => (m, "fnn", Some(curve)),
                None => {
                    warnings.push(format!(
                        "no finite dimension: false-neighbor fraction stays above {} up to m = {}",
                        e.fnn_threshold, e.m_max
                    ));
                    (e.m_max, "fnn_max", Some(curve))
                }
            }
        }
    };
    let embedding = delay_embed(series, channel, tau, m)?;
    let summary = EmbedSummary {
        channel,
        tau,
        m,
        tau_method: tau_method.into(),
        m_method: m_method.into(),
        acf_lag: acf.lag,
        acf_fallback: acf.fallback,
        ami_first_minimum: ami.first_minimum,
        ami_fallback: ami.fallback,
        ami_bins: ami.bins,
        fnn: fnn.as_ref().map(|c| c.fractions.clone()).unwrap_or_default(),
        states: embedding.len(),
        warnings,
    };
    Ok(EmbedStage { summary, embedding, acf, ami, fnn })
}

/// `embedding.json` plus plot-ready diagnostics.
pub fn write_embed_artifacts(stage: &EmbedStage, series: &TimeSeries, out: &Path) -> Result<()> {
    let s = &stage.summary;
    let file = EmbeddingFile { series: series.clone(), tau: s.tau, m: s.m, channel: s.channel };
    write_text(&out.join("embedding.json"), &embedding_to_json(&file))?;
    let acf = stage.acf.acf.iter().enumerate().map(|(l, &v)| (l as f64, v));
    write_text(&out.join("acf.csv"), &curve_csv(["lag", "acf"], acf))?;
    let ami = stage.ami.values.iter().map(|&(l, v)| (l as f64, v));
    write_text(&out.join("ami.csv"), &curve_csv(["lag", "ami"], ami))?;
    if let Some(fnn) = &stage.fnn {
        let rows = fnn.fractions.iter().map(|&(m, f)| (m as f64, f));
        write_text(&out.join("fnn.csv"), &curve_csv(["m", "fnn_fraction"], rows))?;
    }
    let header: Vec<String> = (0..s.m).map(|j| format!("s(k+{}*{})", j, s.tau)).collect();
    write_text(&out.join("embedding.csv"), &format_csv(&header, stage.embedding.states(), &[]))?;
    write_text(&out.join("embed.json"), &to_json(s))
}

// ---------------------------------------------------------------- symmetry

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryFile {
    pub schema_version: u32,
    pub kind: String,
    pub window: usize,
    pub stride: usize,
    pub segments: usize,
    pub diameter: f64,
    pub evaluations: usize,
    pub ga: GaConfig,
    pub best: Option<SymmetryTransform>,
    pub report: SymmetryReport,
}

pub fn stage_symmetry(embedding: &DelayEmbedding, config: &RunConfig) -> Result<SymmetryFile> {
    let ga = config.ga_config();
    let (auto_window, _) = default_window(embedding.tau(), embedding.dimension());
    let window = ga.segment_window.unwrap_or(auto_window);
    let stride = ga.segment_stride.unwrap_or((window / 2).max(1));
    let segments = extract_segments(embedding, window, stride)?;
    let outcome = ga_search_detailed(&segments, &ga)?;
    let report = classify_symmetry(&outcome.accepted, outcome.threshold);
    Ok(SymmetryFile {
        schema_version: SCHEMA_VERSION,
        kind: "symmetry_report".into(),
        window,
        stride,
        segments: segments.len(),
        diameter: outcome.diameter,
        evaluations: outcome.evaluations,
        ga,
        best: outcome.best,
        report,
    })
}

pub fn read_symmetry(path: &Path) -> Result<SymmetryFile> {
    let file: SymmetryFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Parse(format!("symmetry JSON {}: {e}", path.display())))?;
    if file.kind != "symmetry_report" || file.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported symmetry file kind {:?}", file.kind)));
    }
    Ok(file)
}

// ---------------------------------------------------------------- identify

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub basis: ForcingBasis,
    pub spectral_radius: f64,
    pub output_channels: Vec<usize>,
    pub report: FitReport,
    pub warnings: Vec<String>,
}

pub fn output_channels(config: &RunConfig) -> Vec<usize> {
    config.output_channels.clone().unwrap_or_else(|| vec![config.channel])
}

pub fn stage_identify(
    embedding: &DelayEmbedding,
    series: &TimeSeries,
    symmetry: &SymmetryFile,
    config: &RunConfig,
) -> Result<(FittedModel, FitSummary)> {
    let outputs = output_channels(config);
    if let Some(&bad) = outputs.iter().find(|&&c| c >= series.channels()) {
        return Err(Error::InvalidInput(format!("output channel {bad} not in a {}-channel series", series.channels())));
    }
    let y = series.select(&outputs)?;
    let rows = embedding.len();
    let id = &config.identify;
    let options = FitOptions {
        ridge_lambda: id.ridge,
        grid: Some(BasisGrid::with_resolution(rows, series.dt(), id.omega_points, id.lambda_points, id.phase_points)),
        segment_spacing: symmetry.stride,
        state_dim: id.state_dim,
        ridge_fallback: id.ridge_fallback,
    };
    let report = &symmetry.report;
    let mut fitted = fit_model(embedding.states(), &y, report, &report.transforms, series.dt(), &options)?;
    fitted.model = fitted.model.clone().with_embedding(EmbeddingInfo {
        tau: embedding.tau(),
        m: embedding.dimension(),
        channel: embedding.source_channel(),
        outputs: outputs.clone(),
    });
    let model = &fitted.model;
    let summary = FitSummary {
        n: model.n(),
        p: model.p(),
        q: model.q(),
        basis: model.basis().clone(),
        spectral_radius: spectral_radius(model.a()),
        output_channels: outputs,
        report: fitted.report.clone(),
        warnings: fitted.warnings.clone(),
    };
    Ok((fitted, summary))
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub spectral_radius: f64,
    pub one_step: Comparison,
    pub free_run_steps: usize,
    /// Step at which the free run stopped being finite.
    pub free_run_divergence_step: Option<usize>,
    pub free_run_max_abs: Option<f64>,
    pub source_max_abs: f64,
    /// Finite and within ten times the source's largest coordinate.
    pub free_run_bounded: bool,
    pub free_run: Option<Comparison>,
    pub source_metrics: Option<ChaosMetrics>,
    pub model_metrics: Option<ChaosMetrics>,
    pub correlation_dimension_delta: Option<f64>,
    pub warnings: Vec<String>,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn series_of(values: DMatrix<f64>, dt: f64, labels: Vec<String>) -> Result<TimeSeries> {
    TimeSeries::new(values, dt, labels)
}

pub fn stage_validate(series: &TimeSeries, model: &StateSpaceModel, config: &RunConfig) -> Result<ValidationReport> {
    let info = model
        .embedding()
        .ok_or_else(|| Error::InvalidInput("model carries no embedding parameters to rebuild its states".into()))?;
    if info.outputs.len() != model.q() || info.outputs.iter().any(|&c| c >= series.channels()) {
        return Err(Error::ChannelMismatch { reference: series.channels(), modeled: model.q() });
    }
    if model.n() > info.m {
        return Err(Error::InvalidInput(format!("model state dimension {} exceeds embedding dimension {}", model.n(), info.m)));
    }
    let embedding = delay_embed(series, info.channel, info.tau, info.m)?;
    let states = embedding.states().columns(0, model.n()).into_owned();
    let rows = states.nrows();
    if rows < 3 {
        return Err(Error::InsufficientData(format!("{rows} states for validation")));
    }
    let labels: Vec<String> = info.outputs.iter().map(|&c| series.labels()[c].clone()).collect();
    let y = series.select(&info.outputs)?.values().rows(0, rows).into_owned();
    let dt = model.dt();
    let mut warnings = Vec::new();

    // one-step: y(k+1) from the reconstructed x(k)
    let mut predicted = DMatrix::zeros(rows - 1, model.q());
    for k in 0..rows - 1 {
        let x = DVector::from_iterator(model.n(), states.row(k).iter().copied());
        let next = model.step(k, &x);
        predicted.row_mut(k).copy_from(&model.output(&next).transpose());
    }
    let reference_next = series_of(y.rows(1, rows - 1).into_owned(), dt, labels.clone())?;
    let one_step = compare(&reference_next, &series_of(predicted, dt, labels.clone())?, &CompareOptions::default())?;

    let steps = config.validate.free_run_steps.unwrap_or(rows - 1);
    let x0 = DVector::from_iterator(model.n(), states.row(0).iter().copied());
    let source_max_abs = max_abs(&states);
    let (free_run, divergence, run_max, run_states) = match simulate(model, &x0, steps) {
        Ok(traj) => {
            let n = rows.min(traj.outputs.nrows());
            let modeled = series_of(traj.outputs.rows(0, n).into_owned(), dt, labels.clone())?;
            let reference = series_of(y.rows(0, n).into_owned(), dt, labels)?;
            let cmp = compare(&reference, &modeled, &CompareOptions::default())?;
            (Some(cmp), None, Some(max_abs(&traj.states)), Some(traj.states))
        }
        Err(Error::NonFiniteState { step }) => {
            warnings.push(format!("free run diverged at step {step}"));
            (None, Some(step), None, None)
        }
        Err(e) => return Err(e),
    };
    let bounded = run_max.is_some_and(|m| m <= 10.0 * source_max_abs);
    if divergence.is_none() && !bounded {
        warnings.push("free run left ten times the source range".into());
    }

    let v = &config.validate;
    let metrics = |points: &DMatrix<f64>, period: usize| -> Result<ChaosMetrics> {
        let dim = DimensionOptions {
            theiler_window: info.tau * info.m,
            max_points: v.max_points,
            ..DimensionOptions::default()
        };
        let lyap = LyapunovOptions {
            mean_period: period,
            horizon: v.lyapunov_horizon,
            max_points: v.max_points,
            ..LyapunovOptions::default()
        };
        chaos_metrics(points, dt, &dim, &lyap)
    };
    let (mut source_metrics, mut model_metrics) = (None, None);
    if v.metrics {
        let period = mean_period(&series.channel(info.channel)?)?.round().max(1.0) as usize;
        match metrics(&states, period) {
            Ok(m) => source_metrics = Some(m),
            Err(e) => warnings.push(format!("source chaos metrics unavailable: {e}")),
        }
        if let Some(run) = run_states.as_ref().filter(|_| bounded) {
            match metrics(run, period) {
                Ok(m) => model_metrics = Some(m),
                Err(e) => warnings.push(format!("model chaos metrics unavailable: {e}")),
            }
        }
    }
    let correlation_dimension_delta = match (&source_metrics, &model_metrics) {
        (Some(a), Some(b)) => Some((a.correlation_dimension.dimension - b.correlation_dimension.dimension).abs()),
        _ => None,
    };
    Ok(ValidationReport {
        spectral_radius: spectral_radius(model.a()),
        one_step,
        free_run_steps: steps,
        free_run_divergence_step: divergence,
        free_run_max_abs: run_max,
        source_max_abs,
        free_run_bounded: bounded,
        free_run,
        source_metrics,
        model_metrics,
        correlation_dimension_delta,
        warnings,
    })
}

// ---------------------------------------------------------------- simulate

pub struct SimulationOutput {
    pub csv: String,
    pub spectral_radius: f64,
}

pub fn simulate_csv(model: &StateSpaceModel, x0: &DVector<f64>, steps: usize) -> Result<SimulationOutput> {
    let rho = spectral_radius(model.a());
    let traj = simulate(model, x0, steps)?;
    let (n, q) = (model.n(), model.q());
    let mut values = DMatrix::zeros(traj.states.nrows(), n + q);
    values.columns_mut(0, n).copy_from(&traj.states);
    values.columns_mut(n, q).copy_from(&traj.outputs);
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).chain((0..q).map(|i| format!("y{i}"))).collect();
    let footer = vec![format!("spectral_radius = {}", fmt_csv(rho)), format!("steps = {steps}")];
    Ok(SimulationOutput { csv: format_csv(&header, &values, &footer), spectral_radius: rho })
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSummary {
    pub path: String,
    pub rows: usize,
    pub channels: usize,
    pub labels: Vec<String>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub input: InputSummary,
    pub embedding: EmbedSummary,
    pub symmetry: SymmetryFile,
    pub model_path: String,
    pub fit: FitSummary,
    pub validation: ValidationReport,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage; the only part of a report that varies between reruns.
    pub timings: BTreeMap<String, f64>,
}

pub struct PipelineResult {
    pub report: RunReport,
    pub out_dir: PathBuf,
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineResult> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let out = config.out_dir();
    let input_path = config.input_path()?;
    let series = read_csv(&input_path, config.dt)?;
    if config.channel >= series.channels() {
        return Err(Error::InvalidInput(format!("channel {} not in a {}-channel series", config.channel, series.channels())));
    }
    lap("load", &mut timings);

    let embed = stage_embed(&series, config)?;
    write_embed_artifacts(&embed, &series, &out)?;
    lap("embed", &mut timings);

    let symmetry = stage_symmetry(&embed.embedding, config)?;
    write_text(&out.join("symmetry.json"), &to_json(&symmetry))?;
    lap("symmetry", &mut timings);

    let (fitted, fit) = stage_identify(&embed.embedding, &series, &symmetry, config)?;
    write_text(&out.join("model.json"), &model_to_json(&fitted.model))?;
    write_text(&out.join("fit.json"), &to_json(&fit))?;
    lap("identify", &mut timings);

    let validation = stage_validate(&series, &fitted.model, config)?;
    write_text(&out.join("validation.json"), &to_json(&validation))?;
    lap("validate", &mut timings);

    let warnings = embed
        .summary
        .warnings
        .iter()
        .chain(&symmetry.report.warnings)
        .chain(&fit.warnings)
        .chain(&validation.warnings)
        .cloned()
        .collect();
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        kind: "run_report".into(),
        config: config.clone(),
        input: InputSummary {
            path: config.input.clone().unwrap_or_default(),
            rows: series.len(),
            channels: series.channels(),
            labels: series.labels().to_vec(),
            dt: series.dt(),
        },
        embedding: embed.summary,
        symmetry,
        model_path: "model.json".into(),
        fit,
        validation,
        warnings,
        timings,
    };
    write_text(&out.join("report.json"), &to_json(&report))?;
    Ok(PipelineResult { report, out_dir: out })
}

// ---------------------------------------------------------------- file helpers

pub fn load_embedding(path: &Path) -> Result<(EmbeddingFile, DelayEmbedding)> {
    let file = embedding_from_json(&read_text(path)?)?;
    let embedding = delay_embed(&file.series, file.channel, file.tau, file.m)?;
    Ok((file, embedding))
}

pub fn load_model_or_fixture(model: Option<&Path>, fixture_name: Option<&str>) -> Result<StateSpaceModel> {
    match (model, fixture_name) {
        (Some(path), None) => read_model(path),
        (None, Some(name)) => Ok(fixture(FixtureId::from_name(name)?)?.model),
        _ => Err(Error::InvalidInput("give exactly one of --model or --fixture".into())),
    }
}

pub(crate) fn report_json<T: Serialize>(value: &T) -> String {
    to_json(value)
}
