//! Flat `key = value` run configuration with dotted section prefixes.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::embedding::FnnParams;
use crate::error::{Error, Result};
use crate::symmetry::GaConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingSettings {
    pub tau: Option<usize>,
    pub m: Option<usize>,
    pub max_lag: usize,
    pub m_max: usize,
    pub bins: Option<usize>,
    pub fnn_r_tol: f64,
    pub fnn_a_tol: f64,
    pub fnn_threshold: f64,
    pub theiler: usize,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        let fnn = FnnParams::default();
        Self {
            tau: None,
            m: None,
            max_lag: 100,
            m_max: 8,
            bins: None,
            fnn_r_tol: fnn.r_tol,
            fnn_a_tol: fnn.a_tol,
            fnn_threshold: 0.05,
            theiler: fnn.theiler_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub threshold: f64,
    pub window: Option<usize>,
    pub stride: Option<usize>,
}

impl Default for GaSettings {
    fn default() -> Self {
        let ga = GaConfig::default();
        Self {
            population: ga.population,
            generations: ga.generations,
            mutation_rate: ga.mutation_rate,
            crossover_rate: ga.crossover_rate,
            threshold: ga.residual_threshold,
            window: ga.segment_window,
            stride: ga.segment_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifySettings {
    pub ridge: f64,
    /// Retry a rank-deficient unregularized fit with a tiny ridge.
    pub ridge_fallback: bool,
    pub state_dim: Option<usize>,
    pub omega_points: usize,
    pub lambda_points: usize,
    pub phase_points: usize,
}

impl Default for IdentifySettings {
    fn default() -> Self {
        Self { ridge: 0.0, ridge_fallback: true, state_dim: None, omega_points: 32, lambda_points: 17, phase_points: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateSettings {
    /// Correlation dimension and Lyapunov exponent of source and free run.
    pub metrics: bool,
    /// Free-run length; `None` runs as long as the fitted record.
    pub free_run_steps: Option<usize>,
    pub lyapunov_horizon: usize,
    pub max_points: usize,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self { metrics: true, free_run_steps: None, lyapunov_horizon: 20, max_points: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Input CSV as written in the config; relative paths resolve against the config file.
    pub input: Option<String>,
    pub dt: f64,
    pub channel: usize,
    /// Channels fitted as outputs `y`; `None` means the embedded channel.
    pub output_channels: Option<Vec<usize>>,
    pub seed: u64,
    pub out_dir: String,
    pub embedding: EmbeddingSettings,
    pub ga: GaSettings,
    pub identify: IdentifySettings,
    pub validate: ValidateSettings,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            dt: 1.0,
            channel: 0,
            output_channels: None,
            seed: 0,
            out_dir: "out".into(),
            embedding: EmbeddingSettings::default(),
            ga: GaSettings::default(),
            identify: IdentifySettings::default(),
            validate: ValidateSettings::default(),
            base_dir: PathBuf::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for key {key}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key {key}")));
            }
            config.set(key, value)?;
        }
        config.check()?;
        Ok(config)
    }

    /// Apply one setting; unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (e, g, i, v) = (&mut self.embedding, &mut self.ga, &mut self.identify, &mut self.validate);
        match key {
            "input" => self.input = Some(value.to_string()),
            "dt" => self.dt = parse(key, value)?,
            "channel" => self.channel = parse(key, value)?,
            "output_channels" => {
                self.output_channels = if value == "auto" { None } else { Some(parse_list(key, value)?) }
            }
            "seed" => self.seed = parse(key, value)?,
            "out_dir" => self.out_dir = value.to_string(),
            "embedding.tau" => e.tau = parse_auto(key, value)?,
            "embedding.m" => e.m = parse_auto(key, value)?,
            "embedding.max_lag" => e.max_lag = parse(key, value)?,
            "embedding.m_max" => e.m_max = parse(key, value)?,
            "embedding.bins" => e.bins = parse_auto(key, value)?,
            "embedding.fnn_r_tol" => e.fnn_r_tol = parse(key, value)?,
            "embedding.fnn_a_tol" => e.fnn_a_tol = parse(key, value)?,
            "embedding.fnn_threshold" => e.fnn_threshold = parse(key, value)?,
            "embedding.theiler" => e.theiler = parse(key, value)?,
            "ga.population" => g.population = parse(key, value)?,
            "ga.generations" => g.generations = parse(key, value)?,
            "ga.mutation_rate" => g.mutation_rate = parse(key, value)?,
            "ga.crossover_rate" => g.crossover_rate = parse(key, value)?,
            "ga.threshold" => g.threshold = parse(key, value)?,
            "ga.window" => g.window = parse_auto(key, value)?,
            "ga.stride" => g.stride = parse_auto(key, value)?,
            "identify.ridge" => i.ridge = parse(key, value)?,
            "identify.ridge_fallback" => i.ridge_fallback = parse(key, value)?,
            "identify.state_dim" => i.state_dim = parse_auto(key, value)?,
            "identify.omega_points" => i.omega_points = parse(key, value)?,
            "identify.lambda_points" => i.lambda_points = parse(key, value)?,
            "identify.phase_points" => i.phase_points = parse(key, value)?,
            "validate.metrics" => v.metrics = parse(key, value)?,
            "validate.free_run_steps" => v.free_run_steps = parse_auto(key, value)?,
            "validate.lyapunov_horizon" => v.lyapunov_horizon = parse(key, value)?,
            "validate.max_points" => v.max_points = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.identify.ridge < 0.0 || !self.identify.ridge.is_finite() {
            return Err(Error::Config("identify.ridge must be nonnegative".into()));
        }
        if self.embedding.max_lag == 0 || self.embedding.m_max == 0 {
            return Err(Error::Config("embedding.max_lag and embedding.m_max must be positive".into()));
        }
        if self.embedding.tau == Some(0) || self.embedding.m == Some(0) {
            return Err(Error::Config("embedding.tau and embedding.m must be positive".into()));
        }
        self.ga_config().validate()
    }

    pub fn ga_config(&self) -> GaConfig {
        GaConfig {
            population: self.ga.population,
            generations: self.ga.generations,
            mutation_rate: self.ga.mutation_rate,
            crossover_rate: self.ga.crossover_rate,
            seed: self.seed,
            residual_threshold: self.ga.threshold,
            segment_window: self.ga.window,
            segment_stride: self.ga.stride,
        }
    }

    pub fn fnn_params(&self) -> FnnParams {
        FnnParams {
            r_tol: self.embedding.fnn_r_tol,
            a_tol: self.embedding.fnn_a_tol,
            theiler_window: self.embedding.theiler,
            ..FnnParams::default()
        }
    }

    pub fn input_path(&self) -> Result<PathBuf> {
        let input = self.input.as_deref().ok_or_else(|| Error::Config("no input given".into()))?;
        Ok(self.base_dir.join(input))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.base_dir.join(&self.out_dir)
    }
}
