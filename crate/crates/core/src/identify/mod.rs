//! Least-squares identification of `x(k+1) = A x(k) + B phi(k)`, `y = C x`.

pub mod basis;
pub mod model;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

pub use basis::{BasisTerm, ForcingBasis};
pub use model::{EmbeddingInfo, StateSpaceModel};

use crate::dynamics::simulate;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::symmetry::{seed_basis_parameters, SymmetryReport, SymmetryTransform};
use crate::validate::nrmse;

/// Singular-value ratio below which an unregularized solve is refused.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Regressors `Z` (rows `[x(k)^T, phi(k)^T]`) and targets `X+` (rows `x(k+1)^T`).
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub z: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Ratio of extreme singular values of `Z`.
    pub condition_estimate: f64,
    pub ridge_lambda: f64,
    pub largest_singular_value: f64,
}

impl LeastSquaresSolution {
    /// `[A | B]`
    pub fn coefficients(&self) -> DMatrix<f64> {
        let (n, p) = (self.a.nrows(), self.b.ncols());
        let mut w = DMatrix::zeros(n, n + p);
        w.columns_mut(0, n).copy_from(&self.a);
        w.columns_mut(n, p).copy_from(&self.b);
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    /// RMS of one-step regression residuals, per state coordinate.
    pub residual_rms: Vec<f64>,
    /// One-step output prediction error over the reference std, per output.
    pub one_step_nrmse: Vec<f64>,
    /// Free-run output error over the reference std, per output. Empty when
    /// the free run diverged.
    pub free_run_nrmse: Vec<f64>,
    pub free_run_divergence_step: Option<usize>,
    pub condition_estimate: f64,
    pub ridge_lambda: f64,
    /// Set when the ridge weight was raised automatically after a rank failure.
    pub ridge_fallback: bool,
}

/// Candidate values for the free basis parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisGrid {
    pub omega: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phase: Vec<f64>,
}

impl BasisGrid {
    /// 32 log-spaced frequencies in `[2 pi / (N dt), pi / dt]`, 17 rates in
    /// `+-2 ln(1e3) / (N dt)`, 8 phases in `[0, 2 pi)`.
    pub fn default_for(rows: usize, dt: f64) -> Self {
        Self::with_resolution(rows, dt, 32, 17, 8)
    }

    pub fn with_resolution(rows: usize, dt: f64, omega_points: usize, lambda_points: usize, phase_points: usize) -> Self {
        let span = rows as f64 * dt;
        let (lo, hi) = ((2.0 * std::f64::consts::PI / span).ln(), (std::f64::consts::PI / dt).ln());
        let omega = spaced(lo, hi, omega_points).into_iter().map(f64::exp).collect();
        let bound = 2.0 * 1e3f64.ln() / span;
        let lambda = spaced(-bound, bound, lambda_points);
        let phase = (0..phase_points)
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / phase_points as f64)
            .collect();
        Self { omega, lambda, phase }
    }
}

fn spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

fn basis_columns(basis: &ForcingBasis, rows: usize, dt: f64) -> DMatrix<f64> {
    let mut cols = DMatrix::zeros(rows, basis.len());
    let mut phi = vec![0.0; basis.len()];
    for k in 0..rows {
        basis.eval_into(k as f64 * dt, &mut phi);
        for (j, v) in phi.iter().enumerate() {
            cols[(k, j)] = *v;
        }
    }
    cols
}

/// Assemble the regression for `x(k+1) = A x(k) + B phi(k dt)` over
/// `k = 0..N-2`.
pub fn build_regression(states: &DMatrix<f64>, basis: &ForcingBasis, dt: f64) -> Result<Regression> {
    let (rows, m) = states.shape();
    let p = basis.len();
    if rows < m + p + 1 {
        return Err(Error::InsufficientData(format!(
            "{} regression rows for {} unknowns per coordinate",
            rows.saturating_sub(1),
            m + p
        )));
    }
    let n = rows - 1;
    let mut z = DMatrix::zeros(n, m + p);
    z.columns_mut(0, m).copy_from(&states.rows(0, n));
    if p > 0 {
        z.columns_mut(m, p).copy_from(&basis_columns(basis, n, dt));
    }
    let targets = states.rows(1, n).into_owned();
    Ok(Regression { z, targets })
}

/// Minimize `||Z W^T - X+||_F^2 + ridge ||W||_F^2` and split `W = [A | B]`.
///
/// `Z` is reduced by a Householder QR and the small triangular factor is
/// solved through its SVD, so the normal equations are never formed.
pub fn solve_least_squares(z: &DMatrix<f64>, targets: &DMatrix<f64>, ridge_lambda: f64) -> Result<LeastSquaresSolution> {
    let w = solve_weights(z, targets, ridge_lambda)?;
    let n = targets.ncols();
    if z.ncols() < n {
        return Err(Error::InvalidInput(format!(
            "regressor has {} columns, fewer than the {n} state coordinates",
            z.ncols()
        )));
    }
    let p = z.ncols() - n;
    Ok(LeastSquaresSolution {
        a: w.weights.columns(0, n).into_owned(),
        b: w.weights.columns(n, p).into_owned(),
        condition_estimate: w.condition,
        ridge_lambda,
        largest_singular_value: w.sigma_max,
    })
}

struct Weights {
    /// `q x cols`
    weights: DMatrix<f64>,
    condition: f64,
    sigma_max: f64,
}

fn solve_weights(z: &DMatrix<f64>, targets: &DMatrix<f64>, ridge_lambda: f64) -> Result<Weights> {
    let (rows, cols) = z.shape();
    if targets.nrows() != rows {
        return Err(Error::LengthMismatch { left: rows, right: targets.nrows() });
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("ridge weight must be nonnegative, got {ridge_lambda}")));
    }
    if cols == 0 {
        return Err(Error::InvalidInput("regressor has no columns".into()));
    }
    if rows <= cols && ridge_lambda == 0.0 {
        return Err(Error::InsufficientData(format!("{rows} rows for {cols} unknowns")));
    }
    // Reduce to a square (or short) problem with the same solution set.
    let (small, rhs) = if rows > cols {
        let qr = z.clone().qr();
        let mut qtx = targets.clone();
        qr.q_tr_mul(&mut qtx);
        (qr.r(), qtx.rows(0, cols).into_owned())
    } else {
        (z.clone(), targets.clone())
    };
    let svd = small.svd(true, true);
    let s = &svd.singular_values;
    let sigma_max = s.max();
    let sigma_min = if rows >= cols { s.min() } else { 0.0 };
    let ratio = if sigma_max > 0.0 { sigma_min / sigma_max } else { 0.0 };
    if ridge_lambda == 0.0 && ratio < RANK_TOLERANCE {
        return Err(Error::RankDeficient { ratio });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let filter = DVector::from_iterator(
        s.len(),
        s.iter().map(|&sv| if sv > 0.0 { sv / (sv * sv + ridge_lambda) } else { 0.0 }),
    );
    // W^T = V diag(filter) U^T rhs
    let mut ut_rhs = u.transpose() * rhs;
    for (i, f) in filter.iter().enumerate() {
        ut_rhs.row_mut(i).scale_mut(*f);
    }
    let w_t = v_t.transpose() * ut_rhs;
    let condition = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    Ok(Weights { weights: w_t.transpose(), condition, sigma_max })
}

/// Per-column RMS of `Z W^T - X+`.
pub fn residual_rms(regression: &Regression, solution: &LeastSquaresSolution) -> Vec<f64> {
    let resid = &regression.z * solution.coefficients().transpose() - &regression.targets;
    let rows = resid.nrows() as f64;
    resid.column_iter().map(|c| (c.norm_squared() / rows).sqrt()).collect()
}

/// Least-squares output map `C` with `y(k) ~ C x(k)`; output row `k` pairs
/// with state row `k`.
pub fn fit_output_map(states: &DMatrix<f64>, outputs: &TimeSeries, ridge_lambda: f64) -> Result<DMatrix<f64>> {
    let rows = states.nrows();
    if outputs.len() < rows {
        return Err(Error::LengthMismatch { left: outputs.len(), right: rows });
    }
    let y = outputs.values().rows(0, rows).into_owned();
    Ok(solve_weights(states, &y, ridge_lambda)?.weights)
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Omega(usize),
    Phase(usize),
    Lambda(usize),
}

fn free_slots(basis: &ForcingBasis) -> Vec<Slot> {
    let mut slots = Vec::new();
    for (i, term) in basis.terms.iter().enumerate() {
        match term {
            BasisTerm::Sinusoid { .. } => {
                slots.push(Slot::Omega(i));
                slots.push(Slot::Phase(i));
            }
            BasisTerm::Exponential { .. } => slots.push(Slot::Lambda(i)),
            _ => {}
        }
    }
    slots
}

fn candidate(basis: &ForcingBasis, slots: &[Slot], grid: &BasisGrid, mut flat: usize) -> ForcingBasis {
    let mut out = basis.clone();
    // last slot varies fastest
    for slot in slots.iter().rev() {
        let values = match slot {
            Slot::Omega(_) => &grid.omega,
            Slot::Phase(_) => &grid.phase,
            Slot::Lambda(_) => &grid.lambda,
        };
        let v = values[flat % values.len()];
        flat /= values.len();
        match (*slot, &mut out.terms[slot_term(*slot)]) {
            (Slot::Omega(_), BasisTerm::Sinusoid { omega, .. }) => *omega = v,
            (Slot::Phase(_), BasisTerm::Sinusoid { phase, .. }) => *phase = v,
            (Slot::Lambda(_), BasisTerm::Exponential { rate }) => *rate = v,
            _ => unreachable!("slot kinds follow term kinds"),
        }
    }
    out
}

fn slot_term(slot: Slot) -> usize {
    match slot {
        Slot::Omega(i) | Slot::Phase(i) | Slot::Lambda(i) => i,
    }
}

/// Grid search over the free basis parameters (sinusoid frequency and phase,
/// exponential rate), keeping the candidate with the smallest one-step
/// regression residual. Ties go to the lowest grid index.
pub fn refine_basis(
    states: &DMatrix<f64>,
    basis: &ForcingBasis,
    dt: f64,
    grid: &BasisGrid,
    ridge_lambda: f64,
) -> Result<(ForcingBasis, FitReport)> {
    let horizon = states.nrows();
    basis.check_horizon(dt, horizon)?;
    let slots = free_slots(basis);
    for slot in &slots {
        let empty = match slot {
            Slot::Omega(_) => grid.omega.is_empty(),
            Slot::Phase(_) => grid.phase.is_empty(),
            Slot::Lambda(_) => grid.lambda.is_empty(),
        };
        if empty {
            return Err(Error::InvalidInput(format!("empty grid for basis parameter {slot:?}")));
        }
    }
    if slots.iter().any(|s| matches!(s, Slot::Lambda(_))) {
        ForcingBasis::new(grid.lambda.iter().map(|&r| BasisTerm::exponential(r)).collect())
            .check_horizon(dt, horizon)?;
    }
    let total: usize = slots
        .iter()
        .map(|s| match s {
            Slot::Omega(_) => grid.omega.len(),
            Slot::Phase(_) => grid.phase.len(),
            Slot::Lambda(_) => grid.lambda.len(),
        })
        .product();

    let evaluate = |flat: usize| -> Result<(f64, ForcingBasis)> {
        let cand = candidate(basis, &slots, grid, flat);
        let reg = build_regression(states, &cand, dt)?;
        let sol = solve_least_squares(&reg.z, &reg.targets, ridge_lambda)?;
        let sse: f64 = residual_rms(&reg, &sol).iter().map(|r| r * r).sum();
        Ok((sse, cand))
    };

    let results: Vec<(usize, Result<(f64, ForcingBasis)>)> =
        (0..total).into_par_iter().map(|flat| (flat, evaluate(flat))).collect();
    let mut best: Option<(f64, usize, ForcingBasis)> = None;
    let mut first_err = None;
    for (flat, res) in results {
        match res {
            Ok((sse, cand)) if sse.is_finite() => {
                if best.as_ref().is_none_or(|(b, _, _)| sse < *b) {
                    best = Some((sse, flat, cand));
                }
            }
            Ok(_) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((_, _, chosen)) = best else {
        return Err(first_err.unwrap_or(Error::InvalidInput("no finite grid candidate".into())));
    };
    let reg = build_regression(states, &chosen, dt)?;
    let sol = solve_least_squares(&reg.z, &reg.targets, ridge_lambda)?;
    let report = FitReport {
        residual_rms: residual_rms(&reg, &sol),
        one_step_nrmse: Vec::new(),
        free_run_nrmse: Vec::new(),
        free_run_divergence_step: None,
        condition_estimate: sol.condition_estimate,
        ridge_lambda,
        ridge_fallback: false,
    };
    Ok((chosen, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOptions {
    pub ridge_lambda: f64,
    /// `None` uses [`BasisGrid::default_for`].
    pub grid: Option<BasisGrid>,
    /// Sample offset between consecutive segments, for seeding basis rates.
    pub segment_spacing: usize,
    /// Use only the first `n` embedding coordinates as the state.
    pub state_dim: Option<usize>,
    /// With `ridge_lambda = 0`, retry a rank-deficient solve with a small
    /// ridge instead of failing.
    pub ridge_fallback: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { ridge_lambda: 0.0, grid: None, segment_spacing: 1, state_dim: None, ridge_fallback: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub model: StateSpaceModel,
    pub report: FitReport,
    pub warnings: Vec<String>,
}

/// Seed the basis from the symmetry report, refine it on the grid, solve for
/// `A`, `B` and `C`, and score the model by one-step and free-run prediction.
pub fn fit_model(
    states: &DMatrix<f64>,
    outputs: &TimeSeries,
    symmetry: &SymmetryReport,
    transforms: &[SymmetryTransform],
    dt: f64,
    options: &FitOptions,
) -> Result<FittedModel> {
    let states = match options.state_dim {
        Some(n) if n == 0 || n > states.ncols() => {
            return Err(Error::InvalidInput(format!("state dimension {n} outside 1..={}", states.ncols())))
        }
        Some(n) => states.columns(0, n).into_owned(),
        None => states.clone(),
    };
    let rows = states.nrows();
    if outputs.len() < rows {
        return Err(Error::LengthMismatch { left: outputs.len(), right: rows });
    }
    let seeded = seed_basis_parameters(symmetry, transforms, dt, options.segment_spacing);
    let mut warnings = seeded.warnings.clone();
    let mut grid = options.grid.clone().unwrap_or_else(|| BasisGrid::default_for(rows, dt));
    // the seeded rates join the grid after the regular points, so they only win strictly
    if let Some(w) = seeded.omega0.filter(|w| w.is_finite() && *w > 0.0 && !grid.omega.contains(w)) {
        grid.omega.push(w);
    }
    if let Some(l) = seeded.lambda0.filter(|l| l.is_finite() && !grid.lambda.contains(l)) {
        grid.lambda.push(l);
    }
    let (basis, _) = match refine_basis(&states, &seeded.basis, dt, &grid, options.ridge_lambda) {
        Err(Error::RankDeficient { .. }) if options.ridge_lambda == 0.0 && options.ridge_fallback => {
            warnings.push("basis refinement rank deficient; refined with ridge fallback".into());
            let reg = build_regression(&states, &seeded.basis, dt)?;
            let sigma = reg.z.clone().svd(false, false).singular_values.max();
            refine_basis(&states, &seeded.basis, dt, &grid, 1e-8 * sigma * sigma)?
        }
        other => other?,
    };

    let reg = build_regression(&states, &basis, dt)?;
    let (sol, fallback) = match solve_least_squares(&reg.z, &reg.targets, options.ridge_lambda) {
        Err(Error::RankDeficient { .. }) if options.ridge_lambda == 0.0 && options.ridge_fallback => {
            let sigma = reg.z.clone().svd(false, false).singular_values.max();
            let lambda = 1e-8 * sigma * sigma;
            warnings.push(format!("regressor rank deficient; ridge fallback lambda = {lambda:e}"));
            (solve_least_squares(&reg.z, &reg.targets, lambda)?, true)
        }
        other => (other?, false),
    };
    let c = fit_output_map(&states, outputs, sol.ridge_lambda)?;
    let model = StateSpaceModel::new(sol.a.clone(), sol.b.clone(), c, basis, dt)?;

    // one-step output prediction for k = 0..N-2
    let q = model.q();
    let predicted_next = &reg.z * sol.coefficients().transpose();
    let y_hat = predicted_next * model.c().transpose();
    let y = outputs.values();
    let one_step_nrmse = (0..q)
        .map(|j| {
            let pred: Vec<f64> = y_hat.column(j).iter().copied().collect();
            let actual: Vec<f64> = (1..rows).map(|k| y[(k, j)]).collect();
            nrmse(&pred, &actual)
        })
        .collect();

    let x0 = DVector::from_iterator(states.ncols(), states.row(0).iter().copied());
    let (free_run_nrmse, free_run_divergence_step) = match simulate(&model, &x0, rows - 1) {
        Ok(traj) => {
            let nr = (0..q)
                .map(|j| {
                    let pred: Vec<f64> = traj.outputs.column(j).iter().copied().collect();
                    let actual: Vec<f64> = (0..rows).map(|k| y[(k, j)]).collect();
                    nrmse(&pred, &actual)
                })
                .collect();
            (nr, None)
        }
        Err(Error::NonFiniteState { step }) => {
            warnings.push(format!("free run diverged at step {step}"));
            (Vec::new(), Some(step))
        }
        Err(e) => return Err(e),
    };

    let report = FitReport {
        residual_rms: residual_rms(&reg, &sol),
        one_step_nrmse,
        free_run_nrmse,
        free_run_divergence_step,
        condition_estimate: sol.condition_estimate,
        ridge_lambda: sol.ridge_lambda,
        ridge_fallback: fallback,
    };
    Ok(FittedModel { model, report, warnings })
}
