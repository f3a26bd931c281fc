//! Reference ODE systems, RK4 integration, and playback of discrete models.

pub mod fixtures;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::identify::StateSpaceModel;
use crate::series::TimeSeries;

pub use fixtures::{fixture, FixtureId, FixtureModel};

/// Autonomous or time-dependent vector field `dx/dt = f(x, t)`.
pub trait OdeSystem {
    fn dimension(&self) -> usize;
    fn name(&self) -> &str;
    fn params(&self) -> Vec<(&'static str, f64)>;
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

/// `(-(x2 + x3), x1 + a x2, b + x3 (x1 - c))`
pub fn rossler_rhs(state: [f64; 3], a: f64, b: f64, c: f64) -> [f64; 3] {
    let [x1, x2, x3] = state;
    [-(x2 + x3), x1 + a * x2, b + x3 * (x1 - c)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rossler {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for Rossler {
    fn default() -> Self {
        Self { a: 0.2, b: 0.2, c: 5.7 }
    }
}

impl OdeSystem for Rossler {
    fn dimension(&self) -> usize {
        3
    }

    fn name(&self) -> &str {
        "rossler"
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b), ("c", self.c)]
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
        dx.copy_from_slice(&rossler_rhs([x[0], x[1], x[2]], self.a, self.b, self.c));
    }
}

/// Wraps a closure as an [`OdeSystem`].
pub struct FnSystem<F> {
    dimension: usize,
    name: String,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnSystem<F> {
    pub fn new(name: impl Into<String>, dimension: usize, f: F) -> Self {
        Self { dimension, name: name.into(), f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.f)(t, x, dx)
    }
}

/// Classical fourth-order Runge-Kutta.
///
/// Integrates `transient_skip + steps` steps from `x0`, discards the
/// transient, and returns `steps + 1` rows starting with the post-transient
/// state. Every state coordinate becomes a channel.
pub fn rk4_integrate(
    system: &dyn OdeSystem,
    x0: &[f64],
    dt: f64,
    steps: usize,
    transient_skip: usize,
) -> Result<TimeSeries> {
    let n = system.dimension();
    if x0.len() != n {
        return Err(Error::LengthMismatch { left: x0.len(), right: n });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be positive".into()));
    }
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut out = DMatrix::zeros(steps + 1, n);
    let total = transient_skip + steps;
    for step in 0..=total {
        if step >= transient_skip {
            for (j, v) in x.iter().enumerate() {
                out[(step - transient_skip, j)] = *v;
            }
        }
        if step == total {
            break;
        }
        let t = step as f64 * dt;
        system.rhs(t, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        system.rhs(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        system.rhs(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        system.rhs(t + dt, &tmp, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
    }
    let labels = (1..=n).map(|i| format!("x{i}")).collect();
    TimeSeries::new(out, dt, labels)
}

/// States and outputs of a discrete model run; `steps + 1` rows each,
/// starting at `x(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
}

/// Iterate `x(k+1) = A x(k) + B phi(k dt)`, `y(k) = C x(k)`.
pub fn simulate(model: &StateSpaceModel, x0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
    let n = model.n();
    if x0.len() != n {
        return Err(Error::LengthMismatch { left: x0.len(), right: n });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial state must be finite".into()));
    }
    let mut states = DMatrix::zeros(steps + 1, n);
    let mut outputs = DMatrix::zeros(steps + 1, model.q());
    let mut x = x0.clone();
    for k in 0..=steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k });
        }
        states.row_mut(k).copy_from(&x.transpose());
        let y = model.output(&x);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k });
        }
        outputs.row_mut(k).copy_from(&y.transpose());
        if k < steps {
            x = model.step(k, &x);
        }
    }
    Ok(Trajectory { states, outputs })
}

/// Largest eigenvalue modulus.
///
/// # Panics
///
/// If `a` is not square.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square(), "spectral radius needs a square matrix");
    if a.is_empty() {
        return 0.0;
    }
    a.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}
