use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::ForcingBasis;
use crate::error::{Error, Result};

/// Delay-embedding parameters a model was fitted on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingInfo {
    pub tau: usize,
    pub m: usize,
    pub channel: usize,
    /// Source channels the outputs `y` were fitted against.
    pub outputs: Vec<usize>,
}

/// Discrete affine model with time forcing:
///
/// ```text
/// x(k+1) = A x(k) + B phi(k dt)
/// y(k)   = C x(k)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    basis: ForcingBasis,
    dt: f64,
    embedding: Option<EmbeddingInfo>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, basis: ForcingBasis, dt: f64) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidInput(format!("A must be square and nonempty, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n || b.ncols() != basis.len() {
            return Err(Error::InvalidInput(format!(
                "B must be {n}x{}, got {}x{}",
                basis.len(),
                b.nrows(),
                b.ncols()
            )));
        }
        if c.ncols() != n {
            return Err(Error::InvalidInput(format!("C must have {n} columns, got {}", c.ncols())));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("model matrices must be finite".into()));
        }
        Ok(Self { a, b, c, basis, dt, embedding: None })
    }

    pub fn with_embedding(mut self, info: EmbeddingInfo) -> Self {
        self.embedding = Some(info);
        self
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn basis(&self) -> &ForcingBasis {
        &self.basis
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn embedding(&self) -> Option<&EmbeddingInfo> {
        self.embedding.as_ref()
    }

    /// State dimension n.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of forcing terms p.
    pub fn p(&self) -> usize {
        self.basis.len()
    }

    /// Output dimension q.
    pub fn q(&self) -> usize {
        self.c.nrows()
    }

    /// `A x + B phi(k dt)`
    pub fn step(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        let mut next = &self.a * x;
        if !self.basis.is_empty() {
            let phi = DVector::from_vec(self.basis.eval(k as f64 * self.dt));
            next += &self.b * phi;
        }
        next
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
}
