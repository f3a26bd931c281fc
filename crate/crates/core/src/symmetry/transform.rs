//! Least-squares maps between two equally long point sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Segment;
use crate::error::{Error, Result};
use crate::io::{mat17, opt_mat17, vec17};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformClass {
    Translation,
    Rotation,
    Scaling,
    RotationScaling,
    Affine,
}

impl TransformClass {
    pub const ALL: [TransformClass; 5] = [
        TransformClass::Translation,
        TransformClass::Rotation,
        TransformClass::Scaling,
        TransformClass::RotationScaling,
        TransformClass::Affine,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

/// `T(p) = scale * R p + t`, or `T(p) = M p + t` for the affine class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTransform {
    pub class: TransformClass,
    #[serde(with = "mat17")]
    pub rotation: DMatrix<f64>,
    pub scale: f64,
    #[serde(with = "vec17")]
    pub translation: DVector<f64>,
    #[serde(with = "opt_mat17")]
    pub affine: Option<DMatrix<f64>>,
    /// RMS of `||T(p_i) - q_i||` over the point pairs.
    pub residual: f64,
    pub source_segment: usize,
    pub target_segment: usize,
}

impl SymmetryTransform {
    pub fn dimension(&self) -> usize {
        self.translation.len()
    }

    /// Linear part: `scale * R`, or the affine matrix.
    pub fn linear(&self) -> DMatrix<f64> {
        match &self.affine {
            Some(m) => m.clone(),
            None => &self.rotation * self.scale,
        }
    }

    pub fn apply(&self, p: &DVector<f64>) -> DVector<f64> {
        self.linear() * p + &self.translation
    }

    /// RMS mismatch of the stored map on a pair of point sets (rows are points).
    pub fn residual_on(&self, source: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
        let mapped = source * self.linear().transpose();
        let mut sum = 0.0;
        for i in 0..source.nrows() {
            for j in 0..source.ncols() {
                let d = mapped[(i, j)] + self.translation[j] - target[(i, j)];
                sum += d * d;
            }
        }
        (sum / source.nrows() as f64).sqrt()
    }

    /// Largest rotation angle of `R` in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let m = self.rotation.nrows();
        match m {
            0 | 1 => 0.0,
            2 => self.rotation[(1, 0)].atan2(self.rotation[(0, 0)]).abs(),
            _ => self
                .rotation
                .clone()
                .complex_eigenvalues()
                .iter()
                .map(|z| z.im.atan2(z.re).abs())
                .fold(0.0, f64::max),
        }
    }
}

fn centered(points: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mean = points.row_mean().transpose();
    let mut c = points.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    (mean, c)
}

/// Proper rotation `R` minimizing `sum ||R p_i - q_i||^2` over centered points,
/// and `trace(S D)` for the similarity scale.
fn procrustes(p: &DMatrix<f64>, q: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let m = p.ncols();
    let cross = q.transpose() * p;
    let svd = cross.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;
    // nalgebra sorts singular values in decreasing order; flip the smallest.
    let smallest = (0..m).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(0);
    let mut d = DVector::from_element(m, 1.0);
    if (&u * &v_t).determinant() < 0.0 {
        d[smallest] = -1.0;
    }
    let r = &u * DMatrix::from_diagonal(&d) * &v_t;
    let trace: f64 = s.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
    (r, trace)
}

/// Fit a map of the requested class taking `a`'s points onto `b`'s, in order.
pub fn fit_transform(a: &Segment, b: &Segment, class: TransformClass) -> Result<SymmetryTransform> {
    let (p, q) = (&a.points, &b.points);
    if p.shape() != q.shape() {
        return Err(Error::LengthMismatch { left: p.nrows(), right: q.nrows() });
    }
    let m = p.ncols();
    let (p_mean, pc) = centered(p);
    let (q_mean, qc) = centered(q);
    let (p_norm, q_norm) = (pc.norm(), qc.norm());
    if p_norm == 0.0 {
        return Err(Error::DegenerateSegment(a.start_index));
    }
    if q_norm == 0.0 {
        return Err(Error::DegenerateSegment(b.start_index));
    }

    let identity = DMatrix::identity(m, m);
    let (rotation, scale, affine, translation) = match class {
        TransformClass::Translation => (identity, 1.0, None, &q_mean - &p_mean),
        TransformClass::Scaling => {
            let s = q_norm / p_norm;
            (identity, s, None, &q_mean - &p_mean * s)
        }
        TransformClass::Rotation => {
            let r = procrustes(&pc, &qc).0;
            let t = &q_mean - &r * &p_mean;
            (r, 1.0, None, t)
        }
        TransformClass::RotationScaling => {
            let (r, trace) = procrustes(&pc, &qc);
            let s = trace / (p_norm * p_norm);
            let t = &q_mean - &r * &p_mean * s;
            (r, s, None, t)
        }
        TransformClass::Affine => {
            // [P 1] X = Q, minimum-norm solution; the last row of X is the offset
            let mut h = DMatrix::from_element(p.nrows(), m + 1, 1.0);
            h.columns_mut(0, m).copy_from(p);
            let svd = h.svd(true, true);
            let eps = svd.singular_values.max() * 1e-12;
            let x = svd.solve(q, eps).map_err(|e| Error::InvalidInput(e.to_string()))?;
            (identity, 1.0, Some(x.rows(0, m).transpose()), x.row(m).transpose())
        }
    };
    let mut t = SymmetryTransform {
        class,
        rotation,
        scale,
        translation,
        affine,
        residual: 0.0,
        source_segment: 0,
        target_segment: 0,
    };
    t.residual = t.residual_on(p, q);
    Ok(t)
}
