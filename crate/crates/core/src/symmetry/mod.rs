//! Local trajectory segments, the maps relating them, and the forcing basis
//! implied by the most common kind of map.

mod ga;
mod transform;

pub use ga::{exhaustive_best, ga_search, ga_search_detailed, GaConfig, GaOutcome};
pub use transform::{fit_transform, SymmetryTransform, TransformClass};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::DelayEmbedding;
use crate::error::{Error, Result};
use crate::identify::{BasisTerm, ForcingBasis};

/// A contiguous run of embedded states.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub points: DMatrix<f64>,
    pub start_index: usize,
}

impl Segment {
    pub fn new(points: DMatrix<f64>, start_index: usize) -> Self {
        Self { points, start_index }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }
}

/// Window `2 tau m` and half-window stride.
pub fn default_window(tau: usize, m: usize) -> (usize, usize) {
    let window = (2 * tau * m).max(m + 1);
    (window, (window / 2).max(1))
}

pub fn extract_segments(embedding: &DelayEmbedding, window: usize, stride: usize) -> Result<Vec<Segment>> {
    segments_from_states(embedding.states(), window, stride)
}

/// Segments starting at `0, stride, 2 stride, ...`; a short tail is dropped.
pub fn segments_from_states(states: &DMatrix<f64>, window: usize, stride: usize) -> Result<Vec<Segment>> {
    let m = states.ncols();
    if window < m + 1 {
        return Err(Error::WindowTooSmall { window, min: m + 1 });
    }
    if stride == 0 {
        return Err(Error::InvalidInput("segment stride must be at least 1".into()));
    }
    let n = states.nrows();
    let segments: Vec<Segment> = (0..)
        .map(|i| i * stride)
        .take_while(|&start| start + window <= n)
        .map(|start| Segment::new(states.rows(start, window).into_owned(), start))
        .collect();
    if segments.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} segment(s) of length {window} from {n} states; need at least 2",
            segments.len()
        )));
    }
    Ok(segments)
}

/// Largest coordinate range over every point of every segment.
pub fn attractor_diameter(segments: &[Segment]) -> f64 {
    let m = segments.first().map_or(0, Segment::dimension);
    (0..m)
        .map(|j| {
            let (lo, hi) = segments
                .iter()
                .flat_map(|s| s.points.column(j).iter().copied().collect::<Vec<_>>())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Accepted transforms per class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub translation: usize,
    pub rotation: usize,
    pub scaling: usize,
    pub rotation_scaling: usize,
    pub affine: usize,
}

impl ClassHistogram {
    pub fn total(&self) -> usize {
        self.translation + self.rotation + self.scaling + self.rotation_scaling + self.affine
    }

    fn add(&mut self, class: TransformClass) {
        match class {
            TransformClass::Translation => self.translation += 1,
            TransformClass::Rotation => self.rotation += 1,
            TransformClass::Scaling => self.scaling += 1,
            TransformClass::RotationScaling => self.rotation_scaling += 1,
            TransformClass::Affine => self.affine += 1,
        }
    }

    /// Evidence per basis-bearing class; a similarity counts for both rotation and scaling.
    pub fn votes(&self) -> Votes {
        Votes {
            translation: self.translation,
            rotation: self.rotation + self.rotation_scaling,
            scaling: self.scaling + self.rotation_scaling,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Votes {
    pub translation: usize,
    pub rotation: usize,
    pub scaling: usize,
}

impl Votes {
    fn entries(&self) -> [(TransformClass, usize); 3] {
        [
            (TransformClass::Translation, self.translation),
            (TransformClass::Rotation, self.rotation),
            (TransformClass::Scaling, self.scaling),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// Absolute residual below which a transform is accepted.
    pub threshold: f64,
    /// Accepted transforms, ordered by residual.
    pub transforms: Vec<SymmetryTransform>,
    pub class_histogram: ClassHistogram,
    pub votes: Votes,
    pub dominant_class: Option<TransformClass>,
    /// Classes sharing the top vote count when there is no unique winner.
    pub tied_classes: Vec<TransformClass>,
    pub recommended_basis: ForcingBasis,
    pub warnings: Vec<String>,
}

fn class_basis(class: TransformClass) -> Vec<BasisTerm> {
    match class {
        TransformClass::Rotation => vec![BasisTerm::sinusoid(1.0, 0.0)],
        TransformClass::Scaling => vec![BasisTerm::exponential(0.0)],
        _ => ForcingBasis::polynomial(2).terms,
    }
}

pub(crate) fn transform_order(a: &SymmetryTransform, b: &SymmetryTransform) -> std::cmp::Ordering {
    a.residual
        .total_cmp(&b.residual)
        .then(a.source_segment.cmp(&b.source_segment))
        .then(a.target_segment.cmp(&b.target_segment))
        .then(a.class.cmp(&b.class))
}

/// Tally accepted transforms (`residual < threshold`) and pick the basis family.
pub fn classify_symmetry(transforms: &[SymmetryTransform], threshold: f64) -> SymmetryReport {
    let mut accepted: Vec<SymmetryTransform> =
        transforms.iter().filter(|t| t.residual < threshold).cloned().collect();
    accepted.sort_by(transform_order);
    let mut class_histogram = ClassHistogram::default();
    for t in &accepted {
        class_histogram.add(t.class);
    }
    let votes = class_histogram.votes();
    let top = votes.entries().iter().map(|e| e.1).max().unwrap_or(0);
    let mut warnings = Vec::new();
    let (dominant_class, tied_classes, terms) = if top == 0 {
        warnings.push("no accepted rotation, scaling or translation; polynomial fallback".into());
        (None, Vec::new(), ForcingBasis::polynomial(2).terms)
    } else {
        let leaders: Vec<TransformClass> =
            votes.entries().iter().filter(|e| e.1 == top).map(|e| e.0).collect();
        if leaders.len() == 1 {
            (Some(leaders[0]), Vec::new(), class_basis(leaders[0]))
        } else {
            warnings.push(format!("tie between {leaders:?}; using the union of their bases"));
            let terms = leaders.iter().flat_map(|&c| class_basis(c)).collect();
            (None, leaders, terms)
        }
    };
    SymmetryReport {
        threshold,
        transforms: accepted,
        class_histogram,
        votes,
        dominant_class,
        tied_classes,
        recommended_basis: ForcingBasis::new(terms),
        warnings,
    }
}

/// Recommended basis with rates taken from the detected transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct SeededBasis {
    pub basis: ForcingBasis,
    pub omega0: Option<f64>,
    pub lambda0: Option<f64>,
    pub warnings: Vec<String>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Turn per-transform rotation angles and scale factors into a frequency and a
/// growth rate. Segment `i` starts `i * spacing` samples in, so a map from
/// segment `i` to `j` spans `(j - i) * spacing * dt` time units.
pub fn seed_basis_parameters(
    report: &SymmetryReport,
    transforms: &[SymmetryTransform],
    dt: f64,
    spacing: usize,
) -> SeededBasis {
    let accepted = transforms.iter().filter(|t| t.residual < report.threshold);
    let span = |t: &SymmetryTransform| (t.target_segment as f64 - t.source_segment as f64) * spacing as f64 * dt;

    let omega0 = median(
        accepted
            .clone()
            .filter(|t| matches!(t.class, TransformClass::Rotation | TransformClass::RotationScaling))
            .filter(|t| span(t) != 0.0)
            .map(|t| t.rotation_angle() / span(t).abs())
            .collect(),
    );
    let lambda0 = median(
        accepted
            .filter(|t| matches!(t.class, TransformClass::Scaling | TransformClass::RotationScaling))
            .filter(|t| span(t) != 0.0 && t.scale > 0.0)
            .map(|t| t.scale.ln() / span(t))
            .collect(),
    );

    let mut warnings = report.warnings.clone();
    let mut degenerate = false;
    let mut terms = Vec::new();
    for term in &report.recommended_basis.terms {
        match term {
            BasisTerm::Sinusoid { phase, .. } => match omega0.filter(|w| *w > 0.0 && w.is_finite()) {
                Some(w) => terms.push(BasisTerm::sinusoid(w, *phase)),
                None => {
                    warnings.push("degenerate rotation rate; sinusoid dropped".into());
                    degenerate = true;
                }
            },
            BasisTerm::Exponential { .. } => match lambda0.filter(|l| *l != 0.0 && l.is_finite()) {
                Some(l) => terms.push(BasisTerm::exponential(l)),
                None => {
                    warnings.push("degenerate growth rate (scale 1); exponential dropped".into());
                    degenerate = true;
                }
            },
            other => terms.push(other.clone()),
        }
    }
    let basis = if degenerate && terms.is_empty() {
        warnings.push("polynomial fallback".into());
        ForcingBasis::polynomial(2)
    } else {
        ForcingBasis::new(terms)
    };
    SeededBasis { basis, omega0, lambda0, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::delay_embed;
    use crate::series::TimeSeries;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn embedding(n: usize, m: usize) -> DelayEmbedding {
        let s = TimeSeries::from_samples(&(0..n + m - 1).map(|k| (k as f64 * 0.37).sin()).collect::<Vec<_>>(), 1.0).unwrap();
        delay_embed(&s, 0, 1, m).unwrap()
    }

    fn fake(class: TransformClass, residual: f64, source: usize, target: usize) -> SymmetryTransform {
        SymmetryTransform {
            class,
            rotation: DMatrix::identity(2, 2),
            scale: 1.0,
            translation: DVector::zeros(2),
            affine: None,
            residual,
            source_segment: source,
            target_segment: target,
        }
    }

    fn many(counts: &[(TransformClass, usize)]) -> Vec<SymmetryTransform> {
        let mut out = Vec::new();
        for &(class, n) in counts {
            for i in 0..n {
                out.push(fake(class, 0.01 * i as f64, i, i + 1));
            }
        }
        out
    }

    #[test]
    fn segment_starts_and_boundaries() {
        let e = embedding(10, 2);
        let segs = extract_segments(&e, 4, 3).unwrap();
        assert_eq!(segs.iter().map(|s| s.start_index).collect::<Vec<_>>(), vec![0, 3, 6]);
        assert!(segs.iter().all(|s| s.len() == 4));
        assert_eq!(segs[1].points, e.states().rows(3, 4).into_owned());

        assert!(matches!(extract_segments(&embedding(5, 2), 6, 1), Err(Error::InsufficientData(_))));
        assert!(matches!(extract_segments(&e, 2, 1), Err(Error::WindowTooSmall { window: 2, min: 3 })));
    }

    #[test]
    fn rotation_majority_gives_sinusoid() {
        use TransformClass::*;
        let r = classify_symmetry(&many(&[(Rotation, 10), (Scaling, 2), (Translation, 1)]), 1.0);
        assert_eq!(r.dominant_class, Some(Rotation));
        assert_eq!(r.class_histogram.total(), 13);
        assert!(matches!(r.recommended_basis.terms[..], [BasisTerm::Sinusoid { .. }]));
    }

    #[test]
    fn scaling_majority_gives_exponential() {
        use TransformClass::*;
        let r = classify_symmetry(&many(&[(Scaling, 7), (Rotation, 1)]), 1.0);
        assert_eq!(r.dominant_class, Some(Scaling));
        assert!(matches!(r.recommended_basis.terms[..], [BasisTerm::Exponential { .. }]));
    }

    #[test]
    fn empty_and_rejected_inputs_fall_back() {
        let r = classify_symmetry(&[], 0.1);
        assert_eq!(r.dominant_class, None);
        assert_eq!(r.recommended_basis, ForcingBasis::polynomial(2));

        let r = classify_symmetry(&[fake(TransformClass::Rotation, 0.5, 0, 1)], 0.1);
        assert_eq!(r.class_histogram.total(), 0);
        assert_eq!(r.recommended_basis, ForcingBasis::polynomial(2));
    }

    #[test]
    fn similarity_counts_twice_and_ties_are_flagged() {
        use TransformClass::*;
        let r = classify_symmetry(&many(&[(RotationScaling, 3), (Affine, 4)]), 1.0);
        assert_eq!(r.class_histogram.total(), 7);
        assert_eq!(r.votes, Votes { translation: 0, rotation: 3, scaling: 3 });
        assert_eq!(r.dominant_class, None);
        assert_eq!(r.tied_classes, vec![Rotation, Scaling]);
        assert_eq!(r.recommended_basis.len(), 2);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn seeded_frequency_from_rotation_angle() {
        let theta = PI / 10.0;
        let mut t = fake(TransformClass::Rotation, 0.0, 0, 1);
        t.rotation = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let report = classify_symmetry(std::slice::from_ref(&t), 1.0);
        let seeded = seed_basis_parameters(&report, &[t], 0.05, 20);
        assert!((seeded.omega0.unwrap() - PI / 10.0).abs() < 1e-12);
        assert!(matches!(seeded.basis.terms[..], [BasisTerm::Sinusoid { omega, .. }] if (omega - 0.3141592653589793).abs() < 1e-12));
    }

    #[test]
    fn unit_scale_is_degenerate() {
        let t = fake(TransformClass::Scaling, 0.0, 0, 1);
        let report = classify_symmetry(std::slice::from_ref(&t), 1.0);
        let seeded = seed_basis_parameters(&report, &[t], 0.1, 10);
        assert_eq!(seeded.lambda0, Some(0.0));
        assert_eq!(seeded.basis, ForcingBasis::polynomial(2));
        assert!(seeded.warnings.iter().any(|w| w.contains("degenerate")));
    }

    #[test]
    fn planted_spiral_rates() {
        // e^{0.1 t} (cos t, sin t): consecutive windows differ by an exact similarity.
        let dt = 0.05;
        let states = DMatrix::from_fn(400, 2, |k, j| {
            let t = k as f64 * dt;
            let r = (0.1 * t).exp();
            if j == 0 { r * t.cos() } else { r * t.sin() }
        });
        let segs = segments_from_states(&states, 20, 20).unwrap();
        let transforms: Vec<SymmetryTransform> = (0..segs.len() - 1)
            .map(|i| {
                let mut t = fit_transform(&segs[i], &segs[i + 1], TransformClass::RotationScaling).unwrap();
                t.source_segment = i;
                t.target_segment = i + 1;
                t
            })
            .collect();
        let report = classify_symmetry(&transforms, 1e-6);
        let seeded = seed_basis_parameters(&report, &transforms, dt, 20);
        assert!((seeded.omega0.unwrap() - 1.0).abs() < 0.05);
        assert!((seeded.lambda0.unwrap() - 0.1).abs() < 0.005);
    }

    proptest::proptest! {
        #[test]
        fn dominant_class_ignores_order(
            classes in proptest::collection::vec(0usize..5, 0..40),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let list: Vec<SymmetryTransform> = classes
                .iter()
                .enumerate()
                .map(|(i, &c)| fake(TransformClass::from_index(c), (i % 7) as f64 * 0.1, i, i + 1))
                .collect();
            let mut shuffled = list.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = classify_symmetry(&list, 0.45);
            let b = classify_symmetry(&shuffled, 0.45);
            proptest::prop_assert_eq!(a.dominant_class, b.dominant_class);
            proptest::prop_assert_eq!(a, b);
        }
    }
}
