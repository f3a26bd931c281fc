//! Genetic search over (source segment, target segment, class) triples.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{attractor_diameter, fit_transform, transform_order, Segment, SymmetryTransform, TransformClass};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub seed: u64,
    /// Acceptance threshold as a fraction of the attractor diameter.
    pub residual_threshold: f64,
    /// Segment length in states; `None` means `2 tau m`.
    pub segment_window: Option<usize>,
    /// Start-to-start spacing; `None` means half the window.
    pub segment_stride: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 200,
            mutation_rate: 0.1,
            crossover_rate: 0.7,
            seed: 0,
            residual_threshold: 0.05,
            segment_window: None,
            segment_stride: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if self.population < 2 {
            return Err(Error::Config(format!("ga.population must be >= 2, got {}", self.population)));
        }
        if self.generations == 0 {
            return Err(Error::Config("ga.generations must be positive".into()));
        }
        if !rate_ok(self.mutation_rate) || !rate_ok(self.crossover_rate) {
            return Err(Error::Config("ga rates must lie in [0, 1]".into()));
        }
        if !(self.residual_threshold > 0.0 && self.residual_threshold.is_finite()) {
            return Err(Error::Config("ga.threshold must be positive".into()));
        }
        if self.segment_window == Some(0) || self.segment_stride == Some(0) {
            return Err(Error::Config("segment window and stride must be positive".into()));
        }
        Ok(())
    }
}

type Genome = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    /// Accepted transforms, best first.
    pub accepted: Vec<SymmetryTransform>,
    /// Lowest-residual transform evaluated, accepted or not.
    pub best: Option<SymmetryTransform>,
    /// Distinct genomes evaluated.
    pub evaluations: usize,
    pub diameter: f64,
    /// Absolute acceptance threshold.
    pub threshold: f64,
}

struct Evaluator<'a> {
    segments: &'a [Segment],
    cache: BTreeMap<Genome, Option<SymmetryTransform>>,
}

impl Evaluator<'_> {
    fn fit(&self, g: Genome) -> Option<SymmetryTransform> {
        let mut t = fit_transform(&self.segments[g[0]], &self.segments[g[1]], TransformClass::from_index(g[2])).ok()?;
        t.source_segment = g[0];
        t.target_segment = g[1];
        t.residual.is_finite().then_some(t)
    }

    /// Fitness evaluation is the only parallel stage; results land in a sorted map.
    fn evaluate(&mut self, genomes: &[Genome]) {
        let mut fresh: Vec<Genome> = genomes.iter().copied().filter(|g| !self.cache.contains_key(g)).collect();
        fresh.sort_unstable();
        fresh.dedup();
        let fitted: Vec<(Genome, Option<SymmetryTransform>)> =
            fresh.par_iter().map(|&g| (g, self.fit(g))).collect();
        self.cache.extend(fitted);
    }

    fn residual(&self, g: &Genome) -> f64 {
        self.cache[g].as_ref().map_or(f64::INFINITY, |t| t.residual)
    }
}

fn repair(mut g: Genome, segments: usize) -> Genome {
    if g[0] == g[1] {
        g[1] = (g[1] + 1) % segments;
    }
    g
}

fn random_genome(rng: &mut ChaCha8Rng, segments: usize) -> Genome {
    let g = [rng.random_range(0..segments), rng.random_range(0..segments), rng.random_range(0..5)];
    repair(g, segments)
}

fn tournament(rng: &mut ChaCha8Rng, pop: &[Genome], eval: &Evaluator) -> Genome {
    let a = pop[rng.random_range(0..pop.len())];
    let b = pop[rng.random_range(0..pop.len())];
    if eval.residual(&b) < eval.residual(&a) { b } else { a }
}

pub fn ga_search(segments: &[Segment], config: &GaConfig) -> Result<Vec<SymmetryTransform>> {
    ga_search_detailed(segments, config).map(|o| o.accepted)
}

pub fn ga_search_detailed(segments: &[Segment], config: &GaConfig) -> Result<GaOutcome> {
    if segments.len() < 2 {
        return Err(Error::InsufficientData(format!("{} segment(s); need at least 2", segments.len())));
    }
    config.validate()?;
    let s = segments.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = Evaluator { segments, cache: BTreeMap::new() };

    let mut pop: Vec<Genome> = (0..config.population).map(|_| random_genome(&mut rng, s)).collect();
    for _ in 0..config.generations {
        eval.evaluate(&pop);
        let elite = *pop
            .iter()
            .min_by(|a, b| eval.residual(a).total_cmp(&eval.residual(b)))
            .expect("population is non-empty");
        let mut next = vec![elite];
        while next.len() < config.population {
            let mut c1 = tournament(&mut rng, &pop, &eval);
            let mut c2 = tournament(&mut rng, &pop, &eval);
            if rng.random::<f64>() < config.crossover_rate {
                let cut = rng.random_range(1..3);
                for gene in cut..3 {
                    std::mem::swap(&mut c1[gene], &mut c2[gene]);
                }
            }
            for child in [&mut c1, &mut c2] {
                for (gene, bound) in [s, s, 5].into_iter().enumerate() {
                    if rng.random::<f64>() < config.mutation_rate {
                        child[gene] = rng.random_range(0..bound);
                    }
                }
                *child = repair(*child, s);
            }
            next.push(c1);
            if next.len() < config.population {
                next.push(c2);
            }
        }
        pop = next;
    }
    eval.evaluate(&pop);

    let diameter = attractor_diameter(segments);
    let threshold = config.residual_threshold * diameter;
    let mut all: Vec<SymmetryTransform> = eval.cache.into_values().flatten().collect();
    all.sort_by(transform_order);
    let best = all.first().cloned();
    let evaluations = all.len();
    all.retain(|t| t.residual < threshold);
    Ok(GaOutcome { accepted: all, best, evaluations, diameter, threshold })
}

/// Best fit over every ordered segment pair and class.
pub fn exhaustive_best(segments: &[Segment]) -> Option<SymmetryTransform> {
    let s = segments.len();
    let genomes: Vec<Genome> = (0..s)
        .flat_map(|i| (0..s).filter(move |&j| j != i).flat_map(move |j| (0..5).map(move |c| [i, j, c])))
        .collect();
    let mut eval = Evaluator { segments, cache: BTreeMap::new() };
    eval.evaluate(&genomes);
    eval.cache.into_values().flatten().min_by(transform_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::segments_from_states;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn circle(n: usize, omega: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, 2, |k, j| if j == 0 { (omega * k as f64).cos() } else { (omega * k as f64).sin() })
    }

    fn small_config(seed: u64) -> GaConfig {
        GaConfig { population: 24, generations: 30, seed, ..GaConfig::default() }
    }

    #[test]
    fn rejects_single_segment_and_bad_config() {
        let segs = segments_from_states(&circle(40, 0.1), 10, 10).unwrap();
        assert!(matches!(ga_search(&segs[..1], &small_config(1)), Err(Error::InsufficientData(_))));
        let bad = GaConfig { population: 1, ..GaConfig::default() };
        assert!(matches!(ga_search(&segs, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn same_seed_same_output() {
        let states = DMatrix::from_fn(200, 3, |k, j| ((k * (j + 2)) as f64 * 0.13).sin() + 0.01 * k as f64);
        let segs = segments_from_states(&states, 20, 10).unwrap();
        let a = ga_search_detailed(&segs, &small_config(7)).unwrap();
        let b = ga_search_detailed(&segs, &small_config(7)).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn planted_circle_rotation() {
        // 40 samples per turn, 10-sample windows: each window is a quarter arc.
        let omega = 2.0 * PI / 40.0;
        let segs = segments_from_states(&circle(120, omega), 10, 10).unwrap();
        let out = ga_search_detailed(&segs, &small_config(3)).unwrap();
        let oracle = exhaustive_best(&segs).unwrap();
        assert!((out.best.as_ref().unwrap().residual - oracle.residual).abs() < 1e-9);

        let rot = out
            .accepted
            .iter()
            .find(|t| t.class == TransformClass::Rotation && t.target_segment == t.source_segment + 1)
            .expect("adjacent rotation accepted");
        assert!(rot.residual < 1e-9);
        assert!((rot.rotation_angle() - omega * 10.0).abs() < 1e-6);
    }
}
