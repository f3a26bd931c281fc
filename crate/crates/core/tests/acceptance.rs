//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line per criterion, and exits non-zero if any failed.

mod common;

use std::f64::consts::TAU;
use std::time::Instant;

use attractor_recon::cli::commands::{stage_embed, stage_symmetry};
use attractor_recon::cli::{run_pipeline, RunConfig};
use attractor_recon::dynamics::{fixture, rk4_integrate, spectral_radius, FixtureId, FnSystem, Rossler};
use attractor_recon::identify::{build_regression, refine_basis, solve_least_squares, BasisGrid};
use attractor_recon::io::{format_matrix_text, model_from_json, model_to_json, parse_matrix_text, series_to_csv, write_text};
use attractor_recon::symmetry::{fit_transform, ga_search_detailed, Segment};
use attractor_recon::validate::{correlation_dimension, DimensionOptions};
use attractor_recon::{
    classify_symmetry, fit_model, BasisTerm, FitOptions, ForcingBasis, GaConfig, TimeSeries, TransformClass,
};
use common::{map_rows, power_iteration_radius, random_rotation};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Random matrix rescaled to spectral radius `rho` (measured by the oracle).
fn stable_matrix(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> DMatrix<f64> {
    let a = uniform_matrix(rng, n, n, -1.0, 1.0);
    let r = power_iteration_radius(&a, 20_000);
    a * (rho / r)
}

fn write_rossler(dir: &std::path::Path, seed: u64, out: &str) -> RunConfig {
    let series = rk4_integrate(&Rossler::default(), &[1.0, 1.0, 1.0], 0.05, 19_999, 2000).unwrap();
    write_text(&dir.join("rossler.csv"), &series_to_csv(&series)).unwrap();
    let text = format!(
        "input = rossler.csv\ndt = 0.05\nchannel = 0\noutput_channels = 0\nseed = {seed}\nout_dir = {out}\n\
         embedding.max_lag = 100\nembedding.m_max = 6\nvalidate.free_run_steps = 20000\n"
    );
    let cfg_path = dir.join("rossler.cfg");
    write_text(&cfg_path, &text).unwrap();
    RunConfig::load(&cfg_path).unwrap()
}

fn rossler_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = write_rossler(dir.path(), 7, "out");
    let start = Instant::now();
    let result = run_pipeline(&config).map_err(|e| format!("pipeline error: {e}"))?;
    let seconds = start.elapsed().as_secs_f64();
    let r = &result.report;
    let m = r.embedding.m;
    let one_step = r.fit.report.one_step_nrmse[0];
    let v = &r.validation;
    let delta = v.correlation_dimension_delta;
    let checks = [
        ("m = 3 by FNN", m == 3 && r.embedding.m_method == "fnn"),
        ("one-step NRMSE < 0.01", one_step < 0.01),
        ("bounded 20000-step free run", v.free_run_bounded && v.free_run_steps == 20_000),
        ("|dD2| <= 0.25", delta.is_some_and(|d| d.abs() <= 0.25)),
        ("runtime < 120 s", seconds < 120.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let detail = format!(
        "tau {} m {} ({}), one-step NRMSE {one_step:.4}, bounded {}, dD2 {:?}, {seconds:.1} s{}",
        r.embedding.tau,
        m,
        r.embedding.m_method,
        v.free_run_bounded,
        delta.map(|d| (d * 1e4).round() / 1e4),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    check(failed.is_empty(), detail)
}

fn identification_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dt = 0.1;

    // unforced: no symmetry found, polynomial fallback basis
    let n = 3;
    let a = stable_matrix(&mut rng, n, 0.95);
    let rows = 200;
    let mut states = DMatrix::zeros(rows, n);
    let mut x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    for k in 0..rows {
        states.set_row(k, &x.transpose());
        x = &a * &x;
    }
    let outputs = TimeSeries::from_samples(&states.column(0).iter().copied().collect::<Vec<_>>(), dt).unwrap();
    let report = classify_symmetry(&[], 1.0);
    let fitted = fit_model(&states, &outputs, &report, &[], dt, &FitOptions::default()).map_err(|e| e.to_string())?;
    let err_a = (fitted.model.a() - &a).abs().max();
    let unknowns = n + fitted.model.p();

    // forced with B sin(omega t), true omega in the grid
    let a2 = stable_matrix(&mut rng, n, 0.9);
    let b2 = uniform_matrix(&mut rng, n, 1, -1.0, 1.0);
    let omega = 0.7;
    let rows2 = 400;
    let mut states2 = DMatrix::zeros(rows2, n);
    let mut x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    for k in 0..rows2 {
        states2.set_row(k, &x.transpose());
        x = &a2 * &x + &b2 * (omega * k as f64 * dt).sin();
    }
    let mut grid = BasisGrid::default_for(rows2, dt);
    grid.omega.push(omega);
    let seed_basis = ForcingBasis::new(vec![BasisTerm::sinusoid(1.0, 0.0)]);
    let (basis, _) = refine_basis(&states2, &seed_basis, dt, &grid, 0.0).map_err(|e| e.to_string())?;
    let reg = build_regression(&states2, &basis, dt).map_err(|e| e.to_string())?;
    let sol = solve_least_squares(&reg.z, &reg.targets, 0.0).map_err(|e| e.to_string())?;
    let mut truth = DMatrix::zeros(n, n + 1);
    truth.columns_mut(0, n).copy_from(&a2);
    truth.columns_mut(n, 1).copy_from(&b2);
    let err_ab = (sol.coefficients() - truth).abs().max();
    let chosen = basis.terms[0].clone();

    check(
        err_a <= 1e-8 && rows >= 10 * unknowns && err_ab <= 1e-6 && rows2 >= 10 * (n + 1),
        format!("max |A err| {err_a:.2e} (<= 1e-8), max |[A|B] err| {err_ab:.2e} (<= 1e-6), chosen {chosen:?}"),
    )
}

fn transform_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (points, dim, trials) = (12, 3, 1000);
    let mut lines = Vec::new();
    let mut ok = true;
    let mut nesting_violations = 0;
    for class in TransformClass::ALL {
        let mut exact = 0;
        for _ in 0..trials {
            let p = uniform_matrix(&mut rng, points, dim, -1.0, 1.0);
            let t = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
            let s = rng.random_range(0.3..3.0);
            let linear = match class {
                TransformClass::Translation => DMatrix::identity(dim, dim),
                TransformClass::Scaling => DMatrix::identity(dim, dim) * s,
                TransformClass::Rotation => random_rotation(|| rng.random_range(-1.0..1.0), dim),
                TransformClass::RotationScaling => random_rotation(|| rng.random_range(-1.0..1.0), dim) * s,
                TransformClass::Affine => uniform_matrix(&mut rng, dim, dim, -1.0, 1.0),
            };
            let q = map_rows(&p, &linear, &t);
            let (a, b) = (Segment::new(p, 0), Segment::new(q, 1));
            let fit = fit_transform(&a, &b, class).map_err(|e| e.to_string())?;
            let recovered = (fit.linear() - &linear).abs().max() < 1e-6 && (&fit.translation - &t).abs().max() < 1e-6;
            if fit.residual < 1e-9 && recovered {
                exact += 1;
            }
            let affine = fit_transform(&a, &b, TransformClass::Affine).unwrap().residual;
            for other in TransformClass::ALL {
                let r = fit_transform(&a, &b, other).unwrap().residual;
                if affine > r + 1e-12 {
                    nesting_violations += 1;
                }
            }
        }
        ok &= exact >= 999;
        lines.push(format!("{class:?} {exact}/{trials}"));
    }
    // unrelated pairs: residuals are O(1), so nesting is tested away from roundoff
    for _ in 0..trials {
        let a = Segment::new(uniform_matrix(&mut rng, points, dim, -1.0, 1.0), 0);
        let b = Segment::new(uniform_matrix(&mut rng, points, dim, -1.0, 1.0), 1);
        let affine = fit_transform(&a, &b, TransformClass::Affine).unwrap().residual;
        for other in TransformClass::ALL {
            if affine > fit_transform(&a, &b, other).unwrap().residual + 1e-12 {
                nesting_violations += 1;
            }
        }
    }
    check(
        ok && nesting_violations == 0,
        format!("{}; affine nesting violations {nesting_violations}", lines.join(", ")),
    )
}

fn oracle_best(segments: &[Segment]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in segments.iter().enumerate() {
        for (j, b) in segments.iter().enumerate() {
            if i == j {
                continue;
            }
            for class in TransformClass::ALL {
                if let Ok(t) = fit_transform(a, b, class) {
                    best = best.min(t.residual);
                }
            }
        }
    }
    best
}

fn ga_matches_exhaustive() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mismatches = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let count = 3 + (seed as usize % 10);
        let dim = 2 + (seed as usize % 2);
        let segments: Vec<Segment> =
            (0..count).map(|i| Segment::new(uniform_matrix(&mut rng, 8, dim, -1.0, 1.0), i * 8)).collect();
        let config = GaConfig { seed, ..GaConfig::default() };
        let outcome = ga_search_detailed(&segments, &config).map_err(|e| e.to_string())?;
        let ga = outcome.best.map(|t| t.residual).unwrap_or(f64::INFINITY);
        let oracle = oracle_best(&segments);
        let diff = (ga - oracle).abs();
        worst = worst.max(diff);
        if diff > 1e-9 {
            mismatches.push(format!("seed {seed}: ga {ga:.6e} vs oracle {oracle:.6e}"));
        }
    }
    check(
        mismatches.is_empty(),
        format!("20 seeds, 3..12 segments, worst |ga - oracle| {worst:.1e}{}", if mismatches.is_empty() { String::new() } else { format!("; {}", mismatches.join("; ")) }),
    )
}

fn classify(samples: &[f64], dt: f64, seed: u64) -> Result<(Option<TransformClass>, ForcingBasis), String> {
    let series = TimeSeries::from_samples(samples, dt).map_err(|e| e.to_string())?;
    let config = RunConfig { seed, dt, ..RunConfig::default() };
    let embed = stage_embed(&series, &config).map_err(|e| e.to_string())?;
    let sym = stage_symmetry(&embed.embedding, &config).map_err(|e| e.to_string())?;
    Ok((sym.report.dominant_class, sym.report.recommended_basis))
}

fn symmetry_basis_rule() -> Outcome {
    let dt = 0.05;
    let (mut rot, mut spiral, mut noise) = (0, 0, 0);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = rng.random_range(0.8..1.2);
        let phase = rng.random_range(0.0..TAU);
        let samples: Vec<f64> =
            (0..4000).map(|k| (omega * k as f64 * dt + phase).sin() + 0.02 * rng.random_range(-1.0..1.0)).collect();
        let (class, basis) = classify(&samples, dt, seed)?;
        if class == Some(TransformClass::Rotation)
            && !basis.is_empty()
            && basis.terms.iter().all(|t| matches!(t, BasisTerm::Sinusoid { .. }))
        {
            rot += 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = rng.random_range(0.9..1.1);
        let phase = rng.random_range(0.0..TAU);
        let lambda = 0.1 * rng.random_range(0.9..1.1);
        let samples: Vec<f64> = (0..1000)
            .map(|k| {
                let t = k as f64 * dt;
                let theta = omega * t + phase;
                (lambda * t).exp() * (theta.sin() + 0.5 * (2.0 * theta).sin()) + 1e-4 * rng.random_range(-1.0..1.0)
            })
            .collect();
        let (class, basis) = classify(&samples, dt, seed)?;
        if class == Some(TransformClass::Scaling)
            && !basis.is_empty()
            && basis.terms.iter().all(|t| matches!(t, BasisTerm::Exponential { .. }))
        {
            spiral += 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (class, basis) = classify(&samples, dt, seed)?;
        if class.is_none() && basis == ForcingBasis::polynomial(2) {
            noise += 1;
        }
    }
    check(
        rot == 10 && spiral == 10 && noise == 10,
        format!("rotation -> sinusoid {rot}/10, spiral -> exponential {spiral}/10, noise -> polynomial {noise}/10"),
    )
}

fn chaos_metric_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let line = uniform_matrix(&mut rng, 5000, 1, 0.0, 1.0);
    let square = uniform_matrix(&mut rng, 5000, 2, 0.0, 1.0);
    let opts = DimensionOptions::default();
    let d1 = correlation_dimension(&line, &opts).map_err(|e| e.to_string())?.dimension;
    let d2 = correlation_dimension(&square, &opts).map_err(|e| e.to_string())?.dimension;

    let decay = FnSystem::new("decay", 1, |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
    let error = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let s = rk4_integrate(&decay, &[1.0], dt, steps, 0).unwrap();
        (s.values()[(steps, 0)] - (-1.0f64).exp()).abs()
    };
    let ratio = error(0.1) / error(0.05);
    check(
        (d1 - 1.0).abs() <= 0.05 && (d2 - 2.0).abs() <= 0.1 && ratio >= 14.0,
        format!("D2 segment {d1:.4}, D2 square {d2:.4}, RK4 halving ratio {ratio:.2}"),
    )
}

fn fixture_fidelity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for id in FixtureId::ALL {
        let f = fixture(id).map_err(|e| e.to_string())?;
        let m = &f.model;
        let mut identical = true;
        for (_, text) in id.sources() {
            let once = format_matrix_text(&parse_matrix_text(text).unwrap());
            let twice = format_matrix_text(&parse_matrix_text(&once).unwrap());
            identical &= once == twice && parse_matrix_text(&once).unwrap() == parse_matrix_text(text).unwrap();
        }
        let json = model_to_json(m);
        let back = model_from_json(&json).map_err(|e| e.to_string())?;
        identical &= model_to_json(&back) == json && &back == m;

        let rho = spectral_radius(m.a());
        let oracle = power_iteration_radius(m.a(), 200_000);
        let rho_ok = (rho - oracle).abs() <= 1e-6;

        let code = attractor_recon::cli::run([
            "attractor-recon",
            "--out-dir",
            dir.path().to_str().unwrap(),
            "simulate",
            "--fixture",
            id.name(),
            "--steps",
            "1000",
        ]);
        let sim_ok = match code {
            0 => {
                let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
                !csv.contains("NaN") && !csv.contains("inf")
            }
            4 => rho > 1.0,
            _ => false,
        };
        ok &= identical && rho_ok && sim_ok;
        lines.push(format!(
            "{} round-trip {identical}, rho {rho:.9} vs oracle {oracle:.9}, simulate exit {code}",
            id.name()
        ));
    }
    check(ok, lines.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = write_rossler(dir.path(), 11, "out");
    let strip = |report: &attractor_recon::cli::RunReport| {
        let mut value = serde_json::to_value(report).unwrap();
        value.as_object_mut().unwrap().remove("timings");
        serde_json::to_string(&value).unwrap()
    };
    let first = run_pipeline(&config).map_err(|e| e.to_string())?;
    let first_file = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let first_model = std::fs::read_to_string(dir.path().join("out/model.json")).unwrap();
    let second = run_pipeline(&config).map_err(|e| e.to_string())?;
    let second_file = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let second_model = std::fs::read_to_string(dir.path().join("out/model.json")).unwrap();
    let without_timings = |text: &str| {
        let mut value: serde_json::Value = serde_json::from_str(text).unwrap();
        value.as_object_mut().unwrap().remove("timings");
        serde_json::to_string(&value).unwrap()
    };
    let same = strip(&first.report) == strip(&second.report)
        && without_timings(&first_file) == without_timings(&second_file)
        && first_model == second_model;
    check(same, format!("two Rössler pipeline runs, report.json equal modulo timings: {same}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 Rössler round-trip", rossler_round_trip),
        ("2 identification exactness", identification_exactness),
        ("3 transform-fitting exactness", transform_exactness),
        ("4 GA vs exhaustive oracle", ga_matches_exhaustive),
        ("5 symmetry -> basis rule", symmetry_basis_rule),
        ("6 chaos metrics sanity", chaos_metric_sanity),
        ("7 fixture fidelity", fixture_fidelity),
        ("8 determinism", determinism),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
