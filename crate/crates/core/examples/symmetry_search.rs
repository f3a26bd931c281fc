//! Search delay-embedded signals for segment-to-segment transforms and read
//! off the recommended forcing basis.
//!
//! A noisy oscillation maps onto itself by rotations, a growing two-harmonic
//! spiral by scalings, and white noise by nothing in particular.
//!
//! ```text
//! cargo run --release --example symmetry_search
//! ```

use attractor_recon::cli::commands::{stage_embed, stage_symmetry};
use attractor_recon::cli::RunConfig;
use attractor_recon::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, samples: &[f64], dt: f64) -> attractor_recon::Result<()> {
    let series = TimeSeries::from_samples(samples, dt)?;
    let config = RunConfig { dt, seed: 1, ..RunConfig::default() };
    let embed = stage_embed(&series, &config)?;
    let file = stage_symmetry(&embed.embedding, &config)?;
    let r = &file.report;
    println!(
        "{name:<7} tau {} m {}: {} segments, {} of {} fits accepted, votes {:?}",
        embed.summary.tau,
        embed.summary.m,
        file.segments,
        r.transforms.len(),
        file.evaluations,
        r.votes
    );
    if let Some(best) = &file.best {
        println!("        best fit {:?} {} -> {}, residual {:.2e}", best.class, best.source_segment, best.target_segment, best.residual);
    }
    println!("        dominant {:?} -> basis {:?}", r.dominant_class, r.recommended_basis.terms);
    Ok(())
}

fn main() -> attractor_recon::Result<()> {
    let dt = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wave: Vec<f64> = (0..4000).map(|k| (k as f64 * dt).sin() + 0.02 * rng.random_range(-1.0..1.0)).collect();
    let spiral: Vec<f64> = (0..1000)
        .map(|k| {
            let t = k as f64 * dt;
            (0.1 * t).exp() * (t.sin() + 0.5 * (2.0 * t).sin()) + 1e-4 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let noise: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();

    report("wave", &wave, dt)?;
    report("spiral", &spiral, dt)?;
    report("noise", &noise, dt)?;
    Ok(())
}
