//! Correlation dimension and largest Lyapunov exponent of the Rössler
//! attractor, from the full state and from a delay embedding of `x1`.
//!
//! ```text
//! cargo run --release --example chaos_metrics
//! ```

use attractor_recon::delay_embed;
use attractor_recon::dynamics::{rk4_integrate, Rossler};
use attractor_recon::validate::{chaos_metrics, mean_period, DimensionOptions, LyapunovOptions};

fn main() -> attractor_recon::Result<()> {
    let dt = 0.05;
    let series = rk4_integrate(&Rossler::default(), &[1.0, 1.0, 1.0], dt, 19_999, 2000)?;
    let period = mean_period(&series.channel(0)?)?.round() as usize;
    let lyapunov = LyapunovOptions { mean_period: period, horizon: 60, ..LyapunovOptions::default() };
    println!("mean period: {period} samples");

    let embedded = delay_embed(&series, 0, 26, 3)?;
    for (name, points) in [("state (x1, x2, x3)", series.values()), ("delay embedding", embedded.states())] {
        let dimension = DimensionOptions { theiler_window: period / 4, ..DimensionOptions::default() };
        let metrics = chaos_metrics(points, dt, &dimension, &lyapunov)?;
        let d2 = &metrics.correlation_dimension;
        let lle = &metrics.largest_lyapunov;
        println!(
            "{name:<20} D2 = {:.3} (r^2 {:.4}{}), lambda_max = {:.4} per unit time (r^2 {:.3})",
            d2.dimension,
            d2.r_squared,
            if d2.reliable { "" } else { ", unreliable" },
            lle.exponent,
            lle.r_squared
        );
    }
    Ok(())
}
