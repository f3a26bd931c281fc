//! Pick a delay and an embedding dimension for the Rössler `x1` channel.
//!
//! Prints the autocorrelation 1/e lag, the first AMI minimum and the
//! false-nearest-neighbor curve, then builds the delay embedding.
//!
//! ```text
//! cargo run --release --example embed_rossler
//! ```

use attractor_recon::delay_embed;
use attractor_recon::dynamics::{rk4_integrate, Rossler};
use attractor_recon::embedding::{
    autocorrelation_delay, average_mutual_information, default_bins, false_nearest_neighbors, FnnParams,
};

fn main() -> attractor_recon::Result<()> {
    let series = rk4_integrate(&Rossler::default(), &[1.0, 1.0, 1.0], 0.05, 19_999, 2000)?;

    let acf = autocorrelation_delay(&series, 0, 100)?;
    let ami = average_mutual_information(&series, 0, 100, default_bins(series.len()))?;
    println!("autocorrelation 1/e lag: {}", acf.lag);
    println!("first AMI minimum:       {} ({} bins)", ami.first_minimum, ami.bins);

    let tau = ami.first_minimum;
    let fnn = false_nearest_neighbors(&series, 0, tau, 6, &FnnParams::default())?;
    for (m, fraction) in &fnn.fractions {
        println!("  m = {m}: false neighbors {:.4}", fraction);
    }
    let m = fnn.first_below(0.05).unwrap_or(6);

    let embedding = delay_embed(&series, 0, tau, m)?;
    println!("embedding: tau = {tau}, m = {m}, {} delay vectors", embedding.len());
    Ok(())
}
