//! Integrate the Rössler system and write the bundled pipeline input.
//!
//! ```text
//! cargo run --release --example rossler_data [-- path/to/rossler.csv]
//! ```

use std::path::PathBuf;

use attractor_recon::dynamics::{rk4_integrate, Rossler};
use attractor_recon::io::{series_to_csv, write_text};

fn main() -> attractor_recon::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/rossler.csv"));
    // 2000 transient steps discarded, then 20000 samples at dt = 0.05
    let series = rk4_integrate(&Rossler::default(), &[1.0, 1.0, 1.0], 0.05, 19_999, 2000)?;
    write_text(&path, &series_to_csv(&series))?;
    println!("wrote {} samples x {} channels to {}", series.len(), series.channels(), path.display());
    Ok(())
}
