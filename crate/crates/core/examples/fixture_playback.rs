//! Play back the bundled published models from rest and report their
//! spectral radii.
//!
//! ```text
//! cargo run --release --example fixture_playback
//! ```

use attractor_recon::dynamics::{fixture, simulate, spectral_radius, FixtureId};
use nalgebra::DVector;

fn main() -> attractor_recon::Result<()> {
    for id in FixtureId::ALL {
        let model = fixture(id)?.model;
        let rho = spectral_radius(model.a());
        let trajectory = simulate(&model, &DVector::zeros(model.n()), 1000)?;
        let last = trajectory.outputs.row(1000);
        let peak = trajectory.outputs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!(
            "{:<24} n = {}, p = {}, q = {}, rho(A) = {rho:.6}, |y| max {peak:.4e}, y(1000) = {:.4e}",
            id.name(),
            model.n(),
            model.p(),
            model.q(),
            last[0]
        );
    }
    Ok(())
}
