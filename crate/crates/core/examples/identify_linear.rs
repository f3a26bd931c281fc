//! Recover a forced linear system `x(k+1) = A x(k) + B sin(omega t)` from its
//! trajectory, letting the grid search find `omega` and the phase.
//!
//! ```text
//! cargo run --release --example identify_linear
//! ```

use attractor_recon::identify::{build_regression, refine_basis, solve_least_squares, BasisGrid};
use attractor_recon::{BasisTerm, ForcingBasis};
use nalgebra::{DMatrix, DVector};

fn main() -> attractor_recon::Result<()> {
    let dt = 0.1;
    let omega = 0.7;
    let a = DMatrix::from_row_slice(2, 2, &[0.9, -0.2, 0.15, 0.85]);
    let b = DMatrix::from_column_slice(2, 1, &[0.5, -0.3]);

    let rows = 400;
    let mut states = DMatrix::zeros(rows, 2);
    let mut x = DVector::from_vec(vec![1.0, 0.0]);
    for k in 0..rows {
        states.set_row(k, &x.transpose());
        x = &a * &x + &b * (omega * k as f64 * dt).sin();
    }

    let mut grid = BasisGrid::default_for(rows, dt);
    grid.omega.push(omega);
    let seed = ForcingBasis::new(vec![BasisTerm::sinusoid(1.0, 0.0)]);
    let (basis, report) = refine_basis(&states, &seed, dt, &grid, 0.0)?;
    println!("selected basis: {:?}", basis.terms);
    println!("one-step residual RMS: {:?}", report.residual_rms);

    let regression = build_regression(&states, &basis, dt)?;
    let solution = solve_least_squares(&regression.z, &regression.targets, 0.0)?;
    println!("A =\n{:.6}", solution.a);
    println!("B =\n{:.6}", solution.b);
    println!("max |A error| = {:.2e}", (&solution.a - &a).abs().max());
    println!("condition estimate = {:.3e}", solution.condition_estimate);
    Ok(())
}
