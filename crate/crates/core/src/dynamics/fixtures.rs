//! Published fitted models bundled as plain-text matrices.
//!
//! The matrices are transcribed verbatim (decimal commas written as points).
//! Neither the sampling interval nor the initial state was published, so
//! playback uses `dt = 0.01` and `x0 = 0`; trajectories are illustrative, not
//! a reproduction of the original figures.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::identify::{BasisTerm, ForcingBasis, StateSpaceModel};
use crate::io::parse_matrix_text;

pub const FIXTURE_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FixtureId {
    Example2Cooling,
    Example3ViscousFluid,
    Example5Traffic,
}

impl FixtureId {
    pub const ALL: [FixtureId; 3] = [FixtureId::Example2Cooling, FixtureId::Example3ViscousFluid, FixtureId::Example5Traffic];

    pub fn name(self) -> &'static str {
        match self {
            FixtureId::Example2Cooling => "example2-cooling",
            FixtureId::Example3ViscousFluid => "example3-viscous-fluid",
            FixtureId::Example5Traffic => "example5-traffic",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fixture {name:?}")))
    }

    /// Raw fixture files `(A, B, C)`.
    pub fn sources(self) -> [(&'static str, &'static str); 3] {
        match self {
            FixtureId::Example2Cooling => [
                ("example2_a.txt", include_str!("../../fixtures/example2_a.txt")),
                ("example2_b.txt", include_str!("../../fixtures/example2_b.txt")),
                ("example2_c.txt", include_str!("../../fixtures/example2_c.txt")),
            ],
            FixtureId::Example3ViscousFluid => [
                ("example3_a.txt", include_str!("../../fixtures/example3_a.txt")),
                ("example3_b.txt", include_str!("../../fixtures/example3_b.txt")),
                ("example3_c.txt", include_str!("../../fixtures/example3_c.txt")),
            ],
            FixtureId::Example5Traffic => [
                ("example5_a.txt", include_str!("../../fixtures/example5_a.txt")),
                ("example5_b.txt", include_str!("../../fixtures/example5_b.txt")),
                ("example5_c.txt", include_str!("../../fixtures/example5_c.txt")),
            ],
        }
    }

    pub fn basis(self) -> ForcingBasis {
        match self {
            // t^2 - 2t - 0.93, sin(t - 10)
            FixtureId::Example2Cooling => ForcingBasis::new(vec![
                BasisTerm::PolynomialSeries { coefficients: vec![-0.93, -2.0, 1.0] },
                BasisTerm::sinusoid(1.0, -10.0),
            ]),
            // exp(10 t)
            FixtureId::Example3ViscousFluid => ForcingBasis::new(vec![BasisTerm::exponential(10.0)]),
            // exp(t^0.0001) sin(t^0.4)
            FixtureId::Example5Traffic => ForcingBasis::new(vec![BasisTerm::product(
                BasisTerm::power_time(1e-4, BasisTerm::exponential(1.0)),
                BasisTerm::power_time(0.4, BasisTerm::sinusoid(1.0, 0.0)),
            )]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureModel {
    pub id: FixtureId,
    pub model: StateSpaceModel,
}

fn matrices(id: FixtureId) -> Result<[DMatrix<f64>; 3]> {
    let [a, b, c] = id.sources();
    Ok([parse_matrix_text(a.1)?, parse_matrix_text(b.1)?, parse_matrix_text(c.1)?])
}

pub fn fixture(id: FixtureId) -> Result<FixtureModel> {
    let [a, b, c] = matrices(id)?;
    let model = StateSpaceModel::new(a, b, c, id.basis(), FIXTURE_DT)?;
    Ok(FixtureModel { id, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_match_publication() {
        let shapes = [
            (FixtureId::Example2Cooling, (9, 2, 2)),
            (FixtureId::Example3ViscousFluid, (6, 1, 2)),
            (FixtureId::Example5Traffic, (4, 1, 1)),
        ];
        for (id, (n, p, q)) in shapes {
            let f = fixture(id).unwrap();
            assert_eq!((f.model.n(), f.model.p(), f.model.q()), (n, p, q), "{id:?}");
        }
    }

    #[test]
    fn spot_check_entries() {
        let e2 = fixture(FixtureId::Example2Cooling).unwrap().model;
        assert_eq!(e2.a()[(8, 5)], 1.5644);
        assert_eq!(e2.b()[(0, 0)], -3.9240);
        assert_eq!(e2.c()[(1, 3)], 9.1780);
        let e3 = fixture(FixtureId::Example3ViscousFluid).unwrap().model;
        assert_eq!(e3.a()[(3, 0)], -8.12e-5);
        assert_eq!(e3.b()[(0, 0)], -7.24e-4);
        let e5 = fixture(FixtureId::Example5Traffic).unwrap().model;
        assert_eq!(e5.c().as_slice(), &[21037.0, -124.0, 1202.0, -302.0]);
    }

    #[test]
    fn names_round_trip() {
        for id in FixtureId::ALL {
            assert_eq!(FixtureId::from_name(id.name()).unwrap(), id);
        }
        assert!(FixtureId::from_name("example4").is_err());
    }
}
