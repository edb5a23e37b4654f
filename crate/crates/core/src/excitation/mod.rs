//! Shell partition, pair-excitation families and their statistics.
pub mod census;
pub mod family;
pub mod shells;
pub mod stats;

pub use census::{census_all, error_pair_census, Census};
pub use family::{generate_family, ExcitationFamily, FamilyContext, PairExcitationOp, TrialSetup, WTable};
pub use shells::{build_shells, is_nontrivial, BoxCover, Part, Shell, ShellOverrides, ShellPartition, ShellRadii};
pub use stats::{energy_components, n_alpha, pairing_expectation, q_statistics, ComponentReport};

#[cfg(test)]
pub(crate) mod fixture {
    use super::*;
    use crate::fock::{MomentumLattice, OccupationState};
    use crate::potential::RadialPotential;

    pub const NINE: [[i32; 3]; 9] =
        [[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 2, 0], [0, -2, 0], [1, 2, 0], [-1, -2, 0], [1, -2, 0], [-1, 2, 0]];

    pub fn overrides() -> ShellOverrides {
        ShellOverrides { radii: Some(ShellRadii { l_min: 1.0, l_max: 1.2, h_min: 2.0, h_max: 3.0 }), m_c: Some(2), eta: None }
    }

    pub fn nine_mode(pot: &RadialPotential) -> TrialSetup {
        let lat = MomentumLattice::from_modes(2.0 * std::f64::consts::PI, NINE.to_vec()).unwrap();
        let rho = 4.0 / lat.volume();
        TrialSetup::new(lat, pot, rho, overrides(), (1, 1)).unwrap()
    }

    pub fn square() -> RadialPotential {
        RadialPotential::square(2.0, 1.0).unwrap()
    }

    pub fn alpha(setup: &TrialSetup, spec: &str) -> OccupationState {
        OccupationState::parse(&setup.lattice, spec).unwrap()
    }
}
