use super::family::{ExcitationFamily, WTable};
use super::shells::{classify, Part, ShellPartition, PARTS};
use crate::error::{domain, Result};
use crate::fock::{apply_hamiltonian, apply_ladders, Ladder, MomentumLattice, OccupationState, StateVector, VhatTable};
use crate::scattering::WNorms;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;

/// N_α = α(0)² + Σ_{u ≠ ±v} 2α(u)α(v) over ordered pairs in P_0 ∪ P_L.
pub fn n_alpha(lattice: &MomentumLattice, shells: &ShellPartition, alpha: &OccupationState) -> f64 {
    let low = shells.low_modes();
    let zero = shells.p0[0];
    let a0 = alpha.get(zero) as f64;
    let mut s = a0 * a0;
    for &u in &low {
        for &v in &low {
            if u == v || lattice.neg_index(u) == v {
                continue;
            }
            s += 2.0 * alpha.get(u) as f64 * alpha.get(v) as f64;
        }
    }
    s
}

/// Q_α(u_1..u_s) = Σ_β Π β(u_i) |f_α(β)|².
pub fn q_statistics(family: &ExcitationFamily, modes: &[usize]) -> f64 {
    family.members.iter().map(|m| modes.iter().map(|&u| m.occ.get(u) as f64).product::<f64>() * (2.0 * m.log_mag).exp()).sum()
}

/// Σ |f|² over members with β(u) ≠ α(u).
pub fn complement_mass(family: &ExcitationFamily, u: usize) -> f64 {
    family.members.iter().filter(|m| m.occ.get(u) != family.alpha.get(u)).map(|m| (2.0 * m.log_mag).exp()).sum()
}

/// Upper bound α(0)²w_k²/|Λ|² + Σ_{u≠±v} 2α(u)α(v)|w_k w_{u+v−k}|/|Λ|² on Q_α(k), k ∈ P_H.
pub fn q_high_bound(lattice: &MomentumLattice, shells: &ShellPartition, w: &WTable, alpha: &OccupationState, k: usize) -> f64 {
    let vol2 = lattice.volume().powi(2);
    let zero = shells.p0[0];
    let a0 = alpha.get(zero) as f64;
    let mut s = a0 * a0 * w.at(k).powi(2);
    let low = shells.low_modes();
    for &u in &low {
        for &v in &low {
            if u == v || lattice.neg_index(u) == v {
                continue;
            }
            let partner = lattice.sum_index(u, v, k).map_or(0.0, |j| w.at(j));
            s += 2.0 * alpha.get(u) as f64 * alpha.get(v) as f64 * (w.at(k) * partner).abs();
        }
    }
    s / vol2
}

/// ⟨Ψ_α| a†_{c1} a†_{c2} a_{a1} a_{a2} |Ψ_α⟩ via the map β ↦ T(β).
pub fn pairing_expectation(family: &ExcitationFamily, c1: usize, c2: usize, a1: usize, a2: usize) -> Complex64 {
    let ops = [Ladder::Create(c1), Ladder::Create(c2), Ladder::Annihilate(a1), Ladder::Annihilate(a2)];
    let mut s = Complex64::new(0.0, 0.0);
    for m in &family.members {
        if let Some((t, factor)) = apply_ladders(&ops, &m.occ) {
            if let Some(j) = family.index_of(&t) {
                s += family.members[j].amplitude().conj() * m.amplitude() * factor;
            }
        }
    }
    s
}

/// Restricted pair sum A_{u1,u2,k1,k2,k3,k4} with the main-term prediction and residual bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ACoefficient {
    pub value: f64,
    pub imag: f64,
    pub main_term: f64,
    pub bound: f64,
    pub pairs: usize,
}

pub fn a_coefficients(
    family: &ExcitationFamily,
    w: &WTable,
    rho: f64,
    (u1, u2): (usize, usize),
    (k1, k2, k3, k4): (usize, usize, usize, usize),
) -> ACoefficient {
    let ops = [Ladder::Create(k1), Ladder::Create(k2), Ladder::Annihilate(k3), Ladder::Annihilate(k4)];
    let down = [Ladder::Annihilate(u1), Ladder::Annihilate(u2)];
    let mut s = Complex64::new(0.0, 0.0);
    let mut pairs = 0;
    for anc in &family.members {
        let Some((mid, _)) = apply_ladders(&down, &anc.occ) else { continue };
        let mut beta = mid.clone();
        let mut gamma = mid;
        for k in [k1, k2] {
            beta.set(k, beta.get(k) + 1);
        }
        for k in [k3, k4] {
            gamma.set(k, gamma.get(k) + 1);
        }
        let (Some(bi), Some(gi)) = (family.index_of(&beta), family.index_of(&gamma)) else { continue };
        if let Some((img, factor)) = apply_ladders(&ops, &gamma) {
            if img == beta {
                pairs += 1;
                s += family.members[bi].amplitude().conj() * family.members[gi].amplitude() * factor;
            }
        }
    }
    let vol2 = family.volume * family.volume;
    let zero = family.zero_mode();
    let (a1, a2) = (family.alpha.get(u1) as f64, family.alpha.get(u2) as f64);
    let fa: f64 = if u1 == zero && u2 == zero { 1.0 } else { 2.0 };
    let main_term = a1 * a2 * fa * fa * w.at(k1) * w.at(k3) / vol2;
    // ρ^{1/8}|Λ|^{-2} × {α(u1)α(u2) | Nα(u2) | N²} by how many of u1, u2 are the condensate
    let n = family.alpha.total() as f64;
    let size = match (u1 == zero, u2 == zero) {
        (false, false) => a1 * a2,
        (true, true) => n * n,
        (true, false) => n * a2,
        (false, true) => n * a1,
    };
    ACoefficient { value: s.re, imag: s.im, main_term, bound: rho.powf(0.125) * size / vol2, pairs }
}

/// Per-part expectation values in Ψ_α and in |α⟩ with the predicted main terms.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentReport {
    pub n_alpha: f64,
    pub volume: f64,
    pub kinetic: (f64, f64),
    pub parts: BTreeMap<String, (f64, f64)>,
    pub total_psi: f64,
    pub total_alpha: f64,
    /// Main terms: kinetic, L̃H, HH.
    pub main_kinetic: f64,
    pub main_low_high: f64,
    pub main_high_high: f64,
    /// −(½V̂_0 − 4πa) N_α/|Λ|.
    pub main_total: f64,
}

impl ComponentReport {
    pub fn part(&self, p: Part) -> (f64, f64) {
        self.parts[&format!("{p:?}")]
    }

    /// Exact energy shift against the main-term prediction for kinetic, L̃H, HH.
    pub fn residuals(&self) -> [(f64, f64); 3] {
        let lh = self.part(Part::LowHigh);
        let hh = self.part(Part::HighHigh);
        [(self.kinetic.0 - self.kinetic.1, self.main_kinetic), (lh.0 - lh.1, self.main_low_high), (hh.0 - hh.1, self.main_high_high)]
    }
}

pub fn energy_components(
    lattice: &MomentumLattice,
    shells: &ShellPartition,
    vhat: &VhatTable,
    norms: &WNorms,
    a: f64,
    family: &ExcitationFamily,
) -> Result<ComponentReport> {
    if shells.len() != lattice.len() || family.alpha.counts().len() != lattice.len() {
        return domain("shell partition and family do not match the lattice");
    }
    let psi = family.state();
    let alpha = StateVector::basis(family.alpha.clone());
    let expect = |s: &StateVector, kin: bool, part: Option<Part>| {
        let keep = |t: &crate::fock::QuarticTerm| part.is_some_and(|p| classify(shells, t) == p);
        s.inner(&apply_hamiltonian(lattice, vhat, s, kin, &keep)).re
    };
    let kinetic = (expect(&psi, true, None), expect(&alpha, true, None));
    let mut parts = BTreeMap::new();
    for p in PARTS {
        parts.insert(format!("{p:?}"), (expect(&psi, false, Some(p)), expect(&alpha, false, Some(p))));
    }
    let total_psi = kinetic.0 + parts.values().map(|v| v.0).sum::<f64>();
    let total_alpha = kinetic.1 + parts.values().map(|v| v.1).sum::<f64>();
    let na = n_alpha(lattice, shells, &family.alpha);
    let vol = lattice.volume();
    Ok(ComponentReport {
        n_alpha: na,
        volume: vol,
        kinetic,
        parts,
        total_psi,
        total_alpha,
        main_kinetic: norms.grad_sq * na / vol,
        main_low_high: -2.0 * norms.vw * na / vol,
        main_high_high: norms.vw2 * na / vol,
        main_total: -(norms.half_v0 - 4.0 * std::f64::consts::PI * a) * na / vol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::fixture::*;
    use crate::excitation::shells::build_shells;
    use crate::potential::RadialPotential;
    use crate::scattering::w_norms;
    use std::f64::consts::PI;

    #[test]
    fn n_alpha_examples() {
        let lat = MomentumLattice::cube(2.0 * PI, 1).unwrap();
        let sh = build_shells(&lat, 0.01, overrides()).unwrap();
        let a = OccupationState::parse(&lat, "0,0,0:2;1,0,0:1;0,1,0:1").unwrap();
        // literal ordered double sum over P_0 ∪ P_L
        let low = sh.low_modes();
        let mut direct = 4.0;
        for &u in &low {
            for &v in &low {
                let (mu, mv) = (lat.mode(u), lat.mode(v));
                if u != v && mu != [-mv[0], -mv[1], -mv[2]] {
                    direct += 2.0 * a.get(u) as f64 * a.get(v) as f64;
                }
            }
        }
        assert_eq!(n_alpha(&lat, &sh, &a), direct);
        assert_eq!(direct, 24.0);
        let b = OccupationState::parse(&lat, "0,0,0:2;0,1,0:1;1,0,0:1").unwrap();
        assert_eq!(n_alpha(&lat, &sh, &b), 24.0);
        let c = OccupationState::parse(&lat, "0,0,0:5").unwrap();
        assert_eq!(n_alpha(&lat, &sh, &c), 25.0);
    }

    #[test]
    fn q_matches_number_operator() {
        let s = nine_mode(&square());
        let f = s.family(&alpha(&s, "0,0,0:2;1,0,0:1;-1,0,0:1")).unwrap();
        let psi = f.state();
        for u in 0..s.lattice.len() {
            let brute = psi.expectation(&[Ladder::Create(u), Ladder::Annihilate(u)]).re;
            assert!((q_statistics(&f, &[u]) - brute).abs() < 1e-10);
        }
        for &u in &s.shells.pl {
            let gap = f.alpha.get(u) as f64 - q_statistics(&f, &[u]);
            assert!(gap >= 0.0);
            assert!((gap - complement_mass(&f, u)).abs() < 1e-12);
        }
        for &k in &s.shells.ph {
            assert!(q_statistics(&f, &[k]) <= q_high_bound(&s.lattice, &s.shells, &s.w, &f.alpha, k) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pairing_matches_brute_force() {
        let s = nine_mode(&square());
        let lat = &s.lattice;
        let f = s.family(&alpha(&s, "0,0,0:2;1,0,0:1;-1,0,0:1")).unwrap();
        let psi = f.state();
        let n = lat.len();
        let mut nonzero = 0;
        for c1 in 0..n {
            for c2 in 0..n {
                for a1 in 0..n {
                    let Some(a2) = lat.sum_index(c1, c2, a1) else { continue };
                    let t = pairing_expectation(&f, c1, c2, a1, a2);
                    let ops = [Ladder::Create(c1), Ladder::Create(c2), Ladder::Annihilate(a1), Ladder::Annihilate(a2)];
                    let b = psi.expectation(&ops);
                    assert!((t - b).norm() < 1e-10);
                    if b.norm() > 1e-6 {
                        nonzero += 1;
                    }
                }
            }
        }
        assert!(nonzero > 10);
        let zero = s.shells.p0[0];
        let u = lat.index_of([1, 0, 0]).unwrap();
        assert!(pairing_expectation(&f, zero, zero, u, lat.neg_index(u)).norm() < 1e-15);
    }

    #[test]
    fn a_coefficient_zero_cases() {
        let s = nine_mode(&square());
        let lat = &s.lattice;
        let f = s.family(&alpha(&s, "0,0,0:2;1,0,0:1;-1,0,0:1")).unwrap();
        let u = lat.index_of([1, 0, 0]).unwrap();
        let k1 = lat.index_of([0, 2, 0]).unwrap();
        let k3 = lat.index_of([1, 2, 0]).unwrap();
        let quad = (k1, lat.neg_index(k1), k3, lat.neg_index(k3));
        assert_eq!(a_coefficients(&f, &s.w, s.rho, (u, lat.neg_index(u)), quad).value, 0.0);
        let z = nine_mode(&RadialPotential::zero());
        let fz = z.family(&alpha(&z, "0,0,0:4")).unwrap();
        let zero = z.shells.p0[0];
        let c = a_coefficients(&fz, &z.w, z.rho, (zero, zero), quad);
        assert_eq!((c.value, c.main_term), (0.0, 0.0));
    }

    #[test]
    fn a_coefficient_condensate_main_term() {
        let s = nine_mode(&square());
        let lat = &s.lattice;
        let f = s.family(&alpha(&s, "0,0,0:4")).unwrap();
        let zero = s.shells.p0[0];
        let k1 = lat.index_of([0, 2, 0]).unwrap();
        let k3 = lat.index_of([1, 2, 0]).unwrap();
        let c = a_coefficients(&f, &s.w, s.rho, (zero, zero), (k1, lat.neg_index(k1), k3, lat.neg_index(k3)));
        assert!(c.pairs > 0);
        assert!(c.imag.abs() < 1e-15);
        assert_eq!(c.value.signum(), c.main_term.signum());
    }

    #[test]
    fn zero_potential_components_vanish() {
        let s = nine_mode(&RadialPotential::zero());
        let vh = VhatTable::new(&s.lattice, &RadialPotential::zero()).unwrap();
        let f = s.family(&alpha(&s, "0,0,0:2;1,0,0:1;-1,0,0:1")).unwrap();
        let norms = WNorms { grad_sq: 0.0, vw: 0.0, vw2: 0.0, half_v0: 0.0 };
        let r = energy_components(&s.lattice, &s.shells, &vh, &norms, 0.0, &f).unwrap();
        assert_eq!(r.kinetic.0, r.kinetic.1);
        assert_eq!(r.total_psi, f.alpha.kinetic(&s.lattice));
        assert!(r.parts.values().all(|v| v.0 == 0.0 && v.1 == 0.0));
        assert_eq!(r.main_total, 0.0);
    }

    #[test]
    fn main_terms_cancel() {
        let s = nine_mode(&square());
        let vh = VhatTable::new(&s.lattice, &square()).unwrap();
        let norms = w_norms(&s.solution).unwrap();
        let f = s.family(&alpha(&s, "0,0,0:4")).unwrap();
        let r = energy_components(&s.lattice, &s.shells, &vh, &norms, s.solution.a, &f).unwrap();
        let sum = r.main_kinetic + r.main_low_high + r.main_high_high;
        assert!((sum - r.main_total).abs() < 1e-6 * r.main_total.abs());
        let full = crate::fock::energy_expectation(&s.lattice, &vh, &f.state());
        assert!((r.total_psi - full).abs() < 1e-10);
    }
}
