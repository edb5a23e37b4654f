use crate::error::{domain, Result};
use crate::fock::{MomentumLattice, QuarticTerm};
use serde::Serialize;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Shell {
    Zero,
    Infrared,
    Low,
    High,
    /// Between P_L and P_H, or beyond P_H; never occupied by the construction.
    Other,
}

/// Momentum radii [l_min, l_max] for P_L and [h_min, h_max] for P_H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellRadii {
    pub l_min: f64,
    pub l_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShellOverrides {
    pub radii: Option<ShellRadii>,
    pub m_c: Option<u32>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ShellPartition {
    class: Vec<Shell>,
    pub p0: Vec<usize>,
    pub pi: Vec<usize>,
    pub pl: Vec<usize>,
    pub ph: Vec<usize>,
    pub radii: ShellRadii,
    pub eps_l: f64,
    pub eta_l: f64,
    pub eps_h: f64,
    pub eta_h: f64,
    pub eta: f64,
    pub m_c: u32,
}

impl ShellPartition {
    pub fn class(&self, i: usize) -> Shell {
        self.class[i]
    }

    /// P_0 ∪ P_L.
    pub fn is_low(&self, i: usize) -> bool {
        matches!(self.class[i], Shell::Zero | Shell::Low)
    }

    pub fn is_high(&self, i: usize) -> bool {
        self.class[i] == Shell::High
    }

    pub fn low_modes(&self) -> Vec<usize> {
        let mut v = self.p0.clone();
        v.extend(&self.pl);
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }
}

/// Paper defaults: all four radii parameters ρ^η, η = 1/200, m_c = ⌈ρ^{-3η}⌉.
pub fn default_radii(rho: f64, eta: f64) -> ShellRadii {
    let e = rho.powf(eta);
    let third = rho.powf(1.0 / 3.0);
    ShellRadii { l_min: e * third, l_max: third / e, h_min: e, h_max: 1.0 / e }
}

pub fn build_shells(lattice: &MomentumLattice, rho: f64, overrides: ShellOverrides) -> Result<ShellPartition> {
    if !(rho > 0.0) {
        return domain(format!("rho = {rho} must be positive"));
    }
    let eta = overrides.eta.unwrap_or(1.0 / 200.0);
    let radii = overrides.radii.unwrap_or_else(|| default_radii(rho, eta));
    let ShellRadii { l_min, l_max, h_min, h_max } = radii;
    if !(0.0 < l_min && l_min <= l_max && l_max < h_min && h_min <= h_max) {
        return domain(format!("shell radii overlap or are out of order: {radii:?}"));
    }
    let m_c = overrides.m_c.unwrap_or_else(|| rho.powf(-3.0 * eta).ceil() as u32);
    if m_c < 1 {
        return domain("m_c must be at least 1");
    }
    let tol = 1e-12;
    let mut class = Vec::with_capacity(lattice.len());
    let (mut p0, mut pi, mut pl, mut ph) = (vec![], vec![], vec![], vec![]);
    for i in 0..lattice.len() {
        let p = lattice.p_abs(i);
        let c = if p == 0.0 {
            p0.push(i);
            Shell::Zero
        } else if p < l_min * (1.0 - tol) {
            pi.push(i);
            Shell::Infrared
        } else if p <= l_max * (1.0 + tol) {
            pl.push(i);
            Shell::Low
        } else if p >= h_min * (1.0 - tol) && p <= h_max * (1.0 + tol) {
            ph.push(i);
            Shell::High
        } else {
            Shell::Other
        };
        class.push(c);
    }
    let e = rho.powf(eta);
    Ok(ShellPartition { class, p0, pi, pl, ph, radii, eps_l: e, eta_l: e, eps_h: e, eta_h: e, eta, m_c })
}

/// Axis-aligned cubic cells of integer side over P_L and P_H.
#[derive(Debug, Clone)]
pub struct BoxCover {
    pub side_l: i32,
    pub side_h: i32,
    pub kappa_l: f64,
    pub kappa_h: f64,
    cell: Vec<Option<(Shell, [i32; 3])>>,
}

impl BoxCover {
    pub fn with_sides(lattice: &MomentumLattice, shells: &ShellPartition, rho: f64, side_l: i32, side_h: i32) -> Result<Self> {
        if side_l < 1 || side_h < 1 {
            return domain("box sides must be positive integers");
        }
        let cell = (0..lattice.len())
            .map(|i| {
                let n = lattice.mode(i);
                let side = match shells.class(i) {
                    Shell::Low => side_l,
                    Shell::High => side_h,
                    _ => return None,
                };
                Some((shells.class(i), [n[0].div_euclid(side), n[1].div_euclid(side), n[2].div_euclid(side)]))
            })
            .collect();
        // effective exponent of the momentum side, reported only
        let k = lattice.k_unit();
        let kappa = |s: i32| if rho < 1.0 && rho > 0.0 { (s as f64 * k).ln() / rho.ln() } else { f64::NAN };
        Ok(Self { side_l, side_h, kappa_l: kappa(side_l), kappa_h: kappa(side_h), cell })
    }

    /// Sides from exponents: round(ρ^κ / (2π/L)), at least 1.
    pub fn from_kappa(lattice: &MomentumLattice, shells: &ShellPartition, rho: f64, kappa_l: f64, kappa_h: f64) -> Result<Self> {
        let k = lattice.k_unit();
        let side = |kap: f64| ((rho.powf(kap) / k).round() as i32).max(1);
        let mut b = Self::with_sides(lattice, shells, rho, side(kappa_l), side(kappa_h))?;
        b.kappa_l = kappa_l;
        b.kappa_h = kappa_h;
        Ok(b)
    }

    pub fn cell(&self, i: usize) -> Option<(Shell, [i32; 3])> {
        self.cell[i]
    }

    pub fn same_box(&self, i: usize, j: usize) -> bool {
        self.cell[i].is_some() && self.cell[i] == self.cell[j]
    }

    /// Modes grouped by cell.
    pub fn groups(&self) -> HashMap<(Shell, [i32; 3]), Vec<usize>> {
        let mut m: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, c) in self.cell.iter().enumerate() {
            if let Some(c) = c {
                m.entry(*c).or_default().push(i);
            }
        }
        m
    }
}

/// No pair sums to zero, no pair sums to a third element, no two disjoint pairs share a sum.
pub fn is_nontrivial(lattice: &MomentumLattice, subset: &[usize]) -> bool {
    let m: Vec<[i32; 3]> = subset.iter().map(|&i| lattice.mode(i)).collect();
    let s = |a: [i32; 3], b: [i32; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let n = m.len();
    for i in 0..n {
        for j in i + 1..n {
            let sij = s(m[i], m[j]);
            if sij == [0, 0, 0] {
                return false;
            }
            for k in 0..n {
                if k != i && k != j && sij == m[k] {
                    return false;
                }
            }
            for k in 0..n {
                for l in k + 1..n {
                    if k != i && k != j && l != i && l != j && sij == s(m[k], m[l]) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Term groups of the interaction relative to a shell partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Part {
    /// Diagonal terms, {p, q} = {r, s}.
    Abab,
    /// All four momenta in P_0 ∪ P_L.
    LowLow,
    /// Two momenta in P_0 ∪ P_L, two in P_H.
    LowHigh,
    /// All four momenta in P_H.
    HighHigh,
    /// Everything else; vanishes in expectation on trial states.
    Rest,
}

pub const PARTS: [Part; 5] = [Part::Abab, Part::LowLow, Part::LowHigh, Part::HighHigh, Part::Rest];

pub fn classify(shells: &ShellPartition, t: &QuarticTerm) -> Part {
    if (t.p == t.r && t.q == t.s) || (t.p == t.s && t.q == t.r) {
        return Part::Abab;
    }
    let ids = [t.p, t.q, t.r, t.s];
    let low = ids.iter().filter(|&&i| shells.is_low(i)).count();
    let high = ids.iter().filter(|&&i| shells.is_high(i)).count();
    match (low, high) {
        (4, 0) => Part::LowLow,
        (2, 2) => Part::LowHigh,
        (0, 4) => Part::HighHigh,
        _ => Part::Rest,
    }
}
