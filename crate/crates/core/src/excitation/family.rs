use super::shells::{is_nontrivial, BoxCover, Shell, ShellPartition};
use crate::error::{domain, Error, Result};
use crate::fock::{MomentumLattice, OccupationState, StateVector};
use crate::numerics::ln_factorial;
use crate::scattering::{w_fourier, ScatteringSolution};
use num_complex::Complex64;
use std::collections::{HashMap, VecDeque};

/// A^{u,v}_{p,q}: annihilate u, v ∈ P_0 ∪ P_L, create p, q ∈ P_H, u + v = p + q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairExcitationOp {
    pub annihilate: (usize, usize),
    pub create: (usize, usize),
}

impl PairExcitationOp {
    pub fn new(lattice: &MomentumLattice, u: usize, v: usize, p: usize, q: usize) -> Result<Self> {
        if lattice.sum_index(u, v, p) != Some(q) {
            return domain("pair excitation does not conserve momentum");
        }
        Ok(Self { annihilate: (u, v), create: (p, q) })
    }

    /// Occupation image (no bosonic factor); None if an annihilation fails.
    pub fn apply(&self, occ: &OccupationState) -> Option<OccupationState> {
        let mut o = occ.clone();
        for i in [self.annihilate.0, self.annihilate.1] {
            let n = o.get(i);
            if n == 0 {
                return None;
            }
            o.set(i, n - 1);
        }
        for i in [self.create.0, self.create.1] {
            o.set(i, o.get(i) + 1);
        }
        Some(o)
    }

    pub fn is_condensate_pair(&self, zero: usize) -> bool {
        self.annihilate == (zero, zero)
    }
}

/// w_k on P_H modes, zero elsewhere.
#[derive(Debug, Clone)]
pub struct WTable(pub Vec<f64>);

impl WTable {
    pub fn new(lattice: &MomentumLattice, shells: &ShellPartition, sol: &ScatteringSolution) -> Result<Self> {
        let mut w = vec![0.0; lattice.len()];
        for &k in &shells.ph {
            w[k] = w_fourier(sol, lattice.p_abs(k))?;
        }
        Ok(Self(w))
    }

    pub fn at(&self, i: usize) -> f64 {
        self.0[i]
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub occ: OccupationState,
    /// ln|f_α(β)| after normalization.
    pub log_mag: f64,
    /// Power of i in f_α(β), mod 4.
    pub phase: u8,
    /// Number of A operators on the discovery path.
    pub depth: u32,
    /// Discovering member and operator; None for α itself.
    pub parent: Option<(usize, PairExcitationOp)>,
}

impl Member {
    pub fn amplitude(&self) -> Complex64 {
        let m = self.log_mag.exp();
        match self.phase % 4 {
            0 => Complex64::new(m, 0.0),
            1 => Complex64::new(0.0, m),
            2 => Complex64::new(-m, 0.0),
            _ => Complex64::new(0.0, -m),
        }
    }
}

/// M_α with coefficients f_α.
#[derive(Debug, Clone)]
pub struct ExcitationFamily {
    pub alpha: OccupationState,
    pub members: Vec<Member>,
    /// ln C_α relative to the unnormalized f_α(α) = √(|Λ|^{α(0)}/α(0)!).
    pub log_c: f64,
    index: HashMap<OccupationState, usize>,
    pub volume: f64,
    zero: usize,
}

pub const DEFAULT_FAMILY_GUARD: usize = 500_000;

/// Everything generation needs besides α.
pub struct FamilyContext<'a> {
    pub lattice: &'a MomentumLattice,
    pub shells: &'a ShellPartition,
    pub boxes: &'a BoxCover,
    pub w: &'a WTable,
    pub guard: usize,
}

impl FamilyContext<'_> {
    /// α ∈ M: support in P_0 ∪ P_I ∪ P_L, α(u) ≤ m_c on P_L.
    pub fn check_alpha(&self, alpha: &OccupationState) -> Result<()> {
        if alpha.counts().len() != self.lattice.len() {
            return domain("occupation does not match lattice");
        }
        for (i, n) in alpha.occupied() {
            match self.shells.class(i) {
                Shell::Zero | Shell::Infrared => {}
                Shell::Low if n as u32 <= self.shells.m_c => {}
                Shell::Low => return domain(format!("alpha exceeds m_c = {} on a P_L mode", self.shells.m_c)),
                _ => return domain(format!("alpha occupies mode {:?} outside P_0 ∪ P_I ∪ P_L", self.lattice.mode(i))),
            }
        }
        if self.shells.p0.is_empty() {
            return domain("lattice has no zero mode");
        }
        Ok(())
    }

    /// Membership in M̃_α.
    pub fn in_tilde(&self, alpha: &OccupationState, beta: &OccupationState) -> bool {
        let mut changed_cells = Vec::new();
        for i in 0..self.lattice.len() {
            let (a, b) = (alpha.get(i), beta.get(i));
            match self.shells.class(i) {
                Shell::Zero => {
                    if b > a {
                        return false;
                    }
                }
                Shell::Infrared | Shell::Other => {
                    if a != b {
                        return false;
                    }
                }
                Shell::Low => {
                    if b == a {
                        continue;
                    }
                    if b + 1 != a {
                        return false;
                    }
                    changed_cells.push(self.boxes.cell(i));
                }
                Shell::High => {
                    if b > 1 {
                        return false;
                    }
                    if b == 1 {
                        changed_cells.push(self.boxes.cell(i));
                    }
                }
            }
        }
        changed_cells.sort();
        changed_cells.windows(2).all(|w| w[0] != w[1])
    }

    /// P_L(β, α): low modes where β differs from α.
    pub fn changed_low(&self, alpha: &OccupationState, beta: &OccupationState) -> Vec<usize> {
        self.shells.pl.iter().copied().filter(|&u| alpha.get(u) != beta.get(u)).collect()
    }
}

/// Unnormalized ln|f| and phase of β relative to α by the closed form.
pub fn closed_form(ctx: &FamilyContext, alpha: &OccupationState, beta: &OccupationState) -> (f64, u8) {
    let zero = ctx.shells.p0[0];
    let vol = ctx.lattice.volume();
    let (a0, b0) = (alpha.get(zero) as u32, beta.get(zero) as u32);
    let mut lm = 0.5 * ((b0 as f64 - a0 as f64) * vol.ln() - ln_factorial(b0) + ln_factorial(a0));
    let mut phase = 0u8;
    for &k in &ctx.shells.ph {
        if beta.get(k) == 0 {
            continue;
        }
        let w = ctx.w.at(k);
        lm += 0.5 * w.abs().ln();
        if w > 0.0 {
            // √(−w) = i√w
            phase += 1;
        }
        if beta.get(k) > beta.get(ctx.lattice.neg_index(k)) {
            lm += 0.5 * std::f64::consts::LN_2;
        }
    }
    for u in ctx.changed_low(alpha, beta) {
        lm += 0.5 * (alpha.get(u) as f64 / vol).ln();
    }
    (lm, phase % 4)
}

/// Breadth-first closure of α under the condensate-pair and gated mixed-pair rules.
pub fn generate_family(ctx: &FamilyContext, alpha: &OccupationState) -> Result<ExcitationFamily> {
    ctx.check_alpha(alpha)?;
    let lat = ctx.lattice;
    let zero = ctx.shells.p0[0];
    let low = ctx.shells.low_modes();
    let usable: Vec<usize> = ctx.shells.ph.iter().copied().filter(|&k| ctx.w.at(k) != 0.0).collect();
    let mut members = vec![Member { occ: alpha.clone(), log_mag: 0.0, phase: 0, depth: 0, parent: None }];
    let mut index = HashMap::new();
    index.insert(alpha.clone(), 0usize);
    let mut queue = VecDeque::from([0usize]);
    while let Some(bi) = queue.pop_front() {
        let beta = members[bi].occ.clone();
        let depth = members[bi].depth;
        let mut found: Vec<(OccupationState, PairExcitationOp)> = Vec::new();
        for (ui, &u) in low.iter().enumerate() {
            if beta.get(u) == 0 {
                continue;
            }
            for &v in &low[ui..] {
                if beta.get(v) < if u == v { 2 } else { 1 } {
                    continue;
                }
                for &p in &usable {
                    let Some(q) = lat.sum_index(u, v, p) else { continue };
                    if q <= p || !ctx.shells.is_high(q) || ctx.w.at(q) == 0.0 {
                        continue;
                    }
                    if beta.get(p) != 0 || beta.get(q) != 0 {
                        continue;
                    }
                    let op = PairExcitationOp { annihilate: (u, v), create: (p, q) };
                    let condensate = u == zero && v == zero && lat.neg_index(p) == q;
                    if !condensate {
                        // gating: β(−p) = β(−q) = 0 and nontrivial P_L(γ, α)
                        if beta.get(lat.neg_index(p)) != 0 || beta.get(lat.neg_index(q)) != 0 {
                            continue;
                        }
                    }
                    let Some(gamma) = op.apply(&beta) else { continue };
                    if index.contains_key(&gamma) || !ctx.in_tilde(alpha, &gamma) {
                        continue;
                    }
                    if !condensate && !is_nontrivial(lat, &ctx.changed_low(alpha, &gamma)) {
                        continue;
                    }
                    found.push((gamma, op));
                }
            }
        }
        for (gamma, op) in found {
            if index.contains_key(&gamma) {
                continue;
            }
            if members.len() >= ctx.guard {
                return Err(Error::Size { what: "family members", value: members.len() as f64 + 1.0, limit: ctx.guard as f64 });
            }
            index.insert(gamma.clone(), members.len());
            queue.push_back(members.len());
            members.push(Member { occ: gamma, log_mag: 0.0, phase: 0, depth: depth + 1, parent: Some((bi, op)) });
        }
    }
    for m in members.iter_mut() {
        let (lm, ph) = closed_form(ctx, alpha, &m.occ);
        m.log_mag = lm;
        m.phase = ph;
    }
    let mx = members.iter().map(|m| m.log_mag).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = members.iter().map(|m| (2.0 * (m.log_mag - mx)).exp()).sum();
    let ln_norm = mx + 0.5 * sum.ln();
    for m in members.iter_mut() {
        m.log_mag -= ln_norm;
    }
    Ok(ExcitationFamily { alpha: alpha.clone(), members, log_c: -ln_norm, index, volume: lat.volume(), zero })
}

impl ExcitationFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, occ: &OccupationState) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// f_α(β), zero off M_α.
    pub fn coefficient(&self, occ: &OccupationState) -> Complex64 {
        self.index_of(occ).map_or(Complex64::new(0.0, 0.0), |i| self.members[i].amplitude())
    }

    pub fn zero_mode(&self) -> usize {
        self.zero
    }

    pub fn norm_sqr(&self) -> f64 {
        self.members.iter().map(|m| (2.0 * m.log_mag).exp()).sum()
    }

    /// Ψ_α as a sparse Fock vector.
    pub fn state(&self) -> StateVector {
        let mut s = StateVector::default();
        for m in &self.members {
            s.add(m.occ.clone(), m.amplitude());
        }
        s
    }

    /// A operators along the discovery path of member i, first applied first.
    pub fn path(&self, mut i: usize) -> Vec<PairExcitationOp> {
        let mut ops = Vec::new();
        while let Some((parent, op)) = self.members[i].parent {
            ops.push(op);
            i = parent;
        }
        ops.reverse();
        ops
    }

    /// Largest |Im f| over members.
    pub fn imaginary_defect(&self) -> f64 {
        self.members.iter().map(|m| m.amplitude().im.abs()).fold(0.0, f64::max)
    }
}

/// f_α(Aβ)/f_α(β); zero when Aβ leaves M_α.
pub fn coefficient_ratio(family: &ExcitationFamily, beta: &OccupationState, op: &PairExcitationOp) -> Result<Complex64> {
    let fb = family.coefficient(beta);
    if fb == Complex64::new(0.0, 0.0) {
        return domain("beta is not in the family");
    }
    Ok(op.apply(beta).map_or(Complex64::new(0.0, 0.0), |g| family.coefficient(&g) / fb))
}

/// Lattice, shells, boxes and w_k bundled for one trial-state computation.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub lattice: MomentumLattice,
    pub shells: ShellPartition,
    pub boxes: BoxCover,
    pub w: WTable,
    pub solution: ScatteringSolution,
    pub rho: f64,
}

impl TrialSetup {
    /// Box sides in lattice units; `(1, 1)` puts every mode in its own box.
    pub fn new(
        lattice: MomentumLattice,
        potential: &crate::potential::RadialPotential,
        rho: f64,
        overrides: super::shells::ShellOverrides,
        sides: (i32, i32),
    ) -> Result<Self> {
        let shells = super::shells::build_shells(&lattice, rho, overrides)?;
        let boxes = BoxCover::with_sides(&lattice, &shells, rho, sides.0, sides.1)?;
        let r0 = potential.range().max(1e-3);
        let solution = crate::scattering::solve_zero_energy(potential, 2.0 * r0, r0 / 2000.0)?;
        let w = WTable::new(&lattice, &shells, &solution)?;
        Ok(Self { lattice, shells, boxes, w, solution, rho })
    }

    pub fn context(&self, guard: usize) -> FamilyContext<'_> {
        FamilyContext { lattice: &self.lattice, shells: &self.shells, boxes: &self.boxes, w: &self.w, guard }
    }

    pub fn family(&self, alpha: &OccupationState) -> Result<ExcitationFamily> {
        generate_family(&self.context(DEFAULT_FAMILY_GUARD), alpha)
    }
}
