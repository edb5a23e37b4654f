//! Second-quantized engine on a finite momentum torus.

use crate::error::{domain, Error, Result};
use crate::excitation::shells::{classify, Part, ShellPartition};
use crate::potential::RadialPotential;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

pub type Mode = [i32; 3];

fn add(a: Mode, b: Mode) -> Mode {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn sub(a: Mode, b: Mode) -> Mode {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn neg(a: Mode) -> Mode {
    [-a[0], -a[1], -a[2]]
}
pub fn norm2(a: Mode) -> i32 {
    a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
}

/// Finite set of integer modes n with momenta p = (2π/L) n, closed under negation.
#[derive(Debug, Clone)]
pub struct MomentumLattice {
    l: f64,
    cutoff: i32,
    modes: Vec<Mode>,
    index: HashMap<Mode, usize>,
}

impl MomentumLattice {
    /// All n with max |n_i| ≤ cutoff.
    pub fn cube(l: f64, cutoff: i32) -> Result<Self> {
        let mut modes = Vec::new();
        for x in -cutoff..=cutoff {
            for y in -cutoff..=cutoff {
                for z in -cutoff..=cutoff {
                    modes.push([x, y, z]);
                }
            }
        }
        Self::from_modes(l, modes)
    }

    /// Cube restricted to |n|² ≤ max_norm2.
    pub fn ball(l: f64, cutoff: i32, max_norm2: i32) -> Result<Self> {
        let cube = Self::cube(l, cutoff)?;
        Self::from_modes(l, cube.modes.into_iter().filter(|&n| norm2(n) <= max_norm2).collect())
    }

    pub fn from_modes(l: f64, mut modes: Vec<Mode>) -> Result<Self> {
        if !(l > 0.0) {
            return domain(format!("box side L = {l} must be positive"));
        }
        modes.sort();
        modes.dedup();
        let index: HashMap<Mode, usize> = modes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        if let Some(n) = modes.iter().find(|&&n| !index.contains_key(&neg(n))) {
            return domain(format!("mode set not closed under negation: {n:?}"));
        }
        let cutoff = modes.iter().flat_map(|n| n.iter().map(|c| c.abs())).max().unwrap_or(0);
        Ok(Self { l, cutoff, modes, index })
    }

    pub fn side(&self) -> f64 {
        self.l
    }
    pub fn cutoff(&self) -> i32 {
        self.cutoff
    }
    pub fn volume(&self) -> f64 {
        self.l.powi(3)
    }
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }
    pub fn mode(&self, i: usize) -> Mode {
        self.modes[i]
    }
    pub fn index_of(&self, n: Mode) -> Option<usize> {
        self.index.get(&n).copied()
    }
    pub fn neg_index(&self, i: usize) -> usize {
        self.index[&neg(self.modes[i])]
    }
    /// Index of n_a + n_b − n_c if it lies in the mode set.
    pub fn sum_index(&self, a: usize, b: usize, c: usize) -> Option<usize> {
        self.index_of(sub(add(self.modes[a], self.modes[b]), self.modes[c]))
    }
    pub fn k_unit(&self) -> f64 {
        2.0 * PI / self.l
    }
    pub fn p_abs(&self, i: usize) -> f64 {
        self.k_unit() * (norm2(self.modes[i]) as f64).sqrt()
    }
    pub fn p2(&self, i: usize) -> f64 {
        self.k_unit().powi(2) * norm2(self.modes[i]) as f64
    }
    pub fn zero_index(&self) -> Option<usize> {
        self.index_of([0, 0, 0])
    }
}

/// Occupation numbers indexed by lattice mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationState(Vec<u16>);

impl OccupationState {
    pub fn vacuum(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn from_counts(counts: Vec<u16>) -> Self {
        Self(counts)
    }

    /// Parses `n1,n2,n3:count;...` against the lattice.
    pub fn parse(lattice: &MomentumLattice, spec: &str) -> Result<Self> {
        let mut occ = Self::vacuum(lattice.len());
        for item in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (m, c) = item.split_once(':').ok_or_else(|| Error::Domain(format!("bad occupation item `{item}`")))?;
            let coords: Vec<i32> = m
                .split(',')
                .map(|x| x.trim().parse::<i32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Domain(format!("bad mode `{m}`: {e}")))?;
            if coords.len() != 3 {
                return domain(format!("mode `{m}` needs three coordinates"));
            }
            let count: u16 = c.trim().parse().map_err(|e| Error::Domain(format!("bad count `{c}`: {e}")))?;
            let i = lattice
                .index_of([coords[0], coords[1], coords[2]])
                .ok_or_else(|| Error::Domain(format!("mode {coords:?} not in lattice")))?;
            occ.0[i] += count;
        }
        Ok(occ)
    }

    pub fn counts(&self) -> &[u16] {
        &self.0
    }
    pub fn get(&self, i: usize) -> u16 {
        self.0[i]
    }
    pub fn set(&mut self, i: usize, n: u16) {
        self.0[i] = n;
    }
    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }
    pub fn occupied(&self) -> impl Iterator<Item = (usize, u16)> + '_ {
        self.0.iter().enumerate().filter(|(_, &n)| n > 0).map(|(i, &n)| (i, n))
    }
    pub fn momentum(&self, lattice: &MomentumLattice) -> Mode {
        self.occupied().fold([0, 0, 0], |acc, (i, n)| {
            let m = lattice.mode(i);
            [acc[0] + m[0] * n as i32, acc[1] + m[1] * n as i32, acc[2] + m[2] * n as i32]
        })
    }
    pub fn kinetic(&self, lattice: &MomentumLattice) -> f64 {
        self.occupied().map(|(i, n)| lattice.p2(i) * n as f64).sum()
    }
    /// `n1,n2,n3:count;...` rendering.
    pub fn to_spec(&self, lattice: &MomentumLattice) -> String {
        self.occupied()
            .map(|(i, n)| {
                let m = lattice.mode(i);
                format!("{},{},{}:{}", m[0], m[1], m[2], n)
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Single creation or annihilation operator on a mode index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

/// Applies a product of ladder operators, rightmost first; returns the image and its bosonic factor.
pub fn apply_ladders(ops: &[Ladder], occ: &OccupationState) -> Option<(OccupationState, f64)> {
    let mut out = occ.clone();
    // product of integer counts, rooted once so a†a is exact
    let mut factor = 1.0f64;
    for op in ops.iter().rev() {
        match *op {
            Ladder::Annihilate(i) => {
                let n = out.0[i];
                if n == 0 {
                    return None;
                }
                factor *= n as f64;
                out.0[i] = n - 1;
            }
            Ladder::Create(i) => {
                let n = out.0[i] + 1;
                factor *= n as f64;
                out.0[i] = n;
            }
        }
    }
    Some((out, factor.sqrt()))
}

/// Sparse Fock vector, ordered so every traversal is reproducible.
#[derive(Debug, Clone, Default)]
pub struct StateVector {
    pub amps: BTreeMap<OccupationState, Complex64>,
}

impl StateVector {
    pub fn basis(occ: OccupationState) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(occ, Complex64::new(1.0, 0.0));
        Self { amps }
    }

    pub fn add(&mut self, occ: OccupationState, c: Complex64) {
        *self.amps.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        // ⟨self|other⟩
        let (small, big, conj_small) = if self.amps.len() <= other.amps.len() { (self, other, true) } else { (other, self, false) };
        let mut s = Complex64::new(0.0, 0.0);
        for (k, a) in &small.amps {
            if let Some(b) = big.amps.get(k) {
                s += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn apply_ladders(&self, ops: &[Ladder]) -> Self {
        let mut out = Self::default();
        for (occ, c) in &self.amps {
            if let Some((img, f)) = apply_ladders(ops, occ) {
                out.add(img, c * f);
            }
        }
        out
    }

    /// ⟨self| ops |self⟩.
    pub fn expectation(&self, ops: &[Ladder]) -> Complex64 {
        self.inner(&self.apply_ladders(ops))
    }

    pub fn sorted(&self) -> Vec<(&OccupationState, &Complex64)> {
        self.amps.iter().collect()
    }
}

/// V̂ tabulated by the integer |n|² of the transfer.
#[derive(Debug, Clone)]
pub struct VhatTable {
    by_norm2: Vec<f64>,
}

impl VhatTable {
    pub fn new(lattice: &MomentumLattice, potential: &RadialPotential) -> Result<Self> {
        let max = 12 * lattice.cutoff().max(1).pow(2);
        let k = lattice.k_unit();
        let by_norm2 = (0..=max).map(|n2| potential.fourier_hat(k * (n2 as f64).sqrt())).collect::<Result<Vec<_>>>()?;
        Ok(Self { by_norm2 })
    }

    pub fn from_fn(lattice: &MomentumLattice, f: impl Fn(f64) -> f64) -> Self {
        let max = 12 * lattice.cutoff().max(1).pow(2);
        let k = lattice.k_unit();
        Self { by_norm2: (0..=max).map(|n2| f(k * (n2 as f64).sqrt())).collect() }
    }

    pub fn at(&self, transfer: Mode) -> f64 {
        self.by_norm2[norm2(transfer) as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.by_norm2.iter().all(|&v| v == 0.0)
    }
}

/// One term a†_p a†_q a_r a_s of the interaction with its coefficient V̂_{p−r}/(2|Λ|).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticTerm {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
    pub coef: f64,
}

/// Visits every nonzero quartic term acting on |occ⟩ with its image and full amplitude.
pub fn for_each_quartic(
    lattice: &MomentumLattice,
    vhat: &VhatTable,
    occ: &OccupationState,
    mut visit: impl FnMut(&QuarticTerm, &OccupationState, f64),
) {
    let vol = lattice.volume();
    let occupied: Vec<(usize, u16)> = occ.occupied().collect();
    let mut work = occ.clone();
    for &(r, nr) in &occupied {
        for &(s, _) in &occupied {
            let ns = if s == r { nr - 1 } else { occ.get(s) };
            if ns == 0 {
                continue;
            }
            let ann = (nr as f64).sqrt() * (ns as f64).sqrt();
            work.0[r] -= 1;
            work.0[s] -= 1;
            for p in 0..lattice.len() {
                let Some(q) = lattice.sum_index(r, s, p) else { continue };
                let v = vhat.at(sub(lattice.mode(p), lattice.mode(r)));
                if v == 0.0 {
                    continue;
                }
                let nq = work.0[q] + 1;
                work.0[q] = nq;
                let np = work.0[p] + 1;
                work.0[p] = np;
                let amp = ann * (nq as f64).sqrt() * (np as f64).sqrt();
                let term = QuarticTerm { p, q, r, s, coef: v / (2.0 * vol) };
                visit(&term, &work, term.coef * amp);
                work.0[p] -= 1;
                work.0[q] -= 1;
            }
            work.0[r] += 1;
            work.0[s] += 1;
        }
    }
}

/// Applies kinetic plus the quartic terms accepted by `keep` to a sparse vector.
pub fn apply_hamiltonian(
    lattice: &MomentumLattice,
    vhat: &VhatTable,
    psi: &StateVector,
    kinetic: bool,
    keep: &(dyn Fn(&QuarticTerm) -> bool + Sync),
) -> StateVector {
    let mut out = StateVector::default();
    for (occ, c) in psi.sorted() {
        if kinetic {
            let k = occ.kinetic(lattice);
            if k != 0.0 {
                out.add(occ.clone(), c * k);
            }
        }
        for_each_quartic(lattice, vhat, occ, |t, img, amp| {
            if keep(t) {
                out.add(img.clone(), c * amp);
            }
        });
    }
    out
}

pub fn keep_all(_: &QuarticTerm) -> bool {
    true
}

/// ⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩ for the full Hamiltonian.
pub fn energy_expectation(lattice: &MomentumLattice, vhat: &VhatTable, psi: &StateVector) -> f64 {
    type Key = Vec<(usize, u16)>;
    let index: HashMap<Key, Complex64> = psi.amps.iter().map(|(o, c)| (o.occupied().collect(), *c)).collect();
    let members = psi.sorted();
    let parts: Vec<Complex64> = members
        .par_iter()
        .map(|&(occ, c)| {
            let base: Key = occ.occupied().collect();
            let mut acc = c.conj() * c * occ.kinetic(lattice);
            let mut key = Key::with_capacity(base.len() + 2);
            for_each_quartic(lattice, vhat, occ, |t, _, amp| {
                key.clear();
                key.extend_from_slice(&base);
                for (m, d) in [(t.r, -1i32), (t.s, -1), (t.p, 1), (t.q, 1)] {
                    match key.binary_search_by_key(&m, |e| e.0) {
                        Ok(i) => key[i].1 = (key[i].1 as i32 + d) as u16,
                        Err(i) => key.insert(i, (m, d as u16)),
                    }
                }
                key.retain(|e| e.1 > 0);
                if let Some(b) = index.get(&key) {
                    acc += b.conj() * c * amp;
                }
            });
            acc
        })
        .collect();
    parts.iter().sum::<Complex64>().re / psi.norm_sqr()
}

/// Dimension and mode-count limits for exact enumeration.
#[derive(Debug, Clone, Copy)]
pub struct BasisGuard {
    pub max_modes: usize,
    pub max_dim: f64,
}

impl Default for BasisGuard {
    fn default() -> Self {
        Self { max_modes: 12, max_dim: 2e6 }
    }
}

pub fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All occupations with total N on `subset`, lexicographic in the subset order.
pub fn enumerate_basis(lattice: &MomentumLattice, n: u32, subset: &[usize], guard: BasisGuard) -> Result<Vec<OccupationState>> {
    if subset.len() > guard.max_modes {
        return Err(Error::Size { what: "mode subset", value: subset.len() as f64, limit: guard.max_modes as f64 });
    }
    if subset.is_empty() {
        return if n == 0 { Ok(vec![OccupationState::vacuum(lattice.len())]) } else { Ok(Vec::new()) };
    }
    let dim = binomial(n as u64 + subset.len() as u64 - 1, n as u64);
    if dim > guard.max_dim {
        return Err(Error::Size { what: "basis dimension", value: dim, limit: guard.max_dim });
    }
    let mut out = Vec::with_capacity(dim as usize);
    let mut cur = OccupationState::vacuum(lattice.len());
    fn rec(k: usize, left: u32, subset: &[usize], cur: &mut OccupationState, out: &mut Vec<OccupationState>) {
        if k + 1 == subset.len() {
            cur.0[subset[k]] = left as u16;
            out.push(cur.clone());
            cur.0[subset[k]] = 0;
            return;
        }
        for c in 0..=left {
            cur.0[subset[k]] = c as u16;
            rec(k + 1, left - c, subset, cur, out);
        }
        cur.0[subset[k]] = 0;
    }
    rec(0, n, subset, &mut cur, &mut out);
    Ok(out)
}

/// Sparse real operator in a fixed basis, entries keyed by (bra, ket).
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub basis: Vec<OccupationState>,
    pub entries: BTreeMap<(usize, usize), f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (&(i, j), &v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.entries.iter().map(|(&(i, j), &v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    /// Largest |entry| between states of different total momentum.
    pub fn momentum_block_defect(&self, lattice: &MomentumLattice) -> f64 {
        let moms: Vec<Mode> = self.basis.iter().map(|b| b.momentum(lattice)).collect();
        self.entries.iter().filter(|(&(i, j), _)| moms[i] != moms[j]).map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    pub fn index(&self) -> HashMap<&OccupationState, usize> {
        self.basis.iter().enumerate().map(|(i, b)| (b, i)).collect()
    }

    /// Dense coefficient vector of a sparse state in this basis; errors if the state leaves the basis.
    pub fn coordinates(&self, psi: &StateVector) -> Result<DVector<Complex64>> {
        let idx = self.index();
        let mut v = DVector::from_element(self.dim(), Complex64::new(0.0, 0.0));
        for (occ, c) in &psi.amps {
            let i = idx.get(occ).ok_or_else(|| Error::Domain("state outside the basis".into()))?;
            v[*i] += c;
        }
        Ok(v)
    }

    pub fn expectation(&self, v: &DVector<Complex64>) -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (&(i, j), &x) in &self.entries {
            s += v[i].conj() * x * v[j];
        }
        s.re
    }
}

/// Assembles kinetic (optional) plus the selected quartic terms on a basis; rows split across workers.
pub fn assemble(
    lattice: &MomentumLattice,
    vhat: &VhatTable,
    basis: Vec<OccupationState>,
    kinetic: bool,
    keep: &(dyn Fn(&QuarticTerm) -> bool + Sync),
) -> OperatorMatrix {
    let index: HashMap<&OccupationState, usize> = basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let cols: Vec<Vec<(usize, usize, f64)>> = basis
        .par_iter()
        .enumerate()
        .map(|(j, ket)| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            if kinetic {
                let k = ket.kinetic(lattice);
                if k != 0.0 {
                    *acc.entry(j).or_insert(0.0) += k;
                }
            }
            for_each_quartic(lattice, vhat, ket, |t, img, amp| {
                if keep(t) {
                    if let Some(&i) = index.get(img) {
                        *acc.entry(i).or_insert(0.0) += amp;
                    }
                }
            });
            acc.into_iter().filter(|(_, v)| *v != 0.0).map(|(i, v)| (i, j, v)).collect()
        })
        .collect();
    let mut entries = BTreeMap::new();
    for col in cols {
        for (i, j, v) in col {
            entries.insert((i, j), v);
        }
    }
    OperatorMatrix { basis, entries }
}

/// Kinetic plus full interaction on all N-particle states of the lattice.
pub fn build_hamiltonian(lattice: &MomentumLattice, n: u32, vhat: &VhatTable, guard: BasisGuard) -> Result<OperatorMatrix> {
    let subset: Vec<usize> = (0..lattice.len()).collect();
    let basis = enumerate_basis(lattice, n, &subset, guard)?;
    Ok(assemble(lattice, vhat, basis, true, &keep_all))
}

/// ⟨bra| (V̂_u / 2|Λ|) a†_p a†_q a_{p−u} a_{q+u} |ket⟩ for one (p, q, u).
pub fn quartic_element(
    lattice: &MomentumLattice,
    bra: &OccupationState,
    ket: &OccupationState,
    p: Mode,
    q: Mode,
    u: Mode,
    vhat: &VhatTable,
) -> f64 {
    let idx = |m: Mode| lattice.index_of(m);
    let (Some(ip), Some(iq), Some(ir), Some(is)) = (idx(p), idx(q), idx(sub(p, u)), idx(add(q, u))) else {
        return 0.0;
    };
    let ops = [Ladder::Create(ip), Ladder::Create(iq), Ladder::Annihilate(ir), Ladder::Annihilate(is)];
    match apply_ladders(&ops, ket) {
        Some((img, f)) if &img == bra => vhat.at(u) / (2.0 * lattice.volume()) * f,
        _ => 0.0,
    }
}

/// Kinetic part and the interaction split into term groups relative to a shell partition.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub kinetic: OperatorMatrix,
    /// H_abab, H_L̃L̃, H_L̃H, H_HH.
    pub parts: BTreeMap<Part, OperatorMatrix>,
    /// Terms outside the four groups; zero in expectation on trial states.
    pub rest: OperatorMatrix,
}

impl Decomposition {
    /// Kinetic plus the four groups, without the remainder.
    pub fn expectation(&self, v: &DVector<Complex64>) -> f64 {
        self.kinetic.expectation(v) + self.parts.values().map(|m| m.expectation(v)).sum::<f64>()
    }
}

pub fn decompose_interaction(
    lattice: &MomentumLattice,
    shells: &ShellPartition,
    basis: &[OccupationState],
    vhat: &VhatTable,
) -> Result<Decomposition> {
    if shells.len() != lattice.len() {
        return domain("shell partition does not match the lattice");
    }
    let mut seen = vec![false; lattice.len()];
    for &i in shells.p0.iter().chain(&shells.pi).chain(&shells.pl).chain(&shells.ph) {
        if std::mem::replace(&mut seen[i], true) {
            return domain(format!("mode {:?} lies in two shells", lattice.mode(i)));
        }
    }
    let none = |_: &QuarticTerm| false;
    let kinetic = assemble(lattice, vhat, basis.to_vec(), true, &none);
    let mut parts = BTreeMap::new();
    for p in [Part::Abab, Part::LowLow, Part::LowHigh, Part::HighHigh] {
        let keep = move |t: &QuarticTerm| classify(shells, t) == p;
        parts.insert(p, assemble(lattice, vhat, basis.to_vec(), false, &keep));
    }
    let keep = |t: &QuarticTerm| classify(shells, t) == Part::Rest;
    let rest = assemble(lattice, vhat, basis.to_vec(), false, &keep);
    Ok(Decomposition { kinetic, parts, rest })
}

/// Exact Gibbs data from dense diagonalization.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub free_energy: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl GibbsState {
    /// Eigenstates as sparse vectors with their Gibbs weights.
    pub fn mixture(&self, basis: &[OccupationState]) -> (Vec<f64>, Vec<StateVector>) {
        let states = (0..self.eigenvalues.len())
            .map(|k| {
                let mut s = StateVector::default();
                for (i, b) in basis.iter().enumerate() {
                    let c = self.eigenvectors[(i, k)];
                    if c != 0.0 {
                        s.add(b.clone(), Complex64::new(c, 0.0));
                    }
                }
                s
            })
            .collect();
        (self.weights.clone(), states)
    }
}

pub const DENSE_LIMIT: usize = 4000;

/// F = −β⁻¹ ln Tr e^{−βH}.
pub fn exact_free_energy(h: &OperatorMatrix, beta: f64) -> Result<GibbsState> {
    if h.dim() > DENSE_LIMIT {
        return Err(Error::Size { what: "dense dimension", value: h.dim() as f64, limit: DENSE_LIMIT as f64 });
    }
    if !(beta > 0.0) {
        return domain("beta must be positive");
    }
    let dense = h.to_dense();
    let sym = 0.5 * (&dense + dense.transpose());
    let eig = sym.symmetric_eigen();
    gibbs_from_spectrum(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors, beta)
}

pub fn gibbs_from_spectrum(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>, beta: f64) -> Result<GibbsState> {
    let e0 = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = eigenvalues.iter().map(|e| (-beta * (e - e0)).exp()).sum();
    let free_energy = e0 - z.ln() / beta;
    let weights = eigenvalues.iter().map(|e| (-beta * (e - e0)).exp() / z).collect();
    Ok(GibbsState { free_energy, eigenvalues, eigenvectors, weights })
}

/// −Σ λ ln λ over nonnegative eigenvalues.
pub fn entropy_of_spectrum(eigs: impl IntoIterator<Item = f64>) -> f64 {
    eigs.into_iter().filter(|&l| l > 1e-300).map(|l| -l * l.ln()).sum()
}

/// Hermitian Gram-weighted matrix G_ij = √g_i √g_j ⟨ψ_i|ψ_j⟩ / (‖ψ_i‖‖ψ_j‖).
pub fn weighted_gram(weights: &[f64], states: &[StateVector]) -> DMatrix<Complex64> {
    let norms: Vec<f64> = states.iter().map(|s| s.norm_sqr().sqrt()).collect();
    let k = states.len();
    let mut index: HashMap<&OccupationState, usize> = HashMap::new();
    for s in states {
        for occ in s.amps.keys() {
            let n = index.len();
            index.entry(occ).or_insert(n);
        }
    }
    if index.len().saturating_mul(k) <= 20_000_000 {
        // G = S†S with column i = √g_i ψ_i/‖ψ_i‖
        let mut m = DMatrix::from_element(index.len(), k, Complex64::new(0.0, 0.0));
        for (i, s) in states.iter().enumerate() {
            let f = weights[i].sqrt() / norms[i];
            for (occ, c) in &s.amps {
                m[(index[occ], i)] = c * f;
            }
        }
        return m.adjoint() * m;
    }
    let mut g = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
    for i in 0..k {
        for j in i..k {
            let v = states[i].inner(&states[j]) * (weights[i] * weights[j]).sqrt() / (norms[i] * norms[j]);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// S(Σ g_i |ψ_i⟩⟨ψ_i|) for possibly non-orthogonal pure states.
pub fn entropy_of_mixture(weights: &[f64], states: &[StateVector]) -> Result<f64> {
    if weights.len() != states.len() {
        return domain("weights and states differ in length");
    }
    if weights.iter().any(|&g| g < 0.0) {
        return domain("negative weight");
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("weights sum to {total}"));
    }
    let g = weighted_gram(weights, states);
    let eig = g.symmetric_eigen();
    Ok(entropy_of_spectrum(eig.eigenvalues.iter().copied()))
}
