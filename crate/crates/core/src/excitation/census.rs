use super::family::ExcitationFamily;
use super::shells::ShellPartition;
use crate::fock::{MomentumLattice, OccupationState};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Error pairs sharing one minimal label (α̃, s, {v_1..v_t}).
#[derive(Debug, Clone, Serialize)]
pub struct LabelGroup {
    pub ancestor: usize,
    pub s: u32,
    pub t: u32,
    pub count: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Census {
    pub quadruples: usize,
    pub pairs: usize,
    pub main_pairs: usize,
    pub error_pairs: usize,
    /// Error pairs with s + t < 4 or t = 0, or with no admissible label.
    pub label_violations: usize,
    /// Label groups whose count exceeds the combinatorial bound.
    pub count_violations: usize,
    /// Pairs whose low-mode occupations differ.
    pub low_mismatch: usize,
    pub min_st: Option<(u32, u32)>,
    pub groups: Vec<LabelGroup>,
}

impl Census {
    pub fn ok(&self) -> bool {
        self.label_violations == 0 && self.count_violations == 0 && self.low_mismatch == 0
    }

    fn merge(&mut self, o: Census) {
        self.quadruples += o.quadruples;
        self.pairs += o.pairs;
        self.main_pairs += o.main_pairs;
        self.error_pairs += o.error_pairs;
        self.label_violations += o.label_violations;
        self.count_violations += o.count_violations;
        self.low_mismatch += o.low_mismatch;
        self.min_st = match (self.min_st, o.min_st) {
            (Some(a), Some(b)) => Some(if a.0 + a.1 <= b.0 + b.1 { a } else { b }),
            (a, b) => a.or(b),
        };
        self.groups.extend(o.groups);
    }
}

/// t!·t^{3t/4}·|Λ|^{(s+t)/4+1}·ρ^{−η(s+t)}.
pub fn label_bound(s: u32, t: u32, volume: f64, rho: f64, eta: f64) -> f64 {
    let tf: f64 = (1..=t).map(|k| k as f64).product();
    let tt = if t == 0 { 1.0 } else { (t as f64).powf(0.75 * t as f64) };
    tf * tt * volume.powf((s + t) as f64 / 4.0 + 1.0) * rho.powf(-eta * (s + t) as f64)
}

struct Ctx<'a> {
    lattice: &'a MomentumLattice,
    shells: &'a ShellPartition,
    family: &'a ExcitationFamily,
    by_high: HashMap<Vec<usize>, Vec<usize>>,
}

fn high_set(shells: &ShellPartition, o: &OccupationState) -> Vec<usize> {
    shells.ph.iter().copied().filter(|&k| o.get(k) > 0).collect()
}

impl Ctx<'_> {
    fn new<'a>(lattice: &'a MomentumLattice, shells: &'a ShellPartition, family: &'a ExcitationFamily) -> Ctx<'a> {
        let mut by_high: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (i, m) in family.members.iter().enumerate() {
            by_high.entry(high_set(shells, &m.occ)).or_default().push(i);
        }
        Ctx { lattice, shells, family, by_high }
    }

    fn is_main(&self, beta: &OccupationState, k1: usize, k2: usize) -> bool {
        let low = self.shells.low_modes();
        for (i, &u1) in low.iter().enumerate() {
            for &u2 in &low[i..] {
                if self.lattice.sum_index(k1, k2, u1) != Some(u2) {
                    continue;
                }
                let mut anc = beta.clone();
                anc.set(k1, anc.get(k1) - 1);
                anc.set(k2, anc.get(k2) - 1);
                anc.set(u1, anc.get(u1) + 1);
                anc.set(u2, anc.get(u2) + 1);
                if self.family.index_of(&anc).is_some() {
                    return true;
                }
            }
        }
        false
    }

    /// Can D be split into A-operator pairs matched with the removed low multiset (s zeros, vs)?
    fn decomposable(&self, d: &[usize], zeros: u32, vs: &[usize], anc_high: &[usize]) -> bool {
        let zero = self.shells.p0[0];
        let dset: BTreeSet<usize> = d.iter().copied().collect();
        let mixed_ok = |p: usize| {
            let np = self.lattice.neg_index(p);
            !anc_high.contains(&np) && !dset.contains(&np)
        };
        fn rec(ctx: &Ctx, zero: usize, left: &mut Vec<usize>, zeros: u32, vs: &mut Vec<usize>, mixed_ok: &dyn Fn(usize) -> bool) -> bool {
            if left.is_empty() {
                return zeros == 0 && vs.is_empty();
            }
            let p = left.remove(0);
            for j in 0..left.len() {
                let q = left.remove(j);
                // candidate low pairs with the same total momentum
                let mut options: Vec<(u32, Vec<usize>)> = Vec::new();
                if zeros >= 2 && ctx.lattice.sum_index(p, q, zero) == Some(zero) {
                    options.push((2, vec![]));
                }
                if zeros >= 1 {
                    if let Some(v) = ctx.lattice.sum_index(p, q, zero) {
                        if vs.contains(&v) {
                            options.push((1, vec![v]));
                        }
                    }
                }
                for (a, &v1) in vs.iter().enumerate() {
                    for &v2 in &vs[a + 1..] {
                        if ctx.lattice.sum_index(p, q, v1) == Some(v2) {
                            options.push((0, vec![v1, v2]));
                        }
                    }
                }
                for (z, used) in options {
                    let condensate = z == 2;
                    if !condensate && !(mixed_ok(p) && mixed_ok(q)) {
                        continue;
                    }
                    let mut rest_vs: Vec<usize> = vs.iter().copied().filter(|v| !used.contains(v)).collect();
                    if rec(ctx, zero, left, zeros - z, &mut rest_vs, mixed_ok) {
                        left.insert(j, q);
                        left.insert(0, p);
                        return true;
                    }
                }
                left.insert(j, q);
            }
            left.insert(0, p);
            false
        }
        let mut left = d.to_vec();
        let mut v = vs.to_vec();
        rec(self, zero, &mut left, zeros, &mut v, &mixed_ok)
    }

    /// Minimal (ancestor, s, vs) over ancestors with high set inside β_H ∩ γ_H.
    fn label(&self, beta: &OccupationState, gamma: &OccupationState) -> Option<(usize, u32, Vec<usize>)> {
        let zero = self.shells.p0[0];
        let bh = high_set(self.shells, beta);
        let gh = high_set(self.shells, gamma);
        let common: Vec<usize> = bh.iter().copied().filter(|k| gh.contains(k)).collect();
        let n = common.len();
        let mut subsets: Vec<u32> = (0..(1u32 << n)).collect();
        subsets.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
        for mask in subsets {
            let t_set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| common[i]).collect();
            let Some(cands) = self.by_high.get(&t_set) else { continue };
            for &ai in cands {
                let anc = &self.family.members[ai].occ;
                if anc.get(zero) < beta.get(zero) {
                    continue;
                }
                if self.shells.pl.iter().any(|&u| anc.get(u) < beta.get(u)) {
                    continue;
                }
                let s = (anc.get(zero) - beta.get(zero)) as u32;
                let vs: Vec<usize> = self.shells.pl.iter().copied().filter(|&u| anc.get(u) > beta.get(u)).collect();
                let db: Vec<usize> = bh.iter().copied().filter(|k| !t_set.contains(k)).collect();
                let dg: Vec<usize> = gh.iter().copied().filter(|k| !t_set.contains(k)).collect();
                if db.len() != s as usize + vs.len() || dg.len() != db.len() {
                    continue;
                }
                if self.decomposable(&db, s, &vs, &t_set) && self.decomposable(&dg, s, &vs, &t_set) {
                    return Some((ai, s, vs));
                }
            }
        }
        None
    }
}

/// Classifies all (β, γ) with ⟨β|a†_{k1}a†_{k2}a_{k3}a_{k4}|γ⟩ ≠ 0 into main and error pairs.
pub fn error_pair_census(
    lattice: &MomentumLattice,
    shells: &ShellPartition,
    family: &ExcitationFamily,
    (k1, k2, k3, k4): (usize, usize, usize, usize),
    rho: f64,
) -> Census {
    let ctx = Ctx::new(lattice, shells, family);
    census_with(&ctx, (k1, k2, k3, k4), rho)
}

fn census_with(ctx: &Ctx, (k1, k2, k3, k4): (usize, usize, usize, usize), rho: f64) -> Census {
    let mut c = Census { quadruples: 1, ..Default::default() };
    let mut groups: BTreeMap<(usize, u32, Vec<usize>), usize> = BTreeMap::new();
    for m in &ctx.family.members {
        let g = &m.occ;
        if g.get(k3) == 0 || g.get(k4) == 0 || g.get(k1) != 0 || g.get(k2) != 0 {
            continue;
        }
        let mut beta = g.clone();
        beta.set(k3, 0);
        beta.set(k4, 0);
        beta.set(k1, 1);
        beta.set(k2, 1);
        if ctx.family.index_of(&beta).is_none() {
            continue;
        }
        c.pairs += 1;
        if ctx.shells.low_modes().iter().any(|&u| beta.get(u) != g.get(u)) {
            c.low_mismatch += 1;
        }
        if ctx.is_main(&beta, k1, k2) {
            c.main_pairs += 1;
            continue;
        }
        c.error_pairs += 1;
        match ctx.label(&beta, g) {
            Some((anc, s, vs)) => {
                let t = vs.len() as u32;
                if s + t < 4 || t < 1 {
                    c.label_violations += 1;
                }
                c.min_st = match c.min_st {
                    Some(cur) if cur.0 + cur.1 <= s + t => Some(cur),
                    _ => Some((s, t)),
                };
                *groups.entry((anc, s, vs)).or_insert(0) += 1;
            }
            None => c.label_violations += 1,
        }
    }
    let vol = ctx.lattice.volume();
    for ((ancestor, s, vs), count) in groups {
        let t = vs.len() as u32;
        let bound = label_bound(s, t, vol, rho, ctx.shells.eta);
        if count as f64 > bound {
            c.count_violations += 1;
        }
        c.groups.push(LabelGroup { ancestor, s, t, count, bound });
    }
    c
}

/// Census over every quadruple of distinct P_H modes that connects two members.
pub fn census_all(lattice: &MomentumLattice, shells: &ShellPartition, family: &ExcitationFamily, rho: f64) -> Census {
    let ctx = Ctx::new(lattice, shells, family);
    let mut quads = BTreeSet::new();
    for m in &family.members {
        let h = high_set(shells, &m.occ);
        for (i, &k3) in h.iter().enumerate() {
            for &k4 in &h[i + 1..] {
                for &k1 in &shells.ph {
                    let Some(k2) = lattice.sum_index(k3, k4, k1) else { continue };
                    if k2 <= k1 || !shells.is_high(k2) || [k3, k4].contains(&k1) || [k3, k4].contains(&k2) {
                        continue;
                    }
                    if m.occ.get(k1) == 0 && m.occ.get(k2) == 0 {
                        quads.insert((k1, k2, k3, k4));
                    }
                }
            }
        }
    }
    let mut total = Census::default();
    for q in quads {
        let c = census_with(&ctx, q, rho);
        if c.pairs > 0 {
            total.merge(c);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::fixture::*;

    #[test]
    fn condensate_family_has_only_main_pairs() {
        let s = nine_mode(&square());
        let f = s.family(&alpha(&s, "0,0,0:4")).unwrap();
        let c = census_all(&s.lattice, &s.shells, &f, s.rho);
        assert!(c.pairs > 0);
        assert_eq!(c.error_pairs, 0);
        assert!(c.ok());
    }

    #[test]
    fn mixed_family_labels() {
        let s = nine_mode(&square());
        let f = s.family(&alpha(&s, "0,0,0:2;1,0,0:1;-1,0,0:1")).unwrap();
        let c = census_all(&s.lattice, &s.shells, &f, s.rho);
        assert!(c.pairs > 0);
        assert_eq!(c.low_mismatch, 0);
        assert!(c.ok(), "{c:?}");
        for g in &c.groups {
            assert!(g.s + g.t >= 4 && g.t >= 1);
            assert!(g.count as f64 <= g.bound);
        }
    }

    #[test]
    fn bound_formula() {
        // t = 2, s = 2: 2!·2^{3/2}·|Λ|^2·ρ^{−4η}
        let b = label_bound(2, 2, 10.0, 0.5, 0.25);
        assert!((b - 2.0 * 2f64.powf(1.5) * 100.0 * 2.0).abs() < 1e-12);
    }
}
