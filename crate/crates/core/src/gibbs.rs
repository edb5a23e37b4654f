//! Truncated grand-canonical ensemble on P_I ∪ P_L, the fixed-N state Γ_0 and trial mixtures.
use crate::error::{domain, Error, Result};
use crate::excitation::{ExcitationFamily, Shell, ShellPartition};
use crate::fock::{
    apply_hamiltonian, entropy_of_mixture, keep_all, MomentumLattice, OccupationState, OperatorMatrix, StateVector, VhatTable,
};
use crate::thermo::{mode_stats, ModeStats};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

/// One mode of the revised statistics: E_{k,μ} = k² − μ and the cap C_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCap {
    pub mode: usize,
    pub energy: f64,
    pub cap: u32,
}

/// C_k = ⌈m_c^{1/3}/(βE_{k,μ})⌉ on P_I, m_c on P_L.
pub fn cutoff_profile(lattice: &MomentumLattice, shells: &ShellPartition, beta: f64, mu: f64) -> Result<Vec<ModeCap>> {
    if !(mu <= 0.0) {
        return domain(format!("mu = {mu} must be <= 0"));
    }
    if !(beta > 0.0) {
        return domain(format!("beta = {beta} must be positive"));
    }
    let mut out = Vec::new();
    for i in 0..lattice.len() {
        let energy = lattice.p2(i) - mu;
        let cap = match shells.class(i) {
            Shell::Infrared => {
                let be = beta * energy;
                if !(be > 0.0) {
                    return domain(format!("beta*E = {be} on infrared mode {:?}", lattice.mode(i)));
                }
                ((shells.m_c as f64).cbrt() / be).ceil().max(1.0) as u32
            }
            Shell::Low => shells.m_c,
            _ => continue,
        };
        out.push(ModeCap { mode: i, energy, cap });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedModeEnsemble {
    pub beta: f64,
    pub mu: f64,
    pub modes: Vec<ModeCap>,
}

impl TruncatedModeEnsemble {
    pub fn new(lattice: &MomentumLattice, shells: &ShellPartition, beta: f64, mu: f64) -> Result<Self> {
        Ok(Self { beta, mu, modes: cutoff_profile(lattice, shells, beta, mu)? })
    }

    pub fn cap_square_sum(&self) -> f64 {
        self.modes.iter().map(|m| (m.cap as f64).powi(2)).sum()
    }
}

/// ρ̃ = ρ(1 − L^{−1/2}).
pub fn rho_tilde(rho: f64, l: f64) -> f64 {
    rho * (1.0 - l.powf(-0.5))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub free_energy: f64,
    pub mean: f64,
    pub variance: f64,
    #[serde(skip)]
    pub per_mode: Vec<ModeStats>,
}

pub fn ensemble_stats(ens: &TruncatedModeEnsemble) -> Result<EnsembleStats> {
    let per_mode: Vec<ModeStats> = ens.modes.iter().map(|m| mode_stats(ens.beta, ens.mu, m.energy, Some(m.cap))).collect::<Result<_>>()?;
    Ok(EnsembleStats {
        free_energy: per_mode.iter().map(|s| s.free_energy).sum(),
        mean: per_mode.iter().map(|s| s.mean).sum(),
        variance: per_mode.iter().map(|s| s.variance).sum(),
        per_mode,
    })
}

/// 2 exp(−2t²/Σ C_k²).
pub fn hoeffding_tail(ens: &TruncatedModeEnsemble, t: f64) -> f64 {
    2.0 * (-2.0 * t * t / ens.cap_square_sum()).exp()
}

/// Cumulative occupation tables, one per mode.
fn cdf_tables(ens: &TruncatedModeEnsemble) -> Vec<Vec<f64>> {
    ens.modes
        .iter()
        .map(|m| {
            let y = ens.beta * m.energy;
            let lw: Vec<f64> = (0..=m.cap).map(|n| -y * n as f64).collect();
            let mx = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut acc = 0.0;
            let mut c: Vec<f64> = lw
                .iter()
                .map(|l| {
                    acc += (l - mx).exp();
                    acc
                })
                .collect();
            let z = acc;
            c.iter_mut().for_each(|x| *x /= z);
            c
        })
        .collect()
}

const SAMPLE_CHUNK: usize = 4096;

/// Seeded occupation samples; chunk i uses ChaCha stream i, so results do not depend on thread count.
pub fn sample_occupations(ens: &TruncatedModeEnsemble, samples: usize, seed: u64) -> Vec<Vec<u32>> {
    let tables = cdf_tables(ens);
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            let tables = &tables;
            (0..len)
                .map(move |_| {
                    tables
                        .iter()
                        .map(|t| {
                            let u: f64 = rng.gen();
                            t.partition_point(|&x| x <= u).min(t.len() - 1) as u32
                        })
                        .collect::<Vec<u32>>()
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn sample_totals(ens: &TruncatedModeEnsemble, samples: usize, seed: u64) -> Vec<u32> {
    sample_occupations(ens, samples, seed).into_iter().map(|o| o.iter().sum()).collect()
}

/// Γ_0 = Σ g_α |α⟩⟨α| with α(0) = N − m_0.
#[derive(Debug, Clone, Serialize)]
pub struct Gamma0 {
    pub m0: u32,
    pub n_total: u32,
    /// Weight of the chosen fixed-number component within the ensemble.
    pub component_weight: f64,
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub alphas: Vec<OccupationState>,
    pub sampled: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct Gamma0Options {
    /// min(ρ, ρ_c)|Λ|, used to break ties between equally weighted components.
    pub target: f64,
    pub seed: u64,
    pub samples: usize,
    /// Exact enumeration for at most this many modes.
    pub exact_modes: usize,
    pub max_configs: f64,
}

impl Default for Gamma0Options {
    fn default() -> Self {
        Self { target: 0.0, seed: 0, samples: 100_000, exact_modes: 8, max_configs: 2e6 }
    }
}

fn log_weight(ens: &TruncatedModeEnsemble, occ: &[u32]) -> f64 {
    -ens.beta * ens.modes.iter().zip(occ).map(|(m, &n)| m.energy * n as f64).sum::<f64>()
}

fn enumerate_configs(ens: &TruncatedModeEnsemble, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; ens.modes.len()];
    fn rec(ens: &TruncatedModeEnsemble, i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for n in 0..=ens.modes[i].cap.min(left) {
            cur[i] = n;
            rec(ens, i + 1, left - n, cur, out);
        }
        cur[i] = 0;
    }
    rec(ens, 0, max_total, &mut cur, &mut out);
    out
}

pub fn build_gamma0(
    ens: &TruncatedModeEnsemble,
    n_total: u32,
    lattice: &MomentumLattice,
    shells: &ShellPartition,
    opts: Gamma0Options,
) -> Result<Gamma0> {
    let zero = *shells.p0.first().ok_or_else(|| Error::Construction("lattice has no zero mode".into()))?;
    let exact = ens.modes.len() <= opts.exact_modes;
    let configs: Vec<Vec<u32>> = if exact {
        // configurations with total ≤ N, counted by a knapsack pass
        let mut ways = vec![0.0f64; n_total as usize + 1];
        ways[0] = 1.0;
        for m in &ens.modes {
            let mut next = vec![0.0; ways.len()];
            for (t, &w) in ways.iter().enumerate() {
                for n in 0..=(m.cap as usize).min(ways.len() - 1 - t) {
                    next[t + n] += w;
                }
            }
            ways = next;
        }
        let count: f64 = ways.iter().sum();
        if count > opts.max_configs {
            return Err(Error::Size { what: "ensemble configurations", value: count, limit: opts.max_configs });
        }
        enumerate_configs(ens, n_total)
    } else {
        let mut v = sample_occupations(ens, opts.samples, opts.seed);
        v.retain(|o| o.iter().sum::<u32>() <= n_total);
        v.sort();
        v.dedup();
        v
    };
    // component weights per total m; exact sums or distinct-sample sums
    let mut by_m: BTreeMap<u32, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, c) in configs.iter().enumerate() {
        by_m.entry(c.iter().sum()).or_default().push((i, log_weight(ens, c)));
    }
    let ln_total = {
        let all: Vec<f64> = by_m.values().flatten().map(|x| x.1).collect();
        log_sum_exp(&all)
    };
    let mut best: Option<(u32, f64)> = None;
    for (&m, items) in &by_m {
        let w = log_sum_exp(&items.iter().map(|x| x.1).collect::<Vec<_>>());
        best = match best {
            None => Some((m, w)),
            Some((bm, bw)) => {
                let tie = (w - bw).abs() <= 1e-12 * bw.abs().max(1.0);
                let closer = (m as f64 - opts.target).abs() < (bm as f64 - opts.target).abs();
                if (w > bw && !tie) || (tie && closer) {
                    Some((m, w))
                } else {
                    Some((bm, bw))
                }
            }
        };
    }
    let Some((m0, lw)) = best else {
        return Err(Error::Construction(format!("no component with at most N = {n_total} particles")));
    };
    let items = &by_m[&m0];
    let mut weights: Vec<f64> = items.iter().map(|x| (x.1 - lw).exp()).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    let alphas = items
        .iter()
        .map(|&(i, _)| {
            let mut o = OccupationState::vacuum(lattice.len());
            o.set(zero, (n_total - m0) as u16);
            for (m, &n) in ens.modes.iter().zip(&configs[i]) {
                o.set(m.mode, n as u16);
            }
            o
        })
        .collect();
    Ok(Gamma0 { m0, n_total, component_weight: (lw - ln_total).exp(), weights, alphas, sampled: !exact, seed: opts.seed })
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// (Σ g_α N_α / N², 2 − [1 − ρ_c/ρ]²₊).
pub fn condensate_aggregate(g0: &Gamma0, lattice: &MomentumLattice, shells: &ShellPartition, rho: f64, rho_c: f64) -> (f64, f64) {
    let n2 = (g0.n_total as f64).powi(2);
    let v: f64 = g0.weights.iter().zip(&g0.alphas).map(|(g, a)| g * crate::excitation::n_alpha(lattice, shells, a) / n2).sum();
    let excess = (1.0 - rho_c / rho).max(0.0);
    (v, 2.0 - excess * excess)
}

/// Γ = Σ g_α |ψ_α⟩⟨ψ_α| over normalized pure states.
#[derive(Debug, Clone)]
pub struct MixtureState {
    pub weights: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl MixtureState {
    pub fn new(weights: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if weights.len() != states.len() || weights.is_empty() {
            return domain("weights and states must be non-empty and of equal length");
        }
        if weights.iter().any(|&g| !(g >= 0.0)) {
            return domain("weights must be nonnegative");
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return domain(format!("weights sum to {s}, not 1"));
        }
        let states = states
            .into_iter()
            .map(|mut v| {
                let n = v.norm_sqr().sqrt();
                v.amps.values_mut().for_each(|c| *c /= n);
                v
            })
            .collect();
        Ok(Self { weights, states })
    }

    pub fn from_gamma0(g0: &Gamma0) -> Result<Self> {
        Self::new(g0.weights.clone(), g0.alphas.iter().cloned().map(StateVector::basis).collect())
    }

    pub fn from_families(weights: Vec<f64>, families: &[ExcitationFamily]) -> Result<Self> {
        Self::new(weights, families.iter().map(|f| f.state()).collect())
    }

    /// Tr HΓ by sparse application.
    pub fn energy(&self, lattice: &MomentumLattice, vhat: &VhatTable) -> f64 {
        self.weights
            .par_iter()
            .zip(&self.states)
            .map(|(g, s)| g * s.inner(&apply_hamiltonian(lattice, vhat, s, true, &keep_all)).re)
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    pub fn exact_entropy(&self) -> Result<f64> {
        entropy_of_mixture(&self.weights, &self.states)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyBound {
    /// −Σ g ln g.
    pub s_gamma0: f64,
    /// max_β Σ_α |⟨β|Ψ_α⟩|.
    pub row_max: f64,
    /// max_α Σ_γ |⟨γ|Ψ_α⟩|.
    pub col_max: f64,
    /// Row-sum bound on ‖Σ_α |Ψ_α⟩⟨Ψ_α|‖.
    pub a_inf: f64,
    pub lower: f64,
}

pub fn entropy_bound(gamma: &MixtureState) -> EntropyBound {
    let s_gamma0 = -gamma.weights.iter().filter(|&&g| g > 0.0).map(|g| g * g.ln()).sum::<f64>();
    let mut rows: HashMap<&OccupationState, f64> = HashMap::new();
    let mut col_max: f64 = 0.0;
    for s in &gamma.states {
        let mut col = 0.0;
        for (b, c) in &s.amps {
            let a = c.norm();
            *rows.entry(b).or_insert(0.0) += a;
            col += a;
        }
        col_max = col_max.max(col);
    }
    let row_max = rows.values().cloned().fold(0.0, f64::max);
    let a_inf = row_max * col_max;
    EntropyBound { s_gamma0, row_max, col_max, a_inf, lower: s_gamma0 - a_inf.ln() }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalReport {
    pub beta: f64,
    /// Tr HΓ.
    pub energy: f64,
    pub s_exact: f64,
    pub s_lower: f64,
    pub a_inf: f64,
    /// U − S_exact/β.
    pub f_var: f64,
    /// U − S_lower/β.
    pub f_var_bound: f64,
    pub f_exact: f64,
}

impl VariationalReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.f_var >= self.f_exact - slack && self.f_var_bound >= self.f_exact - slack
    }
}

/// Variational free energies of Γ against the exact free energy of H.
pub fn variational_report(gamma: &MixtureState, h: &OperatorMatrix, beta: f64, f_exact: f64) -> Result<VariationalReport> {
    let width = h.basis.first().map(|b| b.counts().len());
    let mut energy = 0.0;
    for (g, s) in gamma.weights.iter().zip(&gamma.states) {
        if s.amps.keys().any(|o| Some(o.counts().len()) != width) {
            return domain("mixture and Hamiltonian live on different lattices");
        }
        let v = h.coordinates(s)?;
        energy += g * h.expectation(&v);
    }
    let s_exact = gamma.exact_entropy()?;
    let eb = entropy_bound(gamma);
    Ok(VariationalReport {
        beta,
        energy,
        s_exact,
        s_lower: eb.lower,
        a_inf: eb.a_inf,
        f_var: energy - s_exact / beta,
        f_var_bound: energy - eb.lower / beta,
        f_exact,
    })
}

/// Entries of a random mixture used by the entropy tests: weights from a seeded Dirichlet(1) draw.
pub fn random_weights(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let drift = 1.0 - w.iter().sum::<f64>();
    w[0] += drift;
    w
}

/// Amplitude of a normalized state on one basis vector.
pub fn overlap(s: &StateVector, b: &OccupationState) -> Complex64 {
    s.amps.get(b).copied().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::fixture::*;
    use crate::fock::{build_hamiltonian, exact_free_energy, BasisGuard};
    use crate::potential::RadialPotential;
    use std::f64::consts::PI;

    fn infrared_setup() -> (MomentumLattice, ShellPartition) {
        let lat = MomentumLattice::cube(2.0 * PI, 1).unwrap();
        let ov = crate::excitation::ShellOverrides {
            radii: Some(crate::excitation::ShellRadii { l_min: 1.2, l_max: 1.5, h_min: 1.6, h_max: 2.0 }),
            m_c: Some(4),
            eta: None,
        };
        let sh = crate::excitation::build_shells(&lat, 0.01, ov).unwrap();
        (lat, sh)
    }

    #[test]
    fn caps_follow_shells() {
        let (lat, sh) = infrared_setup();
        // |n| = 1 is infrared, |n| = √2 low
        let beta = 0.5;
        let caps = cutoff_profile(&lat, &sh, beta, 0.0).unwrap();
        assert_eq!(caps.len(), sh.pi.len() + sh.pl.len());
        for c in &caps {
            assert!(c.cap >= 1);
            match sh.class(c.mode) {
                Shell::Low => assert_eq!(c.cap, 4),
                Shell::Infrared => assert_eq!(c.cap, (4f64.cbrt() / (beta * c.energy)).ceil() as u32),
                _ => unreachable!(),
            }
        }
        // βE = 0.5 → ⌈4^{1/3}/0.5⌉ = 4
        let ir = caps.iter().find(|c| sh.class(c.mode) == Shell::Infrared).unwrap();
        assert_eq!(ir.cap, 4);
        assert!(cutoff_profile(&lat, &sh, beta, 0.1).is_err());
    }

    #[test]
    fn mode_limits() {
        let (lat, sh) = infrared_setup();
        let mut ens = TruncatedModeEnsemble::new(&lat, &sh, 0.5, -0.3).unwrap();
        ens.modes.truncate(1);
        let e = ens.modes[0].energy;
        let y = ens.beta * e;
        ens.modes[0].cap = 1;
        let s1 = ensemble_stats(&ens).unwrap();
        assert!((s1.mean - 1.0 / (y.exp() + 1.0)).abs() < 1e-14);
        ens.modes[0].cap = 200;
        let s = ensemble_stats(&ens).unwrap();
        assert!((s.mean - 1.0 / y.exp_m1()).abs() < 1e-12 + (-y * 200.0).exp());
        // direct finite sum
        for cap in [3u32, 17, 90] {
            ens.modes[0].cap = cap;
            let z: f64 = (0..=cap).map(|n| (-y * n as f64).exp()).sum();
            let mean: f64 = (0..=cap).map(|n| n as f64 * (-y * n as f64).exp()).sum::<f64>() / z;
            let st = ensemble_stats(&ens).unwrap();
            assert!((st.free_energy - (-z.ln() / ens.beta + ens.mu * mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn hoeffding_formula() {
        let (lat, sh) = infrared_setup();
        let ens = TruncatedModeEnsemble::new(&lat, &sh, 0.5, -0.3).unwrap();
        assert_eq!(hoeffding_tail(&ens, 0.0), 2.0);
        let mut doubled = ens.clone();
        doubled.modes.iter_mut().for_each(|m| m.cap *= 2);
        assert!((doubled.cap_square_sum() - 4.0 * ens.cap_square_sum()).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_seeded() {
        let (lat, sh) = infrared_setup();
        let ens = TruncatedModeEnsemble::new(&lat, &sh, 0.5, -0.3).unwrap();
        let a = sample_totals(&ens, 10_000, 7);
        assert_eq!(a, sample_totals(&ens, 10_000, 7));
        assert_ne!(a, sample_totals(&ens, 10_000, 8));
        let mean = a.iter().map(|&x| x as f64).sum::<f64>() / a.len() as f64;
        let st = ensemble_stats(&ens).unwrap();
        assert!((mean - st.mean).abs() < 5.0 * (st.variance / a.len() as f64).sqrt());
    }

    #[test]
    fn gamma0_members_in_m() {
        let (lat, sh) = infrared_setup();
        let ens = TruncatedModeEnsemble::new(&lat, &sh, 0.5, -0.3).unwrap();
        let opts = Gamma0Options { target: 3.0, exact_modes: 20, ..Default::default() };
        let g = build_gamma0(&ens, 4, &lat, &sh, opts).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let caps: HashMap<usize, u32> = ens.modes.iter().map(|m| (m.mode, m.cap)).collect();
        for a in &g.alphas {
            assert_eq!(a.total(), 4);
            assert_eq!(a.get(sh.p0[0]) as u32, 4 - g.m0);
            for (i, n) in a.occupied() {
                if i != sh.p0[0] {
                    assert!(n as u32 <= caps[&i]);
                }
            }
        }
        // deep cold: everything in the condensate
        let cold = TruncatedModeEnsemble::new(&lat, &sh, 50.0, -0.3).unwrap();
        let g = build_gamma0(&cold, 4, &lat, &sh, opts).unwrap();
        assert_eq!(g.m0, 0);
        assert_eq!(g.alphas.len(), 1);
    }

    #[test]
    fn gamma0_sampling_reproducible() {
        let (lat, sh) = infrared_setup();
        let ens = TruncatedModeEnsemble::new(&lat, &sh, 0.5, -0.3).unwrap();
        let opts = Gamma0Options { target: 3.0, exact_modes: 2, samples: 20_000, seed: 3, ..Default::default() };
        let a = build_gamma0(&ens, 4, &lat, &sh, opts).unwrap();
        let b = build_gamma0(&ens, 4, &lat, &sh, opts).unwrap();
        assert!(a.sampled);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.alphas, b.alphas);
    }

    #[test]
    fn orthonormal_mixture_bound_is_tight() {
        let s = nine_mode(&RadialPotential::zero());
        let fams: Vec<ExcitationFamily> =
            ["0,0,0:4", "0,0,0:3;1,0,0:1", "0,0,0:2;1,0,0:1;-1,0,0:1"].iter().map(|a| s.family(&alpha(&s, a)).unwrap()).collect();
        let m = MixtureState::from_families(vec![0.5, 0.3, 0.2], &fams).unwrap();
        let b = entropy_bound(&m);
        assert_eq!(b.a_inf, 1.0);
        assert!((m.exact_entropy().unwrap() - b.s_gamma0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_mixture_saturates() {
        let s = nine_mode(&square());
        let vh = VhatTable::new(&s.lattice, &square()).unwrap();
        let h = build_hamiltonian(&s.lattice, 2, &vh, BasisGuard::default()).unwrap();
        let g = exact_free_energy(&h, 1.3).unwrap();
        let (w, states) = g.mixture(&h.basis);
        let m = MixtureState::new(w, states).unwrap();
        let r = variational_report(&m, &h, 1.3, g.free_energy).unwrap();
        assert!((r.f_var - g.free_energy).abs() < 1e-10);
        assert!(r.holds(1e-10));
    }
}
