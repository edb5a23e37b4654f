//! Periodic → Dirichlet transfer by the cosine bridge profile.
use crate::error::{domain, Result};
use crate::numerics::integrate_breaks;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// q on [−ℓ, L+ℓ]: quarter cosines on the two margins, 1 in between.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BridgeProfile {
    pub l: f64,
    pub ell: f64,
}

impl BridgeProfile {
    pub fn new(l: f64, ell: f64) -> Result<Self> {
        if !(l > 0.0 && ell > 0.0 && 2.0 * ell <= l) {
            return domain(format!("need 0 < 2ℓ ≤ L, got L = {l}, ℓ = {ell}"));
        }
        Ok(Self { l, ell })
    }

    fn k(&self) -> f64 {
        PI / (4.0 * self.ell)
    }

    pub fn q(&self, x: f64) -> f64 {
        let (l, e) = (self.l, self.ell);
        if x.abs() <= e {
            ((x - e) * self.k()).cos()
        } else if x > e && x < l - e {
            1.0
        } else if (x - l).abs() <= e {
            ((x - (l - e)) * self.k()).cos()
        } else {
            0.0
        }
    }

    pub fn dq(&self, x: f64) -> f64 {
        let (l, e) = (self.l, self.ell);
        if x.abs() <= e {
            -self.k() * ((x - e) * self.k()).sin()
        } else if (x - l).abs() <= e {
            -self.k() * ((x - (l - e)) * self.k()).sin()
        } else {
            0.0
        }
    }

    /// h(x) = q(x₁)q(x₂)q(x₃).
    pub fn h(&self, x: [f64; 3]) -> f64 {
        x.iter().map(|&c| self.q(c)).product()
    }

    fn breaks(&self) -> [f64; 4] {
        [-self.ell, self.ell, self.l - self.ell, self.l + self.ell]
    }

    /// χ on [0, L]: within ℓ of the boundary on the torus.
    pub fn in_strip(&self, x: f64) -> bool {
        let y = x.rem_euclid(self.l);
        y <= self.ell || y >= self.l - self.ell
    }
}

/// Periodic trigonometric polynomial Σ c_n e^{2πinx/L}, n = −d..d.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigPoly {
    pub l: f64,
    /// (n, Re c_n, Im c_n).
    pub coeffs: Vec<(i32, f64, f64)>,
}

impl TrigPoly {
    pub fn constant(l: f64) -> Self {
        Self { l, coeffs: vec![(0, 1.0, 0.0)] }
    }

    pub fn plane_wave(l: f64, n: i32) -> Self {
        Self { l, coeffs: vec![(n, 1.0, 0.0)] }
    }

    pub fn random(l: f64, degree: i32, rng: &mut impl Rng) -> Self {
        let coeffs = (-degree..=degree).map(|n| (n, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        Self { l, coeffs }
    }

    pub fn degree(&self) -> i32 {
        self.coeffs.iter().map(|c| c.0.abs()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let w = 2.0 * PI / self.l;
        self.coeffs.iter().map(|&(n, a, b)| Complex64::new(a, b) * Complex64::from_polar(1.0, w * n as f64 * x)).sum()
    }

    pub fn deriv(&self, x: f64) -> Complex64 {
        let w = 2.0 * PI / self.l;
        self.coeffs
            .iter()
            .map(|&(n, a, b)| Complex64::new(a, b) * Complex64::new(0.0, w * n as f64) * Complex64::from_polar(1.0, w * n as f64 * x))
            .sum()
    }
}

/// A one-dimensional test function with its derivative.
pub trait Periodic1d: Sync {
    fn value(&self, x: f64) -> Complex64;
    fn derivative(&self, x: f64) -> Complex64;
}

impl Periodic1d for TrigPoly {
    fn value(&self, x: f64) -> Complex64 {
        self.eval(x)
    }
    fn derivative(&self, x: f64) -> Complex64 {
        self.deriv(x)
    }
}

fn check_period(p: &BridgeProfile, phi: &dyn Periodic1d) -> Result<()> {
    for j in 0..16 {
        let x = p.l * j as f64 / 16.0 + 0.123 * p.l / 16.0;
        let (a, b) = (phi.value(x), phi.value(x + p.l));
        let (da, db) = (phi.derivative(x), phi.derivative(x + p.l));
        let scale = 1.0 + a.norm() + da.norm();
        if (a - b).norm() > 1e-9 * scale || (da - db).norm() > 1e-9 * scale {
            return domain(format!("test function is not {}-periodic near x = {x}", p.l));
        }
    }
    Ok(())
}

const QTOL: f64 = 1e-14;

fn quad(f: impl Fn(f64) -> f64, pts: &[f64]) -> Result<f64> {
    Ok(integrate_breaks(f, pts, QTOL, 1e-300)?.value)
}

/// One-dimensional integrals of a test function against the profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SliceIntegrals {
    /// ∫_0^L |φ|².
    pub norm: f64,
    /// ∫_{−ℓ}^{L+ℓ} |qφ|².
    pub bridged: f64,
    /// ∫_0^L |φ'|².
    pub grad: f64,
    /// ∫_{−ℓ}^{L+ℓ} |(qφ)'|².
    pub bridged_grad: f64,
    /// ∫_0^L χ|φ|².
    pub strip: f64,
}

pub fn slice_integrals(p: &BridgeProfile, phi: &dyn Periodic1d) -> Result<SliceIntegrals> {
    check_period(p, phi)?;
    let (l, e) = (p.l, p.ell);
    let inner = [0.0, e, l - e, l];
    let norm = quad(|x| phi.value(x).norm_sqr(), &inner)?;
    let grad = quad(|x| phi.derivative(x).norm_sqr(), &inner)?;
    let strip = quad(|x| phi.value(x).norm_sqr(), &[0.0, e])? + quad(|x| phi.value(x).norm_sqr(), &[l - e, l])?;
    let br = p.breaks();
    let bridged = quad(|x| (p.q(x) * phi.value(x)).norm_sqr(), &br)?;
    let bridged_grad = quad(|x| (p.dq(x) * phi.value(x) + p.q(x) * phi.derivative(x)).norm_sqr(), &br)?;
    Ok(SliceIntegrals { norm, bridged, grad, bridged_grad, strip })
}

/// Separable φ(x) = φ₁(x₁)φ₂(x₂)φ₃(x₃) assembled from slices.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IsometryReport {
    pub norm_in: f64,
    pub norm_out: f64,
    pub defect: f64,
}

pub fn isometry_check(p: &BridgeProfile, factors: [&dyn Periodic1d; 3]) -> Result<IsometryReport> {
    let s: Vec<SliceIntegrals> = factors.iter().map(|f| slice_integrals(p, *f)).collect::<Result<_>>()?;
    let norm_in: f64 = s.iter().map(|x| x.norm).product();
    let norm_out: f64 = s.iter().map(|x| x.bridged).product();
    Ok(IsometryReport { norm_in, norm_out, defect: (norm_out - norm_in).abs() / norm_in })
}

/// ∫|∇(hφ)|² against ∫|∇φ|² + Cℓ⁻²∫χ|φ|².
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PenaltyReport {
    pub lhs: f64,
    pub grad: f64,
    /// ∫χ|φ|² over [0, L]³.
    pub boundary_mass: f64,
    /// Smallest C making the inequality hold for this φ.
    pub c_needed: f64,
    pub c: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// 3(π/4)², the constant that works for every φ; the strips of the three directions can overlap.
pub const PENALTY_C_RIGOROUS: f64 = 3.0 * PI * PI / 16.0;
/// π²/8, the constant checked on the test corpus.
pub const PENALTY_C_CORPUS: f64 = PI * PI / 8.0;

pub fn kinetic_penalty(p: &BridgeProfile, factors: [&dyn Periodic1d; 3], c: f64) -> Result<PenaltyReport> {
    let s: Vec<SliceIntegrals> = factors.iter().map(|f| slice_integrals(p, *f)).collect::<Result<_>>()?;
    let others = |a: usize, f: &dyn Fn(&SliceIntegrals) -> f64| (0..3).filter(|&b| b != a).map(|b| f(&s[b])).product::<f64>();
    let lhs: f64 = (0..3).map(|a| s[a].bridged_grad * others(a, &|x| x.bridged)).sum();
    let grad: f64 = (0..3).map(|a| s[a].grad * others(a, &|x| x.norm)).sum();
    let total: f64 = s.iter().map(|x| x.norm).product();
    let interior: f64 = s.iter().map(|x| x.norm - x.strip).product();
    let boundary_mass = total - interior;
    let ell2 = p.ell * p.ell;
    let c_needed = if boundary_mass > 0.0 { (lhs - grad) * ell2 / boundary_mass } else { 0.0 };
    let rhs = grad + c / ell2 * boundary_mass;
    Ok(PenaltyReport { lhs, grad, boundary_mass, c_needed, c, rhs, margin: rhs - lhs })
}

/// |Λ*| = |Λ|(1 + 2ρ^{41/120})³ and ρ* = ρ(1 + 2ρ^{41/120})^{−3}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoxRescale {
    pub l: f64,
    pub rho: f64,
    pub l_star: f64,
    pub rho_star: f64,
    pub factor: f64,
    /// |ρ|Λ| − ρ*|Λ*|| / ρ|Λ|.
    pub defect: f64,
}

pub fn box_rescale(l: f64, rho: f64) -> Result<BoxRescale> {
    if !(rho > 0.0 && l > 0.0) {
        return domain("L and rho must be positive");
    }
    let s = 1.0 + 2.0 * rho.powf(41.0 / 120.0);
    let factor = s * s * s;
    let l_star = l * s;
    let rho_star = rho / factor;
    let n = rho * l.powi(3);
    let n_star = rho_star * l_star.powi(3);
    Ok(BoxRescale { l, rho, l_star, rho_star, factor, defect: (n - n_star).abs() / n })
}

/// Penalty average over shifts u of a one-particle density, per direction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShiftScan {
    pub best_u: f64,
    pub best: f64,
    pub average: f64,
    /// 2ℓ/L × mass, the exact shift average.
    pub expected_average: f64,
}

/// Scans u on a grid of [0, L) for ∫χ(x + u) n(x) dx.
pub fn shift_scan(p: &BridgeProfile, density: &(dyn Fn(f64) -> f64 + Sync), points: usize) -> Result<ShiftScan> {
    let l = p.l;
    let mass = quad(density, &[0.0, l])?;
    let vals: Vec<(f64, f64)> = (0..points)
        .into_par_iter()
        .map(|j| {
            let u = l * j as f64 / points as f64;
            // χ(x+u) = 1 on x ∈ [−u − ℓ, −u + ℓ] mod L
            let a = (-u - p.ell).rem_euclid(l);
            let v = if a + 2.0 * p.ell <= l {
                quad(density, &[a, a + 2.0 * p.ell])
            } else {
                quad(density, &[a, l]).and_then(|x| Ok(x + quad(density, &[0.0, a + 2.0 * p.ell - l])?))
            };
            (u, v.unwrap_or(f64::NAN))
        })
        .collect();
    if vals.iter().any(|v| v.1.is_nan()) {
        return domain("shift scan quadrature failed");
    }
    let (best_u, best) = vals.iter().cloned().fold((0.0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
    let average = vals.iter().map(|v| v.1).sum::<f64>() / points as f64;
    Ok(ShiftScan { best_u, best, average, expected_average: 2.0 * p.ell / l * mass })
}

/// Discrete bridge on a 1D grid: M periodic samples y_j = jΔ map to x_j = −ℓ + jΔ, j = 0..M + 2ℓ/Δ.
#[derive(Debug, Clone)]
pub struct DiscreteBridge {
    pub profile: BridgeProfile,
    pub m: usize,
    pub out: usize,
}

impl DiscreteBridge {
    pub fn new(profile: BridgeProfile, m: usize) -> Result<Self> {
        let delta = profile.l / m as f64;
        let k = 2.0 * profile.ell / delta;
        if (k - k.round()).abs() > 1e-9 || k.round() < 1.0 {
            return domain("2ℓ must be a positive multiple of the grid spacing L/M");
        }
        Ok(Self { profile, m, out: m + k.round() as usize + 1 })
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let delta = self.profile.l / self.m as f64;
        let shift = (self.out - 1 - self.m) / 2;
        (0..self.out)
            .map(|j| {
                let x = -self.profile.ell + j as f64 * delta;
                let src = (j as i64 - shift as i64).rem_euclid(self.m as i64) as usize;
                v[src] * self.profile.q(x)
            })
            .collect()
    }
}

fn density_spectrum(weights: &[f64], states: &[Vec<Complex64>]) -> Vec<f64> {
    let n = states[0].len();
    let mut rho = DMatrix::<Complex64>::zeros(n, n);
    for (g, s) in weights.iter().zip(states) {
        let norm2: f64 = s.iter().map(|c| c.norm_sqr()).sum();
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] += s[i] * s[j].conj() * (*g / norm2);
            }
        }
    }
    let mut e: Vec<f64> = rho.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyTransfer {
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub spectrum_defect: f64,
    pub norm_defect: f64,
}

/// Spectra of Σg|ψ⟩⟨ψ| before and after the discrete bridge.
pub fn entropy_transfer_check(bridge: &DiscreteBridge, weights: &[f64], states: &[Vec<Complex64>]) -> Result<EntropyTransfer> {
    if weights.len() != states.len() || states.is_empty() || states.iter().any(|s| s.len() != bridge.m) {
        return domain("mixture does not match the grid");
    }
    let mapped: Vec<Vec<Complex64>> = states.iter().map(|s| bridge.apply(s)).collect();
    let mut norm_defect: f64 = 0.0;
    for (a, b) in states.iter().zip(&mapped) {
        let na: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
        norm_defect = norm_defect.max((na - nb).abs() / na);
    }
    let before = density_spectrum(weights, states);
    let after = density_spectrum(weights, &mapped);
    let spectrum_defect = (0..after.len()).map(|i| (before.get(i).copied().unwrap_or(0.0) - after[i]).abs()).fold(0.0, f64::max);
    let ent = |e: &[f64]| -e.iter().filter(|&&x| x > 1e-300).map(|x| x * x.ln()).sum::<f64>();
    Ok(EntropyTransfer { entropy_before: ent(&before), entropy_after: ent(&after), spectrum_defect, norm_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile() -> BridgeProfile {
        BridgeProfile::new(10.0, 1.5).unwrap()
    }

    #[test]
    fn profile_shape() {
        let p = profile();
        assert_eq!(p.q(5.0), 1.0);
        assert!(p.q(-1.5).abs() < 1e-15 && p.q(11.5).abs() < 1e-15);
        for x in [0.3, 1.1, 2.0, 4.4] {
            assert!((p.q(x) - p.q(10.0 - x)).abs() < 1e-14);
        }
        assert!((p.q(1.5) - 1.0).abs() < 1e-15 && (p.q(8.5) - 1.0).abs() < 1e-15);
        assert!(BridgeProfile::new(1.0, 0.6).is_err());
    }

    #[test]
    fn constant_function() {
        let p = profile();
        let one = TrigPoly::constant(p.l);
        let s = slice_integrals(&p, &one).unwrap();
        // ∫q² = ℓ + (L − 2ℓ) + ℓ
        assert!((s.bridged - p.l).abs() < 1e-12);
        let r = isometry_check(&p, [&one, &one, &one]).unwrap();
        assert!((r.norm_in - 1000.0).abs() < 1e-9 && r.defect < 1e-12);
        // ∫q'² over both margins = (π/4ℓ)²·2ℓ, so lhs = 3(π/4ℓ)²·2ℓ·L²
        let k = kinetic_penalty(&p, [&one, &one, &one], PENALTY_C_CORPUS).unwrap();
        let want = 3.0 * (PI / (4.0 * p.ell)).powi(2) * 2.0 * p.ell * p.l * p.l;
        assert!((k.lhs - want).abs() < 1e-9 * want);
        assert!(k.margin >= 0.0);
    }

    #[test]
    fn plane_wave_and_random() {
        let p = profile();
        let w = TrigPoly::plane_wave(p.l, 1);
        let one = TrigPoly::constant(p.l);
        assert!(isometry_check(&p, [&w, &one, &w]).unwrap().defect < 1e-10);
        assert!(kinetic_penalty(&p, [&w, &one, &one], PENALTY_C_CORPUS).unwrap().margin >= 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let f: Vec<TrigPoly> = (0..3).map(|_| TrigPoly::random(p.l, 5, &mut rng)).collect();
            assert!(isometry_check(&p, [&f[0], &f[1], &f[2]]).unwrap().defect < 1e-10);
            let k = kinetic_penalty(&p, [&f[0], &f[1], &f[2]], PENALTY_C_RIGOROUS).unwrap();
            assert!(k.margin >= -1e-9 * k.lhs, "{k:?}");
        }
    }

    #[test]
    fn one_dimensional_penalty_identity() {
        // ∫|(qφ)'|² = ∫|φ'|² + (π/4ℓ)² ∫χ|φ|² exactly
        let p = profile();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = TrigPoly::random(p.l, 4, &mut rng);
        let s = slice_integrals(&p, &f).unwrap();
        let want = s.grad + (PI / (4.0 * p.ell)).powi(2) * s.strip;
        assert!((s.bridged_grad - want).abs() < 1e-10 * want);
    }

    #[test]
    fn penalty_scales_with_ell() {
        let a = BridgeProfile::new(40.0, 2.0).unwrap();
        let b = BridgeProfile::new(40.0, 4.0).unwrap();
        // penalty coefficient ℓ⁻² at fixed boundary mass
        let ka = kinetic_penalty(&a, [&TrigPoly::constant(40.0); 3], 1.0).unwrap();
        let kb = kinetic_penalty(&b, [&TrigPoly::constant(40.0); 3], 1.0).unwrap();
        let ca = (ka.rhs - ka.grad) / ka.boundary_mass;
        let cb = (kb.rhs - kb.grad) / kb.boundary_mass;
        assert!((ca / cb - 4.0).abs() < 1e-12);
    }

    #[test]
    fn non_periodic_rejected() {
        struct Ramp;
        impl Periodic1d for Ramp {
            fn value(&self, x: f64) -> Complex64 {
                Complex64::new(x, 0.0)
            }
            fn derivative(&self, _: f64) -> Complex64 {
                Complex64::new(1.0, 0.0)
            }
        }
        assert!(slice_integrals(&profile(), &Ramp).is_err());
    }

    #[test]
    fn rescale_conserves_particles() {
        for rho in [1e-2f64, 1e-4, 1e-8] {
            let l = rho.powf(-41.0 / 60.0);
            let r = box_rescale(l, rho).unwrap();
            assert!(r.defect < 1e-14);
            assert!(r.rho_star < rho);
        }
        let r = box_rescale(1.0, 1e-4).unwrap();
        assert!((r.factor - (1.0 + 2.0 * 1e-4f64.powf(41.0 / 120.0)).powi(3)).abs() < 1e-15);
        assert!((box_rescale(1.0, 1e-30).unwrap().rho_star / 1e-30 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shifts_beat_the_average() {
        let p = profile();
        let n = |x: f64| 1.0 + 0.8 * (2.0 * PI * x / p.l).cos();
        let s = shift_scan(&p, &n, 200).unwrap();
        assert!(s.best <= s.average);
        assert!((s.average - s.expected_average).abs() < 1e-3 * s.expected_average);
    }

    #[test]
    fn discrete_bridge_keeps_spectrum() {
        let p = BridgeProfile::new(8.0, 1.0).unwrap();
        let b = DiscreteBridge::new(p, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let states: Vec<Vec<Complex64>> =
            (0..3).map(|_| (0..32).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).collect();
        let r = entropy_transfer_check(&b, &[0.5, 0.3, 0.2], &states).unwrap();
        assert!(r.norm_defect < 1e-12);
        assert!(r.spectrum_defect < 1e-10);
        assert!((r.entropy_before - r.entropy_after).abs() < 1e-10);
        let single = entropy_transfer_check(&b, &[1.0], &states[..1]).unwrap();
        assert!(single.entropy_after.abs() < 1e-10);
        assert!(DiscreteBridge::new(p, 30).is_err());
    }
}
