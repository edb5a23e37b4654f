//! Ideal Bose gas thermodynamics in the thermodynamic limit and on finite mode sets.

use crate::error::{domain, Result};
use crate::numerics::{bisect, integrate_breaks, integrate_to_inf, polylog_exp, zeta};
use serde::Serialize;
use std::f64::consts::PI;

pub const ZETA_3_2: f64 = 2.612_375_348_685_488_3;
pub const ZETA_5_2: f64 = 1.341_487_257_250_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    AboveCritical,
    BelowCritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermoPoint {
    pub rho: f64,
    pub beta: f64,
    pub mu: f64,
    pub rho_c: f64,
    pub f0: f64,
    pub regime: Regime,
}

fn lambda_factor(beta: f64) -> f64 {
    (4.0 * PI * beta).powf(-1.5)
}

/// ρ_c = (4πβ)^{-3/2} ζ(3/2).
pub fn critical_density(beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return domain(format!("beta = {beta} must be positive"));
    }
    Ok(lambda_factor(beta) * zeta(1.5))
}

/// Density of the ideal gas at chemical potential μ ≤ 0, polylog series.
pub fn density_series(beta: f64, mu: f64) -> f64 {
    lambda_factor(beta) * polylog_exp(1.5, beta * mu)
}

/// (2π)^{-3} ∫ (e^{β(p²−μ)} − 1)^{-1} d³p by adaptive quadrature.
pub fn density_quadrature(beta: f64, mu: f64) -> Result<f64> {
    let q = bose_radial(|p| p * p / (beta * (p * p - mu)).exp_m1(), beta, mu)?;
    Ok(4.0 * PI * q / (8.0 * PI * PI * PI))
}

/// ∫_0^∞ f(p) dp with breaks resolving the crossover at p ~ √(−μ) when μ → 0⁻.
fn bose_radial(f: impl Fn(f64) -> f64, beta: f64, mu: f64) -> Result<f64> {
    let thermal = beta.sqrt().recip();
    let mut pts = vec![0.0];
    let mut p = (-mu).sqrt();
    while p > 0.0 && p < thermal {
        pts.push(p);
        p *= 4.0;
    }
    pts.push(thermal);
    let head = integrate_breaks(&f, &pts, 1e-13, 1e-300)?.value;
    Ok(head + integrate_to_inf(&f, thermal, 1e-13, 1e-300)?.value)
}

/// Grand-potential density part −β^{-1}(4πβ)^{-3/2} Li_{5/2}(e^{βμ}), series route.
fn pressure_term_series(beta: f64, mu: f64) -> f64 {
    -lambda_factor(beta) * polylog_exp(2.5, beta * mu) / beta
}

fn pressure_term_quadrature(beta: f64, mu: f64) -> Result<f64> {
    // ln(1 − e^{−y}) without cancellation at either end
    let log1me = |y: f64| if y < std::f64::consts::LN_2 { (-(-y).exp_m1()).ln() } else { (-(-y).exp()).ln_1p() };
    let q = bose_radial(|p| p * p * log1me(beta * (p * p - mu)), beta, mu)?;
    Ok(4.0 * PI * q / (8.0 * PI * PI * PI) / beta)
}

/// μ(ρ, β): zero at and above ρ_c, else the root of density(μ) = ρ with μ = −e^t/β.
pub fn chemical_potential(rho: f64, beta: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("rho = {rho} must be positive"));
    }
    let rho_c = critical_density(beta)?;
    if rho >= rho_c {
        return Ok(0.0);
    }
    let resid = |t: f64| density_series(beta, -t.exp() / beta) / rho - 1.0;
    let (lo, hi) = (-80.0, 12.0);
    if resid(lo) <= 0.0 {
        return Ok(-f64::exp(lo) / beta);
    }
    let t = bisect(resid, lo, hi, 1e-14, 200)?;
    Ok(-t.exp() / beta)
}

/// μ(ρ, β) from the quadrature density; independent of the polylog series.
pub fn chemical_potential_quadrature(rho: f64, beta: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("rho = {rho} must be positive"));
    }
    if rho >= density_quadrature(beta, 0.0)? {
        return Ok(0.0);
    }
    let resid = |t: f64| density_quadrature(beta, -t.exp() / beta).map_or(f64::NAN, |d| d / rho - 1.0);
    let (lo, hi) = (-80.0, 12.0);
    if resid(lo) <= 0.0 {
        return Ok(-f64::exp(lo) / beta);
    }
    let t = bisect(resid, lo, hi, 1e-14, 200)?;
    Ok(-t.exp() / beta)
}

/// f_0 by the quadrature formulas.
pub fn free_energy_density(rho: f64, beta: f64) -> Result<f64> {
    let mu = chemical_potential_quadrature(rho, beta)?;
    let rho_eff = rho.min(critical_density(beta)?);
    Ok(rho_eff * mu + pressure_term_quadrature(beta, mu)?)
}

/// f_0 by the polylog series; independent of the quadrature path.
pub fn free_energy_series(rho: f64, beta: f64) -> Result<f64> {
    let mu = chemical_potential(rho, beta)?;
    let rho_eff = rho.min(critical_density(beta)?);
    Ok(rho_eff * mu + pressure_term_series(beta, mu))
}

pub fn thermo_point(rho: f64, beta: f64) -> Result<ThermoPoint> {
    let rho_c = critical_density(beta)?;
    let mu = chemical_potential(rho, beta)?;
    let f0 = free_energy_density(rho, beta)?;
    let regime = if rho >= rho_c { Regime::AboveCritical } else { Regime::BelowCritical };
    Ok(ThermoPoint { rho, beta, mu, rho_c, f0, regime })
}

/// β(ρ) = c ρ^{-2/3}, with optional exact-match overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSchedule {
    pub c: f64,
    pub overrides: Vec<(f64, f64)>,
}

impl TemperatureSchedule {
    pub fn power(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return domain(format!("schedule coefficient c = {c} must be positive"));
        }
        Ok(Self { c, overrides: Vec::new() })
    }

    pub fn beta(&self, rho: f64) -> f64 {
        self.overrides.iter().find(|(r, _)| *r == rho).map_or(self.c * rho.powf(-2.0 / 3.0), |o| o.1)
    }
}

/// R = (4π)^{-3/2} ζ(3/2) c^{-3/2}.
pub fn ratio_r(schedule: &TemperatureSchedule) -> f64 {
    (4.0 * PI).powf(-1.5) * ZETA_3_2 * schedule.c.powf(-1.5)
}

/// 4πa(2ρ² − [ρ − ρ_c]₊²).
pub fn delta_f_leading(a: f64, rho: f64, rho_c: f64) -> f64 {
    let excess = if rho > rho_c { rho - rho_c } else { 0.0 };
    4.0 * PI * a * (2.0 * rho * rho - excess * excess)
}

/// Per-mode statistics of a (possibly capped) geometric occupation distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStats {
    /// −β^{-1} ln Z_k + μ n̄_k.
    pub free_energy: f64,
    pub mean: f64,
    pub variance: f64,
    /// ln Z_k.
    pub ln_z: f64,
}

/// Statistics of a mode with energy e = p² − μ and occupation cap (None = untruncated).
pub fn mode_stats(beta: f64, mu: f64, e: f64, cap: Option<u32>) -> Result<ModeStats> {
    let y = beta * e;
    let (ln_z, mean, second) = match cap {
        None => {
            if !(y > 0.0) {
                return domain(format!("mode with beta*E = {y} <= 0 and no cap diverges"));
            }
            let n = 1.0 / y.exp_m1();
            (-(-(-y).exp_m1()).ln(), n, n * (1.0 + n))
        }
        Some(c) if y.abs() < 1e-6 || c <= 64 => {
            // direct sums with the largest term factored out
            let lw: Vec<f64> = (0..=c).map(|n| -y * n as f64).collect();
            let mx = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = lw.iter().map(|l| (l - mx).exp()).collect();
            let z: f64 = w.iter().sum();
            let m1: f64 = w.iter().enumerate().map(|(n, x)| n as f64 * x).sum::<f64>() / z;
            let m2: f64 = w.iter().enumerate().map(|(n, x)| (n * n) as f64 * x).sum::<f64>() / z;
            (z.ln() + mx, m1, m2 - m1 * m1)
        }
        Some(c) => {
            let c1 = (c + 1) as f64;
            let ln_z = if y > 0.0 {
                (-(-y * c1).exp_m1()).ln() - (-(-y).exp_m1()).ln()
            } else {
                // x > 1: Z = (x^{C+1} − 1)/(x − 1)
                ((-y * c1).exp_m1()).ln() - ((-y).exp_m1()).ln()
            };
            let mean = 1.0 / y.exp_m1() - c1 / (y * c1).exp_m1();
            // Var = d²lnZ/dy², closed form for the truncated geometric
            let s = |t: f64| {
                let h = 0.5 * t;
                1.0 / (4.0 * h.sinh().powi(2))
            };
            let var = s(y) - c1 * c1 * s(y * c1);
            (ln_z, mean, var)
        }
    };
    Ok(ModeStats { free_energy: -ln_z / beta + mu * mean, mean, variance: second, ln_z })
}

/// Lattice sums over a finite mode set on the torus (2π/L)ℤ³: total free energy and per-mode means.
pub fn lattice_ideal_sums(l: f64, beta: f64, mu: f64, modes: &[([i32; 3], Option<u32>)]) -> Result<(f64, Vec<f64>)> {
    let k = 2.0 * PI / l;
    let mut f = 0.0;
    let mut means = Vec::with_capacity(modes.len());
    for (n, cap) in modes {
        let p2 = k * k * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
        let s = mode_stats(beta, mu, p2 - mu, *cap)?;
        f += s.free_energy;
        means.push(s.mean);
    }
    Ok((f, means))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_density_values() {
        let r1 = critical_density(1.0).unwrap();
        assert!((r1 - 0.058_643_7).abs() < 1e-7);
        assert!((critical_density(4.0).unwrap() - r1 / 8.0).abs() < 1e-17);
        assert!(critical_density(0.0).is_err());
    }

    #[test]
    fn mu_zero_above_critical() {
        let rc = critical_density(1.0).unwrap();
        assert_eq!(chemical_potential(2.0 * rc, 1.0).unwrap(), 0.0);
        assert_eq!(chemical_potential(rc, 1.0).unwrap(), 0.0);
        assert!(chemical_potential(rc * (1.0 - 1e-6), 1.0).unwrap() > -1e-3);
    }

    #[test]
    fn mu_boltzmann_regime() {
        let (rho, beta) = (1e-6, 1.0);
        let mu = chemical_potential(rho, beta).unwrap();
        let resid = density_series(beta, mu) / rho - 1.0;
        assert!(resid.abs() < 1e-10);
        let classical = (rho * (4.0 * PI * beta).powf(1.5)).ln() / beta;
        assert!((mu - classical).abs() < 0.01 * classical.abs());
    }

    #[test]
    fn f0_above_critical_constant() {
        let rc = critical_density(1.0).unwrap();
        let want = -ZETA_5_2 / (4.0 * PI).powf(1.5);
        for m in [1.0, 1.5, 10.0] {
            let f = free_energy_density(m * rc, 1.0).unwrap();
            assert!((f - want).abs() < 1e-10 * want.abs());
        }
        assert!((want + 0.030_114_6).abs() < 1e-6);
    }

    #[test]
    fn ratio_r_values() {
        let c = ZETA_3_2.powf(2.0 / 3.0) / (4.0 * PI);
        assert!((ratio_r(&TemperatureSchedule::power(c).unwrap()) - 1.0).abs() < 1e-14);
        let r1 = ratio_r(&TemperatureSchedule::power(1.0).unwrap());
        assert!((r1 - critical_density(1.0).unwrap()).abs() < 1e-14);
        assert!(ratio_r(&TemperatureSchedule::power(2.0).unwrap()) < r1);
    }

    #[test]
    fn delta_f_branches() {
        let a = 0.238406;
        assert_eq!(delta_f_leading(a, 0.01, 0.02), 8.0 * PI * a * 1e-4);
        assert_eq!(delta_f_leading(a, 0.01, 0.0), 4.0 * PI * a * 1e-4);
        let v = delta_f_leading(a, 0.01, 0.004);
        assert!((v - 4.9139e-4).abs() < 1e-7);
    }

    #[test]
    fn mode_stats_cases() {
        let (beta, mu, e) = (1.3, -0.2, 0.7);
        let y = beta * e;
        let un = mode_stats(beta, mu, e, None).unwrap();
        assert!((un.mean - 1.0 / y.exp_m1()).abs() < 1e-15);
        let c1 = mode_stats(beta, mu, e, Some(1)).unwrap();
        assert!((c1.mean - 1.0 / (y.exp() + 1.0)).abs() < 1e-15);
        let big = mode_stats(beta, mu, e, Some(200)).unwrap();
        assert!((big.mean - un.mean).abs() < (-y * 200.0).exp() * 300.0);
        assert!(mode_stats(1.0, 0.0, 0.0, None).is_err());
        assert!(mode_stats(1.0, 0.0, 0.0, Some(3)).unwrap().mean == 1.5);
    }
}
