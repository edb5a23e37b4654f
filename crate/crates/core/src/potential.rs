//! Spherically symmetric pair potentials and the mollified majorant.

use crate::error::{domain, Error, Result};
use crate::numerics::{integrate, integrate_breaks};
use std::f64::consts::PI;

/// One polynomial piece on [a, b], coefficients in powers of r.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn eval(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * r + k as f64 * c;
        }
        acc
    }

    fn max_abs_slope(&self) -> f64 {
        // polynomial pieces here are low degree; dense sampling is enough
        (0..=64).map(|i| self.deriv(self.a + (self.b - self.a) * i as f64 / 64.0).abs()).fold(0.0, f64::max)
    }
}

/// Samples of the bundled tabulated potential.
pub const BUNDLED_TABLE: [(f64, f64); 5] = [(0.0, 4.0), (0.3, 3.0), (0.6, 1.5), (0.9, 0.5), (1.2, 0.0)];

/// Nonnegative, bounded, finite-range radial potential stored as contiguous polynomial pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPotential {
    pieces: Vec<Piece>,
    range: f64,
    sup_norm: f64,
}

impl RadialPotential {
    /// Validates pieces: contiguous from 0, values nonnegative on a sampling of each piece.
    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Ok(Self::zero());
        }
        let mut at = 0.0;
        let mut sup: f64 = 0.0;
        for p in &pieces {
            if p.a != at || p.b <= p.a || !p.b.is_finite() {
                return Err(Error::InvalidPotential(format!("pieces not contiguous at r = {at}")));
            }
            for i in 0..=32 {
                let v = p.eval(p.a + (p.b - p.a) * i as f64 / 32.0);
                if !(v >= -1e-14) || !v.is_finite() {
                    return Err(Error::InvalidPotential(format!("negative or non-finite value {v} on [{}, {}]", p.a, p.b)));
                }
                sup = sup.max(v);
            }
            at = p.b;
        }
        // trailing zero pieces do not extend the range
        let mut range = 0.0;
        for p in &pieces {
            if p.coeffs.iter().any(|&c| c != 0.0) {
                range = p.b;
            }
        }
        Ok(Self { pieces, range, sup_norm: sup })
    }

    pub fn zero() -> Self {
        Self { pieces: Vec::new(), range: 0.0, sup_norm: 0.0 }
    }

    pub fn square(v0: f64, r0: f64) -> Result<Self> {
        if v0 < 0.0 || r0 <= 0.0 {
            return domain("square barrier needs V0 >= 0, R0 > 0");
        }
        Self::from_pieces(vec![Piece { a: 0.0, b: r0, coeffs: vec![v0] }])
    }

    /// V0 (1 - r/R0) on [0, R0].
    pub fn ramp(v0: f64, r0: f64) -> Result<Self> {
        if v0 < 0.0 || r0 <= 0.0 {
            return domain("ramp needs V0 >= 0, R0 > 0");
        }
        Self::from_pieces(vec![Piece { a: 0.0, b: r0, coeffs: vec![v0, -v0 / r0] }])
    }

    /// The three reference potentials shipped with the CLI configs.
    pub fn bundled() -> Vec<(&'static str, Self)> {
        vec![
            ("square", Self::square(2.0, 1.0).expect("valid")),
            ("ramp", Self::ramp(3.0, 1.5).expect("valid")),
            ("table", Self::table(&BUNDLED_TABLE).expect("valid")),
        ]
    }

    /// Piecewise-linear interpolation of (r, V) samples starting at r = 0.
    pub fn table(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 || samples[0].0 != 0.0 {
            return Err(Error::InvalidPotential("table needs >= 2 samples starting at r = 0".into()));
        }
        let mut pieces = Vec::with_capacity(samples.len() - 1);
        for w in samples.windows(2) {
            let ((r0, v0), (r1, v1)) = (w[0], w[1]);
            if r1 <= r0 {
                return Err(Error::InvalidPotential(format!("table radii not increasing at {r1}")));
            }
            let slope = (v1 - v0) / (r1 - r0);
            pieces.push(Piece { a: r0, b: r1, coeffs: vec![v0 - slope * r0, slope] });
        }
        Self::from_pieces(pieces)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_zero(&self) -> bool {
        self.range == 0.0
    }

    /// Piece boundaries inside [0, range].
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        v.extend(self.pieces.iter().map(|p| p.b).filter(|&b| b <= self.range));
        v
    }

    fn piece_at(&self, r: f64) -> Option<&Piece> {
        if r > self.range || self.pieces.is_empty() {
            return None;
        }
        // pieces are [a, b) except the last nonzero one, which includes R0
        let idx = self.pieces.partition_point(|p| p.b <= r);
        let idx = idx.min(self.pieces.len() - 1);
        Some(&self.pieces[idx])
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return domain(format!("negative radius {r}"));
        }
        Ok(self.value(r))
    }

    /// Unchecked evaluation for r >= 0.
    pub fn value(&self, r: f64) -> f64 {
        self.piece_at(r).map_or(0.0, |p| p.eval(r).max(0.0))
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.piece_at(r).map_or(0.0, |p| p.deriv(r))
    }

    /// V̂(p) = 4π ∫ r² V(r) sinc(pr) dr.
    pub fn fourier_hat(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return domain(format!("negative wavenumber {p}"));
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        radial_transform(|r| self.value(r), &self.breakpoints(), p, 1e-12)
    }

    /// ∫ V d³x.
    pub fn integral(&self) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.b <= self.range)
            .map(|p| {
                // exact polynomial moment ∫ r^{k+2}
                4.0 * PI
                    * p.coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * (p.b.powi(k as i32 + 3) - p.a.powi(k as i32 + 3)) / (k as f64 + 3.0))
                        .sum::<f64>()
            })
            .sum()
    }
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// 4π ∫ r² f(r) sinc(pr) dr over [breaks[0], breaks.last()], with extra splits per half period.
pub(crate) fn radial_transform<F: Fn(f64) -> f64>(f: F, breaks: &[f64], p: f64, rel: f64) -> Result<f64> {
    let mut pts = Vec::new();
    for w in breaks.windows(2) {
        let n = ((p * (w[1] - w[0]) / PI).ceil() as usize).max(1);
        for i in 0..n {
            pts.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
        }
    }
    pts.push(*breaks.last().unwrap());
    let scale = integrate_breaks(|r| (r * r * f(r)).abs(), &pts, rel, 1e-300)?.value;
    let q = integrate_breaks(|r| r * r * f(r) * sinc(p * r), &pts, rel, rel * scale * 1e-2)?;
    Ok(4.0 * PI * q.value)
}

/// Smooth step: 0 for x ≤ 0, 1 for x ≥ 1, C∞.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

const PLATEAU: f64 = 1.5;
const SUPPORT: f64 = 2.0;
const T_GRID: usize = 4000;

/// Radial bump g: constant g(0) on r ≤ 1.5, smooth decay to 0 at r = 2, unit L¹ norm in 3D.
#[derive(Debug, Clone)]
pub struct Mollifier {
    g0: f64,
    // T(τ) = ∫₀^τ σ g(σ) dσ on the transition region, uniform grid
    t_table: Vec<f64>,
}

impl Default for Mollifier {
    fn default() -> Self {
        Self::new()
    }
}

impl Mollifier {
    pub fn new() -> Self {
        let shape = |r: f64| smooth_step((SUPPORT - r) / (SUPPORT - PLATEAU));
        let tail = integrate(|r| r * r * shape(r), PLATEAU, SUPPORT, 1e-14, 0.0).unwrap().value;
        let mass = 4.0 * PI * (PLATEAU.powi(3) / 3.0 + tail);
        let g0 = 1.0 / mass;
        let h = (SUPPORT - PLATEAU) / T_GRID as f64;
        let mut t_table = Vec::with_capacity(T_GRID + 1);
        let mut acc = g0 * PLATEAU * PLATEAU / 2.0;
        t_table.push(acc);
        for i in 0..T_GRID {
            let a = PLATEAU + i as f64 * h;
            acc += integrate(|s| s * g0 * shape(s), a, a + h, 1e-14, 0.0).unwrap().value;
            t_table.push(acc);
        }
        Self { g0, t_table }
    }

    pub fn plateau_value(&self) -> f64 {
        self.g0
    }

    pub fn g(&self, r: f64) -> f64 {
        self.g0 * smooth_step((SUPPORT - r) / (SUPPORT - PLATEAU))
    }

    /// g_m(r) = m³ g(m r).
    pub fn g_m(&self, m: f64, r: f64) -> f64 {
        m * m * m * self.g(m * r)
    }

    /// ∫₀^τ σ g(σ) dσ, cubic Hermite on the transition table.
    pub fn t_antideriv(&self, tau: f64) -> f64 {
        if tau <= PLATEAU {
            return self.g0 * tau.max(0.0).powi(2) / 2.0;
        }
        if tau >= SUPPORT {
            return *self.t_table.last().unwrap();
        }
        let h = (SUPPORT - PLATEAU) / T_GRID as f64;
        let x = (tau - PLATEAU) / h;
        let i = (x.floor() as usize).min(T_GRID - 1);
        let t = x - i as f64;
        let (x0, x1) = (PLATEAU + i as f64 * h, PLATEAU + (i + 1) as f64 * h);
        let (y0, y1) = (self.t_table[i], self.t_table[i + 1]);
        let (d0, d1) = (x0 * self.g(x0) * h, x1 * self.g(x1) * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    /// 4π ∫ r² g_m(r) dr by quadrature.
    pub fn mass(&self, m: f64) -> f64 {
        4.0 * PI * integrate_breaks(|r| r * r * self.g_m(m, r), &[0.0, PLATEAU / m, SUPPORT / m], 1e-13, 0.0).unwrap().value
    }

    /// Radial 3D convolution (f * g_m)(r) for f supported in [0, f_support].
    pub fn convolve<F: Fn(f64) -> f64>(&self, f: &F, f_breaks: &[f64], m: f64, r: f64) -> f64 {
        let reach = SUPPORT / m;
        let f_support = *f_breaks.last().unwrap();
        let lo = (r - reach).max(0.0);
        let hi = (r + reach).min(f_support);
        if hi <= lo {
            return 0.0;
        }
        let mut pts = vec![lo];
        pts.extend(f_breaks.iter().copied().filter(|&b| b > lo && b < hi));
        for c in [r - PLATEAU / m, r + PLATEAU / m, PLATEAU / m - r] {
            if c > lo && c < hi {
                pts.push(c);
            }
        }
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        // tails far below the peak only need absolute accuracy
        let floor = 1e-17 * f_breaks.iter().map(|&b| f(b).abs()).fold(f(0.0).abs(), f64::max);
        if r < 1e-9 {
            // limit r → 0: ∫ f(s) g_m(s) 4π s² ds
            return 4.0 * PI * integrate_breaks(|s| s * s * f(s) * self.g_m(m, s), &pts, 1e-13, floor).unwrap().value;
        }
        let inner = |s: f64| m * (self.t_antideriv(m * (r + s)) - self.t_antideriv(m * (r - s).abs()));
        let q = integrate_breaks(|s| s * f(s) * inner(s), &pts, 1e-13, floor).unwrap();
        2.0 * PI / r * q.value
    }
}

/// Output of [`mollified_majorant`].
#[derive(Debug, Clone)]
pub struct Majorant {
    pub potential: RadialPotential,
    /// ‖F − f‖₁ over R³.
    pub l1_distance: f64,
    /// sup-norm shift D added as D g / g(0).
    pub shift: f64,
    /// Lipschitz constant used for the envelope.
    pub lipschitz: f64,
}

pub const MAJORANT_CHECK_SPACING: f64 = 1e-3;
pub const MAJORANT_SAMPLE_SPACING: f64 = 2.5e-4;

/// Lipschitz upper envelope sup_s (f(s) − K|r − s|) of a piecewise-polynomial f.
pub fn lipschitz_envelope(f: &RadialPotential, k: f64, r: f64) -> f64 {
    let mut best: f64 = 0.0;
    for p in f.pieces() {
        if p.a > f.range() {
            break;
        }
        let s = r.clamp(p.a, p.b);
        best = best.max(p.eval(s) - k * (r - s).abs());
    }
    best
}

/// Smooth majorant F ≥ f supported in radius 2, built from the envelope f̃_n and g_m.
pub fn mollified_majorant(f: &RadialPotential, n: u32, m: u32) -> Result<Majorant> {
    if n < 1 || m < 1 {
        return domain("majorant needs n, m >= 1");
    }
    if f.range() > 1.0 {
        return domain(format!("potential range {} exceeds the unit ball", f.range()));
    }
    if m < 4 {
        return domain(format!("m = {m} gives support radius {} > 2", 1.5 + 2.0 / m as f64));
    }
    let samples = (SUPPORT / MAJORANT_SAMPLE_SPACING).round() as usize;
    if f.is_zero() {
        let table: Vec<(f64, f64)> = (0..=samples).map(|i| (i as f64 * MAJORANT_SAMPLE_SPACING, 0.0)).collect();
        return Ok(Majorant { potential: RadialPotential::table(&table)?, l1_distance: 0.0, shift: 0.0, lipschitz: 0.0 });
    }
    let slope = f.pieces().iter().filter(|p| p.b <= f.range()).map(Piece::max_abs_slope).fold(0.0, f64::max);
    let k = (2.0 * n as f64 * f.sup_norm()).max(slope);
    let env = |r: f64| lipschitz_envelope(f, k, r);
    let env_support = f.range() + f.sup_norm() / k;
    let kinks = envelope_kinks(f, k, env_support);
    let mf = m as f64;
    let moll = Mollifier::new();
    let conv = |r: f64| moll.convolve(&env, &kinks, mf, r);

    let mut check: Vec<f64> =
        (0..=(SUPPORT / MAJORANT_CHECK_SPACING).round() as usize).map(|i| i as f64 * MAJORANT_CHECK_SPACING).collect();
    check.extend(kinks.iter().copied());
    let shift = check.iter().map(|&r| env(r) - conv(r)).fold(0.0, f64::max);

    let table: Vec<(f64, f64)> = (0..=samples)
        .map(|i| {
            let r = i as f64 * MAJORANT_SAMPLE_SPACING;
            (r, conv(r) + shift * moll.g(r) / moll.plateau_value())
        })
        .collect();
    let potential = RadialPotential::table(&table)?;

    let env_int = 4.0 * PI * integrate_breaks(|r| r * r * env(r), &kinks, 1e-13, 0.0)?.value;
    let l1_distance = env_int - f.integral() + shift / moll.plateau_value();
    Ok(Majorant { potential, l1_distance, shift, lipschitz: k })
}

fn envelope_kinks(f: &RadialPotential, k: f64, support: f64) -> Vec<f64> {
    let argmax = |r: f64| {
        let mut best = (0.0, usize::MAX);
        for (j, p) in f.pieces().iter().enumerate() {
            if p.a > f.range() {
                break;
            }
            let s = r.clamp(p.a, p.b);
            let v = p.eval(s) - k * (r - s).abs();
            if v > best.0 {
                best = (v, j);
            }
        }
        best.1
    };
    let mut pts = vec![0.0];
    for p in f.pieces().iter().filter(|p| p.b <= f.range()) {
        pts.push(p.b);
    }
    let steps = 4000;
    let h = support / steps as f64;
    for i in 0..steps {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        if argmax(a) != argmax(b) {
            let ja = argmax(a);
            let (mut lo, mut hi) = (a, b);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if argmax(mid) == ja {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            pts.push(0.5 * (lo + hi));
        }
    }
    pts.push(support);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    pts.retain(|&x| x <= support);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let sq = RadialPotential::square(2.0, 1.0).unwrap();
        assert_eq!(sq.evaluate(0.5).unwrap(), 2.0);
        assert_eq!(sq.evaluate(1.5).unwrap(), 0.0);
        assert!(sq.evaluate(-0.1).is_err());
        let ramp = RadialPotential::ramp(1.0, 1.0).unwrap();
        assert!((ramp.evaluate(0.25).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn fourier_zero_momentum_is_volume_integral() {
        let sq = RadialPotential::square(2.0, 1.0).unwrap();
        let exact = 4.0 * PI / 3.0 * 2.0;
        assert!((sq.fourier_hat(0.0).unwrap() - exact).abs() < 1e-10 * exact);
        assert!((sq.integral() - exact).abs() < 1e-14);
        let ramp = RadialPotential::ramp(1.0, 1.0).unwrap();
        assert!((ramp.fourier_hat(0.0).unwrap() - ramp.integral()).abs() < 1e-10 * ramp.integral());
    }

    #[test]
    fn fourier_closed_form_square() {
        // 4πV0 (sin pR − pR cos pR)/p³
        let sq = RadialPotential::square(2.0, 1.0).unwrap();
        for &p in &[0.3, 1.0, 7.0, 60.0] {
            let exact = 4.0 * PI * 2.0 * (f64::sin(p) - p * f64::cos(p)) / p.powi(3);
            let got = sq.fourier_hat(p).unwrap();
            assert!((got - exact).abs() < 1e-10 * 8.4, "p={p}");
        }
        assert!(sq.fourier_hat(60.0).unwrap().abs() < sq.fourier_hat(0.0).unwrap() / 10.0);
    }

    #[test]
    fn zero_potential() {
        let z = RadialPotential::zero();
        assert_eq!(z.fourier_hat(3.0).unwrap(), 0.0);
        assert_eq!(z.value(0.1), 0.0);
    }

    #[test]
    fn rejects_negative() {
        assert!(RadialPotential::table(&[(0.0, 1.0), (1.0, -0.5)]).is_err());
    }

    #[test]
    fn mollifier_unit_mass() {
        let g = Mollifier::new();
        for m in [1.0, 4.0, 8.0, 16.0] {
            assert!((g.mass(m) - 1.0).abs() < 1e-8, "m={m}");
        }
        // antiderivative consistency
        let q = integrate(|s| s * g.g(s), 0.0, 1.8, 1e-13, 0.0).unwrap().value;
        assert!((g.t_antideriv(1.8) - q).abs() < 1e-12);
    }

    #[test]
    fn majorant_of_zero() {
        let maj = mollified_majorant(&RadialPotential::zero(), 1, 4).unwrap();
        assert_eq!(maj.l1_distance, 0.0);
        assert_eq!(maj.potential.sup_norm(), 0.0);
    }

    #[test]
    fn majorant_domain_errors() {
        let wide = RadialPotential::square(1.0, 1.5).unwrap();
        assert!(mollified_majorant(&wide, 1, 8).is_err());
        let sq = RadialPotential::square(1.0, 1.0).unwrap();
        assert!(mollified_majorant(&sq, 1, 3).is_err());
    }

    #[test]
    fn envelope_of_indicator() {
        let sq = RadialPotential::square(1.0, 1.0).unwrap();
        assert_eq!(lipschitz_envelope(&sq, 4.0, 0.5), 1.0);
        assert!((lipschitz_envelope(&sq, 4.0, 1.125) - 0.5).abs() < 1e-15);
        assert_eq!(lipschitz_envelope(&sq, 4.0, 1.3), 0.0);
    }
}
