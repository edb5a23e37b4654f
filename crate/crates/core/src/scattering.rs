//! Zero-energy scattering solution 1 − w of −Δ(1−w) + ½V(1−w) = 0.

use crate::error::{domain, Error, Result};
use crate::numerics::integrate_breaks;
use crate::potential::{radial_transform, RadialPotential};
use std::f64::consts::PI;

/// Solved scattering problem: a, the profile w and the transform of ½V(1−w).
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub a: f64,
    potential: RadialPotential,
    r_max: f64,
    // interior nodes on [0, R0] with normalized u and u'
    nodes: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    /// Largest step-doubling estimate of the local RK4 defect.
    pub residual: f64,
}

/// The four functionals entering the cancellation identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WNorms {
    pub grad_sq: f64,
    pub vw: f64,
    pub vw2: f64,
    pub half_v0: f64,
}

fn rk4_step(f: &dyn Fn(f64) -> f64, r: f64, h: f64, u: f64, v: f64) -> (f64, f64) {
    let acc = |r: f64, u: f64| 0.5 * f(r) * u;
    let (k1u, k1v) = (v, acc(r, u));
    let (k2u, k2v) = (v + 0.5 * h * k1v, acc(r + 0.5 * h, u + 0.5 * h * k1u));
    let (k3u, k3v) = (v + 0.5 * h * k2v, acc(r + 0.5 * h, u + 0.5 * h * k2u));
    let (k4u, k4v) = (v + h * k3v, acc(r + h, u + h * k3u));
    (u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u), v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))
}

/// Integrates u'' = ½Vu, u(0) = 0, u'(0) = 1 and normalizes to u = r − a outside the range.
pub fn solve_zero_energy(potential: &RadialPotential, r_max: f64, step: f64) -> Result<ScatteringSolution> {
    let r0 = potential.range();
    if !(step > 0.0) {
        return domain("step must be positive");
    }
    if potential.is_zero() {
        return Ok(ScatteringSolution {
            a: 0.0,
            potential: potential.clone(),
            r_max,
            nodes: vec![0.0],
            u: vec![0.0],
            du: vec![1.0],
            residual: 0.0,
        });
    }
    if !(r_max > r0) {
        return domain(format!("r_max = {r_max} must exceed the range {r0}"));
    }
    if r0 / step < 200.0 - 1e-9 {
        return domain(format!("step {step} gives fewer than 200 steps on [0, {r0}]"));
    }
    let mut nodes = vec![0.0];
    let mut u = vec![0.0];
    let mut du = vec![1.0];
    let mut residual: f64 = 0.0;
    for piece in potential.pieces().iter().filter(|p| p.b <= r0) {
        let n = ((piece.b - piece.a) / step).ceil() as usize;
        let h = (piece.b - piece.a) / n as f64;
        let f = |r: f64| piece.eval(r);
        for i in 0..n {
            let r = piece.a + i as f64 * h;
            let (u0, v0) = (*u.last().unwrap(), *du.last().unwrap());
            let (u1, v1) = if r == 0.0 {
                // series start: u = r + V(0) r³/12 + V'(0) r⁴/24
                let (c0, c1) = (piece.eval(0.0), piece.deriv(0.0));
                (h + c0 * h.powi(3) / 12.0 + c1 * h.powi(4) / 24.0, 1.0 + c0 * h * h / 4.0 + c1 * h.powi(3) / 6.0)
            } else {
                let full = rk4_step(&f, r, h, u0, v0);
                let (um, vm) = rk4_step(&f, r, 0.5 * h, u0, v0);
                let half = rk4_step(&f, r + 0.5 * h, 0.5 * h, um, vm);
                residual = residual.max((full.0 - half.0).abs() / half.0.abs().max(1e-300));
                full
            };
            if !(u1 > 0.0) {
                return Err(Error::InvalidPotential(format!("u crosses zero near r = {}", r + h)));
            }
            nodes.push(if i + 1 == n { piece.b } else { r + h });
            u.push(u1);
            du.push(v1);
        }
    }
    let s = *du.last().unwrap();
    let a = r0 - u.last().unwrap() / s;
    for (x, y) in u.iter_mut().zip(du.iter_mut()) {
        *x /= s;
        *y /= s;
    }
    for (i, &r) in nodes.iter().enumerate().skip(1) {
        if u[i] > r * (1.0 + 1e-12) {
            return Err(Error::InvalidPotential(format!("w < 0 at r = {r}")));
        }
    }
    Ok(ScatteringSolution { a, potential: potential.clone(), r_max, nodes, u, du, residual })
}

impl ScatteringSolution {
    pub fn potential(&self) -> &RadialPotential {
        &self.potential
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Normalized u and u' at r (cubic Hermite inside the range, affine outside).
    pub fn u_at(&self, r: f64) -> (f64, f64) {
        let r0 = self.potential.range();
        if r >= r0 || self.nodes.len() < 2 {
            return (r - self.a, 1.0);
        }
        let i = self.nodes.partition_point(|&x| x <= r).clamp(1, self.nodes.len() - 1) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (y0, y1, d0, d1) = (self.u[i], self.u[i + 1], self.du[i] * h, self.du[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1;
        let der = (6.0 * t * (1.0 - t) * (y1 - y0) + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (3.0 * t2 - 2.0 * t) * d1) / h;
        (val, der)
    }

    pub fn w(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0 - self.du[0];
        }
        1.0 - self.u_at(r).0 / r
    }

    fn w_prime(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let (u, du) = self.u_at(r);
        -(du * r - u) / (r * r)
    }

    /// ½V(1−w) at r.
    pub fn g(&self, r: f64) -> f64 {
        let v = self.potential.value(r);
        if v == 0.0 {
            return 0.0;
        }
        if r <= 0.0 {
            return 0.5 * v * self.du[0];
        }
        0.5 * v * self.u_at(r).0 / r
    }

    /// Transform of ½V(1−w); ĝ(0) = 4πa.
    pub fn g_hat(&self, p: f64) -> Result<f64> {
        if self.potential.is_zero() {
            return Ok(0.0);
        }
        radial_transform(|r| self.g(r), &self.breaks(), p, 1e-12)
    }

    fn breaks(&self) -> Vec<f64> {
        self.potential.breakpoints()
    }

    /// (r, w(r)) on a uniform grid over [0, r_max].
    pub fn w_profile(&self, points: usize) -> Vec<(f64, f64)> {
        (0..=points)
            .map(|i| {
                let r = self.r_max * i as f64 / points as f64;
                (r, self.w(r))
            })
            .collect()
    }
}

/// (1/4π) ∫ ½V(1−w) d³x by radial quadrature.
pub fn scattering_length_integral(sol: &ScatteringSolution) -> Result<f64> {
    if sol.potential.is_zero() {
        return Ok(0.0);
    }
    Ok(integrate_breaks(|r| r * r * sol.g(r), &sol.breaks(), 1e-13, 0.0)?.value)
}

/// w_p = ĝ(p)/p².
pub fn w_fourier(sol: &ScatteringSolution, p: f64) -> Result<f64> {
    if p == 0.0 {
        return domain("w_p is undefined at p = 0");
    }
    Ok(sol.g_hat(p.abs())? / (p * p))
}

/// (‖∇w‖₂², ‖½Vw‖₁, ‖½Vw²‖₁, ½V̂_0).
pub fn w_norms(sol: &ScatteringSolution) -> Result<WNorms> {
    if sol.potential.is_zero() {
        return Ok(WNorms { grad_sq: 0.0, vw: 0.0, vw2: 0.0, half_v0: 0.0 });
    }
    // w' is only continuous at solver nodes, so split there
    let mut b = sol.breaks();
    b.extend(sol.nodes.iter().copied());
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let r0 = sol.potential.range();
    let q = |f: &dyn Fn(f64) -> f64| integrate_breaks(|r| 4.0 * PI * r * r * f(r), &b, 1e-13, 0.0).map(|q| q.value);
    let grad_in = q(&|r| sol.w_prime(r).powi(2))?;
    let grad_sq = grad_in + 4.0 * PI * sol.a * sol.a / r0;
    let vw = q(&|r| 0.5 * sol.potential.value(r) * sol.w(r))?;
    let vw2 = q(&|r| 0.5 * sol.potential.value(r) * sol.w(r).powi(2))?;
    let half_v0 = 0.5 * sol.potential.integral();
    Ok(WNorms { grad_sq, vw, vw2, half_v0 })
}

/// Fitted C in |dw_p/dp| ≤ C(p⁻³ + p⁻²) from central differences of spacing h.
pub fn fit_derivative_constant(sol: &ScatteringSolution, ps: &[f64], h: f64) -> Result<f64> {
    let mut c: f64 = 0.0;
    for &p in ps {
        let d = (w_fourier(sol, p + h)? - w_fourier(sol, p - h)?) / (2.0 * h);
        c = c.max(d.abs() / (p.powi(-3) + p.powi(-2)));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(v0: f64) -> ScatteringSolution {
        solve_zero_energy(&RadialPotential::square(v0, 1.0).unwrap(), 3.0, 1e-3).unwrap()
    }

    #[test]
    fn zero_potential() {
        let s = solve_zero_energy(&RadialPotential::zero(), 3.0, 1e-3).unwrap();
        assert_eq!(s.a, 0.0);
        assert_eq!(s.w(0.5), 0.0);
        assert_eq!(scattering_length_integral(&s).unwrap(), 0.0);
        let n = w_norms(&s).unwrap();
        assert_eq!((n.grad_sq, n.vw, n.vw2, n.half_v0), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn square_barrier_closed_form() {
        let s = square(2.0);
        let exact = 1.0 - 1f64.tanh();
        assert!((s.a - exact).abs() < 1e-8 * exact);
        assert!((s.w(2.0) - exact / 2.0).abs() < 1e-9);
        let ia = scattering_length_integral(&s).unwrap();
        assert!((ia - s.a).abs() < 1e-8 * s.a);
    }

    #[test]
    fn weak_barrier_born() {
        let s = square(0.02);
        let born = 0.02 / 6.0;
        assert!((s.a - born).abs() < 0.02 * born);
    }

    #[test]
    fn ghat_zero_is_4pi_a() {
        let s = solve_zero_energy(&RadialPotential::ramp(3.0, 1.0).unwrap(), 3.0, 1e-3).unwrap();
        let g0 = s.g_hat(0.0).unwrap();
        assert!((g0 - 4.0 * PI * s.a).abs() < 1e-8 * g0);
    }

    #[test]
    fn w_fourier_rejects_zero() {
        assert!(w_fourier(&square(2.0), 0.0).is_err());
    }

    #[test]
    fn w_fourier_small_p_limit() {
        let s = square(2.0);
        let p = 0.05;
        let w = w_fourier(&s, p).unwrap();
        let lim = 4.0 * PI * s.a / (p * p);
        assert!((w - lim).abs() < 0.01 * lim);
    }

    #[test]
    fn step_count_guard() {
        let sq = RadialPotential::square(2.0, 1.0).unwrap();
        assert!(solve_zero_energy(&sq, 3.0, 0.01).is_err());
        assert!(solve_zero_energy(&sq, 0.5, 1e-3).is_err());
    }

    #[test]
    fn refinement_convergence() {
        let ramp = RadialPotential::ramp(4.0, 1.0).unwrap();
        let a1 = solve_zero_energy(&ramp, 2.0, 4e-3).unwrap().a;
        let a2 = solve_zero_energy(&ramp, 2.0, 2e-3).unwrap().a;
        assert!((a1 - a2).abs() < 1e-9 * a2);
    }

    #[test]
    fn exterior_affine() {
        let s = square(2.0);
        let (u1, d1) = s.u_at(1.5);
        let (u2, _) = s.u_at(2.5);
        assert!((d1 - 1.0).abs() < 1e-9);
        assert!((u2 - u1 - 1.0).abs() < 1e-9);
    }
}
