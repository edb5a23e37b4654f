//! Quadrature, root finding and special functions shared by the physics modules.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_41,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Result of a quadrature: value and estimated absolute error.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Seg {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}
impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Quad> {
    integrate_breaks(f, &[a, b], rel_tol, abs_tol)
}

/// Same as [`integrate`] with forced subdivision points (sorted, first and last are the limits).
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], rel_tol: f64, abs_tol: f64) -> Result<Quad> {
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Seg { a: w[0], b: w[1], val: v, err: e });
    }
    let mut iters = 0;
    while err > abs_tol.max(rel_tol * total.abs()) {
        iters += 1;
        if iters > 4000 {
            return Err(Error::Convergence { what: "adaptive quadrature", achieved: err, wanted: abs_tol.max(rel_tol * total.abs()) });
        }
        let s = heap.pop().expect("nonempty");
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            // interval cannot be split further in floating point
            heap.push(s);
            break;
        }
        let (v1, e1) = gk15(&f, s.a, m);
        let (v2, e2) = gk15(&f, m, s.b);
        total += v1 + v2 - s.val;
        err += e1 + e2 - s.err;
        heap.push(Seg { a: s.a, b: m, val: v1, err: e1 });
        heap.push(Seg { a: m, b: s.b, val: v2, err: e2 });
    }
    // re-sum to drop accumulated cancellation in the running totals
    let value: f64 = heap.iter().map(|s| s.val).sum();
    let error: f64 = heap.iter().map(|s| s.err).sum();
    Ok(Quad { value, error })
}

/// Integral over [a, ∞) via x = a + t/(1-t).
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64, abs_tol: f64) -> Result<Quad> {
    let g = |t: f64| {
        let d = 1.0 - t;
        let x = a + t / d;
        let v = f(x) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_breaks(g, &[0.0, 0.5, 0.9, 0.99, 1.0], rel_tol, abs_tol)
}

/// Bisection for an increasing or decreasing function with a sign change on [lo, hi].
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, width: f64, max_iter: usize) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Convergence { what: "bisection bracket", achieved: flo, wanted: 0.0 });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= width || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const BERNOULLI: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Riemann zeta for real s ≠ 1 by Euler-Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    let n = 24.0_f64;
    let mut sum = 0.0;
    for k in 1..24 {
        sum += (k as f64).powf(-s);
    }
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s(s+1)...(s+2k-2) over (2k)!
    let mut fact = s / 2.0;
    let mut npow = n.powf(-s - 1.0);
    for (k, b) in BERNOULLI.iter().enumerate() {
        let term = b * fact * npow;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        let j = 2.0 * (k as f64 + 1.0);
        fact *= (s + j - 1.0) * (s + j) / ((j + 1.0) * (j + 2.0));
        npow /= n * n;
    }
    sum
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (Lanczos, reflection below 1/2).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + 7.5;
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// ln(n!) by direct summation; exact enough for the occupation numbers used here.
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Polylogarithm Li_s(e^x) for x ≤ 0 and non-integer s > 1.
///
/// Direct series for x < -0.5, otherwise the expansion around z = 1
/// Li_s(e^x) = Γ(1-s)(-x)^(s-1) + Σ ζ(s-k) x^k / k!.
pub fn polylog_exp(s: f64, x: f64) -> f64 {
    assert!(x <= 0.0, "polylog_exp needs x <= 0");
    if x < -0.5 {
        let z = x.exp();
        let mut zk = z;
        let mut sum = 0.0;
        for k in 1..2000 {
            let t = zk * (k as f64).powf(-s);
            sum += t;
            if t < 1e-18 * sum {
                break;
            }
            zk *= z;
        }
        sum
    } else {
        let mut sum = if x == 0.0 { 0.0 } else { gamma(1.0 - s) * (-x).powf(s - 1.0) };
        let mut xk = 1.0;
        for k in 0..40 {
            let t = zeta(s - k as f64) * xk;
            sum += t;
            if k > 2 && t.abs() < 1e-18 {
                break;
            }
            xk *= x / (k as f64 + 1.0);
        }
        sum
    }
}

/// Plain series Σ z^k k^{-s}; slow near z = 1, kept as an independent check.
pub fn polylog_series(s: f64, z: f64, terms: usize) -> f64 {
    let mut zk = z;
    let mut sum = 0.0;
    for k in 1..=terms {
        sum += zk * (k as f64).powf(-s);
        zk *= z;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((q.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let q = integrate_to_inf(|x| (-x * x).exp(), 0.0, 1e-12, 0.0).unwrap();
        assert!((q.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        assert!((zeta(1.5) - 2.612_375_348_685_488_3).abs() < 1e-13);
        assert!((zeta(2.5) - 1.341_487_257_250_917).abs() < 1e-13);
        assert!((zeta(-1.0) + 1.0 / 12.0).abs() < 1e-13);
        assert!((zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
    }

    #[test]
    fn gamma_values() {
        let sp = std::f64::consts::PI.sqrt();
        assert!((gamma(-0.5) + 2.0 * sp).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
    }

    #[test]
    fn polylog_branches_agree() {
        for &x in &[-0.6, -0.5, -0.49, -0.1, -1e-3] {
            let direct = polylog_series(1.5, f64::exp(x), 200_000);
            let fast = polylog_exp(1.5, x);
            // the plain series truncation is the dominant error near z=1
            let tail = f64::exp(x * 200_000.0) / (1.0 - f64::exp(x));
            assert!((direct - fast).abs() < 1e-11 + tail, "x={x} {direct} {fast}");
        }
        assert!((polylog_exp(2.5, 0.0) - zeta(2.5)).abs() < 1e-15);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }
}
