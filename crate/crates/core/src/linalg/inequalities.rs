//! Sharp elementary vector inequalities used throughout the monotonicity
//! proofs, exposed as `(lhs, rhs)` pairs with `lhs <= rhs` whenever the
//! inequality holds. Every constant is explicit.

use serde::{Deserialize, Serialize};

use super::VecN;
use crate::error::{Error, Result};

/// One inequality of the family. Names describe what is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `(|x|+|y|)^p <= 2^((p-1)^+) (|x|^p + |y|^p)`, `p > 0`.
    PowerSumSharp,
    /// `(|x|+|y|)^p <= 2^p (|x|^p + |y|^p)`, `p > 0`.
    PowerSumCrude,
    /// `||x|^p - |y|^p| <= |x-y|^p`, `p in (0, 1]`.
    PowerDifferenceSublinear,
    /// `||x|^p - |y|^p| <= 2^((p-2)^+) (|x|^(p-1) + |y|^(p-1)) |x-y|`, `p > 1`.
    PowerDifferenceSuperlinear,
    /// `||x|^p x - |y|^p y| <= 2^((p-1)^+) (|x|^p + |y|^p) |x-y|`, `p > 0`.
    PowerMapLipschitz,
    /// `(|x|^p x - |y|^p y).(x-y) >= 1/2 (|x|^p + |y|^p) |x-y|^2`, `p > 0`.
    PowerMapWeightedMonotone,
    /// `(|x|^p x - |y|^p y).(x-y) >= |x-y|^(p+2) / 2^(1+(p-1)^+)`, `p > 0`.
    PowerMapMonotone,
    /// `||x|^p x - |y|^p y| <= 2^(-p) |x-y|^(1+p)` for scalars, `p in (-1, 0)`.
    NegativePowerHolder,
    /// `(|x|^p x - |y|^p y).(x-y) >= (1+p)(|x|+|y|)^p |x-y|^2`, `p in (-1, 0)`.
    NegativePowerMonotone,
    /// `int_0^1 |tx + (1-t)y|^p dt >= |x-y|^p / (2^(p+1)(p+1))`, `p > 0`.
    SegmentIntegral,
}

impl Inequality {
    pub const ALL: [Inequality; 10] = [
        Inequality::PowerSumSharp,
        Inequality::PowerSumCrude,
        Inequality::PowerDifferenceSublinear,
        Inequality::PowerDifferenceSuperlinear,
        Inequality::PowerMapLipschitz,
        Inequality::PowerMapWeightedMonotone,
        Inequality::PowerMapMonotone,
        Inequality::NegativePowerHolder,
        Inequality::NegativePowerMonotone,
        Inequality::SegmentIntegral,
    ];

    /// Open/closed exponent range `(lo, hi, hi_inclusive)`.
    pub fn exponent_range(self) -> (f64, f64, bool) {
        use Inequality::*;
        match self {
            PowerDifferenceSublinear => (0.0, 1.0, true),
            PowerDifferenceSuperlinear => (1.0, f64::INFINITY, false),
            NegativePowerHolder | NegativePowerMonotone => (-1.0, 0.0, false),
            _ => (0.0, f64::INFINITY, false),
        }
    }

    pub fn scalar_only(self) -> bool {
        matches!(self, Inequality::NegativePowerHolder)
    }

    pub fn accepts(self, p: f64) -> bool {
        let (lo, hi, incl) = self.exponent_range();
        p > lo && (p < hi || (incl && p == hi))
    }
}

fn pos(z: f64) -> f64 {
    z.max(0.0)
}

/// `|x|^p x` with the value 0 at `x = 0` for every `p`.
fn power_map(x: &VecN, p: f64) -> VecN {
    let r = x.norm();
    if r == 0.0 {
        VecN::zeros(x.dim())
    } else {
        x.scale(r.powf(p))
    }
}

/// Evaluates one inequality at `(x, y, p)` and returns `(lhs, rhs)`.
pub fn evaluate(ineq: Inequality, x: &VecN, y: &VecN, p: f64) -> Result<(f64, f64)> {
    if !ineq.accepts(p) || !p.is_finite() {
        return Err(Error::Domain(format!("{ineq:?} is not defined for p = {p}")));
    }
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!("{} vs {}", x.dim(), y.dim())));
    }
    if ineq.scalar_only() && x.dim() != 1 {
        return Err(Error::Domain(format!("{ineq:?} is stated for scalar arguments")));
    }
    let (nx, ny) = (x.norm(), y.norm());
    let z = x - y;
    let nz = z.norm();
    use Inequality::*;
    let pair = match ineq {
        PowerSumSharp => ((nx + ny).powf(p), 2f64.powf(pos(p - 1.0)) * (nx.powf(p) + ny.powf(p))),
        PowerSumCrude => ((nx + ny).powf(p), 2f64.powf(p) * (nx.powf(p) + ny.powf(p))),
        PowerDifferenceSublinear => ((nx.powf(p) - ny.powf(p)).abs(), nz.powf(p)),
        PowerDifferenceSuperlinear => (
            (nx.powf(p) - ny.powf(p)).abs(),
            2f64.powf(pos(p - 2.0)) * (nx.powf(p - 1.0) + ny.powf(p - 1.0)) * nz,
        ),
        PowerMapLipschitz => {
            let d = &power_map(x, p) - &power_map(y, p);
            (d.norm(), 2f64.powf(pos(p - 1.0)) * (nx.powf(p) + ny.powf(p)) * nz)
        }
        PowerMapWeightedMonotone => {
            let d = &power_map(x, p) - &power_map(y, p);
            (0.5 * (nx.powf(p) + ny.powf(p)) * nz * nz, d.dot(&z))
        }
        PowerMapMonotone => {
            let d = &power_map(x, p) - &power_map(y, p);
            (nz.powf(p + 2.0) / 2f64.powf(1.0 + pos(p - 1.0)), d.dot(&z))
        }
        NegativePowerHolder => {
            let d = &power_map(x, p) - &power_map(y, p);
            (d.norm(), 2f64.powf(-p) * nz.powf(1.0 + p))
        }
        NegativePowerMonotone => {
            let d = &power_map(x, p) - &power_map(y, p);
            let lhs = if nx + ny == 0.0 { 0.0 } else { (1.0 + p) * (nx + ny).powf(p) * nz * nz };
            (lhs, d.dot(&z))
        }
        SegmentIntegral => {
            let integral = segment_power_integral(x, y, p, 1e-12);
            (nz.powf(p) / (2f64.powf(p + 1.0) * (p + 1.0)), integral)
        }
    };
    Ok(pair)
}

/// `int_0^1 |t x + (1-t) y|^p dt`.
///
/// Writing `|t x + (1-t) y|^2 = |z|^2 (t - t*)^2 + r0^2` with `z = x - y`
/// reduces the integral to `int (s^2 + r0^2)^(p/2) ds / |z|`. Segments
/// through the origin use the closed form; otherwise `s = r0 sinh(theta)`
/// gives a smooth integrand for adaptive Simpson with relative tolerance `tol`.
pub fn segment_power_integral(x: &VecN, y: &VecN, p: f64, tol: f64) -> f64 {
    let z = x - y;
    let zn = z.norm();
    if zn == 0.0 {
        let r = y.norm();
        return if r == 0.0 { 0.0 } else { r.powf(p) };
    }
    let t_star = -y.dot(&z) / (zn * zn);
    let mut foot = y.clone();
    foot.axpy(t_star, &z);
    let r0 = foot.norm();
    let (s0, s1) = (-zn * t_star, zn * (1.0 - t_star));
    let reach = s0.abs().max(s1.abs());
    // below this offset the line is collinear with the origin to well
    // under the requested accuracy
    if y.dim() == 1 || r0 <= 1e-10 * reach {
        let anti = |s: f64| s.signum() * s.abs().powf(p + 1.0) / (p + 1.0);
        return (anti(s1) - anti(s0)) / zn;
    }
    let q = p + 1.0;
    let log_r0 = r0.ln();
    // (r0 cosh(theta))^(p+1), in logs to stay finite for small r0
    let f = |th: f64| {
        let a = th.abs();
        let log_cosh = a + (0.5 * (1.0 + (-2.0 * a).exp())).ln();
        (q * (log_r0 + log_cosh)).exp()
    };
    let (th0, th1) = ((s0 / r0).asinh(), (s1 / r0).asinh());
    let size = f(th0).max(f(th1)) * (th1 - th0);
    let mut total = 0.0;
    // split at theta = 0, where the integrand is smallest
    for (a, b) in [(th0, th1.min(0.0)), (th0.max(0.0), th1)] {
        if b > a {
            total += adaptive_simpson(&f, a, b, tol * size, 50);
        }
    }
    total / zn
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // below the rounding level of the estimate further splitting is noise
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
