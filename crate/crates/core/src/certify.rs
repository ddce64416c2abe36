//! Sufficient and necessary monotonicity certificates.
//!
//! Every check returns a [`Certificate`]. A failed sufficient condition is
//! `Inconclusive`, never `NotMonotone`; only necessary-condition failures
//! produce `NotMonotone`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constitutive::{
    ConstitutiveLaw, LawMetadata, MetadataSource, PowerKind, PowerTerm, TrilinearForm,
};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, operator_norm, symmetric_eigen, symmetric_part_min_eig, MatN};

/// Relative band inside which an inequality counts as an equality.
pub const STRICT_RTOL: f64 = 1e-12;

/// Angle samples used for non-analytic ranges on the unit circle.
pub const DEFAULT_SPHERE_SAMPLES: usize = 100_000;

const SCAN_SEEDS: usize = 64;
const SCAN_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    Thm3_2,
    Cor3_3,
    Thm3_4,
    Cor3_5,
    Cor3_6,
    Thm3_7,
    Thm3_8,
    Prop4_1,
    Thm4_3,
    Thm4_4,
    Thm4_5,
    Prop4_8,
}

impl TheoremId {
    pub fn describe(self) -> &'static str {
        use TheoremId::*;
        match self {
            Thm3_2 => "quadratic condition on |w|_1^2 + |w|_2^2",
            Cor3_3 => "closed-form bounds on |w|_1^2 + |w|_2^2",
            Thm3_4 => "quadratic condition on (|w|_1 +- |w|_2)^2",
            Cor3_5 => "closed-form bounds on (|w|_1 + |w|_2)^2",
            Cor3_6 => "closed-form bounds on (|w|_1 - |w|_2)^2",
            Thm3_7 => "all A_i near one multiple of the identity",
            Thm3_8 => "trace ratio of the A_i",
            Prop4_1 => "necessary conditions",
            Thm4_3 => "coercivity ratio",
            Thm4_4 => "A near a multiple of the identity",
            Thm4_5 => "trace ratio of A",
            Prop4_8 => "composite law",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Monotone,
    PowerMonotone {
        order: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constant: Option<f64>,
    },
    NotMonotone,
    Inconclusive,
}

impl Verdict {
    pub fn is_monotone(&self) -> bool {
        matches!(self, Verdict::Monotone | Verdict::PowerMonotone { .. })
    }

    pub fn order(&self) -> Option<f64> {
        match self {
            Verdict::PowerMonotone { order, .. } => Some(*order),
            _ => None,
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Verdict::PowerMonotone { constant, .. } => *constant,
            _ => None,
        }
    }

    /// Ordering used to pick the strongest of several certificates.
    fn strength(&self) -> (u8, f64) {
        match self {
            Verdict::PowerMonotone { constant: Some(c), .. } => (3, *c),
            Verdict::PowerMonotone { constant: None, .. } => (2, 0.0),
            Verdict::Monotone => (1, 0.0),
            _ => (0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub theorem: TheoremId,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub witness: BTreeMap<String, Value>,
}

impl Certificate {
    fn new(theorem: TheoremId, verdict: Verdict) -> Self {
        Certificate { theorem, verdict, witness: BTreeMap::new() }
    }

    fn inconclusive(theorem: TheoremId, reason: &str) -> Self {
        Certificate::new(theorem, Verdict::Inconclusive).with("reason", reason)
    }

    fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.witness.insert(key.to_string(), value.into());
        self
    }

    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.witness.insert(key.to_string(), value.into());
    }

    pub fn is_monotone(&self) -> bool {
        self.verdict.is_monotone()
    }

    /// Witness entry as a number.
    pub fn witness_f64(&self, key: &str) -> Option<f64> {
        self.witness.get(key).and_then(Value::as_f64)
    }

    pub fn witness_str(&self, key: &str) -> Option<&str> {
        self.witness.get(key).and_then(Value::as_str)
    }
}

/// Picks the strongest certificate; ties keep the earliest.
pub fn strongest(certs: &[Certificate]) -> Option<&Certificate> {
    let mut best: Option<&Certificate> = None;
    for c in certs {
        let better = match best {
            None => true,
            Some(b) => {
                let (sc, vc) = c.verdict.strength();
                let (sb, vb) = b.verdict.strength();
                sc > sb || (sc == sb && vc > vb)
            }
        };
        if better {
            best = Some(c);
        }
    }
    best
}

/// Classifies a margin `g` of a condition `g <= 0` at the given scale.
fn classify(g: f64, scale: f64) -> Option<bool> {
    let tol = STRICT_RTOL * scale.max(1.0);
    if g < -tol {
        Some(true)
    } else if g <= tol {
        Some(false)
    } else {
        None
    }
}

/// Verdict from a margin: strict ⇒ `PowerMonotone(order)`, boundary ⇒ `Monotone`.
fn verdict_from_margin(g: f64, scale: f64, order: f64, constant: Option<f64>) -> Verdict {
    match classify(g, scale) {
        Some(true) => Verdict::PowerMonotone { order, constant },
        Some(false) => Verdict::Monotone,
        None => Verdict::Inconclusive,
    }
}

// ---------------------------------------------------------------------------
// ranges on the unit circle

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMethod {
    AnalyticDiagonal,
    SampledWithMargin,
}

/// Range of a function on the unit circle. For sampled ranges the true
/// minimum lies in `[lo - margin, lo]` and the true maximum in
/// `[hi, hi + margin]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereRange {
    pub lo: f64,
    pub hi: f64,
    pub method: RangeMethod,
    pub samples: usize,
    pub margin: f64,
}

impl SphereRange {
    pub fn certified_lo(&self) -> f64 {
        self.lo - self.margin
    }

    pub fn certified_hi(&self) -> f64 {
        self.hi + self.margin
    }
}

/// Which function of the norm pair `|w|_i = (w^T A_i w)^(1/2)` to range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleForm {
    /// `|w|_1^2 + |w|_2^2`
    SumOfSquares,
    /// `(|w|_1 + |w|_2)^2`
    SquaredSum,
    /// `(|w|_1 - |w|_2)^2`
    SquaredDifference,
}

fn is_diagonal(a: &MatN) -> bool {
    a[(0, 1)] == 0.0 && a[(1, 0)] == 0.0
}

fn eig2(a: &MatN) -> (f64, f64) {
    let e = symmetric_eigen(&a.sym_part());
    (e.values[0], e.values[1])
}

/// Range of `form` over `|w| = 1` for 2x2 matrices `a1`, `a2`.
pub fn range_quadratic_on_circle(
    a1: &MatN,
    a2: &MatN,
    form: CircleForm,
    samples: usize,
) -> Result<SphereRange> {
    if a1.dim() != 2 || a2.dim() != 2 {
        return Err(Error::Dimension("circle ranges are defined for 2x2 matrices".into()));
    }
    let samples = samples.max(1);
    let (s1, s2) = (a1.sym_part(), a2.sym_part());
    if form == CircleForm::SumOfSquares && is_diagonal(a1) && is_diagonal(a2) {
        let x = a1[(0, 0)] + a2[(0, 0)];
        let y = a1[(1, 1)] + a2[(1, 1)];
        return Ok(SphereRange {
            lo: x.min(y),
            hi: x.max(y),
            method: RangeMethod::AnalyticDiagonal,
            samples: 0,
            margin: 0.0,
        });
    }
    let (m1, big1) = eig2(&s1);
    let (m2, big2) = eig2(&s2);
    let lip = match form {
        CircleForm::SumOfSquares => {
            let (m, big) = eig2(&(&s1 + &s2));
            big - m
        }
        _ => {
            if m1 <= 0.0 || m2 <= 0.0 {
                return Err(Error::Domain("|w|_i needs positive definite A_i".into()));
            }
            let l1 = (big1 - m1) / (2.0 * m1.sqrt());
            let l2 = (big2 - m2) / (2.0 * m2.sqrt());
            2.0 * (big1.sqrt() + big2.sqrt()) * (l1 + l2)
        }
    };
    let q = |theta: f64| {
        let w = crate::linalg::VecN::from([theta.cos(), theta.sin()]);
        let q1 = s1.bilinear(&w, &w).max(0.0);
        let q2 = s2.bilinear(&w, &w).max(0.0);
        match form {
            CircleForm::SumOfSquares => q1 + q2,
            CircleForm::SquaredSum => (q1.sqrt() + q2.sqrt()).powi(2),
            CircleForm::SquaredDifference => (q1.sqrt() - q2.sqrt()).powi(2),
        }
    };
    // every function here is pi-periodic in the angle
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..samples {
        let v = q(PI * k as f64 / samples as f64);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let scale = 1.0 + big1.abs() + big2.abs();
    let margin = lip * PI / (2.0 * samples as f64) + 1e-13 * scale;
    Ok(SphereRange { lo, hi, method: RangeMethod::SampledWithMargin, samples, margin })
}

// ---------------------------------------------------------------------------
// two-dimensional diagonal G_B

fn positive(vals: &[f64]) -> bool {
    vals.iter().all(|&x| x > 0.0 && x.is_finite())
}

fn diag_pair(a: f64, b: f64, c: f64, d: f64) -> (MatN, MatN) {
    (MatN::diag(&[a, b]), MatN::diag(&[c, d]))
}

/// Margin of `lo_bound <= q <= hi_bound` for `q` in `[lo, hi]`, where the
/// bounds come from `(b + c - q/2)^2 <= 4ad`.
fn band_margin(a: f64, b: f64, c: f64, d: f64, lo: f64, hi: f64) -> f64 {
    let r = 2.0 * (a * d).sqrt();
    let lower = 2.0 * (b + c - r);
    let upper = 2.0 * (b + c + r);
    (lower - lo).max(hi - upper)
}

/// Explicit 3-monotonicity constant `C_1 theta / 8` for the quadratic
/// condition on `|w|_1^2 + |w|_2^2` over the range `[lo, hi]`.
fn sum_of_squares_constant(a: f64, b: f64, c: f64, d: f64, lo: f64, hi: f64) -> Option<f64> {
    let c1 = a.min(b).min(c).min(d);
    let c2 = a.max(b).max(c).max(d);
    let worst = (b + c - lo / 2.0).powi(2).max((b + c - hi / 2.0).powi(2));
    let ok = |theta: f64| {
        a - c2 * theta > 0.0
            && d - c2 * theta > 0.0
            && worst <= 4.0 * (a - c2 * theta / 2.0) * (d - c2 * theta / 2.0)
    };
    let mut t_lo = 0.0;
    let mut t_hi = 1.0;
    if ok(t_hi) {
        t_lo = t_hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (t_lo + t_hi);
            if ok(mid) {
                t_lo = mid;
            } else {
                t_hi = mid;
            }
        }
    }
    // theta must lie strictly inside (0, 1)
    let theta = t_lo.min(1.0 - 1e-12);
    (theta > 0.0).then(|| c1 * theta / 8.0)
}

/// Quadratic condition on `|w|_1^2 + |w|_2^2` over the unit circle.
pub fn certify_thm3_2(a: f64, b: f64, c: f64, d: f64) -> Certificate {
    let id = TheoremId::Thm3_2;
    if !positive(&[a, b, c, d]) {
        return Certificate::inconclusive(id, "coefficients must be positive");
    }
    let (m1, m2) = diag_pair(a, b, c, d);
    let range = range_quadratic_on_circle(&m1, &m2, CircleForm::SumOfSquares, 0).expect("2x2 diagonal");
    let g = band_margin(a, b, c, d, range.lo, range.hi);
    let scale = a.max(b).max(c).max(d);
    let constant = if classify(g, scale) == Some(true) {
        sum_of_squares_constant(a, b, c, d, range.lo, range.hi)
    } else {
        None
    };
    Certificate::new(id, verdict_from_margin(g, scale, 3.0, constant))
        .with("margin", -g)
        .with("range_lo", range.lo)
        .with("range_hi", range.hi)
}

/// `g1 = 2(b+c+2 sqrt(ad)) - max{a+c,b+d}` and
/// `g2 = min{a+c,b+d} - 2(b+c-2 sqrt(ad))`.
pub fn cor3_3_margins(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let r = 2.0 * (a * d).sqrt();
    let g1 = 2.0 * (b + c + r) - (a + c).max(b + d);
    let g2 = (a + c).min(b + d) - 2.0 * (b + c - r);
    (g1, g2)
}

pub fn certify_cor3_3(a: f64, b: f64, c: f64, d: f64) -> Certificate {
    let id = TheoremId::Cor3_3;
    if !positive(&[a, b, c, d]) {
        return Certificate::inconclusive(id, "coefficients must be positive");
    }
    let (g1, g2) = cor3_3_margins(a, b, c, d);
    let scale = a.max(b).max(c).max(d);
    let g = (-g1).max(-g2);
    let constant = if classify(g, scale) == Some(true) {
        sum_of_squares_constant(a, b, c, d, (a + c).min(b + d), (a + c).max(b + d))
    } else {
        None
    };
    Certificate::new(id, verdict_from_margin(g, scale, 3.0, constant)).with("g1", g1).with("g2", g2)
}

/// Quadratic condition on `(|w|_1 + |w|_2)^2` or `(|w|_1 - |w|_2)^2`.
pub fn certify_thm3_4(a: f64, b: f64, c: f64, d: f64) -> Certificate {
    certify_thm3_4_with(a, b, c, d, DEFAULT_SPHERE_SAMPLES)
}

pub fn certify_thm3_4_with(a: f64, b: f64, c: f64, d: f64, samples: usize) -> Certificate {
    let id = TheoremId::Thm3_4;
    if !positive(&[a, b, c, d]) {
        return Certificate::inconclusive(id, "coefficients must be positive");
    }
    let (m1, m2) = diag_pair(a, b, c, d);
    let scale = a.max(b).max(c).max(d);
    let mut best: Option<(Verdict, &str, SphereRange, f64)> = None;
    for (form, name) in [(CircleForm::SquaredSum, "plus"), (CircleForm::SquaredDifference, "minus")] {
        let range = range_quadratic_on_circle(&m1, &m2, form, samples).expect("2x2 positive");
        let g = band_margin(a, b, c, d, range.certified_lo(), range.certified_hi());
        let v = verdict_from_margin(g, scale, 3.0, None);
        let better = match &best {
            None => true,
            Some((bv, ..)) => v.strength() > bv.strength(),
        };
        if better {
            best = Some((v, name, range, g));
        }
    }
    let (v, name, range, g) = best.expect("two variants");
    Certificate::new(id, v)
        .with("variant", name)
        .with("margin", -g)
        .with("range_lo", range.lo)
        .with("range_hi", range.hi)
        .with("range_margin", range.margin)
}

/// Left and right sides of the two closed-form inequalities for
/// `(|w|_1 + |w|_2)^2`: `(lhs1, rhs1, lhs2, rhs2)`.
pub fn cor3_5_sides(a: f64, b: f64, c: f64, d: f64) -> (f64, f64, f64, f64) {
    let r = 2.0 * (a * d).sqrt();
    let lhs1 = (a + c).max(b + d) + 2.0 * (a.max(b) * c.max(d)).sqrt();
    let rhs1 = 2.0 * (b + c + r);
    let lhs2 = 2.0 * (b + c - r);
    let rhs2 = (a + c).min(b + d) + 2.0 * (a.min(b) * c.min(d)).sqrt();
    (lhs1, rhs1, lhs2, rhs2)
}

pub fn certify_cor3_5(a: f64, b: f64, c: f64, d: f64) -> Certificate {
    let id = TheoremId::Cor3_5;
    if !positive(&[a, b, c, d]) {
        return Certificate::inconclusive(id, "coefficients must be positive");
    }
    let (l1, r1, l2, r2) = cor3_5_sides(a, b, c, d);
    let g = (l1 - r1).max(l2 - r2);
    let scale = a.max(b).max(c).max(d);
    Certificate::new(id, verdict_from_margin(g, scale, 3.0, None))
        .with("margin", -g)
        .with("lhs1", l1)
        .with("rhs1", r1)
        .with("lhs2", l2)
        .with("rhs2", r2)
}

/// Classification of `M/m` with `M = max{a,d}`, `m = min{a,d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cor36Regime {
    /// `M/m <= 16`: the lower bound is vacuous.
    AtMost16,
    /// `16 < M/m < 64`: both bounds are active.
    Between16And64,
    /// `M/m = 64`: only the boundary `b + c = 2 sqrt(ad)` is possible.
    Exactly64,
    /// `M/m > 64`: the condition is impossible.
    Above64,
}

impl Cor36Regime {
    pub fn classify(a: f64, d: f64) -> Self {
        let ratio = a.max(d) / a.min(d);
        if ratio <= 16.0 {
            Cor36Regime::AtMost16
        } else if ratio < 64.0 {
            Cor36Regime::Between16And64
        } else if ratio == 64.0 {
            Cor36Regime::Exactly64
        } else {
            Cor36Regime::Above64
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Cor36Regime::AtMost16 => "<=16",
            Cor36Regime::Between16And64 => "(16,64)",
            Cor36Regime::Exactly64 => "=64",
            Cor36Regime::Above64 => ">64",
        }
    }
}

/// `max{a,d}/2 - 2 sqrt(ad) <= b + c <= 2 sqrt(ad)`.
pub fn certify_cor3_6(a: f64, b: f64, c: f64, d: f64) -> Certificate {
    let id = TheoremId::Cor3_6;
    if !positive(&[a, b, c, d]) {
        return Certificate::inconclusive(id, "coefficients must be positive");
    }
    let regime = Cor36Regime::classify(a, d);
    let r = 2.0 * (a * d).sqrt();
    let lower = a.max(d) / 2.0 - r;
    let bc = b + c;
    let g = (lower - bc).max(bc - r);
    let scale = a.max(b).max(c).max(d);
    let verdict = if regime == Cor36Regime::Above64 {
        Verdict::Inconclusive
    } else {
        verdict_from_margin(g, scale, 3.0, None)
    };
    Certificate::new(id, verdict)
        .with("regime", regime.label())
        .with("ratio", a.max(d) / a.min(d))
        .with("margin", -g)
}

// ---------------------------------------------------------------------------
// general dimension G_B

/// Minimizes `g` over `(0, hi]`: coarse seeds, then golden section around
/// the best seed.
fn scan_min<G: Fn(f64) -> f64>(g: G, hi: f64) -> (f64, f64) {
    let step = hi / SCAN_SEEDS as f64;
    let mut best = (step, g(step));
    let mut best_k = 1;
    for k in 2..=SCAN_SEEDS {
        let lam = step * k as f64;
        let v = g(lam);
        if v < best.1 {
            best = (lam, v);
            best_k = k;
        }
    }
    let mut lo = step * (best_k as f64 - 1.0);
    let mut up = (step * (best_k as f64 + 1.0)).min(hi);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = up - phi * (up - lo);
    let mut x2 = lo + phi * (up - lo);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..SCAN_ITERS {
        if f1 <= f2 {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - phi * (up - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (up - lo);
            f2 = g(x2);
        }
        if up - lo <= 1e-15 * hi {
            break;
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < best.1 && x > 0.0 {
            best = (x, f);
        }
    }
    best
}

fn shifted_op_norm(a: &MatN, lambda: f64) -> f64 {
    operator_norm(&(a - &MatN::scalar(a.dim(), lambda)))
}

/// Some `lambda > 0` with `||A_i - lambda I||_op <= lambda / 4` for all `i`.
pub fn certify_thm3_7(b: &TrilinearForm) -> Certificate {
    let id = TheoremId::Thm3_7;
    let mats = b.matrices();
    let scale = mats.iter().map(operator_norm).fold(0.0, f64::max);
    let g = |lam: f64| mats.iter().map(|a| shifted_op_norm(a, lam)).fold(0.0, f64::max) - lam / 4.0;
    let (lam, gmin) = scan_min(g, 8.0 * scale);
    // c = lambda - 4 eps0 = -4 g; constant c / 8
    let constant = (gmin < 0.0).then(|| -gmin / 2.0);
    Certificate::new(id, verdict_from_margin(gmin, scale, 3.0, constant))
        .with("lambda", lam)
        .with("margin", -gmin)
}

/// `sum Tr(A_i) / (sum |A_i|^2)^(1/2) >= (n^2 - 1/16)^(1/2)`.
///
/// The threshold comes from requiring `sum |A_i - lambda I|^2 <= lambda^2/16`
/// for some `lambda > 0`; each `|lambda I|^2 = n lambda^2` and there are `n`
/// matrices, so the quadratic in `lambda` has leading coefficient
/// `n^2 - 1/16`.
pub fn certify_thm3_8(b: &TrilinearForm) -> Certificate {
    let id = TheoremId::Thm3_8;
    let mats = b.matrices();
    let n = b.dim() as f64;
    let tr: f64 = mats.iter().map(MatN::trace).sum();
    let fro2: f64 = mats.iter().map(|a| frobenius_norm(a).powi(2)).sum();
    let ratio = tr / fro2.sqrt();
    let q = n * n - 1.0 / 16.0;
    let threshold = q.sqrt();
    let g = threshold - ratio;
    let mut verdict = verdict_from_margin(g, threshold, 3.0, None);
    let mut cert =
        Certificate::new(id, Verdict::Inconclusive).with("ratio", ratio).with("threshold", threshold);
    if tr <= 0.0 {
        verdict = Verdict::Inconclusive;
    }
    if let Verdict::PowerMonotone { .. } = verdict {
        let lam = tr / q;
        let eps0 = mats.iter().map(|a| shifted_op_norm(a, lam)).fold(0.0, f64::max);
        let c = lam - 4.0 * eps0;
        cert.set("lambda", lam);
        verdict = Verdict::PowerMonotone { order: 3.0, constant: (c > 0.0).then(|| c / 8.0) };
    }
    cert.verdict = verdict;
    cert
}

/// Every `G_B` certificate that applies to `b`.
pub fn certify_gb_all(b: &TrilinearForm) -> Vec<Certificate> {
    let mut out = Vec::new();
    if let Some((a, bb, c, d)) = b.as_diagonal_2d() {
        out.push(certify_thm3_2(a, bb, c, d));
        out.push(certify_cor3_3(a, bb, c, d));
        out.push(certify_thm3_4(a, bb, c, d));
        out.push(certify_cor3_5(a, bb, c, d));
        out.push(certify_cor3_6(a, bb, c, d));
    }
    out.push(certify_thm3_7(b));
    out.push(certify_thm3_8(b));
    out
}

// ---------------------------------------------------------------------------
// power terms

/// Necessary conditions for `|K u|^alpha A u`; `claimed_order` is a power
/// order to test, if any.
pub fn check_necessary(t: &PowerTerm, claimed_order: Option<f64>) -> Certificate {
    let id = TheoremId::Prop4_1;
    let a = t.a();
    let k = t.k();
    let k_invertible = k.inverse().is_some();
    let lmin = symmetric_part_min_eig(a);
    let tol = STRICT_RTOL * operator_norm(a).max(1.0);
    if k_invertible && lmin < -tol {
        return Certificate::new(id, Verdict::NotMonotone)
            .with("scope", "monotone")
            .with("min_eig_sym", lmin);
    }
    if let Some(beta) = claimed_order {
        let expected = t.alpha() + 2.0;
        if (beta - expected).abs() > STRICT_RTOL * expected {
            return Certificate::new(id, Verdict::NotMonotone)
                .with("scope", "power_order")
                .with("rejected_order", beta)
                .with("required_order", expected);
        }
        if !k_invertible || a.inverse().is_none() || lmin <= tol {
            return Certificate::new(id, Verdict::NotMonotone)
                .with("scope", "power_order")
                .with("rejected_order", beta)
                .with("min_eig_sym", lmin);
        }
    }
    Certificate::new(id, Verdict::Inconclusive).with("min_eig_sym", lmin)
}

/// `u^T A u >= kappa_0^2 |u|^2` with `kappa_0^2 = lambda_min((A + A^T)/2)`.
pub fn certify_thm4_3(t: &PowerTerm) -> Certificate {
    let id = TheoremId::Thm4_3;
    let a = t.a();
    let alpha = t.alpha();
    let k2 = symmetric_part_min_eig(a);
    let a_op = operator_norm(a);
    let base = Certificate::new(id, Verdict::Inconclusive).with("kappa0_sq", k2);
    if k2 <= STRICT_RTOL * a_op.max(1.0) {
        return base.with("reason", "A is not coercive");
    }
    let denom = 2f64.powf(alpha + 1.0) * (alpha + 1.0);
    if alpha == 0.0 {
        // linear: (A z).z >= kappa_0^2 |z|^2
        let mut c = base;
        c.verdict = Verdict::PowerMonotone { order: 2.0, constant: Some(k2) };
        return c;
    }
    match t.kind() {
        PowerKind::SqrtWeighted => {
            let mut c = base;
            c.verdict = Verdict::PowerMonotone {
                order: alpha + 2.0,
                constant: Some(k2.powf((alpha + 2.0) / 2.0) / denom),
            };
            c
        }
        PowerKind::Plain => {
            let ratio = k2 / a_op;
            let g = alpha - ratio;
            let c = k2 - alpha * a_op;
            let constant = (c > 0.0).then(|| c / denom);
            let mut cert = base.with("ratio", ratio);
            cert.verdict = verdict_from_margin(g, ratio, alpha + 2.0, constant);
            cert
        }
        PowerKind::Weighted => base.with("reason", "general weights are not covered"),
    }
}

/// Some `lambda > 0` with `||A - lambda I||_op <= lambda / (1 + alpha)`.
pub fn certify_thm4_4(t: &PowerTerm) -> Result<Certificate> {
    if t.kind() != PowerKind::Plain {
        return Err(Error::Precondition("this test needs an unweighted term".into()));
    }
    let a = t.a();
    let alpha = t.alpha();
    let scale = operator_norm(a);
    let g = |lam: f64| shifted_op_norm(a, lam) - lam / (1.0 + alpha);
    let (lam, gmin) = scan_min(g, 8.0 * scale.max(f64::MIN_POSITIVE));
    // c = lambda - (1 + alpha) ||M|| = -(1 + alpha) g
    let c = -(1.0 + alpha) * gmin;
    let constant = (c > 0.0).then(|| c / (2f64.powf(alpha + 1.0) * (alpha + 1.0)));
    Ok(Certificate::new(TheoremId::Thm4_4, verdict_from_margin(gmin, scale, alpha + 2.0, constant))
        .with("lambda", lam)
        .with("margin", -gmin))
}

/// `Tr(A) / |A| >= (n - 1/(1+alpha)^2)^(1/2)`.
pub fn certify_thm4_5(t: &PowerTerm) -> Result<Certificate> {
    if t.kind() != PowerKind::Plain {
        return Err(Error::Precondition("this test needs an unweighted term".into()));
    }
    let a = t.a();
    let alpha = t.alpha();
    let n = a.dim() as f64;
    let tr = a.trace();
    let fro = frobenius_norm(a);
    let q = n - 1.0 / (1.0 + alpha).powi(2);
    let threshold = q.sqrt();
    let ratio = if fro > 0.0 { tr / fro } else { 0.0 };
    let mut cert = Certificate::new(TheoremId::Thm4_5, Verdict::Inconclusive)
        .with("ratio", ratio)
        .with("threshold", threshold);
    if tr <= 0.0 {
        return Ok(cert);
    }
    cert.verdict = verdict_from_margin(threshold - ratio, threshold, alpha + 2.0, None);
    if let Verdict::PowerMonotone { order, .. } = cert.verdict {
        let lam = tr / q;
        let c = lam - (1.0 + alpha) * shifted_op_norm(a, lam);
        cert.set("lambda", lam);
        cert.verdict = Verdict::PowerMonotone {
            order,
            constant: (c > 0.0).then(|| c / (2f64.powf(alpha + 1.0) * (alpha + 1.0))),
        };
    }
    Ok(cert)
}

/// Every certificate that applies to a single power term, plus the plain
/// positive semidefinite check for linear terms.
pub fn certify_term_all(t: &PowerTerm) -> Vec<Certificate> {
    let mut out = vec![certify_thm4_3(t)];
    if t.kind() == PowerKind::Plain {
        out.extend(certify_thm4_4(t).ok());
        out.extend(certify_thm4_5(t).ok());
    }
    if t.alpha() == 0.0 {
        let lmin = symmetric_part_min_eig(t.a());
        if lmin.abs() <= STRICT_RTOL * operator_norm(t.a()).max(1.0) {
            out.push(
                Certificate::new(TheoremId::Thm4_3, Verdict::Monotone)
                    .with("kappa0_sq", lmin)
                    .with("reason", "positive semidefinite linear term"),
            );
        }
    }
    out
}

fn best_or_inconclusive(certs: Vec<Certificate>, id: TheoremId) -> Certificate {
    strongest(&certs).cloned().unwrap_or_else(|| Certificate::inconclusive(id, "no applicable test"))
}

// ---------------------------------------------------------------------------
// composite laws

/// Certifies a sum of unweighted or root-weighted power terms and an optional
/// `G_B`. On success the order is `beta + 2` with `beta = 1` for `G_B` alone,
/// `alpha_N` without `G_B`, and `max{alpha_N, 1}` with both.
pub fn certify_composite(law: &ConstitutiveLaw) -> Certificate {
    let id = TheoremId::Prop4_8;
    let terms = law.terms();
    if terms.iter().any(|t| t.kind() == PowerKind::Weighted) {
        return Certificate::inconclusive(id, "general weighted terms are outside the composite rule");
    }
    let gb_cert = law.gb().map(|b| best_or_inconclusive(certify_gb_all(b), id));
    let term_certs: Vec<Certificate> =
        terms.iter().map(|t| best_or_inconclusive(certify_term_all(t), id)).collect();

    let mut cert = Certificate::new(id, Verdict::Inconclusive);
    let names: Vec<Value> = term_certs
        .iter()
        .map(|c| Value::from(format!("{:?}:{}", c.theorem, verdict_label(&c.verdict))))
        .collect();
    cert.set("terms", names);
    if let Some(g) = &gb_cert {
        cert.set("gb", format!("{:?}:{}", g.theorem, verdict_label(&g.verdict)));
    }

    let power3 = |c: &Certificate| matches!(c.verdict.order(), Some(o) if (o - 3.0).abs() < 1e-12);

    match (terms.is_empty(), &gb_cert) {
        (true, Some(g)) => {
            cert.set("case", "a");
            if power3(g) {
                cert.set("beta", 1.0);
                cert.verdict = Verdict::PowerMonotone { order: 3.0, constant: g.verdict.constant() };
            }
        }
        (false, None) => {
            cert.set("case", "b");
            let last = term_certs.last().expect("non-empty");
            let alpha_n = terms.last().expect("non-empty").alpha();
            let lower_ok = term_certs[..term_certs.len() - 1].iter().all(Certificate::is_monotone);
            let top_ok = alpha_n > 0.0
                && matches!(last.verdict.order(), Some(o) if (o - (alpha_n + 2.0)).abs() < 1e-12);
            if lower_ok && top_ok {
                cert.set("beta", alpha_n);
                cert.verdict =
                    Verdict::PowerMonotone { order: alpha_n + 2.0, constant: last.verdict.constant() };
            }
        }
        (false, Some(g)) => {
            cert.set("case", "c");
            let alpha_n = terms.last().expect("non-empty").alpha();
            let last = term_certs.last().expect("non-empty");
            let all_ok = term_certs.iter().all(Certificate::is_monotone) && g.is_monotone();
            let top_ok = matches!(last.verdict.order(), Some(o) if (o - (alpha_n + 2.0)).abs() < 1e-12);
            let gb_ok = power3(g);
            let (ok, sub, constant) = if alpha_n < 1.0 {
                (gb_ok, "c.1", g.verdict.constant())
            } else if alpha_n > 1.0 {
                (top_ok, "c.2", last.verdict.constant())
            } else {
                let c = match (
                    top_ok.then(|| last.verdict.constant()).flatten(),
                    gb_ok.then(|| g.verdict.constant()).flatten(),
                ) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                };
                (top_ok || gb_ok, "c.3", c)
            };
            cert.set("subcase", sub);
            if all_ok && ok {
                let beta = alpha_n.max(1.0);
                cert.set("beta", beta);
                cert.verdict = Verdict::PowerMonotone { order: beta + 2.0, constant };
            }
        }
        (true, None) => unreachable!("a law has at least one term"),
    }
    cert
}

fn verdict_label(v: &Verdict) -> String {
    match v {
        Verdict::Monotone => "monotone".into(),
        Verdict::PowerMonotone { order, .. } => format!("power_monotone({order})"),
        Verdict::NotMonotone => "not_monotone".into(),
        Verdict::Inconclusive => "inconclusive".into(),
    }
}

/// Growth metadata implied by a composite certificate.
pub fn metadata_from(law: &ConstitutiveLaw, cert: &Certificate) -> Option<LawMetadata> {
    let order = cert.verdict.order()?;
    if order <= 2.0 {
        return None;
    }
    let c1 = law.lipschitz_constant(order - 2.0);
    LawMetadata::new(order, c1, cert.verdict.constant(), MetadataSource::Certified).ok()
}

/// Certifies `law` and attaches certified metadata. A user override already
/// on the law is kept.
pub fn certify_and_attach(law: ConstitutiveLaw) -> (Certificate, ConstitutiveLaw) {
    let cert = certify_composite(&law);
    let keep = law.metadata().is_some_and(|m| m.source == MetadataSource::UserOverride);
    if keep {
        return (cert, law);
    }
    match metadata_from(&law, &cert) {
        Some(meta) => (cert, law.with_metadata(meta)),
        None => (cert, law.without_metadata()),
    }
}

/// All individual certificates for a law: per term, then `G_B`, then the
/// composite.
pub fn certify_all(law: &ConstitutiveLaw) -> Vec<Certificate> {
    let mut out = Vec::new();
    for t in law.terms() {
        out.push(check_necessary(t, None));
        out.extend(certify_term_all(t));
    }
    if let Some(b) = law.gb() {
        out.extend(certify_gb_all(b));
    }
    out.push(certify_composite(law));
    out
}
