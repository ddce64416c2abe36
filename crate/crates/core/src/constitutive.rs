//! Anisotropic Forchheimer-type constitutive maps.
//!
//! A [`ConstitutiveLaw`] is a sum of power terms `|K u|^alpha A u` with
//! strictly increasing exponents, optionally plus the cubic drag term
//! `G_B(u) = B(u, u, u) / |u|` built from a [`TrilinearForm`].

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::dd::Dd;
use crate::linalg::{frobenius_norm, operator_norm, spd_sqrt, symmetric_part_min_eig, MatN, VecN};

/// `B(u, v, w) = diag[u^T A_1 v, ..., u^T A_n v] w`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrilinearForm {
    matrices: Vec<MatN>,
}

impl TrilinearForm {
    pub fn new(matrices: Vec<MatN>) -> Result<Self> {
        let n = matrices.len();
        if n < 2 {
            return Err(Error::InvalidLaw("trilinear form needs n >= 2 matrices".into()));
        }
        for (i, a) in matrices.iter().enumerate() {
            if a.dim() != n {
                return Err(Error::Dimension(format!(
                    "A_{} is {}x{}, expected {n}x{n}",
                    i + 1,
                    a.dim(),
                    a.dim()
                )));
            }
            if !a.is_finite() {
                return Err(Error::InvalidLaw(format!("A_{} has non-finite entries", i + 1)));
            }
            if a.is_zero() {
                return Err(Error::InvalidLaw(format!("A_{} is the zero matrix", i + 1)));
            }
        }
        Ok(TrilinearForm { matrices })
    }

    /// The two-dimensional diagonal family `A_1 = diag[a, b]`, `A_2 = diag[c, d]`.
    pub fn diagonal_2d(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(vec![MatN::diag(&[a, b]), MatN::diag(&[c, d])])
    }

    pub fn dim(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[MatN] {
        &self.matrices
    }

    /// `(a, b, c, d)` when `n = 2` and both matrices are diagonal.
    pub fn as_diagonal_2d(&self) -> Option<(f64, f64, f64, f64)> {
        if self.dim() != 2 {
            return None;
        }
        let (m1, m2) = (&self.matrices[0], &self.matrices[1]);
        let off = [m1[(0, 1)], m1[(1, 0)], m2[(0, 1)], m2[(1, 0)]];
        if off.iter().any(|&x| x != 0.0) {
            return None;
        }
        Some((m1[(0, 0)], m1[(1, 1)], m2[(0, 0)], m2[(1, 1)]))
    }

    pub fn eval(&self, u: &VecN, v: &VecN, w: &VecN) -> Result<VecN> {
        let n = self.dim();
        if u.dim() != n || v.dim() != n || w.dim() != n {
            return Err(Error::Dimension(format!(
                "trilinear form of dimension {n} applied to ({}, {}, {})",
                u.dim(),
                v.dim(),
                w.dim()
            )));
        }
        Ok(self.eval_unchecked(u, v, w))
    }

    fn eval_unchecked(&self, u: &VecN, v: &VecN, w: &VecN) -> VecN {
        let mut out = VecN::zeros(self.dim());
        for (i, a) in self.matrices.iter().enumerate() {
            out[i] = a.bilinear(u, v) * w[i];
        }
        out
    }

    /// `G_B(u)`, zero at the origin.
    pub fn gb(&self, u: &VecN) -> VecN {
        let r = u.norm();
        if r == 0.0 {
            return VecN::zeros(self.dim());
        }
        let mut out = self.eval_unchecked(u, u, u);
        for i in 0..out.dim() {
            out[i] /= r;
        }
        out
    }

    /// `M_* = (sum |A_i|^2)^(1/2)`, the constant in `|B(u,v,w)| <= M_* |u||v||w|`.
    pub fn mstar(&self) -> f64 {
        self.matrices.iter().map(|a| frobenius_norm(a).powi(2)).sum::<f64>().sqrt()
    }

    /// Jacobian of `G_B` at `u != 0`; the zero matrix at the origin.
    pub fn gb_jacobian(&self, u: &VecN) -> MatN {
        let n = self.dim();
        let r = u.norm();
        let mut j = MatN::zeros(n);
        if r == 0.0 {
            return j;
        }
        for (i, a) in self.matrices.iter().enumerate() {
            let q = a.bilinear(u, u);
            let grad = (&a.mul_vec(u) + &a.transpose().mul_vec(u)).scale(1.0 / r);
            for k in 0..n {
                j[(i, k)] = grad[k] * u[i] - q * u[i] * u[k] / (r * r * r);
            }
            j[(i, i)] += q / r;
        }
        j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerKind {
    /// `|u|^alpha A u`
    Plain,
    /// `|K u|^alpha A u` for a general `K`
    Weighted,
    /// `|A^(1/2) u|^alpha A u` with `A` symmetric positive definite
    SqrtWeighted,
}

/// One term `|K u|^alpha A u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTerm {
    kind: PowerKind,
    a: MatN,
    /// `K` for `Weighted`, the principal root of `A` for `SqrtWeighted`.
    k: Option<MatN>,
    alpha: f64,
}

impl PowerTerm {
    pub fn plain(a: MatN, alpha: f64) -> Result<Self> {
        Self::check(&a, alpha)?;
        Ok(PowerTerm { kind: PowerKind::Plain, a, k: None, alpha })
    }

    pub fn weighted(a: MatN, k: MatN, alpha: f64) -> Result<Self> {
        Self::check(&a, alpha)?;
        if k.dim() != a.dim() {
            return Err(Error::Dimension("K and A must have the same size".into()));
        }
        if !k.is_finite() {
            return Err(Error::InvalidLaw("K has non-finite entries".into()));
        }
        Ok(PowerTerm { kind: PowerKind::Weighted, a, k: Some(k), alpha })
    }

    /// Requires `A` symmetric with `lambda_min > 1e-12`.
    pub fn sqrt_weighted(a: MatN, alpha: f64) -> Result<Self> {
        Self::check(&a, alpha)?;
        if !a.is_symmetric() {
            return Err(Error::InvalidLaw("sqrt-weighted term needs a symmetric A".into()));
        }
        if symmetric_part_min_eig(&a) <= 1e-12 {
            return Err(Error::InvalidLaw("sqrt-weighted term needs a positive definite A".into()));
        }
        let root = spd_sqrt(&a)?;
        Ok(PowerTerm { kind: PowerKind::SqrtWeighted, a, k: Some(root), alpha })
    }

    /// `A u`, the linear Darcy term.
    pub fn darcy(a: MatN) -> Result<Self> {
        Self::plain(a, 0.0)
    }

    fn check(a: &MatN, alpha: f64) -> Result<()> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidLaw(format!("exponent must be >= 0, got {alpha}")));
        }
        if !a.is_finite() {
            return Err(Error::InvalidLaw("A has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> PowerKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> &MatN {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// The weight `K` (identity for `Plain`).
    pub fn k(&self) -> MatN {
        self.k.clone().unwrap_or_else(|| MatN::identity(self.dim()))
    }

    /// The user-supplied `K` of a `Weighted` term.
    pub fn k_raw(&self) -> Option<&MatN> {
        match self.kind {
            PowerKind::Weighted => self.k.as_ref(),
            _ => None,
        }
    }

    fn ku(&self, u: &VecN) -> VecN {
        match &self.k {
            Some(k) => k.mul_vec(u),
            None => u.clone(),
        }
    }

    /// `|K u|^alpha`, with `|.|^0 = 1`.
    pub fn weight_at(&self, u: &VecN) -> f64 {
        if self.alpha == 0.0 {
            return 1.0;
        }
        let r = self.ku(u).norm();
        if r == 0.0 {
            0.0
        } else {
            r.powf(self.alpha)
        }
    }

    pub fn eval(&self, u: &VecN) -> VecN {
        let w = self.weight_at(u);
        self.a.mul_vec(u).scale(w)
    }

    /// Jacobian `|Ku|^a A + a |Ku|^(a-2) (A u)(K^T K u)^T`; only the first
    /// part where `K u = 0`.
    pub fn jacobian(&self, u: &VecN) -> MatN {
        let n = self.dim();
        let w = self.weight_at(u);
        let mut j = self.a.scale(w);
        if self.alpha == 0.0 {
            return j;
        }
        let ku = self.ku(u);
        let r = ku.norm();
        if r == 0.0 {
            return j;
        }
        let grad = match &self.k {
            Some(k) => k.transpose().mul_vec(&ku),
            None => ku.clone(),
        };
        let au = self.a.mul_vec(u);
        let c = self.alpha * r.powf(self.alpha - 2.0);
        for i in 0..n {
            for k in 0..n {
                j[(i, k)] += c * au[i] * grad[k];
            }
        }
        j
    }

    /// Coefficient `L` of a bound `L (|u|^alpha + |v|^alpha) |u - v|`, when
    /// one exists (it fails only for `alpha in (0,1)` with singular `K`).
    pub fn lipschitz_coefficient(&self) -> Option<f64> {
        let a_op = operator_norm(&self.a);
        let alpha = self.alpha;
        if alpha == 0.0 {
            return Some(0.5 * a_op);
        }
        let k = self.k();
        let k_op = operator_norm(&k);
        if alpha == 1.0 {
            Some(k_op * a_op)
        } else if alpha > 1.0 {
            Some(2f64.powf(alpha) * k_op.powf(alpha) * a_op)
        } else {
            let kinv = k.inverse()?;
            let c0 = k_op.powf(alpha) * a_op + alpha * k_op * a_op * operator_norm(&kinv).powf(1.0 - alpha);
            Some(c0 / (alpha + 1.0))
        }
    }

    /// An upper bound for `|f(u) - f(v)|` valid for every kind and exponent.
    pub fn lipschitz_bound(&self, u: &VecN, v: &VecN) -> f64 {
        let d = (u - v).norm();
        let (nu, nv) = (u.norm(), v.norm());
        match self.lipschitz_coefficient() {
            Some(l) => {
                let s = if self.alpha == 0.0 { 2.0 } else { nu.powf(self.alpha) + nv.powf(self.alpha) };
                l * s * d
            }
            None => {
                let k_op = operator_norm(&self.k());
                let a_op = operator_norm(&self.a);
                k_op.powf(self.alpha) * a_op * (nu.powf(self.alpha) * d + nv * d.powf(self.alpha))
            }
        }
    }
}

/// Where a law's growth constants came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetadataSource {
    Certified,
    UserOverride,
}

/// Growth exponent `s > 2` and constants of
/// `|F(x)-F(y)| <= c1 (1 + |x|^(s-2) + |y|^(s-2)) |x-y|` and
/// `(F(x)-F(y)).(x-y) >= c2 |x-y|^s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawMetadata {
    pub s: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub source: MetadataSource,
}

impl LawMetadata {
    pub fn new(s: f64, c1: Option<f64>, c2: Option<f64>, source: MetadataSource) -> Result<Self> {
        if !(s > 2.0 && s.is_finite()) {
            return Err(Error::InvalidLaw(format!("growth exponent must exceed 2, got {s}")));
        }
        for (name, c) in [("c1", c1), ("c2", c2)] {
            if let Some(c) = c {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidLaw(format!("{name} must be positive, got {c}")));
                }
            }
        }
        Ok(LawMetadata { s, c1, c2, source })
    }

    /// Hölder conjugate `r = s / (s - 1)`.
    pub fn r(&self) -> f64 {
        self.s / (self.s - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutiveLaw {
    n: usize,
    terms: Vec<PowerTerm>,
    gb: Option<TrilinearForm>,
    meta: Option<LawMetadata>,
}

impl ConstitutiveLaw {
    pub fn new(terms: Vec<PowerTerm>, gb: Option<TrilinearForm>) -> Result<Self> {
        let n = match (terms.first(), &gb) {
            (Some(t), _) => t.dim(),
            (None, Some(b)) => b.dim(),
            (None, None) => {
                return Err(Error::InvalidLaw("law needs at least one term".into()));
            }
        };
        if terms.iter().any(|t| t.dim() != n) || gb.as_ref().is_some_and(|b| b.dim() != n) {
            return Err(Error::Dimension("all terms must share one dimension".into()));
        }
        if terms.windows(2).any(|w| w[0].alpha >= w[1].alpha) {
            return Err(Error::InvalidLaw("term exponents must be strictly increasing".into()));
        }
        Ok(ConstitutiveLaw { n, terms, gb, meta: None })
    }

    pub fn gb_only(b: TrilinearForm) -> Self {
        ConstitutiveLaw { n: b.dim(), terms: Vec::new(), gb: Some(b), meta: None }
    }

    /// `sum_k coeffs[k] |u|^exponents[k] u`, the isotropic generalized
    /// Forchheimer law in `R^n`.
    pub fn isotropic(n: usize, coeffs: &[f64], exponents: &[f64]) -> Result<Self> {
        let terms = coeffs
            .iter()
            .zip(exponents)
            .map(|(&c, &e)| PowerTerm::plain(MatN::scalar(n, c), e))
            .collect::<Result<Vec<_>>>()?;
        Self::new(terms, None)
    }

    pub fn with_metadata(mut self, meta: LawMetadata) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn without_metadata(mut self) -> Self {
        self.meta = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn gb(&self) -> Option<&TrilinearForm> {
        self.gb.as_ref()
    }

    pub fn metadata(&self) -> Option<&LawMetadata> {
        self.meta.as_ref()
    }

    pub fn eval(&self, u: &VecN) -> VecN {
        let mut out = VecN::zeros(self.n);
        for t in &self.terms {
            out.axpy(1.0, &t.eval(u));
        }
        if let Some(b) = &self.gb {
            out.axpy(1.0, &b.gb(u));
        }
        out
    }

    pub fn jacobian(&self, u: &VecN) -> MatN {
        let mut j = MatN::zeros(self.n);
        for t in &self.terms {
            j = &j + &t.jacobian(u);
        }
        if let Some(b) = &self.gb {
            j = &j + &b.gb_jacobian(u);
        }
        j
    }

    /// `M(u)` with `F(u) = M(u) u`: the frozen-coefficient matrix
    /// `sum |K u|^alpha A + diag(u^T A_i u) / |u|`, with `|u|` floored at
    /// `norm_floor`.
    pub fn secant_matrix(&self, u: &VecN, norm_floor: f64) -> MatN {
        let mut m = MatN::zeros(self.n);
        for t in &self.terms {
            m = &m + &t.a.scale(t.weight_at(u));
        }
        if let Some(b) = &self.gb {
            let r = u.norm().max(norm_floor);
            let d: Vec<f64> = b.matrices.iter().map(|a| a.bilinear(u, u) / r).collect();
            m = &m + &MatN::diag(&d);
        }
        m
    }

    /// `(F(u) - F(v)).(u - v)`
    pub fn monotonicity_product(&self, u: &VecN, v: &VecN) -> f64 {
        (&self.eval(u) - &self.eval(v)).dot(&(u - v))
    }

    /// `(F(u) - F(v)).(u - v) / |u - v|^order` evaluated in double-double
    /// arithmetic; `+inf` for `u = v`.
    pub fn power_ratio_precise(&self, u: &VecN, v: &VecN, order: f64) -> f64 {
        let z: Vec<Dd> = (0..self.n).map(|i| Dd::diff(u[i], v[i])).collect();
        let d2: Dd = z.iter().map(|&zi| zi * zi).sum();
        if d2.hi == 0.0 {
            return f64::INFINITY;
        }
        let (fu, fv) = (self.eval_dd(u), self.eval_dd(v));
        let product: Dd = (0..self.n).map(|i| (fu[i] - fv[i]) * z[i]).sum();
        (product / d2.powf(0.5 * order)).to_f64()
    }

    fn eval_dd(&self, u: &VecN) -> Vec<Dd> {
        let n = self.n;
        let ud: Vec<Dd> = u.iter().map(|&x| Dd::from(x)).collect();
        let matvec = |m: &MatN, x: &[Dd]| -> Vec<Dd> {
            (0..n).map(|i| (0..n).map(|j| Dd::from(m[(i, j)]) * x[j]).sum()).collect()
        };
        let norm = |x: &[Dd]| x.iter().map(|&xi| xi * xi).sum::<Dd>().sqrt();
        let mut out = vec![Dd::ZERO; n];
        for t in &self.terms {
            let w = if t.alpha == 0.0 {
                Dd::ONE
            } else {
                let ku = match &t.k {
                    Some(k) => matvec(k, &ud),
                    None => ud.clone(),
                };
                norm(&ku).powf(t.alpha)
            };
            for (o, au) in out.iter_mut().zip(matvec(&t.a, &ud)) {
                *o = *o + w * au;
            }
        }
        if let Some(b) = &self.gb {
            let r = norm(&ud);
            if r.hi > 0.0 {
                for (i, a) in b.matrices.iter().enumerate() {
                    let au = matvec(a, &ud);
                    let q: Dd = (0..n).map(|j| ud[j] * au[j]).sum();
                    out[i] = out[i] + q * ud[i] / r;
                }
            }
        }
        out
    }

    /// Upper bound for `|F(u) - F(v)|`. Uses the metadata form
    /// `c1 (1 + |u|^(s-2) + |v|^(s-2)) |u - v|` when `c1` is known and
    /// otherwise sums the constructive per-term bounds.
    pub fn lipschitz_bound(&self, u: &VecN, v: &VecN) -> f64 {
        if let Some(LawMetadata { s, c1: Some(c1), .. }) = self.meta {
            return c1 * (1.0 + u.norm().powf(s - 2.0) + v.norm().powf(s - 2.0)) * (u - v).norm();
        }
        self.constructive_lipschitz_bound(u, v)
    }

    pub fn constructive_lipschitz_bound(&self, u: &VecN, v: &VecN) -> f64 {
        let mut bound: f64 = self.terms.iter().map(|t| t.lipschitz_bound(u, v)).sum();
        if let Some(b) = &self.gb {
            bound += 2.0 * b.mstar() * (u.norm() + v.norm()) * (u - v).norm();
        }
        bound
    }

    /// `c1` of `|F(u)-F(v)| <= c1 (1 + |u|^beta + |v|^beta) |u-v|` built
    /// from the per-term constants; `None` if some term has no constant or an
    /// exponent exceeds `beta`.
    pub fn lipschitz_constant(&self, beta: f64) -> Option<f64> {
        let mut sum = 0.0;
        for t in &self.terms {
            if t.alpha > beta {
                return None;
            }
            sum += t.lipschitz_coefficient()?;
        }
        if let Some(b) = &self.gb {
            if beta < 1.0 {
                return None;
            }
            sum += 2.0 * b.mstar();
        }
        // |u|^a <= 1 + |u|^beta for 0 <= a <= beta
        Some(2.0 * sum)
    }

    /// Solves `F(u) = g` to `|F(u) - g| <= tol`.
    ///
    /// Damped Newton from a radial starting point; when backtracking stalls,
    /// the step length comes from bisection of the monotone scalar map
    /// `tau -> (F(u + tau d) - g).d`.
    pub fn invert_pointwise(&self, g: &VecN, tol: f64) -> Result<VecN> {
        if g.dim() != self.n {
            return Err(Error::Dimension(format!("target has dimension {}", g.dim())));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain("tolerance must be positive".into()));
        }
        let gn = g.norm();
        if gn <= tol {
            return Ok(VecN::zeros(self.n));
        }
        let dir = g.scale(1.0 / gn);
        let t0 = self.radial_solve(&dir, gn);
        let mut u = dir.scale(t0);
        let max_iter = 200;
        let mut res = &self.eval(&u) - g;
        for _ in 0..max_iter {
            let rn = res.norm();
            if rn <= tol {
                return Ok(u);
            }
            let jac = self.jacobian(&u);
            let d = jac.solve(&(-&res)).unwrap_or_else(|| -&res);
            let mut accepted = false;
            let mut tau = 1.0;
            for _ in 0..40 {
                let mut trial = u.clone();
                trial.axpy(tau, &d);
                let r_trial = &self.eval(&trial) - g;
                if r_trial.norm() < (1.0 - 1e-4 * tau) * rn {
                    u = trial;
                    res = r_trial;
                    accepted = true;
                    break;
                }
                tau *= 0.5;
            }
            if !accepted {
                let tau = self.line_root(&u, &d, g);
                u.axpy(tau, &d);
                let r_new = &self.eval(&u) - g;
                if r_new.norm() >= rn {
                    return Err(Error::NoConvergence {
                        iterations: max_iter,
                        residual: r_new.norm(),
                        history: Vec::new(),
                    });
                }
                res = r_new;
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual: res.norm(), history: Vec::new() })
    }

    /// `t >= 0` with `F(t e).e = target` along the unit direction `e`.
    fn radial_solve(&self, e: &VecN, target: f64) -> f64 {
        let phi = |t: f64| self.eval(&e.scale(t)).dot(e) - target;
        let mut hi = 1.0;
        let mut guard = 0;
        while phi(hi) < 0.0 && guard < 200 {
            hi *= 2.0;
            guard += 1;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Root of the nondecreasing map `tau -> (F(u + tau d) - g).d`.
    fn line_root(&self, u: &VecN, d: &VecN, g: &VecN) -> f64 {
        let phi = |tau: f64| {
            let mut w = u.clone();
            w.axpy(tau, d);
            (&self.eval(&w) - g).dot(d)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        if phi(0.0) > 0.0 {
            // wrong way: search backwards
            lo = -1.0;
            hi = 0.0;
            let mut k = 0;
            while phi(lo) > 0.0 && k < 200 {
                lo *= 2.0;
                k += 1;
            }
        } else {
            let mut k = 0;
            while phi(hi) < 0.0 && k < 200 {
                hi *= 2.0;
                k += 1;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Short content hash of the law's serialized description.
    pub fn digest(&self) -> String {
        let spec = LawSpec::from_law(self);
        let json = serde_json::to_string(&spec).expect("law serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Serializable description of a law (TOML or JSON).
///
/// ```toml
/// dimension = 2
///
/// [[terms]]
/// kind = "plain"
/// alpha = 1.0
/// a = [[5.0, 0.2], [0.2, 0.01]]
///
/// gb = [[[1.0, 0.0], [0.0, 5.0]], [[5.0, 0.0], [0.0, 1.0]]]
///
/// [metadata]
/// s = 3.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub dimension: usize,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gb: Option<Vec<MatN>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<MetadataSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub kind: PowerKind,
    pub alpha: f64,
    pub a: MatN,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<MatN>,
}

/// User-supplied growth constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataSpec {
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

impl LawSpec {
    pub fn to_law(&self) -> Result<ConstitutiveLaw> {
        let n = self.dimension;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            if t.a.dim() != n {
                return Err(Error::Dimension(format!("term {i}: A is not {n}x{n}")));
            }
            let term = match t.kind {
                PowerKind::Plain => PowerTerm::plain(t.a.clone(), t.alpha)?,
                PowerKind::SqrtWeighted => PowerTerm::sqrt_weighted(t.a.clone(), t.alpha)?,
                PowerKind::Weighted => {
                    let k =
                        t.k.clone()
                            .ok_or_else(|| Error::InvalidLaw(format!("term {i}: weighted term needs `k`")))?;
                    PowerTerm::weighted(t.a.clone(), k, t.alpha)?
                }
            };
            if t.kind != PowerKind::Weighted && t.k.is_some() {
                return Err(Error::InvalidLaw(format!("term {i}: `k` only applies to weighted terms")));
            }
            terms.push(term);
        }
        let gb = self.gb.clone().map(TrilinearForm::new).transpose()?;
        let mut law = ConstitutiveLaw::new(terms, gb)?;
        if law.dim() != n {
            return Err(Error::Dimension(format!("law has dimension {}, declared {n}", law.dim())));
        }
        if let Some(m) = self.metadata {
            law = law.with_metadata(LawMetadata::new(m.s, m.c1, m.c2, MetadataSource::UserOverride)?);
        }
        Ok(law)
    }

    /// Description of `law`. Certified metadata is not written back; user
    /// overrides are.
    pub fn from_law(law: &ConstitutiveLaw) -> Self {
        let terms = law
            .terms
            .iter()
            .map(|t| TermSpec { kind: t.kind, alpha: t.alpha, a: t.a.clone(), k: t.k_raw().cloned() })
            .collect();
        let metadata = law.meta.filter(|m| m.source == MetadataSource::UserOverride).map(|m| MetadataSpec {
            s: m.s,
            c1: m.c1,
            c2: m.c2,
        });
        LawSpec { dimension: law.n, terms, gb: law.gb.as_ref().map(|b| b.matrices.clone()), metadata }
    }
}
