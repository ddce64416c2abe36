use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use crate::certify::certify_and_attach;
use crate::constitutive::{ConstitutiveLaw, PowerTerm};
use crate::error::{Error, Result};
use crate::linalg::{MatN, VecN};

/// Face velocities and cell pressures on a MAC grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggeredState {
    /// Normal velocity on vertical faces, `(nx + 1) * ny`, row-major in `j`.
    pub u_x: Vec<f64>,
    /// Normal velocity on horizontal faces, `nx * (ny + 1)`.
    pub u_y: Vec<f64>,
    /// Cell-centered pressure, `nx * ny`.
    pub p: Vec<f64>,
}

impl StaggeredState {
    pub fn zeros(grid: &Grid2D) -> Self {
        StaggeredState {
            u_x: vec![0.0; grid.n_xfaces()],
            u_y: vec![0.0; grid.n_yfaces()],
            p: vec![0.0; grid.n_cells()],
        }
    }

    /// Builds a state from a global face vector (vertical faces first).
    pub fn from_faces(grid: &Grid2D, u: &[f64], p: Vec<f64>) -> Result<Self> {
        if u.len() != grid.n_faces() || p.len() != grid.n_cells() {
            return Err(Error::Dimension("state does not match the grid".into()));
        }
        let (ux, uy) = u.split_at(grid.n_xfaces());
        Ok(StaggeredState { u_x: ux.to_vec(), u_y: uy.to_vec(), p })
    }

    /// Global face vector, vertical faces first.
    pub fn faces(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.u_x.len() + self.u_y.len());
        u.extend_from_slice(&self.u_x);
        u.extend_from_slice(&self.u_y);
        u
    }

    pub fn check(&self, grid: &Grid2D) -> Result<()> {
        if self.u_x.len() != grid.n_xfaces()
            || self.u_y.len() != grid.n_yfaces()
            || self.p.len() != grid.n_cells()
        {
            return Err(Error::Dimension("state does not match the grid".into()));
        }
        if !self.u_x.iter().chain(&self.u_y).chain(&self.p).all(|v| v.is_finite()) {
            return Err(Error::Domain("state has non-finite entries".into()));
        }
        Ok(())
    }

    /// Largest entrywise difference over velocity and pressure.
    pub fn max_abs_diff(&self, other: &StaggeredState) -> f64 {
        let pairs = self.u_x.iter().zip(&other.u_x);
        let pairs = pairs.chain(self.u_y.iter().zip(&other.u_y));
        pairs.chain(self.p.iter().zip(&other.p)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Discrete `L^s` norm of a face field with face control-volume weights.
pub fn face_norm(grid: &Grid2D, u: &[f64], s: f64) -> f64 {
    let sum: f64 = u.iter().enumerate().map(|(f, v)| grid.face_weight(f) * v.abs().powf(s)).sum();
    sum.powf(1.0 / s)
}

/// Discrete `L^s` norm of a cell field.
pub fn cell_norm(grid: &Grid2D, c: &[f64], s: f64) -> f64 {
    let sum: f64 = c.iter().map(|v| v.abs().powf(s)).sum();
    (grid.cell_area() * sum).powf(1.0 / s)
}

/// Length-weighted `L^r` surrogate for the trace norm of boundary data.
pub fn boundary_norm(grid: &Grid2D, psi: &[f64], r: f64) -> f64 {
    let sum: f64 = grid.boundary_faces().iter().zip(psi).map(|(b, v)| b.len * v.abs().powf(r)).sum();
    sum.powf(1.0 / r)
}

/// `||u1 - u2||_s + ||div(u1 - u2)||_s + ||p1 - p2||_r`.
pub fn state_distance(grid: &Grid2D, a: &StaggeredState, b: &StaggeredState, s: f64) -> f64 {
    let r = s / (s - 1.0);
    let du: Vec<f64> = a.faces().iter().zip(b.faces()).map(|(x, y)| x - y).collect();
    let dp: Vec<f64> = a.p.iter().zip(&b.p).map(|(x, y)| x - y).collect();
    face_norm(grid, &du, s) + cell_norm(grid, &grid.div(&du), s) + cell_norm(grid, &dp, r)
}

/// Law, cell source and boundary pressure of a steady problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub grid: Grid2D,
    pub law: ConstitutiveLaw,
    /// Cell values of the source.
    pub f: Vec<f64>,
    /// Pressure trace at boundary face midpoints, ordered as
    /// [`Grid2D::boundary_faces`].
    pub psi: Vec<f64>,
}

/// Breakdown of the discrete residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualParts {
    pub face: f64,
    pub cell: f64,
}

impl ResidualParts {
    pub fn max(&self) -> f64 {
        self.face.max(self.cell)
    }
}

impl ProblemData {
    pub fn new(grid: Grid2D, law: ConstitutiveLaw, f: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if law.dim() != 2 {
            return Err(Error::Dimension("the solver works in two dimensions".into()));
        }
        if f.len() != grid.n_cells() || psi.len() != 2 * (grid.nx + grid.ny) {
            return Err(Error::Dimension("data does not match the grid".into()));
        }
        if !f.iter().chain(&psi).all(|v| v.is_finite()) {
            return Err(Error::Domain("data must be finite".into()));
        }
        Ok(ProblemData { grid, law, f, psi })
    }

    /// `(s, r)` from the law metadata, `(2, 2)` when the law carries none.
    pub fn exponents(&self) -> (f64, f64) {
        match self.law.metadata() {
            Some(m) => (m.s, m.r()),
            None => (2.0, 2.0),
        }
    }

    /// Boundary load per face: `-sign * psi * len` on boundary faces.
    pub fn face_load(&self) -> Vec<f64> {
        let mut rhs = vec![0.0; self.grid.n_faces()];
        for (b, psi) in self.grid.boundary_faces().iter().zip(&self.psi) {
            rhs[b.face] = -b.sign * psi * b.len;
        }
        rhs
    }

    /// `1 + max|f| + max|load / weight|`, the reference size for residuals.
    pub fn data_scale(&self) -> f64 {
        let fmax = self.f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let load = self.face_load();
        let lmax =
            load.iter().enumerate().fold(0.0_f64, |m, (k, v)| m.max((v / self.grid.face_weight(k)).abs()));
        1.0 + fmax + lmax
    }

    /// Same law and grid with `(k f, k psi)`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.f.iter_mut().for_each(|v| *v *= k);
        out.psi.iter_mut().for_each(|v| *v *= k);
        out
    }

    pub fn source_norm(&self) -> f64 {
        cell_norm(&self.grid, &self.f, self.exponents().0)
    }

    pub fn boundary_norm(&self) -> f64 {
        boundary_norm(&self.grid, &self.psi, self.exponents().1)
    }

    /// Residual of every discrete equation, per face divided by its weight
    /// and per cell divided by the cell area.
    pub fn residual_parts(&self, state: &StaggeredState, epsilon: f64) -> ResidualParts {
        let g = &self.grid;
        let (s, r) = self.exponents();
        let wc = g.cell_area();
        let u = state.faces();
        let d = g.div(&u);
        let flux: Vec<f64> =
            d.iter().zip(&state.p).map(|(dv, p)| epsilon * signed_pow(*dv, s - 1.0) - p).collect();
        let coupling = g.div_t(&flux);
        let load = self.face_load();
        let face = (0..g.n_faces())
            .map(|f| {
                let (vel, axis) = g.face_velocity(&u, f);
                let fn_ = self.law.eval(&VecN::from(vel))[axis];
                let w = g.face_weight(f);
                (fn_ + (wc * coupling[f] - load[f]) / w).abs()
            })
            .fold(0.0, f64::max);
        let cell = d
            .iter()
            .zip(&state.p)
            .zip(&self.f)
            .map(|((dv, p), f)| (epsilon * signed_pow(*p, r - 1.0) + dv - f).abs())
            .fold(0.0, f64::max);
        ResidualParts { face, cell }
    }

    /// Largest absolute residual over all discrete equations.
    pub fn residual(&self, state: &StaggeredState, epsilon: f64) -> f64 {
        self.residual_parts(state, epsilon).max()
    }
}

/// `|x|^e sign(x)`
pub(crate) fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// Problem data from a source and a boundary pressure, sampled at cell
/// centers and boundary face midpoints.
pub fn discretize(
    grid: Grid2D,
    law: ConstitutiveLaw,
    f_fn: impl Fn(f64, f64) -> f64,
    psi_fn: impl Fn(f64, f64) -> f64,
) -> Result<ProblemData> {
    let f = (0..grid.n_cells())
        .map(|c| {
            let (x, y) = grid.cell_center(c);
            f_fn(x, y)
        })
        .collect();
    let psi = grid.boundary_faces().iter().map(|b| psi_fn(b.x, b.y)).collect();
    ProblemData::new(grid, law, f, psi)
}

/// The law `F(u) = u + |u| u` with its certified metadata.
pub fn two_term_law() -> Result<ConstitutiveLaw> {
    let law = ConstitutiveLaw::isotropic(2, &[1.0, 1.0], &[0.0, 1.0])?;
    let (_, law) = certify_and_attach(law);
    if law.metadata().is_none() {
        return Err(Error::InvalidLaw("two-term law failed to certify".into()));
    }
    Ok(law)
}

/// A problem whose exact discrete solution has pressure `p_fn` at the cell
/// centers. The face velocities solve the discrete momentum equation for
/// that pressure, the boundary data is the trace of `p_fn` and the source is
/// the discrete divergence, so the pair is an exact discrete solution at
/// `epsilon = 0`.
pub fn manufactured_from_pressure(
    grid: Grid2D,
    law: ConstitutiveLaw,
    p_fn: impl Fn(f64, f64) -> f64,
) -> Result<(ProblemData, StaggeredState)> {
    let p: Vec<f64> = (0..grid.n_cells())
        .map(|c| {
            let (x, y) = grid.cell_center(c);
            p_fn(x, y)
        })
        .collect();
    let psi: Vec<f64> = grid.boundary_faces().iter().map(|b| p_fn(b.x, b.y)).collect();
    let mut data = ProblemData::new(grid, law, vec![0.0; grid.n_cells()], psi)?;
    let load = data.face_load();
    let grad = grid.div_t(&p);
    let wc = grid.cell_area();
    let target: Vec<f64> =
        (0..grid.n_faces()).map(|f| (load[f] + wc * grad[f]) / grid.face_weight(f)).collect();
    let u = invert_on_faces(&grid, &data.law, &target)?;
    data.f = grid.div(&u);
    let state = StaggeredState::from_faces(&grid, &u, p)?;
    Ok((data, state))
}

/// Solves `F(face velocity)_normal = target` on every face by nonlinear
/// Gauss-Seidel sweeps over scalar monotone equations.
fn invert_on_faces(grid: &Grid2D, law: &ConstitutiveLaw, target: &[f64]) -> Result<Vec<f64>> {
    let mut u = vec![0.0; grid.n_faces()];
    for _ in 0..500 {
        let mut change = 0.0_f64;
        for f in 0..grid.n_faces() {
            let (vel, axis) = grid.face_velocity(&u, f);
            let new = solve_normal(law, vel, axis, target[f])?;
            change = change.max((new - u[f]).abs());
            u[f] = new;
        }
        let size = u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if change <= 4.0 * f64::EPSILON * size {
            return Ok(u);
        }
    }
    Err(Error::Domain("face inversion did not settle".into()))
}

/// Root of `x -> F(v with v[axis] = x)[axis] - g`, increasing in `x`.
fn solve_normal(law: &ConstitutiveLaw, vel: [f64; 2], axis: usize, g: f64) -> Result<f64> {
    let h = |x: f64| {
        let mut v = vel;
        v[axis] = x;
        law.eval(&VecN::from(v))[axis] - g
    };
    if h(0.0) == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut grow = 0;
    while h(lo) > 0.0 || h(hi) < 0.0 {
        lo *= 2.0;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Domain("no bracket for face inversion".into()));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let hx = h(x);
        if hx == 0.0 {
            return Ok(x);
        }
        if hx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut v = vel;
        v[axis] = x;
        let slope = law.jacobian(&VecN::from(v))[(axis, axis)];
        let newton = x - hx / slope;
        x = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if (hx / slope).abs() <= 0.25 * f64::EPSILON * x.abs() {
            break;
        }
    }
    Ok(x)
}

/// Named manufactured problems: `M1` (`F(u) = u + |u| u`,
/// `p = cos(pi x) cos(pi y)`) and `M0` (Darcy `F(u) = u`, `p = x`).
pub fn manufactured_case(name: &str, grid: Grid2D) -> Result<(ProblemData, StaggeredState)> {
    use std::f64::consts::PI;
    match name {
        "M1" => manufactured_from_pressure(grid, two_term_law()?, |x, y| (PI * x).cos() * (PI * y).cos()),
        "M0" => {
            let law = ConstitutiveLaw::new(vec![PowerTerm::darcy(MatN::identity(2))?], None)?;
            manufactured_from_pressure(grid, law, |x, _| x)
        }
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discretize_samples() {
        let g = Grid2D::unit_square(4).unwrap();
        let law = two_term_law().unwrap();
        let zero = discretize(g, law.clone(), |_, _| 0.0, |_, _| 0.0).unwrap();
        assert!(zero.f.iter().chain(&zero.psi).all(|v| *v == 0.0));
        let one = discretize(g, law.clone(), |_, _| 1.0, |x, _| x).unwrap();
        assert_eq!(one.f, vec![1.0; 16]);
        assert!(one.psi[..4].iter().all(|v| *v == 0.0));
        assert!(one.psi[4..8].iter().all(|v| *v == 1.0));
        assert_eq!(zero.residual(&StaggeredState::zeros(&g), 1e-3), 0.0);
    }

    #[test]
    fn darcy_two_cell_column() {
        // hand solution: p = x on two cells of width 1/2 gives p = 1/4, 3/4
        // and u = -1 on the three vertical faces
        let g = Grid2D::new(2, 2, 1.0, 1.0).unwrap();
        let law = ConstitutiveLaw::new(vec![PowerTerm::darcy(MatN::identity(2)).unwrap()], None).unwrap();
        let data = discretize(g, law, |_, _| 0.0, |x, _| x).unwrap();
        let mut st = StaggeredState::zeros(&g);
        st.u_x = vec![-1.0; g.n_xfaces()];
        st.p = vec![0.25, 0.75, 0.25, 0.75];
        assert!(data.residual(&st, 0.0) < 1e-14);
        st.p[0] += 1e-3;
        assert!(data.residual(&st, 0.0) > 1e-4);
    }

    #[test]
    fn manufactured_pairs_are_exact() {
        let g = Grid2D::unit_square(8).unwrap();
        let (m1, exact) = manufactured_case("M1", g).unwrap();
        assert!(m1.residual(&exact, 0.0) < 1e-13 * m1.data_scale());
        assert_eq!(m1.exponents(), (3.0, 1.5));

        let (m0, exact0) = manufactured_case("M0", g).unwrap();
        assert!(exact0.u_x.iter().all(|v| (v + 1.0).abs() < 1e-13));
        assert!(exact0.u_y.iter().all(|v| v.abs() < 1e-13));
        assert!(m0.f.iter().all(|v| v.abs() < 1e-12));

        let (c, st) = manufactured_from_pressure(g, two_term_law().unwrap(), |_, _| 2.0).unwrap();
        assert!(st.faces().iter().all(|v| v.abs() < 1e-14));
        assert!(c.f.iter().all(|v| v.abs() < 1e-12));

        assert!(matches!(manufactured_case("M9", g), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn norms_and_distance() {
        let g = Grid2D::unit_square(4).unwrap();
        assert!((cell_norm(&g, &[1.0; 16], 3.0) - 1.0).abs() < 1e-12);
        assert!((boundary_norm(&g, &[1.0; 16], 1.5) - 4.0_f64.powf(1.0 / 1.5)).abs() < 1e-12);
        let a = StaggeredState::zeros(&g);
        assert_eq!(state_distance(&g, &a, &a, 3.0), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn constructed_pairs_solve_the_discrete_system(
                n in 2usize..7,
                amp in -3.0f64..3.0,
                kx in 0.5f64..3.0,
                ky in 0.5f64..3.0,
            ) {
                let g = Grid2D::unit_square(n).unwrap();
                let (data, exact) = manufactured_from_pressure(g, two_term_law().unwrap(), |x, y| {
                    amp * (kx * x).sin() + (ky * y).cos()
                })
                .unwrap();
                prop_assert!(data.residual(&exact, 0.0) <= 1e-12 * data.data_scale());
            }
        }
    }
}
