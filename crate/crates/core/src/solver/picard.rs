use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use super::problem::{cell_norm, face_norm, ProblemData, StaggeredState};
use crate::error::{Error, Result};
use crate::linalg::VecN;

/// Velocities below this magnitude freeze the `G_B` secant coefficient.
const VELOCITY_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Decreasing regularization parameters, ending at the target `epsilon`.
    pub epsilon_schedule: Vec<f64>,
    /// Tolerance on `residual / data_scale`.
    pub picard_tol: f64,
    pub max_picard: usize,
    /// Relative tolerance of the inner pressure solve.
    pub uzawa_tol: f64,
    pub max_uzawa: usize,
    /// Floor for `|p|` in the frozen coefficient of the pressure term.
    pub p_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_schedule: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 0.0],
            picard_tol: 1e-10,
            max_picard: 500,
            uzawa_tol: 1e-13,
            max_uzawa: 20_000,
            p_floor: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let sched = &self.epsilon_schedule;
        if sched.is_empty() {
            return Err(Error::Domain("epsilon schedule is empty".into()));
        }
        if sched.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Domain("epsilon values must be finite and nonnegative".into()));
        }
        if sched.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Domain("epsilon schedule must be decreasing".into()));
        }
        if !(self.picard_tol > 0.0 && self.uzawa_tol > 0.0 && self.p_floor > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if self.max_picard == 0 || self.max_uzawa == 0 {
            return Err(Error::Domain("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub state: StaggeredState,
    pub stages: Vec<StageReport>,
    pub final_residual: f64,
    /// Cells with `|p| < p_floor` at the end.
    pub floored_cells: usize,
    pub norm_u: f64,
    pub norm_div_u: f64,
    pub norm_p: f64,
    pub norm_f: f64,
    pub norm_psi: f64,
    /// `(|u|_s + |div u|_s + |p|_r) / (|f|^(r-1) + |f|^(s-1) + |psi|^(r-1) + |psi|)`,
    /// zero for zero data.
    pub estimate_ratio: f64,
    /// Residual after every iteration of every stage.
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }
}

/// Solves the regularized system at one `epsilon` starting from `state0`.
pub fn solve_stage(
    problem: &ProblemData,
    state0: &StaggeredState,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<StaggeredState> {
    let mut history = Vec::new();
    solve_stage_traced(problem, state0, epsilon, cfg, &mut history).map(|(s, _)| s)
}

fn solve_stage_traced(
    problem: &ProblemData,
    state0: &StaggeredState,
    epsilon: f64,
    cfg: &SolverConfig,
    history: &mut Vec<f64>,
) -> Result<(StaggeredState, usize)> {
    cfg.validate()?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Domain("epsilon must be nonnegative".into()));
    }
    if epsilon > 0.0 && problem.law.metadata().is_none() {
        return Err(Error::Precondition("regularized stages need law metadata".into()));
    }
    state0.check(&problem.grid)?;
    let tol = cfg.picard_tol * problem.data_scale();
    let mut state = state0.clone();
    let mut res = problem.residual(&state, epsilon);
    for it in 0..cfg.max_picard {
        if res <= tol {
            return Ok((state, it));
        }
        let target = picard_step(problem, &state, epsilon, cfg)?;
        let mut omega = 1.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let trial = blend(&state, &target, omega);
            let r = problem.residual(&trial, epsilon);
            if r < res {
                accepted = Some((trial, r));
                break;
            }
            omega *= 0.5;
        }
        // a full step is still a Picard step when no damping helps
        let (next, r) = match accepted {
            Some(a) => a,
            None => {
                let r = problem.residual(&target, epsilon);
                (target, r)
            }
        };
        state = next;
        res = r;
        history.push(res);
    }
    if res <= tol {
        return Ok((state, cfg.max_picard));
    }
    Err(Error::NoConvergence { iterations: cfg.max_picard, residual: res, history: history.clone() })
}

fn blend(a: &StaggeredState, b: &StaggeredState, omega: f64) -> StaggeredState {
    let mix =
        |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + omega * (q - p)).collect() };
    StaggeredState { u_x: mix(&a.u_x, &b.u_x), u_y: mix(&a.u_y, &b.u_y), p: mix(&a.p, &b.p) }
}

/// One frozen-coefficient step: the linear saddle system is reduced to an
/// SPD system for `q = p - epsilon S div u` and solved by preconditioned CG.
fn picard_step(
    problem: &ProblemData,
    state: &StaggeredState,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<StaggeredState> {
    let g = &problem.grid;
    let (s, r) = problem.exponents();
    let wc = g.cell_area();
    let u = state.faces();
    let load = problem.face_load();

    let coef: Vec<(f64, f64)> = (0..g.n_faces())
        .into_par_iter()
        .map(|f| {
            let (vel, axis) = g.face_velocity(&u, f);
            let m = problem.law.secant_matrix(&VecN::from(vel), VELOCITY_FLOOR);
            let other = 1 - axis;
            (m[(axis, axis)], m[(axis, other)] * vel[other])
        })
        .collect();
    let dmax = coef.iter().fold(0.0_f64, |m, c| m.max(c.0));
    let dfloor = 1e-12 * (1.0 + dmax);
    // face operator w_f D_f and lagged right-hand side
    let wd: Vec<f64> = (0..g.n_faces()).map(|f| g.face_weight(f) * coef[f].0.max(dfloor)).collect();
    let b: Vec<f64> = (0..g.n_faces()).map(|f| load[f] - g.face_weight(f) * coef[f].1).collect();

    let d = g.div(&u);
    let sv: Vec<f64> = d.iter().map(|x| if s == 2.0 { 1.0 } else { x.abs().powf(s - 2.0) }).collect();
    let ev: Vec<f64> = state.p.iter().map(|p| p.abs().max(cfg.p_floor).powf(r - 2.0)).collect();
    let gamma: Vec<f64> = sv.iter().zip(&ev).map(|(s, e)| 1.0 + epsilon * epsilon * e * s).collect();
    let cell_diag: Vec<f64> = (0..g.n_cells()).map(|c| epsilon * ev[c] / gamma[c]).collect();

    let binv: Vec<f64> = b.iter().zip(&wd).map(|(b, w)| b / w).collect();
    let div_binv = g.div(&binv);
    let rhs: Vec<f64> = (0..g.n_cells()).map(|c| problem.f[c] / gamma[c] - div_binv[c]).collect();

    let apply = |q: &[f64]| -> Vec<f64> {
        let mut t = g.div_t(q);
        t.iter_mut().zip(&wd).for_each(|(v, w)| *v *= wc / w);
        let mut y = g.div(&t);
        y.iter_mut().zip(q).zip(&cell_diag).for_each(|((y, q), c)| *y += c * q);
        y
    };
    let mut precond = cell_diag.clone();
    for (f, w) in wd.iter().enumerate() {
        for (c, k) in g.face_cells(f) {
            if let Some(c) = c {
                precond[c] += wc * k * k / w;
            }
        }
    }
    let q = conjugate_gradient(apply, &rhs, &precond, cfg.uzawa_tol, cfg.max_uzawa)?;

    let gq = g.div_t(&q);
    let unew: Vec<f64> = (0..g.n_faces()).map(|f| (b[f] + wc * gq[f]) / wd[f]).collect();
    let dnew = g.div(&unew);
    let pnew: Vec<f64> = (0..g.n_cells()).map(|c| q[c] + epsilon * sv[c] * dnew[c]).collect();
    StaggeredState::from_faces(g, &unew, pnew)
}

/// Jacobi-preconditioned CG for an SPD operator, started from zero.
fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    diag: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut res = rhs.to_vec();
    let mut z: Vec<f64> = res.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut dir = z.clone();
    let mut rz = dot(&res, &z);
    for _ in 0..max_iter {
        let ad = apply(&dir);
        let alpha = rz / dot(&dir, &ad);
        for i in 0..n {
            x[i] += alpha * dir[i];
            res[i] -= alpha * ad[i];
        }
        let rnorm = dot(&res, &res).sqrt();
        if rnorm <= rtol * bnorm {
            return Ok(x);
        }
        z = res.iter().zip(diag).map(|(r, d)| r / d).collect();
        let rz_new = dot(&res, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    // the outer iteration judges the nonlinear residual; a CG solve that
    // stalls near rounding is still a usable step
    let rnorm = dot(&res, &res).sqrt();
    if rnorm <= 1e3 * rtol * bnorm {
        return Ok(x);
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: rnorm / bnorm, history: Vec::new() })
}

/// Runs the continuation from `state0`, returning the state after every
/// stage.
pub fn continuation(
    problem: &ProblemData,
    state0: &StaggeredState,
    cfg: &SolverConfig,
) -> Result<Vec<(f64, StaggeredState)>> {
    let mut history = Vec::new();
    continuation_traced(problem, state0, cfg, &mut history)
        .map(|v| v.into_iter().map(|(e, s, _)| (e, s)).collect())
}

fn continuation_traced(
    problem: &ProblemData,
    state0: &StaggeredState,
    cfg: &SolverConfig,
    history: &mut Vec<f64>,
) -> Result<Vec<(f64, StaggeredState, usize)>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.epsilon_schedule.len());
    let mut state = state0.clone();
    for &eps in &cfg.epsilon_schedule {
        let (next, its) = solve_stage_traced(problem, &state, eps, cfg, history)?;
        state = next;
        out.push((eps, state.clone(), its));
    }
    Ok(out)
}

/// Continuation over the schedule from the zero state, with norms and the
/// a priori estimate ratio. Requires certified (or overridden) metadata.
pub fn solve_steady(problem: &ProblemData, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_steady_from(problem, &StaggeredState::zeros(&problem.grid), cfg)
}

pub fn solve_steady_from(
    problem: &ProblemData,
    state0: &StaggeredState,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if problem.law.metadata().is_none() {
        return Err(Error::Precondition(
            "law has no growth metadata; certify it or supply an override".into(),
        ));
    }
    let mut history = Vec::new();
    let path = continuation_traced(problem, state0, cfg, &mut history)?;
    let stages = path
        .iter()
        .map(|(eps, st, its)| StageReport {
            epsilon: *eps,
            iterations: *its,
            residual: problem.residual(st, *eps),
        })
        .collect::<Vec<_>>();
    let (eps, state, _) = path.into_iter().last().expect("schedule is nonempty");
    Ok(build_report(problem, state, stages, history, eps, cfg.p_floor))
}

fn build_report(
    problem: &ProblemData,
    state: StaggeredState,
    stages: Vec<StageReport>,
    residual_history: Vec<f64>,
    epsilon: f64,
    p_floor: f64,
) -> SolveReport {
    let g: &Grid2D = &problem.grid;
    let (s, r) = problem.exponents();
    let u = state.faces();
    let norm_u = face_norm(g, &u, s);
    let norm_div_u = cell_norm(g, &g.div(&u), s);
    let norm_p = cell_norm(g, &state.p, r);
    let norm_f = problem.source_norm();
    let norm_psi = problem.boundary_norm();
    let rhs = norm_f.powf(r - 1.0) + norm_f.powf(s - 1.0) + norm_psi.powf(r - 1.0) + norm_psi;
    let lhs = norm_u + norm_div_u + norm_p;
    let estimate_ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    SolveReport {
        final_residual: problem.residual(&state, epsilon),
        floored_cells: state.p.iter().filter(|p| p.abs() < p_floor).count(),
        state,
        stages,
        norm_u,
        norm_div_u,
        norm_p,
        norm_f,
        norm_psi,
        estimate_ratio,
        residual_history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::problem::{discretize, manufactured_case, state_distance, two_term_law};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let bad = SolverConfig { epsilon_schedule: vec![1e-3, 1e-2], ..cfg() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { picard_tol: 0.0, ..cfg() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_data_zero_state() {
        let g = Grid2D::unit_square(4).unwrap();
        let data = discretize(g, two_term_law().unwrap(), |_, _| 0.0, |_, _| 0.0).unwrap();
        let rep = solve_steady(&data, &cfg()).unwrap();
        assert_eq!(rep.state, StaggeredState::zeros(&g));
        assert_eq!(rep.estimate_ratio, 0.0);
        assert_eq!(rep.norm_u + rep.norm_p + rep.norm_div_u, 0.0);
    }

    #[test]
    fn darcy_stage_recovers_m0() {
        let g = Grid2D::unit_square(6).unwrap();
        let (data, exact) = manufactured_case("M0", g).unwrap();
        let st = solve_stage(&data, &StaggeredState::zeros(&g), 0.0, &cfg()).unwrap();
        assert!(st.max_abs_diff(&exact) < 1e-9);
        // the steady driver insists on metadata
        assert!(matches!(solve_steady(&data, &cfg()), Err(Error::Precondition(_))));
        assert!(solve_stage(&data, &exact, 1e-3, &cfg()).is_err());
    }

    #[test]
    fn m1_recovered_and_unique() {
        let g = Grid2D::unit_square(8).unwrap();
        let (data, exact) = manufactured_case("M1", g).unwrap();
        let rep = solve_steady(&data, &cfg()).unwrap();
        assert!(rep.final_residual <= 1e-10 * data.data_scale());
        assert!(rep.state.max_abs_diff(&exact) < 1e-8);

        let mut other = exact.clone();
        other.u_x.iter_mut().enumerate().for_each(|(k, v)| *v += (k as f64).sin());
        other.p.iter_mut().for_each(|v| *v = -3.0);
        let b = solve_stage(&data, &other, 0.0, &cfg()).unwrap();
        assert!(state_distance(&g, &b, &rep.state, 3.0) < 1e-8);
    }

    #[test]
    fn small_epsilon_close_to_target() {
        let g = Grid2D::unit_square(8).unwrap();
        let (data, exact) = manufactured_case("M1", g).unwrap();
        let path = continuation(&data, &StaggeredState::zeros(&g), &cfg()).unwrap();
        let (eps, near) = &path[path.len() - 2];
        assert_eq!(*eps, 1e-8);
        assert!(state_distance(&g, near, &exact, 3.0) < 1e-5);
    }

    #[test]
    fn no_convergence_carries_history() {
        let g = Grid2D::unit_square(6).unwrap();
        let (data, _) = manufactured_case("M1", g).unwrap();
        let tight = SolverConfig { max_picard: 2, ..cfg() };
        match solve_stage(&data, &StaggeredState::zeros(&g), 0.0, &tight) {
            Err(Error::NoConvergence { history, iterations, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
