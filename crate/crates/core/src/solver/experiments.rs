use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use super::picard::{solve_stage, solve_steady, SolverConfig};
use super::problem::{boundary_norm, cell_norm, face_norm, state_distance, ProblemData};
use crate::error::{Error, Result};

/// Direction of a data perturbation; it is normalized to unit norm before
/// scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "target", content = "shape")]
pub enum Perturbation {
    /// Cell values added to `f`.
    Source(Vec<f64>),
    /// Boundary values added to `psi`.
    Boundary(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceRow {
    /// Norm of the data perturbation.
    pub delta: f64,
    /// `|du|_s + |div du|_s + |dp|_r`
    #[serde(rename = "Delta")]
    pub big_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceTable {
    pub rows: Vec<DependenceRow>,
    /// Least-squares slope of `log Delta` against `log delta` over the
    /// smallest decade of `delta`; `None` when degenerate.
    pub slope: Option<f64>,
    /// The same fit over all rows.
    pub slope_all: Option<f64>,
}

/// Solves the base problem and the problems with data perturbed by
/// `scale * shape / |shape|` for every scale, measuring the solution change.
pub fn dependence_experiment(
    problem: &ProblemData,
    perturbation: &Perturbation,
    scales: &[f64],
    cfg: &SolverConfig,
) -> Result<DependenceTable> {
    let meta = problem.law.metadata().ok_or_else(|| {
        Error::Precondition("dependence experiments need certified metadata with s > 2".into())
    })?;
    let (s, r) = (meta.s, meta.r());
    let g = &problem.grid;
    if scales.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(Error::Domain("scales must be finite and nonnegative".into()));
    }
    let (len, norm) = match perturbation {
        Perturbation::Source(v) => (g.n_cells(), cell_norm(g, v, s)),
        Perturbation::Boundary(v) => (2 * (g.nx + g.ny), boundary_norm(g, v, r)),
    };
    let shape = match perturbation {
        Perturbation::Source(v) | Perturbation::Boundary(v) => v,
    };
    if shape.len() != len {
        return Err(Error::Dimension("perturbation does not match the grid".into()));
    }
    let unit: Vec<f64> = if norm > 0.0 { shape.iter().map(|v| v / norm).collect() } else { shape.clone() };
    let unit_norm = if norm > 0.0 { 1.0 } else { 0.0 };

    let base = solve_steady(problem, cfg)?.state;
    let target_eps = *cfg.epsilon_schedule.last().expect("validated schedule");
    let mut rows = Vec::with_capacity(scales.len());
    for &k in scales {
        let mut data = problem.clone();
        let field = match perturbation {
            Perturbation::Source(_) => &mut data.f,
            Perturbation::Boundary(_) => &mut data.psi,
        };
        field.iter_mut().zip(&unit).for_each(|(d, v)| *d += k * v);
        let big_delta = if unit_norm == 0.0 || k == 0.0 {
            0.0
        } else {
            let st = solve_stage(&data, &base, target_eps, cfg)?;
            state_distance(g, &st, &base, s)
        };
        rows.push(DependenceRow { delta: k * unit_norm, big_delta });
    }
    let dmin = rows.iter().map(|r| r.delta).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    let small: Vec<DependenceRow> =
        rows.iter().copied().filter(|r| r.delta > 0.0 && r.delta <= 10.0 * dmin * (1.0 + 1e-9)).collect();
    Ok(DependenceTable { slope: loglog_slope(&small), slope_all: loglog_slope(&rows), rows })
}

/// Least-squares slope of `log Delta` on `log delta` over rows with both
/// positive; `None` with fewer than two distinct points.
pub fn loglog_slope(rows: &[DependenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.delta > 0.0 && r.big_delta > 0.0)
        .map(|r| (r.delta.ln(), r.big_delta.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// `max_v |sum_cells area (div v) q| / (|v|_s + |div v|_s)` over a probe set:
/// the discrete gradient of `q`, the two linear fields `(x, 0)` and `(0, y)`,
/// and every single-face unit field.
pub fn discrete_infsup_diagnostic(grid: &Grid2D, q: &[f64], s: f64) -> Result<f64> {
    if q.len() != grid.n_cells() {
        return Err(Error::Dimension("cell field does not match the grid".into()));
    }
    if !(s > 1.0) {
        return Err(Error::Domain("exponent must exceed 1".into()));
    }
    if q.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroField);
    }
    let wc = grid.cell_area();
    let ratio = |v: &[f64]| -> f64 {
        let d = grid.div(v);
        let denom = face_norm(grid, v, s) + cell_norm(grid, &d, s);
        if denom == 0.0 {
            return 0.0;
        }
        let num: f64 = d.iter().zip(q).map(|(d, q)| wc * d * q).sum();
        num.abs() / denom
    };
    let mut best = ratio(&grid.div_t(q));
    let linear = |vertical: bool| -> Vec<f64> {
        (0..grid.n_faces())
            .map(|f| {
                let (x, y) = grid.face_center(f);
                match (grid.face_coords(f).0, vertical) {
                    (true, true) => x,
                    (false, false) => y,
                    _ => 0.0,
                }
            })
            .collect()
    };
    best = best.max(ratio(&linear(true))).max(ratio(&linear(false)));
    // a unit field on face f has divergence only in its (one or two) cells
    for f in 0..grid.n_faces() {
        let w = grid.face_weight(f);
        let mut num = 0.0;
        let mut div_sum = 0.0;
        for (c, k) in grid.face_cells(f) {
            if let Some(c) = c {
                num += wc * k * q[c];
                div_sum += wc * k.abs().powf(s);
            }
        }
        let denom = w.powf(1.0 / s) + div_sum.powf(1.0 / s);
        best = best.max(num.abs() / denom);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::problem::manufactured_case;

    #[test]
    fn infsup_examples() {
        let g = Grid2D::unit_square(4).unwrap();
        assert!(discrete_infsup_diagnostic(&g, &[1.0; 16], 3.0).unwrap() > 0.0);
        assert!(matches!(discrete_infsup_diagnostic(&g, &[0.0; 16], 3.0), Err(Error::ZeroField)));

        let g2 = Grid2D::unit_square(2).unwrap();
        let checker = [1.0, -1.0, -1.0, 1.0];
        let c = discrete_infsup_diagnostic(&g2, &checker, 3.0).unwrap();
        let one = discrete_infsup_diagnostic(&g2, &[1.0; 4], 3.0).unwrap();
        assert!(c > 0.0 && c.is_finite() && one > 0.0);
    }

    #[test]
    fn single_face_probe_matches_direct_evaluation() {
        let g = Grid2D::unit_square(3).unwrap();
        let q: Vec<f64> = (0..9).map(|k| (k as f64).cos()).collect();
        let best = discrete_infsup_diagnostic(&g, &q, 3.0).unwrap();
        for f in 0..g.n_faces() {
            let mut v = vec![0.0; g.n_faces()];
            v[f] = 1.0;
            let d = g.div(&v);
            let num: f64 = d.iter().zip(&q).map(|(d, q)| g.cell_area() * d * q).sum();
            let den = face_norm(&g, &v, 3.0) + cell_norm(&g, &d, 3.0);
            assert!(num.abs() / den <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn slope_fit() {
        let rows: Vec<DependenceRow> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&d: &f64| DependenceRow { delta: d, big_delta: 3.0 * d.sqrt() })
            .collect();
        assert!((loglog_slope(&rows).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&rows[..1]), None);
    }

    #[test]
    fn zero_perturbation_and_precondition() {
        let g = Grid2D::unit_square(4).unwrap();
        let (data, _) = manufactured_case("M1", g).unwrap();
        let cfg = SolverConfig::default();
        let t =
            dependence_experiment(&data, &Perturbation::Source(vec![0.0; 16]), &[1e-1, 1e-2], &cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.big_delta == 0.0));
        assert_eq!(t.slope, None);

        let (m0, _) = manufactured_case("M0", g).unwrap();
        let p = Perturbation::Source(vec![1.0; 16]);
        assert!(matches!(dependence_experiment(&m0, &p, &[0.1], &cfg), Err(Error::Precondition(_))));
        let bad = Perturbation::Boundary(vec![1.0; 3]);
        assert!(dependence_experiment(&data, &bad, &[0.1], &cfg).is_err());
    }

    #[test]
    fn source_perturbation_slope() {
        let g = Grid2D::unit_square(6).unwrap();
        let (data, _) = manufactured_case("M1", g).unwrap();
        let shape: Vec<f64> = (0..g.n_cells()).map(|c| 1.0 + (c % 3) as f64).collect();
        let t = dependence_experiment(
            &data,
            &Perturbation::Source(shape),
            &[1e-1, 1e-2, 1e-3],
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(t.slope.unwrap() >= 0.4);
        assert!(t.rows.windows(2).all(|w| w[1].big_delta < w[0].big_delta));
    }
}
