//! Measures how the solution moves when the source or the boundary pressure
//! is perturbed, and fits the log-log slope.

use forchflow::solver::{dependence_experiment, manufactured_case, Grid2D, Perturbation, SolverConfig};

fn main() -> forchflow::Result<()> {
    let grid = Grid2D::unit_square(16)?;
    let (problem, _) = manufactured_case("M1", grid)?;
    let cfg = SolverConfig::default();
    let scales = [1e-1, 1e-2, 1e-3, 1e-4];

    let bump: Vec<f64> = (0..grid.n_cells())
        .map(|c| {
            let (x, y) = grid.cell_center(c);
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
        })
        .collect();
    let edge: Vec<f64> = grid.boundary_faces().iter().map(|b| 1.0 + b.x * b.y).collect();

    for (name, p) in [("source", Perturbation::Source(bump)), ("boundary", Perturbation::Boundary(edge))] {
        let table = dependence_experiment(&problem, &p, &scales, &cfg)?;
        println!("{name} perturbation");
        for row in &table.rows {
            println!("  delta {:.0e}  Delta {:.6e}", row.delta, row.big_delta);
        }
        println!("  slope over the smallest decade: {:?}", table.slope);
    }
    Ok(())
}
