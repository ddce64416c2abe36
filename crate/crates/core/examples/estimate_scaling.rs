//! Tracks the a priori estimate ratio while the data is scaled up.

use forchflow::solver::{manufactured_case, solve_steady, Grid2D, SolverConfig};

fn main() -> forchflow::Result<()> {
    let (problem, _) = manufactured_case("M1", Grid2D::unit_square(16)?)?;
    let cfg = SolverConfig::default();
    for k in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let r = solve_steady(&problem.scaled(k), &cfg)?;
        println!(
            "scale {k:>5}: |u| {:.4} |div u| {:.4} |p| {:.4} |f| {:.4} |psi| {:.4} ratio {:.4}",
            r.norm_u, r.norm_div_u, r.norm_p, r.norm_f, r.norm_psi, r.estimate_ratio
        );
    }
    Ok(())
}
