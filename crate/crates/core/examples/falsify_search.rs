//! Randomized search for monotonicity violations, empirical power constants
//! and the blow-up of a violation under a linear regularizer.

use forchflow::falsify::{amplified_violation, empirical_power_constant, search_violation, SearchConfig};
use forchflow::{ConstitutiveLaw, MatN, TrilinearForm, VecN};

fn main() -> forchflow::Result<()> {
    let cfg = SearchConfig::default().with_seed(42);

    let cubic = ConstitutiveLaw::isotropic(2, &[1.0], &[1.0])?;
    let c = empirical_power_constant(&cubic, 3.0, &cfg)?;
    println!("|u|u: smallest sampled 3-monotonicity ratio {c:.12}");
    println!("|u|u: violation {:?}", search_violation(&cubic, &cfg)?);

    // a Darcy term I hides the G_B violation for small velocities only
    let gb = ConstitutiveLaw::gb_only(TrilinearForm::diagonal_2d(1.0, 5.0, 5.0, 1.0)?);
    let (u, v) = (VecN::from([2.0, 2.0]), VecN::from([3.0, 1.0]));
    if let Some((t, w)) = amplified_violation(&gb, &MatN::identity(2), &u, &v, 10.0)? {
        println!("I + G_B fails from t = {t:.6} on, e.g. product {:.3e}", w.value);
    }
    Ok(())
}
