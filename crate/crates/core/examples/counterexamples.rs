//! Two laws that look harmless but are not monotone, checked by hand and by
//! the randomized falsifier.

use forchflow::falsify::{search_violation, SearchConfig};
use forchflow::{ConstitutiveLaw, MatN, PowerTerm, TrilinearForm, VecN};

fn main() -> forchflow::Result<()> {
    // cubic drag with A_1 = diag[1, 5], A_2 = diag[5, 1]
    let gb = ConstitutiveLaw::gb_only(TrilinearForm::diagonal_2d(1.0, 5.0, 5.0, 1.0)?);
    let (u, v) = (VecN::from([2.0, 2.0]), VecN::from([3.0, 1.0]));
    let product = gb.monotonicity_product(&u, &v);
    println!("G_B product at (2,2), (3,1): {product:.15} (-4/sqrt(10) = {:.15})", -4.0 / 10f64.sqrt());

    // |u| A u with a nearly singular SPD matrix
    let a = MatN::from_array([[5.0, 0.2], [0.2, 0.01]]);
    let power = ConstitutiveLaw::new(vec![PowerTerm::plain(a, 1.0)?], None)?;
    let (u, v) = (VecN::from([3.0, 5.0]), VecN::from([4.0, 1.0]));
    println!("|u|Au product at (3,5), (4,1): {:.6}", power.monotonicity_product(&u, &v));

    let cfg = SearchConfig::default().with_seed(7);
    for (name, law) in [("G_B", &gb), ("|u|Au", &power)] {
        match search_violation(law, &cfg)? {
            Some(w) => println!(
                "{name}: falsifier found u = {:?}, v = {:?}, product {:.4e}",
                w.u.as_slice(),
                w.v.as_slice(),
                w.value
            ),
            None => println!("{name}: no violation in {} samples", cfg.samples),
        }
    }
    Ok(())
}
