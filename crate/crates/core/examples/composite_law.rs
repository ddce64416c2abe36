//! Builds a Darcy term plus anisotropic cubic drag, lists every certificate
//! and attaches the certified growth metadata.

use forchflow::certify::{certify_all, certify_and_attach};
use forchflow::constitutive::LawSpec;
use forchflow::{ConstitutiveLaw, MatN, PowerTerm, TrilinearForm};

fn main() -> forchflow::Result<()> {
    let darcy = PowerTerm::plain(MatN::from_array([[2.0, 0.3], [0.3, 1.0]]), 0.0)?;
    let drag = TrilinearForm::diagonal_2d(0.20, 1.04, 0.67, 1.15)?;
    let law = ConstitutiveLaw::new(vec![darcy], Some(drag))?;

    for c in certify_all(&law) {
        println!("{:?}: {:?}", c.theorem, c.verdict);
    }
    let (cert, law) = certify_and_attach(law);
    println!("composite: {:?}", cert.verdict);
    if let Some(m) = law.metadata() {
        println!("s = {}, r = {:.4}, c1 = {:?}, c2 = {:?}", m.s, m.r(), m.c1, m.c2);
    }
    println!("{}", toml::to_string(&LawSpec::from_law(&law)).expect("law serializes"));
    println!("digest {}", law.digest());
    Ok(())
}
