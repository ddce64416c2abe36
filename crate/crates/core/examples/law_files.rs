//! Reads a law from TOML, round-trips it through JSON and runs the
//! command line front end on it.

use forchflow::cli::run_from;
use forchflow::constitutive::LawSpec;

fn main() -> forchflow::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/anisotropic.toml"))?;
    let spec: LawSpec = toml::from_str(&text).map_err(|e| forchflow::Error::Parse(e.to_string()))?;
    let law = spec.to_law()?;
    let json = serde_json::to_string(&LawSpec::from_law(&law)).expect("law serializes");
    let again: LawSpec = serde_json::from_str(&json).expect("valid json");
    println!("digest stable across formats: {}", again.to_law()?.digest() == law.digest());

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/gb_counterexample.toml");
    let code = run_from(["forchflow", "--quiet", "--format", "csv", "certify", path]);
    println!("certify exit code {code}");
    Ok(())
}
