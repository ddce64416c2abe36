//! Spot-checks the elementary power inequalities on random vectors.

use forchflow::linalg::inequalities::{evaluate, Inequality};
use forchflow::VecN;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> forchflow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for ineq in Inequality::ALL {
        let (lo, hi, _) = ineq.exponent_range();
        let hi = hi.min(4.0);
        let mut worst = f64::INFINITY;
        for _ in 0..2_000 {
            let n = if ineq.scalar_only() { 1 } else { rng.gen_range(1..=4) };
            let p = rng.gen_range(lo..hi);
            if !ineq.accepts(p) {
                continue;
            }
            let x = VecN::from((0..n).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
            let y = VecN::from((0..n).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
            let (lhs, rhs) = evaluate(ineq, &x, &y, p)?;
            worst = worst.min(rhs - lhs);
        }
        println!("{ineq:?}: smallest slack {worst:.3e}");
    }
    // the constant 1/2 is attained on antipodal pairs at p = 1
    let x = VecN::from([0.6, -0.8]);
    let y = x.scale(-1.0);
    let (_, product) = evaluate(Inequality::PowerMapMonotone, &x, &y, 1.0)?;
    println!("antipodal ratio at p = 1: {}", product / (&x - &y).norm().powi(3));
    Ok(())
}
