//! Certifies a cubic drag law fitted to field data and checks that the
//! verdict survives small coefficient changes.

use forchflow::certify::{certify_cor3_5, cor3_5_sides, Verdict};

fn main() {
    let (a, b, c, d) = (0.20, 1.04, 0.67, 1.15);
    let (l1, r1, l2, r2) = cor3_5_sides(a, b, c, d);
    println!("side conditions: {l1:.4} < {r1:.4} and {l2:.4} < {r2:.4}");
    let cert = certify_cor3_5(a, b, c, d);
    println!("verdict: {:?}", cert.verdict);

    let mut stable = true;
    for da in [-1e-3, 0.0, 1e-3] {
        for db in [-1e-3, 0.0, 1e-3] {
            for dc in [-1e-3, 0.0, 1e-3] {
                for dd in [-1e-3, 0.0, 1e-3] {
                    let v = certify_cor3_5(a + da, b + db, c + dc, d + dd).verdict;
                    stable &= matches!(v, Verdict::PowerMonotone { order, .. } if order == 3.0);
                }
            }
        }
    }
    println!("3-monotone under every +-1e-3 perturbation: {stable}");
}
