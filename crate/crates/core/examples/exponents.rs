//! Derived exponents and admissibility for the two pinned parameter sets and
//! one rejected boundary case.

use choquard::model::{check_conditions, derive_exponents, ModelParams};

fn main() {
    let boundary = ModelParams { p: 2.0, ..ModelParams::reference() };
    for params in [ModelParams::reference(), ModelParams::secondary(), boundary] {
        println!("{params}");
        match derive_exponents(&params) {
            Ok(e) => println!(
                "  s_c = {:.4}  A = {:.4}  B = {:.4}  K = {:.6e}  p in ({:.4}, {:.4})",
                e.s_c, e.mass_exp, e.kinetic_exp, e.k_riesz, e.p_lower, e.p_upper
            ),
            Err(err) => println!("  {err}"),
        }
        for c in check_conditions(&params).iter().filter(|c| !c.holds) {
            println!("  violated: {} (value {})", c.condition, c.value);
        }
    }
}
