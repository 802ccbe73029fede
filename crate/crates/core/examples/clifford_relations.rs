//! Gamma matrices in two and four dimensions, with and without a rank-2
//! twist, and positivity of the fibre form along timelike vectors.

use lorentz_zeta::clifford::{build_gamma, check_positivity};

fn main() -> lorentz_zeta::Result<()> {
    for n in [2, 4] {
        for twist_rank in [1, 2] {
            let rep = build_gamma(n, twist_rank)?;
            println!(
                "n = {n}, twist rank {twist_rank}: fibre rank {}, Clifford residual {:e}, beta residual {:e}",
                rep.rank,
                rep.clifford_residual(),
                rep.beta_residual()
            );
        }
        let rep = build_gamma(n, 1)?;
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        e[1] = 0.6;
        let pos = check_positivity(&rep, &e)?;
        println!("  i·beta·gamma(e) for e = {e:?}: positive {}, smallest eigenvalue {:.6}", pos.positive, pos.min_eigenvalue);
    }
    Ok(())
}
