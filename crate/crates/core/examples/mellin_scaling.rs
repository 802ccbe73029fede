//! tr f(h²(P₀ + iε)) through the Mellin–Barnes integral: the slope of
//! log|tr| against log h, and the leading coefficient.

use lorentz_zeta::hadamard::{h_scaling_fit, SchwartzProfile};

fn main() -> lorentz_zeta::Result<()> {
    let profile = SchwartzProfile::default();
    for (n, rank) in [(2, 2), (4, 4)] {
        let c = n as f64 / 2.0 + 0.5;
        let fit = h_scaling_fit(n, rank, 0.1, &profile, c, &[0.5, 0.25, 0.125])?;
        println!("n = {n}: slope {:.4}, h^n tr at smallest h {:.6}, predicted {:.6}", fit.slope, fit.observed_leading, fit.predicted_leading);
    }
    Ok(())
}
