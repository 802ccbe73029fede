//! Two contours that differ by a circle around a planted Jordan block give
//! powers differing by a rank-2 operator.

use lorentz_zeta::special::C64;
use lorentz_zeta::spectral::{contour_ambiguity, strip_spectrum, Contour, ContourSpec, PlantedMatrix};

fn main() -> lorentz_zeta::Result<()> {
    let lambda = C64::new(1.0, 4.0);
    let mut blocks: Vec<(C64, usize)> = strip_spectrum(30, 3.0, 0.5, 4).into_iter().map(|l| (l, 1)).collect();
    blocks.push((lambda, 2));
    let planted = PlantedMatrix::with_blocks(blocks, 0.3, 5)?;
    let a = Contour::build(&ContourSpec::default(), 5.0, (0.5, 0.5))?;
    let mut b = a.clone();
    b.enclose(lambda, 0.3)?;
    let alpha = C64::new(0.5, 0.0);
    let report = contour_ambiguity(&planted.matrix, &a, &b, alpha)?;
    let oracle = planted.power_component(lambda, 1.0, alpha);
    println!("rank {} (enclosed multiplicity 2)", report.rank);
    println!("leading singular values {:?}", &report.singular_values[..4]);
    println!("difference vs (lambda - i)^-alpha times the spectral part: {:.2e}", (&report.difference - &oracle).norm() / oracle.norm());
    Ok(())
}
