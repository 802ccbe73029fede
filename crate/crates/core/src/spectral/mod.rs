//! Lattice operators, contours and complex powers.

pub mod contour;
pub mod decay;
pub mod lattice;
pub mod power;
pub mod solver;
pub mod sparse;
pub mod testmat;

pub use contour::{branch_power, default_dist_min, truncation_radius, Contour, ContourSpec, Piece};
pub use decay::{locality_profile, resolvent_decay_scan, DecayRow, LocalityProfile};
pub use lattice::{adjoint_defect, assemble, Assembly, DefectReport, GridSpec, LatticeOperator};
pub use power::{
    apply_power, certified_inverse, complex_power_dense, contour_ambiguity, flat_zeta_density, zeta_diagonal, AmbiguityReport, Provenance,
    ZetaReport, ZetaSample,
};
pub use solver::{dense_resolvent, FlatTorusPreconditioner, ShiftedSolver, Solution, SolverOptions};
pub use sparse::CsrMatrix;
pub use testmat::{strip_spectrum, PlantedMatrix};
