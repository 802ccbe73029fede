//! Diagonal Hadamard coefficients, flat-space closed forms and residues.

pub mod flat;
pub mod mellin;
pub mod transport;

pub use flat::{
    constant_shift_density, continuum_zeta_density, flat_f_alpha_diag, flat_f_alpha_quadrature, mellin_gamma_factor, mellin_gamma_factor_product,
    residue_estimate, residue_normalizations, residue_prediction, ResidueEstimate, ResidueNormalizations, Shift,
};
pub use mellin::{h_scaling_fit, scaled_flat_samples, schwartz_function_of_power, vertical_line, MellinResult, ScalingFit, SchwartzProfile};
pub use transport::{
    apply_p, transport_field, transport_u0, transport_u1_origin, transport_uk, Field, StencilOptions, TransportContext, TransportOptions,
    TransportState, U1Report,
};
