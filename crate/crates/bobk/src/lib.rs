//! Spectral toolkit for the Benjamin-Ono equation on the torus.
//!
//! The crate computes the spectrum of the Lax operator of a periodic
//! potential, maps potentials to action-angle (nonlinear Fourier)
//! coordinates and back, generates finite-gap potentials in closed form,
//! and evolves the equation both by exact quadrature in coordinates and by
//! a de-aliased pseudo-spectral integrator for cross-validation.

pub mod error;
pub mod evolution;
pub mod finite_gap;
pub mod fourier;
pub mod forward;
pub mod inverse;
pub mod spectrum;
pub mod validate;

pub use error::{Error, Result};
pub use evolution::{
    evolve_direct, evolve_quadrature, frequencies, hamiltonian_actions, hamiltonian_direct,
    lax_residual, recurrence_probe, Dealias, EvolutionTrace, EvolveConfig, FrequencyVector,
};
pub use finite_gap::{from_poles, from_poles_auto, one_gap_closed_form, traveling_wave_speed, FiniteGapSpec, OneGap};
pub use forward::{forward_map, kappa_weights, BirkhoffCoords, KappaWeights};
pub use fourier::{GridFunction, HardyCoeffs, Potential};
pub use inverse::{reconstruct_finite_gap, reconstruct_resolvent, SpectralData};
pub use validate::{gradient_check, poisson_bracket, symmetry_suite, Observable, ValidationReport};
pub use spectrum::{band_report, compute_spectrum, normalize_phases, Band, LaxSpectrum};
