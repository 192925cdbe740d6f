//! Orlicz-space machinery: Young pairs, Luxemburg and dual norms, Walsh
//! spectra of pseudo-boolean functions and steepness profiles.

mod norms;
mod steepness;
mod walsh;
mod young;

pub use norms::{dual_norm, luxemburg_norm, modular};
pub use steepness::{steepness_profile, NonSteepExample, ProfileRow};
pub use walsh::{
    boolean_cosh_moment, boolean_cosh_moment_even_classes, boolean_mgf, parity_classes,
    walsh_transform, ParityClasses, WalshSpectrum, MAX_ENUMERATED_SUPPORT,
};
pub use young::{YoungFunction, YoungPair};
