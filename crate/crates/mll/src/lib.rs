//! Maxwell-Landau-Lifshitz profile laboratory: algebra, spectra, transparency,
//! WKB profiles, exact and normal-form evolution, and sweep orchestration.

pub mod algebra;
pub mod error;
pub mod profile;
pub mod spectral;
pub mod transparency;
pub mod evolve;
pub mod wkb;
pub mod io;
pub mod lab;
