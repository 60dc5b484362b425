//! Contour dynamics for the two-layer quasi-geostrophic model.

pub mod bessel;
pub mod cli;
pub mod contour;
pub mod dynamics;
pub mod kernels;
pub mod quadrature;
pub mod spectrum;
