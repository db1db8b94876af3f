//! Numerical building blocks: quadrature, special functions, dense helpers.

pub mod blocks;
pub mod linalg;
pub mod poisson;
pub mod quad;
pub mod zeta;
