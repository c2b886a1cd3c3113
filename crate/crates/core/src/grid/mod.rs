//! Periodic charts, sampled fields, spectral calculus and the elliptic linear kernel.

mod chart;
mod elliptic;
mod field;
mod krylov;
mod quadrature;
mod spectral;

pub use chart::TorusChart;
pub use elliptic::{poisson_solve, EllipticOperator, LinearSolution};
pub use field::{BlockField, FormRepr, HermitianFormField, ScalarField, VolumeDensity};
pub use krylov::{gmres, GmresOptions, GmresStats};
pub use quadrature::{dot, integrate, integrate_weighted, pairwise_sum};
pub use spectral::{ddbar, dz};
