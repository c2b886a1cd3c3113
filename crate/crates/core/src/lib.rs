//! Numerical laboratory for complex Monge-Ampere equations, the normalized Kahler-Ricci flow
//! and Mabuchi-type energies on products of flat tori.

pub mod energy;
pub mod error;
pub mod fibration;
pub mod flow;
pub mod grid;
pub mod forms;
pub mod linalg;
pub mod ma;

pub use error::{Error, Result};
