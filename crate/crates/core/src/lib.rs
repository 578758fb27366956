//! Coupled three-junction flux qubits: circuit quantization in the charge
//! basis, low-energy effective Hamiltonians and Pauli coupling coefficients.

pub mod basis;
pub mod circuit;
pub mod error;
pub mod pauli;
pub mod pipeline;
pub mod spectrum;
pub mod sweep;
pub mod swt;

pub use error::{Error, Result};
