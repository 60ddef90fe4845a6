//! Codebook design and link-level evaluation for downlink sparse code
//! multiple access (SCMA) over Rician-faded non-terrestrial links with
//! randomly placed users.
//!
//! The crate is organised bottom-up:
//!
//! - [`constellation`]: PAM-based mother constellation and its energy.
//! - [`layering`]: factor-graph patterns and joint layer/power assignment
//!   producing a signature matrix of constellation operators.
//! - [`codebook`]: per-layer sparse codebooks, total-power normalisation and
//!   the text interchange format.
//! - [`geometry`]: cell geometry, ordered user distances, path loss and
//!   Rician channel draws.
//! - [`analysis`]: pairwise error probability and union-bound bit error
//!   probability per user.
//! - [`optimizer`]: genetic search minimising the worst-user error bound.
//! - [`detection`]: exhaustive joint ML and max-log message passing.
//! - [`simulator`]: Monte Carlo BER sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod codebook;
pub mod constellation;
pub mod detection;
mod error;
pub mod geometry;
pub mod layering;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type Complex = num_complex::Complex64;

/// Shared dimensions of an SCMA system.
///
/// `k` resource nodes, `j` layers (users), `m` codewords per codebook and
/// `n` nonzero entries per codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SystemDims {
    pub k: usize,
    pub j: usize,
    pub m: usize,
    pub n: usize,
}

impl SystemDims {
    pub fn new(k: usize, j: usize, m: usize, n: usize) -> Result<Self> {
        if k == 0 || j == 0 || n == 0 {
            return Err(Error::InvalidDims(format!(
                "K, J and N must be positive (K={k}, J={j}, N={n})"
            )));
        }
        if n > k {
            return Err(Error::InvalidDims(format!("N={n} exceeds K={k}")));
        }
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::InvalidDims(format!(
                "M={m} must be a power of two >= 2"
            )));
        }
        Ok(SystemDims { k, j, m, n })
    }

    /// Collisions per resource node for a regular factor graph, `J*N/K`,
    /// or `None` when it is not an integer.
    pub fn df(&self) -> Option<usize> {
        let slots = self.j * self.n;
        slots.is_multiple_of(self.k).then_some(slots / self.k)
    }

    /// Overloading factor `J/K`.
    pub fn overload(&self) -> f64 {
        self.j as f64 / self.k as f64
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m.trailing_zeros() as usize
    }
}
