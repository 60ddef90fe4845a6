//! PAM mother constellation.
//!
//! Every dimension holds the same amplitude multiset `{±a_1, …, ±a_{M/2}}`
//! with `a_m = m(δ−1) + (2−δ)`. Odd dimensions list the points in ascending
//! order; even dimensions interleave them so that neighbouring points in one
//! dimension are far apart in the next.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MotherConstellation {
    rows: Vec<Vec<f64>>,
    delta: f64,
    m_order: usize,
}

/// Amplitude `a_m` for `m = 1..=M/2`.
pub fn amplitude(m: usize, delta: f64) -> f64 {
    m as f64 * (delta - 1.0) + (2.0 - delta)
}

fn check_params(m_order: usize, delta: f64) -> Result<()> {
    if m_order < 2 || !m_order.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "codebook size M={m_order} must be even and >= 2"
        )));
    }
    if !delta.is_finite() || delta < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "amplitude parameter delta={delta} must be >= 1"
        )));
    }
    Ok(())
}

/// Builds the `n_dims × m_order` PAM mother constellation.
pub fn build_mother_constellation(
    m_order: usize,
    n_dims: usize,
    delta: f64,
) -> Result<MotherConstellation> {
    check_params(m_order, delta)?;
    if n_dims == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let half = m_order / 2;
    let a: Vec<f64> = (1..=half).map(|m| amplitude(m, delta)).collect();

    let ascending: Vec<f64> = a
        .iter()
        .rev()
        .map(|&x| -x)
        .chain(a.iter().copied())
        .collect();
    // [-a_1, a_{M/2}, -a_2, a_{M/2-1}, ..., -a_{M/2}, a_1]
    let interleaved: Vec<f64> = (0..half).flat_map(|i| [-a[i], a[half - 1 - i]]).collect();

    let rows = (1..=n_dims)
        .map(|n| {
            if n % 2 == 1 {
                ascending.clone()
            } else {
                interleaved.clone()
            }
        })
        .collect();
    Ok(MotherConstellation {
        rows,
        delta,
        m_order,
    })
}

/// Energy of one dimension of the constellation, `Σ_m |A_n[m]|²`.
pub fn dimension_energy(m_order: usize, delta: f64) -> Result<f64> {
    check_params(m_order, delta)?;
    let m = m_order as f64;
    let d1 = delta - 1.0;
    Ok(m * (2.0 - delta) * (1.0 + m / 2.0 * delta - m / 2.0)
        + m * (m + 2.0) * (m + 1.0) * d1 * d1 / 12.0)
}

impl MotherConstellation {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn m_order(&self) -> usize {
        self.m_order
    }

    pub fn n_dims(&self) -> usize {
        self.rows.len()
    }

    pub fn energy(&self) -> f64 {
        dimension_energy(self.m_order, self.delta).expect("validated at construction")
    }
}
