//! Pairwise error probability and union-bound bit error probability.
//!
//! The Q-function is replaced by `Q(x) ≈ e^{−x²/2}/12 + e^{−2x²/3}/4`, which
//! turns the fading average into products of the Rician moment generating
//! function over resource nodes. The per-user bound sums the PEP of every
//! joint hypothesis in which that user's codeword is wrong, weighted by its
//! bit errors.
//!
//! SNR convention: with total power `J` per codeword use spread over `K`
//! nodes, `SNR = J / (K·N0)`, i.e. `N0 = J / (K·10^{SNR_dB/10})`.

use rayon::prelude::*;

use crate::codebook::CodebookSet;
use crate::geometry::{expected_distance_ratio, ordered_distance_pdf, CellGeometry};
use crate::{Complex, Error, Result};

/// `(1/12)e^{−x²/2} + (1/4)e^{−2x²/3}`.
pub fn q_approx(x: f64) -> f64 {
    let x2 = x * x;
    (-x2 / 2.0).exp() / 12.0 + (-2.0 * x2 / 3.0).exp() / 4.0
}

/// `E[e^{−s|g|²}]` for a unit-power Rician gain.
pub fn rician_mgf(s: f64, kappa: f64) -> f64 {
    let d = 1.0 + kappa + s;
    (1.0 + kappa) / d * (-kappa * s / d).exp()
}

/// Noise spectral density for an SNR in dB.
pub fn n0_from_snr_db(snr_db: f64, k: usize, j: usize) -> f64 {
    j as f64 / (k as f64 * 10f64.powf(snr_db / 10.0))
}

pub fn snr_db_from_n0(n0: f64, k: usize, j: usize) -> f64 {
    10.0 * (j as f64 / (k as f64 * n0)).log10()
}

/// Number of differing bits between two codeword indices under natural
/// binary labelling.
pub fn bit_distance(a: usize, b: usize) -> u32 {
    (a ^ b).count_ones()
}

/// A transmitted joint hypothesis and one wrongly decoded alternative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorEvent {
    tx: Vec<usize>,
    rx: Vec<usize>,
    target: usize,
}

impl ErrorEvent {
    pub fn new(tx: Vec<usize>, rx: Vec<usize>, target: usize) -> Result<Self> {
        if tx.len() != rx.len() || target >= tx.len() {
            return Err(Error::DimensionMismatch(format!(
                "tx has {} users, rx has {}, target {target}",
                tx.len(),
                rx.len()
            )));
        }
        if tx[target] == rx[target] {
            return Err(Error::InvalidParameter(
                "the target user's codeword must differ".into(),
            ));
        }
        Ok(ErrorEvent { tx, rx, target })
    }

    pub fn tx(&self) -> &[usize] {
        &self.tx
    }

    pub fn rx(&self) -> &[usize] {
        &self.rx
    }

    pub fn target(&self) -> usize {
        self.target
    }
}

/// `s_k = |Σ_{l∈Φ_k} (x_l[k] − x̂_l[k])|² / (N0 (c1² + c2²)^{α/2})`.
pub fn effective_snr_terms(
    event: &ErrorEvent,
    set: &CodebookSet,
    c2: f64,
    geom: &CellGeometry,
    n0: f64,
) -> Result<Vec<f64>> {
    let dims = set.dims();
    if event.tx.len() != dims.j {
        return Err(Error::DimensionMismatch(format!(
            "event has {} users, set has {}",
            event.tx.len(),
            dims.j
        )));
    }
    if event.tx.iter().chain(&event.rx).any(|&m| m >= dims.m) {
        return Err(Error::InvalidParameter(
            "codeword index out of range".into(),
        ));
    }
    let gain = 1.0 / (n0 * geom.power_attenuation(c2));
    Ok((0..dims.k)
        .map(|k| {
            let sum: Complex = set
                .codebooks()
                .iter()
                .zip(event.tx.iter().zip(&event.rx))
                .map(|(cb, (&a, &b))| cb.entry(k, a) - cb.entry(k, b))
                .sum();
            sum.norm_sqr() * gain
        })
        .collect())
}

/// PEP from the per-node terms `s_k`.
pub fn pep_from_terms(terms: &[f64], kappa: f64) -> f64 {
    let (mut p4, mut p3) = (1.0, 1.0);
    for &s in terms {
        p4 *= rician_mgf(s / 4.0, kappa);
        p3 *= rician_mgf(s / 3.0, kappa);
    }
    p4 / 12.0 + p3 / 4.0
}

pub fn pep(
    event: &ErrorEvent,
    set: &CodebookSet,
    c2: f64,
    geom: &CellGeometry,
    kappa: f64,
    n0: f64,
) -> Result<f64> {
    Ok(pep_from_terms(
        &effective_snr_terms(event, set, c2, geom, n0)?,
        kappa,
    ))
}

/// How many users may be in error simultaneously in the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Truncation {
    Exact,
    /// At most this many users (target included) have a wrong codeword.
    MaxUsersInError(usize),
}

/// How the user's distance enters the bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DistanceModel {
    /// Substitute the mean order-statistic distance ratio.
    MeanRatio,
    /// Average the bound over the order-statistic density (Simpson's rule).
    OrderStatistic { intervals: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BepParams {
    pub geometry: CellGeometry,
    pub kappa: f64,
    pub n0: f64,
    pub truncation: Truncation,
    pub distance: DistanceModel,
}

impl BepParams {
    pub fn new(geometry: CellGeometry, kappa: f64, n0: f64) -> Self {
        BepParams {
            geometry,
            kappa,
            n0,
            truncation: Truncation::Exact,
            distance: DistanceModel::MeanRatio,
        }
    }

    pub fn with_truncation(self, truncation: Truncation) -> Self {
        BepParams { truncation, ..self }
    }

    pub fn with_distance(self, distance: DistanceModel) -> Self {
        BepParams { distance, ..self }
    }

    fn validate(&self) -> Result<()> {
        if let Truncation::MaxUsersInError(0) = self.truncation {
            return Err(Error::InvalidParameter("truncation E* must be >= 1".into()));
        }
        if !(self.n0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "N0={} must be positive",
                self.n0
            )));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa={} must be >= 0",
                self.kappa
            )));
        }
        if let DistanceModel::OrderStatistic { intervals } = self.distance {
            if intervals < 2 || intervals % 2 != 0 {
                return Err(Error::InvalidParameter(
                    "quadrature needs an even number of intervals >= 2".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Codeword differences of one user restricted to its occupied nodes.
struct DiffTable {
    rows: Vec<usize>,
    /// `(weight, difference on each occupied row)`, nonzero differences only.
    pairs: Vec<(f64, Vec<Complex>)>,
    /// Weight of the zero difference (number of `m = m'` pairs).
    zero_weight: f64,
}

fn diff_table(set: &CodebookSet, user: usize, target: bool) -> DiffTable {
    let cb = set.codebook(user);
    let rows: Vec<usize> = cb.support().rows().collect();
    let m = cb.m();
    let mut pairs = Vec::with_capacity(m * (m - 1));
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let weight = if target {
                bit_distance(a, b) as f64
            } else {
                1.0
            };
            let diff = rows
                .iter()
                .map(|&r| cb.entry(r, a) - cb.entry(r, b))
                .collect();
            pairs.push((weight, diff));
        }
    }
    DiffTable {
        rows,
        pairs,
        zero_weight: if target { 0.0 } else { m as f64 },
    }
}

/// Weighted PEP sum over all hypotheses with the target in error, for
/// each node-gain in `gains` (`1/(N0·attenuation)`).
struct Enumerator<'a> {
    others: &'a [DiffTable],
    kappa: f64,
    gains: &'a [f64],
    max_others: usize,
}

impl Enumerator<'_> {
    fn leaf(&self, acc: &[Complex], weight: f64, out: &mut [f64]) {
        let kp1 = 1.0 + self.kappa;
        for (o, &g) in out.iter_mut().zip(self.gains) {
            let (mut r4, mut e4, mut r3, mut e3) = (1.0, 0.0, 1.0, 0.0);
            for a in acc {
                let s = a.norm_sqr() * g;
                if s == 0.0 {
                    continue;
                }
                let d4 = kp1 + s / 4.0;
                let d3 = kp1 + s / 3.0;
                r4 *= kp1 / d4;
                e4 += s / 4.0 / d4;
                r3 *= kp1 / d3;
                e3 += s / 3.0 / d3;
            }
            let p = r4 * (-self.kappa * e4).exp() / 12.0 + r3 * (-self.kappa * e3).exp() / 4.0;
            *o += weight * p;
        }
    }

    fn walk(&self, idx: usize, in_error: usize, acc: &mut [Complex], weight: f64, out: &mut [f64]) {
        if idx == self.others.len() {
            self.leaf(acc, weight, out);
            return;
        }
        let table = &self.others[idx];
        self.walk(idx + 1, in_error, acc, weight * table.zero_weight, out);
        if in_error == self.max_others {
            return;
        }
        for (w, diff) in &table.pairs {
            for (&r, d) in table.rows.iter().zip(diff) {
                acc[r] += d;
            }
            self.walk(idx + 1, in_error + 1, acc, weight * w, out);
            for (&r, d) in table.rows.iter().zip(diff) {
                acc[r] -= d;
            }
        }
    }
}

/// Union bound for the layer `target` at the given node gains.
fn bound_at_gains(
    set: &CodebookSet,
    target: usize,
    kappa: f64,
    gains: &[f64],
    truncation: Truncation,
) -> Vec<f64> {
    let dims = set.dims();
    let tgt = diff_table(set, target, true);
    let others: Vec<DiffTable> = (0..dims.j)
        .filter(|&l| l != target)
        .map(|l| diff_table(set, l, false))
        .collect();
    let max_others = match truncation {
        Truncation::Exact => others.len(),
        Truncation::MaxUsersInError(e) => (e - 1).min(others.len()),
    };
    let enumerator = Enumerator {
        others: &others,
        kappa,
        gains,
        max_others,
    };
    let partials: Vec<Vec<f64>> = tgt
        .pairs
        .par_iter()
        .map(|(w, diff)| {
            let mut acc = vec![Complex::new(0.0, 0.0); dims.k];
            for (&r, d) in tgt.rows.iter().zip(diff) {
                acc[r] += d;
            }
            let mut out = vec![0.0; gains.len()];
            enumerator.walk(0, 0, &mut acc, *w, &mut out);
            out
        })
        .collect();
    let norm = (dims.m as f64).powi(dims.j as i32) * dims.bits_per_symbol() as f64;
    (0..gains.len())
        .map(|g| partials.iter().map(|p| p[g]).sum::<f64>() / norm)
        .collect()
}

/// BEP bound of layer `target` for a user at distance ratio `c2`.
pub fn user_bep_at(set: &CodebookSet, target: usize, c2: f64, params: &BepParams) -> Result<f64> {
    params.validate()?;
    if target >= set.dims().j {
        return Err(Error::InvalidParameter(format!(
            "layer {target} out of range"
        )));
    }
    let gain = 1.0 / (params.n0 * params.geometry.power_attenuation(c2));
    Ok(bound_at_gains(set, target, params.kappa, &[gain], params.truncation)[0])
}

/// BEP bound of the user with distance rank `rank` (1 = nearest), which is
/// served by layer `rank − 1` of a power-sorted set.
pub fn user_bep(rank: usize, set: &CodebookSet, params: &BepParams) -> Result<f64> {
    params.validate()?;
    let j = set.dims().j;
    match params.distance {
        DistanceModel::MeanRatio => {
            let c2 = expected_distance_ratio(rank, j)?;
            user_bep_at(set, rank - 1, c2, params)
        }
        DistanceModel::OrderStatistic { intervals } => {
            // validates rank
            expected_distance_ratio(rank, j)?;
            let h = 1.0 / intervals as f64;
            let nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
            let gains: Vec<f64> = nodes
                .iter()
                .map(|&x| 1.0 / (params.n0 * params.geometry.power_attenuation(x)))
                .collect();
            let values = bound_at_gains(set, rank - 1, params.kappa, &gains, params.truncation);
            let mut total = 0.0;
            for (i, (&x, v)) in nodes.iter().zip(values).enumerate() {
                let coeff = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                total += coeff * ordered_distance_pdf(rank, j, x)? * v;
            }
            Ok(total * h / 3.0)
        }
    }
}

/// Average and worst per-user bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SetBep {
    pub average: f64,
    pub worst: f64,
    pub per_user: Vec<f64>,
}

impl SetBep {
    /// 1-based rank of the worst user.
    pub fn worst_rank(&self) -> usize {
        self.per_user
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i + 1)
    }
}

pub fn set_bep(set: &CodebookSet, params: &BepParams) -> Result<SetBep> {
    let per_user = (1..=set.dims().j)
        .map(|rank| user_bep(rank, set, params))
        .collect::<Result<Vec<f64>>>()?;
    let average = per_user.iter().sum::<f64>() / per_user.len() as f64;
    let worst = per_user.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SetBep {
        average,
        worst,
        per_user,
    })
}

/// One row of the per-user BEP table (`snr_db,user_rank,bep`).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BepRow {
    pub snr_db: f64,
    pub user_rank: usize,
    pub bep: f64,
}

/// Per-user bounds over an SNR grid; `params.n0` is overridden per point.
pub fn bep_table(
    set: &CodebookSet,
    params: &BepParams,
    snr_grid_db: &[f64],
) -> Result<Vec<BepRow>> {
    let dims = set.dims();
    let mut rows = Vec::with_capacity(snr_grid_db.len() * dims.j);
    for &snr_db in snr_grid_db {
        let p = BepParams {
            n0: n0_from_snr_db(snr_db, dims.k, dims.j),
            ..*params
        };
        for (i, bep) in set_bep(set, &p)?.per_user.into_iter().enumerate() {
            rows.push(BepRow {
                snr_db,
                user_rank: i + 1,
                bep,
            });
        }
    }
    Ok(rows)
}
