//! Monte Carlo bit error rate of the downlink.
//!
//! Each trial drops `J` users uniformly over the cell, hands the
//! highest-power codebook to the farthest user, and sends one random
//! codeword per layer. Every user sees the superposition through its own
//! path loss and per-node Rician fading, detects all layers jointly and
//! keeps only its own bits. Results are indexed by distance rank
//! (1 = nearest).
//!
//! Trials run in fixed-size batches, each drawn from its own ChaCha stream
//! keyed by `(snr point, batch)`, so results do not depend on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::n0_from_snr_db;
use crate::codebook::CodebookSet;
use crate::detection::{
    ml_detect, superimpose, MpaDetector, ReceivedSignal, DEFAULT_MPA_ITERATIONS,
};
use crate::geometry::{
    pathloss_factor, sample_complex_gaussian, sample_rician, CellGeometry, UserPlacement,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Mpa,
    Ml,
}

/// How user distances are produced.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum PositionMode {
    /// Fresh uniform drop for every codeword.
    PerTrial,
    /// Fixed distance ratios, one per user.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub kappa: f64,
    pub geometry: CellGeometry,
    pub snr_grid_db: Vec<f64>,
    /// Cap on transmitted codewords per SNR point.
    pub max_symbols: u64,
    /// Stop a point once every user has at least this many bit errors.
    pub target_errors: u64,
    pub detector: Detector,
    pub iterations: usize,
    pub seed: u64,
    pub positions: PositionMode,
    /// Trials per random stream.
    pub batch_size: u64,
    /// Batches evaluated between stopping checks.
    pub batches_per_round: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            kappa: 10.0,
            geometry: CellGeometry::default(),
            snr_grid_db: (0..=9).map(|i| 2.0 * i as f64).collect(),
            max_symbols: 1_000_000,
            target_errors: 100,
            detector: Detector::Mpa,
            iterations: DEFAULT_MPA_ITERATIONS,
            seed: 1,
            positions: PositionMode::PerTrial,
            batch_size: 1000,
            batches_per_round: 8,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, j: usize) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa={} must be >= 0",
                self.kappa
            )));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "SNR grid must be non-empty and sorted".into(),
            ));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("SNR grid must be finite".into()));
        }
        if self.max_symbols == 0 || self.batch_size == 0 || self.batches_per_round == 0 {
            return Err(Error::InvalidParameter(
                "symbol and batch counts must be positive".into(),
            ));
        }
        if self.detector == Detector::Mpa && self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "MPA needs at least one iteration".into(),
            ));
        }
        if let PositionMode::Fixed(d) = &self.positions {
            if d.len() != j {
                return Err(Error::DimensionMismatch(format!(
                    "{} fixed distances for {j} users",
                    d.len()
                )));
            }
            if d.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidParameter(
                    "fixed distance ratios must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Bit error counts of one user at one SNR point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ErrorCount {
    pub bits: u64,
    pub errors: u64,
}

impl ErrorCount {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// 95% Wilson score interval of the BER.
    pub fn confidence_interval(&self) -> (f64, f64) {
        wilson_interval(self.errors, self.bits, 1.959_963_984_540_054)
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub symbols: u64,
    /// Indexed by rank − 1.
    pub per_user: Vec<ErrorCount>,
}

impl BerPoint {
    pub fn average(&self) -> f64 {
        self.per_user.iter().map(ErrorCount::ber).sum::<f64>() / self.per_user.len() as f64
    }

    pub fn worst(&self) -> f64 {
        self.per_user
            .iter()
            .map(ErrorCount::ber)
            .fold(0.0, f64::max)
    }

    /// 1-based rank of the worst user.
    pub fn worst_rank(&self) -> usize {
        self.per_user
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.ber().total_cmp(&b.1.ber()))
            .map_or(0, |(i, _)| i + 1)
    }
}

/// One CSV row: `snr_db,user_rank,bits,errors,ber,ber_avg,ber_worst`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BerRow {
    pub snr_db: f64,
    pub user_rank: usize,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ber_avg: f64,
    pub ber_worst: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BerResult {
    pub points: Vec<BerPoint>,
}

impl BerResult {
    pub fn rows(&self) -> Vec<BerRow> {
        self.points
            .iter()
            .flat_map(|p| {
                let (avg, worst) = (p.average(), p.worst());
                p.per_user.iter().enumerate().map(move |(i, c)| BerRow {
                    snr_db: p.snr_db,
                    user_rank: i + 1,
                    bits: c.bits,
                    errors: c.errors,
                    ber: c.ber(),
                    ber_avg: avg,
                    ber_worst: worst,
                })
            })
            .collect()
    }
}

/// Codebook index for each user: the farthest user gets the highest-power
/// codebook. Ties keep index order on both sides.
pub fn allocate_codebooks(distances: &[f64], set: &CodebookSet) -> Result<Vec<usize>> {
    let j = set.dims().j;
    if distances.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "{} distances for {j} codebooks",
            distances.len()
        )));
    }
    Ok(allocate_in_order(distances, &codebooks_by_power(set)))
}

/// Codebook indices by descending trace, ties in index order.
fn codebooks_by_power(set: &CodebookSet) -> Vec<usize> {
    let traces = set.traces();
    let scale = traces
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    // Quantised so that traces equal up to rounding count as ties.
    let keys: Vec<i64> = traces
        .iter()
        .map(|t| (t / scale * 1e9).round() as i64)
        .collect();
    let mut books: Vec<usize> = (0..traces.len()).collect();
    books.sort_by(|&a, &b| keys[b].cmp(&keys[a]));
    books
}

fn allocate_in_order(distances: &[f64], books: &[usize]) -> Vec<usize> {
    let mut users: Vec<usize> = (0..distances.len()).collect();
    users.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]));
    let mut perm = vec![0; distances.len()];
    for (u, &b) in users.into_iter().zip(books) {
        perm[u] = b;
    }
    perm
}

/// Runs one joint codeword transmission and returns `(bits, errors)`
/// contributions per rank.
pub struct TrialRunner<'a> {
    set: &'a CodebookSet,
    cfg: &'a SimConfig,
    mpa: Option<MpaDetector>,
    books: Vec<usize>,
}

impl<'a> TrialRunner<'a> {
    pub fn new(set: &'a CodebookSet, cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate(set.dims().j)?;
        let mpa = (cfg.detector == Detector::Mpa).then(|| MpaDetector::new(set));
        Ok(TrialRunner {
            set,
            cfg,
            mpa,
            books: codebooks_by_power(set),
        })
    }

    /// Bit errors per rank for one transmission at noise level `n0`.
    pub fn run_trial<R: Rng + ?Sized>(&self, n0: f64, rng: &mut R) -> Result<Vec<u64>> {
        let dims = self.set.dims();
        let bps = dims.bits_per_symbol();
        let distances = match &self.cfg.positions {
            PositionMode::PerTrial => UserPlacement::sample(dims.j, rng).distance_ratios,
            PositionMode::Fixed(d) => d.clone(),
        };
        let alloc = allocate_in_order(&distances, &self.books);
        let symbols: Vec<usize> = (0..dims.j).map(|_| rng.random_range(0..dims.m)).collect();
        let x = superimpose(self.set, &symbols)?;

        let mut ranks: Vec<usize> = (0..dims.j).collect();
        ranks.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
        let mut errors = vec![0u64; dims.j];
        for (rank, &user) in ranks.iter().enumerate() {
            let amp = pathloss_factor(&self.cfg.geometry, distances[user]);
            let channel: Vec<_> = sample_rician(dims.k, self.cfg.kappa, rng)
                .into_iter()
                .map(|g| g * amp)
                .collect();
            let y = x
                .iter()
                .zip(&channel)
                .map(|(xk, h)| h * xk + sample_complex_gaussian(n0, rng))
                .collect();
            let sig = ReceivedSignal::new(y, channel, n0)?;
            let det = match &self.mpa {
                Some(mpa) => mpa.detect(&sig, self.cfg.iterations)?,
                None => ml_detect(&sig, self.set)?,
            };
            let layer = alloc[user];
            errors[rank] = (det.indices[layer] ^ symbols[layer]).count_ones() as u64;
            debug_assert!(errors[rank] <= bps as u64);
        }
        Ok(errors)
    }

    fn run_batch(&self, n0: f64, point: usize, batch: u64, trials: u64) -> Result<Vec<u64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(((point as u64) << 40) | batch);
        let mut acc = vec![0u64; self.set.dims().j];
        for _ in 0..trials {
            for (a, e) in acc.iter_mut().zip(self.run_trial(n0, &mut rng)?) {
                *a += e;
            }
        }
        Ok(acc)
    }

    /// Accumulates batches at one SNR point until the stopping rule fires.
    pub fn run_point(&self, point: usize, snr_db: f64) -> Result<BerPoint> {
        let dims = self.set.dims();
        let n0 = n0_from_snr_db(snr_db, dims.k, dims.j);
        let bps = dims.bits_per_symbol() as u64;
        let mut errors = vec![0u64; dims.j];
        let mut symbols = 0u64;
        let mut next_batch = 0u64;
        while symbols < self.cfg.max_symbols && errors.iter().any(|&e| e < self.cfg.target_errors) {
            let jobs: Vec<(u64, u64)> = (0..self.cfg.batches_per_round)
                .map_while(|i| {
                    let start = symbols + i * self.cfg.batch_size;
                    (start < self.cfg.max_symbols).then(|| {
                        (
                            next_batch + i,
                            self.cfg.batch_size.min(self.cfg.max_symbols - start),
                        )
                    })
                })
                .collect();
            let results = jobs
                .par_iter()
                .map(|&(b, n)| self.run_batch(n0, point, b, n))
                .collect::<Result<Vec<_>>>()?;
            for r in results {
                for (e, x) in errors.iter_mut().zip(r) {
                    *e += x;
                }
            }
            symbols += jobs.iter().map(|j| j.1).sum::<u64>();
            next_batch += jobs.len() as u64;
        }
        Ok(BerPoint {
            snr_db,
            symbols,
            per_user: errors
                .into_iter()
                .map(|e| ErrorCount {
                    bits: symbols * bps,
                    errors: e,
                })
                .collect(),
        })
    }
}

/// BER per rank over the configured SNR grid.
pub fn run_ber_sweep(cfg: &SimConfig, set: &CodebookSet) -> Result<BerResult> {
    let runner = TrialRunner::new(set, cfg)?;
    let points = cfg
        .snr_grid_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let p = runner.run_point(i, snr)?;
            log::info!(
                "{snr} dB: {} symbols, worst BER {:.3e}",
                p.symbols,
                p.worst()
            );
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BerResult { points })
}
