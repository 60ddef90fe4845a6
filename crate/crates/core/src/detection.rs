//! Joint multiuser detection at one receiver.
//!
//! All layers reach a downlink receiver through the same per-node channel,
//! so the observation on node `k` is `y_k = h_k Σ_{l∈Φ_k} x_l[k] + n_k`.
//! [`ml_detect`] searches all `M^J` hypotheses; [`MpaDetector`] runs max-log
//! message passing on the factor graph, working with costs
//! (negative log-likelihoods) throughout.

use crate::codebook::CodebookSet;
use crate::{Complex, Error, Result};

/// Upper bound on the number of joint hypotheses [`ml_detect`] will search.
pub const ML_MAX_HYPOTHESES: u128 = 17_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    pub y: Vec<Complex>,
    pub channel: Vec<Complex>,
    pub n0: f64,
}

impl ReceivedSignal {
    pub fn new(y: Vec<Complex>, channel: Vec<Complex>, n0: f64) -> Result<Self> {
        if y.len() != channel.len() {
            return Err(Error::DimensionMismatch(format!(
                "y has {} entries, channel has {}",
                y.len(),
                channel.len()
            )));
        }
        if !(n0 > 0.0) {
            return Err(Error::InvalidParameter(format!("N0={n0} must be positive")));
        }
        Ok(ReceivedSignal { y, channel, n0 })
    }

    /// Noise-free observation of a joint codeword tuple.
    pub fn noiseless(
        set: &CodebookSet,
        indices: &[usize],
        channel: Vec<Complex>,
        n0: f64,
    ) -> Result<Self> {
        let y = superimpose(set, indices)?
            .iter()
            .zip(&channel)
            .map(|(x, h)| x * h)
            .collect();
        Self::new(y, channel, n0)
    }
}

/// `Σ_l x_l(m_l)` over all layers.
pub fn superimpose(set: &CodebookSet, indices: &[usize]) -> Result<Vec<Complex>> {
    let dims = set.dims();
    if indices.len() != dims.j || indices.iter().any(|&m| m >= dims.m) {
        return Err(Error::DimensionMismatch(format!(
            "need {} codeword indices below {}",
            dims.j, dims.m
        )));
    }
    let mut out = vec![Complex::new(0.0, 0.0); dims.k];
    for (cb, &m) in set.codebooks().iter().zip(indices) {
        for (o, x) in out.iter_mut().zip(cb.codeword(m)) {
            *o += x;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionResult {
    pub indices: Vec<usize>,
    /// `J·log2(M)` hard bits, user-major, most significant bit first.
    pub bits: Vec<u8>,
}

impl DetectionResult {
    fn from_indices(indices: Vec<usize>, bits_per_symbol: usize) -> Self {
        let bits = indices
            .iter()
            .flat_map(|&m| index_to_bits(m, bits_per_symbol))
            .collect();
        DetectionResult { indices, bits }
    }

    pub fn user_bits(&self, user: usize, bits_per_symbol: usize) -> &[u8] {
        &self.bits[user * bits_per_symbol..(user + 1) * bits_per_symbol]
    }
}

/// Natural binary labelling, most significant bit first.
pub fn index_to_bits(m: usize, bits_per_symbol: usize) -> Vec<u8> {
    (0..bits_per_symbol)
        .rev()
        .map(|b| (m >> b & 1) as u8)
        .collect()
}

pub fn count_bit_errors(tx: &[u8], rx: &[u8]) -> Result<usize> {
    if tx.len() != rx.len() {
        return Err(Error::DimensionMismatch(format!(
            "bit vectors of length {} and {}",
            tx.len(),
            rx.len()
        )));
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count())
}

fn check_signal(sig: &ReceivedSignal, set: &CodebookSet) -> Result<()> {
    if sig.y.len() != set.dims().k {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} nodes, codebooks have K={}",
            sig.y.len(),
            set.dims().k
        )));
    }
    Ok(())
}

/// Exhaustive joint ML detection. Ties go to the lowest joint index, with
/// layer 0 as the most significant digit.
pub fn ml_detect(sig: &ReceivedSignal, set: &CodebookSet) -> Result<DetectionResult> {
    check_signal(sig, set)?;
    let dims = set.dims();
    let hypotheses = (dims.m as u128)
        .checked_pow(dims.j as u32)
        .unwrap_or(u128::MAX);
    if hypotheses > ML_MAX_HYPOTHESES {
        return Err(Error::TooLarge(hypotheses));
    }
    // channel-weighted codewords, only on occupied rows
    let weighted: Vec<Vec<Vec<(usize, Complex)>>> = set
        .codebooks()
        .iter()
        .map(|cb| {
            let rows: Vec<usize> = cb.support().rows().collect();
            (0..dims.m)
                .map(|m| {
                    rows.iter()
                        .map(|&r| (r, sig.channel[r] * cb.entry(r, m)))
                        .collect()
                })
                .collect()
        })
        .collect();

    struct Search<'a> {
        weighted: &'a [Vec<Vec<(usize, Complex)>>],
        y: &'a [Complex],
        current: Vec<usize>,
        best: Vec<usize>,
        best_metric: f64,
    }
    impl Search<'_> {
        fn walk(&mut self, layer: usize, residual: &mut [Complex]) {
            if layer == self.weighted.len() {
                let metric: f64 = residual.iter().map(Complex::norm_sqr).sum();
                if metric < self.best_metric {
                    self.best_metric = metric;
                    self.best.copy_from_slice(&self.current);
                }
                return;
            }
            for m in 0..self.weighted[layer].len() {
                for &(r, v) in &self.weighted[layer][m] {
                    residual[r] -= v;
                }
                self.current[layer] = m;
                self.walk(layer + 1, residual);
                for &(r, v) in &self.weighted[layer][m] {
                    residual[r] += v;
                }
            }
        }
    }

    let mut search = Search {
        weighted: &weighted,
        y: &sig.y,
        current: vec![0; dims.j],
        best: vec![0; dims.j],
        best_metric: f64::INFINITY,
    };
    let mut residual = search.y.to_vec();
    search.walk(0, &mut residual);
    Ok(DetectionResult::from_indices(
        search.best,
        dims.bits_per_symbol(),
    ))
}

/// Per-node tables for message passing.
struct NodeTable {
    users: Vec<usize>,
    /// Superposition `Σ_{u∈Φ_k} x_u[k](m_u)` for every combination, with the
    /// first user as the most significant digit.
    sums: Vec<Complex>,
    /// Codeword of each slot for every combination, row-major.
    digits: Vec<usize>,
}

/// Max-log message passing detector bound to one codebook set.
pub struct MpaDetector {
    k: usize,
    j: usize,
    m: usize,
    bits_per_symbol: usize,
    nodes: Vec<NodeTable>,
    /// Nodes occupied by each user.
    user_nodes: Vec<Vec<usize>>,
    /// `(node, slot)` pairs of each user.
    user_slots: Vec<Vec<(usize, usize)>>,
    /// `x_u[k](m)` for single-user demapping.
    entries: Vec<Vec<Vec<Complex>>>,
}

pub const DEFAULT_MPA_ITERATIONS: usize = 8;

impl MpaDetector {
    pub fn new(set: &CodebookSet) -> Self {
        let dims = set.dims();
        let users_per_node = set.users_per_node();
        let nodes = users_per_node
            .into_iter()
            .enumerate()
            .map(|(k, users)| {
                let combos = dims.m.pow(users.len() as u32);
                let sums = (0..combos)
                    .map(|c| {
                        digits(c, dims.m, users.len())
                            .zip(&users)
                            .map(|(m, &u)| set.codebook(u).entry(k, m))
                            .sum()
                    })
                    .collect();
                let digits = (0..combos)
                    .flat_map(|c| digits(c, dims.m, users.len()))
                    .collect();
                NodeTable {
                    users,
                    sums,
                    digits,
                }
            })
            .collect::<Vec<NodeTable>>();
        let user_slots = (0..dims.j)
            .map(|u| {
                nodes
                    .iter()
                    .enumerate()
                    .filter_map(|(k, n)| n.users.iter().position(|&x| x == u).map(|s| (k, s)))
                    .collect()
            })
            .collect();
        let entries = set
            .codebooks()
            .iter()
            .map(|cb| {
                (0..dims.k)
                    .map(|k| (0..dims.m).map(|m| cb.entry(k, m)).collect())
                    .collect()
            })
            .collect();
        MpaDetector {
            k: dims.k,
            j: dims.j,
            m: dims.m,
            bits_per_symbol: dims.bits_per_symbol(),
            nodes,
            user_nodes: set.nodes_per_user(),
            user_slots,
            entries,
        }
    }

    /// Runs `iterations` rounds of node and user updates. With zero rounds
    /// each user is demapped on its own, ignoring interference.
    pub fn detect(&self, sig: &ReceivedSignal, iterations: usize) -> Result<DetectionResult> {
        if sig.y.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "signal has {} nodes, detector expects {}",
                sig.y.len(),
                self.k
            )));
        }
        let inv_n0 = 1.0 / sig.n0;
        let m = self.m;

        if iterations == 0 {
            let indices = (0..self.j)
                .map(|u| {
                    let cost: Vec<f64> = (0..m)
                        .map(|cw| {
                            self.user_nodes[u]
                                .iter()
                                .map(|&k| {
                                    (sig.y[k] - sig.channel[k] * self.entries[u][k][cw]).norm_sqr()
                                        * inv_n0
                                })
                                .sum()
                        })
                        .collect();
                    argmin(&cost)
                })
                .collect();
            return Ok(DetectionResult::from_indices(indices, self.bits_per_symbol));
        }

        // channel cost of every combination on every node
        let residual: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, node)| {
                node.sums
                    .iter()
                    .map(|s| (sig.y[k] - sig.channel[k] * s).norm_sqr() * inv_n0)
                    .collect()
            })
            .collect();

        // user->node and node->user messages, indexed [node][slot][codeword]
        let mut to_node: Vec<Vec<Vec<f64>>> = self
            .nodes
            .iter()
            .map(|n| vec![vec![0.0; m]; n.users.len()])
            .collect();
        let mut to_user = to_node.clone();

        for _ in 0..iterations {
            for (k, node) in self.nodes.iter().enumerate() {
                let d = node.users.len();
                let incoming = &to_node[k];
                let out = &mut to_user[k];
                for msg in out.iter_mut() {
                    msg.fill(f64::INFINITY);
                }
                for (&r, combo) in residual[k].iter().zip(node.digits.chunks_exact(d.max(1))) {
                    let mut total = r;
                    for (slot, &cw) in combo.iter().enumerate() {
                        total += incoming[slot][cw];
                    }
                    for (slot, &cw) in combo.iter().enumerate() {
                        let v = total - incoming[slot][cw];
                        if v < out[slot][cw] {
                            out[slot][cw] = v;
                        }
                    }
                }
            }
            for slots in &self.user_slots {
                for &(k, slot) in slots {
                    let msg = &mut to_node[k][slot];
                    msg.fill(0.0);
                    for &(k2, s2) in slots {
                        if k2 == k {
                            continue;
                        }
                        for (v, x) in msg.iter_mut().zip(&to_user[k2][s2]) {
                            *v += x;
                        }
                    }
                    let floor = msg.iter().copied().fold(f64::INFINITY, f64::min);
                    if floor.is_finite() {
                        msg.iter_mut().for_each(|v| *v -= floor);
                    }
                }
            }
        }

        let indices = self
            .user_slots
            .iter()
            .map(|slots| {
                let mut belief = vec![0.0; m];
                for &(k, slot) in slots {
                    for (b, x) in belief.iter_mut().zip(&to_user[k][slot]) {
                        *b += x;
                    }
                }
                argmin(&belief)
            })
            .collect();
        Ok(DetectionResult::from_indices(indices, self.bits_per_symbol))
    }
}

pub fn mpa_detect(
    sig: &ReceivedSignal,
    set: &CodebookSet,
    iterations: usize,
) -> Result<DetectionResult> {
    check_signal(sig, set)?;
    MpaDetector::new(set).detect(sig, iterations)
}

/// Mixed-radix digits of `c`, most significant first.
fn digits(c: usize, base: usize, len: usize) -> impl Iterator<Item = usize> {
    (0..len).rev().map(move |i| c / base.pow(i as u32) % base)
}

/// Lowest index within a relative `1e-9` of the minimum, so that max-log
/// ties do not depend on rounding.
fn argmin(v: &[f64]) -> usize {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + min.abs());
    v.iter().position(|&x| x <= min + tol).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_codebook_set, Codebook, Provenance};
    use crate::constellation::build_mother_constellation;
    use crate::geometry::{sample_complex_gaussian, sample_rician};
    use crate::layering::{assign_layers_and_power, ConstellationOperator};
    use crate::SystemDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set_4x6() -> CodebookSet {
        let dims = SystemDims::new(4, 6, 4, 2).unwrap();
        let ops: Vec<_> = [(0.5, 0.0), (0.75, 1.0), (1.0, 2.1)]
            .iter()
            .map(|&(r, t)| ConstellationOperator::new(r, t).unwrap())
            .collect();
        let sig = assign_layers_and_power(&ops, dims).unwrap();
        build_codebook_set(&build_mother_constellation(4, 2, 2.0).unwrap(), &sig).unwrap()
    }

    #[test]
    fn bit_helpers() {
        assert_eq!(index_to_bits(2, 2), vec![1, 0]);
        assert_eq!(count_bit_errors(&[0, 1], &[0, 1]).unwrap(), 0);
        assert_eq!(count_bit_errors(&[0, 0], &[1, 1]).unwrap(), 2);
        assert_eq!(count_bit_errors(&[0, 0], &[0, 1]).unwrap(), 1);
        assert!(count_bit_errors(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn noiseless_recovery() {
        let set = set_4x6();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let det = MpaDetector::new(&set);
        for _ in 0..50 {
            let tx: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
            let h = sample_rician(4, 2.0, &mut rng);
            let sig = ReceivedSignal::noiseless(&set, &tx, h, 1e-3).unwrap();
            assert_eq!(ml_detect(&sig, &set).unwrap().indices, tx);
            assert_eq!(det.detect(&sig, 8).unwrap().indices, tx);
        }
    }

    #[test]
    fn ml_tie_break_is_lowest_index() {
        let set = set_4x6();
        let sig = ReceivedSignal::new(
            vec![Complex::new(0.0, 0.0); 4],
            vec![Complex::new(0.0, 0.0); 4],
            1.0,
        )
        .unwrap();
        assert_eq!(ml_detect(&sig, &set).unwrap().indices, vec![0; 6]);
    }

    #[test]
    fn ml_guard() {
        let cb = Codebook::new(
            0,
            (0..4).map(|m| vec![Complex::new(m as f64, 0.0)]).collect(),
        )
        .unwrap();
        let set = CodebookSet::from_codebooks(vec![cb; 13], Provenance::default()).unwrap();
        let sig = ReceivedSignal::new(
            vec![Complex::new(0.0, 0.0)],
            vec![Complex::new(1.0, 0.0)],
            1.0,
        )
        .unwrap();
        assert!(matches!(ml_detect(&sig, &set), Err(Error::TooLarge(_))));
    }

    #[test]
    fn single_user_mpa_equals_ml() {
        let dims = SystemDims::new(2, 1, 4, 2).unwrap();
        let sig_mat =
            assign_layers_and_power(&[ConstellationOperator::new(1.0, 0.4).unwrap()], dims)
                .unwrap();
        let set =
            build_codebook_set(&build_mother_constellation(4, 2, 1.7).unwrap(), &sig_mat).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let y: Vec<Complex> = (0..2)
                .map(|_| sample_complex_gaussian(2.0, &mut rng))
                .collect();
            let h = sample_rician(2, 1.0, &mut rng);
            let sig = ReceivedSignal::new(y, h, 0.7).unwrap();
            assert_eq!(
                mpa_detect(&sig, &set, 3).unwrap(),
                ml_detect(&sig, &set).unwrap()
            );
        }
    }

    #[test]
    fn zero_iterations_is_single_user_demapping() {
        let set = set_4x6();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let det = MpaDetector::new(&set);
        let y: Vec<Complex> = (0..4)
            .map(|_| sample_complex_gaussian(1.0, &mut rng))
            .collect();
        let h = sample_rician(4, 3.0, &mut rng);
        let sig = ReceivedSignal::new(y.clone(), h.clone(), 0.2).unwrap();
        let got = det.detect(&sig, 0).unwrap();
        for u in 0..6 {
            let cb = set.codebook(u);
            let rows: Vec<usize> = cb.support().rows().collect();
            let cost = |m: usize| -> f64 {
                rows.iter()
                    .map(|&k| (y[k] - h[k] * cb.entry(k, m)).norm_sqr())
                    .sum()
            };
            let best = (0..4).min_by(|&a, &b| cost(a).total_cmp(&cost(b))).unwrap();
            assert_eq!(got.indices[u], best);
        }
    }

    #[test]
    fn invariant_to_common_phase_and_scale() {
        let set = set_4x6();
        let det = MpaDetector::new(&set);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let tx: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
            let h = sample_rician(4, 1.0, &mut rng);
            let n0 = 0.3;
            let mut sig = ReceivedSignal::noiseless(&set, &tx, h, n0).unwrap();
            for y in sig.y.iter_mut() {
                *y += sample_complex_gaussian(n0, &mut rng);
            }
            let base = det.detect(&sig, 8).unwrap();
            let rot = Complex::from_polar(1.0, 0.9);
            let rotated = ReceivedSignal {
                y: sig.y.iter().map(|v| v * rot).collect(),
                channel: sig.channel.iter().map(|v| v * rot).collect(),
                n0,
            };
            assert_eq!(det.detect(&rotated, 8).unwrap(), base);
            let a = 3.7;
            let scaled = ReceivedSignal {
                y: sig.y.iter().map(|v| v * a).collect(),
                channel: sig.channel.iter().map(|v| v * a).collect(),
                n0: n0 * a * a,
            };
            assert_eq!(det.detect(&scaled, 8).unwrap(), base);
        }
    }
}
