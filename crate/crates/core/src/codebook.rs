//! Sparse per-layer codebooks.
//!
//! A layer's codebook spreads the `N`-dimensional mother constellation onto
//! its `N` occupied resource nodes, applies that layer's constellation
//! operators and scales to unit average energy per codeword. A
//! [`CodebookSet`] then rescales all layers by one common factor so that the
//! total power is `J` (i.e. `Σ_j trace(X_jᴴ X_j) = J·M`).

use std::fmt::Write as _;
use std::path::Path;

use crate::constellation::MotherConstellation;
use crate::layering::{ConstellationOperator, LayerPattern, SignatureMatrix};
use crate::{Complex, Error, Result, SystemDims};

/// Relative tolerance on the total-power constraint.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Binary `K×N` matrix placing the `N` dense dimensions on the occupied rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingMatrix {
    n: usize,
    /// `slots[k] = Some(n)` iff row `k` is the `n`-th occupied row.
    slots: Vec<Option<usize>>,
}

pub fn mapping_matrix_from_layer(layer: &LayerPattern, n: usize) -> Result<MappingMatrix> {
    if layer.weight() != n {
        return Err(Error::DimensionMismatch(format!(
            "layer has {} ones, expected N={n}",
            layer.weight()
        )));
    }
    let mut slots = vec![None; layer.k()];
    for (dim, row) in layer.rows().enumerate() {
        slots[row] = Some(dim);
    }
    Ok(MappingMatrix { n, slots })
}

impl MappingMatrix {
    pub fn k(&self) -> usize {
        self.slots.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slot(&self, row: usize) -> Option<usize> {
        self.slots[row]
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        self.slots
            .iter()
            .map(|s| (0..self.n).map(|d| (*s == Some(d)) as u8).collect())
            .collect()
    }
}

/// `M` codewords of length `K` for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    owner: usize,
    codewords: Vec<Vec<Complex>>,
}

impl Codebook {
    pub fn new(owner: usize, codewords: Vec<Vec<Complex>>) -> Result<Self> {
        let k = codewords.first().map_or(0, Vec::len);
        if k == 0 || codewords.iter().any(|c| c.len() != k) {
            return Err(Error::DimensionMismatch(
                "codewords must share a nonzero length".into(),
            ));
        }
        Ok(Codebook { owner, codewords })
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn k(&self) -> usize {
        self.codewords[0].len()
    }

    pub fn m(&self) -> usize {
        self.codewords.len()
    }

    pub fn codeword(&self, m: usize) -> &[Complex] {
        &self.codewords[m]
    }

    pub fn codewords(&self) -> &[Vec<Complex>] {
        &self.codewords
    }

    pub fn entry(&self, row: usize, m: usize) -> Complex {
        self.codewords[m][row]
    }

    /// `trace(Xᴴ X)`, the summed energy of all codewords.
    pub fn trace(&self) -> f64 {
        self.codewords.iter().flatten().map(Complex::norm_sqr).sum()
    }

    /// Rows carrying a nonzero entry in any codeword.
    pub fn support(&self) -> LayerPattern {
        let rows: Vec<usize> = (0..self.k())
            .filter(|&r| {
                self.codewords
                    .iter()
                    .any(|c| c[r] != Complex::new(0.0, 0.0))
            })
            .collect();
        LayerPattern::from_rows(self.k(), &rows).expect("K checked by caller")
    }

    fn scaled(&self, s: f64) -> Codebook {
        Codebook {
            owner: self.owner,
            codewords: self
                .codewords
                .iter()
                .map(|c| c.iter().map(|x| x * s).collect())
                .collect(),
        }
    }
}

/// `X = sqrt(M/(N·E)) · V · diag(q_1..q_N) · A`.
pub fn build_codebook(
    mc: &MotherConstellation,
    mapping: &MappingMatrix,
    ops: &[ConstellationOperator],
    energy: f64,
) -> Result<Codebook> {
    let n = mapping.n();
    if ops.len() != n || mc.n_dims() != n {
        return Err(Error::DimensionMismatch(format!(
            "mapping has N={n}, constellation has {} rows, {} operators given",
            mc.n_dims(),
            ops.len()
        )));
    }
    if !(energy > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "energy {energy} must be positive"
        )));
    }
    let m = mc.m_order();
    let scale = (m as f64 / (n as f64 * energy)).sqrt();
    let codewords = (0..m)
        .map(|col| {
            (0..mapping.k())
                .map(|row| match mapping.slot(row) {
                    Some(dim) => ops[dim].value() * (scale * mc.row(dim)[col]),
                    None => Complex::new(0.0, 0.0),
                })
                .collect()
        })
        .collect();
    Codebook::new(0, codewords)
}

/// Parameters a set was built from, when known.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub delta: Option<f64>,
    pub operators: Vec<ConstellationOperator>,
    pub signature: Option<Vec<Vec<u8>>>,
}

/// One codebook per layer, sharing `K` and `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    dims: SystemDims,
    codebooks: Vec<Codebook>,
    provenance: Provenance,
}

impl CodebookSet {
    /// Wraps arbitrary codebooks. Supports must all have the same weight;
    /// no normalisation is applied.
    pub fn from_codebooks(codebooks: Vec<Codebook>, provenance: Provenance) -> Result<Self> {
        let first = codebooks
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty codebook set".into()))?;
        let (k, m) = (first.k(), first.m());
        if k > 64 {
            return Err(Error::InvalidDims(format!("K={k} exceeds 64")));
        }
        for (j, cb) in codebooks.iter().enumerate() {
            if cb.k() != k || cb.m() != m {
                return Err(Error::DimensionMismatch(format!(
                    "codebook {j} is {}x{}, expected {k}x{m}",
                    cb.k(),
                    cb.m()
                )));
            }
        }
        let n = first.support().weight();
        if let Some(j) = codebooks.iter().position(|cb| cb.support().weight() != n) {
            return Err(Error::DimensionMismatch(format!(
                "codebook {j} occupies {} rows, codebook 0 occupies {n}",
                codebooks[j].support().weight()
            )));
        }
        let dims = SystemDims::new(k, codebooks.len(), m, n.max(1))?;
        let codebooks = codebooks
            .into_iter()
            .enumerate()
            .map(|(j, cb)| Codebook { owner: j, ..cb })
            .collect();
        Ok(CodebookSet {
            dims,
            codebooks,
            provenance,
        })
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn codebook(&self, j: usize) -> &Codebook {
        &self.codebooks[j]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn traces(&self) -> Vec<f64> {
        self.codebooks.iter().map(Codebook::trace).collect()
    }

    pub fn total_trace(&self) -> f64 {
        self.traces().iter().sum()
    }

    /// Layers colliding on each resource node.
    pub fn users_per_node(&self) -> Vec<Vec<usize>> {
        let supports: Vec<LayerPattern> = self.codebooks.iter().map(Codebook::support).collect();
        (0..self.dims.k)
            .map(|k| {
                (0..self.dims.j)
                    .filter(|&j| supports[j].contains(k))
                    .collect()
            })
            .collect()
    }

    /// Resource nodes occupied by each layer.
    pub fn nodes_per_user(&self) -> Vec<Vec<usize>> {
        self.codebooks
            .iter()
            .map(|cb| cb.support().rows().collect())
            .collect()
    }

    /// Relative deviation of the total power from `J·M`.
    pub fn normalization_error(&self) -> f64 {
        let target = (self.dims.j * self.dims.m) as f64;
        (self.total_trace() - target).abs() / target
    }

    /// Rescales all codebooks by one factor so that `Σ trace = J·M`.
    pub fn normalize_total_power(mut self) -> Self {
        let target = (self.dims.j * self.dims.m) as f64;
        let total = self.total_trace();
        if total > 0.0 {
            let s = (target / total).sqrt();
            self.codebooks = self.codebooks.iter().map(|cb| cb.scaled(s)).collect();
        }
        self
    }

    /// Reorders layers; `order[i]` is the old index placed at position `i`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.dims.j];
        if order.len() != self.dims.j
            || order
                .iter()
                .any(|&o| o >= self.dims.j || std::mem::replace(&mut seen[o], true))
        {
            return Err(Error::InvalidParameter(format!(
                "{order:?} is not a permutation"
            )));
        }
        let codebooks = order
            .iter()
            .enumerate()
            .map(|(new, &old)| Codebook {
                owner: new,
                ..self.codebooks[old].clone()
            })
            .collect();
        Ok(CodebookSet {
            codebooks,
            provenance: Provenance {
                signature: None,
                ..self.provenance.clone()
            },
            ..*self
        })
    }
}

/// Builds all layer codebooks from a validated signature and normalises the
/// set to total power `J`.
pub fn build_codebook_set(mc: &MotherConstellation, sig: &SignatureMatrix) -> Result<CodebookSet> {
    let report = sig.validate();
    if !report.passed() {
        return Err(Error::InvalidSignature(report.issues.join("; ")));
    }
    let energy = mc.energy();
    let codebooks = (0..sig.j())
        .map(|col| {
            let pattern = sig.column_pattern(col);
            let mapping = mapping_matrix_from_layer(&pattern, mc.n_dims())?;
            let mut cb = build_codebook(mc, &mapping, &sig.column_operators(col), energy)?;
            cb.owner = col;
            Ok(cb)
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = Provenance {
        delta: Some(mc.delta()),
        operators: sig.operators().to_vec(),
        signature: Some(sig.labels()),
    };
    Ok(CodebookSet::from_codebooks(codebooks, provenance)?.normalize_total_power())
}

const MAGIC: &str = "scma-codebook-set v1";

/// Writes the text interchange format.
///
/// ```text
/// scma-codebook-set v1
/// K 4
/// J 6
/// M 4
/// N 2
/// delta 2                       (optional)
/// operator 1 <rho> <theta>      (zero or more)
/// signature                     (optional, followed by K rows of labels)
/// 1 0 2 0 0 3
/// ...
/// codebook 1
/// <re> <im> <re> <im> ...       (one codeword per line, K complex entries)
/// ...
/// end
/// ```
pub fn write_codebook_set(set: &CodebookSet) -> String {
    let d = set.dims();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "K {}\nJ {}\nM {}\nN {}", d.k, d.j, d.m, d.n);
    let prov = set.provenance();
    if let Some(delta) = prov.delta {
        let _ = writeln!(out, "delta {delta:e}");
    }
    for (i, q) in prov.operators.iter().enumerate() {
        let _ = writeln!(out, "operator {} {:e} {:e}", i + 1, q.rho, q.theta);
    }
    if let Some(sig) = &prov.signature {
        let _ = writeln!(out, "signature");
        for row in sig {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
    }
    for (j, cb) in set.codebooks().iter().enumerate() {
        let _ = writeln!(out, "codebook {}", j + 1);
        for cw in cb.codewords() {
            let cells: Vec<String> = cw
                .iter()
                .map(|x| format!("{:e} {:e}", x.re, x.im))
                .collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
    }
    let _ = writeln!(out, "end");
    out
}

pub fn export_codebook_set(set: &CodebookSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_codebook_set(set))?;
    Ok(())
}

/// A parsed set plus non-fatal findings (e.g. a baseline that is not
/// normalised to total power `J`).
#[derive(Debug, Clone)]
pub struct ImportedSet {
    pub set: CodebookSet,
    pub warnings: Vec<String>,
}

pub fn import_codebook_set(path: impl AsRef<Path>) -> Result<ImportedSet> {
    let text = std::fs::read_to_string(path)?;
    parse_codebook_set(&text)
}

pub fn parse_codebook_set(text: &str) -> Result<ImportedSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    let err = |line: usize, msg: String| Error::Parse { line, msg };

    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, l)) => return Err(err(n, format!("expected header '{MAGIC}', found '{l}'"))),
        None => return Err(err(0, "empty file".into())),
    }

    let mut header = std::collections::HashMap::new();
    let mut delta = None;
    let mut operators = Vec::new();
    let mut signature: Option<Vec<Vec<u8>>> = None;
    let mut codebooks: Vec<Vec<Vec<Complex>>> = Vec::new();
    let mut ended = false;

    while let Some((n, line)) = lines.next() {
        let mut fields = line.split_whitespace();
        let key = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        match key {
            "K" | "J" | "M" | "N" => {
                let v: usize = rest
                    .first()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| err(n, format!("bad value for {key}")))?;
                header.insert(key, v);
            }
            "delta" => {
                delta = Some(parse_f64(rest.first().copied(), n)?);
            }
            "operator" => {
                if rest.len() != 3 {
                    return Err(err(n, "operator needs index, rho and theta".into()));
                }
                let q = ConstellationOperator {
                    rho: parse_f64(Some(rest[1]), n)?,
                    theta: parse_f64(Some(rest[2]), n)?,
                };
                operators.push(q);
            }
            "signature" => {
                let k = *header
                    .get("K")
                    .ok_or_else(|| err(n, "signature before K".into()))?;
                let mut rows = Vec::with_capacity(k);
                for _ in 0..k {
                    let (rn, row) = lines
                        .next()
                        .ok_or_else(|| err(n, "truncated signature".into()))?;
                    let parsed = row
                        .split_whitespace()
                        .map(|c| c.parse::<u8>().map_err(|e| err(rn, e.to_string())))
                        .collect::<Result<Vec<u8>>>()?;
                    rows.push(parsed);
                }
                signature = Some(rows);
            }
            "codebook" => {
                let k = *header
                    .get("K")
                    .ok_or_else(|| err(n, "codebook before K".into()))?;
                let m = *header
                    .get("M")
                    .ok_or_else(|| err(n, "codebook before M".into()))?;
                let mut cws = Vec::with_capacity(m);
                for _ in 0..m {
                    let (cn, row) = lines
                        .next()
                        .ok_or_else(|| err(n, "truncated codebook".into()))?;
                    let vals = row
                        .split_whitespace()
                        .map(|v| parse_f64(Some(v), cn))
                        .collect::<Result<Vec<f64>>>()?;
                    if vals.len() != 2 * k {
                        return Err(Error::DimensionMismatch(format!(
                            "line {cn}: codeword has {} values, expected {} for K={k}",
                            vals.len(),
                            2 * k
                        )));
                    }
                    cws.push(vals.chunks(2).map(|p| Complex::new(p[0], p[1])).collect());
                }
                codebooks.push(cws);
            }
            "end" => {
                ended = true;
                break;
            }
            other => return Err(err(n, format!("unknown record '{other}'"))),
        }
    }
    if !ended {
        return Err(err(0, "missing 'end'".into()));
    }
    let get = |key: &str| {
        header
            .get(key)
            .copied()
            .ok_or_else(|| err(0, format!("missing {key}")))
    };
    let (k, j, m, n) = (get("K")?, get("J")?, get("M")?, get("N")?);
    if codebooks.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "header declares J={j}, file holds {} codebooks",
            codebooks.len()
        )));
    }
    if let Some(sig) = &signature {
        if sig.iter().any(|r| r.len() != j) {
            return Err(Error::DimensionMismatch(
                "signature rows must have J entries".into(),
            ));
        }
    }
    let codebooks = codebooks
        .into_iter()
        .enumerate()
        .map(|(owner, cws)| Codebook::new(owner, cws))
        .collect::<Result<Vec<_>>>()?;
    let set = CodebookSet::from_codebooks(
        codebooks,
        Provenance {
            delta,
            operators,
            signature,
        },
    )?;
    let dims = set.dims();
    if dims.k != k || dims.m != m || dims.n != n {
        return Err(Error::DimensionMismatch(format!(
            "header K={k} M={m} N={n} disagrees with data K={} M={} N={}",
            dims.k, dims.m, dims.n
        )));
    }
    let mut warnings = Vec::new();
    let dev = set.normalization_error();
    if dev > NORMALIZATION_TOL {
        let msg = format!(
            "total power {} deviates from J*M={} by relative {dev:.3e}",
            set.total_trace(),
            j * m
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(ImportedSet { set, warnings })
}

fn parse_f64(s: Option<&str>, line: usize) -> Result<f64> {
    s.and_then(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected a finite number, found {s:?}"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::build_mother_constellation;
    use crate::layering::assign_layers_and_power;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn op(rho: f64, theta: f64) -> ConstellationOperator {
        ConstellationOperator::new(rho, theta).unwrap()
    }

    fn pattern(bits: &[u8]) -> LayerPattern {
        LayerPattern::from_bits(bits).unwrap()
    }

    #[test]
    fn mapping_matrices_follow_support() {
        let v1 = mapping_matrix_from_layer(&pattern(&[0, 1, 0, 1]), 2).unwrap();
        assert_eq!(
            v1.to_dense(),
            vec![vec![0, 0], vec![1, 0], vec![0, 0], vec![0, 1]]
        );
        let v2 = mapping_matrix_from_layer(&pattern(&[1, 0, 1, 0]), 2).unwrap();
        assert_eq!(
            v2.to_dense(),
            vec![vec![1, 0], vec![0, 0], vec![0, 1], vec![0, 0]]
        );
        let id = mapping_matrix_from_layer(&pattern(&[1, 1]), 2).unwrap();
        assert_eq!(id.to_dense(), vec![vec![1, 0], vec![0, 1]]);
        assert!(mapping_matrix_from_layer(&pattern(&[1, 1, 1, 0]), 2).is_err());
    }

    #[test]
    fn unrotated_codebook_scaling() {
        let mc = build_mother_constellation(4, 2, 2.0).unwrap();
        let v = mapping_matrix_from_layer(&pattern(&[1, 0, 1, 0]), 2).unwrap();
        let ops = [op(1.0, 0.0), op(1.0, 0.0)];
        let cb = build_codebook(&mc, &v, &ops, mc.energy()).unwrap();
        // sqrt(4 / (2*10)) = 1/sqrt(5)
        let s = 5f64.sqrt().recip();
        let row0: Vec<f64> = (0..4).map(|m| cb.entry(0, m).re).collect();
        let row2: Vec<f64> = (0..4).map(|m| cb.entry(2, m).re).collect();
        for (got, want) in row0.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert_relative_eq!(*got, want * s, epsilon = 1e-15);
        }
        for (got, want) in row2.iter().zip([-1.0, 2.0, -2.0, 1.0]) {
            assert_relative_eq!(*got, want * s, epsilon = 1e-15);
        }
        assert!((0..4).all(|m| cb.entry(1, m) == Complex::new(0.0, 0.0)));
        assert_relative_eq!(cb.trace(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_and_scaling() {
        let mc = build_mother_constellation(4, 2, 2.0).unwrap();
        let v = mapping_matrix_from_layer(&pattern(&[1, 1, 0, 0]), 2).unwrap();
        let plain = build_codebook(&mc, &v, &[op(1.0, 0.0), op(1.0, 0.0)], mc.energy()).unwrap();
        let rotated =
            build_codebook(&mc, &v, &[op(1.0, 0.0), op(1.0, FRAC_PI_2)], mc.energy()).unwrap();
        for m in 0..4 {
            let want = plain.entry(1, m) * Complex::new(0.0, 1.0);
            assert!((rotated.entry(1, m) - want).norm() < 1e-15);
        }
        assert_relative_eq!(rotated.trace(), 4.0, epsilon = 1e-12);
        let half = build_codebook(&mc, &v, &[op(0.5, 0.0), op(0.5, 0.0)], mc.energy()).unwrap();
        assert_relative_eq!(half.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn global_rescale_preserves_ratios() {
        let mc = build_mother_constellation(2, 1, 1.0).unwrap();
        let cbs = [(1.0, [1u8, 0]), (0.5, [0, 1])]
            .iter()
            .map(|(rho, bits)| {
                let v = mapping_matrix_from_layer(&pattern(bits), 1).unwrap();
                build_codebook(&mc, &v, &[op(*rho, 0.0)], mc.energy()).unwrap()
            })
            .collect();
        let set = CodebookSet::from_codebooks(cbs, Provenance::default())
            .unwrap()
            .normalize_total_power();
        let m = 2.0;
        let traces = set.traces();
        assert_relative_eq!(traces[0] / m, 1.6, epsilon = 1e-12);
        assert_relative_eq!(traces[1] / m, 0.4, epsilon = 1e-12);
    }

    fn designed_set(rhos: [f64; 3], thetas: [f64; 3]) -> CodebookSet {
        let dims = SystemDims::new(4, 6, 4, 2).unwrap();
        let ops: Vec<_> = rhos.iter().zip(thetas).map(|(&r, t)| op(r, t)).collect();
        let sig = assign_layers_and_power(&ops, dims).unwrap();
        let mc = build_mother_constellation(4, 2, 2.0).unwrap();
        build_codebook_set(&mc, &sig).unwrap()
    }

    #[test]
    fn equal_operators_give_unit_traces() {
        let set = designed_set([1.0; 3], [0.0; 3]);
        for t in set.traces() {
            assert_relative_eq!(t, 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn traces_follow_power_sorted_columns() {
        let set = designed_set([0.3, 0.6, 0.9], [0.0, 1.0, 2.0]);
        let t = set.traces();
        assert!(t.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{t:?}");
        assert!(set.normalization_error() < NORMALIZATION_TOL);
        let supports: Vec<_> = set.codebooks().iter().map(Codebook::support).collect();
        let sig = set.provenance().signature.clone().unwrap();
        for (j, s) in supports.iter().enumerate() {
            for (r, row) in sig.iter().enumerate() {
                assert_eq!(s.contains(r), row[j] != 0);
            }
        }
    }

    #[test]
    fn homogeneous_in_common_rho_scale() {
        let a = designed_set([0.3, 0.6, 0.9], [0.1, 1.0, 2.0]);
        let b = designed_set([0.15, 0.3, 0.45], [0.1, 1.0, 2.0]);
        for (ca, cb) in a.codebooks().iter().zip(b.codebooks()) {
            for (x, y) in ca
                .codewords()
                .iter()
                .flatten()
                .zip(cb.codewords().iter().flatten())
            {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let set = designed_set([0.3, 0.6, 0.9], [0.1, 1.0, 2.0]);
        let text = write_codebook_set(&set);
        let back = parse_codebook_set(&text).unwrap();
        assert!(back.warnings.is_empty());
        assert_eq!(back.set, set);
    }

    #[test]
    fn wrong_codeword_length_is_rejected() {
        let set = designed_set([1.0; 3], [0.0; 3]);
        let bare =
            CodebookSet::from_codebooks(set.codebooks().to_vec(), Provenance::default()).unwrap();
        let text = write_codebook_set(&bare).replace("K 4", "K 5");
        assert!(matches!(
            parse_codebook_set(&text),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(parse_codebook_set(""), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_codebook_set("garbage\n"),
            Err(Error::Parse { .. })
        ));
        let set = designed_set([1.0; 3], [0.0; 3]);
        let text = write_codebook_set(&set).replace("end\n", "");
        assert!(parse_codebook_set(&text).is_err());
        let text = write_codebook_set(&set).replace("J 6", "J 5");
        assert!(parse_codebook_set(&text).is_err());
    }

    #[test]
    fn unnormalized_import_warns() {
        let set = designed_set([1.0; 3], [0.0; 3]);
        let scale = (1.0f64 + 1e-3).sqrt();
        let perturbed = CodebookSet::from_codebooks(
            set.codebooks().iter().map(|cb| cb.scaled(scale)).collect(),
            set.provenance().clone(),
        )
        .unwrap();
        let back = parse_codebook_set(&write_codebook_set(&perturbed)).unwrap();
        assert_eq!(back.warnings.len(), 1);
        assert_relative_eq!(back.set.total_trace(), 24.0 * 1.001, epsilon = 1e-9);
    }
}
