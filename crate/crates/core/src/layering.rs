//! Factor-graph layers and joint layer/power assignment.
//!
//! Layers are organised into orthogonal groups that share one constellation
//! operator `q_i = ρ_i e^{iθ_i}`. Layers left over after every operator has
//! received `⌊K/N⌋` orthogonal layers ("residual" layers) pick up mixed
//! operators so that every resource node ends up carrying each operator
//! exactly once.

use crate::{Complex, Error, Result, SystemDims};

/// Support of one layer: bit `k` is set iff the layer occupies resource node `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerPattern {
    mask: u64,
    k: usize,
}

impl LayerPattern {
    pub fn from_rows(k: usize, rows: &[usize]) -> Result<Self> {
        if k > 64 {
            return Err(Error::InvalidDims(format!("K={k} exceeds 64")));
        }
        let mut mask = 0u64;
        for &r in rows {
            if r >= k {
                return Err(Error::DimensionMismatch(format!("row {r} outside K={k}")));
            }
            mask |= 1 << r;
        }
        Ok(LayerPattern { mask, k })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let rows: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(i, _)| i)
            .collect();
        Self::from_rows(bits.len(), &rows)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weight(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, row: usize) -> bool {
        row < self.k && self.mask >> row & 1 == 1
    }

    /// Occupied rows, top-down.
    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(|&r| self.contains(r))
    }

    pub fn is_orthogonal(&self, other: &LayerPattern) -> bool {
        self.mask & other.mask == 0
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.k).map(|r| self.contains(r) as u8).collect()
    }
}

/// All binary K-vectors with exactly N ones, lexicographic in the positions
/// of the ones (so `[1,1,0,0]` comes first and `[0,0,1,1]` last).
pub fn enumerate_layer_patterns(k: usize, n: usize) -> Result<Vec<LayerPattern>> {
    if n == 0 || n >= k {
        return Err(Error::InvalidDims(format!(
            "layer weight N={n} must satisfy 0 < N < K={k}"
        )));
    }
    all_patterns(k, n)
}

fn all_patterns(k: usize, n: usize) -> Result<Vec<LayerPattern>> {
    if k > 64 {
        return Err(Error::InvalidDims(format!("K={k} exceeds 64")));
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        out.push(LayerPattern::from_rows(k, &idx)?);
        // next combination in lexicographic order
        let mut i = n;
        while i > 0 && idx[i - 1] == k - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for t in i..n {
            idx[t] = idx[t - 1] + 1;
        }
    }
    Ok(out)
}

/// K×J binary matrix of layer supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    k: usize,
    columns: Vec<LayerPattern>,
}

impl IndicatorMatrix {
    pub fn new(k: usize, columns: Vec<LayerPattern>) -> Result<Self> {
        if columns.iter().any(|c| c.k() != k) {
            return Err(Error::DimensionMismatch(
                "column length differs from K".into(),
            ));
        }
        Ok(IndicatorMatrix { k, columns })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn j(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[LayerPattern] {
        &self.columns
    }

    /// Layers colliding on resource node `k`.
    pub fn users_on(&self, k: usize) -> Vec<usize> {
        (0..self.j())
            .filter(|&j| self.columns[j].contains(k))
            .collect()
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        (0..self.k).map(|k| self.users_on(k).len()).collect()
    }

    /// Checks the regular-graph invariants: every column has `n` ones, every
    /// row has the same degree, columns are pairwise distinct.
    pub fn check_regular(&self, n: usize) -> std::result::Result<(), String> {
        if let Some(j) = self.columns.iter().position(|c| c.weight() != n) {
            return Err(format!(
                "column {j} has {} ones, expected {n}",
                self.columns[j].weight()
            ));
        }
        let degrees = self.row_degrees();
        if degrees.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("irregular row degrees {degrees:?}"));
        }
        for a in 0..self.j() {
            for b in a + 1..self.j() {
                if self.columns[a] == self.columns[b] {
                    return Err(format!("columns {a} and {b} are identical"));
                }
            }
        }
        Ok(())
    }
}

/// Joint power scaling and phase rotation `ρ e^{iθ}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstellationOperator {
    pub rho: f64,
    pub theta: f64,
}

impl ConstellationOperator {
    pub fn new(rho: f64, theta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("rho={rho} outside (0, 1]")));
        }
        if !(0.0..std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta={theta} outside [0, pi)"
            )));
        }
        Ok(ConstellationOperator { rho, theta })
    }

    pub fn value(&self) -> Complex {
        Complex::from_polar(self.rho, self.theta)
    }

    pub fn power(&self) -> f64 {
        self.rho * self.rho
    }
}

/// Indicator matrix whose ones carry operator labels `1..=d_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    k: usize,
    j: usize,
    /// Row-major `K×J`; 0 marks an empty entry, `i` marks operator `q_i`.
    entries: Vec<u8>,
    operators: Vec<ConstellationOperator>,
    /// Full orthogonal groups, as layer (column) indices.
    groups: Vec<Vec<usize>>,
}

impl SignatureMatrix {
    /// Builds a signature from row-major operator labels.
    pub fn from_labels(
        labels: Vec<Vec<u8>>,
        operators: Vec<ConstellationOperator>,
        groups: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let k = labels.len();
        let j = labels.first().map_or(0, Vec::len);
        if k == 0 || j == 0 || labels.iter().any(|r| r.len() != j) {
            return Err(Error::DimensionMismatch(
                "ragged or empty signature rows".into(),
            ));
        }
        if k > 64 {
            return Err(Error::InvalidDims(format!("K={k} exceeds 64")));
        }
        if let Some(&bad) = labels
            .iter()
            .flatten()
            .find(|&&l| l as usize > operators.len())
        {
            return Err(Error::InvalidSignature(format!(
                "operator label {bad} but only {} operators",
                operators.len()
            )));
        }
        if groups.iter().flatten().any(|&c| c >= j) {
            return Err(Error::InvalidSignature(
                "group refers to a missing layer".into(),
            ));
        }
        Ok(SignatureMatrix {
            k,
            j,
            entries: labels.into_iter().flatten().collect(),
            operators,
            groups,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// Operator label at `(row, col)`; 0 when empty.
    pub fn label(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.j + col]
    }

    pub fn operator_at(&self, row: usize, col: usize) -> Option<ConstellationOperator> {
        match self.label(row, col) {
            0 => None,
            l => Some(self.operators[l as usize - 1]),
        }
    }

    pub fn operators(&self) -> &[ConstellationOperator] {
        &self.operators
    }

    /// Replaces operator values, keeping the labels and groups.
    pub fn with_operators(&self, operators: Vec<ConstellationOperator>) -> Result<Self> {
        if operators.len() != self.operators.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} operators for a signature with {}",
                operators.len(),
                self.operators.len()
            )));
        }
        Ok(SignatureMatrix {
            operators,
            ..self.clone()
        })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn labels(&self) -> Vec<Vec<u8>> {
        self.entries.chunks(self.j).map(<[u8]>::to_vec).collect()
    }

    pub fn column_pattern(&self, col: usize) -> LayerPattern {
        let rows: Vec<usize> = (0..self.k).filter(|&r| self.label(r, col) != 0).collect();
        LayerPattern::from_rows(self.k, &rows).expect("K validated")
    }

    pub fn indicator(&self) -> IndicatorMatrix {
        IndicatorMatrix {
            k: self.k,
            columns: (0..self.j).map(|c| self.column_pattern(c)).collect(),
        }
    }

    /// Sum of `ρ²` over a column's operators.
    pub fn column_power(&self, col: usize) -> f64 {
        (0..self.k)
            .filter_map(|r| self.operator_at(r, col))
            .map(|q| q.power())
            .sum()
    }

    /// Operators of one column, top-down over its support.
    pub fn column_operators(&self, col: usize) -> Vec<ConstellationOperator> {
        (0..self.k)
            .filter_map(|r| self.operator_at(r, col))
            .collect()
    }

    pub fn validate(&self) -> SignatureReport {
        validate_signature(self)
    }
}

impl std::fmt::Display for SignatureMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..self.k {
            let cells: Vec<String> = (0..self.j)
                .map(|c| match self.label(r, c) {
                    0 => " 0".to_string(),
                    l => format!("q{l}"),
                })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Outcome of [`validate_signature`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignatureReport {
    pub support_regular: bool,
    pub power_balanced: bool,
    pub groups_orthogonal: bool,
    pub power_sorted: bool,
    pub issues: Vec<String>,
}

impl SignatureReport {
    pub fn passed(&self) -> bool {
        self.support_regular && self.power_balanced && self.groups_orthogonal && self.power_sorted
    }
}

/// Checks a signature against the assignment rules: regular support, each
/// operator exactly once per row, orthogonal layers inside every group and
/// columns sorted by non-decreasing total power.
pub fn validate_signature(sig: &SignatureMatrix) -> SignatureReport {
    let mut report = SignatureReport::default();
    let indicator = sig.indicator();
    let n = indicator.columns().first().map_or(0, LayerPattern::weight);
    match indicator.check_regular(n) {
        Ok(()) => report.support_regular = true,
        Err(msg) => report.issues.push(msg),
    }

    let df = sig.operators().len();
    report.power_balanced = true;
    for r in 0..sig.k() {
        let mut row: Vec<u8> = (0..sig.j())
            .map(|c| sig.label(r, c))
            .filter(|&l| l != 0)
            .collect();
        row.sort_unstable();
        let expected: Vec<u8> = (1..=df as u8).collect();
        if row != expected {
            report.power_balanced = false;
            report
                .issues
                .push(format!("row {r} carries operators {row:?}"));
        }
    }

    report.groups_orthogonal = true;
    for (t, group) in sig.groups().iter().enumerate() {
        for (a, &ca) in group.iter().enumerate() {
            for &cb in &group[a + 1..] {
                if !sig
                    .column_pattern(ca)
                    .is_orthogonal(&sig.column_pattern(cb))
                {
                    report.groups_orthogonal = false;
                    report
                        .issues
                        .push(format!("group {t}: layers {ca} and {cb} overlap"));
                }
            }
        }
    }

    let powers: Vec<f64> = (0..sig.j()).map(|c| sig.column_power(c)).collect();
    report.power_sorted = powers.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    if !report.power_sorted {
        report
            .issues
            .push(format!("column powers not ascending: {powers:?}"));
    }
    report
}

/// Joint layer and power assignment.
///
/// `operators` must be sorted by ascending `ρ` and have length `d_f`. Each
/// operator first receives `⌊K/N⌋` mutually orthogonal layers (scanned in
/// lexicographic order, backtracking when a group cannot be completed). The
/// remaining layers are chosen so that they exactly cover the resource nodes
/// the groups miss, and labelled with a per-row countdown of operator indices
/// that also fixes which operator each group carries. Columns are finally
/// sorted by ascending total power.
pub fn assign_layers_and_power(
    operators: &[ConstellationOperator],
    dims: SystemDims,
) -> Result<SignatureMatrix> {
    let df = dims.df().ok_or_else(|| {
        Error::InvalidDims(format!(
            "J*N/K = {}*{}/{} is not an integer",
            dims.j, dims.n, dims.k
        ))
    })?;
    if operators.len() != df {
        return Err(Error::InvalidParameter(format!(
            "expected d_f={df} operators, got {}",
            operators.len()
        )));
    }
    if operators.windows(2).any(|w| w[1].rho < w[0].rho) {
        return Err(Error::InvalidParameter(
            "operators must be sorted by ascending rho".into(),
        ));
    }
    if df > u8::MAX as usize {
        return Err(Error::InvalidDims(format!("d_f={df} too large")));
    }
    let (k, n) = (dims.k, dims.n);
    let per_group = k / n;
    let residual = dims.j - per_group * df;
    let patterns = all_patterns(k, n)?;

    let mut search = PackingSearch {
        k,
        df,
        per_group,
        residual,
        patterns: &patterns,
        used: vec![false; patterns.len()],
        groups: vec![Vec::with_capacity(per_group); df],
        residuals: Vec::with_capacity(residual),
    };
    let solution = search.run().ok_or(Error::Infeasible { k, j: dims.j, n })?;
    let sig = solution.into_signature(k, operators);
    let report = sig.validate();
    if !report.passed() {
        return Err(Error::InvalidSignature(report.issues.join("; ")));
    }
    Ok(sig)
}

struct PackingSearch<'a> {
    k: usize,
    df: usize,
    per_group: usize,
    residual: usize,
    patterns: &'a [LayerPattern],
    used: Vec<bool>,
    groups: Vec<Vec<usize>>,
    residuals: Vec<usize>,
}

struct Packing {
    groups: Vec<Vec<LayerPattern>>,
    group_labels: Vec<u8>,
    residuals: Vec<(LayerPattern, Vec<u8>)>,
}

impl PackingSearch<'_> {
    fn run(&mut self) -> Option<Packing> {
        self.fill_group(0)
    }

    fn fill_group(&mut self, u: usize) -> Option<Packing> {
        if u == self.df {
            return self.fill_residual(0);
        }
        if self.groups[u].len() == self.per_group {
            return self.fill_group(u + 1);
        }
        let start = self.groups[u].last().map_or(0, |&i| i + 1);
        for p in start..self.patterns.len() {
            if self.used[p] {
                continue;
            }
            let candidate = self.patterns[p];
            if self.groups[u]
                .iter()
                .any(|&i| !self.patterns[i].is_orthogonal(&candidate))
            {
                continue;
            }
            self.used[p] = true;
            self.groups[u].push(p);
            if let Some(found) = self.fill_group(u) {
                return Some(found);
            }
            self.groups[u].pop();
            self.used[p] = false;
        }
        None
    }

    /// Per-row count of groups that do not cover the row, minus what the
    /// residual layers chosen so far already cover.
    fn uncovered(&self) -> Vec<usize> {
        (0..self.k)
            .map(|r| {
                let covered_by_groups = self
                    .groups
                    .iter()
                    .filter(|g| g.iter().any(|&i| self.patterns[i].contains(r)))
                    .count();
                let covered_by_residual = self
                    .residuals
                    .iter()
                    .filter(|&&i| self.patterns[i].contains(r))
                    .count();
                (self.df - covered_by_groups).saturating_sub(covered_by_residual)
            })
            .collect()
    }

    fn fill_residual(&mut self, depth: usize) -> Option<Packing> {
        let open = self.uncovered();
        if depth == self.residual {
            return if open.iter().all(|&c| c == 0) {
                self.label()
            } else {
                None
            };
        }
        let start = self.residuals.last().map_or(0, |&i| i + 1);
        for p in start..self.patterns.len() {
            if self.used[p] || self.patterns[p].rows().any(|r| open[r] == 0) {
                continue;
            }
            self.used[p] = true;
            self.residuals.push(p);
            if let Some(found) = self.fill_residual(depth + 1) {
                return Some(found);
            }
            self.residuals.pop();
            self.used[p] = false;
        }
        None
    }

    /// Operator labelling by per-row countdown. Returns `None` when a group
    /// ends up with mixed labels or a row repeats an operator.
    fn label(&self) -> Option<Packing> {
        let groups: Vec<Vec<LayerPattern>> = self
            .groups
            .iter()
            .map(|g| g.iter().map(|&i| self.patterns[i]).collect())
            .collect();
        let covers = |g: &[LayerPattern], r: usize| g.iter().any(|p| p.contains(r));
        let mut countdown = vec![self.df as u8; self.k];
        let mut group_labels: Vec<Option<Vec<(usize, u8)>>> = vec![None; self.df];

        let take_group =
            |g: usize,
             countdown: &mut Vec<u8>,
             group_labels: &mut Vec<Option<Vec<(usize, u8)>>>| {
                let rows: Vec<usize> = (0..self.k).filter(|&r| covers(&groups[g], r)).collect();
                let labels = rows.iter().map(|&r| (r, countdown[r])).collect();
                for &r in &rows {
                    countdown[r] = countdown[r].saturating_sub(1);
                }
                group_labels[g] = Some(labels);
            };

        let mut residuals = Vec::with_capacity(self.residuals.len());
        for &p in &self.residuals {
            let pattern = self.patterns[p];
            let mut labels = Vec::with_capacity(pattern.weight());
            for r in pattern.rows() {
                if let Some(g) =
                    (0..self.df).find(|&g| group_labels[g].is_none() && !covers(&groups[g], r))
                {
                    take_group(g, &mut countdown, &mut group_labels);
                }
                if countdown[r] == 0 {
                    return None;
                }
                labels.push(countdown[r]);
                countdown[r] -= 1;
            }
            residuals.push((pattern, labels));
        }
        for g in (0..self.df).rev() {
            if group_labels[g].is_none() {
                take_group(g, &mut countdown, &mut group_labels);
            }
        }

        let mut uniform = Vec::with_capacity(self.df);
        for labels in group_labels.into_iter().map(Option::unwrap) {
            let first = labels.first()?.1;
            if first == 0 || labels.iter().any(|&(_, l)| l != first) {
                return None;
            }
            uniform.push(first);
        }
        let packing = Packing {
            groups,
            group_labels: uniform,
            residuals,
        };
        packing.is_balanced(self.k, self.df).then_some(packing)
    }
}

impl Packing {
    fn columns(&self) -> Vec<(LayerPattern, Vec<u8>, Option<usize>)> {
        let mut cols = Vec::new();
        for (g, layers) in self.groups.iter().enumerate() {
            for p in layers {
                cols.push((*p, vec![self.group_labels[g]; p.weight()], Some(g)));
            }
        }
        for (p, labels) in &self.residuals {
            cols.push((*p, labels.clone(), None));
        }
        cols
    }

    fn is_balanced(&self, k: usize, df: usize) -> bool {
        let mut seen = vec![vec![false; df + 1]; k];
        for (p, labels, _) in self.columns() {
            for (r, &l) in p.rows().zip(&labels) {
                if seen[r][l as usize] {
                    return false;
                }
                seen[r][l as usize] = true;
            }
        }
        seen.iter().all(|row| row[1..].iter().all(|&s| s))
    }

    fn into_signature(self, k: usize, operators: &[ConstellationOperator]) -> SignatureMatrix {
        let cols = self.columns();
        let power = |labels: &[u8]| -> f64 {
            labels
                .iter()
                .map(|&l| operators[l as usize - 1].power())
                .sum()
        };
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_by(|&a, &b| power(&cols[a].1).total_cmp(&power(&cols[b].1)));

        let j = cols.len();
        let mut labels = vec![vec![0u8; j]; k];
        let mut groups = vec![Vec::new(); self.groups.len()];
        for (new_col, &old) in order.iter().enumerate() {
            let (pattern, col_labels, group) = &cols[old];
            for (r, &l) in pattern.rows().zip(col_labels) {
                labels[r][new_col] = l;
            }
            if let Some(g) = group {
                groups[*g].push(new_col);
            }
        }
        groups.sort_by_key(|g| g.first().copied());
        SignatureMatrix::from_labels(labels, operators.to_vec(), groups)
            .expect("constructed consistently")
    }
}
