//! Genetic search over the mother-constellation spacing and the shared
//! constellation operators, minimising the worst-user BEP bound.
//!
//! A candidate is the gene vector `[δ, ρ₁..ρ_df, θ₁..θ_df]`. Its operators are
//! sorted by power, placed by [`assign_layers_and_power`], and the resulting
//! normalised set is scored by [`set_bep`] at the design SNR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analysis::{n0_from_snr_db, set_bep, BepParams, Truncation};
use crate::codebook::{build_codebook_set, CodebookSet};
use crate::constellation::build_mother_constellation;
use crate::geometry::CellGeometry;
use crate::layering::{assign_layers_and_power, ConstellationOperator};
use crate::{Error, Result, SystemDims};

/// Box constraints of the search.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DesignSpace {
    pub dims: SystemDims,
    pub df: usize,
    /// `(1, δ_max]`
    pub delta_range: (f64, f64),
    /// `(ρ_min, 1]`
    pub rho_range: (f64, f64),
    /// `[0, π)`
    pub theta_range: (f64, f64),
}

impl DesignSpace {
    /// Default bounds `δ ∈ (1, 4]`, `ρ ∈ [0.05, 1]`, `θ ∈ [0, π)`.
    pub fn new(dims: SystemDims) -> Result<Self> {
        Self::with_bounds(dims, 4.0, 0.05)
    }

    pub fn with_bounds(dims: SystemDims, delta_max: f64, rho_min: f64) -> Result<Self> {
        let df = dims.df().ok_or_else(|| {
            Error::InvalidDims(format!(
                "J*N/K = {}*{}/{} is not an integer",
                dims.j, dims.n, dims.k
            ))
        })?;
        if !(delta_max > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_max={delta_max} must exceed 1"
            )));
        }
        if !(rho_min > 0.0 && rho_min < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho_min={rho_min} outside (0, 1)"
            )));
        }
        Ok(DesignSpace {
            dims,
            df,
            delta_range: (1.0, delta_max),
            rho_range: (rho_min, 1.0),
            theta_range: (0.0, std::f64::consts::PI),
        })
    }

    pub fn dimensionality(&self) -> usize {
        2 * self.df + 1
    }

    fn bounds(&self, gene: usize) -> (f64, f64) {
        if gene == 0 {
            self.delta_range
        } else if gene <= self.df {
            self.rho_range
        } else {
            self.theta_range
        }
    }

    /// Clips a gene into its box. Open ends are nudged inwards.
    fn clip(&self, gene: usize, x: f64) -> f64 {
        let (lo, hi) = self.bounds(gene);
        if gene == 0 && x <= lo {
            return lo + 1e-9;
        }
        if gene > self.df && x >= hi {
            return hi * (1.0 - f64::EPSILON);
        }
        x.clamp(lo, hi)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dimensionality())
            .map(|g| {
                let (lo, hi) = self.bounds(g);
                self.clip(g, lo + (hi - lo) * rng.random::<f64>())
            })
            .collect()
    }

    fn decode(&self, genes: &[f64]) -> Result<Candidate> {
        let operators = (0..self.df)
            .map(|i| ConstellationOperator::new(genes[1 + i], genes[1 + self.df + i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Candidate::new(genes[0], operators))
    }

    fn encode(&self, c: &Candidate) -> Vec<f64> {
        let mut genes = Vec::with_capacity(self.dimensionality());
        genes.push(c.delta);
        genes.extend(c.operators.iter().map(|q| q.rho));
        genes.extend(c.operators.iter().map(|q| q.theta));
        genes
    }

    pub fn contains(&self, c: &Candidate) -> bool {
        c.operators.len() == self.df
            && self.encode(c).iter().enumerate().all(|(g, &x)| {
                let (lo, hi) = self.bounds(g);
                x >= lo && x <= hi
            })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub design_snr_db: f64,
    pub kappa: f64,
    pub geometry: CellGeometry,
    pub truncation: Truncation,
    pub elitism: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament: usize,
    pub blend_alpha: f64,
    /// Mutation standard deviation as a fraction of each gene's range.
    pub mutation_sigma: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            generations: 20,
            design_snr_db: 12.0,
            kappa: 10.0,
            geometry: CellGeometry::default(),
            truncation: Truncation::MaxUsersInError(3),
            elitism: 2,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            tournament: 3,
            blend_alpha: 0.5,
            mutation_sigma: 0.1,
            seed: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidParameter("population must be >= 2".into()));
        }
        if self.generations < 1 {
            return Err(Error::InvalidParameter("generations must be >= 1".into()));
        }
        if self.elitism > self.population {
            return Err(Error::InvalidParameter("elitism exceeds population".into()));
        }
        if self.tournament < 1 {
            return Err(Error::InvalidParameter(
                "tournament size must be >= 1".into(),
            ));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!(
                    "{name}={r} outside [0, 1]"
                )));
            }
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa={} must be >= 0",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Bound parameters at the design SNR.
    pub fn bep_params(&self, dims: SystemDims) -> BepParams {
        BepParams::new(
            self.geometry,
            self.kappa,
            n0_from_snr_db(self.design_snr_db, dims.k, dims.j),
        )
        .with_truncation(self.truncation)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Candidate {
    pub delta: f64,
    pub operators: Vec<ConstellationOperator>,
    pub fitness: f64,
}

impl Candidate {
    /// An unscored candidate.
    pub fn new(delta: f64, operators: Vec<ConstellationOperator>) -> Self {
        Candidate {
            delta,
            operators,
            fitness: f64::INFINITY,
        }
    }

    /// Operators sorted by ascending power.
    pub fn sorted_operators(&self) -> Vec<ConstellationOperator> {
        let mut ops = self.operators.clone();
        ops.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        ops
    }
}

/// Equal-power, unrotated operators with `δ = 2`.
pub fn baseline_candidate(space: &DesignSpace) -> Candidate {
    let q = ConstellationOperator {
        rho: 1.0,
        theta: 0.0,
    };
    Candidate::new(2.0, vec![q; space.df])
}

/// The normalised codebook set a candidate describes.
pub fn candidate_codebook_set(c: &Candidate, dims: SystemDims) -> Result<CodebookSet> {
    let sig = assign_layers_and_power(&c.sorted_operators(), dims)?;
    let mc = build_mother_constellation(dims.m, dims.n, c.delta)?;
    build_codebook_set(&mc, &sig)
}

/// Worst-user BEP bound at the design SNR; `+∞` when no set can be built.
pub fn fitness(c: &Candidate, cfg: &GaConfig, dims: SystemDims) -> f64 {
    candidate_codebook_set(c, dims)
        .and_then(|set| set_bep(&set, &cfg.bep_params(dims)))
        .map_or(f64::INFINITY, |b| {
            if b.worst.is_nan() {
                f64::INFINITY
            } else {
                b.worst
            }
        })
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub best: Candidate,
    pub set: CodebookSet,
    /// Best fitness of the initial population followed by the best after
    /// each generation.
    pub history: Vec<f64>,
}

/// Runs the GA from a uniformly drawn initial population.
pub fn run_ga(space: &DesignSpace, cfg: &GaConfig) -> Result<GaResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = (0..cfg.population)
        .map(|_| space.sample(&mut rng))
        .collect();
    evolve(space, cfg, initial, rng)
}

/// Runs the GA from the given initial candidates; the population size is
/// taken from `initial`.
pub fn run_ga_from(space: &DesignSpace, cfg: &GaConfig, initial: &[Candidate]) -> Result<GaResult> {
    let cfg = GaConfig {
        population: initial.len(),
        ..cfg.clone()
    };
    cfg.validate()?;
    if let Some(c) = initial.iter().find(|c| !space.contains(c)) {
        return Err(Error::InvalidParameter(format!(
            "candidate outside design space: {c:?}"
        )));
    }
    let genes = initial.iter().map(|c| space.encode(c)).collect();
    evolve(space, &cfg, genes, ChaCha8Rng::seed_from_u64(cfg.seed))
}

struct Individual {
    genes: Vec<f64>,
    fitness: f64,
}

fn evaluate(space: &DesignSpace, cfg: &GaConfig, genes: Vec<Vec<f64>>) -> Vec<Individual> {
    genes
        .into_par_iter()
        .map(|g| {
            let fitness = space
                .decode(&g)
                .map_or(f64::INFINITY, |c| fitness(&c, cfg, space.dims));
            Individual { genes: g, fitness }
        })
        .collect()
}

fn evolve(
    space: &DesignSpace,
    cfg: &GaConfig,
    initial: Vec<Vec<f64>>,
    mut rng: ChaCha8Rng,
) -> Result<GaResult> {
    let mut pop = evaluate(space, cfg, initial);
    pop.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
    let mut history = vec![pop[0].fitness];
    let mut best = (pop[0].genes.clone(), pop[0].fitness);

    for gen in 0..cfg.generations {
        let mut children: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
        while children.len() + cfg.elitism < cfg.population {
            let a = tournament(&pop, cfg.tournament, &mut rng);
            let b = tournament(&pop, cfg.tournament, &mut rng);
            let (mut c1, mut c2) = if rng.random::<f64>() < cfg.crossover_rate {
                blend(
                    space,
                    &pop[a].genes,
                    &pop[b].genes,
                    cfg.blend_alpha,
                    &mut rng,
                )
            } else {
                (pop[a].genes.clone(), pop[b].genes.clone())
            };
            mutate(space, &mut c1, cfg, &mut rng);
            mutate(space, &mut c2, cfg, &mut rng);
            children.push(c1);
            if children.len() + cfg.elitism < cfg.population {
                children.push(c2);
            }
        }
        let mut next: Vec<Individual> = pop.drain(..cfg.elitism).collect();
        next.extend(evaluate(space, cfg, children));
        next.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
        pop = next;
        if pop[0].fitness < best.1 {
            best = (pop[0].genes.clone(), pop[0].fitness);
        }
        history.push(best.1);
        log::debug!("generation {}: best worst-user BEP {:.4e}", gen + 1, best.1);
    }

    let mut candidate = space.decode(&best.0)?;
    candidate.fitness = best.1;
    let set = candidate_codebook_set(&candidate, space.dims)?;
    Ok(GaResult {
        best: candidate,
        set,
        history,
    })
}

fn tournament(pop: &[Individual], size: usize, rng: &mut ChaCha8Rng) -> usize {
    (0..size)
        .map(|_| rng.random_range(0..pop.len()))
        .min_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness).then(a.cmp(&b)))
        .unwrap_or(0)
}

fn blend(
    space: &DesignSpace,
    a: &[f64],
    b: &[f64],
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = Vec::with_capacity(a.len());
    let mut c2 = Vec::with_capacity(a.len());
    for (g, (&x, &y)) in a.iter().zip(b).enumerate() {
        let (lo, hi) = (x.min(y), x.max(y));
        let ext = alpha * (hi - lo);
        let span = hi - lo + 2.0 * ext;
        c1.push(space.clip(g, lo - ext + span * rng.random::<f64>()));
        c2.push(space.clip(g, lo - ext + span * rng.random::<f64>()));
    }
    (c1, c2)
}

fn mutate(space: &DesignSpace, genes: &mut [f64], cfg: &GaConfig, rng: &mut ChaCha8Rng) {
    for (g, x) in genes.iter_mut().enumerate() {
        if rng.random::<f64>() < cfg.mutation_rate {
            let (lo, hi) = space.bounds(g);
            let sigma = cfg.mutation_sigma * (hi - lo);
            if let Ok(normal) = Normal::new(0.0, sigma) {
                *x = space.clip(g, *x + normal.sample(rng));
            }
        }
    }
}
