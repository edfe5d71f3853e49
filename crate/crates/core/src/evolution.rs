//! Per-request evolution of agent-sequences.
//!
//! Individuals are ordered lists of indices into a seed pool of agent
//! descriptions. A sequence's attributes are the concatenated tuples of its
//! agents; its fitness against a flattened request `R` is
//! `1 / (1 + sum_{r in R} min_a d(r, a))` with
//! `d(r, a) = W * |r.id - a.id| + |r.value - a.value|`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{EcoError, Result};
use crate::semantic::{AttributeTuple, SemanticDescription};

pub const DEFAULT_ID_PENALTY: u64 = 100;

/// Ordered list of indices into the seed pool.
pub type AgentSequence = Vec<usize>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionParams {
    pub base_size: f64,
    pub size_coeff: f64,
    pub crossover_fraction: f64,
    pub mutation_fraction: f64,
    pub max_generations: usize,
    /// `W`: cost of one unit of attribute-id mismatch.
    pub id_penalty: u64,
    pub parsimony: bool,
    /// Random seed sequences have lengths uniform in this range.
    pub seed_min_len: usize,
    pub seed_max_len: usize,
    /// At most this fraction of the initial population comes from stored
    /// sequences.
    pub stored_share: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            base_size: 20.0,
            size_coeff: 10.0,
            crossover_fraction: 0.10,
            mutation_fraction: 0.10,
            max_generations: 100,
            id_penalty: DEFAULT_ID_PENALTY,
            parsimony: true,
            seed_min_len: 1,
            seed_max_len: 3,
            stored_share: 0.5,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        let frac = |x: f64| (0.0..=1.0).contains(&x);
        if !frac(self.crossover_fraction) || !frac(self.mutation_fraction) || !frac(self.stored_share) {
            return Err(EcoError::Config("evolution fractions must lie in [0, 1]".into()));
        }
        if self.id_penalty == 0 {
            return Err(EcoError::Config("id penalty must be positive".into()));
        }
        if self.seed_min_len == 0 || self.seed_min_len > self.seed_max_len {
            return Err(EcoError::Config("seed lengths must satisfy 1 <= min <= max".into()));
        }
        if self.base_size + self.size_coeff < 1.0 || self.size_coeff < 0.0 {
            return Err(EcoError::Config("population size must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn tuple_distance(r: &AttributeTuple, a: &AttributeTuple, id_penalty: u64) -> u64 {
    id_penalty * r.id.abs_diff(a.id) as u64 + r.value.abs_diff(a.value) as u64
}

/// Summed nearest-attribute distance of every required tuple.
pub fn match_cost(attributes: &[AttributeTuple], request: &[AttributeTuple], id_penalty: u64) -> Result<u64> {
    if attributes.is_empty() || request.is_empty() {
        return Err(EcoError::EmptyFitnessInput);
    }
    Ok(request
        .iter()
        .map(|r| attributes.iter().map(|a| tuple_distance(r, a, id_penalty)).min().unwrap_or(0))
        .sum())
}

pub fn fitness_weighted(attributes: &[AttributeTuple], request: &[AttributeTuple], id_penalty: u64) -> Result<f64> {
    Ok(1.0 / (1.0 + match_cost(attributes, request, id_penalty)? as f64))
}

/// Fitness with the default id penalty.
pub fn fitness(attributes: &[AttributeTuple], request: &[AttributeTuple]) -> Result<f64> {
    fitness_weighted(attributes, request, DEFAULT_ID_PENALTY)
}

/// Concatenated attributes of the agents in a sequence.
pub fn sequence_attributes(seq: &[usize], pool: &[SemanticDescription]) -> Vec<AttributeTuple> {
    seq.iter().flat_map(|&i| pool[i].tuples().iter().copied()).collect()
}

pub fn parsimony_adjust(f: f64, len: usize, avg_len: f64) -> f64 {
    f * (avg_len / len as f64).min(1.0)
}

pub fn population_size(avg_len: f64, p: &EvolutionParams) -> usize {
    ((p.base_size + p.size_coeff * avg_len).round() as usize).max(1)
}

/// Fitness-proportional sampling with replacement. Falls back to uniform
/// sampling when no weight is positive.
pub fn select<R: Rng + ?Sized>(pop: &[AgentSequence], weights: &[f64], size: usize, rng: &mut R) -> Result<Vec<AgentSequence>> {
    if pop.is_empty() {
        return Err(EcoError::EmptyPool);
    }
    let picks: Vec<usize> = match WeightedIndex::new(weights) {
        Ok(dist) => (0..size).map(|_| dist.sample(rng)).collect(),
        Err(_) => (0..size).map(|_| rng.gen_range(0..pop.len())).collect(),
    };
    Ok(picks.into_iter().map(|i| pop[i].clone()).collect())
}

fn cut_point<R: Rng + ?Sized>(len: usize, rng: &mut R) -> usize {
    if len <= 1 {
        1
    } else {
        rng.gen_range(1..len)
    }
}

/// Aligned one-point crossover: one cut position shared by both parents,
/// interior to the shorter one.
pub fn crossover<R: Rng + ?Sized>(a: &[usize], b: &[usize], rng: &mut R) -> (AgentSequence, AgentSequence) {
    let cut = cut_point(a.len().min(b.len()), rng);
    crossover_at(a, b, cut)
}

pub fn crossover_at(a: &[usize], b: &[usize], cut: usize) -> (AgentSequence, AgentSequence) {
    let mut x = a[..cut].to_vec();
    x.extend_from_slice(&b[cut..]);
    let mut y = b[..cut].to_vec();
    y.extend_from_slice(&a[cut..]);
    (x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    Insert,
    Replace,
    Delete,
}

pub fn mutate<R: Rng + ?Sized>(ind: &mut AgentSequence, pool_len: usize, rng: &mut R) -> Result<Mutation> {
    if pool_len == 0 {
        return Err(EcoError::EmptyPool);
    }
    let kind = if ind.len() > 1 {
        [Mutation::Insert, Mutation::Replace, Mutation::Delete][rng.gen_range(0..3)]
    } else {
        [Mutation::Insert, Mutation::Replace][rng.gen_range(0..2)]
    };
    match kind {
        Mutation::Insert => {
            let at = rng.gen_range(0..=ind.len());
            ind.insert(at, rng.gen_range(0..pool_len));
        }
        Mutation::Replace => {
            let at = rng.gen_range(0..ind.len());
            ind[at] = rng.gen_range(0..pool_len);
        }
        Mutation::Delete => {
            let at = rng.gen_range(0..ind.len());
            ind.remove(at);
        }
    }
    Ok(kind)
}

/// Per-agent nearest distances to each request tuple, so that a sequence's
/// cost is a sum of per-tuple minima over its members.
struct CostTable {
    n_req: usize,
    rows: Vec<u64>,
}

impl CostTable {
    fn new(pool: &[SemanticDescription], request: &[AttributeTuple], id_penalty: u64) -> Self {
        let mut rows = Vec::with_capacity(pool.len() * request.len());
        for agent in pool {
            for r in request {
                rows.push(agent.tuples().iter().map(|a| tuple_distance(r, a, id_penalty)).min().unwrap_or(u64::MAX));
            }
        }
        CostTable { n_req: request.len(), rows }
    }

    fn cost(&self, seq: &[usize], scratch: &mut Vec<u64>) -> u64 {
        scratch.clear();
        scratch.resize(self.n_req, u64::MAX);
        for &i in seq {
            let row = &self.rows[i * self.n_req..(i + 1) * self.n_req];
            for (s, &d) in scratch.iter_mut().zip(row) {
                *s = (*s).min(d);
            }
        }
        scratch.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best raw fitness seen so far.
    pub best_fitness: f64,
    pub mean_len: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub best: AgentSequence,
    pub fitness: f64,
    /// Generations run after the initial population.
    pub generations: usize,
    pub trace: Vec<GenerationRecord>,
}

fn initial_population<R: Rng + ?Sized>(
    pool_len: usize,
    stored: &[AgentSequence],
    p: &EvolutionParams,
    rng: &mut R,
) -> Vec<AgentSequence> {
    let mean_seed_len = (p.seed_min_len + p.seed_max_len) as f64 / 2.0;
    let size = population_size(mean_seed_len, p);
    let max_stored = (p.stored_share * size as f64).floor() as usize;
    let mut pop: Vec<AgentSequence> = stored
        .iter()
        .filter(|s| !s.is_empty() && s.iter().all(|&i| i < pool_len))
        .take(max_stored)
        .cloned()
        .collect();
    while pop.len() < size {
        let len = rng.gen_range(p.seed_min_len..=p.seed_max_len);
        pop.push((0..len).map(|_| rng.gen_range(0..pool_len)).collect());
    }
    pop
}

/// Evolves sequences over `pool` against a flattened request. `stored`
/// holds earlier solutions (as pool indices) that join the initial
/// population.
pub fn evolve<R: Rng + ?Sized>(
    request: &[AttributeTuple],
    pool: &[SemanticDescription],
    stored: &[AgentSequence],
    p: &EvolutionParams,
    rng: &mut R,
) -> Result<Evolution> {
    if pool.is_empty() {
        return Err(EcoError::EmptyPool);
    }
    if request.is_empty() {
        return Err(EcoError::EmptyRequest);
    }
    let table = CostTable::new(pool, request, p.id_penalty);
    let mut scratch = Vec::with_capacity(request.len());
    let mut pop = initial_population(pool.len(), stored, p, rng);

    let mut best: AgentSequence = Vec::new();
    let mut best_fit = 0.0;
    let mut trace = Vec::new();
    let mut generation = 0;
    loop {
        let raw: Vec<f64> = pop.iter().map(|s| 1.0 / (1.0 + table.cost(s, &mut scratch) as f64)).collect();
        for (s, &f) in pop.iter().zip(&raw) {
            if f > best_fit {
                best_fit = f;
                best = s.clone();
            }
        }
        let avg_len = pop.iter().map(Vec::len).sum::<usize>() as f64 / pop.len() as f64;
        trace.push(GenerationRecord { generation, best_fitness: best_fit, mean_len: avg_len });
        if best_fit >= 1.0 || generation >= p.max_generations {
            break;
        }
        generation += 1;

        let weights: Vec<f64> = if p.parsimony {
            pop.iter().zip(&raw).map(|(s, &f)| parsimony_adjust(f, s.len(), avg_len)).collect()
        } else {
            raw
        };
        let size = population_size(avg_len, p);
        pop = select(&pop, &weights, size, rng)?;

        let n_cross = (p.crossover_fraction * size as f64).round() as usize;
        if n_cross >= 2 {
            let chosen = sample(rng, size, n_cross.min(size)).into_vec();
            for pair in chosen.chunks_exact(2) {
                let (x, y) = crossover(&pop[pair[0]], &pop[pair[1]], rng);
                pop[pair[0]] = x;
                pop[pair[1]] = y;
            }
        }
        let n_mut = (p.mutation_fraction * size as f64).round() as usize;
        for i in sample(rng, size, n_mut.min(size)) {
            mutate(&mut pop[i], pool.len(), rng)?;
        }
    }
    Ok(Evolution { best, fitness: best_fit, generations: generation, trace })
}
