//! One local evolutionary search per request.
//!
//! Individuals are variable-length sequences of indices into the candidate
//! agents available at the habitat. Lower distance is fitter; ties go to
//! the shorter aggregation, then to the earlier individual.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EcoError, Result};
use crate::habitat::Habitat;
use crate::model::{distance_is_successful, half_unit_distance, Agent, Aggregation, AttributeSet, Request};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub stagnation_limit: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_count: usize,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            population_size: 50,
            max_generations: 100,
            stagnation_limit: 20,
            tournament_size: 3,
            crossover_rate: 0.7,
            mutation_rate: 0.3,
            elite_count: 1,
        }
    }
}

impl EvolutionParams {
    pub fn diagnostics(&self, field: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("population_size", self.population_size),
            ("max_generations", self.max_generations),
            ("stagnation_limit", self.stagnation_limit),
            ("tournament_size", self.tournament_size),
        ] {
            if v == 0 {
                out.push(format!("{field}.{name} must be >= 1"));
            }
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{field}.{name} must lie in [0, 1] (got {v})"));
            }
        }
        if self.elite_count >= self.population_size {
            out.push(format!(
                "{field}.elite_count ({}) must be < population_size ({})",
                self.elite_count, self.population_size
            ));
        }
        if self.tournament_size > self.population_size {
            out.push(format!(
                "{field}.tournament_size ({}) must be <= population_size ({})",
                self.tournament_size, self.population_size
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics("evolution");
        if diags.is_empty() {
            Ok(())
        } else {
            Err(EcoError::Config(diags.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Individual {
    pub genes: Vec<u32>,
    /// Twice the semantic distance.
    pub half_distance: u32,
}

impl Individual {
    pub fn distance(&self) -> f64 {
        self.half_distance as f64 / 2.0
    }

    fn rank_key(&self, index: usize) -> (u32, usize, usize) {
        (self.half_distance, self.genes.len(), index)
    }
}

/// The evolving population for one request.
#[derive(Debug, Clone)]
pub struct Population<'a> {
    request: &'a Request,
    /// Pool agents first, then agents reachable only through cached
    /// applications.
    candidates: Vec<Arc<Agent>>,
    descriptions: Vec<AttributeSet>,
    pool_len: usize,
    pub individuals: Vec<Individual>,
}

impl<'a> Population<'a> {
    pub fn request(&self) -> &Request {
        self.request
    }

    pub fn candidates(&self) -> &[Arc<Agent>] {
        &self.candidates
    }

    pub fn pool_len(&self) -> usize {
        self.pool_len
    }

    pub fn evaluate(&self, genes: &[u32]) -> u32 {
        half_unit_distance(
            &self.request.tasks,
            genes.iter().map(|&g| &self.descriptions[g as usize]),
        )
    }

    fn individual(&self, genes: Vec<u32>) -> Individual {
        let half_distance = self.evaluate(&genes);
        Individual { genes, half_distance }
    }

    /// Index of the fittest individual.
    pub fn best_index(&self) -> usize {
        self.individuals
            .iter()
            .enumerate()
            .min_by_key(|(i, ind)| ind.rank_key(*i))
            .map(|(i, _)| i)
            .expect("population is never empty")
    }

    pub fn best(&self) -> &Individual {
        &self.individuals[self.best_index()]
    }

    pub fn aggregation(&self, genes: &[u32]) -> Aggregation {
        Aggregation::new(
            genes
                .iter()
                .map(|&g| Arc::clone(&self.candidates[g as usize]))
                .collect(),
        )
    }

    fn random_pool_gene<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(0..self.pool_len) as u32
    }

    fn tournament<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> usize {
        (0..size)
            .map(|_| rng.random_range(0..self.individuals.len()))
            .min_by_key(|&i| self.individuals[i].rank_key(i))
            .expect("tournament size is positive")
    }

    fn mutate<R: Rng + ?Sized>(&self, genes: &mut Vec<u32>, rng: &mut R) {
        match rng.random_range(0..3) {
            0 => {
                let pos = rng.random_range(0..=genes.len());
                genes.insert(pos, self.random_pool_gene(rng));
            }
            1 => {
                if genes.len() > 1 {
                    let pos = rng.random_range(0..genes.len());
                    genes.remove(pos);
                }
            }
            _ => {
                let pos = rng.random_range(0..genes.len());
                genes[pos] = self.random_pool_gene(rng);
            }
        }
    }

    /// Replaces the individuals with the next generation.
    pub fn evolve<R: Rng + ?Sized>(&mut self, params: &EvolutionParams, rng: &mut R) {
        let size = params.population_size;
        let mut order: Vec<usize> = (0..self.individuals.len()).collect();
        order.sort_by_key(|&i| self.individuals[i].rank_key(i));

        let mut next = Vec::with_capacity(size);
        next.extend(
            order
                .iter()
                .take(params.elite_count)
                .map(|&i| self.individuals[i].clone()),
        );
        while next.len() < size {
            let first = &self.individuals[self.tournament(params.tournament_size, rng)].genes;
            let mut child = if rng.random_bool(params.crossover_rate) {
                let second = &self.individuals[self.tournament(params.tournament_size, rng)].genes;
                one_point_crossover(
                    first,
                    second,
                    rng.random_range(1..=first.len()),
                    rng.random_range(0..=second.len()),
                )
            } else {
                first.clone()
            };
            if rng.random_bool(params.mutation_rate) {
                self.mutate(&mut child, rng);
            }
            next.push(self.individual(child));
        }
        self.individuals = next;
    }
}

/// `first[..cut_first]` followed by `second[cut_second..]`; the cut points
/// are independent, so the child length varies.
pub fn one_point_crossover<T: Clone>(
    first: &[T],
    second: &[T],
    cut_first: usize,
    cut_second: usize,
) -> Vec<T> {
    let mut child = Vec::with_capacity(cut_first + second.len() - cut_second);
    child.extend_from_slice(&first[..cut_first]);
    child.extend_from_slice(&second[cut_second..]);
    child
}

/// Seeds a population from the habitat: mostly random sequences of pool
/// agents, plus up to a quarter of copies of cached applications evolved
/// for requests sharing at least half of this request's attribute ids.
pub fn instantiate_population<'a, R: Rng + ?Sized>(
    habitat: &Habitat,
    request: &'a Request,
    params: &EvolutionParams,
    rng: &mut R,
) -> Result<Population<'a>> {
    if habitat.pool().is_empty() {
        return Err(EcoError::Unservable { habitat: habitat.id });
    }
    let mut candidates: Vec<Arc<Agent>> = habitat.pool().to_vec();
    let pool_len = candidates.len();

    let signature = request.signature();
    let cap = params.population_size / 4;
    let mut seeded: Vec<Vec<u32>> = Vec::new();
    for cached in habitat.cache().rev() {
        if seeded.len() >= cap {
            break;
        }
        if cached.aggregation.is_empty()
            || 2 * cached.signature.intersection_len(&signature) < signature.len()
        {
            continue;
        }
        let genes = cached
            .aggregation
            .agents
            .iter()
            .map(|agent| {
                let idx = candidates
                    .iter()
                    .position(|c| Arc::ptr_eq(c, agent))
                    .unwrap_or_else(|| {
                        candidates.push(Arc::clone(agent));
                        candidates.len() - 1
                    });
                idx as u32
            })
            .collect();
        seeded.push(genes);
    }

    let descriptions = candidates.iter().map(|a| a.description).collect();
    let mut population = Population {
        request,
        candidates,
        descriptions,
        pool_len,
        individuals: Vec::with_capacity(params.population_size),
    };
    let max_len = 2 * request.len().max(1);
    let mut genomes = seeded;
    while genomes.len() < params.population_size {
        let len = rng.random_range(1..=max_len);
        genomes.push((0..len).map(|_| population.random_pool_gene(rng)).collect());
    }
    population.individuals = genomes.into_iter().map(|g| population.individual(g)).collect();
    Ok(population)
}

/// Advances `population` by one generation.
pub fn evolve_generation<'a, R: Rng + ?Sized>(
    mut population: Population<'a>,
    params: &EvolutionParams,
    rng: &mut R,
) -> Population<'a> {
    population.evolve(params, rng);
    population
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub best: Aggregation,
    pub best_distance: f64,
    /// Populations evaluated, counting the initial one.
    pub generations_used: usize,
    pub succeeded: bool,
}

/// Evolves until a perfect match, `stagnation_limit` generations without
/// improvement, or `max_generations` populations.
pub fn run_evolution<R: Rng + ?Sized>(
    habitat: &Habitat,
    request: &Request,
    params: &EvolutionParams,
    threshold_fraction: f64,
    rng: &mut R,
) -> Result<EvolutionResult> {
    let mut population = instantiate_population(habitat, request, params, rng)?;
    let mut best = population.best().clone();
    let mut generations = 1;
    let mut stagnant = 0;
    while best.half_distance > 0 && stagnant < params.stagnation_limit && generations < params.max_generations
    {
        population.evolve(params, rng);
        generations += 1;
        let current = population.best();
        debug_assert!(
            params.elite_count == 0 || current.half_distance <= best.half_distance,
            "elitism lost the best individual"
        );
        if (current.half_distance, current.genes.len()) < (best.half_distance, best.genes.len()) {
            if current.half_distance < best.half_distance {
                stagnant = 0;
            } else {
                stagnant += 1;
            }
            best = current.clone();
        } else {
            stagnant += 1;
        }
    }
    let best_distance = best.distance();
    Ok(EvolutionResult {
        best: population.aggregation(&best.genes),
        best_distance,
        generations_used: generations,
        succeeded: !best.genes.is_empty()
            && distance_is_successful(best_distance, request, threshold_fraction),
    })
}
