//! Truncation selection with elitism and speciation selection with
//! threshold adaptation and a stagnation penalty.
//!
//! Both schemes produce a reproduction plan — a list of slots naming which
//! parent each next-generation individual comes from and whether it is an
//! unmutated elite copy — which the engine then turns into genomes. All tie
//! breaking is by lower genome id so plans are fully deterministic.

use rand::Rng;

use crate::genome::Genome;

/// One evaluated individual.
#[derive(Debug, Clone)]
pub struct EvaluatedIndividual {
    pub genome: Genome,
    pub fitness: f64,
    pub steps_survived: u64,
}

/// A generation after fitness evaluation.
#[derive(Debug, Clone)]
pub struct EvaluatedPopulation {
    pub individuals: Vec<EvaluatedIndividual>,
    pub generation: u64,
}

impl EvaluatedPopulation {
    /// Index of the best individual (highest fitness, then lowest genome id).
    pub fn best_index(&self) -> usize {
        best_of(&self.individuals, (0..self.individuals.len()).collect())
    }
}

fn best_of(individuals: &[EvaluatedIndividual], mut indices: Vec<usize>) -> usize {
    sort_by_fitness(individuals, &mut indices);
    indices[0]
}

/// Sorts indices by fitness descending, breaking ties toward the *newest*
/// genome id. Newer-wins ties are what lets behaviorally neutral offspring
/// (above all the new-pathway mutation, which never changes the network
/// output) replace their parents and drift into the population; with
/// older-wins ties every neutral variant would lose to its parent and
/// neutral structure could never be adopted.
fn sort_by_fitness(individuals: &[EvaluatedIndividual], indices: &mut [usize]) {
    indices.sort_by(|&a, &b| {
        individuals[b]
            .fitness
            .partial_cmp(&individuals[a].fitness)
            .expect("fitness is finite")
            .then(individuals[b].genome.id.cmp(&individuals[a].genome.id))
    });
}

/// One slot of the next generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Unmutated copy of the parent.
    Elite { parent: usize },
    /// Mutated offspring of the parent.
    Offspring { parent: usize },
}

impl Slot {
    pub fn parent(&self) -> usize {
        match *self {
            Slot::Elite { parent } | Slot::Offspring { parent } => parent,
        }
    }

    pub fn is_elite(&self) -> bool {
        matches!(self, Slot::Elite { .. })
    }
}

/// Keeps the best `fraction` as parents; each parent survives unchanged and
/// the remaining slots are offspring dealt round-robin over the sorted
/// parent list.
pub fn select_truncation(pop: &EvaluatedPopulation, fraction: f64) -> Vec<Slot> {
    let n = pop.individuals.len();
    assert!(n > 0, "population must not be empty");
    let mut order: Vec<usize> = (0..n).collect();
    sort_by_fitness(&pop.individuals, &mut order);
    let n_parents = ((fraction * n as f64).ceil() as usize).clamp(1, n);

    let mut slots = Vec::with_capacity(n);
    for &parent in &order[..n_parents] {
        slots.push(Slot::Elite { parent });
    }
    for j in 0..n - n_parents {
        slots.push(Slot::Offspring {
            parent: order[j % n_parents],
        });
    }
    slots
}

/// Dissimilarity `d = c_r * r_c + c_w * sum |dw|` where `r_c` counts
/// connection innovations present in exactly one genome and the weight term
/// runs over shared innovations.
pub fn genome_distance(a: &Genome, b: &Genome, c_r: f64, c_w: f64) -> f64 {
    let mut disjoint = 0usize;
    let mut weight_diff = 0.0;
    let (mut i, mut j) = (0, 0);
    let (ca, cb) = (&a.connections, &b.connections);
    while i < ca.len() && j < cb.len() {
        match ca[i].innovation.cmp(&cb[j].innovation) {
            std::cmp::Ordering::Equal => {
                weight_diff += (ca[i].weight - cb[j].weight).abs();
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                disjoint += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                disjoint += 1;
                j += 1;
            }
        }
    }
    disjoint += ca.len() - i + cb.len() - j;
    c_r * disjoint as f64 + c_w * weight_diff
}

/// Numeric knobs of speciation selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciationParams {
    pub c_r: f64,
    pub c_w: f64,
    pub initial_threshold: f64,
    pub target_species_min: usize,
    pub target_species_max: usize,
    pub threshold_step: f64,
    pub threshold_floor: f64,
    pub stagnation_limit: u64,
    pub stagnation_penalty: f64,
    /// Fraction of each species deleted before parents are drawn.
    pub cull_fraction: f64,
    /// Species with at least this many offspring keep their best unchanged.
    pub elite_min_offspring: usize,
}

impl Default for SpeciationParams {
    fn default() -> Self {
        Self {
            c_r: 1.0,
            c_w: 1.0,
            initial_threshold: 4.0,
            target_species_min: 10,
            target_species_max: 20,
            threshold_step: 0.3,
            threshold_floor: 0.1,
            stagnation_limit: 200,
            stagnation_penalty: 0.01,
            cull_fraction: 0.6,
            elite_min_offspring: 5,
        }
    }
}

/// One species: a representative genome plus this generation's members.
#[derive(Debug, Clone)]
pub struct Species {
    pub id: u64,
    pub representative: Genome,
    pub members: Vec<usize>,
    pub best_fitness_ever: f64,
    pub last_improvement: u64,
}

/// Carries species identity and the adaptive threshold across generations.
#[derive(Debug, Clone)]
pub struct SpeciationState {
    pub species: Vec<Species>,
    pub threshold: f64,
    pub params: SpeciationParams,
    next_species_id: u64,
}

impl SpeciationState {
    pub fn new(params: SpeciationParams) -> Self {
        Self {
            species: Vec::new(),
            threshold: params.initial_threshold,
            params,
            next_species_id: 0,
        }
    }

    /// Partitions the population: each individual joins the first species
    /// whose representative is closer than the threshold, otherwise founds
    /// a new species with itself as representative. Species left empty
    /// disappear. Representatives persist across generations.
    pub fn assign_species(&mut self, pop: &EvaluatedPopulation) {
        for species in &mut self.species {
            species.members.clear();
        }
        for (index, individual) in pop.individuals.iter().enumerate() {
            let found = self.species.iter().position(|s| {
                genome_distance(
                    &individual.genome,
                    &s.representative,
                    self.params.c_r,
                    self.params.c_w,
                ) < self.threshold
            });
            match found {
                Some(s) => self.species[s].members.push(index),
                None => {
                    self.species.push(Species {
                        id: self.next_species_id,
                        representative: individual.genome.clone(),
                        members: vec![index],
                        best_fitness_ever: f64::NEG_INFINITY,
                        last_improvement: pop.generation,
                    });
                    self.next_species_id += 1;
                }
            }
        }
        self.species.retain(|s| !s.members.is_empty());
    }

    /// Widens or narrows the compatibility threshold to steer the species
    /// count into the target range.
    pub fn adjust_threshold(&mut self) {
        if self.species.len() > self.params.target_species_max {
            self.threshold += self.params.threshold_step;
        } else if self.species.len() < self.params.target_species_min {
            self.threshold =
                (self.threshold - self.params.threshold_step).max(self.params.threshold_floor);
        }
    }

    /// Apportions offspring to species by (penalized) mean fitness and
    /// plans reproduction inside each species: the worst 60% never breed,
    /// survivors are drawn uniformly, and any species allocated at least
    /// five slots keeps its best member unchanged.
    pub fn allocate_and_reproduce(
        &mut self,
        pop: &EvaluatedPopulation,
        rng: &mut impl Rng,
    ) -> Vec<Slot> {
        let n = pop.individuals.len();
        assert!(!self.species.is_empty(), "assign_species must run first");

        // Track stagnation before computing allocations.
        for species in &mut self.species {
            let best = species
                .members
                .iter()
                .map(|&i| pop.individuals[i].fitness)
                .fold(f64::NEG_INFINITY, f64::max);
            if best > species.best_fitness_ever {
                species.best_fitness_ever = best;
                species.last_improvement = pop.generation;
            }
        }

        let global_best = pop.best_index();
        let mut means: Vec<f64> = self
            .species
            .iter()
            .map(|s| {
                s.members.iter().map(|&i| pop.individuals[i].fitness).sum::<f64>()
                    / s.members.len() as f64
            })
            .collect();
        for (species, mean) in self.species.iter().zip(means.iter_mut()) {
            let stagnant =
                pop.generation.saturating_sub(species.last_improvement) > self.params.stagnation_limit;
            let has_best = species.members.contains(&global_best);
            if stagnant && !has_best {
                *mean *= self.params.stagnation_penalty;
            }
        }
        if means.iter().sum::<f64>() <= 0.0 {
            means.fill(1.0);
        }

        let counts = largest_remainder(n, &means);
        let mut slots = Vec::with_capacity(n);
        for (species, &count) in self.species.iter().zip(&counts) {
            if count == 0 {
                continue;
            }
            let mut ranked = species.members.clone();
            sort_by_fitness(&pop.individuals, &mut ranked);
            let culled = (self.params.cull_fraction * ranked.len() as f64).floor() as usize;
            let survivors = &ranked[..ranked.len() - culled];

            let mut remaining = count;
            if count >= self.params.elite_min_offspring {
                slots.push(Slot::Elite { parent: survivors[0] });
                remaining -= 1;
            }
            for _ in 0..remaining {
                let parent = survivors[rng.random_range(0..survivors.len())];
                slots.push(Slot::Offspring { parent });
            }
        }
        slots
    }
}

/// Splits `total` into integer parts proportional to `weights`, assigning
/// leftovers by largest fractional remainder (ties to the earlier entry).
fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).expect("finite quotas").then(a.cmp(&b))
    });
    for i in 0..total - assigned {
        counts[order[i % order.len()]] += 1;
    }
    counts
}
