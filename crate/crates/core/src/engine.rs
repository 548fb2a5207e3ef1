//! The generation loop: evaluation, logging, scaffolding release,
//! trajectory elongation, selection, and variation.
//!
//! A run is a pure function of its config. Fitness evaluations may execute
//! in parallel (they are independent and side-effect free); everything else
//! is sequential, and all randomness comes from labeled streams, so serial
//! and parallel runs produce identical logs.

use rayon::prelude::*;

use crate::config::{ExperimentConfig, SelectionScheme};
use crate::error::CoreError;
use crate::genome::{Genome, InnovationCounter, BIAS_INPUT_ID, SCAFFOLD_ID_BASE};
use crate::network::{compile, NetworkOptions};
use crate::rng::{RngFactory, StreamPurpose};
use crate::selection::{
    select_truncation, EvaluatedIndividual, EvaluatedPopulation, Slot, SpeciationState,
};
use crate::task::{
    evaluate, extend_trajectory, generate_trajectory, TrajectorySpec, SEGMENT_STEPS,
};
use crate::variation::{mutate, MutationContext, OperatorTable, ScaffoldGate, TaskIo};

/// Extensions keep at least this many steps of trajectory beyond the best
/// individual (twenty nominal segments).
const EXTENSION_MARGIN_STEPS: u64 = 20 * SEGMENT_STEPS as u64;
/// Extension triggers once the best individual covers this share of the
/// trajectory.
const EXTENSION_TRIGGER: f64 = 0.9;

/// One line of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: u64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_steps: u64,
    pub best_neurons: usize,
    pub best_connections: usize,
    pub species_count: usize,
    pub trajectory_segments: usize,
    pub scaffold_inputs_available: u32,
}

/// Per-generation records of a single run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<GenerationRecord>,
}

/// One species line of the speciation log.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesRecord {
    pub generation: u64,
    pub species_id: u64,
    pub size: usize,
    pub mean_fitness: f64,
    pub best_fitness: f64,
    pub threshold: f64,
}

/// Best genome of a logged generation.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub generation: u64,
    pub genome: Genome,
    pub fitness: f64,
    pub steps_survived: u64,
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub species_log: Vec<SpeciesRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_population: Vec<EvaluatedIndividual>,
    pub best: Snapshot,
    pub trajectory: TrajectorySpec,
}

fn network_options(config: &ExperimentConfig) -> NetworkOptions {
    NetworkOptions {
        n_outputs: config.task.n_outputs(),
        output_fn: config.features.output_fn,
        ctrnn: config.features.ctrnn,
    }
}

fn evaluate_genomes(
    genomes: &[Genome],
    spec: &TrajectorySpec,
    config: &ExperimentConfig,
) -> Result<Vec<(f64, u64)>, CoreError> {
    let options = network_options(config);
    let task = config.task;
    let period = config.parameters.scaffold_period;
    let horizon = spec.total_steps();
    let simulate = |genome: &Genome| -> Result<(f64, u64), CoreError> {
        let mut phenotype = compile(genome, options)?;
        phenotype.reset();
        let eval = evaluate(&mut phenotype, spec, task, period, horizon)?;
        Ok((eval.fitness, eval.steps_survived))
    };
    if config.parallel {
        genomes.par_iter().map(simulate).collect()
    } else {
        genomes.iter().map(simulate).collect()
    }
}

/// Scaffolding inputs required to cover one step past `best_steps`,
/// rounded up to a whole release batch.
fn scaffold_cover(best_steps: u64, period: u32, batch: u32) -> u32 {
    let needed = (best_steps + 1).div_ceil(period as u64) as u32;
    needed.div_ceil(batch) * batch
}

/// Runs one full experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, CoreError> {
    config.validate()?;
    let factory = RngFactory::new(config.seed);
    let io = TaskIo {
        n_outputs: config.task.n_outputs(),
        normal_inputs: vec![BIAS_INPUT_ID],
    };
    let table = OperatorTable::build(
        config.features.ctrnn,
        config.features.new_pathway,
        &config.operators,
    )?;

    let mut scaffold_available: u32 = if config.features.scaffolding {
        config.parameters.scaffold_batch
    } else {
        0
    };

    let mut innovations = InnovationCounter::new();
    let mut next_genome_id: u64 = 0;

    let ancestor_inputs: Vec<u32> = {
        let mut inputs = io.normal_inputs.clone();
        inputs.extend((0..scaffold_available).map(|k| SCAFFOLD_ID_BASE + k));
        inputs
    };
    let ancestor = crate::genome::make_common_ancestor(
        io.n_outputs,
        &ancestor_inputs,
        &mut innovations,
        &mut factory.stream(StreamPurpose::Ancestor, 0),
    )?;
    let mut genomes: Vec<Genome> = (0..config.population)
        .map(|_| {
            let mut g = ancestor.clone();
            g.id = next_genome_id;
            next_genome_id += 1;
            g
        })
        .collect();

    let mut trajectory_rng = factory.stream(StreamPurpose::Trajectory, 0);
    let mut trajectory = generate_trajectory(
        config.task.dim() as u8,
        config.parameters.initial_segments,
        config.segment_length_mode,
        &mut trajectory_rng,
    );

    let mut speciation = SpeciationState::new(config.speciation_params());
    let mut log = RunLog::default();
    let mut species_log = Vec::new();
    let mut snapshots = Vec::new();
    let mut best_ever: Option<Snapshot> = None;

    for generation in 0..config.generations {
        let results = evaluate_genomes(&genomes, &trajectory, config)?;
        let pop = EvaluatedPopulation {
            individuals: genomes
                .drain(..)
                .zip(&results)
                .map(|(genome, &(fitness, steps_survived))| EvaluatedIndividual {
                    genome,
                    fitness,
                    steps_survived,
                })
                .collect(),
            generation,
        };
        let best_index = pop.best_index();
        let best = &pop.individuals[best_index];

        let species_count = if config.selection.scheme == SelectionScheme::Speciation {
            speciation.assign_species(&pop);
            for species in &speciation.species {
                let fitnesses = species.members.iter().map(|&i| pop.individuals[i].fitness);
                let size = species.members.len();
                species_log.push(SpeciesRecord {
                    generation,
                    species_id: species.id,
                    size,
                    mean_fitness: fitnesses.clone().sum::<f64>() / size as f64,
                    best_fitness: fitnesses.fold(f64::NEG_INFINITY, f64::max),
                    threshold: speciation.threshold,
                });
            }
            speciation.species.len()
        } else {
            0
        };

        log.records.push(GenerationRecord {
            generation,
            best_fitness: best.fitness,
            mean_fitness: pop.individuals.iter().map(|i| i.fitness).sum::<f64>()
                / pop.individuals.len() as f64,
            best_steps: best.steps_survived,
            best_neurons: best.genome.neurons.len(),
            best_connections: best.genome.connections.len(),
            species_count,
            trajectory_segments: trajectory.segments.len(),
            scaffold_inputs_available: scaffold_available,
        });

        let snapshot = Snapshot {
            generation,
            genome: best.genome.clone(),
            fitness: best.fitness,
            steps_survived: best.steps_survived,
        };
        if best_ever
            .as_ref()
            .map_or(true, |prev| snapshot.fitness > prev.fitness)
        {
            best_ever = Some(snapshot.clone());
        }
        if generation % config.parameters.snapshot_every == 0
            || generation + 1 == config.generations
        {
            snapshots.push(snapshot);
        }

        if generation + 1 == config.generations {
            return Ok(RunOutcome {
                log,
                species_log,
                snapshots,
                best: best_ever.expect("at least one generation ran"),
                final_population: pop.individuals,
                trajectory,
            });
        }

        // Release scaffolding inputs and grow the trajectory while the
        // population closes in on its end.
        if config.features.scaffolding {
            scaffold_available = scaffold_available.max(scaffold_cover(
                best.steps_survived,
                config.parameters.scaffold_period,
                config.parameters.scaffold_batch,
            ));
        }
        let total_steps = trajectory.total_steps();
        if best.steps_survived as f64 >= EXTENSION_TRIGGER * total_steps as f64 {
            while trajectory.total_steps() < best.steps_survived + EXTENSION_MARGIN_STEPS {
                trajectory =
                    extend_trajectory(&trajectory, 1, config.segment_length_mode, &mut trajectory_rng);
            }
        }

        let plan = match config.selection.scheme {
            SelectionScheme::Truncation => select_truncation(&pop, config.selection.fraction),
            SelectionScheme::Speciation => {
                let mut rng = factory.stream(StreamPurpose::Selection, generation);
                let slots = speciation.allocate_and_reproduce(&pop, &mut rng);
                speciation.adjust_threshold();
                slots
            }
        };

        let ctx = MutationContext {
            table: table.clone(),
            gate: if config.features.scaffolding {
                ScaffoldGate::with_available(scaffold_available)
            } else {
                ScaffoldGate::disabled()
            },
            io: io.clone(),
            freezing: config.features.freezing,
            window_size: config.parameters.mutable_window,
            sine_hidden: config.features.sine_hidden,
            weight_select_prob: config.parameters.weight_select_prob,
        };
        genomes = plan
            .iter()
            .enumerate()
            .map(|(slot_index, slot)| {
                let parent = &pop.individuals[slot.parent()].genome;
                match slot {
                    Slot::Elite { .. } => parent.clone(),
                    Slot::Offspring { .. } => {
                        let stream =
                            generation * config.population as u64 + slot_index as u64;
                        let mut rng = factory.stream(StreamPurpose::Mutation, stream);
                        let id = next_genome_id;
                        next_genome_id += 1;
                        mutate(parent, &ctx, &mut innovations, id, &mut rng)
                    }
                }
            })
            .collect();
    }
    unreachable!("loop returns on the last generation");
}

/// Rebuilds the trajectory a run with this config would have used, grown to
/// at least `min_steps`. Extensions only ever append segments drawn in
/// order from the trajectory stream, so any prefix of a run's trajectory
/// can be reconstructed without replaying the run itself.
pub fn regenerate_trajectory(config: &ExperimentConfig, min_steps: u64) -> TrajectorySpec {
    let factory = RngFactory::new(config.seed);
    let mut rng = factory.stream(StreamPurpose::Trajectory, 0);
    let mut trajectory = generate_trajectory(
        config.task.dim() as u8,
        config.parameters.initial_segments,
        config.segment_length_mode,
        &mut rng,
    );
    while trajectory.total_steps() < min_steps {
        trajectory = extend_trajectory(&trajectory, 1, config.segment_length_mode, &mut rng);
    }
    trajectory
}

/// Mean and standard error of the per-generation best across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub generation: u64,
    pub mean_best_fitness: f64,
    pub se_best_fitness: f64,
    pub mean_best_steps: f64,
    pub se_best_steps: f64,
}

/// Outcome of a batch of runs over different seeds.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub seeds: Vec<u64>,
    pub runs: Vec<RunOutcome>,
    pub aggregate: Vec<AggregateRecord>,
}

/// Sample mean and standard error (stddev / sqrt(n); 0 for a single run).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0);
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

/// Aggregates already-finished run logs.
pub fn aggregate_logs(logs: &[&RunLog]) -> Vec<AggregateRecord> {
    assert!(!logs.is_empty());
    let generations = logs[0].records.len();
    assert!(logs.iter().all(|l| l.records.len() == generations));
    (0..generations)
        .map(|g| {
            let fitness: Vec<f64> = logs.iter().map(|l| l.records[g].best_fitness).collect();
            let steps: Vec<f64> = logs
                .iter()
                .map(|l| l.records[g].best_steps as f64)
                .collect();
            let (mean_best_fitness, se_best_fitness) = mean_and_stderr(&fitness);
            let (mean_best_steps, se_best_steps) = mean_and_stderr(&steps);
            AggregateRecord {
                generation: logs[0].records[g].generation,
                mean_best_fitness,
                se_best_fitness,
                mean_best_steps,
                se_best_steps,
            }
        })
        .collect()
}

/// Runs the same configuration across `seeds`.
pub fn run_batch(config: &ExperimentConfig, seeds: &[u64]) -> Result<BatchOutcome, CoreError> {
    if seeds.is_empty() {
        return Err(CoreError::InvalidConfig("a batch needs at least one seed".into()));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut run_config = config.clone();
        run_config.seed = seed;
        runs.push(run(&run_config)?);
    }
    let logs: Vec<&RunLog> = runs.iter().map(|r| &r.log).collect();
    let aggregate = aggregate_logs(&logs);
    Ok(BatchOutcome {
        seeds: seeds.to_vec(),
        runs,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::TaskKind;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            population: 40,
            generations: 30,
            seed: 11,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn scaffold_cover_rounds_to_batches() {
        assert_eq!(scaffold_cover(0, 20, 5), 5);
        assert_eq!(scaffold_cover(9, 20, 5), 5);
        assert_eq!(scaffold_cover(99, 20, 5), 5);
        // Surviving 100 steps means period 5 is next: release the second batch.
        assert_eq!(scaffold_cover(100, 20, 5), 10);
        assert_eq!(scaffold_cover(599, 20, 5), 30);
        assert_eq!(scaffold_cover(600, 20, 5), 35);
    }

    #[test]
    fn run_is_deterministic() {
        let config = small_config();
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(
            a.final_population.last().unwrap().genome,
            b.final_population.last().unwrap().genome
        );
    }

    #[test]
    fn parallel_and_serial_agree() {
        let mut config = small_config();
        config.parallel = true;
        let a = run(&config).unwrap();
        config.parallel = false;
        let b = run(&config).unwrap();
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn generation_zero_offers_five_scaffold_inputs() {
        let mut config = small_config();
        config.generations = 1;
        let outcome = run(&config).unwrap();
        assert_eq!(outcome.log.records[0].scaffold_inputs_available, 5);
    }

    #[test]
    fn scaffolding_disabled_never_references_scaffold_inputs() {
        let mut config = small_config();
        config.features.scaffolding = false;
        config.generations = 60;
        let outcome = run(&config).unwrap();
        assert!(outcome
            .log
            .records
            .iter()
            .all(|r| r.scaffold_inputs_available == 0));
        for individual in &outcome.final_population {
            assert!(individual.genome.max_scaffold_input().is_none());
        }
    }

    #[test]
    fn truncation_best_fitness_is_monotone() {
        let config = small_config();
        let outcome = run(&config).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for record in &outcome.log.records {
            assert!(record.best_fitness >= prev);
            prev = record.best_fitness;
        }
    }

    #[test]
    fn trajectory_always_outlasts_best_individual() {
        let config = small_config();
        let outcome = run(&config).unwrap();
        for record in &outcome.log.records {
            let steps: u64 = record.trajectory_segments as u64 * 30;
            assert!(record.best_steps < steps);
        }
    }

    #[test]
    fn scaffold_availability_never_shrinks_and_stays_batched() {
        let config = small_config();
        let outcome = run(&config).unwrap();
        let mut prev = 0;
        for record in &outcome.log.records {
            assert!(record.scaffold_inputs_available >= prev);
            assert_eq!(record.scaffold_inputs_available % 5, 0);
            prev = record.scaffold_inputs_available;
        }
    }

    #[test]
    fn speciation_runs_and_logs_species() {
        let mut config = small_config();
        config.selection.scheme = SelectionScheme::Speciation;
        config.generations = 20;
        let outcome = run(&config).unwrap();
        assert!(!outcome.species_log.is_empty());
        assert!(outcome.log.records.iter().all(|r| r.species_count >= 1));
        // Population size stays constant under apportionment.
        assert_eq!(outcome.final_population.len(), config.population);
    }

    #[test]
    fn nonholonomic_task_runs() {
        let mut config = small_config();
        config.task = TaskKind::SpatialNonholonomic;
        config.generations = 5;
        let outcome = run(&config).unwrap();
        assert_eq!(outcome.log.records.len(), 5);
    }

    #[test]
    fn batch_aggregates_match_reference_formulas() {
        let mut config = small_config();
        config.generations = 10;
        let batch = run_batch(&config, &[1, 2, 3]).unwrap();
        assert_eq!(batch.aggregate.len(), 10);
        let g = 9;
        let values: Vec<f64> = batch
            .runs
            .iter()
            .map(|r| r.log.records[g].best_fitness)
            .collect();
        let mean = values.iter().sum::<f64>() / 3.0;
        let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 2.0).sqrt();
        let agg = &batch.aggregate[g];
        assert!((agg.mean_best_fitness - mean).abs() < 1e-12);
        assert!((agg.se_best_fitness - sd / 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn regenerated_trajectory_is_a_prefix_of_the_run_trajectory() {
        let mut config = small_config();
        config.generations = 40;
        let outcome = run(&config).unwrap();
        let rebuilt = regenerate_trajectory(&config, outcome.trajectory.total_steps());
        assert_eq!(rebuilt.segments, outcome.trajectory.segments);
        let shorter = regenerate_trajectory(&config, 0);
        assert_eq!(
            shorter.segments[..],
            outcome.trajectory.segments[..shorter.segments.len()]
        );
    }

    #[test]
    fn single_run_batch_has_zero_stderr() {
        let mut config = small_config();
        config.generations = 5;
        let batch = run_batch(&config, &[7]).unwrap();
        assert!(batch.aggregate.iter().all(|a| a.se_best_fitness == 0.0));
        // Mean of one constant is that constant.
        assert_eq!(
            batch.aggregate[4].mean_best_fitness,
            batch.runs[0].log.records[4].best_fitness
        );
    }
}
