//! Property tests for the invariants that hold across module boundaries:
//! genome well-formedness under arbitrary mutation chains, serialization
//! round-trips, the distance pseudometric, trajectory prefix stability and
//! output ranges.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trajneat::genome::{
    deserialize_genome, make_common_ancestor, serialize_genome, Genome, InnovationCounter,
    WEIGHT_LIMIT,
};
use trajneat::network::{compile, NetworkOptions, OutputFn};
use trajneat::selection::genome_distance;
use trajneat::task::{extend_trajectory, generate_trajectory, SegmentLengthMode};
use trajneat::variation::{
    mutate, MutationContext, OperatorOverrides, OperatorTable, ScaffoldGate, TaskIo,
};

fn standard_ctx(scaffold_available: u32) -> MutationContext {
    MutationContext {
        table: OperatorTable::build(true, true, &OperatorOverrides::default()).unwrap(),
        gate: ScaffoldGate::with_available(scaffold_available),
        io: TaskIo {
            n_outputs: 4,
            normal_inputs: vec![0],
        },
        freezing: true,
        window_size: 25,
        sine_hidden: true,
        weight_select_prob: 0.5,
    }
}

/// Ancestor plus `n` chained mutations, all driven by one seed.
fn mutated_genome(seed: u64, mutations: usize) -> Genome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counter = InnovationCounter::new();
    let mut genome = make_common_ancestor(
        4,
        &[0, 1000, 1001, 1002, 1003, 1004],
        &mut counter,
        &mut rng,
    )
    .unwrap();
    let ctx = standard_ctx(15);
    for i in 0..mutations {
        genome = mutate(&genome, &ctx, &mut counter, 1 + i as u64, &mut rng);
    }
    genome
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Innovation numbers stay strictly increasing along both gene
    /// sequences and all invariants hold through any mutation chain.
    #[test]
    fn mutation_chains_preserve_genome_invariants(seed in 0u64..1000, n in 0usize..120) {
        let genome = mutated_genome(seed, n);
        prop_assert!(genome.check_invariants().is_ok());
        for pair in genome.neurons.windows(2) {
            prop_assert!(pair[0].id < pair[1].id);
        }
        for pair in genome.connections.windows(2) {
            prop_assert!(pair[0].innovation < pair[1].innovation);
        }
        for conn in &genome.connections {
            prop_assert!(conn.weight.abs() <= WEIGHT_LIMIT);
        }
    }

    /// serialize . deserialize is the identity on mutated genomes.
    #[test]
    fn serialization_round_trips(seed in 0u64..500, n in 0usize..60) {
        let genome = mutated_genome(seed, n);
        let text = serialize_genome(&genome);
        let back = deserialize_genome(&text).unwrap();
        prop_assert_eq!(&back, &genome);
        prop_assert_eq!(serialize_genome(&back), text);
    }

    /// The dissimilarity is a pseudometric on genomes of shared lineage
    /// (gene sets are nested along a mutation chain, which is what
    /// speciation actually compares).
    #[test]
    fn distance_is_a_pseudometric(seed in 0u64..60, a in 0usize..30, db in 0usize..30, dc in 0usize..30) {
        let ga = mutated_genome(seed, a);
        let gb = mutated_genome(seed, a + db);
        let gc = mutated_genome(seed, a + db + dc);
        let d = |x: &Genome, y: &Genome| genome_distance(x, y, 1.0, 1.0);
        prop_assert_eq!(d(&ga, &ga), 0.0);
        prop_assert_eq!(d(&ga, &gb), d(&gb, &ga));
        prop_assert!(d(&ga, &gc) <= d(&ga, &gb) + d(&gb, &gc) + 1e-9);
    }

    /// Trajectory extension never rewrites the existing prefix.
    #[test]
    fn trajectory_extension_is_prefix_stable(seed in 0u64..500, extensions in 1usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mode = if seed % 2 == 0 { SegmentLengthMode::Fixed } else { SegmentLengthMode::Uniform };
        let dim = if seed % 3 == 0 { 3 } else { 2 };
        let mut spec = generate_trajectory(dim, 5, mode, &mut rng);
        let original = spec.clone();
        for _ in 0..extensions {
            spec = extend_trajectory(&spec, 1, mode, &mut rng);
        }
        prop_assert_eq!(&spec.segments[..5], &original.segments[..]);
        prop_assert_eq!(spec.segments.len(), 5 + extensions);
    }

    /// Sine and tanh network outputs always land in [-1, 1]; every node
    /// state stays finite.
    #[test]
    fn outputs_stay_in_range(seed in 0u64..200, n in 0usize..80) {
        let genome = mutated_genome(seed, n);
        for output_fn in [OutputFn::Sine, OutputFn::Tanh] {
            let mut phenotype = compile(&genome, NetworkOptions {
                n_outputs: 4,
                output_fn,
                ctrnn: seed % 2 == 0,
            }).unwrap();
            for t in 0..40u32 {
                let out = phenotype
                    .step_fn(move |id| if id == 0 { 1.0 } else { ((id + t) % 3) as f64 * 0.5 })
                    .unwrap();
                for v in out {
                    prop_assert!((-1.0..=1.0).contains(v));
                }
                let (activations, node_outputs) = phenotype.node_state();
                prop_assert!(activations.iter().all(|a| a.is_finite()));
                prop_assert!(node_outputs.iter().all(|o| o.is_finite()));
            }
        }
    }

    /// One offspring differs from its parent by at most one operator's
    /// effect: gene counts grow by at most (1 neuron, 2 connections), and
    /// shared genes differ only in weight, flag, or tau.
    #[test]
    fn offspring_differ_by_one_operator(seed in 0u64..300, n in 0usize..50) {
        let parent = mutated_genome(seed, n);
        let mut counter = InnovationCounter::new();
        let top = parent
            .connections
            .last()
            .map(|c| c.innovation)
            .unwrap_or(0)
            .max(parent.neurons.last().map(|g| g.id).unwrap_or(0));
        while counter.peek() <= top {
            counter.next_id();
        }
        let ctx = standard_ctx(15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let child = mutate(&parent, &ctx, &mut counter, 9999, &mut rng);
        prop_assert!(child.neurons.len() - parent.neurons.len() <= 1);
        prop_assert!(child.connections.len() - parent.connections.len() <= 2);
        for (a, b) in parent.neurons.iter().zip(&child.neurons) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(a.transfer, b.transfer);
        }
        for (a, b) in parent.connections.iter().zip(&child.connections) {
            prop_assert_eq!(a.innovation, b.innovation);
            prop_assert_eq!(a.source, b.source);
            prop_assert_eq!(a.target, b.target);
        }
    }
}
