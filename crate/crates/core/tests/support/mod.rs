//! Shared helpers for the integration and acceptance suites: a naive
//! reference network evaluator kept independent of the compiled path, plus
//! genome generators.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use trajneat::genome::{
    ConnectionGene, Genome, InputId, NeuronGene, NeuronId, Source, Target, Transfer,
};
use trajneat::network::OutputFn;

/// Naive genome interpreter: id-keyed maps, no compilation, one
/// synchronous step at a time.
pub struct ReferenceNet {
    activations: HashMap<NeuronId, f64>,
    outputs: HashMap<NeuronId, f64>,
    ctrnn: bool,
}

impl ReferenceNet {
    pub fn new(genome: &Genome, ctrnn: bool) -> Self {
        Self {
            activations: genome.neurons.iter().map(|n| (n.id, 0.0)).collect(),
            outputs: genome.neurons.iter().map(|n| (n.id, 0.0)).collect(),
            ctrnn,
        }
    }

    pub fn step(
        &mut self,
        genome: &Genome,
        n_outputs: u32,
        output_fn: OutputFn,
        inputs: &HashMap<InputId, f64>,
    ) -> Vec<f64> {
        let mut new_activations = HashMap::new();
        let mut new_outputs = HashMap::new();
        for neuron in &genome.neurons {
            let mut sum = 0.0;
            for conn in genome.connections.iter().filter(|c| c.active) {
                if conn.target != Target::Neuron(neuron.id) {
                    continue;
                }
                let value = match conn.source {
                    Source::Input(id) => inputs.get(&id).copied().unwrap_or(0.0),
                    Source::Neuron(id) => self.outputs[&id],
                };
                sum += conn.weight * value;
            }
            let activation = if self.ctrnn {
                neuron.tau * sum + (1.0 - neuron.tau) * self.activations[&neuron.id]
            } else {
                sum
            };
            new_activations.insert(neuron.id, activation);
            new_outputs.insert(
                neuron.id,
                match neuron.transfer {
                    Transfer::Tanh => activation.tanh(),
                    Transfer::Sine => (PI * activation).sin(),
                },
            );
        }
        self.activations = new_activations;
        self.outputs = new_outputs;

        (0..n_outputs)
            .map(|out| {
                let contributions: Vec<f64> = genome
                    .connections
                    .iter()
                    .filter(|c| c.active && c.target == Target::Output(out))
                    .map(|c| match c.source {
                        Source::Neuron(id) => self.outputs[&id],
                        Source::Input(_) => unreachable!("inputs never feed outputs"),
                    })
                    .collect();
                let sum: f64 = contributions.iter().sum();
                match output_fn {
                    OutputFn::Sine => (PI * sum).sin(),
                    OutputFn::Tanh => sum.tanh(),
                    OutputFn::Mean => {
                        if contributions.is_empty() {
                            0.0
                        } else {
                            sum / contributions.len() as f64
                        }
                    }
                }
            })
            .collect()
    }
}

/// Random genome with up to `max_neurons` neurons and arbitrary wiring;
/// roughly 40% pairwise connectivity, 15% inactive connections.
pub fn random_genome(rng: &mut ChaCha8Rng, max_neurons: u64, n_outputs: u32) -> Genome {
    let mut genome = Genome::empty(0);
    let n = rng.random_range(1..=max_neurons);
    for id in 0..n {
        genome.neurons.push(NeuronGene {
            id,
            tau: rng.random_range(0.05..=1.0),
            transfer: if rng.random::<bool>() {
                Transfer::Tanh
            } else {
                Transfer::Sine
            },
        });
    }
    let mut innovation = n;
    let inputs: [InputId; 3] = [0, 1000, 1001];
    for source_neuron in 0..n {
        for target_neuron in 0..n {
            if rng.random::<f64>() < 0.4 {
                genome.connections.push(ConnectionGene {
                    innovation,
                    source: Source::Neuron(source_neuron),
                    target: Target::Neuron(target_neuron),
                    weight: rng.random_range(-3.0..=3.0),
                    active: rng.random::<f64>() < 0.85,
                });
                innovation += 1;
            }
        }
    }
    for &input in &inputs {
        for target_neuron in 0..n {
            if rng.random::<f64>() < 0.4 {
                genome.connections.push(ConnectionGene {
                    innovation,
                    source: Source::Input(input),
                    target: Target::Neuron(target_neuron),
                    weight: rng.random_range(-3.0..=3.0),
                    active: true,
                });
                innovation += 1;
            }
        }
    }
    for out in 0..n_outputs {
        for source_neuron in 0..n {
            if rng.random::<f64>() < 0.5 {
                genome.connections.push(ConnectionGene {
                    innovation,
                    source: Source::Neuron(source_neuron),
                    target: Target::Output(out),
                    weight: 1.0,
                    active: true,
                });
                innovation += 1;
            }
        }
    }
    genome
}

/// Solves `sin(pi (s + delta)) = v` for a delta in [-1, 1]; the sine's
/// period in s-units is 2, so the bounded interval always covers one full
/// period and a solution exists for any v in [-1, 1].
pub fn homogeneity_delta(s: f64, v: f64) -> Option<f64> {
    let base = v.asin() / PI;
    for branch in [base, 1.0 - base] {
        let delta = branch - s;
        let wrapped = delta - 2.0 * ((delta + 1.0) / 2.0).floor();
        if (-1.0..=1.0).contains(&wrapped) {
            let out = (PI * (s + wrapped)).sin();
            if (out - v).abs() <= 1e-9 {
                return Some(wrapped);
            }
        }
    }
    None
}
