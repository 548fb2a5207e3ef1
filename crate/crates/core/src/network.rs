//! Compiles a genome into an executable recurrent network and runs the
//! synchronous time-stepped update.
//!
//! Every neuron reads the *previous* step's neuron outputs plus the current
//! input values, so update order inside a step never matters. Network
//! outputs are read from the just-updated neuron outputs through the
//! configured aggregation function.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::genome::{Genome, InputId, Source, Target, Transfer};

/// Output aggregation applied to the sum of weight-1 contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFn {
    /// `sin(pi x)` — homogeneous: periodic, so one extra bounded
    /// contribution can always reach any value in [-1, 1].
    Sine,
    /// `tanh(x)` — saturates for large sums.
    Tanh,
    /// Arithmetic mean of the contributions (0.0 for none).
    Mean,
}

/// Compile-time options taken from the experiment features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkOptions {
    pub n_outputs: u32,
    pub output_fn: OutputFn,
    pub ctrnn: bool,
}

#[derive(Debug, Clone, Copy)]
enum EdgeSource {
    Input(InputId),
    Node(usize),
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    source: EdgeSource,
    weight: f64,
}

/// Executable network with mutable per-node state. One phenotype must be
/// driven by one thread at a time; compiling is pure and cheap.
#[derive(Debug, Clone)]
pub struct Phenotype {
    options: NetworkOptions,
    taus: Vec<f64>,
    transfers: Vec<Transfer>,
    /// Incoming edges of all nodes, flattened; `edge_ranges[i]` slices them.
    edges: Vec<Edge>,
    edge_ranges: Vec<(u32, u32)>,
    /// Node indices contributing to each network output.
    output_groups: Vec<Vec<usize>>,
    activations: Vec<f64>,
    outputs_prev: Vec<f64>,
    outputs_next: Vec<f64>,
    net_outputs: Vec<f64>,
}

/// Builds the evaluation structure for `genome`. Inactive connections are
/// skipped entirely; node state starts at 0.0.
pub fn compile(genome: &Genome, options: NetworkOptions) -> Result<Phenotype, CoreError> {
    let n = genome.neurons.len();
    let index_of: HashMap<u64, usize> = genome
        .neurons
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id, i))
        .collect();

    let mut incoming: Vec<Vec<Edge>> = vec![Vec::new(); n];
    let mut output_groups: Vec<Vec<usize>> = vec![Vec::new(); options.n_outputs as usize];
    for conn in genome.connections.iter().filter(|c| c.active) {
        let dangling = |what: String| CoreError::Compile {
            genome: genome.id,
            message: format!("connection {} references {what}", conn.innovation),
        };
        let source = match conn.source {
            Source::Input(id) => EdgeSource::Input(id),
            Source::Neuron(id) => EdgeSource::Node(
                *index_of
                    .get(&id)
                    .ok_or_else(|| dangling(format!("missing neuron {id}")))?,
            ),
        };
        match conn.target {
            Target::Neuron(id) => {
                let node = *index_of
                    .get(&id)
                    .ok_or_else(|| dangling(format!("missing neuron {id}")))?;
                incoming[node].push(Edge {
                    source,
                    weight: conn.weight,
                });
            }
            Target::Output(out) => {
                if out >= options.n_outputs {
                    return Err(dangling(format!("missing output {out}")));
                }
                match source {
                    EdgeSource::Node(node) => output_groups[out as usize].push(node),
                    EdgeSource::Input(_) => {
                        return Err(dangling("an input-to-output link".into()));
                    }
                }
            }
        }
    }

    let mut edges = Vec::new();
    let mut edge_ranges = Vec::with_capacity(n);
    for list in incoming {
        let start = edges.len() as u32;
        edges.extend(list);
        edge_ranges.push((start, edges.len() as u32));
    }

    Ok(Phenotype {
        options,
        taus: genome.neurons.iter().map(|g| g.tau).collect(),
        transfers: genome.neurons.iter().map(|g| g.transfer).collect(),
        edges,
        edge_ranges,
        output_groups,
        activations: vec![0.0; n],
        outputs_prev: vec![0.0; n],
        outputs_next: vec![0.0; n],
        net_outputs: vec![0.0; options.n_outputs as usize],
    })
}

impl Phenotype {
    pub fn node_count(&self) -> usize {
        self.activations.len()
    }

    pub fn options(&self) -> NetworkOptions {
        self.options
    }

    /// Clears all node state back to the freshly compiled values.
    pub fn reset(&mut self) {
        self.activations.fill(0.0);
        self.outputs_prev.fill(0.0);
        self.outputs_next.fill(0.0);
        self.net_outputs.fill(0.0);
    }

    /// One synchronous update; `input` supplies the current value of every
    /// input id (unconnected ids are simply never queried).
    pub fn step_fn(&mut self, input: impl Fn(InputId) -> f64) -> Result<&[f64], CoreError> {
        for node in 0..self.activations.len() {
            let (start, end) = self.edge_ranges[node];
            let mut sum = 0.0;
            for edge in &self.edges[start as usize..end as usize] {
                let value = match edge.source {
                    EdgeSource::Node(j) => self.outputs_prev[j],
                    EdgeSource::Input(id) => {
                        let v = input(id);
                        if !v.is_finite() {
                            return Err(CoreError::NonFiniteInput { input: id });
                        }
                        v
                    }
                };
                sum += edge.weight * value;
            }
            let activation = if self.options.ctrnn {
                let tau = self.taus[node];
                tau * sum + (1.0 - tau) * self.activations[node]
            } else {
                sum
            };
            self.activations[node] = activation;
            self.outputs_next[node] = match self.transfers[node] {
                Transfer::Tanh => activation.tanh(),
                Transfer::Sine => (PI * activation).sin(),
            };
        }
        std::mem::swap(&mut self.outputs_prev, &mut self.outputs_next);

        for (out, group) in self.output_groups.iter().enumerate() {
            let sum: f64 = group.iter().map(|&node| self.outputs_prev[node]).sum();
            self.net_outputs[out] = match self.options.output_fn {
                OutputFn::Sine => (PI * sum).sin(),
                OutputFn::Tanh => sum.tanh(),
                OutputFn::Mean => {
                    if group.is_empty() {
                        0.0
                    } else {
                        sum / group.len() as f64
                    }
                }
            };
        }
        Ok(&self.net_outputs)
    }

    /// Map-based convenience wrapper; missing ids read as 0.0.
    pub fn step(&mut self, inputs: &HashMap<InputId, f64>) -> Result<&[f64], CoreError> {
        self.step_fn(|id| inputs.get(&id).copied().unwrap_or(0.0))?;
        Ok(&self.net_outputs)
    }

    /// The outputs produced by the most recent step.
    pub fn outputs(&self) -> &[f64] {
        &self.net_outputs
    }

    /// Current per-neuron state, exposed for state-comparison tests.
    pub fn node_state(&self) -> (&[f64], &[f64]) {
        (&self.activations, &self.outputs_prev)
    }
}
