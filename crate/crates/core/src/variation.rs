//! Mutation operators, their application probabilities, the freezing
//! window, and the scaffolding-input gate.
//!
//! Exactly one operator is drawn per offspring from a categorical table;
//! the weight-change operator's probability is whatever the structural
//! operators leave over (0.929 standard, 0.879 with the tau operator).
//! Operators that find no legal edit site after a bounded number of retries
//! leave the offspring identical to its parent.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::genome::{
    ConnectionGene, Genome, InnovationCounter, InputId, MutableWindow, NeuronGene, NeuronId,
    OutputId, Source, Target, Transfer, OUTPUT_CONNECTION_WEIGHT, SCAFFOLD_ID_BASE, WEIGHT_LIMIT,
};

/// Attempts a structural operator makes to find a legal site before giving up.
const STRUCTURAL_RETRIES: usize = 8;
/// Standard deviation of weight perturbations.
pub const WEIGHT_SIGMA: f64 = 0.18;
/// Probability that a selected weight is replaced instead of perturbed.
pub const WEIGHT_REPLACE_PROB: f64 = 0.15;
/// Standard deviation of tau perturbations.
pub const TAU_SIGMA: f64 = 0.08;
/// Lower clamp for tau, keeping the interval open at zero.
pub const TAU_FLOOR: f64 = 0.01;
/// A genome may connect to scaffolding inputs at most this far behind its
/// newest connected one.
pub const SCAFFOLD_LOOKBACK: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    WeightChange,
    ConnectNeurons,
    ConnectIo,
    InsertNeuron,
    ToggleFlag,
    SetFlag,
    NewPathway,
    TauPerturb,
}

/// Per-operator application probabilities, in a fixed draw order with the
/// weight-change operator absorbing the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTable {
    structural: Vec<(Operator, f64)>,
    weight_change: f64,
}

/// Overridable structural probabilities (experiment config `[operators]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OperatorOverrides {
    pub connect_neurons: Option<f64>,
    pub connect_io: Option<f64>,
    pub insert_neuron: Option<f64>,
    pub toggle_flag: Option<f64>,
    pub set_flag: Option<f64>,
    pub new_pathway: Option<f64>,
    pub tau_perturb: Option<f64>,
}

impl OperatorTable {
    /// Builds the table for the enabled features, applying any overrides.
    pub fn build(
        ctrnn: bool,
        new_pathway: bool,
        overrides: &OperatorOverrides,
    ) -> Result<Self, CoreError> {
        let mut structural = vec![
            (Operator::ConnectNeurons, overrides.connect_neurons.unwrap_or(0.02)),
            (Operator::ConnectIo, overrides.connect_io.unwrap_or(0.02)),
            (Operator::InsertNeuron, overrides.insert_neuron.unwrap_or(0.001)),
            (Operator::ToggleFlag, overrides.toggle_flag.unwrap_or(0.01)),
            (Operator::SetFlag, overrides.set_flag.unwrap_or(0.01)),
        ];
        if new_pathway {
            structural.push((Operator::NewPathway, overrides.new_pathway.unwrap_or(0.01)));
        }
        if ctrnn {
            structural.push((Operator::TauPerturb, overrides.tau_perturb.unwrap_or(0.05)));
        }
        let total: f64 = structural.iter().map(|(_, p)| p).sum();
        if structural.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) || total >= 1.0 {
            return Err(CoreError::InvalidConfig(format!(
                "operator probabilities must be in [0, 1] and sum below 1 (structural sum {total})"
            )));
        }
        Ok(Self {
            structural,
            weight_change: 1.0 - total,
        })
    }

    pub fn probability(&self, op: Operator) -> f64 {
        if op == Operator::WeightChange {
            return self.weight_change;
        }
        self.structural
            .iter()
            .find(|&&(o, _)| o == op)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Draws one operator; the weight-change operator catches the remainder
    /// of the unit interval.
    pub fn draw(&self, rng: &mut impl Rng) -> Operator {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        for &(op, p) in &self.structural {
            cumulative += p;
            if u < cumulative {
                return op;
            }
        }
        Operator::WeightChange
    }
}

/// Scaffolding inputs currently released by the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaffoldGate {
    /// Highest released scaffolding id; None while scaffolding is disabled.
    available_max_id: Option<InputId>,
}

impl ScaffoldGate {
    pub fn disabled() -> Self {
        Self {
            available_max_id: None,
        }
    }

    /// Gate over the contiguous released range [1000, 1000 + count - 1].
    pub fn with_available(count: u32) -> Self {
        Self {
            available_max_id: count.checked_sub(1).map(|c| SCAFFOLD_ID_BASE + c),
        }
    }

    pub fn available_max_id(&self) -> Option<InputId> {
        self.available_max_id
    }

    /// Scaffolding ids `genome` may connect to: at most `SCAFFOLD_LOOKBACK`
    /// positions before its newest connected scaffolding input, up to the
    /// released maximum.
    pub fn eligible_range(&self, genome: &Genome) -> Option<(InputId, InputId)> {
        let max = self.available_max_id?;
        let iid_sup = genome
            .max_scaffold_input()
            .unwrap_or(SCAFFOLD_ID_BASE + SCAFFOLD_LOOKBACK - 1);
        let lo = (iid_sup - SCAFFOLD_LOOKBACK).max(SCAFFOLD_ID_BASE);
        if lo > max {
            None
        } else {
            Some((lo, max))
        }
    }
}

/// Input/output geometry the operators need: the declared network outputs
/// and the always-connectable normal inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskIo {
    pub n_outputs: u32,
    pub normal_inputs: Vec<InputId>,
}

/// Everything `mutate` needs besides the parent and the RNG.
#[derive(Debug, Clone)]
pub struct MutationContext {
    pub table: OperatorTable,
    pub gate: ScaffoldGate,
    pub io: TaskIo,
    pub freezing: bool,
    pub window_size: usize,
    pub sine_hidden: bool,
    /// Independent selection probability per connection in the
    /// weight-change operator.
    pub weight_select_prob: f64,
}

impl MutationContext {
    fn window(&self, genome: &Genome) -> MutableWindow {
        if self.freezing {
            MutableWindow::of(genome, self.window_size)
        } else {
            MutableWindow::Unrestricted
        }
    }
}

/// Produces one offspring: clones the parent, draws one operator and
/// applies it within the parent's mutable window.
pub fn mutate(
    parent: &Genome,
    ctx: &MutationContext,
    counter: &mut InnovationCounter,
    child_id: u64,
    rng: &mut impl Rng,
) -> Genome {
    let mut child = parent.clone();
    child.id = child_id;
    let window = ctx.window(parent);
    match ctx.table.draw(rng) {
        Operator::WeightChange => op_weight_change(&mut child, &window, ctx.weight_select_prob, rng),
        Operator::ConnectNeurons => op_connect_neurons(&mut child, &window, counter, rng),
        Operator::ConnectIo => op_connect_io(&mut child, &window, &ctx.gate, &ctx.io, counter, rng),
        Operator::InsertNeuron => op_insert_neuron(&mut child, &window, ctx.sine_hidden, counter, rng),
        Operator::ToggleFlag => op_toggle_flag(&mut child, &window, rng),
        Operator::SetFlag => op_set_flag(&mut child, &window, rng),
        Operator::NewPathway => op_new_pathway(&mut child, &ctx.io, ctx.sine_hidden, counter, rng),
        Operator::TauPerturb => op_tau_perturb(&mut child, &window, rng),
    }
    child
}

fn clamp_weight(w: f64) -> f64 {
    w.clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT)
}

fn random_weight(rng: &mut impl Rng) -> f64 {
    rng.random_range(-WEIGHT_LIMIT..=WEIGHT_LIMIT)
}

fn pick<'a, T>(items: &'a [T], rng: &mut impl Rng) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

/// Perturbs (or replaces) a random fraction of the mutable non-output
/// weights; at least one connection is always touched when any exists.
pub fn op_weight_change(
    genome: &mut Genome,
    window: &MutableWindow,
    select_prob: f64,
    rng: &mut impl Rng,
) {
    let normal = Normal::new(0.0, WEIGHT_SIGMA).expect("valid sigma");
    let candidates: Vec<usize> = genome
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| window.connection_is_mutable(c.innovation) && !c.targets_output())
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return;
    }
    let mut touched = false;
    for &i in &candidates {
        if rng.random::<f64>() < select_prob {
            mutate_weight(&mut genome.connections[i], &normal, rng);
            touched = true;
        }
    }
    if !touched {
        let i = *pick(&candidates, rng);
        mutate_weight(&mut genome.connections[i], &normal, rng);
    }
}

fn mutate_weight(conn: &mut ConnectionGene, normal: &Normal<f64>, rng: &mut impl Rng) {
    if rng.random::<f64>() < WEIGHT_REPLACE_PROB {
        conn.weight = random_weight(rng);
    } else {
        conn.weight = clamp_weight(conn.weight + normal.sample(rng));
    }
}

/// Connects two previously unconnected neurons. Sources may come from the
/// mutable or bridge windows; targets must be mutable. Self-connections are
/// legal (recurrence).
pub fn op_connect_neurons(
    genome: &mut Genome,
    window: &MutableWindow,
    counter: &mut InnovationCounter,
    rng: &mut impl Rng,
) {
    let sources: Vec<NeuronId> = genome
        .neurons
        .iter()
        .map(|n| n.id)
        .filter(|&id| window.neuron_is_source(id))
        .collect();
    let targets: Vec<NeuronId> = genome
        .neurons
        .iter()
        .map(|n| n.id)
        .filter(|&id| window.neuron_is_mutable(id))
        .collect();
    if sources.is_empty() || targets.is_empty() {
        return;
    }
    for _ in 0..STRUCTURAL_RETRIES {
        let source = Source::Neuron(*pick(&sources, rng));
        let target = Target::Neuron(*pick(&targets, rng));
        if !genome.has_connection(source, target) {
            let weight = random_weight(rng);
            genome.connections.push(ConnectionGene {
                innovation: counter.next_id(),
                source,
                target,
                weight,
                active: true,
            });
            return;
        }
    }
}

/// Connects an input to a mutable neuron, or a mutable neuron to an output
/// (weight pinned to 1.0), each side with probability one half.
pub fn op_connect_io(
    genome: &mut Genome,
    window: &MutableWindow,
    gate: &ScaffoldGate,
    io: &TaskIo,
    counter: &mut InnovationCounter,
    rng: &mut impl Rng,
) {
    let neurons: Vec<NeuronId> = genome
        .neurons
        .iter()
        .map(|n| n.id)
        .filter(|&id| window.neuron_is_mutable(id))
        .collect();
    if neurons.is_empty() {
        return;
    }
    if rng.random::<bool>() {
        // Input side: normal inputs plus the gated scaffolding range.
        let scaffold = gate.eligible_range(genome);
        let scaffold_len = scaffold.map_or(0, |(lo, hi)| (hi - lo + 1) as usize);
        let total = io.normal_inputs.len() + scaffold_len;
        if total == 0 {
            return;
        }
        for _ in 0..STRUCTURAL_RETRIES {
            let k = rng.random_range(0..total);
            let input = if k < io.normal_inputs.len() {
                io.normal_inputs[k]
            } else {
                let (lo, _) = scaffold.expect("k indexes the scaffold range");
                lo + (k - io.normal_inputs.len()) as u32
            };
            let source = Source::Input(input);
            let target = Target::Neuron(*pick(&neurons, rng));
            if !genome.has_connection(source, target) {
                let weight = random_weight(rng);
                genome.connections.push(ConnectionGene {
                    innovation: counter.next_id(),
                    source,
                    target,
                    weight,
                    active: true,
                });
                return;
            }
        }
    } else {
        for _ in 0..STRUCTURAL_RETRIES {
            let source = Source::Neuron(*pick(&neurons, rng));
            let target = Target::Output(rng.random_range(0..io.n_outputs));
            if !genome.has_connection(source, target) {
                genome.connections.push(ConnectionGene {
                    innovation: counter.next_id(),
                    source,
                    target,
                    weight: OUTPUT_CONNECTION_WEIGHT,
                    active: true,
                });
                return;
            }
        }
    }
}

fn new_transfer(sine_hidden: bool, rng: &mut impl Rng) -> Transfer {
    if sine_hidden && rng.random::<bool>() {
        Transfer::Sine
    } else {
        Transfer::Tanh
    }
}

/// Splits an active mutable connection into two through a fresh neuron:
/// incoming weight 1.0, outgoing weight inherited, original deactivated.
pub fn op_insert_neuron(
    genome: &mut Genome,
    window: &MutableWindow,
    sine_hidden: bool,
    counter: &mut InnovationCounter,
    rng: &mut impl Rng,
) {
    let candidates: Vec<usize> = genome
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.active && window.connection_is_mutable(c.innovation) && !c.targets_output()
        })
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return;
    }
    let split = *pick(&candidates, rng);
    let transfer = new_transfer(sine_hidden, rng);
    let (source, target, weight) = {
        let conn = &mut genome.connections[split];
        conn.active = false;
        (conn.source, conn.target, conn.weight)
    };
    let neuron = counter.next_id();
    genome.neurons.push(NeuronGene {
        id: neuron,
        tau: 1.0,
        transfer,
    });
    genome.connections.push(ConnectionGene {
        innovation: counter.next_id(),
        source,
        target: Target::Neuron(neuron),
        weight: 1.0,
        active: true,
    });
    genome.connections.push(ConnectionGene {
        innovation: counter.next_id(),
        source: Source::Neuron(neuron),
        target,
        weight,
        active: true,
    });
}

/// Inverts the active flag of one mutable non-output connection.
///
/// The flag operators manage the connections that neuron insertion splits
/// and deactivates; output connections are the aggregation backbone and
/// stay active - severing one makes a whole movement direction unreachable
/// (the antagonistic drive can never see a positive value there again),
/// which no later weight mutation can undo.
pub fn op_toggle_flag(genome: &mut Genome, window: &MutableWindow, rng: &mut impl Rng) {
    let candidates: Vec<usize> = genome
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| window.connection_is_mutable(c.innovation) && !c.targets_output())
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return;
    }
    let i = *pick(&candidates, rng);
    genome.connections[i].active = !genome.connections[i].active;
}

/// Reactivates one inactive mutable connection.
pub fn op_set_flag(genome: &mut Genome, window: &MutableWindow, rng: &mut impl Rng) {
    let candidates: Vec<usize> = genome
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.active && window.connection_is_mutable(c.innovation))
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return;
    }
    let i = *pick(&candidates, rng);
    genome.connections[i].active = true;
}

/// Adds an input-free neuron wired to one output with weight 1.0. Under
/// sine or tanh aggregation this never changes the network's behavior; it
/// only seeds future structure.
pub fn op_new_pathway(
    genome: &mut Genome,
    io: &TaskIo,
    sine_hidden: bool,
    counter: &mut InnovationCounter,
    rng: &mut impl Rng,
) {
    let output: OutputId = rng.random_range(0..io.n_outputs);
    let transfer = new_transfer(sine_hidden, rng);
    let neuron = counter.next_id();
    genome.neurons.push(NeuronGene {
        id: neuron,
        tau: 1.0,
        transfer,
    });
    genome.connections.push(ConnectionGene {
        innovation: counter.next_id(),
        source: Source::Neuron(neuron),
        target: Target::Output(output),
        weight: OUTPUT_CONNECTION_WEIGHT,
        active: true,
    });
}

/// Nudges one mutable neuron's tau, clamped into (0, 1].
pub fn op_tau_perturb(genome: &mut Genome, window: &MutableWindow, rng: &mut impl Rng) {
    let normal = Normal::new(0.0, TAU_SIGMA).expect("valid sigma");
    let candidates: Vec<usize> = genome
        .neurons
        .iter()
        .enumerate()
        .filter(|(_, n)| window.neuron_is_mutable(n.id))
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return;
    }
    let i = *pick(&candidates, rng);
    let tau = genome.neurons[i].tau + normal.sample(rng);
    genome.neurons[i].tau = tau.clamp(TAU_FLOOR, 1.0);
}
