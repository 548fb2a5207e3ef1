//! Genetic representation: neuron and connection genes, global innovation
//! numbering, the age-based mutable window, and the common ancestor.
//!
//! Gene age is defined purely by innovation number order: innovation numbers
//! come from a single per-run counter and strictly increase with creation
//! time, so the newest genes of a group are simply the tail of its
//! creation-ordered list. Genomes are immutable values between generations;
//! mutation clones the parent and edits the copy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

pub type NeuronId = u64;
pub type Innovation = u64;
pub type InputId = u32;
pub type OutputId = u32;

/// Input ids below this are normal inputs; ids at or above it are temporal
/// scaffolding inputs.
pub const SCAFFOLD_ID_BASE: InputId = 1000;
/// The constant bias input.
pub const BIAS_INPUT_ID: InputId = 0;
/// Connection weights are clamped to [-WEIGHT_LIMIT, WEIGHT_LIMIT].
pub const WEIGHT_LIMIT: f64 = 3.0;
/// Connections into network outputs always carry this weight.
pub const OUTPUT_CONNECTION_WEIGHT: f64 = 1.0;

/// Transfer function of a hidden neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    Tanh,
    Sine,
}

/// One evolvable neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronGene {
    pub id: NeuronId,
    pub tau: f64,
    pub transfer: Transfer,
}

/// Where a connection reads its signal from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Input(InputId),
    Neuron(NeuronId),
}

/// Where a connection delivers its signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Neuron(NeuronId),
    Output(OutputId),
}

/// One evolvable connection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub source: Source,
    pub target: Target,
    pub weight: f64,
    pub active: bool,
}

impl ConnectionGene {
    pub fn targets_output(&self) -> bool {
        matches!(self.target, Target::Output(_))
    }

    /// Scaffolding input id this connection reads from, if any.
    pub fn scaffold_source(&self) -> Option<InputId> {
        match self.source {
            Source::Input(id) if id >= SCAFFOLD_ID_BASE => Some(id),
            _ => None,
        }
    }
}

/// The per-run counter innovation numbers are drawn from. Neuron ids and
/// connection innovations share the same sequence, so creation order is a
/// total order across both gene groups.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnovationCounter {
    next: u64,
}

impl InnovationCounter {
    pub fn new() -> Self {
        Self { next: 0 }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

impl Default for InnovationCounter {
    fn default() -> Self {
        Self::new()
    }
}

/// An individual's genotype. `neurons` and `connections` are kept in
/// creation order, so both id sequences are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub id: u64,
    pub neurons: Vec<NeuronGene>,
    pub connections: Vec<ConnectionGene>,
}

impl Genome {
    pub fn empty(id: u64) -> Self {
        Self {
            id,
            neurons: Vec::new(),
            connections: Vec::new(),
        }
    }

    pub fn has_neuron(&self, id: NeuronId) -> bool {
        self.neurons.binary_search_by_key(&id, |n| n.id).is_ok()
    }

    pub fn has_connection(&self, source: Source, target: Target) -> bool {
        self.connections
            .iter()
            .any(|c| c.source == source && c.target == target)
    }

    /// Highest scaffolding input id referenced by any connection gene
    /// (active or not).
    pub fn max_scaffold_input(&self) -> Option<InputId> {
        self.connections
            .iter()
            .filter_map(|c| c.scaffold_source())
            .max()
    }

    /// Checks the representation invariants. Used after deserialization and
    /// in tests; mutation operators preserve these by construction.
    pub fn check_invariants(&self) -> Result<(), CoreError> {
        let bad = |msg: String| Err(CoreError::InvalidConfig(msg));
        for pair in self.neurons.windows(2) {
            if pair[0].id >= pair[1].id {
                return bad(format!("neuron ids not strictly increasing at {}", pair[1].id));
            }
        }
        for pair in self.connections.windows(2) {
            if pair[0].innovation >= pair[1].innovation {
                return bad(format!(
                    "connection innovations not strictly increasing at {}",
                    pair[1].innovation
                ));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for conn in &self.connections {
            if !conn.weight.is_finite() || conn.weight.abs() > WEIGHT_LIMIT {
                return bad(format!("connection {} weight out of range", conn.innovation));
            }
            if conn.targets_output() && conn.weight != OUTPUT_CONNECTION_WEIGHT {
                return bad(format!(
                    "output connection {} must have weight 1.0",
                    conn.innovation
                ));
            }
            if !seen.insert((conn.source, conn.target)) {
                return bad(format!(
                    "duplicate connection for pair {:?} -> {:?}",
                    conn.source, conn.target
                ));
            }
            if let Source::Neuron(id) = conn.source {
                if !self.has_neuron(id) {
                    return bad(format!("connection {} reads missing neuron {id}", conn.innovation));
                }
            }
            if let Target::Neuron(id) = conn.target {
                if !self.has_neuron(id) {
                    return bad(format!("connection {} feeds missing neuron {id}", conn.innovation));
                }
            }
        }
        for n in &self.neurons {
            if !(n.tau > 0.0 && n.tau <= 1.0) {
                return bad(format!("neuron {} tau out of (0, 1]", n.id));
            }
        }
        Ok(())
    }
}

/// Builds the common ancestor: one neuron per network output wired to that
/// output with weight 1.0, and each neuron connected to every input
/// independently with probability 0.5 (uniform weight). No hidden-to-hidden
/// connections exist yet.
///
/// Gene creation order (and thus the RNG draw order) is: per output, the
/// neuron, its output connection, then one coin per input in the given order
/// (plus a weight draw when the coin lands).
pub fn make_common_ancestor(
    n_outputs: u32,
    inputs: &[InputId],
    counter: &mut InnovationCounter,
    rng: &mut impl Rng,
) -> Result<Genome, CoreError> {
    if n_outputs == 0 {
        return Err(CoreError::InvalidConfig(
            "a network needs at least one output".into(),
        ));
    }
    let mut genome = Genome::empty(0);
    for output in 0..n_outputs {
        let neuron = counter.next_id();
        genome.neurons.push(NeuronGene {
            id: neuron,
            tau: 1.0,
            transfer: Transfer::Tanh,
        });
        genome.connections.push(ConnectionGene {
            innovation: counter.next_id(),
            source: Source::Neuron(neuron),
            target: Target::Output(output),
            weight: OUTPUT_CONNECTION_WEIGHT,
            active: true,
        });
        for &input in inputs {
            if rng.random::<bool>() {
                let weight = rng.random_range(-WEIGHT_LIMIT..=WEIGHT_LIMIT);
                genome.connections.push(ConnectionGene {
                    innovation: counter.next_id(),
                    source: Source::Input(input),
                    target: Target::Neuron(neuron),
                    weight,
                    active: true,
                });
            }
        }
    }
    Ok(genome)
}

/// Which genes mutation may touch, derived from gene age ranks.
///
/// With freezing enabled only the `c_m` newest genes of each group are
/// mutable; neurons at age ranks `c_m+1 ..= 2*c_m` form the bridge set that
/// may still serve as connection *sources* into mutable neurons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MutableWindow {
    Unrestricted,
    Windowed {
        /// Smallest mutable neuron id.
        neuron_floor: NeuronId,
        /// Smallest bridge-source neuron id (bridge = [bridge_floor, neuron_floor)).
        bridge_floor: NeuronId,
        /// Smallest mutable connection innovation.
        connection_floor: Innovation,
    },
}

impl MutableWindow {
    /// The window over `genome` for window size `c_m` (spec: `mutable_window`).
    ///
    /// The connection ranking covers editable connections only: output
    /// connections are excluded because no operator may touch them (weight
    /// pinned at 1.0, not splittable, flags left alone), so letting them
    /// occupy window slots would only push live connections into frozen
    /// territory early.
    pub fn of(genome: &Genome, c_m: usize) -> Self {
        assert!(c_m >= 1, "window size must be at least 1");
        let neuron_floor = floor_id(genome.neurons.len(), c_m, |i| genome.neurons[i].id);
        let bridge_floor = floor_id(genome.neurons.len(), 2 * c_m, |i| genome.neurons[i].id);
        let editable: Vec<u64> = genome
            .connections
            .iter()
            .filter(|c| !c.targets_output())
            .map(|c| c.innovation)
            .collect();
        let connection_floor = floor_id(editable.len(), c_m, |i| editable[i]);
        MutableWindow::Windowed {
            neuron_floor,
            bridge_floor,
            connection_floor,
        }
    }

    pub fn neuron_is_mutable(&self, id: NeuronId) -> bool {
        match *self {
            MutableWindow::Unrestricted => true,
            MutableWindow::Windowed { neuron_floor, .. } => id >= neuron_floor,
        }
    }

    pub fn neuron_is_bridge(&self, id: NeuronId) -> bool {
        match *self {
            MutableWindow::Unrestricted => false,
            MutableWindow::Windowed {
                neuron_floor,
                bridge_floor,
                ..
            } => id >= bridge_floor && id < neuron_floor,
        }
    }

    /// Legal connection sources: mutable or bridge neurons.
    pub fn neuron_is_source(&self, id: NeuronId) -> bool {
        self.neuron_is_mutable(id) || self.neuron_is_bridge(id)
    }

    pub fn connection_is_mutable(&self, innovation: Innovation) -> bool {
        match *self {
            MutableWindow::Unrestricted => true,
            MutableWindow::Windowed {
                connection_floor, ..
            } => innovation >= connection_floor,
        }
    }

    pub fn mutable_neurons(&self, genome: &Genome) -> Vec<NeuronId> {
        genome
            .neurons
            .iter()
            .map(|n| n.id)
            .filter(|&id| self.neuron_is_mutable(id))
            .collect()
    }

    pub fn bridge_neurons(&self, genome: &Genome) -> Vec<NeuronId> {
        genome
            .neurons
            .iter()
            .map(|n| n.id)
            .filter(|&id| self.neuron_is_bridge(id))
            .collect()
    }

    pub fn mutable_connections(&self, genome: &Genome) -> Vec<Innovation> {
        genome
            .connections
            .iter()
            .map(|c| c.innovation)
            .filter(|&i| self.connection_is_mutable(i))
            .collect()
    }
}

/// Id of the gene at the `window`-th rank from the end, or 0 when the whole
/// group fits in the window.
fn floor_id(len: usize, window: usize, id_at: impl Fn(usize) -> u64) -> u64 {
    if len <= window {
        0
    } else {
        id_at(len - window)
    }
}

/// Serializes a genome to the stable human-readable interchange format.
pub fn serialize_genome(genome: &Genome) -> String {
    let mut text = serde_json::to_string_pretty(genome).expect("genome serialization is infallible");
    text.push('\n');
    text
}

/// Parses a genome from the interchange format, checking invariants.
pub fn deserialize_genome(text: &str) -> Result<Genome, CoreError> {
    let genome: Genome = serde_json::from_str(text).map_err(|e| CoreError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    genome.check_invariants()?;
    Ok(genome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn ancestor_has_one_neuron_per_output() {
        let mut counter = InnovationCounter::new();
        let inputs: Vec<InputId> = vec![0, 1000, 1001, 1002, 1003, 1004];
        let g = make_common_ancestor(4, &inputs, &mut counter, &mut rng(1)).unwrap();
        assert_eq!(g.neurons.len(), 4);
        let output_conns = g.connections.iter().filter(|c| c.targets_output()).count();
        assert_eq!(output_conns, 4);
        g.check_invariants().unwrap();
    }

    #[test]
    fn ancestor_input_connectivity_is_half_on_average() {
        // 200 ancestors x 4 neurons x 6 inputs = 4800 coins; 3-sigma band.
        let inputs: Vec<InputId> = vec![0, 1000, 1001, 1002, 1003, 1004];
        let mut total = 0usize;
        for seed in 0..200 {
            let mut counter = InnovationCounter::new();
            let g = make_common_ancestor(4, &inputs, &mut counter, &mut rng(seed)).unwrap();
            total += g.connections.len() - 4;
        }
        let n: f64 = 200.0 * 4.0 * 6.0;
        let sigma = (n * 0.25).sqrt();
        assert!((total as f64 - n * 0.5).abs() < 3.0 * sigma, "total = {total}");
    }

    #[test]
    fn ancestor_with_no_inputs() {
        let mut counter = InnovationCounter::new();
        let g = make_common_ancestor(1, &[], &mut counter, &mut rng(9)).unwrap();
        assert_eq!(g.neurons.len(), 1);
        assert_eq!(g.connections.len(), 1);
        assert!(g.connections[0].targets_output());
    }

    #[test]
    fn ancestor_rejects_zero_outputs() {
        let mut counter = InnovationCounter::new();
        let err = make_common_ancestor(0, &[0], &mut counter, &mut rng(1));
        assert!(matches!(err, Err(CoreError::InvalidConfig(_))));
    }

    #[test]
    fn ancestor_matches_recorded_rng_stream() {
        // Independent replay of the documented draw protocol with the same
        // stream must reproduce the exact connection set.
        let inputs: Vec<InputId> = vec![0, 1000, 1001, 1002, 1003, 1004];
        let mut counter = InnovationCounter::new();
        let g = make_common_ancestor(2, &inputs, &mut counter, &mut rng(7)).unwrap();

        let mut replay = rng(7);
        let mut expected = Vec::new();
        let mut innovation = 0u64;
        for output in 0..2u32 {
            let neuron = innovation;
            innovation += 1;
            expected.push((Source::Neuron(neuron), Target::Output(output), 1.0));
            innovation += 1;
            for &input in &inputs {
                if replay.random::<bool>() {
                    let w: f64 = replay.random_range(-3.0..=3.0);
                    expected.push((Source::Input(input), Target::Neuron(neuron), w));
                    innovation += 1;
                }
            }
        }
        let actual: Vec<_> = g
            .connections
            .iter()
            .map(|c| (c.source, c.target, c.weight))
            .collect();
        assert_eq!(actual, expected);
    }

    fn genome_with_groups(n_neurons: u64, n_conns: u64) -> Genome {
        let mut g = Genome::empty(0);
        let mut counter = InnovationCounter::new();
        for _ in 0..n_neurons {
            g.neurons.push(NeuronGene {
                id: counter.next_id(),
                tau: 1.0,
                transfer: Transfer::Tanh,
            });
        }
        for i in 0..n_conns {
            let id = g.neurons[(i % n_neurons) as usize].id;
            g.connections.push(ConnectionGene {
                innovation: counter.next_id(),
                source: Source::Input(BIAS_INPUT_ID + i as u32),
                target: Target::Neuron(id),
                weight: 0.5,
                active: true,
            });
        }
        g
    }

    #[test]
    fn window_excludes_oldest_connections() {
        let g = genome_with_groups(5, 30);
        let w = MutableWindow::of(&g, 25);
        let mutable = w.mutable_connections(&g);
        assert_eq!(mutable.len(), 25);
        let frozen: Vec<_> = g
            .connections
            .iter()
            .map(|c| c.innovation)
            .filter(|i| !mutable.contains(i))
            .collect();
        assert_eq!(frozen.len(), 5);
        // Every frozen gene is older than every mutable one.
        assert!(frozen.iter().max().unwrap() < mutable.iter().min().unwrap());
    }

    #[test]
    fn window_covers_small_groups_entirely() {
        let g = genome_with_groups(10, 3);
        let w = MutableWindow::of(&g, 25);
        assert_eq!(w.mutable_neurons(&g).len(), 10);
        assert_eq!(w.mutable_connections(&g).len(), 3);
        assert!(w.bridge_neurons(&g).is_empty());
    }

    #[test]
    fn window_bridge_ranks_26_to_50_of_60() {
        let g = genome_with_groups(60, 1);
        let w = MutableWindow::of(&g, 25);
        let ids: Vec<NeuronId> = g.neurons.iter().map(|n| n.id).collect();
        // Age rank 1 = newest = last element.
        let expected_mutable: Vec<_> = ids[35..].to_vec();
        let expected_bridge: Vec<_> = ids[10..35].to_vec();
        assert_eq!(w.mutable_neurons(&g), expected_mutable);
        assert_eq!(w.bridge_neurons(&g), expected_bridge);
        for &id in &ids[..10] {
            assert!(!w.neuron_is_source(id));
        }
    }

    #[test]
    fn serialization_round_trips() {
        let inputs: Vec<InputId> = vec![0, 1000, 1001, 1002, 1003, 1004];
        let mut counter = InnovationCounter::new();
        let mut g = make_common_ancestor(2, &inputs, &mut counter, &mut rng(7)).unwrap();
        g.connections[1].active = false;
        let text = serialize_genome(&g);
        let back = deserialize_genome(&text).unwrap();
        assert_eq!(back, g);
        assert!(!back.connections[1].active);
        // Canonical form: serialize . deserialize . serialize is identity.
        assert_eq!(serialize_genome(&back), text);
    }

    #[test]
    fn deserialize_reports_position() {
        let err = deserialize_genome("{\"id\": 0,\n  \"neurons\": [oops]").unwrap_err();
        match err {
            CoreError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn invariant_check_rejects_dangling_neuron() {
        let mut g = genome_with_groups(2, 1);
        g.connections[0].source = Source::Neuron(999);
        assert!(g.check_invariants().is_err());
    }
}
