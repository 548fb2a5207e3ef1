//! Post-hoc analyses: information-injection rate, structural network
//! statistics, and gene-age histograms. All read-only; only active
//! connections count toward functional structure.

use std::collections::HashMap;

use serde::Serialize;

use crate::genome::{Genome, Source, Target};

/// Bits of trajectory information injected per generation:
/// `log2(directions) * decisions / generations`.
pub fn info_rate(n_decisions: u64, n_directions: u64, n_generations: u64) -> f64 {
    (n_directions as f64).log2() * n_decisions as f64 / n_generations as f64
}

/// Upper bound on the injection rate for truncation selection of the given
/// fraction: `log2(1 / fraction)`.
pub fn selection_rate_limit(fraction: f64) -> f64 {
    (1.0 / fraction).log2()
}

/// Structural summary of a genome's active network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkStats {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub n_outputs: usize,
    pub n_input_connections: usize,
    pub n_neuron_connections: usize,
    pub n_output_connections: usize,
    /// Weakly connected components of the hidden graph after removing all
    /// input and output endpoints; isolated neurons count as singletons.
    pub n_components: usize,
    pub mean_component_size: f64,
}

/// Counts connection classes and hidden-graph components.
pub fn network_stats(genome: &Genome) -> NetworkStats {
    let mut inputs = std::collections::HashSet::new();
    let mut outputs = std::collections::HashSet::new();
    let mut input_connections = 0;
    let mut neuron_connections = 0;
    let mut output_connections = 0;

    let index_of: HashMap<u64, usize> = genome
        .neurons
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, i))
        .collect();
    let mut components = DisjointSets::new(genome.neurons.len());

    for conn in genome.connections.iter().filter(|c| c.active) {
        match (conn.source, conn.target) {
            (Source::Input(id), Target::Neuron(_)) => {
                inputs.insert(id);
                input_connections += 1;
            }
            (Source::Neuron(a), Target::Neuron(b)) => {
                neuron_connections += 1;
                components.union(index_of[&a], index_of[&b]);
            }
            (Source::Neuron(_), Target::Output(id)) => {
                outputs.insert(id);
                output_connections += 1;
            }
            (Source::Input(id), Target::Output(_)) => {
                inputs.insert(id);
            }
        }
    }

    let n_components = components.count();
    NetworkStats {
        n_inputs: inputs.len(),
        n_neurons: genome.neurons.len(),
        n_outputs: outputs.len(),
        n_input_connections: input_connections,
        n_neuron_connections: neuron_connections,
        n_output_connections: output_connections,
        n_components,
        mean_component_size: if n_components == 0 {
            0.0
        } else {
            genome.neurons.len() as f64 / n_components as f64
        },
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }

    fn count(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}

/// Age-structure summaries of a genome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeHistograms {
    /// Distribution of |source age rank - target age rank| over active
    /// neuron-to-neuron connections, indexed by span.
    pub span_histogram: Vec<(u64, usize)>,
    /// Neurons in creation order, grouped in buckets; mean number of active
    /// connections-to-output per bucket.
    pub output_connections_per_bucket: Vec<(usize, f64)>,
}

/// Computes both age histograms; `bucket` is the neuron group size of the
/// second one.
pub fn age_histograms(genome: &Genome, bucket: usize) -> AgeHistograms {
    assert!(bucket >= 1);
    let rank_of: HashMap<u64, u64> = genome
        .neurons
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, i as u64))
        .collect();

    let mut spans: HashMap<u64, usize> = HashMap::new();
    let mut out_degree = vec![0usize; genome.neurons.len()];
    for conn in genome.connections.iter().filter(|c| c.active) {
        match (conn.source, conn.target) {
            (Source::Neuron(a), Target::Neuron(b)) => {
                let span = rank_of[&a].abs_diff(rank_of[&b]);
                *spans.entry(span).or_insert(0) += 1;
            }
            (Source::Neuron(a), Target::Output(_)) => {
                out_degree[rank_of[&a] as usize] += 1;
            }
            _ => {}
        }
    }
    let mut span_histogram: Vec<(u64, usize)> = spans.into_iter().collect();
    span_histogram.sort_unstable();

    let output_connections_per_bucket = out_degree
        .chunks(bucket)
        .enumerate()
        .map(|(i, chunk)| {
            let mean = chunk.iter().sum::<usize>() as f64 / chunk.len() as f64;
            (i, mean)
        })
        .collect();

    AgeHistograms {
        span_histogram,
        output_connections_per_bucket,
    }
}

/// Scaffolding inputs implied by a trajectory of `n_segments` segments:
/// `required` is the exact period cover, `available` rounds it up to a
/// whole release batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScaffoldCount {
    pub required: u64,
    pub available: u64,
}

pub fn expected_scaffold_count(
    n_segments: u64,
    segment_len: u64,
    period: u64,
    batch: u64,
) -> ScaffoldCount {
    let required = (n_segments * segment_len).div_ceil(period);
    ScaffoldCount {
        required,
        available: required.div_ceil(batch) * batch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{ConnectionGene, InnovationCounter, NeuronGene, Transfer};

    #[test]
    fn info_rate_matches_reported_values() {
        let rate = info_rate(386, 16, 3500);
        assert!((rate - 0.4411428571428571).abs() < 1e-12);
        assert!((rate - 0.44).abs() < 0.002);
        assert_eq!(info_rate(0, 16, 100), 0.0);
        assert!((selection_rate_limit(0.05) - 4.321928094887363).abs() < 1e-12);
    }

    #[test]
    fn info_rate_is_linear_in_decisions() {
        let one = info_rate(1, 16, 7);
        assert!((info_rate(10, 16, 7) - 10.0 * one).abs() < 1e-12);
        assert!((info_rate(5, 16, 70) - 0.5 * one).abs() < 1e-12);
    }

    fn chain(n: u64) -> Genome {
        let mut g = Genome::empty(0);
        let mut counter = InnovationCounter::new();
        let ids: Vec<u64> = (0..n).map(|_| counter.next_id()).collect();
        for &id in &ids {
            g.neurons.push(NeuronGene {
                id,
                tau: 1.0,
                transfer: Transfer::Tanh,
            });
        }
        for pair in ids.windows(2) {
            g.connections.push(ConnectionGene {
                innovation: counter.next_id(),
                source: Source::Neuron(pair[0]),
                target: Target::Neuron(pair[1]),
                weight: 1.0,
                active: true,
            });
        }
        g
    }

    #[test]
    fn chain_of_three_is_one_component() {
        let stats = network_stats(&chain(3));
        assert_eq!(stats.n_components, 1);
        assert_eq!(stats.mean_component_size, 3.0);
        assert_eq!(stats.n_neuron_connections, 2);
    }

    #[test]
    fn unconnected_neurons_are_singletons() {
        use crate::genome::make_common_ancestor;
        use rand::SeedableRng;
        let mut counter = InnovationCounter::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = make_common_ancestor(4, &[0, 1000, 1001], &mut counter, &mut rng).unwrap();
        let stats = network_stats(&g);
        assert_eq!(stats.n_components, 4);
        assert_eq!(stats.mean_component_size, 1.0);
        assert_eq!(stats.n_output_connections, 4);
        assert_eq!(stats.n_neuron_connections, 0);
        assert_eq!(
            stats.n_input_connections + stats.n_neuron_connections + stats.n_output_connections,
            g.connections.iter().filter(|c| c.active).count()
        );
    }

    #[test]
    fn empty_genome_has_no_components() {
        let stats = network_stats(&Genome::empty(0));
        assert_eq!(stats.n_components, 0);
        assert_eq!(stats.mean_component_size, 0.0);
    }

    #[test]
    fn inactive_connections_do_not_count() {
        let mut g = chain(3);
        for c in &mut g.connections {
            c.active = false;
        }
        let stats = network_stats(&g);
        assert_eq!(stats.n_neuron_connections, 0);
        assert_eq!(stats.n_components, 3);
    }

    #[test]
    fn self_recurrent_spans_are_zero() {
        let mut g = chain(3);
        g.connections.clear();
        let mut innovation = 100;
        for id in [0u64, 1, 2] {
            g.connections.push(ConnectionGene {
                innovation,
                source: Source::Neuron(id),
                target: Target::Neuron(id),
                weight: 1.0,
                active: true,
            });
            innovation += 1;
        }
        let h = age_histograms(&g, 10);
        assert_eq!(h.span_histogram, vec![(0, 3)]);
    }

    #[test]
    fn span_histogram_of_known_links() {
        // 20 neurons; links with spans 1, 1, 5, 19.
        let mut g = chain(20);
        g.connections.clear();
        let links = [(0u64, 1u64), (3, 4), (10, 5), (0, 19)];
        for (i, (a, b)) in links.iter().enumerate() {
            g.connections.push(ConnectionGene {
                innovation: 100 + i as u64,
                source: Source::Neuron(*a),
                target: Target::Neuron(*b),
                weight: 1.0,
                active: true,
            });
        }
        let h = age_histograms(&g, 10);
        assert_eq!(h.span_histogram, vec![(1, 2), (5, 1), (19, 1)]);
    }

    #[test]
    fn uniform_out_degree_gives_unit_bucket_means() {
        let mut g = chain(25);
        g.connections.clear();
        for (i, id) in (0..25u64).enumerate() {
            g.connections.push(ConnectionGene {
                innovation: 100 + i as u64,
                source: Source::Neuron(id),
                target: Target::Output(0),
                weight: 1.0,
                active: true,
            });
        }
        let h = age_histograms(&g, 10);
        assert_eq!(
            h.output_connections_per_bucket,
            vec![(0, 1.0), (1, 1.0), (2, 1.0)]
        );
    }

    #[test]
    fn scaffold_count_formula() {
        let c = expected_scaffold_count(449, 30, 20, 5);
        assert_eq!(c.required, 674);
        assert_eq!(c.available, 675);
        let c = expected_scaffold_count(1, 30, 20, 5);
        assert_eq!(c.required, 2);
        assert_eq!(c.available, 5);
        let c = expected_scaffold_count(2, 30, 30, 5);
        assert_eq!(c.required, 2);
    }
}
