//! CSV emission for run logs, aggregates, species logs, trajectory traces
//! and edge lists. Output is byte-stable: floats print in Rust's shortest
//! round-trip form and provenance lines appear as `#`-prefixed comments
//! before the header row.

use std::fmt::Write as _;

use crate::engine::{AggregateRecord, GenerationRecord, RunLog, SpeciesRecord};
use crate::genome::{Genome, Source, Target};
use crate::task::TraceRow;

fn push_comments(out: &mut String, comments: &[(String, String)]) {
    for (key, value) in comments {
        writeln!(out, "# {key} = {value}").unwrap();
    }
}

pub fn runlog_csv(log: &RunLog, comments: &[(String, String)]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str(
        "generation,best_fitness,mean_fitness,best_steps,best_neurons,best_connections,species_count,trajectory_segments,scaffold_inputs_available\n",
    );
    for r in &log.records {
        let GenerationRecord {
            generation,
            best_fitness,
            mean_fitness,
            best_steps,
            best_neurons,
            best_connections,
            species_count,
            trajectory_segments,
            scaffold_inputs_available,
        } = r;
        writeln!(
            out,
            "{generation},{best_fitness},{mean_fitness},{best_steps},{best_neurons},{best_connections},{species_count},{trajectory_segments},{scaffold_inputs_available}"
        )
        .unwrap();
    }
    out
}

pub fn aggregate_csv(records: &[AggregateRecord], comments: &[(String, String)]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("generation,mean_best_fitness,se_best_fitness,mean_best_steps,se_best_steps\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.generation, r.mean_best_fitness, r.se_best_fitness, r.mean_best_steps, r.se_best_steps
        )
        .unwrap();
    }
    out
}

pub fn species_csv(records: &[SpeciesRecord], comments: &[(String, String)]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("generation,species_id,size,mean_fitness,best_fitness,threshold\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.generation, r.species_id, r.size, r.mean_fitness, r.best_fitness, r.threshold
        )
        .unwrap();
    }
    out
}

/// Per-step target and agent positions for replay/plotting.
pub fn trajectory_csv(rows: &[TraceRow], dim: usize, comments: &[(String, String)]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    if dim == 2 {
        out.push_str("step,target_x,target_y,agent_x,agent_y,distance,alive\n");
    } else {
        out.push_str("step,target_x,target_y,target_z,agent_x,agent_y,agent_z,distance,alive\n");
    }
    for r in rows {
        write!(out, "{}", r.step).unwrap();
        for d in 0..dim {
            write!(out, ",{}", r.target[d]).unwrap();
        }
        for d in 0..dim {
            write!(out, ",{}", r.agent[d]).unwrap();
        }
        writeln!(out, ",{},{}", r.distance, r.alive).unwrap();
    }
    out
}

fn source_label(source: Source) -> String {
    match source {
        Source::Input(id) => format!("input:{id}"),
        Source::Neuron(id) => format!("neuron:{id}"),
    }
}

fn target_label(target: Target) -> String {
    match target {
        Target::Neuron(id) => format!("neuron:{id}"),
        Target::Output(id) => format!("output:{id}"),
    }
}

/// Edge list for external graph tooling.
pub fn edges_csv(genome: &Genome, comments: &[(String, String)]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str("innovation,source,target,weight,active\n");
    for c in &genome.connections {
        writeln!(
            out,
            "{},{},{},{},{}",
            c.innovation,
            source_label(c.source),
            target_label(c.target),
            c.weight,
            c.active
        )
        .unwrap();
    }
    out
}

/// Bucketed histogram rows as (bucket, value) CSV.
pub fn histogram_csv<A: std::fmt::Display, B: std::fmt::Display>(
    rows: &[(A, B)],
    column_names: (&str, &str),
    comments: &[(String, String)],
) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    writeln!(out, "{},{}", column_names.0, column_names.1).unwrap();
    for (a, b) in rows {
        writeln!(out, "{a},{b}").unwrap();
    }
    out
}
