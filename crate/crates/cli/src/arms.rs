//! Ablation arms: named single-purpose edits of a base configuration.
//! Runs across arms share per-run seeds so comparisons are paired.

use trajneat::config::{ExperimentConfig, SelectionScheme};
use trajneat::network::OutputFn;

pub const ARM_NAMES: [&str; 11] = [
    "full",
    "no-freezing",
    "no-scaffolding",
    "no-new-pathway",
    "tanh-output",
    "mean-output",
    "sine-hidden",
    "ctrnn",
    "ctrnn-no-scaffolding",
    "neat-truncation",
    "neat-speciation",
];

/// Applies the named arm to a copy of `base`, or lists valid arms on error.
pub fn apply_arm(base: &ExperimentConfig, arm: &str) -> Result<ExperimentConfig, String> {
    let mut config = base.clone();
    match arm {
        "full" => {}
        "no-freezing" => config.features.freezing = false,
        "no-scaffolding" => config.features.scaffolding = false,
        "no-new-pathway" => config.features.new_pathway = false,
        "tanh-output" => config.features.output_fn = OutputFn::Tanh,
        "mean-output" => config.features.output_fn = OutputFn::Mean,
        "sine-hidden" => config.features.sine_hidden = true,
        "ctrnn" => config.features.ctrnn = true,
        "ctrnn-no-scaffolding" => {
            config.features.ctrnn = true;
            config.features.scaffolding = false;
        }
        "neat-truncation" | "neat-speciation" => {
            config.features.freezing = false;
            config.features.scaffolding = false;
            config.features.new_pathway = false;
            config.features.output_fn = OutputFn::Tanh;
            config.selection.scheme = if arm == "neat-speciation" {
                SelectionScheme::Speciation
            } else {
                SelectionScheme::Truncation
            };
        }
        unknown => {
            return Err(format!(
                "unknown ablation arm {unknown:?}; valid arms: {}",
                ARM_NAMES.join(", ")
            ));
        }
    }
    Ok(config)
}
