//! Trajectory generation and the agent simulation.
//!
//! The target point starts at the origin and advances 0.1 per step along a
//! segment direction drawn from a fixed set (16 planar angles, or 8 cube
//! corners plus 6 face centers in 3D). The agent earns `1.0 - distance` per
//! step while within radius 1.0 of the target and dies the moment it is not.
//!
//! Per-step event order: read the bias/scaffolding inputs, step the network,
//! move the agent, advance the target, then check the distance once.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::genome::{InputId, BIAS_INPUT_ID, SCAFFOLD_ID_BASE};
use crate::network::Phenotype;

/// Distance the target covers in one step.
pub const STEP_DISTANCE: f64 = 0.1;
/// The agent dies at or beyond this distance from the target.
pub const SURVIVAL_RADIUS: f64 = 1.0;
/// Per-axis speed limit of the planar agent.
pub const MAX_SPEED_2D: f64 = 0.2;
/// Per-axis (or along-heading) speed limit of the spatial agents.
pub const MAX_SPEED_3D: f64 = 0.3;
/// Largest heading change per step for the nonholonomic agent.
pub const MAX_TURN: f64 = PI / 4.0;

/// Which task variant is being run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "2d")]
    Planar,
    #[serde(rename = "3d-holonomic")]
    SpatialHolonomic,
    #[serde(rename = "3d-nonholonomic")]
    SpatialNonholonomic,
}

impl TaskKind {
    pub fn dim(self) -> usize {
        match self {
            TaskKind::Planar => 2,
            _ => 3,
        }
    }

    /// Antagonistic output pairs: two per controlled quantity.
    pub fn n_outputs(self) -> u32 {
        match self {
            TaskKind::Planar => 4,
            _ => 6,
        }
    }

    pub fn max_speed(self) -> f64 {
        match self {
            TaskKind::Planar => MAX_SPEED_2D,
            _ => MAX_SPEED_3D,
        }
    }
}

/// How segment lengths are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentLengthMode {
    /// Every segment lasts 30 steps.
    Fixed,
    /// Lengths are uniform integers in [10, 50].
    Uniform,
}

/// Nominal segment length; fixed mode uses it exactly, uniform mode has it
/// as the distribution mean.
pub const SEGMENT_STEPS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub direction: u8,
    pub steps: u32,
}

/// The target path: an ordered list of (direction index, length) segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub dim: u8,
    pub segments: Vec<Segment>,
    pub step_distance: f64,
}

/// The 16 planar directions, angle `k*pi/8` for k = 1..=16 at index k-1.
pub fn directions_2d() -> [[f64; 3]; 16] {
    let mut dirs = [[0.0; 3]; 16];
    for (i, dir) in dirs.iter_mut().enumerate() {
        let angle = (i as f64 + 1.0) * PI / 8.0;
        *dir = [angle.cos(), angle.sin(), 0.0];
    }
    dirs
}

/// The 14 spatial directions: 8 normalized cube corners, then the 6 face
/// centers (+x, -x, +y, -y, +z, -z).
pub fn directions_3d() -> [[f64; 3]; 14] {
    let mut dirs = [[0.0; 3]; 14];
    let s = 1.0 / 3.0f64.sqrt();
    let mut i = 0;
    for &x in &[1.0, -1.0] {
        for &y in &[1.0, -1.0] {
            for &z in &[1.0, -1.0] {
                dirs[i] = [x * s, y * s, z * s];
                i += 1;
            }
        }
    }
    dirs[8] = [1.0, 0.0, 0.0];
    dirs[9] = [-1.0, 0.0, 0.0];
    dirs[10] = [0.0, 1.0, 0.0];
    dirs[11] = [0.0, -1.0, 0.0];
    dirs[12] = [0.0, 0.0, 1.0];
    dirs[13] = [0.0, 0.0, -1.0];
    dirs
}

fn direction_count(dim: u8) -> u8 {
    if dim == 2 {
        16
    } else {
        14
    }
}

pub fn direction_vector(dim: u8, index: u8) -> [f64; 3] {
    if dim == 2 {
        directions_2d()[index as usize]
    } else {
        directions_3d()[index as usize]
    }
}

fn draw_segment(dim: u8, mode: SegmentLengthMode, rng: &mut impl Rng) -> Segment {
    let direction = rng.random_range(0..direction_count(dim));
    let steps = match mode {
        SegmentLengthMode::Fixed => SEGMENT_STEPS,
        SegmentLengthMode::Uniform => rng.random_range(10..=50),
    };
    Segment { direction, steps }
}

/// Draws a fresh trajectory of `n_segments` segments.
pub fn generate_trajectory(
    dim: u8,
    n_segments: usize,
    mode: SegmentLengthMode,
    rng: &mut impl Rng,
) -> TrajectorySpec {
    let segments = (0..n_segments).map(|_| draw_segment(dim, mode, rng)).collect();
    TrajectorySpec {
        dim,
        segments,
        step_distance: STEP_DISTANCE,
    }
}

/// Appends `n_more` segments; the existing prefix is never touched.
pub fn extend_trajectory(
    spec: &TrajectorySpec,
    n_more: usize,
    mode: SegmentLengthMode,
    rng: &mut impl Rng,
) -> TrajectorySpec {
    let mut extended = spec.clone();
    extended
        .segments
        .extend((0..n_more).map(|_| draw_segment(spec.dim, mode, rng)));
    extended
}

impl TrajectorySpec {
    pub fn total_steps(&self) -> u64 {
        self.segments.iter().map(|s| s.steps as u64).sum()
    }

    /// Target position after `t` steps (position at t = 0 is the origin).
    /// Walks the whole prefix; use [`TargetWalk`] for incremental access.
    pub fn position_at(&self, t: u64) -> [f64; 3] {
        let mut walk = TargetWalk::new(self);
        for _ in 0..t {
            walk.advance();
        }
        walk.position()
    }
}

/// Incremental cursor along the target path.
pub struct TargetWalk<'a> {
    spec: &'a TrajectorySpec,
    segment: usize,
    step_in_segment: u32,
    position: [f64; 3],
}

impl<'a> TargetWalk<'a> {
    pub fn new(spec: &'a TrajectorySpec) -> Self {
        Self {
            spec,
            segment: 0,
            step_in_segment: 0,
            position: [0.0; 3],
        }
    }

    pub fn position(&self) -> [f64; 3] {
        self.position
    }

    /// Moves the target one step along the current segment. Past the end of
    /// the last segment the target stops (callers cap simulation length at
    /// `total_steps`, so this is never observed in a run).
    pub fn advance(&mut self) {
        while self.segment < self.spec.segments.len() {
            let seg = self.spec.segments[self.segment];
            if self.step_in_segment < seg.steps {
                let dir = direction_vector(self.spec.dim, seg.direction);
                for (p, d) in self.position.iter_mut().zip(dir) {
                    *p += self.spec.step_distance * d;
                }
                self.step_in_segment += 1;
                return;
            }
            self.segment += 1;
            self.step_in_segment = 0;
        }
    }
}

/// Resolves one antagonistic output pair: the positive side wins only when
/// the negative side is not also pulling, and vice versa.
fn pair_drive(positive: f64, negative: f64) -> f64 {
    if positive > 0.0 && negative <= 0.0 {
        positive
    } else if negative > 0.0 && positive <= 0.0 {
        -negative
    } else {
        0.0
    }
}

/// Holonomic drive: one output pair per axis, each axis scaled by the task's
/// speed limit.
pub fn drive_holonomic(outputs: &[f64], dim: usize, max_speed: f64) -> [f64; 3] {
    let mut displacement = [0.0; 3];
    for d in 0..dim {
        displacement[d] = pair_drive(outputs[2 * d], outputs[2 * d + 1]) * max_speed;
    }
    displacement
}

/// Heading of the nonholonomic agent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Heading {
    /// Rotation about the z axis, radians.
    pub yaw: f64,
    /// Rotation about the y axis, radians.
    pub pitch: f64,
}

impl Heading {
    /// Unit vector `Rz(yaw) * Ry(pitch) * (1, 0, 0)`.
    pub fn unit(&self) -> [f64; 3] {
        [
            self.yaw.cos() * self.pitch.cos(),
            self.yaw.sin() * self.pitch.cos(),
            -self.pitch.sin(),
        ]
    }
}

fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

/// Nonholonomic drive: pair 1 sets signed speed along the heading, pairs 2
/// and 3 turn the heading about z and y by at most `MAX_TURN`. The heading
/// updates first, then the agent moves along the new heading.
pub fn drive_nonholonomic_3d(outputs: &[f64], heading: Heading) -> (Heading, [f64; 3]) {
    let speed = pair_drive(outputs[0], outputs[1]) * MAX_SPEED_3D;
    let new_heading = Heading {
        yaw: wrap_angle(heading.yaw + pair_drive(outputs[2], outputs[3]) * MAX_TURN),
        pitch: wrap_angle(heading.pitch + pair_drive(outputs[4], outputs[5]) * MAX_TURN),
    };
    let dir = new_heading.unit();
    (new_heading, [speed * dir[0], speed * dir[1], speed * dir[2]])
}

/// Result of simulating one individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub steps_survived: u64,
}

/// One row of the per-step trace used for replay/plot export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub target: [f64; 3],
    pub agent: [f64; 3],
    pub distance: f64,
    pub alive: bool,
}

fn distance(a: [f64; 3], b: [f64; 3], dim: usize) -> f64 {
    let mut sq = 0.0;
    for d in 0..dim {
        let diff = a[d] - b[d];
        sq += diff * diff;
    }
    sq.sqrt()
}

/// Simulates `phenotype` (already reset) on `spec` until death or
/// `max_steps`, whichever comes first.
///
/// At step `t` the bias input reads 1.0 and scaffolding input
/// `1000 + floor(t / scaffold_period)` reads 1.0; all other inputs read 0.
pub fn evaluate(
    phenotype: &mut Phenotype,
    spec: &TrajectorySpec,
    task: TaskKind,
    scaffold_period: u32,
    max_steps: u64,
) -> Result<Evaluation, CoreError> {
    run_simulation(phenotype, spec, task, scaffold_period, max_steps, |_| {})
}

/// Like [`evaluate`] but invokes `trace` with every simulated step.
pub fn evaluate_traced(
    phenotype: &mut Phenotype,
    spec: &TrajectorySpec,
    task: TaskKind,
    scaffold_period: u32,
    max_steps: u64,
) -> Result<(Evaluation, Vec<TraceRow>), CoreError> {
    let mut rows = Vec::new();
    let eval = run_simulation(phenotype, spec, task, scaffold_period, max_steps, |row| {
        rows.push(row)
    })?;
    Ok((eval, rows))
}

fn run_simulation(
    phenotype: &mut Phenotype,
    spec: &TrajectorySpec,
    task: TaskKind,
    scaffold_period: u32,
    max_steps: u64,
    mut trace: impl FnMut(TraceRow),
) -> Result<Evaluation, CoreError> {
    let dim = task.dim();
    let mut walk = TargetWalk::new(spec);
    let mut agent = [0.0f64; 3];
    let mut heading = Heading::default();
    let mut fitness = 0.0;
    let mut steps_survived = 0u64;
    let horizon = spec.total_steps().min(max_steps);

    for t in 0..horizon {
        let period = t / scaffold_period as u64;
        let outputs = phenotype.step_fn(move |id: InputId| {
            if id == BIAS_INPUT_ID {
                1.0
            } else if id >= SCAFFOLD_ID_BASE && (id - SCAFFOLD_ID_BASE) as u64 == period {
                1.0
            } else {
                0.0
            }
        })?;

        let displacement = match task {
            TaskKind::Planar | TaskKind::SpatialHolonomic => {
                drive_holonomic(outputs, dim, task.max_speed())
            }
            TaskKind::SpatialNonholonomic => {
                let (new_heading, disp) = drive_nonholonomic_3d(outputs, heading);
                heading = new_heading;
                disp
            }
        };
        for d in 0..dim {
            agent[d] += displacement[d];
        }

        walk.advance();
        let target = walk.position();
        let d = distance(agent, target, dim);
        let alive = d < SURVIVAL_RADIUS;
        trace(TraceRow {
            step: t,
            target,
            agent,
            distance: d,
            alive,
        });
        if !alive {
            break;
        }
        fitness += SURVIVAL_RADIUS - d;
        steps_survived += 1;
    }

    Ok(Evaluation {
        fitness,
        steps_survived,
    })
}
