use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::condition::Modality;
use crate::error::{Error, Result};
use crate::repr::{PartLayout, Part, FRAME_DIM, NUM_PARTS};
use crate::rng;

/// What a `1` in a mask means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskConvention {
    /// 1 = the cell is given as context.
    Visibility,
    /// 1 = the cell's input is replaced by an empty token.
    Drop,
}

/// Per-frame, per-part binary mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BodyPartMask {
    grid: Vec<[bool; NUM_PARTS]>,
    convention: MaskConvention,
}

impl BodyPartMask {
    pub fn zeros(frames: usize, convention: MaskConvention) -> Self {
        Self::filled(frames, convention, false)
    }

    pub fn ones(frames: usize, convention: MaskConvention) -> Self {
        Self::filled(frames, convention, true)
    }

    pub fn filled(frames: usize, convention: MaskConvention, value: bool) -> Self {
        Self {
            grid: vec![[value; NUM_PARTS]; frames],
            convention,
        }
    }

    pub fn from_rows(rows: Vec<[bool; NUM_PARTS]>, convention: MaskConvention) -> Self {
        Self {
            grid: rows,
            convention,
        }
    }

    /// Drop mask with whole columns set for the given parts, e.g. a source
    /// mask for data that never contains hands.
    pub fn drop_parts(frames: usize, parts: &[Part]) -> Self {
        let mut m = Self::zeros(frames, MaskConvention::Drop);
        for row in &mut m.grid {
            for p in parts {
                row[p.index()] = true;
            }
        }
        m
    }

    pub fn frames(&self) -> usize {
        self.grid.len()
    }

    pub fn convention(&self) -> MaskConvention {
        self.convention
    }

    pub fn rows(&self) -> &[[bool; NUM_PARTS]] {
        &self.grid
    }

    pub fn get(&self, frame: usize, part: usize) -> bool {
        self.grid[frame][part]
    }

    pub fn set(&mut self, frame: usize, part: usize, value: bool) {
        self.grid[frame][part] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.grid.iter().flatten().filter(|&&b| b).count()
    }

    /// True when every cell set in `other` is also set here.
    pub fn contains(&self, other: &BodyPartMask) -> bool {
        self.grid.len() == other.grid.len()
            && self
                .grid
                .iter()
                .flatten()
                .zip(other.grid.iter().flatten())
                .all(|(&a, &b)| a || !b)
    }

    pub fn require(&self, convention: MaskConvention) -> Result<()> {
        if self.convention != convention {
            return Err(Error::Convention {
                expected: convention,
                actual: self.convention,
            });
        }
        Ok(())
    }

    pub fn require_frames(&self, frames: usize) -> Result<()> {
        if self.grid.len() != frames {
            return Err(Error::dim("mask frame count", frames, self.grid.len()));
        }
        Ok(())
    }

    /// Expands the part grid to an `F × 669` 0/1 matrix.
    pub fn to_features(&self, layout: &PartLayout) -> Array2<f64> {
        let mut out = Array2::zeros((self.frames(), FRAME_DIM));
        for (k, row) in self.grid.iter().enumerate() {
            for part in Part::ALL {
                if row[part.index()] {
                    for i in layout.indices(part) {
                        out[(k, i)] = 1.0;
                    }
                }
            }
        }
        out
    }

    pub fn to_array(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.frames(), NUM_PARTS));
        for (k, row) in self.grid.iter().enumerate() {
            for (p, &b) in row.iter().enumerate() {
                out[(k, p)] = f64::from(u8::from(b));
            }
        }
        out
    }
}

/// Flips a visibility mask into the equivalent drop mask (and back).
pub fn visibility_to_drop(v: &BodyPartMask) -> BodyPartMask {
    let convention = match v.convention {
        MaskConvention::Visibility => MaskConvention::Drop,
        MaskConvention::Drop => MaskConvention::Visibility,
    };
    BodyPartMask {
        grid: v.grid.iter().map(|row| row.map(|b| !b)).collect(),
        convention,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    T2M,
    A2M,
    M2D,
    S2G,
    MIm,
    MP,
    MIn,
    CMP,
    CMI,
    MMG,
}

impl Task {
    pub const ALL: [Task; 10] = [
        Task::T2M,
        Task::A2M,
        Task::M2D,
        Task::S2G,
        Task::MIm,
        Task::MP,
        Task::MIn,
        Task::CMP,
        Task::CMI,
        Task::MMG,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::T2M => "t2m",
            Task::A2M => "a2m",
            Task::M2D => "m2d",
            Task::S2G => "s2g",
            Task::MIm => "mim",
            Task::MP => "mp",
            Task::MIn => "min",
            Task::CMP => "cmp",
            Task::CMI => "cmi",
            Task::MMG => "mmg",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Task::ALL
            .into_iter()
            .find(|t| t.name() == lower)
            .ok_or_else(|| Error::Validation(format!("unknown task `{s}`")))
    }
}

/// Frame boundaries of a completion task, as 1-based frame numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    None,
    /// Frames `x <= k` are given.
    Prefix(usize),
    /// Frames `k1 < x <= k2` are generated, the rest given.
    Span(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSpec {
    pub task: Task,
    pub boundary: Boundary,
    pub conditions: BTreeSet<Modality>,
}

impl TaskSpec {
    pub fn new(task: Task, boundary: Boundary) -> Self {
        Self {
            task,
            boundary,
            conditions: BTreeSet::new(),
        }
    }

    pub fn validate(&self, frames: usize) -> Result<()> {
        match (self.task, self.boundary) {
            (Task::MP | Task::CMP, Boundary::Prefix(k)) => {
                if !(1 <= k && k < frames) {
                    return Err(Error::Validation(format!(
                        "{}: need 1 <= k < F, got k={k}, F={frames}",
                        self.task
                    )));
                }
            }
            (Task::MIn | Task::CMI, Boundary::Span(k1, k2)) => {
                if !(1 <= k1 && k1 < k2 && k2 <= frames) {
                    return Err(Error::Validation(format!(
                        "{}: need 1 <= k1 < k2 <= F, got k1={k1}, k2={k2}, F={frames}",
                        self.task
                    )));
                }
            }
            (Task::MP | Task::CMP | Task::MIn | Task::CMI, b) => {
                return Err(Error::Validation(format!("{}: wrong boundary {b:?}", self.task)));
            }
            (_, Boundary::None) => {}
            (t, b) => {
                return Err(Error::Validation(format!("{t} takes no boundary, got {b:?}")));
            }
        }
        if frames == 0 {
            return Err(Error::Validation("mask needs at least one frame".into()));
        }
        Ok(())
    }
}

/// Visibility mask of a task; rows are constant across parts.
pub fn task_mask(spec: &TaskSpec, frames: usize) -> Result<BodyPartMask> {
    spec.validate(frames)?;
    let visible = |x: usize| -> bool {
        match spec.boundary {
            Boundary::Prefix(k) => x <= k,
            Boundary::Span(k1, k2) => !(k1 < x && x <= k2),
            Boundary::None => false,
        }
    };
    let grid = (1..=frames).map(|x| [visible(x); NUM_PARTS]).collect();
    Ok(BodyPartMask {
        grid,
        convention: MaskConvention::Visibility,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStrategy {
    /// Each part column dropped wholesale.
    #[default]
    PerPart,
    /// Each frame row dropped wholesale.
    PerFrame,
    /// One contiguous run of frames dropped.
    Span,
}

impl FromStr for MaskStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_part" => Ok(MaskStrategy::PerPart),
            "per_frame" => Ok(MaskStrategy::PerFrame),
            "span" => Ok(MaskStrategy::Span),
            _ => Err(Error::Validation(format!("unknown mask strategy `{s}`"))),
        }
    }
}

/// Adds training-time drops on top of the source drop mask. The result always
/// contains `source`.
pub fn random_train_mask(
    source: &BodyPartMask,
    p: f64,
    strategy: MaskStrategy,
    seed: u64,
) -> Result<BodyPartMask> {
    source.require(MaskConvention::Drop)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("mask probability {p} outside [0, 1]")));
    }
    let mut rng = rng::seeded(seed);
    let mut out = source.clone();
    let frames = out.frames();
    match strategy {
        MaskStrategy::PerPart => {
            for part in 0..NUM_PARTS {
                if rng.random::<f64>() < p {
                    out.grid.iter_mut().for_each(|row| row[part] = true);
                }
            }
        }
        MaskStrategy::PerFrame => {
            for row in &mut out.grid {
                if rng.random::<f64>() < p {
                    *row = [true; NUM_PARTS];
                }
            }
        }
        MaskStrategy::Span => {
            let max_len = (p * frames as f64).floor() as usize;
            let len = rng.random_range(0..=max_len.min(frames));
            let start = rng.random_range(0..=frames - len);
            for row in &mut out.grid[start..start + len] {
                *row = [true; NUM_PARTS];
            }
        }
    }
    Ok(out)
}

/// Loss weights from the source drop mask: 0 where data is genuinely missing,
/// 1 elsewhere. Training-time drops stay supervised.
pub fn loss_weights(source: &BodyPartMask) -> Result<Array2<f64>> {
    source.require(MaskConvention::Drop)?;
    Ok(source.to_array().mapv(|m| 1.0 - m))
}
