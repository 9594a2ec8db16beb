use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde_json::{json, Value};

use lmm_core::condition::{ConditionSet, Embedder, EmbedderStub, Modality};
use lmm_core::diffusion::{sample, ModelDenoiser, NoiseSchedule, SampleRequest, DEFAULT_BETA_END, DEFAULT_BETA_START};
use lmm_core::io::{self, BatchPlanConfig, SynthPattern};
use lmm_core::model::{Denoiser, ModelConfig, Preset, Snapshot};
use lmm_core::repr::{canonical_layout, keypoints_to_unified, MotionSequence, Part, FRAME_DIM, NUM_PARTS};
use lmm_core::temporal::{
    random_train_mask, resample, task_mask, BodyPartMask, Boundary, MaskConvention, MaskStrategy, Task, TaskSpec,
};

#[derive(Parser)]
#[command(name = "lmm", version, about = "Unified motion toolkit: conversion, masking, denoising and sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random draw made by the command.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Keypoints file to unified motion file.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Downsample every clip of a motion file by an integer factor.
    Resample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        factor: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Build a task visibility mask, optionally with a random training drop mask.
    Mask {
        #[arg(long)]
        task: String,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        k1: Option<usize>,
        #[arg(long)]
        k2: Option<usize>,
        /// Probability for an additional random drop mask.
        #[arg(long)]
        drop_prob: Option<f64>,
        #[arg(long, default_value = "per_part")]
        strategy: String,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic motion clip.
    Synth {
        #[arg(long, default_value = "sine_walk")]
        pattern: String,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Draw a training-batch plan.
    Plan {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// JSON file with a batch plan configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one denoiser pass and report output statistics.
    Forward {
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Motion file; a synthetic walk is used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value_t = 0)]
        t_step: usize,
        #[arg(long, default_value = "all")]
        dataset: String,
        /// Text condition fed through the hashing embedder.
        #[arg(long)]
        text: Option<String>,
        /// Also write the parameter snapshot here.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Reverse diffusion demo; writes a motion file.
    Sample {
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        guidance: f64,
        /// Completion mask: `mp:K`, `cmp:K`, `min:K1:K2` or `cmi:K1:K2`.
        #[arg(long)]
        mask: Option<String>,
        /// Known motion for the mask; a synthetic walk is used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value = "all")]
        dataset: String,
        #[arg(long)]
        text: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the frame layout, model shapes and part presence.
    Inspect {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
}

fn write_out(path: Option<&Path>, contents: &[u8]) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, contents).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn print_config(config: &Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string_pretty(config)?)?;
    Ok(())
}

fn mask_rows(mask: &BodyPartMask) -> Vec<Vec<u8>> {
    mask.rows().iter().map(|r| r.iter().map(|&b| u8::from(b)).collect()).collect()
}

fn boundary_for(task: Task, k: Option<usize>, k1: Option<usize>, k2: Option<usize>) -> Result<Boundary> {
    Ok(match task {
        Task::MP | Task::CMP => Boundary::Prefix(k.context("--k is required for prediction tasks")?),
        Task::MIn | Task::CMI => Boundary::Span(
            k1.context("--k1 is required for in-betweening tasks")?,
            k2.context("--k2 is required for in-betweening tasks")?,
        ),
        _ => Boundary::None,
    })
}

fn parse_mask_arg(spec: &str) -> Result<(Task, Boundary)> {
    let fields: Vec<&str> = spec.split(':').collect();
    let task: Task = fields[0].parse()?;
    let nums = fields[1..]
        .iter()
        .map(|s| s.parse::<usize>().with_context(|| format!("bad mask bound `{s}`")))
        .collect::<Result<Vec<_>>>()?;
    let boundary = boundary_for(task, nums.first().copied(), nums.first().copied(), nums.get(1).copied())?;
    Ok((task, boundary))
}

fn conditions_for(text: Option<&str>, width: usize, seed: u64) -> Result<ConditionSet> {
    let mut set = ConditionSet::empty(width);
    if let Some(t) = text {
        let tokens = EmbedderStub::new(seed, width).embed(t.as_bytes(), Modality::Text)?;
        set.insert(Modality::Text, tokens)?;
    }
    Ok(set)
}

fn motion_input(input: Option<&Path>, frames: usize, fps: f64, seed: u64) -> Result<MotionSequence> {
    match input {
        Some(p) => io::load(p)?
            .into_iter()
            .next()
            .with_context(|| format!("{} holds no clips", p.display())),
        None => Ok(io::synth_motion(SynthPattern::SineWalk, frames, fps, seed)?),
    }
}

fn stats(m: &Array2<f64>) -> Value {
    let n = m.len() as f64;
    let mean = m.sum() / n;
    let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    json!({
        "shape": m.shape(),
        "mean": mean,
        "std": var.sqrt(),
        "min": m.iter().cloned().fold(f64::INFINITY, f64::min),
        "max": m.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "finite": m.iter().all(|v| v.is_finite()),
    })
}

fn model_config(preset: &str) -> Result<ModelConfig> {
    Ok(ModelConfig::preset(preset.parse::<Preset>()?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert { input, common } => {
            let clips = io::load_keypoints(&input)?;
            let seqs = clips
                .iter()
                .map(|c| {
                    let mut s = keypoints_to_unified(&c.positions, c.fps)?;
                    if let Some(d) = &c.dataset {
                        s.dataset = d.clone();
                    }
                    Ok(s)
                })
                .collect::<lmm_core::Result<Vec<_>>>()?;
            print_config(&json!({
                "command": "convert",
                "input": input,
                "clips": seqs.len(),
                "seed": common.seed,
                "out": common.out,
            }))?;
            write_out(common.out.as_deref(), io::format_motions(&seqs)?.as_bytes())
        }
        Command::Resample { input, factor, common } => {
            let seqs = io::load(&input)?
                .iter()
                .map(|s| resample(s, factor))
                .collect::<lmm_core::Result<Vec<_>>>()?;
            print_config(&json!({
                "command": "resample",
                "input": input,
                "factor": factor,
                "clips": seqs.len(),
                "seed": common.seed,
                "out": common.out,
            }))?;
            write_out(common.out.as_deref(), io::format_motions(&seqs)?.as_bytes())
        }
        Command::Mask {
            task,
            frames,
            k,
            k1,
            k2,
            drop_prob,
            strategy,
            common,
        } => {
            let task: Task = task.parse()?;
            let spec = TaskSpec::new(task, boundary_for(task, k, k1, k2)?);
            let visibility = task_mask(&spec, frames)?;
            let strategy: MaskStrategy = strategy.parse()?;
            let drop = drop_prob
                .map(|p| random_train_mask(&BodyPartMask::zeros(frames, MaskConvention::Drop), p, strategy, common.seed))
                .transpose()?;
            print_config(&json!({
                "command": "mask",
                "task": task.name(),
                "frames": frames,
                "k": k, "k1": k1, "k2": k2,
                "drop_prob": drop_prob,
                "strategy": strategy,
                "seed": common.seed,
                "out": common.out,
            }))?;
            let doc = json!({
                "task": task.name(),
                "parts": Part::ALL.iter().map(|p| p.name()).collect::<Vec<_>>(),
                "visibility": mask_rows(&visibility),
                "drop": drop.as_ref().map(mask_rows),
            });
            write_out(common.out.as_deref(), format!("{}\n", serde_json::to_string(&doc)?).as_bytes())
        }
        Command::Synth {
            pattern,
            frames,
            fps,
            common,
        } => {
            let pattern: SynthPattern = pattern.parse()?;
            let seq = io::synth_motion(pattern, frames, fps, common.seed)?;
            print_config(&json!({
                "command": "synth",
                "pattern": pattern.name(),
                "frames": frames,
                "fps": fps,
                "seed": common.seed,
                "out": common.out,
            }))?;
            write_out(common.out.as_deref(), io::format_motions(&[seq])?.as_bytes())
        }
        Command::Plan { n, config, common } => {
            let cfg = match &config {
                Some(p) => serde_json::from_str::<BatchPlanConfig>(&fs::read_to_string(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => BatchPlanConfig::default(),
            };
            let plan = io::batch_plan(&cfg, n, common.seed)?;
            print_config(&json!({
                "command": "plan",
                "n": n,
                "config": cfg,
                "seed": common.seed,
                "out": common.out,
            }))?;
            let mut text = String::new();
            for p in &plan {
                text.push_str(&serde_json::to_string(p)?);
                text.push('\n');
            }
            write_out(common.out.as_deref(), text.as_bytes())
        }
        Command::Forward {
            preset,
            input,
            frames,
            fps,
            t_step,
            dataset,
            text,
            snapshot,
            common,
        } => {
            let config = model_config(&preset)?;
            let model = Denoiser::new(config.clone(), common.seed)?;
            let seq = motion_input(input.as_deref(), frames, fps, common.seed)?;
            let conditions = conditions_for(text.as_deref(), config.condition_width(), common.seed)?;
            let absent: Vec<Part> = Part::ALL.into_iter().filter(|p| !seq.parts_present[p.index()]).collect();
            let drop = BodyPartMask::drop_parts(seq.len(), &absent);
            let out = model.forward(&seq.to_matrix(), seq.fps(), &dataset, t_step, &drop, &conditions)?;
            let snap = Snapshot::capture(&model);
            print_config(&json!({
                "command": "forward",
                "model": config,
                "input": input,
                "frames": seq.len(),
                "fps": seq.fps(),
                "t_step": t_step,
                "dataset": dataset,
                "text": text,
                "parameters": snap.parameter_count(),
                "seed": common.seed,
                "out": common.out,
            }))?;
            if let Some(p) = &snapshot {
                let mut buf = Vec::new();
                snap.write_to(&mut buf)?;
                fs::write(p, buf)?;
            }
            let report = json!({ "output": stats(&out) });
            print_config(&report)?;
            write_out(common.out.as_deref(), format!("{}\n", serde_json::to_string(&report)?).as_bytes())
        }
        Command::Sample {
            preset,
            steps,
            guidance,
            mask,
            input,
            frames,
            fps,
            dataset,
            text,
            common,
        } => {
            if steps == 0 {
                bail!("--steps must be positive");
            }
            let config = model_config(&preset)?;
            let model = Denoiser::new(config.clone(), common.seed)?;
            // Scale the default range so short chains still end near pure noise.
            let beta_end = (DEFAULT_BETA_END * 1000.0 / steps as f64).min(0.999);
            let beta_start = (DEFAULT_BETA_START * 1000.0 / steps as f64).min(beta_end);
            let schedule = NoiseSchedule::linear(steps, beta_start, beta_end)?;
            let conditions = conditions_for(text.as_deref(), config.condition_width(), common.seed)?;

            let (known, frames, fps, visibility) = match &mask {
                Some(m) => {
                    let (task, boundary) = parse_mask_arg(m)?;
                    let seq = motion_input(input.as_deref(), frames, fps, common.seed)?;
                    let vis = task_mask(&TaskSpec::new(task, boundary), seq.len())?;
                    (Some(seq.clone()), seq.len(), seq.fps(), vis)
                }
                None => (None, frames, fps, BodyPartMask::zeros(frames, MaskConvention::Visibility)),
            };
            let parts_present = known.as_ref().map_or([true; NUM_PARTS], |s| s.parts_present);
            let absent: Vec<Part> = Part::ALL.into_iter().filter(|p| !parts_present[p.index()]).collect();
            let denoiser = ModelDenoiser {
                model: &model,
                fps,
                dataset: &dataset,
                drop: BodyPartMask::drop_parts(frames, &absent),
            };
            let known_matrix = known.as_ref().map(MotionSequence::to_matrix);
            let req = SampleRequest {
                frames,
                visibility: &visibility,
                known: known_matrix.as_ref(),
                conditions: &conditions,
                guidance,
                seed: common.seed,
            };
            let out = sample(&denoiser, &schedule, &req)?;
            print_config(&json!({
                "command": "sample",
                "model": config,
                "steps": steps,
                "beta_start": beta_start,
                "beta_end": beta_end,
                "guidance": guidance,
                "mask": mask,
                "input": input,
                "frames": frames,
                "fps": fps,
                "dataset": dataset,
                "text": text,
                "seed": common.seed,
                "out": common.out,
            }))?;
            let seq = MotionSequence::from_matrix(&out, fps, parts_present, dataset.clone())?;
            write_out(common.out.as_deref(), io::format_motions(&[seq])?.as_bytes())
        }
        Command::Inspect { input, preset, common } => {
            let layout = canonical_layout();
            let parts: Vec<Value> = Part::ALL
                .iter()
                .map(|&p| {
                    let ranges: Vec<[usize; 2]> = layout.ranges(p).iter().map(|r| [r.start, r.end]).collect();
                    json!({ "part": p.name(), "size": layout.size(p), "ranges": ranges })
                })
                .collect();
            let config = model_config(&preset)?;
            let clips: Vec<Value> = match &input {
                Some(p) => io::load(p)?
                    .iter()
                    .map(|s| {
                        let present: Vec<&str> = Part::ALL
                            .iter()
                            .filter(|q| s.parts_present[q.index()])
                            .map(|q| q.name())
                            .collect();
                        json!({
                            "dataset": s.dataset,
                            "frames": s.len(),
                            "fps": s.fps(),
                            "rotation_source": s.rotation_source,
                            "parts_present": present,
                        })
                    })
                    .collect(),
                None => Vec::new(),
            };
            print_config(&json!({
                "command": "inspect",
                "input": input,
                "preset": config.preset,
                "seed": common.seed,
                "out": common.out,
            }))?;
            let doc = json!({
                "frame_dim": FRAME_DIM,
                "parts": parts,
                "model": {
                    "config": config,
                    "latent_grid": ["F", NUM_PARTS, config.latent_dim],
                    "condition_width": config.condition_width(),
                },
                "clips": clips,
            });
            print_config(&doc)?;
            write_out(common.out.as_deref(), format!("{}\n", serde_json::to_string(&doc)?).as_bytes())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
