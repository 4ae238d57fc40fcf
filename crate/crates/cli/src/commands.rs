use std::io::{self, Write};
use std::path::{Path, PathBuf};

use prgcn_core::data::{
    generate_synthetic, load_kinetics_clip, read_manifest, stack_batch, unstack_clip, write_dataset,
    write_kinetics_clip, ClipFormat, SkeletonSequence, SynthSpec,
};
use prgcn_core::model::{parse_override, read_checkpoint, write_checkpoint};
use prgcn_core::modules::ChannelSemantics;
use prgcn_core::train::predict;
use prgcn_core::{
    count_flops, count_params, evaluate, no_grad, train, Error, Mode, ModelConfig, PrGcnModel, Result, RunConfig,
    Skeleton, Tensor,
};
use serde_json::json;

use crate::{Command, Common};

const TOP_K: usize = 5;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { manifest, out, common } => cmd_train(&manifest, &out, &common),
        Command::Eval { checkpoint, manifest, common } => cmd_eval(&checkpoint, &manifest, &common),
        Command::Infer { checkpoint, clip, common } => cmd_infer(&checkpoint, &clip, &common),
        Command::Refine { checkpoint, clip, out, common } => cmd_refine(checkpoint.as_deref(), &clip, &out, &common),
        Command::Count { common } => cmd_count(&common),
        Command::Synth { out, classes, per_class, joints, frames, noise, common } => {
            let mut spec = SynthSpec::new(classes, per_class, joints, frames, common.seed.unwrap_or(0));
            if let Some(sigma) = noise {
                spec.noise = sigma;
            }
            cmd_synth(&spec, &out, &common)
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist or is not a file", path.display())))
    }
}

/// Defaults, then the config file, then `--seed`, then each `--set`.
fn run_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        require_file(path, "config")?;
        cfg.apply_kv(&std::fs::read_to_string(path)?)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    for o in &common.overrides {
        let (k, v) = parse_override(o)?;
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Commands whose model comes from a checkpoint take no configuration.
fn reject_config(common: &Common, command: &str) -> Result<()> {
    if common.config.is_some() || !common.overrides.is_empty() {
        return Err(Error::Config(format!(
            "{command} takes its configuration from the checkpoint; drop --config and --set"
        )));
    }
    Ok(())
}

fn clip_format(cfg: &ModelConfig) -> Result<ClipFormat> {
    if cfg.semantics != ChannelSemantics::XyConf {
        return Err(Error::Config(format!(
            "clip files hold (x, y, score) joints but the model expects {}",
            cfg.semantics.name()
        )));
    }
    Ok(ClipFormat {
        joints: Skeleton::preset(&cfg.topology)?.num_joints(),
        persons: cfg.persons,
    })
}

fn load_dataset(manifest: &Path, cfg: &ModelConfig) -> Result<Vec<SkeletonSequence>> {
    let format = clip_format(cfg)?;
    read_manifest(manifest)?
        .into_iter()
        .map(|entry| {
            let mut clip = load_kinetics_clip(&entry.path, format)?;
            clip.label = entry.label.or(clip.label);
            Ok(clip)
        })
        .collect()
}

/// Collects training log lines and echoes them to stderr.
struct Tee {
    buf: Vec<u8>,
    echo: bool,
}

impl Write for Tee {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        if self.echo {
            io::stderr().write_all(data)?;
        }
        self.buf.extend_from_slice(data);
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stderr().flush()
    }
}

fn cmd_train(manifest: &Path, out: &Path, common: &Common) -> Result<()> {
    require_file(manifest, "manifest")?;
    if out.is_file() {
        return Err(Error::Config(format!("output {} is a file, expected a directory", out.display())));
    }
    let cfg = run_config(common)?;
    let data = load_dataset(manifest, &cfg.model)?;
    let mut model = PrGcnModel::<f32>::new(cfg.model.clone())?;
    let mut log = Tee { buf: Vec::new(), echo: !common.json };
    let metrics = train(&mut model, &data, &cfg.train, Some(&mut log))?;

    // nothing is written unless training finished
    std::fs::create_dir_all(out)?;
    let checkpoint = out.join("model.ckpt");
    write_checkpoint(&model, &checkpoint, true)?;
    std::fs::write(out.join("metrics.jsonl"), &log.buf)?;
    std::fs::write(out.join("config.txt"), cfg.to_kv())?;

    if common.json {
        let summary = json!({
            "checkpoint": checkpoint,
            "epochs": metrics.history.len(),
            "top1": metrics.top1,
            "top5": metrics.top5,
            "loss": metrics.loss,
        });
        println!("{summary}");
    } else {
        println!(
            "trained {} epochs on {} clips: loss {:.4}, top-1 {:.4}, top-5 {:.4}",
            metrics.history.len(),
            data.len(),
            metrics.loss,
            metrics.top1,
            metrics.top5
        );
        println!("checkpoint written to {}", checkpoint.display());
    }
    Ok(())
}

fn cmd_eval(checkpoint: &Path, manifest: &Path, common: &Common) -> Result<()> {
    reject_config(common, "eval")?;
    require_file(checkpoint, "checkpoint")?;
    require_file(manifest, "manifest")?;
    let model = read_checkpoint::<f32>(checkpoint)?;
    let data = load_dataset(manifest, model.config())?;
    let m = evaluate(&model, &data)?;
    if common.json {
        println!("{}", json!({ "clips": data.len(), "top1": m.top1, "top5": m.top5, "loss": m.loss }));
    } else {
        println!("clips {}\ntop1  {:.4}\ntop5  {:.4}\nloss  {:.4}", data.len(), m.top1, m.top5, m.loss);
    }
    Ok(())
}

fn cmd_infer(checkpoint: &Path, clip: &Path, common: &Common) -> Result<()> {
    reject_config(common, "infer")?;
    require_file(checkpoint, "checkpoint")?;
    require_file(clip, "clip")?;
    let model = read_checkpoint::<f32>(checkpoint)?;
    let seq = load_kinetics_clip(clip, clip_format(model.config())?)?;
    let probs = predict(&model, std::slice::from_ref(&seq))?;
    let mut ranked: Vec<(usize, f32)> = probs.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(TOP_K);
    if common.json {
        let top: Vec<_> = ranked.iter().map(|&(c, p)| json!({ "class": c, "probability": p })).collect();
        println!("{}", json!({ "clip": clip, "top5": top }));
    } else {
        for (rank, (class, p)) in ranked.iter().enumerate() {
            println!("{}  class {class:<4} {p:.4}", rank + 1);
        }
    }
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn cmd_refine(checkpoint: Option<&Path>, clip: &Path, out: &Path, common: &Common) -> Result<()> {
    require_file(clip, "clip")?;
    if same_file(clip, out) {
        return Err(Error::Config("refine never overwrites its input; choose another --out".into()));
    }
    let model = match checkpoint {
        Some(path) => {
            reject_config(common, "refine with --checkpoint")?;
            require_file(path, "checkpoint")?;
            read_checkpoint::<f32>(path)?
        }
        None => PrGcnModel::<f32>::new(run_config(common)?.model)?,
    };
    let seq = load_kinetics_clip(clip, clip_format(model.config())?)?;
    let (m, c, t, n) = seq.coords.dim();
    let x: Tensor<f32> = stack_batch(&[seq.coords.clone()])?;

    let mut coords = match model.prm() {
        Some(prm) => {
            let refined = no_grad(|| prm.forward(&x.reshape(&[m, c, t, n])?, model.adjacency(), Mode::Eval))?;
            unstack_clip(&refined.reshape(&[1, m, c, t, n])?, 0)?
        }
        None => {
            eprintln!("note: the model has no refinement module; poses are copied unchanged");
            seq.coords.clone()
        }
    };
    // missing joints stay missing
    for p in 0..m {
        for f in 0..t {
            for j in 0..n {
                if seq.coords[[p, 2, f, j]] == 0.0 {
                    coords[[p, 0, f, j]] = 0.0;
                    coords[[p, 1, f, j]] = 0.0;
                }
            }
        }
    }
    let refined = SkeletonSequence { coords, ..seq };
    std::fs::write(out, write_kinetics_clip(&refined)?)?;
    if common.json {
        println!("{}", json!({ "out": out, "frames": t, "joints": n, "persons": m }));
    } else {
        println!("refined {t} frames of {n} joints written to {}", out.display());
    }
    Ok(())
}

fn cmd_count(common: &Common) -> Result<()> {
    let cfg = run_config(common)?;
    let model = PrGcnModel::<f32>::new(cfg.model)?;
    let params = count_params(&model);
    let flops = count_flops(&model);
    if common.json {
        println!("{}", json!({ "params": params, "flops": flops }));
        return Ok(());
    }
    let g = |v: u64| v as f64 * 1e-9;
    println!("{:<8}{:>12}{:>16}", "block", "params", "GFLOP/stream");
    for (name, p, f) in [
        ("prm", params.prm, flops.prm),
        ("gfm", params.gfm, flops.gfm),
        ("tam", params.tam, flops.tam),
        ("head", params.head, flops.head),
        ("total", params.total, flops.total),
    ] {
        println!("{name:<8}{p:>12}{:>16.4}", g(f));
    }
    println!("GFLOP per clip ({} persons): {:.4}", flops.persons, flops.clip_gflops());
    Ok(())
}

fn cmd_synth(spec: &SynthSpec, out: &Path, common: &Common) -> Result<()> {
    if common.config.is_some() || !common.overrides.is_empty() {
        return Err(Error::Config("synth is configured by its own flags; drop --config and --set".into()));
    }
    if out.is_file() {
        return Err(Error::Config(format!("output {} is a file, expected a directory", out.display())));
    }
    let clips = generate_synthetic(spec)?;
    let manifest: PathBuf = write_dataset(out, &clips)?;
    if common.json {
        println!("{}", json!({ "manifest": manifest, "clips": clips.len() }));
    } else {
        println!("{} clips written; manifest {}", clips.len(), manifest.display());
    }
    Ok(())
}
