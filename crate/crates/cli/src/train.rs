use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use heatgen::data::read_sample;
use heatgen::diffusion::{make_schedule, normalize_colors, training_step, Adam, NoiseSchedule, TrainSample};
use heatgen::io_util::{hex, write_atomic};
use heatgen::net::{init_params, read_checkpoint, write_checkpoint, Checkpoint, ModelParams, NetConfig};
use heatgen::SpectralOperators;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::{list_files, load_cached_operators, CliError, CliResult};

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const LOSS_LOG: &str = "loss.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FINAL_CHECKPOINT: &str = "final.hgck";

/// Baked training fields with the operators of their meshes.
pub struct Dataset {
    pub ids: Vec<String>,
    pub fields: Vec<Array2<f64>>,
    /// Index into `operators` per field.
    pub mesh_of: Vec<usize>,
    pub operators: Vec<SpectralOperators>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn sample(&self, i: usize) -> TrainSample<'_> {
        TrainSample {
            f0: self.fields[i].view(),
            ops: &self.operators[self.mesh_of[i]],
            id: &self.ids[i],
        }
    }

    /// Heat-time initialisation: squared typical edge length, estimated from
    /// the mean vertex area (`√3/2 · h²` on an equilateral triangulation).
    pub fn initial_diffusion_time(&self) -> f64 {
        let mean_area: f64 = self
            .operators
            .iter()
            .map(|ops| ops.mass.iter().sum::<f64>() / ops.n() as f64)
            .sum::<f64>()
            / self.operators.len() as f64;
        2.0 / 3f64.sqrt() * mean_area
    }
}

/// Loads every `.hgtx` under `cfg.data` and the cached operators they refer to.
pub fn load_dataset(cfg: &RunConfig) -> CliResult<Dataset> {
    let files = list_files(&cfg.data, &["hgtx"])?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .hgtx samples in {}", cfg.data.display())));
    }
    let mut by_key: BTreeMap<[u8; 32], usize> = BTreeMap::new();
    let mut ds = Dataset {
        ids: Vec::new(),
        fields: Vec::new(),
        mesh_of: Vec::new(),
        operators: Vec::new(),
    };
    for file in &files {
        let s = read_sample(file)?;
        if s.n_vertices() > cfg.capacity {
            return Err(heatgen::Error::Format {
                path: file.clone(),
                msg: format!(
                    "{} vertices exceed the batch capacity of {}; decimate the mesh",
                    s.n_vertices(),
                    cfg.capacity
                ),
            }
            .into());
        }
        let idx = match by_key.get(&s.mesh_id) {
            Some(&i) => i,
            None => {
                let ops = load_cached_operators(&cfg.cache, &s.mesh_id)?;
                if ops.k() != cfg.k {
                    return Err(CliError::Usage(format!(
                        "operators for mesh {} have k = {}, config asks for {}",
                        hex(&s.mesh_id),
                        ops.k(),
                        cfg.k
                    )));
                }
                ds.operators.push(ops);
                by_key.insert(s.mesh_id, ds.operators.len() - 1);
                ds.operators.len() - 1
            }
        };
        if ds.operators[idx].n() != s.n_vertices() {
            return Err(heatgen::Error::Format {
                path: file.clone(),
                msg: format!("{} colours for a mesh of {} vertices", s.n_vertices(), ds.operators[idx].n()),
            }
            .into());
        }
        ds.ids.push(s.source_id.clone());
        ds.fields.push(normalize_colors(s.colors.view()));
        ds.mesh_of.push(idx);
    }
    Ok(ds)
}

pub fn schedule_of(cfg: &RunConfig) -> CliResult<NoiseSchedule> {
    Ok(make_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end)?)
}

/// Visiting order of the dataset in one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    order.shuffle(&mut rng);
    order
}

/// Checkpoint metadata: enough to rebuild the schedule and resume.
pub fn checkpoint_metadata(cfg: &RunConfig, step: u64, epoch: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "step={step}");
    let _ = writeln!(s, "epoch={epoch}");
    let _ = writeln!(s, "seed={}", cfg.seed);
    let _ = writeln!(s, "lr={}", cfg.lr);
    let _ = writeln!(s, "batch_size={}", cfg.batch_size);
    let _ = writeln!(s, "diffusion_steps={}", cfg.diffusion_steps);
    let _ = writeln!(s, "beta_start={}", cfg.beta_start);
    let _ = writeln!(s, "beta_end={}", cfg.beta_end);
    s
}

/// Value of `key` in `key=value` checkpoint metadata.
pub fn metadata_value<'a>(meta: &'a str, key: &str) -> Option<&'a str> {
    meta.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

/// Schedule recorded in a checkpoint, defaulting to the standard one.
pub fn checkpoint_schedule(meta: &str) -> CliResult<NoiseSchedule> {
    let d = RunConfig::default();
    let get = |key: &str, default: f64| -> CliResult<f64> {
        match metadata_value(meta, key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("checkpoint metadata {key}={v:?} is not a number"))),
        }
    };
    let steps = get("diffusion_steps", d.diffusion_steps as f64)? as usize;
    Ok(make_schedule(steps, get("beta_start", d.beta_start)?, get("beta_end", d.beta_end)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: u64,
    pub final_loss: f64,
    pub final_checkpoint: PathBuf,
    pub seconds: f64,
}

struct LossLog {
    path: PathBuf,
    rows: String,
}

impl LossLog {
    fn open(path: PathBuf, resume_step: Option<u64>) -> CliResult<Self> {
        let mut rows = String::new();
        if let (Some(step), Ok(text)) = (resume_step, std::fs::read_to_string(&path)) {
            for line in text.lines().skip(1) {
                let s: Option<u64> = line.split(',').next().and_then(|v| v.parse().ok());
                if s.is_some_and(|s| s < step) {
                    rows.push_str(line);
                    rows.push('\n');
                }
            }
        }
        Ok(Self { path, rows })
    }

    fn push(&mut self, step: u64, wall: f64, loss: f64) {
        let _ = writeln!(self.rows, "{step},{wall:.3},{loss}");
    }

    fn flush(&self) -> CliResult<()> {
        let text = format!("step,wall_time_s,loss\n{}", self.rows);
        Ok(write_atomic(&self.path, text.as_bytes())?)
    }
}

fn latest_checkpoint(run_dir: &Path) -> CliResult<Option<PathBuf>> {
    let dir = run_dir.join(CHECKPOINT_DIR);
    if !dir.is_dir() {
        return Ok(None);
    }
    Ok(list_files(&dir, &["hgck"])?.pop())
}

fn save(path: &Path, params: &ModelParams, adam: &Adam, cfg: &RunConfig, step: u64, epoch: u64) -> CliResult<()> {
    let ckpt = Checkpoint {
        params: params.clone(),
        metadata: checkpoint_metadata(cfg, step, epoch),
        optimizer: Some(adam.to_section()),
    };
    write_checkpoint(path, &ckpt)?;
    log::info!("step {step}: wrote {}", path.display());
    Ok(())
}

/// Trains a model as described by `cfg`. The config snapshot, loss log and
/// checkpoints go to `cfg.run_dir`. With `resume`, training continues from
/// the newest checkpoint in the run directory.
pub fn train(cfg: &RunConfig, resume: bool) -> CliResult<TrainSummary> {
    cfg.validate()?;
    write_atomic(&cfg.run_dir.join(CONFIG_SNAPSHOT), cfg.to_toml().as_bytes())?;
    let ds = load_dataset(cfg)?;
    let sched = schedule_of(cfg)?;
    let net = NetConfig {
        c_in: ds.fields[0].ncols(),
        width: cfg.width,
        blocks: cfg.blocks,
        k: cfg.k,
        time_dim: cfg.time_dim,
    };
    if let Some(i) = ds.fields.iter().position(|f| f.ncols() != net.c_in) {
        return Err(CliError::Usage(format!("sample {} has {} channels, expected {}", ds.ids[i], ds.fields[i].ncols(), net.c_in)));
    }

    let (mut params, mut adam) = match latest_checkpoint(&cfg.run_dir)?.filter(|_| resume) {
        Some(path) => {
            let ckpt = read_checkpoint(&path)?;
            if ckpt.params.config != net {
                return Err(CliError::Usage(format!("{} was trained with a different network configuration", path.display())));
            }
            let section = ckpt
                .optimizer
                .ok_or_else(|| CliError::Usage(format!("{} has no optimizer state to resume from", path.display())))?;
            let adam = Adam::from_section(&ckpt.params, &section, cfg.lr)?;
            log::info!("resuming from {} at step {}", path.display(), adam.step);
            (ckpt.params, adam)
        }
        None => {
            let params = init_params(net, ds.initial_diffusion_time(), cfg.seed)?;
            let adam = Adam::new(&params, cfg.lr);
            (params, adam)
        }
    };
    log::info!(
        "{} samples on {} meshes, {} parameters",
        ds.len(),
        ds.operators.len(),
        params.parameter_count()
    );

    let start_step = adam.step;
    let mut log_file = LossLog::open(cfg.run_dir.join(LOSS_LOG), resume.then_some(start_step))?;
    let batches_per_epoch = ds.len().div_ceil(cfg.batch_size) as u64;
    let total = (batches_per_epoch * cfg.epochs as u64).min(cfg.max_steps.unwrap_or(u64::MAX));
    let ckpt_dir = cfg.run_dir.join(CHECKPOINT_DIR);
    let started = Instant::now();
    let mut step = start_step;
    let mut last_loss = f64::NAN;
    while step < total {
        let epoch = step / batches_per_epoch;
        let order = epoch_order(ds.len(), cfg.seed, epoch);
        let first = (step % batches_per_epoch) as usize;
        for chunk in order.chunks(cfg.batch_size).skip(first) {
            if step >= total {
                break;
            }
            let batch: Vec<TrainSample> = chunk.iter().map(|&i| ds.sample(i)).collect();
            last_loss = training_step(&mut params, &batch, &sched, &mut adam, cfg.seed, step)?;
            step += 1;
            log_file.push(step - 1, started.elapsed().as_secs_f64(), last_loss);
            if step % cfg.checkpoint_every == 0 {
                save(&ckpt_dir.join(format!("step_{step:08}.hgck")), &params, &adam, cfg, step, epoch)?;
                log_file.flush()?;
            }
        }
        if step % batches_per_epoch == 0 && step % cfg.checkpoint_every != 0 {
            save(&ckpt_dir.join(format!("step_{step:08}.hgck")), &params, &adam, cfg, step, epoch + 1)?;
            log_file.flush()?;
        }
        log::info!("epoch {} done at step {step}, loss {last_loss:.5}", epoch);
    }
    let final_checkpoint = cfg.run_dir.join(FINAL_CHECKPOINT);
    save(&final_checkpoint, &params, &adam, cfg, step, step.div_ceil(batches_per_epoch))?;
    log_file.flush()?;
    Ok(TrainSummary {
        steps: step,
        final_loss: last_loss,
        final_checkpoint,
        seconds: started.elapsed().as_secs_f64(),
    })
}
