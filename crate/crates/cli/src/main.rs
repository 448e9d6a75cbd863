use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatgen::spectral::{EigenOptions, DEFAULT_K};
use heatgen_cli::config::ConfigOverrides;
use heatgen_cli::evaluate::{MassSource, Timing};
use heatgen_cli::{bake, configure_threads, evaluate, export, precompute, sample, train, CliError, CliResult, RunConfig};

/// Diffusion models for per-vertex signals on triangle meshes.
#[derive(Parser)]
#[command(name = "heatgen", version)]
struct Cli {
    /// Single-threaded, reproducible reductions.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and cache Laplacian eigenpairs, mass and gradient operators.
    Precompute {
        #[arg(long, num_args = 1.., required = true)]
        mesh: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value = "cache")]
        cache: PathBuf,
    },
    /// Bake images (through per-vertex uv) or ShapeNet materials into samples.
    Bake {
        #[arg(long, requires_all = ["uv", "mesh"], conflicts_with = "shapenet")]
        images: Option<PathBuf>,
        #[arg(long)]
        uv: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, requires = "category")]
        shapenet: Option<PathBuf>,
        #[arg(long)]
        category: Option<String>,
        /// Bake at most this many shapes.
        #[arg(long)]
        limit: Option<usize>,
        /// Eigenbasis size the samples will be trained with.
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a noise predictor.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Continue from the newest checkpoint in the run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Draw fields from a trained model.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Operator cache directory (read, and filled when missing).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Minimum matching distance and coverage between two sample sets.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        #[arg(long, required_unless_present = "mesh")]
        cache: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Also time inference with this checkpoint.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        timing_repeats: usize,
        /// Write the report as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a vertex-coloured PLY of a field.
    Export {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.deterministic)?;
    match cli.command {
        Command::Precompute { mesh, k, cache } => {
            let outcomes = precompute::precompute(&mesh, k, &cache, &EigenOptions::default());
            for o in &outcomes {
                println!("{o}");
            }
            precompute::summarize(&outcomes)
        }
        Command::Bake {
            images,
            uv,
            mesh,
            shapenet,
            category,
            limit,
            k,
            out,
        } => {
            let written = match (images, shapenet) {
                (Some(images), None) => bake::bake_images(&images, &uv.unwrap(), &mesh.unwrap(), k, &out)?,
                (None, Some(root)) => bake::bake_shapenet(&root, &category.unwrap(), k, limit, &out)?,
                _ => return Err(CliError::Usage("bake needs either --images/--uv/--mesh or --shapenet/--category".into())),
            };
            println!("baked {} samples into {}", written.len(), out.display());
            Ok(())
        }
        Command::Train {
            config,
            data,
            cache,
            run_dir,
            k,
            blocks,
            width,
            lr,
            batch_size,
            epochs,
            max_steps,
            seed,
            checkpoint_every,
            resume,
        } => {
            let mut cfg = match &config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            cfg.apply(&ConfigOverrides {
                data,
                cache,
                run_dir,
                k,
                blocks,
                width,
                lr,
                batch_size,
                epochs,
                max_steps,
                seed,
                checkpoint_every,
                deterministic: cli.deterministic,
            });
            let s = train::train(&cfg, resume)?;
            println!(
                "trained {} steps in {:.1} s, final loss {:.5}; checkpoint {}",
                s.steps,
                s.seconds,
                s.final_loss,
                s.final_checkpoint.display()
            );
            Ok(())
        }
        Command::Sample {
            ckpt,
            mesh,
            count,
            seed,
            out,
            cache,
        } => {
            let written = sample::sample(&ckpt, &mesh, cache.as_deref(), count, seed, &out)?;
            println!("wrote {} samples into {}", written.len(), out.display());
            Ok(())
        }
        Command::Eval {
            reference,
            gen,
            cache,
            mesh,
            k,
            ckpt,
            timing_repeats,
            out,
        } => {
            let source = match (&cache, &mesh) {
                (Some(dir), _) => MassSource::Cache(dir),
                (None, Some(path)) => MassSource::Mesh { path, k },
                (None, None) => unreachable!("clap requires --cache or --mesh"),
            };
            let timing = ckpt.as_deref().map(|checkpoint| Timing {
                checkpoint,
                repeats: timing_repeats,
            });
            let report = evaluate::evaluate(&reference, &gen, source, timing)?;
            print!("{report}");
            if let Some(path) = out {
                heatgen::io_util::write_atomic(&path, report.csv().as_bytes())?;
            }
            Ok(())
        }
        Command::Export { field, mesh, out } => {
            export::export(&field, &mesh, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
