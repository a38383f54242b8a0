//! `bteach`: synthetic corpora, target training, explanation bundles,
//! saliency rendering and the study server.
//!
//! Exit status: 0 success, 2 invalid input, 3 no teaching set met the
//! acceptance criterion, 4 I/O failure.

mod error;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use bteach_core::dataset::synth::generate_synthetic_corpus;
use bteach_core::dataset::{load_corpus, load_manifest, read_probmap, LabeledImage, SynthParams};
use bteach_core::pipeline::{explain_target, train_target_model, ThetaFile};
use bteach_core::saliency::render_saliency;
use bteach_core::training::StepRule;
use bteach_core::{Corpus, SelectionMode, TeachingConfig, TrainConfig};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "bteach", version, about = "Example-based explanations for a soft-threshold classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Selection {
    /// Uniform among accepted candidates.
    Uniform,
    /// The accepted candidate closest to the target label.
    Map,
}

#[derive(Clone, Copy, ValueEnum)]
enum Step {
    Adaptive,
    Fixed,
}

#[derive(clap::Args)]
struct TeachingArgs {
    /// Candidate teaching sets to evaluate.
    #[arg(long, default_value_t = 10_000)]
    candidates: usize,
    /// Acceptance tolerance on the learner's probability.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Selection::Uniform)]
    selection: Selection,
}

impl TeachingArgs {
    fn config(&self) -> TeachingConfig {
        TeachingConfig {
            n_candidates: self.candidates,
            epsilon: self.epsilon,
            seed: self.seed,
            selection_mode: match self.selection {
                Selection::Uniform => SelectionMode::UniformAmongAccepted,
                Selection::Map => SelectionMode::MaximumPosterior,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus (probability maps and manifest).
    GenSynth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 0.15)]
        label_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the target model to a manifest's ground truth.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_theta: PathBuf,
        /// Initial learning rate.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Stop once the loss changes by less than this per step.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Step::Adaptive)]
        step: Step,
    },
    /// Select a teaching set for one target and write its bundle.
    Explain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        theta: PathBuf,
        #[arg(long)]
        target_id: String,
        #[command(flatten)]
        teaching: TeachingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a probability map as a saliency PNG.
    Render {
        #[arg(long)]
        probmap: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the study server.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        theta: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long)]
        sessions_dir: PathBuf,
        /// Where bundles are read from or generated into
        /// (default: `<sessions-dir>/bundles`).
        #[arg(long)]
        bundles_dir: Option<PathBuf>,
        #[command(flatten)]
        teaching: TeachingArgs,
    },
}

fn load(manifest: &Path, theta: Option<&Path>) -> Result<(Vec<LabeledImage>, Corpus, Option<ThetaFile>), CliError> {
    let images = load_manifest(manifest).map_err(|e| CliError::from(e).context(manifest))?;
    let mut corpus = load_corpus(&images)?;
    let theta = match theta {
        Some(p) => {
            let t = ThetaFile::load(p).map_err(|e| CliError::from(e).context(p))?;
            corpus.annotate(&t.theta);
            Some(t)
        }
        None => None,
    };
    Ok((images, corpus, theta))
}

fn print(v: serde_json::Value) {
    // A closed stdout (for example `| head`) is not an error.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&v).expect("json"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenSynth {
            n,
            width,
            height,
            label_noise,
            seed,
            out,
        } => {
            let params = SynthParams {
                n,
                width,
                height,
                label_noise,
                seed,
            };
            let manifest = generate_synthetic_corpus(&params, &out)?;
            print(json!({ "manifest": manifest, "n": n }));
        }
        Command::Train {
            manifest,
            out_theta,
            lr,
            max_iter,
            tol,
            step,
        } => {
            let (_, corpus, _) = load(&manifest, None)?;
            let mut cfg = TrainConfig::for_items(corpus.len());
            if let Some(lr) = lr {
                cfg.learning_rate = lr;
                if let StepRule::Adaptive { max_rate, .. } = &mut cfg.step_rule {
                    *max_rate = max_rate.max(lr);
                }
            }
            if let Some(m) = max_iter {
                cfg.max_iterations = m;
            }
            if let Some(t) = tol {
                cfg.loss_tolerance = t;
            }
            if let Step::Fixed = step {
                cfg.step_rule = StepRule::Fixed;
            }
            let file = train_target_model(&corpus, &cfg)?;
            file.save(&out_theta).map_err(|e| CliError::from(e).context(&out_theta))?;
            print(serde_json::to_value(&file).expect("json"));
        }
        Command::Explain {
            manifest,
            theta,
            target_id,
            teaching,
            out,
        } => {
            let (images, corpus, theta) = load(&manifest, Some(&theta))?;
            let theta = theta.expect("loaded").theta;
            let (set, bundle) = explain_target(&corpus, &images, &theta, &target_id, &teaching.config(), &out)?;
            print(json!({
                "target_id": set.target_id,
                "target_label": set.target_label,
                "examples": set.examples,
                "learner_prob": set.learner_prob,
                "acceptance_count": set.acceptance_count,
                "n_candidates": set.n_candidates,
                "files": bundle.files(),
                "out": out,
            }));
        }
        Command::Render { probmap, out } => {
            let map = read_probmap(&probmap).map_err(|e| CliError::from(e).context(&probmap))?;
            render_saliency(&map)
                .save_png(&out)
                .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        }
        Command::Serve {
            manifest,
            theta,
            port,
            host,
            sessions_dir,
            bundles_dir,
            teaching,
        } => {
            let (images, corpus, theta) = load(&manifest, Some(&theta))?;
            let theta = theta.expect("loaded").theta;
            let bundles_dir = bundles_dir.unwrap_or_else(|| sessions_dir.join("bundles"));
            let materials =
                bteach_service::prepare_materials(&corpus, &images, &theta, &bundles_dir, &teaching.config())?;
            for id in &materials.skipped {
                eprintln!("no teaching set for {id}; skipped");
            }
            let app = bteach_service::app(materials, &sessions_dir)?;
            bteach_service::serve_blocking(SocketAddr::new(host, port), app, |addr| {
                eprintln!("listening on http://{addr}");
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
