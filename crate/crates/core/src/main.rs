use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use kanae::autoencoder::depair_complex;
use kanae::channel::{ebn0_to_noise_var, ChannelKind};
use kanae::harness::bler::{parse_ebn0_sweep, simulate_bler, write_bler_csv, Scheme};
use kanae::harness::persist::{load_model, save_model};
use kanae::harness::report::{reports_to_json, score_baseline, score_model, write_reports};
use kanae::harness::{TrainConfig, Trainer};
use kanae::network::{prune_stack, PruneMode, PruneOutcome};
use kanae::nonlinearity::{nonlinearity_score, NonlinearityParams};
use kanae::rng::{stream, Domain};
use kanae::symreg::{symbolify_model, CandidateLibrary, SymbolifyParams};

/// Channel-coding workbench: train (n,k) autoencoders, prune and symbolify
/// spline networks, score their non-linearity cost, and benchmark BLER
/// against classical maximum-likelihood baselines.
#[derive(Parser)]
#[command(name = "kanae", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Awgn,
    Rayleigh,
}

impl From<ChannelArg> for ChannelKind {
    fn from(arg: ChannelArg) -> Self {
        match arg {
            ChannelArg::Awgn => ChannelKind::Awgn,
            ChannelArg::Rayleigh => ChannelKind::RayleighFlat,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Edge,
    Neuron,
}

impl From<ModeArg> for PruneMode {
    fn from(arg: ModeArg) -> Self {
        match arg {
            ModeArg::Edge => PruneMode::Edge,
            ModeArg::Neuron => PruneMode::Neuron,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train an autoencoder from a JSON config (or resume a checkpoint).
    Train {
        /// Training config (JSON mirroring TrainConfig).
        #[arg(long, conflicts_with = "resume")]
        config: Option<PathBuf>,
        /// Resume from a checkpoint written by --checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Where the trained model is written.
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint path, written every `checkpoint_every` epochs.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Optional JSON dump of the per-epoch loss trace.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Magnitude-prune a spline model's weak activations.
    Prune {
        #[arg(long)]
        model: PathBuf,
        /// One threshold for both halves (overridden per half below).
        #[arg(long)]
        eta: Option<f64>,
        /// Encoder threshold (default 1e-4).
        #[arg(long)]
        eta_encoder: Option<f64>,
        /// Decoder threshold (default 3e-5).
        #[arg(long)]
        eta_decoder: Option<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Edge)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        /// Seed for the decoder calibration batch.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Eb/N0 at which decoder calibration inputs are drawn.
        #[arg(long, default_value_t = 6.0)]
        ebn0_db: f64,
    },
    /// Replace spline activations with closed-form expressions.
    Symbolify {
        #[arg(long)]
        model: PathBuf,
        /// Candidate library config (JSON list of {id, enabled}).
        #[arg(long)]
        library: Option<PathBuf>,
        /// Simplicity weight λ in the selection score R² + λ/N.
        #[arg(long, default_value_t = 0.03)]
        lambda: f64,
        /// Non-linearity tolerance ε.
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON dump of every edge's fit record.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Report non-linearity scores Q for models and MLD baselines.
    Score {
        /// Model file(s) to score (MLP or symbolified).
        #[arg(long)]
        model: Vec<PathBuf>,
        /// Baseline name(s): golay or hamming84.
        #[arg(long)]
        baseline: Vec<String>,
        /// Report path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo BLER sweeps.
    Bler {
        /// Scheme label (golay, hamming84, uncoded-qpsk) or a model path.
        #[arg(long, required = true)]
        scheme: Vec<String>,
        #[arg(long, value_enum, default_value_t = ChannelArg::Awgn)]
        channel: ChannelArg,
        /// Single value or inclusive start:step:stop sweep, in dB.
        #[arg(long)]
        ebn0: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bit count for uncoded-qpsk.
        #[arg(long, default_value_t = 12)]
        k: usize,
    },
    /// Print the worked non-linearity scores for |5x| and sin(5x).
    Example1,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            config,
            resume,
            out,
            checkpoint,
            losses,
        } => cmd_train(config, resume, &out, checkpoint, losses),
        Command::Prune {
            model,
            eta,
            eta_encoder,
            eta_decoder,
            mode,
            out,
            seed,
            ebn0_db,
        } => cmd_prune(
            &model,
            eta_encoder.or(eta).unwrap_or(1e-4),
            eta_decoder.or(eta).unwrap_or(3e-5),
            mode.into(),
            &out,
            seed,
            ebn0_db,
        ),
        Command::Symbolify {
            model,
            library,
            lambda,
            epsilon,
            out,
            report,
        } => cmd_symbolify(&model, library, lambda, epsilon, &out, report),
        Command::Score {
            model,
            baseline,
            out,
        } => cmd_score(&model, &baseline, out),
        Command::Bler {
            scheme,
            channel,
            ebn0,
            trials,
            seed,
            out,
            k,
        } => cmd_bler(&scheme, channel.into(), &ebn0, trials, seed, out, k),
        Command::Example1 => cmd_example1(),
    }
}

fn cmd_train(
    config: Option<PathBuf>,
    resume: Option<PathBuf>,
    out: &Path,
    checkpoint: Option<PathBuf>,
    losses_out: Option<PathBuf>,
) -> Result<()> {
    let mut trainer = match (config, resume) {
        (_, Some(ckpt)) => Trainer::resume(&ckpt)
            .with_context(|| format!("resuming from {}", ckpt.display()))?,
        (Some(cfg), None) => {
            let config = TrainConfig::from_file(&cfg)
                .with_context(|| format!("reading config {}", cfg.display()))?;
            Trainer::new(config)?
        }
        (None, None) => bail!("either --config or --resume is required"),
    };

    let n_epochs = trainer.config().n_epochs;
    let period = trainer.config().checkpoint_every;
    let progress_every = (n_epochs / 20).max(1);
    while !trainer.is_done() {
        let loss = trainer.run_epoch()?;
        let epoch = trainer.epoch();
        if epoch % progress_every == 0 || trainer.is_done() {
            eprintln!("epoch {epoch}/{n_epochs}: loss {loss:.6}");
        }
        if let Some(path) = &checkpoint {
            if period > 0 && epoch % period == 0 && !trainer.is_done() {
                trainer.save_checkpoint(path)?;
            }
        }
    }

    let (model, losses) = trainer.into_parts();
    save_model(&model, out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "trained {} ({},{}) for {} epochs -> {}",
        model.arch_label(),
        model.n(),
        model.k(),
        losses.len(),
        out.display()
    );
    if let Some(path) = losses_out {
        std::fs::write(&path, serde_json::to_string(&losses)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("loss trace -> {}", path.display());
    }
    Ok(())
}

fn cmd_prune(
    model_path: &Path,
    eta_encoder: f64,
    eta_decoder: f64,
    mode: PruneMode,
    out: &Path,
    seed: u64,
    ebn0_db: f64,
) -> Result<()> {
    /// Decoder calibration batch size (2^11 noisy receptions).
    const DECODER_CALIBRATION: usize = 2048;

    let mut model = load_model(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;

    // Encoder calibration: every message the encoder can see.
    let onehots: Vec<Vec<f64>> = (0..model.message_count())
        .map(|m| model.one_hot(m))
        .collect::<kanae::Result<_>>()?;
    let enc = prune_stack(model.encoder_mut(), &onehots, eta_encoder, mode)?;
    // Pruning changes the codewords, so restore unit mean symbol power
    // before calibrating (and later operating) the decoder.
    model.normalize_codebook()?;

    // Decoder calibration: noisy channel outputs at the chosen operating
    // point, drawn from the dedicated pruning stream.
    let noise_var = ebn0_to_noise_var(model.rate(), ebn0_db);
    let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).expect("valid std");
    let mut rng = stream(seed, Domain::Prune, 0, 0);
    let codebook = model.codebook()?;
    let received: Vec<Vec<f64>> = (0..DECODER_CALIBRATION)
        .map(|_| {
            let tx = &codebook[rng.random_range(0..codebook.len())];
            let rx: Vec<_> = tx
                .iter()
                .map(|s| {
                    s + num_complex::Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
                })
                .collect();
            depair_complex(&rx)
        })
        .collect();
    let dec = prune_stack(model.decoder_mut(), &received, eta_decoder, mode)?;

    save_model(&model, out).with_context(|| format!("writing {}", out.display()))?;
    let describe = |o: PruneOutcome| format!("{} edges, {} neurons", o.edges, o.neurons);
    println!(
        "pruned encoder (eta {eta_encoder}): {}; decoder (eta {eta_decoder}): {} -> {}",
        describe(enc),
        describe(dec),
        out.display()
    );
    Ok(())
}

fn cmd_symbolify(
    model_path: &Path,
    library: Option<PathBuf>,
    lambda: f64,
    epsilon: f64,
    out: &Path,
    report: Option<PathBuf>,
) -> Result<()> {
    let model = load_model(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let library = match library {
        Some(path) => CandidateLibrary::from_config_file(&path)
            .with_context(|| format!("reading {}", path.display()))?,
        None => CandidateLibrary::default_library(),
    };
    let mut params = SymbolifyParams::default();
    params.lambda = lambda;
    params.nonlinearity.epsilon = epsilon;

    let (symbolic, records) = symbolify_model(&model, &library, &params)?;
    save_model(&symbolic, out).with_context(|| format!("writing {}", out.display()))?;

    let fitted = records.len();
    let mean_r2 = records.iter().map(|r| r.r2).sum::<f64>() / fitted.max(1) as f64;
    println!(
        "symbolified {fitted} active edges (mean R^2 {mean_r2:.4}) -> {}",
        out.display()
    );
    if let Some(path) = report {
        std::fs::write(&path, serde_json::to_string_pretty(&records)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("fit report -> {}", path.display());
    }
    Ok(())
}

fn cmd_score(models: &[PathBuf], baselines: &[String], out: Option<PathBuf>) -> Result<()> {
    if models.is_empty() && baselines.is_empty() {
        bail!("nothing to score: pass --model and/or --baseline");
    }
    let params = NonlinearityParams::default();
    let mut reports = Vec::new();
    for path in models {
        let model =
            load_model(path).with_context(|| format!("reading {}", path.display()))?;
        reports.push(score_model(&model, &params)?);
    }
    for name in baselines {
        reports.push(score_baseline(name)?);
    }
    for r in &reports {
        println!("{}: Q = {}", r.scheme, r.q);
    }
    match out {
        Some(path) => {
            write_reports(&reports, &path)?;
            println!("report -> {}", path.display());
        }
        None => println!("{}", reports_to_json(&reports)?),
    }
    Ok(())
}

fn cmd_bler(
    schemes: &[String],
    channel: ChannelKind,
    ebn0: &str,
    trials: u64,
    seed: u64,
    out: Option<PathBuf>,
    k: usize,
) -> Result<()> {
    let points = parse_ebn0_sweep(ebn0)?;
    let mut results = Vec::new();
    for name in schemes {
        let scheme = match name.as_str() {
            "golay" | "golay24-mld" => Scheme::golay(),
            "hamming84" | "hamming84-mld" => Scheme::hamming84(),
            "uncoded-qpsk" => Scheme::uncoded_qpsk(k)?,
            path => {
                let model = load_model(Path::new(path))
                    .with_context(|| format!("scheme \"{path}\" is not a builtin label, and reading it as a model file failed"))?;
                Scheme::autoencoder(model)?
            }
        };
        let result = simulate_bler(&scheme, channel, &points, trials, seed)?;
        for p in &result.points {
            eprintln!(
                "{} {} @ {} dB: {}/{} errors, bler {:.3e}",
                result.scheme, result.channel, p.ebn0_db, p.block_errors, p.trials, p.bler
            );
        }
        results.push(result);
    }
    match out {
        Some(path) => {
            write_bler_csv(&results, &path)?;
            println!("results -> {}", path.display());
        }
        None => print!("{}", kanae::harness::bler::bler_csv(&results)),
    }
    Ok(())
}

fn cmd_example1() -> Result<()> {
    let params = NonlinearityParams::default().with_epsilon(1e-3)?;
    let abs5 = nonlinearity_score(|x| (5.0 * x).abs(), (-1.0, 1.0), &params)?;
    let sin5 = nonlinearity_score(|x| (5.0 * x).sin(), (-1.0, 1.0), &params)?;
    println!("N(|5x|)   on [-1, 1] at eps = 1e-3: {abs5}");
    println!("N(sin 5x) on [-1, 1] at eps = 1e-3: {sin5}");
    Ok(())
}
