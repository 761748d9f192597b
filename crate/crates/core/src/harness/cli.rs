//! Command-line interface. Every subcommand resolves a config (file or
//! defaults), runs against an output directory, and writes artifacts that
//! replay byte-identically under the same master seed.

use super::report::{emit_report, RunLedger};
use super::{
    cross_validate, run_table1_experiment, sweep_alpha, sweep_mask_ratio, sweep_noise_type,
    sweep_retain_availability, theorem1_trials, ExperimentConfig, Lab, OutputPaths,
};
use crate::datasets::{save_manifest, Manifest, Split};
use crate::metrics::export_embeddings;
use crate::models::{
    decoder_from_checkpoint, encoder_from_checkpoint, load_checkpoint, save_checkpoint,
    Checkpoint, CheckpointMeta, DecoderParams, EncoderParams,
};
use crate::models::{decoder_to_checkpoint, encoder_to_checkpoint};
use crate::theory::{
    construct_infinite_kl, kl_discrete, kl_gaussian, kl_quadrature, lemma1_family_check,
    Density1D, DiscreteDist, QuadGrid,
};
use crate::transforms::MaskSpec;
use crate::unlearning::{Method, UnlearnConfig};
use crate::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "i2iu", about = "Encoder-space unlearning lab for image-to-image models")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the dataset and write its manifest
    GenData(CommonArgs),
    /// Pretrain the original model and the probe
    Train(CommonArgs),
    /// Run one unlearning method against the pretrained model
    Unlearn {
        #[command(flatten)]
        common: CommonArgs,
        /// ours | max_loss | noisy_label | retain_label | random_encoder
        #[arg(long, default_value = "ours")]
        method: String,
        /// Trade-off coefficient override
        #[arg(long)]
        alpha: Option<f64>,
        /// Checkpoint of the original model (trained if absent)
        #[arg(long)]
        original: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the heldout splits
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Model checkpoint to evaluate (the original model if absent)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Verify the information bounds and KL properties numerically
    VerifyTheory(CommonArgs),
    /// Full experiment: comparison table, ablation sweeps, cross
    /// validation, theory trials, report bundle
    Sweep(CommonArgs),
    /// Two-stage regeneration check on the default unlearned model
    CrossVal(CommonArgs),
    /// Re-emit the report bundle from an existing ledger
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Parser, Debug)]
struct CommonArgs {
    /// Experiment config file (TOML); defaults are used if absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

impl CommonArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        Ok(config)
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_cli(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => gen_data(&args),
        Command::Train(args) => train(&args),
        Command::Unlearn { common, method, alpha, original } => {
            unlearn(&common, &method, alpha, original.as_deref())
        }
        Command::Eval { common, checkpoint, format } => {
            eval(&common, checkpoint.as_deref(), format)
        }
        Command::VerifyTheory(args) => verify_theory(&args),
        Command::Sweep(args) => sweep(&args),
        Command::CrossVal(args) => cross_val(&args),
        Command::Report { out } => {
            let ledger = RunLedger::load(&out.join("ledger.json"))?;
            emit_report(&ledger, &out)
        }
    }
}

fn gen_data(args: &CommonArgs) -> Result<()> {
    let config = args.config()?;
    let out = OutputPaths::new(&args.out)?;
    let dataset = crate::datasets::gen_dataset(&config.dataset, config.run_seed("dataset"))?;
    let manifest = Manifest {
        seed: dataset.seed,
        config: config.dataset.clone(),
        split: config.split.clone(),
    };
    save_manifest(&manifest, &out.file("dataset.manifest"))?;

    // images as IDX bytes for external consumers
    let images = dataset.images();
    let path = out.file("images.idx");
    let mut bytes = Vec::with_capacity(16 + images.pixels().len());
    bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(images.height() as u32).to_be_bytes());
    bytes.extend_from_slice(&(images.width() as u32).to_be_bytes());
    bytes.extend(images.pixels().iter().map(|&p| (p * 255.0).round() as u8));
    std::fs::write(&path, bytes).map_err(|e| Error::io(path.display().to_string(), e))?;

    let labels_path = out.file("labels.txt");
    let labels: Vec<String> = images.labels().iter().map(|l| l.to_string()).collect();
    std::fs::write(&labels_path, labels.join("\n") + "\n")
        .map_err(|e| Error::io(labels_path.display().to_string(), e))?;
    println!("dataset: {} images, manifest + idx written", images.len());
    Ok(())
}

fn train(args: &CommonArgs) -> Result<()> {
    let config = args.config()?;
    let out = OutputPaths::new(&args.out)?;
    let lab = Lab::build(&config, Some(&out.root))?;
    // cache files carry the hash; also write stable names for tooling
    lab.save_original(&out.file("original.ckpt"))?;
    lab.save_probe(&out.file("probe.ckpt"))?;
    let acc = crate::models::probe_accuracy(
        &lab.probe,
        &lab.splits.all_heldout(&lab.dataset),
        config.dataset.patch_size,
    )?;
    println!("trained original + probe (heldout probe accuracy {:.3})", acc);
    Ok(())
}

fn load_model(path: &Path) -> Result<(EncoderParams, DecoderParams, Checkpoint)> {
    let ckpt = load_checkpoint(path)?;
    let enc = encoder_from_checkpoint(&ckpt)?;
    let dec = decoder_from_checkpoint(&ckpt)?;
    Ok((enc, dec, ckpt))
}

fn unlearn(
    args: &CommonArgs,
    method_name: &str,
    alpha: Option<f64>,
    original: Option<&Path>,
) -> Result<()> {
    let config = args.config()?;
    let out = OutputPaths::new(&args.out)?;
    let method = Method::parse(method_name)?;
    let lab = match original {
        Some(path) => {
            let (enc, dec, _) = load_model(path)?;
            let mut lab = Lab::build_without_model(&config)?;
            lab.original_encoder = enc;
            lab.original_decoder = dec;
            lab
        }
        None => Lab::build(&config, Some(&out.root))?,
    };
    let mut unlearn_config = UnlearnConfig {
        seed: config.run_seed(&format!("unlearn-{}", method.name())),
        ..config.unlearn.clone()
    };
    if let Some(a) = alpha {
        unlearn_config.alpha = a;
    }
    let result = crate::unlearning::run_unlearn(
        method,
        &lab.original_encoder,
        &lab.original_decoder,
        &lab.dataset,
        &lab.splits,
        &config.eval_mask,
        &unlearn_config,
    )?;

    let ckpt_path = out.file(&format!("unlearned-{}.ckpt", method.name()));
    let mut ckpt = Checkpoint::new(CheckpointMeta {
        seed: unlearn_config.seed,
        epochs: unlearn_config.epochs as u32,
        config_hash: lab.config_hash.clone(),
    });
    encoder_to_checkpoint(&result.encoder, &mut ckpt);
    decoder_to_checkpoint(&result.decoder, &mut ckpt);
    save_checkpoint(&ckpt, &ckpt_path)?;

    let loss_path = out.file(&format!("loss-{}.csv", method.name()));
    let mut text = String::from("epoch,loss\n");
    for (i, l) in result.loss_trajectory.iter().enumerate() {
        text.push_str(&format!("{},{}\n", i, l));
    }
    std::fs::write(&loss_path, text).map_err(|e| Error::io(loss_path.display().to_string(), e))?;
    println!(
        "unlearned with {} in {:.1}s: {} + {}",
        method.name(),
        result.wall_time_secs,
        ckpt_path.display(),
        loss_path.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn eval(args: &CommonArgs, checkpoint: Option<&Path>, format: OutputFormat) -> Result<()> {
    let config = args.config()?;
    let out = OutputPaths::new(&args.out)?;
    let lab = Lab::build(&config, Some(&out.root))?;
    let (enc, dec, tag) = match checkpoint {
        Some(path) => {
            let (enc, dec, ckpt) = load_model(path)?;
            let tag = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "checkpoint".into());
            drop(ckpt);
            (enc, dec, tag)
        }
        None => (lab.original_encoder.clone(), lab.original_decoder.clone(), "original".into()),
    };
    let report = lab.evaluate(&enc, &dec, &tag)?;
    match format {
        OutputFormat::Json => {
            let path = out.file(&format!("metrics-{}.json", tag));
            write_json(&path, &report)?;
            println!("{}", path.display());
        }
        OutputFormat::Csv => {
            let path = out.file(&format!("metrics-{}.csv", tag));
            let text = format!(
                "model,fid_r,fid_f,is_r,is_f,clip_r,clip_f,config_hash\n{},{},{},{},{},{},{},{}\n",
                tag,
                report.retain.fid_analog,
                report.forget.fid_analog,
                report.retain.is_analog,
                report.forget.is_analog,
                report.retain.clip_analog,
                report.forget.clip_analog,
                report.config_hash,
            );
            std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

/// KL oracle suite: closed form vs quadrature on random Gaussian pairs,
/// the discrete hand cases, and randomized infinite-KL constructions.
#[derive(Debug, Clone, Serialize)]
pub struct KlCheckReport {
    pub gaussian_pairs: usize,
    pub max_gaussian_quadrature_gap: f64,
    pub discrete_hand_cases_pass: bool,
    pub infinite_constructions: usize,
    pub infinite_all_diverge: bool,
}

pub fn kl_check_suite(seed: u64, pairs: usize, constructions: usize) -> Result<KlCheckReport> {
    let mut rng = crate::numerics::Rng::new(seed);
    let mut max_gap = 0.0f64;
    for _ in 0..pairs {
        let m1 = rng.uniform(-2.0, 2.0);
        let m2 = rng.uniform(-2.0, 2.0);
        let s1 = rng.uniform(0.3, 2.0);
        let s2 = rng.uniform(0.3, 2.0);
        let a = crate::metrics::GaussianMoments {
            mean: vec![m1],
            cov: crate::numerics::Tensor::new(vec![1, 1], vec![s1 * s1])?,
            count: 2,
        };
        let b = crate::metrics::GaussianMoments {
            mean: vec![m2],
            cov: crate::numerics::Tensor::new(vec![1, 1], vec![s2 * s2])?,
            count: 2,
        };
        let closed = kl_gaussian(&a, &b)?;
        let p = Density1D::Gaussian { mean: m1, sd: s1 };
        let q = Density1D::Gaussian { mean: m2, sd: s2 };
        let quad = kl_quadrature(&p, &q, &QuadGrid::covering(&p, &q))?
            .finite()
            .ok_or_else(|| Error::InvalidArgument("gaussian pair KL diverged".into()))?;
        max_gap = max_gap.max((closed - quad).abs());
    }

    let p = DiscreteDist::new(vec![0.5, 0.5])?;
    let q = DiscreteDist::new(vec![0.75, 0.25])?;
    let zero = kl_discrete(&p, &p)?.finite() == Some(0.0);
    let hand = kl_discrete(&p, &q)?
        .finite()
        .map(|v| (v - 0.143841).abs() < 1e-6)
        .unwrap_or(false);
    let degenerate = DiscreteDist::new(vec![1.0, 0.0])?;
    let inf = kl_discrete(&p, &degenerate)?.is_infinite();

    let mut all_diverge = true;
    for _ in 0..constructions {
        let raw: Vec<f64> = (0..4).map(|_| rng.uniform(0.05, 1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let base = DiscreteDist::new(probs)?;
        let j = (rng.next_u64() % 4) as usize;
        let mut k = (rng.next_u64() % 4) as usize;
        if k == j {
            k = (k + 1) % 4;
        }
        let kappa = rng.uniform(0.01, 0.5);
        let built = construct_infinite_kl(&base, j, k, kappa)?;
        all_diverge &= kl_discrete(&base, &built)?.is_infinite();
    }

    Ok(KlCheckReport {
        gaussian_pairs: pairs,
        max_gaussian_quadrature_gap: max_gap,
        discrete_hand_cases_pass: zero && hand && inf,
        infinite_constructions: constructions,
        infinite_all_diverge: all_diverge,
    })
}

/// One random scale mixture per case: a dominant narrow component plus a
/// wide tail at the same center, the family where the matched Gaussian is
/// the KL-maximal smooth candidate.
pub fn lemma1_suite(seed: u64, cases: usize) -> Result<Vec<crate::theory::Lemma1Report>> {
    let mut rng = crate::numerics::Rng::new(seed);
    let mut out = Vec::with_capacity(cases);
    for _ in 0..cases {
        let w = rng.uniform(0.65, 0.85);
        let narrow = rng.uniform(0.25, 0.5);
        let wide = narrow * rng.uniform(2.5, 4.0);
        let center = rng.uniform(-0.5, 0.5);
        let p = Density1D::mixture(vec![w, 1.0 - w], vec![center, center], vec![narrow, wide])?;
        out.push(lemma1_family_check(&p)?);
    }
    Ok(out)
}

fn verify_theory(args: &CommonArgs) -> Result<()> {
    let config = args.config()?;
    let out = OutputPaths::new(&args.out)?;
    let lab = Lab::build(&config, Some(&out.root))?;

    let trials = theorem1_trials(&lab, 100, &[8, 16, 32], (0.01, 0.5), 1e-9)?;
    let violations = trials.iter().filter(|t| !t.pass).count();
    write_json(
        &out.file("theory_trials.json"),
        &serde_json::json!({
            "config_hash": lab.config_hash,
            "trials": trials,
            "violations": violations,
        }),
    )?;

    let kl = kl_check_suite(config.run_seed("kl-checks"), 50, 20)?;
    write_json(&out.file("kl_checks.json"), &kl)?;

    let lemma1 = lemma1_suite(config.run_seed("lemma1"), 20)?;
    let all_max = lemma1.iter().all(|r| r.gaussian_attains_max);
    write_json(
        &out.file("lemma1.json"),
        &serde_json::json!({
            "config_hash": lab.config_hash,
            "cases": lemma1.len(),
            "gaussian_attains_max_everywhere": all_max,
            "margins": lemma1.iter().map(|r| r.margin).collect::<Vec<_>>(),
        }),
    )?;
    println!(
        "theory: {} bound trials ({} violations), kl gap {:.2e}, lemma1 max everywhere: {}",
        trials.len(),
        violations,
        kl.max_gaussian_quadrature_gap,
        all_max
    );
    Ok(())
}

fn cross_val(args: &CommonArgs) -> Result<()> {
    let config = args.config()?;
    let out = OutputPaths::new(&args.out)?;
    let lab = Lab::build(&config, Some(&out.root))?;
    let unlearn_config = UnlearnConfig {
        seed: config.run_seed("unlearn-ours"),
        ..config.unlearn.clone()
    };
    let result = crate::unlearning::run_unlearn(
        Method::Ours,
        &lab.original_encoder,
        &lab.original_decoder,
        &lab.dataset,
        &lab.splits,
        &config.eval_mask,
        &unlearn_config,
    )?;
    let center = config.eval_mask.clone();
    let outer = complement_mask(&center)?;
    let rows = cross_validate(&lab, &result.encoder, &result.decoder, &center, &outer)?;
    write_json(&out.file("crossval.json"), &rows)?;
    println!("cross validation rows: {}", rows.len());
    Ok(())
}

/// The complementary mask spec for a centered crop (and vice versa);
/// other kinds have no canonical complement here.
pub fn complement_mask(spec: &MaskSpec) -> Result<MaskSpec> {
    match spec {
        MaskSpec::CenterCrop { size } => Ok(MaskSpec::Outpaint { size: *size }),
        MaskSpec::Outpaint { size } => Ok(MaskSpec::CenterCrop { size: *size }),
        other => Err(Error::InvalidArgument(format!(
            "no complement defined for {} masks",
            other.name()
        ))),
    }
}

fn sweep(args: &CommonArgs) -> Result<()> {
    let config = args.config()?;
    let out = OutputPaths::new(&args.out)?;
    let lab = Lab::build(&config, Some(&out.root))?;
    let mut ledger = RunLedger::new(&lab.config_hash);

    lab.save_original(&out.file("original.ckpt"))?;
    lab.save_probe(&out.file("probe.ckpt"))?;
    ledger.record("train", vec!["original.ckpt".into(), "probe.ckpt".into()]);

    ledger.comparison = run_table1_experiment(&lab)?;
    ledger.record("table1", vec![]);

    ledger.alpha_sweep = sweep_alpha(&lab, &config.sweep.alphas)?;
    ledger.record("alpha_sweep", vec![]);

    ledger.retain_availability = sweep_retain_availability(&lab, &config.sweep.retain_counts)?;
    ledger.record("retain_availability", vec![]);

    ledger.noise_type = sweep_noise_type(&lab)?;
    ledger.record("noise_type", vec![]);

    ledger.mask_ratio = sweep_mask_ratio(&lab)?;
    ledger.record("mask_ratio", vec![]);

    let unlearn_config = UnlearnConfig {
        seed: config.run_seed("unlearn-ours"),
        ..config.unlearn.clone()
    };
    let unlearned = crate::unlearning::run_unlearn(
        Method::Ours,
        &lab.original_encoder,
        &lab.original_decoder,
        &lab.dataset,
        &lab.splits,
        &config.eval_mask,
        &unlearn_config,
    )?;
    let center = config.eval_mask.clone();
    let outer = complement_mask(&center)?;
    ledger.crossval =
        cross_validate(&lab, &unlearned.encoder, &unlearned.decoder, &center, &outer)?;
    ledger.record("crossval", vec![]);

    ledger.theory_trials = theorem1_trials(&lab, 100, &[8, 16, 32], (0.01, 0.5), 1e-9)?;
    ledger.record("theory", vec![]);

    // probe-space embeddings of the heldout splits for external analysis
    let retain = lab.splits.heldout(&lab.dataset, Split::Retain);
    let forget = lab.splits.heldout(&lab.dataset, Split::Forget);
    export_embeddings(
        &lab.probe,
        &[("retain", &retain), ("forget", &forget)],
        config.dataset.patch_size,
        &out.file("embeddings.csv"),
    )?;
    ledger.record("embeddings", vec!["embeddings.csv".into()]);

    emit_report(&ledger, &out.root)?;
    println!("sweep complete: {}", out.root.display());
    Ok(())
}

impl Lab {
    /// Lab with dataset, splits and probe but the model left untrained
    /// (used when an original checkpoint is supplied).
    pub fn build_without_model(config: &ExperimentConfig) -> Result<Lab> {
        let config_hash = config.hash();
        let dataset = crate::datasets::gen_dataset(&config.dataset, config.run_seed("dataset"))?;
        let splits = crate::datasets::make_splits(&dataset, &config.split)?;
        let patch = config.dataset.patch_size;
        let train_images = splits.all_train(&dataset);
        let probe = crate::models::train_probe(
            &train_images,
            patch,
            &config.probe,
            &config.probe_train,
            config.run_seed("probe"),
        )?;
        let mut rng = crate::numerics::Rng::new(config.run_seed("placeholder-model"));
        Ok(Lab {
            config: config.clone(),
            config_hash,
            dataset,
            splits,
            probe: probe.probe,
            original_encoder: EncoderParams::init(&config.model, &mut rng),
            original_decoder: DecoderParams::init(&config.model, &mut rng),
        })
    }
}
