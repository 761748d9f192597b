//! Experiment orchestration: configuration with canonical hashing, the
//! shared lab state (dataset, probe, pretrained original model), the
//! comparison and ablation runs, and machine-readable report emission.

mod cli;
mod report;

pub use cli::{complement_mask, kl_check_suite, lemma1_suite, run_cli, Cli, KlCheckReport};
pub use report::{emit_report, RunLedger, RunRecord};

use crate::datasets::{
    gen_dataset, make_splits, Dataset, DatasetConfig, Split, SplitSpec, Splits,
};
use crate::metrics::{evaluate_model, MetricReport};
use crate::models::{
    decoder_from_checkpoint, decoder_to_checkpoint, encoder_from_checkpoint,
    encoder_to_checkpoint, load_checkpoint, probe_from_checkpoint, probe_to_checkpoint,
    save_checkpoint, train_original, train_probe, Checkpoint, CheckpointMeta, DecoderParams,
    EncoderParams, ModelConfig, ProbeConfig, ProbeParams, TrainingConfig,
};
use crate::numerics::Rng;
use crate::transforms::{make_mask, MaskSpec};
use crate::unlearning::{run_unlearn, Method, NoiseKind, RetainSource, UnlearnConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Sweep axes for the ablation experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub alphas: Vec<f64>,
    pub retain_counts: Vec<usize>,
    /// Fractions of the patch grid removed by centered crops.
    pub mask_ratios: Vec<f64>,
    pub noise_kinds: Vec<NoiseKind>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        SweepAxes {
            alphas: vec![0.01, 0.1, 0.25, 1.0],
            retain_counts: vec![1, 4, 16, 64],
            mask_ratios: vec![0.0625, 0.25, 0.5625],
            noise_kinds: vec![NoiseKind::Gaussian, NoiseKind::Uniform],
        }
    }
}

/// Everything a full experiment needs. Hashing is canonical: the TOML file
/// may order fields freely, the hash never changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub dataset: DatasetConfig,
    pub split: SplitSpec,
    /// Mask patterns cycled during pretraining.
    pub pretrain_masks: Vec<MaskSpec>,
    /// The information-removal operator used for unlearning + evaluation.
    pub eval_mask: MaskSpec,
    pub model: ModelConfig,
    pub pretrain: TrainingConfig,
    pub probe: ProbeConfig,
    pub probe_train: TrainingConfig,
    pub unlearn: UnlearnConfig,
    pub sweep: SweepAxes,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // interleaved class assignment mirrors a random class draw: every
        // split sees every shape family and texture orientation
        let retain: Vec<usize> = (0..24).filter(|c| c % 3 == 0).collect();
        let forget: Vec<usize> = (0..24).filter(|c| c % 3 == 1).collect();
        let proxy: Vec<usize> = (0..24).filter(|c| c % 3 == 2).collect();
        ExperimentConfig {
            master_seed: 11,
            dataset: DatasetConfig::default(),
            split: SplitSpec {
                retain_classes: retain,
                forget_classes: forget,
                proxy_classes: proxy,
                heldout_indices: (64..80).collect(),
            },
            pretrain_masks: vec![
                MaskSpec::CenterCrop { size: 4 },
                MaskSpec::Outpaint { size: 4 },
            ],
            eval_mask: MaskSpec::CenterCrop { size: 4 },
            model: ModelConfig::default(),
            pretrain: TrainingConfig::default(),
            probe: ProbeConfig::default(),
            probe_train: TrainingConfig { epochs: 40, ..Default::default() },
            unlearn: UnlearnConfig::default(),
            sweep: SweepAxes::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", p, e)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let p = path.display().to_string();
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize: {}", e)))?;
        std::fs::write(path, text).map_err(|e| Error::io(&p, e))
    }

    /// Canonical hash: JSON with sorted keys, SHA-256, first 16 hex chars.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex_prefix(&digest, 16)
    }

    /// Per-run seed: master seed mixed with the run name, so sweep points
    /// never share streams by accident.
    pub fn run_seed(&self, run_name: &str) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(run_name.as_bytes());
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    fn patch_grid(&self) -> (usize, usize) {
        let g = self.dataset.image_size / self.dataset.patch_size;
        (g, g)
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        s.push_str(&format!("{:02x}", b));
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

/// Shared state for a config: dataset, splits, probe and the pretrained
/// original model. Built once and reused by every run in the process;
/// checkpoints round-trip through the cache directory when given.
pub struct Lab {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub dataset: Dataset,
    pub splits: Splits,
    pub probe: ProbeParams,
    pub original_encoder: EncoderParams,
    pub original_decoder: DecoderParams,
}

impl Lab {
    /// Builds (or restores from `cache_dir`) everything derived from the
    /// config: the dataset, probe, and pretrained original model.
    pub fn build(config: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<Lab> {
        let config_hash = config.hash();
        let dataset = gen_dataset(&config.dataset, config.run_seed("dataset"))?;
        let splits = make_splits(&dataset, &config.split)?;
        let patch = config.dataset.patch_size;

        let cached = cache_dir.map(|d| {
            (
                d.join(format!("original-{}.ckpt", config_hash)),
                d.join(format!("probe-{}.ckpt", config_hash)),
            )
        });
        if let Some((orig_path, probe_path)) = &cached {
            if orig_path.exists() && probe_path.exists() {
                let orig = load_checkpoint(orig_path)?;
                let probe = load_checkpoint(probe_path)?;
                return Ok(Lab {
                    config: config.clone(),
                    config_hash,
                    dataset,
                    splits,
                    probe: probe_from_checkpoint(&probe)?,
                    original_encoder: encoder_from_checkpoint(&orig)?,
                    original_decoder: decoder_from_checkpoint(&orig)?,
                });
            }
        }

        let train_images = splits.all_train(&dataset);
        let trained = train_original(
            &train_images,
            &config.pretrain_masks,
            patch,
            &config.model,
            &config.pretrain,
            config.run_seed("pretrain"),
        )?;
        let probe = train_probe(
            &train_images,
            patch,
            &config.probe,
            &config.probe_train,
            config.run_seed("probe"),
        )?;

        let lab = Lab {
            config: config.clone(),
            config_hash,
            dataset,
            splits,
            probe: probe.probe,
            original_encoder: trained.encoder,
            original_decoder: trained.decoder,
        };
        if let Some((orig_path, probe_path)) = &cached {
            lab.save_original(orig_path)?;
            lab.save_probe(probe_path)?;
        }
        Ok(lab)
    }

    pub fn save_original(&self, path: &Path) -> Result<()> {
        let mut ckpt = Checkpoint::new(CheckpointMeta {
            seed: self.config.run_seed("pretrain"),
            epochs: self.config.pretrain.epochs as u32,
            config_hash: self.config_hash.clone(),
        });
        encoder_to_checkpoint(&self.original_encoder, &mut ckpt);
        decoder_to_checkpoint(&self.original_decoder, &mut ckpt);
        save_checkpoint(&ckpt, path)
    }

    pub fn save_probe(&self, path: &Path) -> Result<()> {
        let mut ckpt = Checkpoint::new(CheckpointMeta {
            seed: self.config.run_seed("probe"),
            epochs: self.config.probe_train.epochs as u32,
            config_hash: self.config_hash.clone(),
        });
        probe_to_checkpoint(&self.probe, &mut ckpt);
        save_checkpoint(&ckpt, path)
    }

    pub fn evaluate(
        &self,
        encoder: &EncoderParams,
        decoder: &DecoderParams,
        tag: &str,
    ) -> Result<MetricReport> {
        evaluate_model(
            encoder,
            decoder,
            &self.probe,
            &self.dataset,
            &self.splits,
            &self.config.eval_mask,
            tag,
            &self.config_hash,
        )
    }

    fn unlearn_with(
        &self,
        method: Method,
        config: &UnlearnConfig,
    ) -> Result<crate::unlearning::UnlearnResult> {
        run_unlearn(
            method,
            &self.original_encoder,
            &self.original_decoder,
            &self.dataset,
            &self.splits,
            &self.config.eval_mask,
            config,
        )
    }
}

/// One row of the method-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub report: MetricReport,
}

/// Evaluates the original model, every unlearning method, and the
/// proxy-retain variant of the main method on the heldout splits.
pub fn run_table1_experiment(lab: &Lab) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    rows.push(ComparisonRow {
        method: "original".into(),
        report: lab.evaluate(&lab.original_encoder, &lab.original_decoder, "original")?,
    });
    for method in Method::ALL {
        let config = UnlearnConfig {
            seed: lab.config.run_seed(&format!("unlearn-{}", method.name())),
            ..lab.config.unlearn.clone()
        };
        let r = lab.unlearn_with(method, &config)?;
        rows.push(ComparisonRow {
            method: method.name().into(),
            report: lab.evaluate(&r.encoder, &r.decoder, method.name())?,
        });
    }
    let proxy_config = UnlearnConfig {
        retain_source: RetainSource::Proxy,
        seed: lab.config.run_seed("unlearn-ours-proxy"),
        ..lab.config.unlearn.clone()
    };
    let r = lab.unlearn_with(Method::Ours, &proxy_config)?;
    rows.push(ComparisonRow {
        method: "ours_proxy".into(),
        report: lab.evaluate(&r.encoder, &r.decoder, "ours_proxy")?,
    });
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub report: MetricReport,
}

/// One unlearning run per alpha, sharing the run seed so only alpha moves.
pub fn sweep_alpha(lab: &Lab, alphas: &[f64]) -> Result<Vec<AlphaRow>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("sweep_alpha: empty alpha list".into()));
    }
    if alphas.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidArgument("sweep_alpha: negative alpha".into()));
    }
    let seed = lab.config.run_seed("sweep-alpha");
    let mut rows = Vec::new();
    for &alpha in alphas {
        let config = UnlearnConfig { alpha, seed, ..lab.config.unlearn.clone() };
        let r = lab.unlearn_with(Method::Ours, &config)?;
        let tag = format!("ours-alpha-{}", alpha);
        rows.push(AlphaRow { alpha, report: lab.evaluate(&r.encoder, &r.decoder, &tag)? });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetainAvailabilityRow {
    pub source: String,
    pub images_per_class: Option<usize>,
    pub report: MetricReport,
}

/// `ours` with progressively fewer real retain images per class, plus the
/// proxy-set variant.
pub fn sweep_retain_availability(
    lab: &Lab,
    per_class_counts: &[usize],
) -> Result<Vec<RetainAvailabilityRow>> {
    let train_per_class =
        lab.config.dataset.samples_per_class - lab.config.split.heldout_indices.len();
    let mut rows = Vec::new();
    for &count in per_class_counts {
        if count > train_per_class {
            return Err(Error::InvalidArgument(format!(
                "retain availability {} exceeds {} train images per class",
                count, train_per_class
            )));
        }
        // the full-count run is configured identically to the main run
        let source = if count == train_per_class {
            RetainSource::Real
        } else {
            RetainSource::Subsample(count)
        };
        let config = UnlearnConfig {
            retain_source: source,
            seed: lab.config.run_seed("unlearn-ours"),
            ..lab.config.unlearn.clone()
        };
        let r = lab.unlearn_with(Method::Ours, &config)?;
        let tag = format!("ours-retain-{}", count);
        rows.push(RetainAvailabilityRow {
            source: format!("real-{}", count),
            images_per_class: Some(count),
            report: lab.evaluate(&r.encoder, &r.decoder, &tag)?,
        });
    }
    let config = UnlearnConfig {
        retain_source: RetainSource::Proxy,
        seed: lab.config.run_seed("unlearn-ours-proxy"),
        ..lab.config.unlearn.clone()
    };
    let r = lab.unlearn_with(Method::Ours, &config)?;
    rows.push(RetainAvailabilityRow {
        source: "proxy".into(),
        images_per_class: None,
        report: lab.evaluate(&r.encoder, &r.decoder, "ours-proxy")?,
    });
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseTypeRow {
    pub noise: NoiseKind,
    pub mask_ratio: f64,
    pub report: MetricReport,
}

/// Paired runs (shared seeds) for each noise kind at each centered-crop
/// ratio in the sweep axes.
pub fn sweep_noise_type(lab: &Lab) -> Result<Vec<NoiseTypeRow>> {
    let seed = lab.config.run_seed("sweep-noise");
    let (grid_rows, _) = lab.config.patch_grid();
    let mut rows = Vec::new();
    for &ratio in &lab.config.sweep.mask_ratios {
        let size = center_size_for_ratio(ratio, grid_rows)?;
        let mask = MaskSpec::CenterCrop { size };
        for &noise in &lab.config.sweep.noise_kinds {
            let config = UnlearnConfig { noise_kind: noise, seed, ..lab.config.unlearn.clone() };
            let r = run_unlearn(
                Method::Ours,
                &lab.original_encoder,
                &lab.original_decoder,
                &lab.dataset,
                &lab.splits,
                &mask,
                &config,
            )?;
            let report = evaluate_model(
                &r.encoder,
                &r.decoder,
                &lab.probe,
                &lab.dataset,
                &lab.splits,
                &mask,
                &format!("ours-{:?}-ratio-{}", noise, ratio),
                &lab.config_hash,
            )?;
            rows.push(NoiseTypeRow { noise, mask_ratio: ratio, report });
        }
    }
    Ok(rows)
}

/// Centered crop size whose patch count best matches `ratio` of the grid.
pub fn center_size_for_ratio(ratio: f64, grid: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidArgument(format!("mask ratio {} outside [0,1]", ratio)));
    }
    let size = (ratio * (grid * grid) as f64).sqrt().round() as usize;
    Ok(size.clamp(1, grid))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskRatioRow {
    pub model: String,
    pub mask_ratio: f64,
    pub report: MetricReport,
}

/// Evaluates the original and the default-unlearned model across centered
/// crops of growing area.
pub fn sweep_mask_ratio(lab: &Lab) -> Result<Vec<MaskRatioRow>> {
    let config = UnlearnConfig {
        seed: lab.config.run_seed("unlearn-ours"),
        ..lab.config.unlearn.clone()
    };
    let unlearned = lab.unlearn_with(Method::Ours, &config)?;
    let (grid_rows, _) = lab.config.patch_grid();
    let mut rows = Vec::new();
    for &ratio in &lab.config.sweep.mask_ratios {
        let size = center_size_for_ratio(ratio, grid_rows)?;
        let mask = MaskSpec::CenterCrop { size };
        for (name, enc, dec) in [
            ("original", &lab.original_encoder, &lab.original_decoder),
            ("ours", &unlearned.encoder, &unlearned.decoder),
        ] {
            let report = evaluate_model(
                enc,
                dec,
                &lab.probe,
                &lab.dataset,
                &lab.splits,
                &mask,
                &format!("{}-ratio-{}", name, ratio),
                &lab.config_hash,
            )?;
            rows.push(MaskRatioRow { model: name.into(), mask_ratio: ratio, report });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValRow {
    pub source_model: String,
    pub split: String,
    pub fid_analog: f64,
    pub is_analog: f64,
    pub clip_analog: f64,
}

/// Two-stage check that unlearned reconstructions carry no recoverable
/// content: reconstruct the masked center with each source model, keep
/// only that center, and let the original model regenerate the rest.
pub fn cross_validate(
    lab: &Lab,
    unlearned_encoder: &EncoderParams,
    unlearned_decoder: &DecoderParams,
    mask_center: &MaskSpec,
    mask_outer: &MaskSpec,
) -> Result<Vec<CrossValRow>> {
    let patch = lab.config.dataset.patch_size;
    let grid = lab.config.patch_grid();
    let center = make_mask(mask_center, grid)?;
    let outer = make_mask(mask_outer, grid)?;
    if !center.is_complement_of(&outer) {
        return Err(Error::InvalidArgument(
            "cross_validate: masks are not complementary".into(),
        ));
    }

    let mut rows = Vec::new();
    for (model_name, enc, dec) in [
        ("original", &lab.original_encoder, &lab.original_decoder),
        ("unlearned", unlearned_encoder, unlearned_decoder),
    ] {
        for (split_name, split) in [("retain", Split::Retain), ("forget", Split::Forget)] {
            let gt = lab.splits.heldout(&lab.dataset, split);
            let flat = gt.patch_flatten(patch)?;
            // stage 1: source model inpaints the masked center
            let stage1_in = crate::transforms::apply_mask_rows(&flat, &center, patch * patch)?;
            let recon1 = dec.decode_clamped(&enc.encode(&stage1_in)?)?;
            // keep only the reconstructed center, outer region zeroed
            let stage2_in = crate::transforms::apply_mask_rows(&recon1, &outer, patch * patch)?;
            // stage 2: the original model regenerates the outer region
            let recon2 = lab
                .original_decoder
                .decode_clamped(&lab.original_encoder.encode(&stage2_in)?)?;

            let emb_recon = lab.probe.embed(&recon2)?;
            let emb_truth = lab.probe.embed(&flat)?;
            let fid = crate::metrics::frechet_distance(
                &crate::metrics::fit_moments(&emb_recon)?,
                &crate::metrics::fit_moments(&emb_truth)?,
            )?;
            let is_score = crate::metrics::inception_score_from_posteriors(
                &lab.probe.posteriors(&recon2)?,
            )?;
            let clip = crate::metrics::mean_cosine(&emb_recon, &emb_truth)?;
            rows.push(CrossValRow {
                source_model: model_name.into(),
                split: split_name.into(),
                fid_analog: fid,
                is_analog: is_score,
                clip_analog: clip,
            });
        }
    }
    Ok(rows)
}

/// Theory verification artifacts: randomized bound trials plus the KL and
/// family checks, all JSON-serializable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryTrial {
    pub k: usize,
    pub scale: f64,
    pub lhs_retain: f64,
    pub rhs_retain: f64,
    pub margin_retain: f64,
    pub lhs_forget: f64,
    pub rhs_forget: f64,
    pub margin_forget: f64,
    pub pass: bool,
}

/// Runs randomized bound trials against the lab's original encoder:
/// Gaussian perturbations of the encoder at the given scales, evaluated on
/// heldout batches of each K.
pub fn theorem1_trials(
    lab: &Lab,
    trials: usize,
    ks: &[usize],
    scales: (f64, f64),
    tolerance: f64,
) -> Result<Vec<TheoryTrial>> {
    let patch = lab.config.dataset.patch_size;
    let grid = lab.config.patch_grid();
    let mask = make_mask(&lab.config.eval_mask, grid)?;
    let retain = lab
        .splits
        .heldout(&lab.dataset, Split::Retain)
        .patch_flatten(patch)?;
    let forget = lab
        .splits
        .heldout(&lab.dataset, Split::Forget)
        .patch_flatten(patch)?;
    let retain = crate::transforms::apply_mask_rows(&retain, &mask, patch * patch)?;
    let forget = crate::transforms::apply_mask_rows(&forget, &mask, patch * patch)?;

    let mut rng = Rng::new(lab.config.run_seed("theory"));
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let k = ks[t % ks.len()];
        if retain.shape()[0] < k || forget.shape()[0] < k {
            return Err(Error::InvalidArgument(format!(
                "theorem1_trials: K={} exceeds heldout size",
                k
            )));
        }
        let frac = t as f64 / (trials.max(2) - 1) as f64;
        let scale = scales.0 + (scales.1 - scales.0) * frac;
        let mut perturbed = lab.original_encoder.clone();
        for tensor in perturbed.tensors_mut() {
            let noise = rng.standard_normal(tensor.shape().to_vec());
            for (w, n) in tensor.data_mut().iter_mut().zip(noise.data()) {
                *w += scale * n;
            }
        }
        let pick = |x: &crate::numerics::Tensor, rng: &mut Rng| {
            let idx = rng.choose_k(x.shape()[0], k);
            crate::models::gather_rows(x, &idx)
        };
        let rb = pick(&retain, &mut rng);
        let fb = pick(&forget, &mut rng);
        let noise = rng.standard_normal(vec![k, rb.shape()[1]]);
        let noise = crate::transforms::apply_mask_rows(&noise, &mask, patch * patch)?;
        let report = crate::theory::verify_theorem1(
            &perturbed,
            &lab.original_encoder,
            &rb,
            &fb,
            &noise,
            tolerance,
        )?;
        out.push(TheoryTrial {
            k,
            scale,
            lhs_retain: report.retain.lhs,
            rhs_retain: report.retain.rhs,
            margin_retain: report.retain.margin,
            lhs_forget: report.forget.lhs,
            rhs_forget: report.forget.rhs,
            margin_forget: report.forget.margin,
            pass: report.holds,
        });
    }
    Ok(out)
}

/// Spawns up to `threads` workers over the items, preserving input order
/// in the output. `I2IU_THREADS` caps the worker count.
pub fn parallel_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    let threads = std::env::var("I2IU_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(1)
        .max(1);
    if threads == 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let mut slots: Vec<Option<U>> = (0..items.len()).map(|_| None).collect();
    let work: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(work);
    let fref = &f;
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for _ in 0..threads {
            handles.push(scope.spawn(|| {
                let mut done = Vec::new();
                loop {
                    let item = queue.lock().expect("queue lock").pop();
                    match item {
                        Some((i, t)) => done.push((i, fref(t))),
                        None => break,
                    }
                }
                done
            }));
        }
        for h in handles {
            for (i, u) in h.join().expect("worker panicked") {
                slots[i] = Some(u);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("all slots filled")).collect()
}

/// Output paths for one experiment directory.
pub struct OutputPaths {
    pub root: PathBuf,
}

impl OutputPaths {
    pub fn new(root: &Path) -> Result<OutputPaths> {
        std::fs::create_dir_all(root)
            .map_err(|e| Error::io(root.display().to_string(), e))?;
        Ok(OutputPaths { root: root.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_is_canonical() {
        let config = ExperimentConfig::default();
        let h1 = config.hash();
        // round-trip through TOML, then through a generic Value whose
        // serializer reorders keys alphabetically: the hash must not move
        let text = toml::to_string_pretty(&config).unwrap();
        let reparsed: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(h1, reparsed.hash());

        let value: toml::Value = toml::from_str(&text).unwrap();
        let reordered = toml::to_string(&value).unwrap();
        assert_ne!(text, reordered);
        let reparsed2: ExperimentConfig = toml::from_str(&reordered).unwrap();
        assert_eq!(h1, reparsed2.hash());
    }

    #[test]
    fn run_seeds_differ_by_name() {
        let config = ExperimentConfig::default();
        assert_ne!(config.run_seed("a"), config.run_seed("b"));
        assert_eq!(config.run_seed("a"), config.run_seed("a"));
    }

    #[test]
    fn center_size_mapping() {
        assert_eq!(center_size_for_ratio(0.25, 8).unwrap(), 4);
        assert_eq!(center_size_for_ratio(0.0625, 8).unwrap(), 2);
        assert_eq!(center_size_for_ratio(0.5625, 8).unwrap(), 6);
        assert!(center_size_for_ratio(1.5, 8).is_err());
    }

    #[test]
    fn parallel_map_preserves_order() {
        std::env::set_var("I2IU_THREADS", "3");
        let out = parallel_map((0..20).collect::<Vec<_>>(), |x| x * x);
        std::env::remove_var("I2IU_THREADS");
        assert_eq!(out, (0..20).map(|x| x * x).collect::<Vec<_>>());
    }
}
