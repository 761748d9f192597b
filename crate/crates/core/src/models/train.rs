//! Training loops for the reconstruction model and the probe classifier.
//! Both are plain mini-batch loops over shuffled indices with AdamW updates;
//! everything is driven by one seeded generator so runs replay exactly.

use super::nets::{
    forward_decoder, forward_encoder, DecoderParams, EncoderParams, ModelConfig, ProbeConfig,
    ProbeParams,
};
use super::optimizer::{optimizer_step, AdamState, OptimizerHyper, OptimizerKind};
use crate::datasets::ImageBatch;
use crate::numerics::{Gradients, Rng, Tape, Tensor, Var};
use crate::transforms::{apply_mask_rows, make_mask, MaskSpec, PatchMask};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Optimization settings shared by the training loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lr: 1e-3,
            epochs: 100,
            batch: 32,
            beta1: 0.9,
            beta2: 0.95,
            weight_decay: 0.0,
        }
    }
}

impl TrainingConfig {
    pub fn hyper(&self) -> OptimizerHyper {
        OptimizerHyper {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            weight_decay: self.weight_decay,
        }
    }
}

pub struct TrainResult {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    /// Mean reconstruction loss per epoch.
    pub loss_curve: Vec<f64>,
}

pub struct ProbeTrainResult {
    pub probe: ProbeParams,
    pub loss_curve: Vec<f64>,
}

/// Gathers rows of a patch-flat matrix into a batch matrix.
pub(crate) fn gather_rows(flat: &Tensor, indices: &[usize]) -> Tensor {
    let (_, w) = (flat.shape()[0], flat.shape()[1]);
    let mut data = Vec::with_capacity(indices.len() * w);
    for &i in indices {
        data.extend_from_slice(flat.row(i));
    }
    Tensor::new(vec![indices.len(), w], data).expect("gather preserves width")
}

/// Draws the mask for one training batch, cycling through the configured
/// specs. Random specs get a fresh seed from the run generator each time,
/// so every batch sees a new pattern but the run replays under its seed.
pub(crate) fn batch_mask(
    specs: &[MaskSpec],
    batch_index: usize,
    grid: (usize, usize),
    rng: &mut Rng,
) -> Result<PatchMask> {
    let spec = &specs[batch_index % specs.len()];
    let spec = match spec {
        MaskSpec::Random { ratio, per_image, .. } => {
            MaskSpec::Random { ratio: *ratio, seed: rng.next_u64(), per_image: *per_image }
        }
        other => other.clone(),
    };
    make_mask(&spec, grid)
}

pub(crate) fn grad_or_zeros(grads: &Gradients, var: Var, like: &Tensor) -> Tensor {
    grads
        .get(var)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(like.shape().to_vec()))
}

/// Fits the original encoder-decoder by masked reconstruction. The model
/// sees every class in `images` (retain, forget and proxy alike); batches
/// cycle through `mask_specs` so one network serves all evaluation tasks.
pub fn train_original(
    images: &ImageBatch,
    mask_specs: &[MaskSpec],
    patch: usize,
    model_cfg: &ModelConfig,
    train_cfg: &TrainingConfig,
    seed: u64,
) -> Result<TrainResult> {
    if mask_specs.is_empty() {
        return Err(Error::InvalidArgument("train_original: no mask specs".into()));
    }
    let mut rng = Rng::new(seed);
    let mut encoder = EncoderParams::init(model_cfg, &mut rng);
    let mut decoder = DecoderParams::init(model_cfg, &mut rng);

    let flat = images.patch_flatten(patch)?;
    let grid = (images.height() / patch, images.width() / patch);
    let patch_pixels = patch * patch;
    let hyper = train_cfg.hyper();
    let mut state = {
        let params: Vec<&Tensor> = encoder
            .named()
            .into_iter()
            .chain(decoder.named())
            .map(|(_, t)| t)
            .collect();
        AdamState::new(&params)
    };

    let n = images.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_curve = Vec::with_capacity(train_cfg.epochs);
    let mut batch_index = 0usize;
    for _ in 0..train_cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(train_cfg.batch) {
            let target = gather_rows(&flat, chunk);
            let mask = batch_mask(mask_specs, batch_index, grid, &mut rng)?;
            batch_index += 1;
            let masked = apply_mask_rows(&target, &mask, patch_pixels)?;

            let mut tape = Tape::new();
            let x = tape.input(masked);
            let t = tape.input(target);
            let enc_vars = encoder.register(&mut tape);
            let dec_vars = decoder.register(&mut tape);
            let emb = forward_encoder(&mut tape, &enc_vars, x)?;
            let recon = forward_decoder(&mut tape, &dec_vars, emb)?;
            let loss = tape.mse(recon, t)?;
            epoch_loss += tape.value(loss).scalar_value()?;
            batches += 1;

            let grads = tape.backward(loss)?;
            let handles: Vec<Var> = enc_vars
                .handles()
                .into_iter()
                .chain(dec_vars.handles())
                .collect();
            let mut params: Vec<&mut Tensor> = encoder
                .tensors_mut()
                .into_iter()
                .chain(decoder.tensors_mut())
                .collect();
            let grad_tensors: Vec<Tensor> = handles
                .iter()
                .zip(params.iter())
                .map(|(&h, p)| grad_or_zeros(&grads, h, p))
                .collect();
            let grad_refs: Vec<&Tensor> = grad_tensors.iter().collect();
            optimizer_step(OptimizerKind::AdamW, &mut params, &grad_refs, &mut state, &hyper)?;
        }
        loss_curve.push(epoch_loss / batches as f64);
    }
    Ok(TrainResult { encoder, decoder, loss_curve })
}

/// Fits the probe classifier on labeled images (unmasked).
pub fn train_probe(
    images: &ImageBatch,
    patch: usize,
    probe_cfg: &ProbeConfig,
    train_cfg: &TrainingConfig,
    seed: u64,
) -> Result<ProbeTrainResult> {
    if images.labels().iter().any(|&l| l >= probe_cfg.num_classes) {
        return Err(Error::InvalidArgument(
            "train_probe: label outside configured class count".into(),
        ));
    }
    let mut rng = Rng::new(seed);
    let mut probe = ProbeParams::init(probe_cfg, &mut rng);
    let flat = images.patch_flatten(patch)?;
    let labels: Vec<f64> = images.labels().iter().map(|&l| l as f64).collect();

    let hyper = train_cfg.hyper();
    let mut state = {
        let params: Vec<&Tensor> = probe.named().into_iter().map(|(_, t)| t).collect();
        AdamState::new(&params)
    };

    let n = images.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_curve = Vec::with_capacity(train_cfg.epochs);
    for _ in 0..train_cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(train_cfg.batch) {
            let x = gather_rows(&flat, chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
            let mut tape = Tape::new();
            let xv = tape.input(x);
            let yv = tape.input(Tensor::new(vec![chunk.len(), 1], y)?);
            let (vars, logits) = probe.forward_logits_on(&mut tape, xv)?;
            let loss = tape.softmax_xent(logits, yv)?;
            epoch_loss += tape.value(loss).scalar_value()?;
            batches += 1;

            let grads = tape.backward(loss)?;
            let handles = vars.handles();
            let mut params = probe.tensors_mut();
            let grad_tensors: Vec<Tensor> = handles
                .iter()
                .zip(params.iter())
                .map(|(&h, p)| grad_or_zeros(&grads, h, p))
                .collect();
            let grad_refs: Vec<&Tensor> = grad_tensors.iter().collect();
            optimizer_step(OptimizerKind::AdamW, &mut params, &grad_refs, &mut state, &hyper)?;
        }
        loss_curve.push(epoch_loss / batches as f64);
    }
    Ok(ProbeTrainResult { probe, loss_curve })
}

/// Fraction of images whose argmax prediction matches the label.
pub fn probe_accuracy(probe: &ProbeParams, images: &ImageBatch, patch: usize) -> Result<f64> {
    let flat = images.patch_flatten(patch)?;
    let preds = probe.predict(&flat)?;
    let hits = preds
        .iter()
        .zip(images.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / images.len() as f64)
}
