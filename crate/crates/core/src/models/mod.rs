//! Encoder-decoder reconstruction model, the probe classifier used for
//! evaluation, their training loops, and checkpoint persistence.

mod checkpoint;
mod nets;
mod optimizer;
mod train;

pub use checkpoint::{
    decoder_from_checkpoint, decoder_to_checkpoint, encoder_from_checkpoint,
    encoder_to_checkpoint, load_checkpoint, probe_from_checkpoint, probe_to_checkpoint,
    save_checkpoint, Checkpoint, CheckpointMeta,
};
pub use nets::{
    forward_decoder, forward_encoder, DecoderParams, DecoderVars, EncoderParams, EncoderVars,
    ModelConfig, ProbeConfig, ProbeParams, ProbeVars,
};
pub use optimizer::{optimizer_step, AdamState, OptimizerHyper, OptimizerKind};
pub use train::{
    probe_accuracy, train_original, train_probe, ProbeTrainResult, TrainResult, TrainingConfig,
};
pub(crate) use train::{gather_rows, grad_or_zeros};
