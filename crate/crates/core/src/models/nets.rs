//! Network definitions. The encoder maps a patch-flattened masked image to a
//! unit-norm embedding; the decoder mirrors it back to pixel space. The probe
//! is an independent classifier whose penultimate activations double as the
//! feature space for the evaluation metrics.

use crate::numerics::{Rng, Tape, Tensor, Var};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Architecture hyperparameters of the reconstruction model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub embed_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { input_dim: 1024, hidden: 128, embed_dim: 32 }
    }
}

/// Probe architecture; `embed_dim` is the penultimate layer width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub num_classes: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { input_dim: 1024, hidden: 64, embed_dim: 32, num_classes: 24 }
    }
}

fn glorot(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    rng.uniform_tensor(vec![rows, cols], -limit, limit)
}

macro_rules! three_layer_params {
    ($name:ident, $vars:ident) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            pub w1: Tensor,
            pub b1: Tensor,
            pub w2: Tensor,
            pub b2: Tensor,
            pub w3: Tensor,
            pub b3: Tensor,
        }

        pub struct $vars {
            pub w1: Var,
            pub b1: Var,
            pub w2: Var,
            pub b2: Var,
            pub w3: Var,
            pub b3: Var,
        }

        impl $name {
            pub fn named(&self) -> Vec<(&'static str, &Tensor)> {
                vec![
                    ("w1", &self.w1),
                    ("b1", &self.b1),
                    ("w2", &self.w2),
                    ("b2", &self.b2),
                    ("w3", &self.w3),
                    ("b3", &self.b3),
                ]
            }

            pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
                vec![
                    &mut self.w1,
                    &mut self.b1,
                    &mut self.w2,
                    &mut self.b2,
                    &mut self.w3,
                    &mut self.b3,
                ]
            }

            pub fn register(&self, tape: &mut Tape) -> $vars {
                $vars {
                    w1: tape.input(self.w1.clone()),
                    b1: tape.input(self.b1.clone()),
                    w2: tape.input(self.w2.clone()),
                    b2: tape.input(self.b2.clone()),
                    w3: tape.input(self.w3.clone()),
                    b3: tape.input(self.b3.clone()),
                }
            }
        }

        impl $vars {
            pub fn handles(&self) -> [Var; 6] {
                [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]
            }
        }
    };
}

three_layer_params!(EncoderParams, EncoderVars);
three_layer_params!(DecoderParams, DecoderVars);
three_layer_params!(ProbeParams, ProbeVars);

impl EncoderParams {
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Self {
        EncoderParams {
            w1: glorot(rng, config.input_dim, config.hidden),
            b1: Tensor::zeros(vec![1, config.hidden]),
            w2: glorot(rng, config.hidden, config.hidden),
            b2: Tensor::zeros(vec![1, config.hidden]),
            w3: glorot(rng, config.hidden, config.embed_dim),
            b3: Tensor::zeros(vec![1, config.embed_dim]),
        }
    }

    /// Forward pass on an existing tape. Input rows are patch-flattened
    /// masked images; output rows are unit-norm embeddings.
    pub fn forward_on(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let vars = self.register(tape);
        forward_encoder(tape, &vars, x)
    }

    /// Inference convenience: embeddings for a batch, no gradients kept.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let out = self.forward_on(&mut tape, xv)?;
        Ok(tape.value(out).clone())
    }
}

pub fn forward_encoder(tape: &mut Tape, vars: &EncoderVars, x: Var) -> Result<Var> {
    let h = tape.matmul(x, vars.w1)?;
    let h = tape.add(h, vars.b1)?;
    let h = tape.relu(h)?;
    let h = tape.matmul(h, vars.w2)?;
    let h = tape.add(h, vars.b2)?;
    let h = tape.relu(h)?;
    let h = tape.matmul(h, vars.w3)?;
    let h = tape.add(h, vars.b3)?;
    tape.l2_normalize(h)
}

impl DecoderParams {
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Self {
        DecoderParams {
            w1: glorot(rng, config.embed_dim, config.hidden),
            b1: Tensor::zeros(vec![1, config.hidden]),
            w2: glorot(rng, config.hidden, config.hidden),
            b2: Tensor::zeros(vec![1, config.hidden]),
            w3: glorot(rng, config.hidden, config.input_dim),
            b3: Tensor::zeros(vec![1, config.input_dim]),
        }
    }

    pub fn forward_on(&self, tape: &mut Tape, emb: Var) -> Result<Var> {
        let vars = self.register(tape);
        forward_decoder(tape, &vars, emb)
    }

    /// Raw reconstruction (no clamping; training needs clean gradients).
    pub fn decode(&self, emb: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let ev = tape.input(emb.clone());
        let out = self.forward_on(&mut tape, ev)?;
        Ok(tape.value(out).clone())
    }

    /// Reconstruction clamped to [0,1], the evaluation-time convention.
    pub fn decode_clamped(&self, emb: &Tensor) -> Result<Tensor> {
        Ok(self.decode(emb)?.map(|v| v.clamp(0.0, 1.0)))
    }
}

pub fn forward_decoder(tape: &mut Tape, vars: &DecoderVars, emb: Var) -> Result<Var> {
    let h = tape.matmul(emb, vars.w1)?;
    let h = tape.add(h, vars.b1)?;
    let h = tape.relu(h)?;
    let h = tape.matmul(h, vars.w2)?;
    let h = tape.add(h, vars.b2)?;
    let h = tape.relu(h)?;
    let h = tape.matmul(h, vars.w3)?;
    tape.add(h, vars.b3)
}

impl ProbeParams {
    pub fn init(config: &ProbeConfig, rng: &mut Rng) -> Self {
        ProbeParams {
            w1: glorot(rng, config.input_dim, config.hidden),
            b1: Tensor::zeros(vec![1, config.hidden]),
            w2: glorot(rng, config.hidden, config.embed_dim),
            b2: Tensor::zeros(vec![1, config.embed_dim]),
            w3: glorot(rng, config.embed_dim, config.num_classes),
            b3: Tensor::zeros(vec![1, config.num_classes]),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.w3.shape()[1]
    }

    pub fn embed_dim(&self) -> usize {
        self.w2.shape()[1]
    }

    fn forward_embed_on(&self, tape: &mut Tape, x: Var) -> Result<(ProbeVars, Var)> {
        let vars = self.register(tape);
        let h = tape.matmul(x, vars.w1)?;
        let h = tape.add(h, vars.b1)?;
        let h = tape.relu(h)?;
        let h = tape.matmul(h, vars.w2)?;
        let h = tape.add(h, vars.b2)?;
        let emb = tape.relu(h)?;
        Ok((vars, emb))
    }

    pub fn forward_logits_on(&self, tape: &mut Tape, x: Var) -> Result<(ProbeVars, Var)> {
        let (vars, emb) = self.forward_embed_on(tape, x)?;
        let h = tape.matmul(emb, vars.w3)?;
        let logits = tape.add(h, vars.b3)?;
        Ok((vars, logits))
    }

    /// Penultimate activations, the shared feature space of the metrics.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let (_, emb) = self.forward_embed_on(&mut tape, xv)?;
        Ok(tape.value(emb).clone())
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let (_, logits) = self.forward_logits_on(&mut tape, xv)?;
        Ok(tape.value(logits).clone())
    }

    /// Class posteriors; each row sums to 1.
    pub fn posteriors(&self, x: &Tensor) -> Result<Tensor> {
        let logits = self.logits(x)?;
        let (n, c) = logits.dims2()?;
        let mut out = Tensor::zeros(vec![n, c]);
        for i in 0..n {
            let row = logits.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for j in 0..c {
                out.set2(i, j, exps[j] / z);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        let (n, c) = logits.dims2()?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let row = logits.row(i);
            let mut best = 0;
            for j in 1..c {
                if row[j] > row[best] {
                    best = j;
                }
            }
            out.push(best);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_rows_are_unit_norm() {
        let cfg = ModelConfig { input_dim: 16, hidden: 8, embed_dim: 4 };
        let mut rng = Rng::new(1);
        let enc = EncoderParams::init(&cfg, &mut rng);
        let x = rng.uniform_tensor(vec![5, 16], 0.0, 1.0);
        let e = enc.encode(&x).unwrap();
        for i in 0..5 {
            let norm: f64 = e.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        // deterministic
        assert_eq!(e, enc.encode(&x).unwrap());
    }

    #[test]
    fn decoder_shape_and_zero_embedding() {
        let cfg = ModelConfig { input_dim: 16, hidden: 8, embed_dim: 4 };
        let mut rng = Rng::new(2);
        let dec = DecoderParams::init(&cfg, &mut rng);
        let z = Tensor::zeros(vec![3, 4]);
        let y = dec.decode(&z).unwrap();
        assert_eq!(y.shape(), &[3, 16]);
        // zero embedding: all rows equal the bias image
        assert_eq!(y.row(0), y.row(1));
        assert_eq!(y.row(0), y.row(2));
    }

    #[test]
    fn probe_posteriors_sum_to_one() {
        let cfg = ProbeConfig { input_dim: 16, hidden: 8, embed_dim: 4, num_classes: 5 };
        let mut rng = Rng::new(3);
        let probe = ProbeParams::init(&cfg, &mut rng);
        let x = rng.uniform_tensor(vec![7, 16], 0.0, 1.0);
        let p = probe.posteriors(&x).unwrap();
        for i in 0..7 {
            let s: f64 = p.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
