//! Central finite differences as the independent oracle for every
//! differentiable operator, and for the encoder/decoder compositions
//! built from them.

use i2iu::models::{DecoderParams, EncoderParams, ModelConfig};
use i2iu::numerics::{Rng, Tape, Tensor};

mod common;
use common::{check_gradients, fd_margin};

/// Random tensor with entries kept away from relu/norm kinks.
fn smooth_random(rng: &mut Rng, shape: Vec<usize>) -> Tensor {
    let t = rng.standard_normal(shape);
    t.map(|v| if v.abs() < 0.2 { v + 0.3 * v.signum() + 0.1 } else { v })
}

#[test]
fn matmul_gradients() {
    for seed in 0..20 {
        let mut rng = Rng::new(seed);
        let (m, k, n) = (
            2 + (rng.next_u64() % 4) as usize,
            2 + (rng.next_u64() % 4) as usize,
            2 + (rng.next_u64() % 4) as usize,
        );
        let a = rng.standard_normal(vec![m, k]);
        let b = rng.standard_normal(vec![k, n]);
        check_gradients(&[a, b], &[0, 1], |tape, v| {
            let y = tape.matmul(v[0], v[1]).unwrap();
            tape.mean(y).unwrap()
        });
    }
}

#[test]
fn add_gradients_including_bias_broadcast() {
    for seed in 0..20 {
        let mut rng = Rng::new(100 + seed);
        let (m, n) = (2 + (rng.next_u64() % 3) as usize, 2 + (rng.next_u64() % 5) as usize);
        let x = rng.standard_normal(vec![m, n]);
        let y = rng.standard_normal(vec![m, n]);
        check_gradients(&[x.clone(), y], &[0, 1], |tape, v| {
            let s = tape.add(v[0], v[1]).unwrap();
            tape.mean(s).unwrap()
        });
        let bias = rng.standard_normal(vec![1, n]);
        check_gradients(&[x, bias], &[0, 1], |tape, v| {
            let s = tape.add(v[0], v[1]).unwrap();
            tape.mean(s).unwrap()
        });
    }
}

#[test]
fn relu_gradients() {
    for seed in 0..20 {
        let mut rng = Rng::new(200 + seed);
        let x = smooth_random(&mut rng, vec![3, 5]);
        check_gradients(&[x], &[0], |tape, v| {
            let y = tape.relu(v[0]).unwrap();
            tape.mean(y).unwrap()
        });
    }
}

#[test]
fn l2_normalize_gradients() {
    for seed in 0..20 {
        let mut rng = Rng::new(300 + seed);
        let x = smooth_random(&mut rng, vec![4, 6]);
        let target = rng.standard_normal(vec![4, 6]);
        check_gradients(&[x, target], &[0], |tape, v| {
            let y = tape.l2_normalize(v[0]).unwrap();
            tape.mse(y, v[1]).unwrap()
        });
    }
}

#[test]
fn l2_normalize_gradient_is_tangent() {
    // rows of unit norm: the pullback through x/|x| annihilates the radial
    // direction, so v · dL/dv vanishes identically
    for seed in 0..20 {
        let mut rng = Rng::new(400 + seed);
        let raw = rng.standard_normal(vec![1, 8]);
        let norm: f64 = raw.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit = raw.map(|v| v / norm);
        let target = rng.standard_normal(vec![1, 8]);

        let mut tape = Tape::new();
        let x = tape.input(unit.clone());
        let t = tape.input(target);
        let y = tape.l2_normalize(x).unwrap();
        let loss = tape.mse(y, t).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(x).unwrap();
        let dot: f64 = unit.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-8, "radial component {}", dot);
    }
}

#[test]
fn mse_gradients() {
    for seed in 0..20 {
        let mut rng = Rng::new(500 + seed);
        let a = rng.standard_normal(vec![3, 4]);
        let b = rng.standard_normal(vec![3, 4]);
        check_gradients(&[a, b], &[0, 1], |tape, v| tape.mse(v[0], v[1]).unwrap());
    }
}

#[test]
fn l2_distance_gradients() {
    for seed in 0..20 {
        let mut rng = Rng::new(600 + seed);
        let a = rng.standard_normal(vec![4, 5]);
        // keep rows well separated from a so the norm kink stays far away
        let b = a.map(|v| v + 1.5);
        check_gradients(&[a, b], &[0, 1], |tape, v| tape.l2_distance(v[0], v[1]).unwrap());
    }
}

#[test]
fn softmax_xent_gradients() {
    for seed in 0..20 {
        let mut rng = Rng::new(700 + seed);
        let logits = rng.standard_normal(vec![5, 4]);
        let labels = Tensor::new(
            vec![5, 1],
            (0..5).map(|_| (rng.next_u64() % 4) as f64).collect(),
        )
        .unwrap();
        check_gradients(&[logits, labels], &[0], |tape, v| {
            tape.softmax_xent(v[0], v[1]).unwrap()
        });
    }
}

#[test]
fn mean_and_scale_gradients() {
    for seed in 0..20 {
        let mut rng = Rng::new(800 + seed);
        let x = rng.standard_normal(vec![3, 7]);
        check_gradients(&[x.clone()], &[0], |tape, v| tape.mean(v[0]).unwrap());
        check_gradients(&[x], &[0], |tape, v| {
            let y = tape.scale(v[0], -2.5).unwrap();
            tape.mean(y).unwrap()
        });
    }
}

#[test]
fn encoder_composition_gradients() {
    // random small linear-relu-normalize stack against finite differences,
    // at points where every relu unit is safely away from its kink
    let cfg = ModelConfig { input_dim: 12, hidden: 6, embed_dim: 4 };
    let mut checked = 0;
    let mut seed = 0;
    while checked < 5 {
        let mut rng = Rng::new(900 + seed);
        seed += 1;
        let enc = EncoderParams::init(&cfg, &mut rng);
        let x = rng.uniform_tensor(vec![3, 12], 0.1, 1.0);
        if fd_margin(&enc, &x) < 1e-3 {
            continue;
        }
        checked += 1;
        let target = rng.standard_normal(vec![3, 4]);
        let inputs = vec![
            x,
            target,
            enc.w1.clone(),
            enc.b1.clone(),
            enc.w2.clone(),
            enc.b2.clone(),
            enc.w3.clone(),
            enc.b3.clone(),
        ];
        check_gradients(&inputs, &[2, 4, 6], |tape, v| {
            let h = tape.matmul(v[0], v[2]).unwrap();
            let h = tape.add(h, v[3]).unwrap();
            let h = tape.relu(h).unwrap();
            let h = tape.matmul(h, v[4]).unwrap();
            let h = tape.add(h, v[5]).unwrap();
            let h = tape.relu(h).unwrap();
            let h = tape.matmul(h, v[6]).unwrap();
            let h = tape.add(h, v[7]).unwrap();
            let y = tape.l2_normalize(h).unwrap();
            tape.mse(y, v[1]).unwrap()
        });
    }
}

#[test]
fn decoder_composition_gradients() {
    let cfg = ModelConfig { input_dim: 10, hidden: 5, embed_dim: 3 };
    for seed in 0..5 {
        let mut rng = Rng::new(950 + seed);
        let dec = DecoderParams::init(&cfg, &mut rng);
        let emb = rng.standard_normal(vec![4, 3]);
        let target = rng.uniform_tensor(vec![4, 10], 0.0, 1.0);
        let inputs = vec![
            emb,
            target,
            dec.w1.clone(),
            dec.b1.clone(),
            dec.w2.clone(),
            dec.b2.clone(),
            dec.w3.clone(),
            dec.b3.clone(),
        ];
        check_gradients(&inputs, &[0, 2, 6], |tape, v| {
            let h = tape.matmul(v[0], v[2]).unwrap();
            let h = tape.add(h, v[3]).unwrap();
            let h = tape.relu(h).unwrap();
            let h = tape.matmul(h, v[4]).unwrap();
            let h = tape.add(h, v[5]).unwrap();
            let h = tape.relu(h).unwrap();
            let h = tape.matmul(h, v[6]).unwrap();
            let y = tape.add(h, v[7]).unwrap();
            tape.mse(y, v[1]).unwrap()
        });
    }
}
