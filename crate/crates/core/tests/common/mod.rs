//! Shared finite-difference machinery for the gradient oracles.

use i2iu::models::EncoderParams;
use i2iu::numerics::{Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

/// Analytic gradients vs central differences for a scalar-valued graph.
/// `build` must be a pure function of the tape inputs.
pub fn check_gradients(
    inputs: &[Tensor],
    diff_indices: &[usize],
    build: impl Fn(&mut Tape, &[Var]) -> Var,
) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).expect("backward");

    let eval = |perturbed: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.input(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.value(loss).scalar_value().expect("scalar loss")
    };

    for &idx in diff_indices {
        let analytic = grads
            .get(vars[idx])
            .unwrap_or_else(|| panic!("no gradient for input {}", idx))
            .clone();
        let mut numeric = vec![0.0; inputs[idx].len()];
        for k in 0..inputs[idx].len() {
            let mut plus = inputs.to_vec();
            plus[idx].data_mut()[k] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[idx].data_mut()[k] -= FD_STEP;
            numeric[k] = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        }
        let diff: f64 = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        let analytic_scale = analytic.frobenius_norm();
        let numeric_scale: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        if analytic_scale < 1e-9 && numeric_scale < 1e-8 {
            // identically zero gradient (dead branch): central differences
            // only produce their f64 noise floor here
            continue;
        }
        let rel = diff / numeric_scale.max(1e-8);
        assert!(
            rel < REL_TOL,
            "input {}: relative gradient error {} (analytic vs FD)",
            idx,
            rel
        );
    }
}

#[allow(dead_code)] // used by the gradcheck target only
/// Finite differences are only trustworthy when no relu unit sits within
/// the FD step of its kink and the pre-normalize rows are not tiny (the
/// normalize curvature grows as 1/norm³). Returns the binding margin.
pub fn fd_margin(enc: &EncoderParams, x: &Tensor) -> f64 {
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let w1 = tape.input(enc.w1.clone());
    let b1 = tape.input(enc.b1.clone());
    let w2 = tape.input(enc.w2.clone());
    let b2 = tape.input(enc.b2.clone());
    let w3 = tape.input(enc.w3.clone());
    let b3 = tape.input(enc.b3.clone());
    let h1 = tape.matmul(xv, w1).unwrap();
    let h1 = tape.add(h1, b1).unwrap();
    let m1 = tape.value(h1).data().iter().fold(f64::MAX, |m, v| m.min(v.abs()));
    let r1 = tape.relu(h1).unwrap();
    let h2 = tape.matmul(r1, w2).unwrap();
    let h2 = tape.add(h2, b2).unwrap();
    let m2 = tape.value(h2).data().iter().fold(f64::MAX, |m, v| m.min(v.abs()));
    let r2 = tape.relu(h2).unwrap();
    let h3 = tape.matmul(r2, w3).unwrap();
    let h3 = tape.add(h3, b3).unwrap();
    let pre_norm = tape.value(h3);
    let (rows, _) = pre_norm.dims2().unwrap();
    let mut m3 = f64::MAX;
    for i in 0..rows {
        let n: f64 = pre_norm.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        m3 = m3.min(n / 0.3); // rescale so one threshold covers both hazards
    }
    m1.min(m2).min(m3 * 1e-3)
}
