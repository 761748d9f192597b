use super::tensor::{matmul_raw, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Operator set of the differentiation engine.
///
/// `l2_normalize` works per row and rejects (near-)zero rows: a zero
/// embedding upstream is a bug, not something to patch with an epsilon.
/// `l2_distance` is the mean of row-wise Euclidean distances; its gradient
/// at coincident rows is taken as 0 (a valid subgradient of the norm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    Matmul,
    Add,
    Relu,
    L2Normalize,
    Mse,
    L2Distance,
    SoftmaxXent,
    Mean,
    Scale(f64),
}

struct Node {
    op: OpKind,
    inputs: Vec<Var>,
    out: Var,
    /// Per-op cached forward quantities needed by the backward pass.
    cache: Vec<f64>,
}

/// Wengert list: records forward operations, then walks them once in
/// reverse to accumulate gradients. Single-threaded by construction.
#[derive(Default)]
pub struct Tape {
    values: Vec<Tensor>,
    nodes: Vec<Node>,
}

/// Gradient per tape variable, indexed by the `Var` handles of the forward
/// pass. Variables the loss does not depend on have no entry.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Registers a leaf value (input or parameter) and returns its handle.
    pub fn input(&mut self, t: Tensor) -> Var {
        let v = Var(self.values.len());
        self.values.push(t);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Matmul, &[a, b])
    }

    /// Element-wise sum; also accepts a `[1, n]` bias row against `[m, n]`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Relu, &[x])
    }

    pub fn l2_normalize(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::L2Normalize, &[x])
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mse, &[a, b])
    }

    pub fn l2_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::L2Distance, &[a, b])
    }

    pub fn softmax_xent(&mut self, logits: Var, labels: Var) -> Result<Var> {
        self.apply(OpKind::SoftmaxXent, &[logits, labels])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.apply(OpKind::Mean, &[x])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.apply(OpKind::Scale(c), &[x])
    }

    /// Runs one forward operator, records it, and validates the result.
    pub fn apply(&mut self, op: OpKind, inputs: &[Var]) -> Result<Var> {
        let (out, cache) = self.forward(op, inputs)?;
        if !out.all_finite() {
            return Err(Error::NonFinite { op: op_name(op) });
        }
        let v = Var(self.values.len());
        self.values.push(out);
        self.nodes.push(Node { op, inputs: inputs.to_vec(), out: v, cache });
        Ok(v)
    }

    fn forward(&self, op: OpKind, inputs: &[Var]) -> Result<(Tensor, Vec<f64>)> {
        let arity = match op {
            OpKind::Relu | OpKind::L2Normalize | OpKind::Mean | OpKind::Scale(_) => 1,
            _ => 2,
        };
        if inputs.len() != arity {
            return Err(Error::ShapeMismatch {
                op: op_name(op),
                detail: format!("expected {} inputs, got {}", arity, inputs.len()),
            });
        }
        let x = self.value(inputs[0]);
        match op {
            OpKind::Matmul => {
                let y = self.value(inputs[1]);
                Ok((x.matmul2(y)?, vec![]))
            }
            OpKind::Add => {
                let y = self.value(inputs[1]);
                if x.shape() == y.shape() {
                    let data = x.data().iter().zip(y.data()).map(|(a, b)| a + b).collect();
                    Ok((Tensor::new(x.shape().to_vec(), data)?, vec![]))
                } else {
                    let (m, n) = x.dims2()?;
                    let (br, bc) = y.dims2()?;
                    if br != 1 || bc != n {
                        return Err(Error::ShapeMismatch {
                            op: "add",
                            detail: format!("{:?} + {:?}", x.shape(), y.shape()),
                        });
                    }
                    let mut data = x.data().to_vec();
                    for i in 0..m {
                        for j in 0..n {
                            data[i * n + j] += y.data()[j];
                        }
                    }
                    Ok((Tensor::new(vec![m, n], data)?, vec![]))
                }
            }
            OpKind::Relu => Ok((x.map(|v| v.max(0.0)), vec![])),
            OpKind::L2Normalize => {
                let (m, n) = x.dims2()?;
                let mut data = vec![0.0; m * n];
                let mut norms = Vec::with_capacity(m);
                for i in 0..m {
                    let row = x.row(i);
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm < 1e-12 {
                        return Err(Error::InvalidArgument(format!(
                            "l2_normalize: row {} has norm {:e}",
                            i, norm
                        )));
                    }
                    for j in 0..n {
                        data[i * n + j] = row[j] / norm;
                    }
                    norms.push(norm);
                }
                Ok((Tensor::new(vec![m, n], data)?, norms))
            }
            OpKind::Mse => {
                let y = self.value(inputs[1]);
                same_shape("mse", x, y)?;
                let n = x.len() as f64;
                let s: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok((Tensor::scalar(s / n), vec![]))
            }
            OpKind::L2Distance => {
                let y = self.value(inputs[1]);
                same_shape("l2_distance", x, y)?;
                let (m, _) = x.dims2()?;
                let mut norms = Vec::with_capacity(m);
                let mut total = 0.0;
                for i in 0..m {
                    let d: f64 = x
                        .row(i)
                        .iter()
                        .zip(y.row(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    norms.push(d);
                    total += d;
                }
                Ok((Tensor::scalar(total / m as f64), norms))
            }
            OpKind::SoftmaxXent => {
                let labels = self.value(inputs[1]);
                let (m, c) = x.dims2()?;
                if labels.len() != m {
                    return Err(Error::ShapeMismatch {
                        op: "softmax_xent",
                        detail: format!("{} logit rows vs {} labels", m, labels.len()),
                    });
                }
                let mut probs = vec![0.0; m * c];
                let mut loss = 0.0;
                for i in 0..m {
                    let row = x.row(i);
                    let y = labels.data()[i];
                    if y < 0.0 || y.fract() != 0.0 || y as usize >= c {
                        return Err(Error::InvalidArgument(format!(
                            "softmax_xent: label {} out of range for {} classes",
                            y, c
                        )));
                    }
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for j in 0..c {
                        let e = (row[j] - max).exp();
                        probs[i * c + j] = e;
                        z += e;
                    }
                    for j in 0..c {
                        probs[i * c + j] /= z;
                    }
                    loss += z.ln() + max - row[y as usize];
                }
                // cache: softmax table, consumed by backward
                Ok((Tensor::scalar(loss / m as f64), probs))
            }
            OpKind::Mean => {
                let n = x.len() as f64;
                Ok((Tensor::scalar(x.data().iter().sum::<f64>() / n), vec![]))
            }
            OpKind::Scale(c) => Ok((x.map(|v| c * v), vec![])),
        }
    }

    /// Reverse pass from a scalar loss. Each node is visited exactly once,
    /// in reverse recording order.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.values.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for node in self.nodes.iter().rev() {
            let Some(g_out) = grads[node.out.0].take() else {
                // node does not influence the loss
                continue;
            };
            let contrib = self.backward_node(node, &g_out)?;
            for (var, g) in node.inputs.iter().zip(contrib) {
                let Some(g) = g else { continue };
                match &mut grads[var.0] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                    slot => *slot = Some(g),
                }
            }
            grads[node.out.0] = Some(g_out);
        }
        Ok(Gradients { grads })
    }

    fn backward_node(&self, node: &Node, g_out: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let x = self.value(node.inputs[0]);
        match node.op {
            OpKind::Matmul => {
                let y = self.value(node.inputs[1]);
                let (m, k) = x.dims2()?;
                let (_, n) = y.dims2()?;
                // dA = G Bᵀ, dB = Aᵀ G
                let bt = y.transpose2()?;
                let da = matmul_raw(g_out.data(), bt.data(), m, n, k);
                let at = x.transpose2()?;
                let db = matmul_raw(at.data(), g_out.data(), k, m, n);
                Ok(vec![
                    Some(Tensor::new(vec![m, k], da)?),
                    Some(Tensor::new(vec![k, n], db)?),
                ])
            }
            OpKind::Add => {
                let y = self.value(node.inputs[1]);
                if x.shape() == y.shape() {
                    Ok(vec![Some(g_out.clone()), Some(g_out.clone())])
                } else {
                    let (m, n) = x.dims2()?;
                    let mut db = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            db[j] += g_out.data()[i * n + j];
                        }
                    }
                    Ok(vec![Some(g_out.clone()), Some(Tensor::new(vec![1, n], db)?)])
                }
            }
            OpKind::Relu => {
                let data = x
                    .data()
                    .iter()
                    .zip(g_out.data())
                    .map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 })
                    .collect();
                Ok(vec![Some(Tensor::new(x.shape().to_vec(), data)?)])
            }
            OpKind::L2Normalize => {
                let out = self.value(node.out);
                let (m, n) = x.dims2()?;
                let mut dx = vec![0.0; m * n];
                for i in 0..m {
                    let norm = node.cache[i];
                    let yrow = out.row(i);
                    let grow = &g_out.data()[i * n..(i + 1) * n];
                    let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        dx[i * n + j] = (grow[j] - yrow[j] * dot) / norm;
                    }
                }
                Ok(vec![Some(Tensor::new(vec![m, n], dx)?)])
            }
            OpKind::Mse => {
                let y = self.value(node.inputs[1]);
                let g = g_out.data()[0];
                let n = x.len() as f64;
                let da: Vec<f64> = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(a, b)| g * 2.0 * (a - b) / n)
                    .collect();
                let db: Vec<f64> = da.iter().map(|v| -v).collect();
                Ok(vec![
                    Some(Tensor::new(x.shape().to_vec(), da)?),
                    Some(Tensor::new(y.shape().to_vec(), db)?),
                ])
            }
            OpKind::L2Distance => {
                let y = self.value(node.inputs[1]);
                let g = g_out.data()[0];
                let (m, n) = x.dims2()?;
                let mut da = vec![0.0; m * n];
                for i in 0..m {
                    let norm = node.cache[i];
                    if norm <= 1e-150 {
                        continue; // subgradient 0 at the kink
                    }
                    let scale = g / (m as f64 * norm);
                    for j in 0..n {
                        da[i * n + j] = scale * (x.get2(i, j) - y.get2(i, j));
                    }
                }
                let db: Vec<f64> = da.iter().map(|v| -v).collect();
                Ok(vec![
                    Some(Tensor::new(vec![m, n], da)?),
                    Some(Tensor::new(vec![m, n], db)?),
                ])
            }
            OpKind::SoftmaxXent => {
                let labels = self.value(node.inputs[1]);
                let g = g_out.data()[0];
                let (m, c) = x.dims2()?;
                let mut dl = node.cache.clone();
                for i in 0..m {
                    dl[i * c + labels.data()[i] as usize] -= 1.0;
                }
                for v in dl.iter_mut() {
                    *v *= g / m as f64;
                }
                // labels take no gradient
                Ok(vec![Some(Tensor::new(vec![m, c], dl)?), None])
            }
            OpKind::Mean => {
                let g = g_out.data()[0] / x.len() as f64;
                Ok(vec![Some(Tensor::new(
                    x.shape().to_vec(),
                    vec![g; x.len()],
                )?)])
            }
            OpKind::Scale(c) => {
                let data = g_out.data().iter().map(|v| c * v).collect();
                Ok(vec![Some(Tensor::new(x.shape().to_vec(), data)?)])
            }
        }
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    Ok(())
}

fn op_name(op: OpKind) -> &'static str {
    match op {
        OpKind::Matmul => "matmul",
        OpKind::Add => "add",
        OpKind::Relu => "relu",
        OpKind::L2Normalize => "l2_normalize",
        OpKind::Mse => "mse",
        OpKind::L2Distance => "l2_distance",
        OpKind::SoftmaxXent => "softmax_xent",
        OpKind::Mean => "mean",
        OpKind::Scale(_) => "scale",
    }
}
