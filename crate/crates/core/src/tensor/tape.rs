//! Recording tape and reverse-mode backward pass.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

/// Index of a node on a [`Tape`].
pub type NodeId = usize;

/// Primitive ops the tape can record. Parameters that are not tensors
/// (constants, indices, target shapes) ride along in the variant.
#[derive(Debug, Clone)]
pub enum OpKind<S> {
    Leaf,
    Matmul,
    MatVec,
    Add,
    Sub,
    Mul,
    Tanh,
    Exp,
    Ln,
    Square,
    Scale(S),
    AddConst(S),
    Sum,
    LogSumExp,
    Softmax,
    Clamp(S, S),
    Gather(Vec<usize>),
    Reshape(Vec<usize>),
}

struct Node<S> {
    op: OpKind<S>,
    inputs: Vec<NodeId>,
    value: Tensor<S>,
}

/// Ordered record of primitive ops; recording order is topological order.
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record an input tensor (parameter or constant).
    pub fn leaf(&mut self, value: Tensor<S>) -> NodeId {
        self.nodes.push(Node { op: OpKind::Leaf, inputs: vec![], value });
        self.nodes.len() - 1
    }

    /// Value computed at `id`.
    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id].value
    }

    fn push(&mut self, op: OpKind<S>, inputs: Vec<NodeId>, value: Tensor<S>) -> NodeId {
        self.nodes.push(Node { op, inputs, value });
        self.nodes.len() - 1
    }

    /// Uniform forward entry: evaluate `op` on `inputs`, record, return the
    /// output node. Shape mismatches and non-finite outputs are rejected.
    pub fn apply(&mut self, op: OpKind<S>, inputs: &[NodeId]) -> Result<NodeId> {
        let arity_err = |want: usize| Error::InvalidArgument {
            arg: "inputs",
            detail: format!("op expects {} inputs, got {}", want, inputs.len()),
        };
        let unary = |ins: &[NodeId]| -> Result<NodeId> {
            if ins.len() != 1 {
                Err(arity_err(1))
            } else {
                Ok(ins[0])
            }
        };
        let binary = |ins: &[NodeId]| -> Result<(NodeId, NodeId)> {
            if ins.len() != 2 {
                Err(arity_err(2))
            } else {
                Ok((ins[0], ins[1]))
            }
        };
        let value = match &op {
            OpKind::Leaf => {
                return Err(Error::InvalidArgument {
                    arg: "op",
                    detail: "leaves are recorded via Tape::leaf".into(),
                })
            }
            OpKind::Matmul => {
                let (a, b) = binary(inputs)?;
                self.nodes[a].value.matmul(&self.nodes[b].value)?
            }
            OpKind::MatVec => {
                let (a, b) = binary(inputs)?;
                self.nodes[a].value.matvec(&self.nodes[b].value)?
            }
            OpKind::Add => {
                let (a, b) = binary(inputs)?;
                self.nodes[a].value.add(&self.nodes[b].value)?
            }
            OpKind::Sub => {
                let (a, b) = binary(inputs)?;
                self.nodes[a].value.sub(&self.nodes[b].value)?
            }
            OpKind::Mul => {
                let (a, b) = binary(inputs)?;
                self.nodes[a].value.mul(&self.nodes[b].value)?
            }
            OpKind::Tanh => self.nodes[unary(inputs)?].value.tanh()?,
            OpKind::Exp => self.nodes[unary(inputs)?].value.exp()?,
            OpKind::Ln => self.nodes[unary(inputs)?].value.ln()?,
            OpKind::Square => self.nodes[unary(inputs)?].value.square()?,
            OpKind::Scale(c) => self.nodes[unary(inputs)?].value.scale(*c)?,
            OpKind::AddConst(c) => self.nodes[unary(inputs)?].value.add_const(*c)?,
            OpKind::Sum => self.nodes[unary(inputs)?].value.reduce_sum()?,
            OpKind::LogSumExp => self.nodes[unary(inputs)?].value.logsumexp()?,
            OpKind::Softmax => self.nodes[unary(inputs)?].value.softmax()?,
            OpKind::Clamp(lo, hi) => self.nodes[unary(inputs)?].value.clamp(*lo, *hi)?,
            OpKind::Gather(idx) => self.nodes[unary(inputs)?].value.gather(idx)?,
            OpKind::Reshape(shape) => self.nodes[unary(inputs)?].value.reshape(shape.clone())?,
        };
        Ok(self.push(op, inputs.to_vec(), value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Matmul, &[a, b])
    }

    pub fn matvec(&mut self, a: NodeId, v: NodeId) -> Result<NodeId> {
        self.apply(OpKind::MatVec, &[a, v])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Mul, &[a, b])
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Tanh, &[a])
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Exp, &[a])
    }

    pub fn ln(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Ln, &[a])
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Square, &[a])
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> Result<NodeId> {
        self.apply(OpKind::Scale(c), &[a])
    }

    pub fn add_const(&mut self, a: NodeId, c: S) -> Result<NodeId> {
        self.apply(OpKind::AddConst(c), &[a])
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Sum, &[a])
    }

    pub fn logsumexp(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::LogSumExp, &[a])
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.apply(OpKind::Softmax, &[a])
    }

    pub fn clamp(&mut self, a: NodeId, lo: S, hi: S) -> Result<NodeId> {
        self.apply(OpKind::Clamp(lo, hi), &[a])
    }

    pub fn gather(&mut self, a: NodeId, indices: Vec<usize>) -> Result<NodeId> {
        self.apply(OpKind::Gather(indices), &[a])
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        self.apply(OpKind::Reshape(shape), &[a])
    }

    /// Reverse-mode pass from a scalar output. Visits nodes exactly once in
    /// reverse recording order; unused leaves get zero gradients.
    pub fn backward(&self, output: NodeId) -> Result<Gradients<S>> {
        if output >= self.nodes.len() {
            return Err(Error::InvalidArgument {
                arg: "output",
                detail: format!("node {} not on tape of length {}", output, self.nodes.len()),
            });
        }
        if self.nodes[output].value.len() != 1 {
            return Err(Error::InvalidArgument {
                arg: "output",
                detail: format!(
                    "backward requires a scalar output, shape is {:?}",
                    self.nodes[output].value.shape()
                ),
            });
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        grads[output] = Some(Tensor::scalar(S::one()));

        for id in (0..=output).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, id: NodeId, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) -> Result<()> {
        let node = &self.nodes[id];
        let input = |k: usize| &self.nodes[node.inputs[k]].value;
        match &node.op {
            OpKind::Leaf => {}
            OpKind::Matmul => {
                let (a, b) = (input(0), input(1));
                accumulate(grads, node.inputs[0], g.matmul(&b.transpose()?)?)?;
                accumulate(grads, node.inputs[1], a.transpose()?.matmul(g)?)?;
            }
            OpKind::MatVec => {
                let (a, v) = (input(0), input(1));
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let mut da = vec![S::zero(); m * k];
                for i in 0..m {
                    let gi = g.data()[i];
                    for j in 0..k {
                        da[i * k + j] = gi * v.data()[j];
                    }
                }
                accumulate(grads, node.inputs[0], Tensor::from_vec(vec![m, k], da)?)?;
                let mut dv = vec![S::zero(); k];
                for i in 0..m {
                    let gi = g.data()[i];
                    for j in 0..k {
                        dv[j] = dv[j] + gi * a.data()[i * k + j];
                    }
                }
                accumulate(grads, node.inputs[1], Tensor::from_vec(vec![k], dv)?)?;
            }
            OpKind::Add => {
                let (a, b) = (input(0), input(1));
                accumulate(grads, node.inputs[0], g.clone())?;
                if a.shape() != b.shape() {
                    // row-broadcast case: db is the column sum of g
                    let (m, n) = (a.shape()[0], a.shape()[1]);
                    let mut db = vec![S::zero(); n];
                    for i in 0..m {
                        for j in 0..n {
                            db[j] = db[j] + g.data()[i * n + j];
                        }
                    }
                    accumulate(grads, node.inputs[1], Tensor::from_vec(vec![n], db)?)?;
                } else {
                    accumulate(grads, node.inputs[1], g.clone())?;
                }
            }
            OpKind::Sub => {
                accumulate(grads, node.inputs[0], g.clone())?;
                accumulate(grads, node.inputs[1], g.scale(-S::one())?)?;
            }
            OpKind::Mul => {
                accumulate(grads, node.inputs[0], g.mul(input(1))?)?;
                accumulate(grads, node.inputs[1], g.mul(input(0))?)?;
            }
            OpKind::Tanh => {
                let y = &node.value;
                let one_minus = y.square()?.scale(-S::one())?.add_const(S::one())?;
                accumulate(grads, node.inputs[0], g.mul(&one_minus)?)?;
            }
            OpKind::Exp => {
                accumulate(grads, node.inputs[0], g.mul(&node.value)?)?;
            }
            OpKind::Ln => {
                let x = input(0);
                let inv: Vec<S> = x.data().iter().map(|&v| S::one() / v).collect();
                let inv = Tensor::from_vec(x.shape().to_vec(), inv)?;
                accumulate(grads, node.inputs[0], g.mul(&inv)?)?;
            }
            OpKind::Square => {
                let dx = g.mul(input(0))?.scale(S::c(2.0))?;
                accumulate(grads, node.inputs[0], dx)?;
            }
            OpKind::Scale(c) => {
                accumulate(grads, node.inputs[0], g.scale(*c)?)?;
            }
            OpKind::AddConst(_) => {
                accumulate(grads, node.inputs[0], g.clone())?;
            }
            OpKind::Sum => {
                let x = input(0);
                let gs = g.item()?;
                let dx = Tensor::from_vec(x.shape().to_vec(), vec![gs; x.len()])?;
                accumulate(grads, node.inputs[0], dx)?;
            }
            OpKind::LogSumExp => {
                let dx = input(0).softmax()?.scale(g.item()?)?;
                accumulate(grads, node.inputs[0], dx)?;
            }
            OpKind::Softmax => {
                let y = &node.value;
                let mut dot = S::zero();
                for (&gi, &yi) in g.data().iter().zip(y.data()) {
                    dot = dot + gi * yi;
                }
                let dx: Vec<S> = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gi, &yi)| yi * (gi - dot))
                    .collect();
                accumulate(grads, node.inputs[0], Tensor::from_vec(y.shape().to_vec(), dx)?)?;
            }
            OpKind::Clamp(lo, hi) => {
                let x = input(0);
                let dx: Vec<S> = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gi, &xi)| if xi >= *lo && xi <= *hi { gi } else { S::zero() })
                    .collect();
                accumulate(grads, node.inputs[0], Tensor::from_vec(x.shape().to_vec(), dx)?)?;
            }
            OpKind::Gather(indices) => {
                let x = input(0);
                let mut dx = vec![S::zero(); x.len()];
                match x.shape().len() {
                    1 => {
                        for (row, &i) in indices.iter().enumerate() {
                            dx[i] = dx[i] + g.data()[row];
                        }
                    }
                    _ => {
                        let n = x.shape()[1];
                        for (row, &i) in indices.iter().enumerate() {
                            for j in 0..n {
                                dx[i * n + j] = dx[i * n + j] + g.data()[row * n + j];
                            }
                        }
                    }
                }
                accumulate(grads, node.inputs[0], Tensor::from_vec(x.shape().to_vec(), dx)?)?;
            }
            OpKind::Reshape(_) => {
                let dx = g.reshape(input(0).shape().to_vec())?;
                accumulate(grads, node.inputs[0], dx)?;
            }
        }
        Ok(())
    }
}

fn accumulate<S: Scalar>(
    grads: &mut [Option<Tensor<S>>],
    id: NodeId,
    delta: Tensor<S>,
) -> Result<()> {
    grads[id] = Some(match grads[id].take() {
        Some(existing) => existing.add(&delta)?,
        None => delta,
    });
    Ok(())
}

/// Gradient of the backward output with respect to every node.
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    shapes: Vec<Vec<usize>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient at `id`; zero tensor if the node does not influence the output.
    pub fn get(&self, id: NodeId) -> Tensor<S> {
        match &self.grads[id] {
            Some(t) => t.clone(),
            None => Tensor::zeros(self.shapes[id].clone()),
        }
    }

    /// Borrowed gradient, `None` when the node is unused.
    pub fn get_opt(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.grads[id].as_ref()
    }
}

/// Max over coordinates of `|analytic − central difference| / (|central| + 1e-8)`
/// for a scalar-valued tape function of `x`.
pub fn grad_check<S, F>(f: F, x: &Tensor<S>, step: S) -> Result<S>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, NodeId) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let xid = tape.leaf(x.clone());
    let out = f(&mut tape, xid)?;
    if tape.value(out).len() != 1 {
        return Err(Error::InvalidArgument {
            arg: "f",
            detail: "grad_check requires a scalar function".into(),
        });
    }
    let analytic = tape.backward(out)?.get(xid);

    let eval = |probe: Tensor<S>| -> Result<S> {
        let mut t = Tape::new();
        let id = t.leaf(probe);
        let out = f(&mut t, id)?;
        t.value(out).item()
    };

    let mut max_err = S::zero();
    let eps = S::c(1e-8);
    for i in 0..x.len() {
        let mut plus = x.data().to_vec();
        plus[i] = plus[i] + step;
        let mut minus = x.data().to_vec();
        minus[i] = minus[i] - step;
        let fp = eval(Tensor::from_vec(x.shape().to_vec(), plus)?)?;
        let fm = eval(Tensor::from_vec(x.shape().to_vec(), minus)?)?;
        let central = (fp - fm) / (S::c(2.0) * step);
        let err = (analytic.data()[i] - central).abs() / (central.abs() + eps);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
