//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation executed through a [`Tape`] appends a node holding its
//! forward value. [`Tape::backward`] walks the nodes in reverse and
//! accumulates gradients into per-node buffers. A tape is single-owner and
//! must not be shared across threads during a pass.

use std::collections::BTreeMap;

use crate::error::{shape_err, Error, Result};
use crate::ops;
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { input: Var, kernels: Var, bias: Var, stride: usize, padding: usize },
    MaxPool { input: Var, argmax: Vec<usize> },
    Upsample { input: Var },
    Gap { input: Var },
    Concat { inputs: Vec<Var> },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sum { input: Var },
    Relu { input: Var },
    Sigmoid { input: Var },
    Softmax { input: Var },
    Linear { x: Var, w: Var, b: Var },
    CrossEntropy { probs: Var, labels: Vec<usize> },
    Dice { pred: Var, target: Var },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { input, kernels, bias, .. } => vec![*input, *kernels, *bias],
            Op::MaxPool { input, .. }
            | Op::Upsample { input }
            | Op::Gap { input }
            | Op::Sum { input }
            | Op::Relu { input }
            | Op::Sigmoid { input }
            | Op::Softmax { input } => vec![*input],
            Op::Concat { inputs } => inputs.clone(),
            Op::Add { a, b } | Op::Mul { a, b } => vec![*a, *b],
            Op::Linear { x, w, b } => vec![*x, *w, *b],
            Op::CrossEntropy { probs, .. } => vec![*probs],
            Op::Dice { pred, target } => vec![*pred, *target],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    name: Option<String>,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    by_name: BTreeMap<String, Tensor>,
    by_var: BTreeMap<usize, Tensor>,
}

impl Gradients {
    /// Gradient of a named parameter, if it was reachable from the loss.
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.by_name.get(name)
    }

    /// Gradient of any `requires_grad` leaf.
    pub fn of(&self, var: Var) -> Option<&Tensor> {
        self.by_var.get(&var.0)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears all recorded nodes so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.backward_done = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records a leaf. Gradients are tracked when `t.requires_grad()` is set.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let requires_grad = t.requires_grad();
        self.push(t, Op::Leaf, requires_grad, None)
    }

    /// Records a constant leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t.with_requires_grad(false), Op::Leaf, false, None)
    }

    /// Records a named trainable parameter.
    pub fn param(&mut self, name: &str, t: Tensor) -> Var {
        self.push(t.with_requires_grad(true), Op::Leaf, true, Some(name.to_string()))
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, name: Option<String>) -> Var {
        self.nodes.push(Node { value, op, requires_grad, name });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, op, requires_grad, None)
    }

    pub fn conv2d(&mut self, input: Var, kernels: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let y = ops::conv2d(self.value(input), self.value(kernels), self.value(bias), stride, padding)?;
        Ok(self.record(y, Op::Conv2d { input, kernels, bias, stride, padding }))
    }

    pub fn max_pool2d(&mut self, input: Var) -> Result<Var> {
        let (y, argmax) = ops::max_pool2d(self.value(input))?;
        Ok(self.record(y, Op::MaxPool { input, argmax }))
    }

    pub fn upsample2x(&mut self, input: Var) -> Result<Var> {
        let y = ops::upsample2x(self.value(input))?;
        Ok(self.record(y, Op::Upsample { input }))
    }

    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let y = ops::global_avg_pool(self.value(input))?;
        Ok(self.record(y, Op::Gap { input }))
    }

    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
        let y = ops::concat_channels(&values)?;
        Ok(self.record(y, Op::Concat { inputs: inputs.to_vec() }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::add(self.value(a), self.value(b))?;
        Ok(self.record(y, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::mul(self.value(a), self.value(b))?;
        Ok(self.record(y, Op::Mul { a, b }))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, input: Var) -> Var {
        let y = Tensor::scalar(self.value(input).sum());
        self.record(y, Op::Sum { input })
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let y = ops::relu(self.value(input));
        self.record(y, Op::Relu { input })
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let y = ops::sigmoid(self.value(input));
        self.record(y, Op::Sigmoid { input })
    }

    pub fn softmax(&mut self, input: Var) -> Var {
        let y = ops::softmax(self.value(input));
        self.record(y, Op::Softmax { input })
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = ops::linear(self.value(x), self.value(w), self.value(b))?;
        Ok(self.record(y, Op::Linear { x, w, b }))
    }

    pub fn cross_entropy(&mut self, probs: Var, labels: &[usize]) -> Result<Var> {
        let loss = ops::cross_entropy(self.value(probs), labels)?;
        Ok(self.record(Tensor::scalar(loss), Op::CrossEntropy { probs, labels: labels.to_vec() }))
    }

    pub fn dice_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let loss = ops::dice_loss(self.value(pred), self.value(target))?;
        Ok(self.record(Tensor::scalar(loss), Op::Dice { pred, target }))
    }

    /// Back-propagates from a scalar `loss`. A tape supports one backward
    /// pass; call [`Tape::reset`] before recording the next step.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.backward_done {
            return Err(Error::Autodiff("backward already ran on this tape; reset it first".into()));
        }
        let Some(node) = self.nodes.get(loss.0) else {
            return Err(Error::Autodiff("loss does not belong to this tape".into()));
        };
        if node.value.numel() != 1 {
            return Err(Error::Autodiff(format!("loss must be a scalar, got shape {:?}", node.value.shape())));
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(node.value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let upstream = self.local_grads(&node.op, &node.value, &g)?;
            for (var, local) in upstream {
                if !self.nodes[var.0].requires_grad {
                    continue;
                }
                accumulate(&mut grads[var.0], local)?;
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }

        let mut out = Gradients::default();
        for (idx, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let g = grads[idx].take().unwrap_or_else(|| Tensor::zeros(node.value.shape()));
            if let Some(name) = &node.name {
                accumulate_named(&mut out.by_name, name, &g)?;
            }
            out.by_var.insert(idx, g);
        }
        Ok(out)
    }

    /// Gradient contributions to each input of `op`, given the output gradient.
    fn local_grads(&self, op: &Op, value: &Tensor, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let v = |var: &Var| &self.nodes[var.0].value;
        Ok(match op {
            Op::Leaf => vec![],
            Op::Conv2d { input, kernels, bias, stride, padding } => {
                let (gi, gk, gb) = ops::conv2d_backward(v(input), v(kernels), v(bias), *stride, *padding, g)?;
                vec![(*input, gi), (*kernels, gk), (*bias, gb)]
            }
            Op::MaxPool { input, argmax } => {
                vec![(*input, ops::max_pool2d_backward(v(input).shape(), argmax, g)?)]
            }
            Op::Upsample { input } => vec![(*input, ops::upsample2x_backward(v(input).shape(), g)?)],
            Op::Gap { input } => vec![(*input, ops::global_avg_pool_backward(v(input).shape(), g)?)],
            Op::Concat { inputs } => {
                let shapes: Vec<Vec<usize>> = inputs.iter().map(|x| v(x).shape().to_vec()).collect();
                inputs.iter().copied().zip(ops::split_channels(g, &shapes)?).collect()
            }
            Op::Add { a, b } => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Mul { a, b } => vec![(*a, ops::mul(g, v(b))?), (*b, ops::mul(g, v(a))?)],
            Op::Sum { input } => vec![(*input, Tensor::full(v(input).shape(), g.item()))],
            Op::Relu { input } => vec![(*input, ops::relu_backward(v(input), g))],
            Op::Sigmoid { input } => vec![(*input, ops::sigmoid_backward(value, g))],
            Op::Softmax { input } => vec![(*input, ops::softmax_backward(value, g))],
            Op::Linear { x, w, b } => {
                let (gx, gw, gb) = ops::linear_backward(v(x), v(w), v(b), g)?;
                vec![(*x, gx), (*w, gw), (*b, gb)]
            }
            Op::CrossEntropy { probs, labels } => match &self.nodes[probs.0].op {
                // Straight through the softmax as (p - onehot) / B, which stays
                // informative where the clamped form saturates.
                Op::Softmax { input } => {
                    vec![(*input, ops::softmax_cross_entropy_backward(v(probs), labels, g.item())?)]
                }
                _ => vec![(*probs, ops::cross_entropy_backward(v(probs), labels, g.item())?)],
            },
            Op::Dice { pred, target } => {
                let gp = ops::dice_loss_backward(v(pred), v(target), g.item())?;
                // The target is data; it never carries a gradient.
                vec![(*pred, gp)]
            }
        })
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) -> Result<()> {
    match slot {
        None => *slot = Some(g),
        Some(acc) => {
            if acc.shape() != g.shape() {
                return Err(shape_err(format!("gradient shape {:?} does not match {:?}", g.shape(), acc.shape())));
            }
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
    }
    Ok(())
}

fn accumulate_named(map: &mut BTreeMap<String, Tensor>, name: &str, g: &Tensor) -> Result<()> {
    match map.get_mut(name) {
        None => {
            map.insert(name.to_string(), g.clone());
            Ok(())
        }
        Some(acc) => {
            let mut slot = Some(std::mem::replace(acc, Tensor::scalar(0.0)));
            accumulate(&mut slot, g.clone())?;
            *acc = slot.expect("just filled");
            Ok(())
        }
    }
}

/// Execution backend for model definitions.
///
/// Models are written once against this trait and run either eagerly
/// ([`Eval`], no tape allocated) or recorded on a [`Tape`] for training.
pub trait Exec {
    type Value: Clone;

    fn param(&mut self, name: &str, t: &Tensor) -> Self::Value;
    fn constant(&mut self, t: Tensor) -> Self::Value;
    fn tensor<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor;
    fn conv2d(
        &mut self,
        x: &Self::Value,
        w: &Self::Value,
        b: &Self::Value,
        stride: usize,
        padding: usize,
    ) -> Result<Self::Value>;
    fn max_pool2d(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn upsample2x(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn global_avg_pool(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn concat_channels(&mut self, xs: &[Self::Value]) -> Result<Self::Value>;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn relu(&mut self, x: &Self::Value) -> Self::Value;
    fn sigmoid(&mut self, x: &Self::Value) -> Self::Value;
    fn softmax(&mut self, x: &Self::Value) -> Self::Value;
    fn linear(&mut self, x: &Self::Value, w: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
}

/// Eager evaluation without gradient bookkeeping.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

impl Exec for Eval {
    type Value = Tensor;

    fn param(&mut self, _name: &str, t: &Tensor) -> Tensor {
        t.clone()
    }
    fn constant(&mut self, t: Tensor) -> Tensor {
        t
    }
    fn tensor<'a>(&'a self, v: &'a Tensor) -> &'a Tensor {
        v
    }
    fn conv2d(&mut self, x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
        ops::conv2d(x, w, b, stride, padding)
    }
    fn max_pool2d(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(ops::max_pool2d(x)?.0)
    }
    fn upsample2x(&mut self, x: &Tensor) -> Result<Tensor> {
        ops::upsample2x(x)
    }
    fn global_avg_pool(&mut self, x: &Tensor) -> Result<Tensor> {
        ops::global_avg_pool(x)
    }
    fn concat_channels(&mut self, xs: &[Tensor]) -> Result<Tensor> {
        ops::concat_channels(&xs.iter().collect::<Vec<_>>())
    }
    fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        ops::add(a, b)
    }
    fn relu(&mut self, x: &Tensor) -> Tensor {
        ops::relu(x)
    }
    fn sigmoid(&mut self, x: &Tensor) -> Tensor {
        ops::sigmoid(x)
    }
    fn softmax(&mut self, x: &Tensor) -> Tensor {
        ops::softmax(x)
    }
    fn linear(&mut self, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
        ops::linear(x, w, b)
    }
}

impl Exec for Tape {
    type Value = Var;

    fn param(&mut self, name: &str, t: &Tensor) -> Var {
        Tape::param(self, name, t.clone())
    }
    fn constant(&mut self, t: Tensor) -> Var {
        Tape::constant(self, t)
    }
    fn tensor<'a>(&'a self, v: &'a Var) -> &'a Tensor {
        self.value(*v)
    }
    fn conv2d(&mut self, x: &Var, w: &Var, b: &Var, stride: usize, padding: usize) -> Result<Var> {
        Tape::conv2d(self, *x, *w, *b, stride, padding)
    }
    fn max_pool2d(&mut self, x: &Var) -> Result<Var> {
        Tape::max_pool2d(self, *x)
    }
    fn upsample2x(&mut self, x: &Var) -> Result<Var> {
        Tape::upsample2x(self, *x)
    }
    fn global_avg_pool(&mut self, x: &Var) -> Result<Var> {
        Tape::global_avg_pool(self, *x)
    }
    fn concat_channels(&mut self, xs: &[Var]) -> Result<Var> {
        Tape::concat_channels(self, xs)
    }
    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::add(self, *a, *b)
    }
    fn relu(&mut self, x: &Var) -> Var {
        Tape::relu(self, *x)
    }
    fn sigmoid(&mut self, x: &Var) -> Var {
        Tape::sigmoid(self, *x)
    }
    fn softmax(&mut self, x: &Var) -> Var {
        Tape::softmax(self, *x)
    }
    fn linear(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        Tape::linear(self, *x, *w, *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, -2.0]).with_requires_grad(true));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.of(x).unwrap().data(), &[2.0, -4.0]);
    }

    #[test]
    fn constants_are_absent_from_gradients() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::from_vec(vec![3.0, 4.0]));
        let w = tape.param("w", Tensor::from_vec(vec![0.5, 0.5]));
        let prod = tape.mul(c, w).unwrap();
        let loss = tape.sum(prod);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.of(c).is_none());
        assert_eq!(grads.get("w").unwrap().data(), &[3.0, 4.0]);
        assert_eq!(grads.names().collect::<Vec<_>>(), vec!["w"]);
    }

    #[test]
    fn rejects_non_scalar_loss_and_second_backward() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]).with_requires_grad(true));
        assert!(matches!(tape.backward(x), Err(Error::Autodiff(_))));
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(Error::Autodiff(_))));
        tape.reset();
        assert!(tape.is_empty());
    }

    #[test]
    fn empty_tape_graph_gives_no_gradients() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(1.0));
        let grads = tape.backward(c).unwrap();
        assert!(grads.is_empty());
    }

    #[test]
    fn shared_parameter_gradients_accumulate() {
        let mut tape = Tape::new();
        let a = tape.param("p", Tensor::scalar(2.0));
        let b = tape.param("p", Tensor::scalar(2.0));
        let s = tape.add(a, b).unwrap();
        let loss = tape.sum(s);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get("p").unwrap().item(), 2.0);
    }
}
