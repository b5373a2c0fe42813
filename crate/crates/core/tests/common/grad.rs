//! Finite-difference gradient checks for single ops and whole networks.

use cmt::models::{ModelConfig, ModelGraph, WidthScale};
use cmt::ops;
use cmt::tape::{Tape, Var};
use cmt::tensor::{seeded_rng, Tensor};
use cmt::Result;
use rand::Rng;

use super::{central_difference, random_tensor, rel_err};

pub type Build = fn(&mut Tape, &[Var]) -> Result<Var>;

/// Largest relative error and number of probed coordinates.
#[derive(Clone, Copy, Debug, Default)]
pub struct Check {
    pub worst: f64,
    pub probes: usize,
}

impl Check {
    pub fn merge(self, other: Check) -> Check {
        Check { worst: self.worst.max(other.worst), probes: self.probes + other.probes }
    }
}

fn loss_of(build: Build, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &vars).unwrap();
    tape.value(loss).item()
}

/// Compares tape gradients of `build` with central differences at every
/// coordinate of every input.
pub fn check_op(build: Build, inputs: &[Tensor]) -> Check {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone().with_requires_grad(true))).collect();
    let loss = build(&mut tape, &vars).unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut check = Check::default();
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads.of(*var).expect("every input is differentiable");
        assert_eq!(analytic.shape(), inputs[k].shape());
        for i in 0..inputs[k].numel() {
            let f = |x: &Tensor| {
                let mut v = inputs.to_vec();
                v[k] = x.clone();
                loss_of(build, &v)
            };
            let numeric = central_difference(&inputs[k], i, &f);
            check.worst = check.worst.max(rel_err(analytic.data()[i], numeric));
            check.probes += 1;
        }
    }
    check
}

/// Reduces any tensor to a scalar through fixed pseudo-random weights, so
/// every output element carries a distinct upstream gradient.
pub fn weighted_sum(tape: &mut Tape, y: Var) -> Result<Var> {
    let shape = tape.value(y).shape().to_vec();
    let w = tape.constant(random_tensor(&shape, -1.0, 1.0, 99));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

pub fn irrcnn_probe_config() -> ModelConfig {
    let mut cfg = ModelConfig::irrcnn([1, 32, 32], 2, WidthScale::new(1, 8).unwrap());
    cfg.irrcnn_widths = vec![64, 128];
    cfg
}

pub fn nabla3_probe_config() -> ModelConfig {
    ModelConfig::nabla3([1, 32, 32], WidthScale::new(1, 8).unwrap())
}

fn model_loss(model: &ModelGraph, x: &Tensor, labels: &[usize], target: &Tensor) -> f64 {
    let out = model.forward(x).unwrap();
    if labels.is_empty() {
        ops::dice_loss(&out, target).unwrap()
    } else {
        ops::cross_entropy(&out, labels).unwrap()
    }
}

/// End-to-end check of the training loss through `cfg`: one probe in every
/// parameter tensor plus `extra` more at random.
pub fn check_model(cfg: &ModelConfig, seed: u64, extra: usize) -> Check {
    // zero biases put exact zeros in front of relus wherever the input is
    // dead; move off that kink
    let mut model = ModelGraph::build(cfg, seed).unwrap();
    for (k, (name, t)) in model.params_mut().iter_mut().enumerate() {
        if name.ends_with(".bias") {
            *t = random_tensor(t.shape(), -0.05, 0.05, 1000 + k as u64);
        }
    }
    let [c, h, w] = cfg.input_shape;
    let x = random_tensor(&[2, c, h, w], 0.0, 1.0, seed + 1);
    let classifier = cfg.num_classes > 1;
    let labels: Vec<usize> = if classifier { vec![0, 1] } else { vec![] };
    let target = random_tensor(&[2, 1, h, w], 0.0, 1.0, seed + 2).map(|v| if v > 0.5 { 1.0 } else { 0.0 });

    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let out = model.forward_on(&mut tape, &xv).unwrap();
    let loss = if classifier {
        tape.cross_entropy(out, &labels).unwrap()
    } else {
        let t = tape.constant(target.clone());
        tape.dice_loss(out, t).unwrap()
    };
    let grads = tape.backward(loss).unwrap();

    let names: Vec<String> = model.params().names().map(str::to_string).collect();
    let mut rng = seeded_rng(seed + 3);
    let mut probes: Vec<(String, usize)> =
        names.iter().map(|n| (n.clone(), rng.random_range(0..model.params().get(n).unwrap().numel()))).collect();
    for _ in 0..extra {
        let n = &names[rng.random_range(0..names.len())];
        probes.push((n.clone(), rng.random_range(0..model.params().get(n).unwrap().numel())));
    }

    let mut check = Check::default();
    for (name, i) in probes {
        let analytic = grads.get(&name).expect("every parameter has a gradient").data()[i];
        let base = model.params().get(&name).unwrap().clone();
        let f = |t: &Tensor| {
            let mut m = model.clone();
            *m.params_mut().get_mut(&name).unwrap() = t.clone();
            model_loss(&m, &x, &labels, &target)
        };
        let numeric = central_difference(&base, i, &f);
        check.worst = check.worst.max(rel_err(analytic, numeric));
        check.probes += 1;
    }
    check
}

/// Every differentiable op on several random inputs.
pub fn op_suite() -> Vec<(&'static str, Check)> {
    let mut out: Vec<(&'static str, Check)> = Vec::new();
    for seed in 0..3u64 {
        let s = seed * 10;
        let cases: Vec<(&'static str, Build, Vec<Tensor>)> = vec![
            (
                "conv2d",
                |t, v| {
                    let y = t.conv2d(v[0], v[1], v[2], 1, 1)?;
                    weighted_sum(t, y)
                },
                vec![
                    random_tensor(&[2, 2, 5, 5], -1.0, 1.0, s),
                    random_tensor(&[3, 2, 3, 3], -1.0, 1.0, s + 1),
                    random_tensor(&[3], -1.0, 1.0, s + 2),
                ],
            ),
            (
                "conv2d stride 2",
                |t, v| {
                    let y = t.conv2d(v[0], v[1], v[2], 2, 0)?;
                    weighted_sum(t, y)
                },
                vec![
                    random_tensor(&[1, 5, 5], -1.0, 1.0, s),
                    random_tensor(&[2, 1, 3, 3], -1.0, 1.0, s + 1),
                    random_tensor(&[2], -1.0, 1.0, s + 2),
                ],
            ),
            (
                "max_pool2d",
                |t, v| {
                    let y = t.max_pool2d(v[0])?;
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[2, 2, 4, 4], -1.0, 1.0, s)],
            ),
            (
                "upsample2x",
                |t, v| {
                    let y = t.upsample2x(v[0])?;
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[2, 2, 3, 3], -1.0, 1.0, s)],
            ),
            (
                "global_avg_pool",
                |t, v| {
                    let y = t.global_avg_pool(v[0])?;
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[2, 3, 3, 4], -1.0, 1.0, s)],
            ),
            (
                "concat_channels",
                |t, v| {
                    let y = t.concat_channels(&[v[0], v[1]])?;
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[2, 1, 3, 3], -1.0, 1.0, s), random_tensor(&[2, 2, 3, 3], -1.0, 1.0, s + 1)],
            ),
            (
                "add",
                |t, v| {
                    let y = t.add(v[0], v[1])?;
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[3, 4], -1.0, 1.0, s), random_tensor(&[3, 4], -1.0, 1.0, s + 1)],
            ),
            (
                "mul",
                |t, v| {
                    let y = t.mul(v[0], v[1])?;
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[3, 4], -1.0, 1.0, s), random_tensor(&[3, 4], -1.0, 1.0, s + 1)],
            ),
            (
                "relu",
                |t, v| {
                    let y = t.relu(v[0]);
                    weighted_sum(t, y)
                },
                vec![super::random_away_from_zero(&[3, 4], 2.0, 1e-3, s)],
            ),
            (
                "sigmoid",
                |t, v| {
                    let y = t.sigmoid(v[0]);
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[3, 4], -4.0, 4.0, s)],
            ),
            (
                "softmax",
                |t, v| {
                    let y = t.softmax(v[0]);
                    weighted_sum(t, y)
                },
                vec![random_tensor(&[3, 4], -3.0, 3.0, s)],
            ),
            (
                "linear",
                |t, v| {
                    let y = t.linear(v[0], v[1], v[2])?;
                    weighted_sum(t, y)
                },
                vec![
                    random_tensor(&[3, 5], -1.0, 1.0, s),
                    random_tensor(&[2, 5], -1.0, 1.0, s + 1),
                    random_tensor(&[2], -1.0, 1.0, s + 2),
                ],
            ),
            ("sum", |t, v| Ok(t.sum(v[0])), vec![random_tensor(&[2, 4], -1.0, 1.0, s)]),
            ("cross_entropy", |t, v| t.cross_entropy(v[0], &[1, 0, 2]), vec![random_tensor(&[3, 3], 0.1, 1.0, s)]),
            (
                "softmax + cross_entropy",
                |t, v| {
                    let p = t.softmax(v[0]);
                    t.cross_entropy(p, &[1, 0, 2])
                },
                vec![random_tensor(&[3, 3], -3.0, 3.0, s)],
            ),
            (
                "dice_loss",
                |t, v| {
                    let target =
                        t.constant(random_tensor(&[2, 1, 3, 3], 0.0, 1.0, 7).map(|x| if x > 0.5 { 1.0 } else { 0.0 }));
                    t.dice_loss(v[0], target)
                },
                vec![random_tensor(&[2, 1, 3, 3], 0.05, 0.95, s)],
            ),
        ];
        for (name, build, inputs) in cases {
            let c = check_op(build, &inputs);
            match out.iter_mut().find(|(n, _)| *n == name) {
                Some((_, acc)) => *acc = acc.merge(c),
                None => out.push((name, c)),
            }
        }
    }
    out
}
