//! Inception recurrent residual units.
//!
//! A unit runs one recurrent convolution per branch kernel size in parallel,
//! concatenates the branch outputs along channels and adds the input back,
//! projected through a 1×1 convolution when the channel counts differ.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::models::params::ParamStore;
use crate::tape::{Eval, Exec};
use crate::tensor::{derive_seed, he_init, Tensor};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrruConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Number of recurrent refinements `t`.
    pub recurrence_steps: usize,
    /// Square kernel side of each parallel branch.
    pub branch_kernels: Vec<usize>,
}

impl IrruConfig {
    pub fn new(in_channels: usize, out_channels: usize) -> Self {
        Self { in_channels, out_channels, recurrence_steps: 2, branch_kernels: vec![1, 3] }
    }

    /// Output channels per branch: an even split, remainder to the last
    /// (largest-kernel) branch.
    pub fn branch_channels(&self) -> Result<Vec<usize>> {
        let n = self.branch_kernels.len();
        if n == 0 {
            return Err(invalid("IRRU needs at least one branch"));
        }
        if self.out_channels < n {
            return Err(invalid(format!("cannot split {} output channels across {n} branches", self.out_channels)));
        }
        let mut split = vec![self.out_channels / n; n];
        split[n - 1] += self.out_channels % n;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 {
            return Err(invalid("IRRU in_channels must be positive"));
        }
        if self.recurrence_steps == 0 {
            return Err(invalid("IRRU recurrence_steps must be at least 1"));
        }
        if let Some(k) = self.branch_kernels.iter().find(|&&k| k == 0 || k % 2 == 0) {
            return Err(invalid(format!("IRRU branch kernel {k} must be odd for same padding")));
        }
        self.branch_channels().map(|_| ())
    }

    fn needs_projection(&self) -> bool {
        self.in_channels != self.out_channels
    }

    /// Names, shapes and fan-in of every parameter under `prefix`.
    pub(crate) fn param_specs(&self, prefix: &str) -> Result<Vec<(String, Vec<usize>, usize)>> {
        let mut specs = Vec::new();
        for (j, (&k, &c)) in self.branch_kernels.iter().zip(&self.branch_channels()?).enumerate() {
            specs.push((
                format!("{prefix}.b{j}.fwd.weight"),
                vec![c, self.in_channels, k, k],
                self.in_channels * k * k,
            ));
            specs.push((format!("{prefix}.b{j}.fwd.bias"), vec![c], 0));
            specs.push((format!("{prefix}.b{j}.rec.weight"), vec![c, c, k, k], c * k * k));
        }
        if self.needs_projection() {
            specs.push((
                format!("{prefix}.proj.weight"),
                vec![self.out_channels, self.in_channels, 1, 1],
                self.in_channels,
            ));
            specs.push((format!("{prefix}.proj.bias"), vec![self.out_channels], 0));
        }
        Ok(specs)
    }

    pub(crate) fn forward<E: Exec>(
        &self,
        ex: &mut E,
        params: &ParamStore,
        prefix: &str,
        x: &E::Value,
    ) -> Result<E::Value> {
        let mut branches = Vec::with_capacity(self.branch_kernels.len());
        for (j, &k) in self.branch_kernels.iter().enumerate() {
            let fw =
                ex.param(&format!("{prefix}.b{j}.fwd.weight"), params.expect(&format!("{prefix}.b{j}.fwd.weight"))?);
            let fb = ex.param(&format!("{prefix}.b{j}.fwd.bias"), params.expect(&format!("{prefix}.b{j}.fwd.bias"))?);
            let rw =
                ex.param(&format!("{prefix}.b{j}.rec.weight"), params.expect(&format!("{prefix}.b{j}.rec.weight"))?);
            branches.push(recurrent_conv_on(ex, x, &fw, &fb, &rw, self.recurrence_steps, k / 2)?);
        }
        let merged =
            if branches.len() == 1 { branches.pop().expect("one branch") } else { ex.concat_channels(&branches)? };
        let residual = if self.needs_projection() {
            let pw = ex.param(&format!("{prefix}.proj.weight"), params.expect(&format!("{prefix}.proj.weight"))?);
            let pb = ex.param(&format!("{prefix}.proj.bias"), params.expect(&format!("{prefix}.proj.bias"))?);
            ex.conv2d(x, &pw, &pb, 1, 0)?
        } else {
            x.clone()
        };
        ex.add(&merged, &residual)
    }
}

/// Initialises every parameter spec: He-normal weights, zero biases.
pub(crate) fn init_specs(store: &mut ParamStore, specs: &[(String, Vec<usize>, usize)], seed: u64) -> Result<()> {
    for (name, shape, fan_in) in specs {
        let stream = store.len() as u64;
        let t = if *fan_in == 0 { Tensor::zeros(shape) } else { he_init(shape, *fan_in, derive_seed(seed, stream))? };
        store.insert(name.clone(), t)?;
    }
    Ok(())
}

/// Recurrent convolution with `t` refinement steps:
///
/// ```text
/// f  = conv(x, forward) + bias
/// z0 = f
/// zk = relu(f + conv(z(k-1), recurrent))   for k = 1..=t
/// ```
///
/// With `t = 0` the result is `relu(f)`. The recurrent kernel has no bias.
pub fn recurrent_conv_on<E: Exec>(
    ex: &mut E,
    x: &E::Value,
    forward_kernel: &E::Value,
    forward_bias: &E::Value,
    recurrent_kernel: &E::Value,
    t: usize,
    padding: usize,
) -> Result<E::Value> {
    {
        let (fk, rk) = (ex.tensor(forward_kernel).shape(), ex.tensor(recurrent_kernel).shape());
        let c_out = fk[0];
        if rk.len() != 4 || rk[0] != c_out || rk[1] != c_out {
            return Err(shape_err(format!("recurrent kernel {rk:?} must map {c_out} channels to {c_out}")));
        }
        if rk[2] % 2 == 0 || rk[3] % 2 == 0 {
            return Err(shape_err(format!("recurrent kernel {rk:?} must be odd-sized for same padding")));
        }
    }
    let feed = ex.conv2d(x, forward_kernel, forward_bias, 1, padding)?;
    if t == 0 {
        return Ok(ex.relu(&feed));
    }
    let c_out = ex.tensor(forward_kernel).shape()[0];
    let rec_pad = ex.tensor(recurrent_kernel).shape()[2] / 2;
    let zero_bias = ex.constant(Tensor::zeros(&[c_out]));
    let mut state = feed.clone();
    for _ in 0..t {
        let fb = ex.conv2d(&state, recurrent_kernel, &zero_bias, 1, rec_pad)?;
        let sum = ex.add(&feed, &fb)?;
        state = ex.relu(&sum);
    }
    Ok(state)
}

/// Eager recurrent convolution on plain tensors.
pub fn recurrent_conv(
    x: &Tensor,
    forward_kernel: &Tensor,
    forward_bias: &Tensor,
    recurrent_kernel: &Tensor,
    t: usize,
) -> Result<Tensor> {
    let padding = forward_kernel.shape().get(2).copied().unwrap_or(1) / 2;
    recurrent_conv_on(&mut Eval, x, forward_kernel, forward_bias, recurrent_kernel, t, padding)
}

/// A standalone IRRU with its own parameters.
#[derive(Clone, Debug)]
pub struct IrruBlock {
    config: IrruConfig,
    params: ParamStore,
}

pub fn build_irru(config: IrruConfig, seed: u64) -> Result<IrruBlock> {
    config.validate()?;
    let mut params = ParamStore::new();
    init_specs(&mut params, &config.param_specs("irru")?, seed)?;
    Ok(IrruBlock { config, params })
}

impl IrruBlock {
    pub fn config(&self) -> &IrruConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_on(&mut Eval, x)
    }

    pub fn forward_on<E: Exec>(&self, ex: &mut E, x: &E::Value) -> Result<E::Value> {
        self.config.forward(ex, &self.params, "irru", x)
    }
}
