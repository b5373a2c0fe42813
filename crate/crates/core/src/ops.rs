//! Forward and backward kernels for every differentiable operation.
//!
//! Spatial operations accept either `[C, H, W]` or `[B, C, H, W]` inputs and
//! return a tensor with the same rank. These functions are pure; the
//! [`Tape`](crate::tape::Tape) records them and calls the matching
//! `*_backward` kernel during reverse accumulation.

use crate::error::{invalid, shape_err, Result};
use crate::tensor::Tensor;

/// Lower clamp applied to probabilities before taking a logarithm.
pub const PROB_CLAMP: f64 = 1e-12;
/// Smoothing constant of the Dice loss.
pub const DICE_SMOOTH: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Dims {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub batched: bool,
}

impl Dims {
    pub fn of(t: &Tensor, what: &str) -> Result<Self> {
        match *t.shape() {
            [c, h, w] => Ok(Self { batch: 1, channels: c, height: h, width: w, batched: false }),
            [b, c, h, w] => Ok(Self { batch: b, channels: c, height: h, width: w, batched: true }),
            _ => Err(shape_err(format!("{what} expects [C,H,W] or [B,C,H,W], got {:?}", t.shape()))),
        }
    }

    fn shape(&self, channels: usize, height: usize, width: usize) -> Vec<usize> {
        if self.batched {
            vec![self.batch, channels, height, width]
        } else {
            vec![channels, height, width]
        }
    }

    fn plane(&self) -> usize {
        self.height * self.width
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!("{what}: shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// conv2d

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub dims: Dims,
    pub out_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(input: &Tensor, kernels: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Self> {
        let dims = Dims::of(input, "conv2d input")?;
        let [out_channels, in_channels, kh, kw] = *kernels.shape() else {
            return Err(shape_err(format!("conv2d kernels must be [C_out,C_in,kH,kW], got {:?}", kernels.shape())));
        };
        if in_channels != dims.channels {
            return Err(shape_err(format!(
                "conv2d: kernel C_in = {in_channels} but input has {} channels",
                dims.channels
            )));
        }
        if bias.shape() != [out_channels] {
            return Err(shape_err(format!("conv2d: bias shape {:?}, expected [{out_channels}]", bias.shape())));
        }
        if stride == 0 {
            return Err(invalid("conv2d: stride must be at least 1"));
        }
        let (ph, pw) = (dims.height + 2 * padding, dims.width + 2 * padding);
        if kh > ph || kw > pw {
            return Err(shape_err(format!("conv2d: kernel {kh}x{kw} larger than padded input {ph}x{pw}")));
        }
        Ok(Self {
            dims,
            out_channels,
            kh,
            kw,
            stride,
            padding,
            out_h: (ph - kh) / stride + 1,
            out_w: (pw - kw) / stride + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.dims.channels * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Unfolds one image `[C_in, H, W]` into a `[C_in·kH·kW, H'·W']` matrix.
    fn im2col(&self, image: &[f64], cols: &mut [f64]) {
        let (h, w, n) = (self.dims.height as isize, self.dims.width as isize, self.out_plane());
        let pad = self.padding as isize;
        let mut row = 0;
        for c in 0..self.dims.channels {
            let plane = &image[c * self.dims.plane()..(c + 1) * self.dims.plane()];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - pad;
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        if iy < 0 || iy >= h {
                            line.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * w as usize..(iy as usize + 1) * w as usize];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - pad;
                            *v = if ix < 0 || ix >= w { 0.0 } else { src[ix as usize] };
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    /// Scatter-adds a column matrix back onto an image gradient.
    fn col2im(&self, cols: &[f64], image: &mut [f64]) {
        let (h, w, n) = (self.dims.height as isize, self.dims.width as isize, self.out_plane());
        let pad = self.padding as isize;
        let mut row = 0;
        for c in 0..self.dims.channels {
            let plane = &mut image[c * self.dims.plane()..(c + 1) * self.dims.plane()];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let src = &cols[row * n..(row + 1) * n];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - pad;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w as usize..(iy as usize + 1) * w as usize];
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kj) as isize - pad;
                            if ix >= 0 && ix < w {
                                dst[ix as usize] += src[oy * self.out_w + ox];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// `c = alpha · a · b + beta · c` on row-major slices with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the strides describe m×k, k×n and m×n matrices that lie
    // entirely inside the given slices; callers size every buffer exactly.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeom::new(input, kernels, bias, stride, padding)?;
    let (k, n, co) = (g.patch_len(), g.out_plane(), g.out_channels);
    let in_step = g.dims.channels * g.dims.plane();
    let mut out = vec![0.0; g.dims.batch * co * n];
    let mut cols = vec![0.0; k * n];
    for b in 0..g.dims.batch {
        g.im2col(&input.data()[b * in_step..(b + 1) * in_step], &mut cols);
        let dst = &mut out[b * co * n..(b + 1) * co * n];
        for (c, row) in dst.chunks_mut(n).enumerate() {
            row.fill(bias.data()[c]);
        }
        gemm(co, k, n, kernels.data(), (k as isize, 1), &cols, (n as isize, 1), 1.0, dst);
    }
    Tensor::new(g.dims.shape(co, g.out_h, g.out_w), out)
}

/// Returns gradients with respect to `(input, kernels, bias)`.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = ConvGeom::new(input, kernels, bias, stride, padding)?;
    let (k, n, co) = (g.patch_len(), g.out_plane(), g.out_channels);
    let in_step = g.dims.channels * g.dims.plane();
    let mut g_in = vec![0.0; input.numel()];
    let mut g_k = vec![0.0; kernels.numel()];
    let mut g_b = vec![0.0; co];
    let mut cols = vec![0.0; k * n];
    let mut g_cols = vec![0.0; k * n];
    for b in 0..g.dims.batch {
        let go = &grad_out.data()[b * co * n..(b + 1) * co * n];
        for (c, row) in go.chunks(n).enumerate() {
            g_b[c] += row.iter().sum::<f64>();
        }
        g.im2col(&input.data()[b * in_step..(b + 1) * in_step], &mut cols);
        // dK[co, k] += dOut[co, n] · cols[k, n]^T
        gemm(co, n, k, go, (n as isize, 1), &cols, (1, n as isize), 1.0, &mut g_k);
        // dCols[k, n] = K[co, k]^T · dOut[co, n]
        gemm(k, co, n, kernels.data(), (1, k as isize), go, (n as isize, 1), 0.0, &mut g_cols);
        g.col2im(&g_cols, &mut g_in[b * in_step..(b + 1) * in_step]);
    }
    Ok((
        Tensor::new(input.shape().to_vec(), g_in)?,
        Tensor::new(kernels.shape().to_vec(), g_k)?,
        Tensor::new(vec![co], g_b)?,
    ))
}

// ---------------------------------------------------------------------------
// pooling and resampling

/// 2×2 max-pool with stride 2. Also returns, for every output element, the
/// flat input index it was taken from (first maximum in row-major order).
pub fn max_pool2d(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let d = Dims::of(input, "max_pool2d")?;
    if d.height % 2 != 0 || d.width % 2 != 0 {
        return Err(shape_err(format!("max_pool2d needs even spatial dims, got {}x{}", d.height, d.width)));
    }
    let (oh, ow) = (d.height / 2, d.width / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(d.batch * d.channels * oh * ow);
    let mut argmax = Vec::with_capacity(out.capacity());
    for plane in 0..d.batch * d.channels {
        let base = plane * d.plane();
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * d.width + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * d.width + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(d.shape(d.channels, oh, ow), out)?, argmax))
}

pub fn max_pool2d_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let mut g = Tensor::zeros(input_shape);
    let gd = g.data_mut();
    for (&src, &v) in argmax.iter().zip(grad_out.data()) {
        gd[src] += v;
    }
    Ok(g)
}

/// Nearest-neighbour 2× upsampling: each pixel becomes a 2×2 block.
pub fn upsample2x(input: &Tensor) -> Result<Tensor> {
    let d = Dims::of(input, "upsample2x")?;
    let (oh, ow) = (2 * d.height, 2 * d.width);
    let mut out = vec![0.0; d.batch * d.channels * oh * ow];
    for plane in 0..d.batch * d.channels {
        let src = &input.data()[plane * d.plane()..(plane + 1) * d.plane()];
        let dst = &mut out[plane * oh * ow..(plane + 1) * oh * ow];
        for y in 0..oh {
            let row = &src[(y / 2) * d.width..(y / 2 + 1) * d.width];
            for (x, v) in dst[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                *v = row[x / 2];
            }
        }
    }
    Tensor::new(d.shape(d.channels, oh, ow), out)
}

pub fn upsample2x_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let mut g = Tensor::zeros(input_shape);
    let d = Dims::of(&g, "upsample2x")?;
    let ow = 2 * d.width;
    let go = grad_out.data();
    let gd = g.data_mut();
    for plane in 0..d.batch * d.channels {
        let src = &go[plane * 4 * d.plane()..(plane + 1) * 4 * d.plane()];
        for y in 0..2 * d.height {
            for x in 0..ow {
                gd[plane * d.plane() + (y / 2) * d.width + x / 2] += src[y * ow + x];
            }
        }
    }
    Ok(g)
}

/// Per-channel spatial mean: `[C,H,W] -> [C]`, `[B,C,H,W] -> [B,C]`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let d = Dims::of(input, "global_avg_pool")?;
    let n = d.plane() as f64;
    let data = input.data().chunks(d.plane()).map(|p| p.iter().sum::<f64>() / n).collect();
    let shape = if d.batched { vec![d.batch, d.channels] } else { vec![d.channels] };
    Tensor::new(shape, data)
}

pub fn global_avg_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let mut g = Tensor::zeros(input_shape);
    let d = Dims::of(&g, "global_avg_pool")?;
    let n = d.plane();
    for (plane, &v) in g.data_mut().chunks_mut(n).zip(grad_out.data()) {
        plane.fill(v / n as f64);
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// channel plumbing

pub fn concat_channels(xs: &[&Tensor]) -> Result<Tensor> {
    let first = xs.first().ok_or_else(|| shape_err("concat_channels of zero tensors"))?;
    let d0 = Dims::of(first, "concat_channels")?;
    let mut total_c = 0;
    for x in xs {
        let d = Dims::of(x, "concat_channels")?;
        if (d.batch, d.height, d.width, d.batched) != (d0.batch, d0.height, d0.width, d0.batched) {
            return Err(shape_err(format!(
                "concat_channels: {:?} does not match {:?} outside the channel dim",
                x.shape(),
                first.shape()
            )));
        }
        total_c += d.channels;
    }
    let mut out = Vec::with_capacity(d0.batch * total_c * d0.plane());
    for b in 0..d0.batch {
        for x in xs {
            let step = x.shape()[x.ndim() - 3] * d0.plane();
            out.extend_from_slice(&x.data()[b * step..(b + 1) * step]);
        }
    }
    Tensor::new(d0.shape(total_c, d0.height, d0.width), out)
}

/// Splits a channel-concatenated gradient back into per-input gradients.
pub fn split_channels(grad: &Tensor, shapes: &[Vec<usize>]) -> Result<Vec<Tensor>> {
    let d = Dims::of(grad, "split_channels")?;
    let mut parts: Vec<Vec<f64>> = shapes.iter().map(|s| Vec::with_capacity(s.iter().product())).collect();
    let mut offset = 0;
    for b in 0..d.batch {
        for (shape, part) in shapes.iter().zip(parts.iter_mut()) {
            let step = shape[shape.len() - 3] * d.plane();
            let start = b * d.channels * d.plane() + offset;
            part.extend_from_slice(&grad.data()[start..start + step]);
            offset += step;
        }
        offset = 0;
    }
    shapes.iter().zip(parts).map(|(s, p)| Tensor::new(s.clone(), p)).collect()
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "add")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "mul")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

// ---------------------------------------------------------------------------
// activations

/// `max(0, x)`. The gradient at exactly zero is taken to be 0.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = x.data().iter().zip(grad_out.data()).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = y.data().iter().zip(grad_out.data()).map(|(&s, &g)| g * s * (1.0 - s)).collect();
    Tensor::new(y.shape().to_vec(), data).expect("same shape")
}

/// Softmax over the last dimension (max-subtracted).
pub fn softmax(x: &Tensor) -> Tensor {
    let k = *x.shape().last().expect("non-empty shape");
    let mut out = Vec::with_capacity(x.numel());
    for row in x.data().chunks(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / total));
    }
    Tensor::new(x.shape().to_vec(), out).expect("same shape")
}

pub fn softmax_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    let k = *y.shape().last().expect("non-empty shape");
    let mut out = Vec::with_capacity(y.numel());
    for (yr, gr) in y.data().chunks(k).zip(grad_out.data().chunks(k)) {
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        out.extend(yr.iter().zip(gr).map(|(s, g)| s * (g - dot)));
    }
    Tensor::new(y.shape().to_vec(), out).expect("same shape")
}

// ---------------------------------------------------------------------------
// fully connected

fn linear_dims(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize, bool)> {
    let (batch, inp, batched) = match *x.shape() {
        [i] => (1, i, false),
        [n, i] => (n, i, true),
        _ => return Err(shape_err(format!("linear input must be [In] or [B,In], got {:?}", x.shape()))),
    };
    let [out, w_in] = *w.shape() else {
        return Err(shape_err(format!("linear weight must be [Out,In], got {:?}", w.shape())));
    };
    if w_in != inp {
        return Err(shape_err(format!("linear: weight In = {w_in} but input has {inp} features")));
    }
    if b.shape() != [out] {
        return Err(shape_err(format!("linear: bias shape {:?}, expected [{out}]", b.shape())));
    }
    Ok((batch, inp, out, batched))
}

/// `y = x · wᵀ + b` with `w: [Out, In]`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (batch, inp, out, batched) = linear_dims(x, w, b)?;
    let mut y = Vec::with_capacity(batch * out);
    for row in x.data().chunks(inp) {
        for (o, wr) in w.data().chunks(inp).enumerate() {
            y.push(b.data()[o] + row.iter().zip(wr).map(|(a, c)| a * c).sum::<f64>());
        }
    }
    let shape = if batched { vec![batch, out] } else { vec![out] };
    Tensor::new(shape, y)
}

pub fn linear_backward(x: &Tensor, w: &Tensor, b: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (_, inp, out, _) = linear_dims(x, w, b)?;
    let mut gx = vec![0.0; x.numel()];
    let mut gw = vec![0.0; w.numel()];
    let mut gb = vec![0.0; out];
    for ((xr, gxr), gyr) in x.data().chunks(inp).zip(gx.chunks_mut(inp)).zip(grad_out.data().chunks(out)) {
        for (o, &gy) in gyr.iter().enumerate() {
            gb[o] += gy;
            let wr = &w.data()[o * inp..(o + 1) * inp];
            let gwr = &mut gw[o * inp..(o + 1) * inp];
            for i in 0..inp {
                gxr[i] += gy * wr[i];
                gwr[i] += gy * xr[i];
            }
        }
    }
    Ok((Tensor::new(x.shape().to_vec(), gx)?, Tensor::new(w.shape().to_vec(), gw)?, Tensor::new(vec![out], gb)?))
}

// ---------------------------------------------------------------------------
// losses

fn class_rows(probs: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let (rows, k) = match *probs.shape() {
        [k] => (1, k),
        [n, k] => (n, k),
        _ => return Err(shape_err(format!("cross entropy expects [K] or [B,K], got {:?}", probs.shape()))),
    };
    if labels.len() != rows {
        return Err(shape_err(format!("{} labels for {rows} prediction rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(invalid(format!("label {bad} out of range for {k} classes")));
    }
    Ok((rows, k))
}

/// Mean of `-ln(max(p_true, 1e-12))` over the rows of a probability matrix.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let (rows, k) = class_rows(probs, labels)?;
    let total: f64 = labels.iter().enumerate().map(|(r, &l)| -probs.data()[r * k + l].max(PROB_CLAMP).ln()).sum();
    Ok(total / rows as f64)
}

pub fn cross_entropy_backward(probs: &Tensor, labels: &[usize], grad_out: f64) -> Result<Tensor> {
    let (rows, k) = class_rows(probs, labels)?;
    let mut g = Tensor::zeros(probs.shape());
    for (r, &l) in labels.iter().enumerate() {
        let p = probs.data()[r * k + l];
        if p > PROB_CLAMP {
            g.data_mut()[r * k + l] = -grad_out / (p * rows as f64);
        }
    }
    Ok(g)
}

/// Gradient of the mean cross-entropy with respect to the logits that
/// produced `probs` through a softmax.
pub fn softmax_cross_entropy_backward(probs: &Tensor, labels: &[usize], grad_out: f64) -> Result<Tensor> {
    let (rows, k) = class_rows(probs, labels)?;
    let scale = grad_out / rows as f64;
    let mut g = probs.map(|p| p * scale);
    for (r, &l) in labels.iter().enumerate() {
        g.data_mut()[r * k + l] -= scale;
    }
    Ok(g)
}

fn dice_samples(pred: &Tensor, target: &Tensor) -> Result<usize> {
    same_shape(pred, target, "dice_loss")?;
    Ok(if pred.ndim() == 4 { pred.shape()[0] } else { 1 })
}

/// Soft Dice loss `1 - (2·Σpt + s) / (Σp + Σt + s)`, averaged over samples.
pub fn dice_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    let n = dice_samples(pred, target)?;
    let step = pred.numel() / n;
    let mut total = 0.0;
    for (p, t) in pred.data().chunks(step).zip(target.data().chunks(step)) {
        let inter: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
        let denom = p.iter().sum::<f64>() + t.iter().sum::<f64>() + DICE_SMOOTH;
        total += 1.0 - (2.0 * inter + DICE_SMOOTH) / denom;
    }
    Ok(total / n as f64)
}

pub fn dice_loss_backward(pred: &Tensor, target: &Tensor, grad_out: f64) -> Result<Tensor> {
    let n = dice_samples(pred, target)?;
    let step = pred.numel() / n;
    let mut g = Vec::with_capacity(pred.numel());
    for (p, t) in pred.data().chunks(step).zip(target.data().chunks(step)) {
        let inter: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
        let denom = p.iter().sum::<f64>() + t.iter().sum::<f64>() + DICE_SMOOTH;
        let numer = 2.0 * inter + DICE_SMOOTH;
        let scale = grad_out / n as f64;
        g.extend(t.iter().map(|&ti| -scale * (2.0 * ti * denom - numer) / (denom * denom)));
    }
    Tensor::new(pred.shape().to_vec(), g)
}
