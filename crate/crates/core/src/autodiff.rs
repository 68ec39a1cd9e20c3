//! Reverse-mode differentiation over the network's op set.
//!
//! [`Tape`] records every op of a forward pass (it implements
//! [`Exec`](crate::model::Exec)) together with its output value, then
//! [`Tape::backward`] walks the record in reverse accumulating gradients.
//! The vector-Jacobian products are exposed individually so each can be
//! checked against finite differences.

use crate::error::{Error, Result};
use crate::model::{Exec, WeightSet};
use crate::ops::{self, Activation, PoolWindow};
use crate::tensor::{Scalar, Tensor};
use crate::tsm::{self, ShiftSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<S> {
    Input,
    Param(String),
    Conv2d(Var, Var, Var),
    Conv3d(Var, Var, Var),
    Pool(Var, PoolWindow),
    Dense(Var, Var, Var),
    Act(Var, Activation),
    Shift(Var, ShiftSpec),
    Attention(Var, Var, Var),
    ApplyMask(Var, Var),
    Scale(Var, Tensor<S>),
    Reshape(Var),
    /// Mean absolute error against a fixed target.
    L1(Var, Vec<S>),
    /// `a + alpha·b` on scalars.
    AddScaled(Var, Var, S),
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

#[derive(Default)]
pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient under `name`.
    pub fn param_from(&mut self, name: &str, value: Tensor<S>) -> Var {
        self.push(value, Op::Param(name.to_string()))
    }

    /// `mean_t |pred_t - target_t|` for a `T×1` (or length-`T`) prediction.
    pub fn l1(&mut self, pred: Var, target: &[S]) -> Result<Var> {
        let p = &self.nodes[pred.0].value;
        if p.len() != target.len() {
            return Err(Error::DimMismatch {
                op: "l1 loss",
                lhs_name: "prediction length",
                lhs: p.len(),
                rhs_name: "target length",
                rhs: target.len(),
            });
        }
        let n = S::from_usize(target.len()).unwrap();
        let sum: S = p
            .data()
            .iter()
            .zip(target)
            .map(|(&a, &b)| (a - b).abs())
            .sum();
        Ok(self.push(Tensor::scalar(sum / n), Op::L1(pred, target.to_vec())))
    }

    pub fn add_scaled(&mut self, a: Var, b: Var, alpha: S) -> Var {
        let v = self.nodes[a.0].value.data()[0] + alpha * self.nodes[b.0].value.data()[0];
        self.push(Tensor::scalar(v), Op::AddScaled(a, b, alpha))
    }

    pub fn scalar(&self, v: Var) -> S {
        self.nodes[v.0].value.data()[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gradients of the scalar `root` with respect to every parameter leaf.
    /// A parameter used more than once accumulates all contributions.
    pub fn backward(&self, root: Var) -> Result<WeightSet<S>> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::invalid("backward", "root must be a scalar"));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(S::one()));
        let mut out = WeightSet::default();

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Input => {}
                Op::Param(name) => match out.get_mut(name) {
                    Ok(acc) => add_into(acc, &g),
                    Err(_) => out.insert(name.clone(), g),
                },
                Op::Conv2d(x, w, b) => {
                    let (gx, gw, gb) = conv2d_backward(val(*x), val(*w), &g)?;
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Conv3d(x, w, b) => {
                    let (gx, gw, gb) = conv3d_backward(val(*x), val(*w), &g)?;
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Pool(x, window) => {
                    accumulate(
                        &mut grads,
                        *x,
                        avg_pool_backward(val(*x).dims(), *window, &g)?,
                    );
                }
                Op::Dense(x, w, b) => {
                    let (gx, gw, gb) = dense_backward(val(*x), val(*w), &g)?;
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Act(x, kind) => {
                    accumulate(&mut grads, *x, activation_backward(&node.value, *kind, &g));
                }
                Op::Shift(x, spec) => {
                    accumulate(&mut grads, *x, tsm::temporal_shift_adjoint(&g, spec)?);
                }
                Op::Attention(xa, w, b) => {
                    let (gxa, gw, gb) = attention_mask_backward(val(*xa), val(*w), val(*b), &g)?;
                    accumulate(&mut grads, *xa, gxa);
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *b, gb);
                }
                Op::ApplyMask(x, m) => {
                    let (gx, gm) = apply_mask_backward(val(*x), val(*m), &g)?;
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *m, gm);
                }
                Op::Scale(x, mask) => accumulate(&mut grads, *x, ops::mul(&g, mask)?),
                Op::Reshape(x) => {
                    let dims = val(*x).dims().to_vec();
                    accumulate(&mut grads, *x, g.reshape(&dims)?);
                }
                Op::L1(pred, target) => {
                    let p = val(*pred);
                    let scale = g.data()[0] / S::from_usize(target.len()).unwrap();
                    let data = p
                        .data()
                        .iter()
                        .zip(target)
                        .map(|(&a, &b)| l1_subgradient(a - b) * scale)
                        .collect();
                    accumulate(&mut grads, *pred, Tensor::new(p.dims().to_vec(), data)?);
                }
                Op::AddScaled(a, b, alpha) => {
                    let gv = g.data()[0];
                    accumulate(&mut grads, *a, Tensor::scalar(gv));
                    accumulate(&mut grads, *b, Tensor::scalar(gv * *alpha));
                }
            }
        }
        Ok(out)
    }
}

/// Subgradient of `|r|`, taken as 0 at `r = 0`.
#[inline]
pub fn l1_subgradient<S: Scalar>(r: S) -> S {
    if r > S::zero() {
        S::one()
    } else if r < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

fn add_into<S: Scalar>(acc: &mut Tensor<S>, g: &Tensor<S>) {
    debug_assert_eq!(acc.dims(), g.dims());
    for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
        *a += b;
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Tensor<S>>], v: Var, g: Tensor<S>) {
    match &mut grads[v.0] {
        Some(acc) => add_into(acc, &g),
        slot @ None => *slot = Some(g),
    }
}

impl<S: Scalar> Exec<S> for Tape<S> {
    type V = Var;

    fn input(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Input)
    }
    fn param(&mut self, _name: &str) -> Result<Var> {
        Err(Error::invalid(
            "tape",
            "parameters must be bound with ParamTape, which owns the weights",
        ))
    }
    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor<S> {
        &self.nodes[v.0].value
    }
    fn conv2d(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        let y = ops::conv2d(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(y, Op::Conv2d(*x, *w, *b)))
    }
    fn conv3d(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        let y = ops::conv3d(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(y, Op::Conv3d(*x, *w, *b)))
    }
    fn avg_pool(&mut self, x: &Var, window: PoolWindow) -> Result<Var> {
        let y = ops::avg_pool(self.value(x), window)?;
        Ok(self.push(y, Op::Pool(*x, window)))
    }
    fn dense(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        let y = ops::dense(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(y, Op::Dense(*x, *w, *b)))
    }
    fn activation(&mut self, x: Var, kind: Activation) -> Var {
        let y = ops::activation(self.value(&x), kind);
        self.push(y, Op::Act(x, kind))
    }
    fn temporal_shift(&mut self, x: &Var, spec: &ShiftSpec) -> Result<Var> {
        let y = tsm::temporal_shift(self.value(x), spec)?;
        Ok(self.push(y, Op::Shift(*x, *spec)))
    }
    fn attention_mask(&mut self, xa: &Var, w: &Var, b: &Var) -> Result<Var> {
        let y = tsm::attention_mask(self.value(xa), self.value(w), self.value(b))?;
        Ok(self.push(y, Op::Attention(*xa, *w, *b)))
    }
    fn apply_mask(&mut self, x: &Var, mask: &Var) -> Result<Var> {
        let y = tsm::apply_mask(self.value(x), self.value(mask))?;
        Ok(self.push(y, Op::ApplyMask(*x, *mask)))
    }
    fn scale_by(&mut self, x: Var, mask: Tensor<S>) -> Result<Var> {
        let y = ops::mul(self.value(&x), &mask)?;
        Ok(self.push(y, Op::Scale(x, mask)))
    }
    fn reshape(&mut self, x: Var, dims: &[usize]) -> Result<Var> {
        let y = self.value(&x).clone().reshape(dims)?;
        Ok(self.push(y, Op::Reshape(x)))
    }
}

/// A tape that binds parameter names to a weight set, recording each
/// parameter as a leaf once.
pub struct ParamTape<'w, S: Scalar> {
    pub tape: Tape<S>,
    weights: &'w WeightSet<S>,
    bound: Vec<(String, Var)>,
}

impl<'w, S: Scalar> ParamTape<'w, S> {
    pub fn new(weights: &'w WeightSet<S>) -> Self {
        Self {
            tape: Tape::new(),
            weights,
            bound: Vec::new(),
        }
    }
}

impl<'w, S: Scalar> Exec<S> for ParamTape<'w, S> {
    type V = Var;

    fn input(&mut self, t: Tensor<S>) -> Var {
        self.tape.input(t)
    }
    fn param(&mut self, name: &str) -> Result<Var> {
        if let Some((_, v)) = self.bound.iter().find(|(n, _)| n == name) {
            return Ok(*v);
        }
        let v = self.tape.param_from(name, self.weights.get(name)?.clone());
        self.bound.push((name.to_string(), v));
        Ok(v)
    }
    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor<S> {
        self.tape.value(v)
    }
    fn conv2d(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        self.tape.conv2d(x, w, b)
    }
    fn conv3d(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        self.tape.conv3d(x, w, b)
    }
    fn avg_pool(&mut self, x: &Var, window: PoolWindow) -> Result<Var> {
        self.tape.avg_pool(x, window)
    }
    fn dense(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        self.tape.dense(x, w, b)
    }
    fn activation(&mut self, x: Var, kind: Activation) -> Var {
        self.tape.activation(x, kind)
    }
    fn temporal_shift(&mut self, x: &Var, spec: &ShiftSpec) -> Result<Var> {
        self.tape.temporal_shift(x, spec)
    }
    fn attention_mask(&mut self, xa: &Var, w: &Var, b: &Var) -> Result<Var> {
        self.tape.attention_mask(xa, w, b)
    }
    fn apply_mask(&mut self, x: &Var, mask: &Var) -> Result<Var> {
        self.tape.apply_mask(x, mask)
    }
    fn scale_by(&mut self, x: Var, mask: Tensor<S>) -> Result<Var> {
        self.tape.scale_by(x, mask)
    }
    fn reshape(&mut self, x: Var, dims: &[usize]) -> Result<Var> {
        self.tape.reshape(x, dims)
    }
}

/// Gradients of a "same" 2D convolution: `(d input, d kernel, d bias)`.
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let &[t, h, w, cin] = input.dims() else {
        return Err(Error::invalid("conv2d_backward", "input must be rank 4"));
    };
    let &[k, _, _, cout] = kernel.dims() else {
        return Err(Error::invalid("conv2d_backward", "kernel must be rank 4"));
    };
    let pad = (k / 2) as isize;
    let x = input.data();
    let kd = kernel.data();
    let gy = grad_out.data();
    let mut gx = vec![S::zero(); x.len()];
    let mut gw = vec![S::zero(); kd.len()];
    let mut gb = vec![S::zero(); cout];
    for f in 0..t {
        for y in 0..h {
            for xo in 0..w {
                let g = &gy[((f * h + y) * w + xo) * cout..][..cout];
                for (acc, &v) in gb.iter_mut().zip(g) {
                    *acc += v;
                }
                for ky in 0..k {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = xo as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let xoff = ((f * h + iy as usize) * w + ix as usize) * cin;
                        let koff = (ky * k + kx) * cin * cout;
                        for ci in 0..cin {
                            let wrow = &kd[koff + ci * cout..][..cout];
                            let mut s = S::zero();
                            for (&a, &b) in g.iter().zip(wrow) {
                                s += a * b;
                            }
                            gx[xoff + ci] += s;
                            let xv = x[xoff + ci];
                            for (acc, &gv) in gw[koff + ci * cout..][..cout].iter_mut().zip(g) {
                                *acc += xv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.dims().to_vec(), gx)?,
        Tensor::new(kernel.dims().to_vec(), gw)?,
        Tensor::new(vec![cout], gb)?,
    ))
}

/// Gradients of a "same" 3D convolution: `(d input, d kernel, d bias)`.
pub fn conv3d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let &[t, h, w, cin] = input.dims() else {
        return Err(Error::invalid("conv3d_backward", "input must be rank 4"));
    };
    let &[k, _, _, _, cout] = kernel.dims() else {
        return Err(Error::invalid("conv3d_backward", "kernel must be rank 5"));
    };
    let pad = (k / 2) as isize;
    let x = input.data();
    let kd = kernel.data();
    let gy = grad_out.data();
    let mut gx = vec![S::zero(); x.len()];
    let mut gw = vec![S::zero(); kd.len()];
    let mut gb = vec![S::zero(); cout];
    for f in 0..t {
        for y in 0..h {
            for xo in 0..w {
                let g = &gy[((f * h + y) * w + xo) * cout..][..cout];
                for (acc, &v) in gb.iter_mut().zip(g) {
                    *acc += v;
                }
                for kf in 0..k {
                    let it = f as isize + kf as isize - pad;
                    if it < 0 || it >= t as isize {
                        continue;
                    }
                    for ky in 0..k {
                        let iy = y as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = xo as isize + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let xoff = ((it as usize * h + iy as usize) * w + ix as usize) * cin;
                            let koff = ((kf * k + ky) * k + kx) * cin * cout;
                            for ci in 0..cin {
                                let wrow = &kd[koff + ci * cout..][..cout];
                                let mut s = S::zero();
                                for (&a, &b) in g.iter().zip(wrow) {
                                    s += a * b;
                                }
                                gx[xoff + ci] += s;
                                let xv = x[xoff + ci];
                                for (acc, &gv) in gw[koff + ci * cout..][..cout].iter_mut().zip(g) {
                                    *acc += xv * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(input.dims().to_vec(), gx)?,
        Tensor::new(kernel.dims().to_vec(), gw)?,
        Tensor::new(vec![cout], gb)?,
    ))
}

/// Spreads each pooled gradient evenly over its window; dropped trailing
/// rows/columns receive zero.
pub fn avg_pool_backward<S: Scalar>(
    input_dims: &[usize],
    window: PoolWindow,
    grad_out: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (t, h, w, c) = match *input_dims {
        [h, w, c] => (1, h, w, c),
        [t, h, w, c] => (t, h, w, c),
        _ => return Err(Error::invalid("avg_pool_backward", "unsupported rank")),
    };
    let (ho, wo) = (h / 2, w / 2);
    let (tw, scale) = match window {
        PoolWindow::Spatial => (1, S::from_f64_lossy(0.25)),
        PoolWindow::Spatiotemporal => (2, S::from_f64_lossy(0.125)),
    };
    let to = t / tw;
    let gy = grad_out.data();
    let mut gx = vec![S::zero(); t * h * w * c];
    for f in 0..to {
        for y in 0..ho {
            for xx in 0..wo {
                let g = &gy[((f * ho + y) * wo + xx) * c..][..c];
                for df in 0..tw {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let base = (((f * tw + df) * h + 2 * y + dy) * w + 2 * xx + dx) * c;
                            for (acc, &gv) in gx[base..base + c].iter_mut().zip(g) {
                                *acc += gv * scale;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(input_dims.to_vec(), gx)
}

pub fn dense_backward<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let &[n, f] = input.dims() else {
        return Err(Error::invalid("dense_backward", "input must be rank 2"));
    };
    let m = weight.dims()[1];
    let x = input.data();
    let wd = weight.data();
    let gy = grad_out.data();
    let mut gx = vec![S::zero(); n * f];
    let mut gw = vec![S::zero(); f * m];
    let mut gb = vec![S::zero(); m];
    for row in 0..n {
        let g = &gy[row * m..(row + 1) * m];
        for (acc, &v) in gb.iter_mut().zip(g) {
            *acc += v;
        }
        for fi in 0..f {
            let wrow = &wd[fi * m..(fi + 1) * m];
            let mut s = S::zero();
            for (&a, &b) in g.iter().zip(wrow) {
                s += a * b;
            }
            gx[row * f + fi] = s;
            let xv = x[row * f + fi];
            for (acc, &gv) in gw[fi * m..(fi + 1) * m].iter_mut().zip(g) {
                *acc += xv * gv;
            }
        }
    }
    Ok((
        Tensor::new(vec![n, f], gx)?,
        Tensor::new(vec![f, m], gw)?,
        Tensor::new(vec![m], gb)?,
    ))
}

/// Uses the activation's output `y`.
pub fn activation_backward<S: Scalar>(
    output: &Tensor<S>,
    kind: Activation,
    grad_out: &Tensor<S>,
) -> Tensor<S> {
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| match kind {
            Activation::Tanh => g * (S::one() - y * y),
            Activation::Sigmoid => g * y * (S::one() - y),
            Activation::Linear => g,
        })
        .collect();
    Tensor::new(output.dims().to_vec(), data).expect("shape preserved")
}

/// Gradient of the l1-normalized sigmoid mask, including the normalizer
/// (quotient rule): with `m_i = N s_i / (2 S)`, `S = Σ s`,
/// `∂L/∂s_j = N/(2S) · (g_j − Σ_i g_i s_i / S)`.
pub fn attention_mask_backward<S: Scalar>(
    xa: &Tensor<S>,
    omega: &Tensor<S>,
    bias: &Tensor<S>,
    grad_mask: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let (frames, positions, cin, _) = tsm::attention_geometry(xa, omega, bias)?;
    let s = tsm::attention_logits_sigmoid(xa, omega, bias.data()[0], cin);
    let n = S::from_usize(positions).unwrap();
    let two = S::from_f64_lossy(2.0);
    let w = omega.data();
    let x = xa.data();
    let gm = grad_mask.data();
    let mut gx = vec![S::zero(); x.len()];
    let mut gw = vec![S::zero(); cin];
    let mut gb = S::zero();
    for f in 0..frames {
        let sf = &s[f * positions..(f + 1) * positions];
        let gf = &gm[f * positions..(f + 1) * positions];
        let total: S = sf.iter().copied().sum();
        let dot: S = sf.iter().zip(gf).map(|(&a, &b)| a * b).sum();
        let coef = n / (two * total);
        for p in 0..positions {
            let gs = coef * (gf[p] - dot / total);
            let gz = gs * sf[p] * (S::one() - sf[p]);
            gb += gz;
            let off = (f * positions + p) * cin;
            for c in 0..cin {
                gw[c] += gz * x[off + c];
                gx[off + c] = gz * w[c];
            }
        }
    }
    Ok((
        Tensor::new(xa.dims().to_vec(), gx)?,
        Tensor::new(omega.dims().to_vec(), gw)?,
        Tensor::scalar(gb),
    ))
}

pub fn apply_mask_backward<S: Scalar>(
    x: &Tensor<S>,
    mask: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>)> {
    let gx = tsm::apply_mask(grad_out, mask)?;
    let mt = tsm::mask_frames(x, mask)?;
    let &[t, h, w, c] = x.dims() else {
        unreachable!()
    };
    let positions = h * w;
    let mut gm = vec![S::zero(); mask.len()];
    let xd = x.data();
    let gy = grad_out.data();
    for f in 0..t {
        let mf = if mt == 1 { 0 } else { f };
        for p in 0..positions {
            let off = (f * positions + p) * c;
            let mut s = S::zero();
            for ch in 0..c {
                s += xd[off + ch] * gy[off + ch];
            }
            gm[mf * positions + p] += s;
        }
    }
    Ok((gx, Tensor::new(mask.dims().to_vec(), gm)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn rand_t(dims: &[usize], seed: u64) -> Tensor<f64> {
        let mut r = rng::seeded(seed);
        Tensor::from_fn(dims, |_| rng::uniform(&mut r, -1.0, 1.0))
    }

    /// Central differences of `Σ cot ⊙ f(x)` with respect to `x`.
    fn numeric_grad(
        x: &Tensor<f64>,
        cot: &Tensor<f64>,
        f: impl Fn(&Tensor<f64>) -> Tensor<f64>,
    ) -> Tensor<f64> {
        let h = 1e-3;
        let objective = |t: &Tensor<f64>| -> f64 {
            f(t).data().iter().zip(cot.data()).map(|(a, b)| a * b).sum()
        };
        let mut g = Tensor::zeros(x.dims());
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            g.data_mut()[i] = (objective(&xp) - objective(&xm)) / (2.0 * h);
        }
        g
    }

    fn assert_close(analytic: &Tensor<f64>, numeric: &Tensor<f64>, what: &str) {
        for (i, (&a, &n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
            let denom = a.abs().max(n.abs()).max(1e-2);
            assert!(
                (a - n).abs() / denom <= 1e-3,
                "{what}[{i}]: analytic {a} numeric {n}"
            );
        }
    }

    #[test]
    fn conv2d_vjp_matches_finite_differences() {
        let x = rand_t(&[2, 4, 5, 2], 1);
        let k = rand_t(&[3, 3, 2, 3], 2);
        let b = rand_t(&[3], 3);
        let cot = rand_t(&[2, 4, 5, 3], 4);
        let (gx, gk, gb) = conv2d_backward(&x, &k, &cot).unwrap();
        assert_close(
            &gx,
            &numeric_grad(&x, &cot, |t| ops::conv2d(t, &k, &b).unwrap()),
            "x",
        );
        assert_close(
            &gk,
            &numeric_grad(&k, &cot, |t| ops::conv2d(&x, t, &b).unwrap()),
            "k",
        );
        assert_close(
            &gb,
            &numeric_grad(&b, &cot, |t| ops::conv2d(&x, &k, t).unwrap()),
            "b",
        );
    }

    #[test]
    fn conv3d_vjp_matches_finite_differences() {
        let x = rand_t(&[3, 3, 4, 2], 5);
        let k = rand_t(&[3, 3, 3, 2, 2], 6);
        let b = rand_t(&[2], 7);
        let cot = rand_t(&[3, 3, 4, 2], 8);
        let (gx, gk, gb) = conv3d_backward(&x, &k, &cot).unwrap();
        assert_close(
            &gx,
            &numeric_grad(&x, &cot, |t| ops::conv3d(t, &k, &b).unwrap()),
            "x",
        );
        assert_close(
            &gk,
            &numeric_grad(&k, &cot, |t| ops::conv3d(&x, t, &b).unwrap()),
            "k",
        );
        assert_close(
            &gb,
            &numeric_grad(&b, &cot, |t| ops::conv3d(&x, &k, t).unwrap()),
            "b",
        );
    }

    #[test]
    fn pool_dense_activation_vjps() {
        for window in [PoolWindow::Spatial, PoolWindow::Spatiotemporal] {
            let x = rand_t(&[4, 5, 6, 2], 9);
            let y = ops::avg_pool(&x, window).unwrap();
            let cot = rand_t(y.dims(), 10);
            let g = avg_pool_backward(x.dims(), window, &cot).unwrap();
            assert_close(
                &g,
                &numeric_grad(&x, &cot, |t| ops::avg_pool(t, window).unwrap()),
                "pool",
            );
        }
        let x = rand_t(&[3, 4], 11);
        let w = rand_t(&[4, 2], 12);
        let b = rand_t(&[2], 13);
        let cot = rand_t(&[3, 2], 14);
        let (gx, gw, gb) = dense_backward(&x, &w, &cot).unwrap();
        assert_close(
            &gx,
            &numeric_grad(&x, &cot, |t| ops::dense(t, &w, &b).unwrap()),
            "dx",
        );
        assert_close(
            &gw,
            &numeric_grad(&w, &cot, |t| ops::dense(&x, t, &b).unwrap()),
            "dw",
        );
        assert_close(
            &gb,
            &numeric_grad(&b, &cot, |t| ops::dense(&x, &w, t).unwrap()),
            "db",
        );
        for kind in [Activation::Tanh, Activation::Sigmoid, Activation::Linear] {
            let x = rand_t(&[10], 15).map(|v| 3.0 * v);
            let cot = rand_t(&[10], 16);
            let g = activation_backward(&ops::activation(&x, kind), kind, &cot);
            assert_close(
                &g,
                &numeric_grad(&x, &cot, |t| ops::activation(t, kind)),
                "act",
            );
        }
    }

    #[test]
    fn attention_vjp_includes_normalizer() {
        for dims in [vec![3, 4, 2], vec![2, 3, 4, 2]] {
            let xa = rand_t(&dims, 17);
            let w = rand_t(&[1, 1, 2, 1], 18).map(|v| 2.0 * v);
            let b = rand_t(&[1], 19);
            let mut mdims = dims.clone();
            *mdims.last_mut().unwrap() = 1;
            let cot = rand_t(&mdims, 20);
            let (gx, gw, gb) = attention_mask_backward(&xa, &w, &b, &cot).unwrap();
            let f = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
                tsm::attention_mask(x, w, b).unwrap()
            };
            assert_close(&gx, &numeric_grad(&xa, &cot, |t| f(t, &w, &b)), "xa");
            assert_close(&gw, &numeric_grad(&w, &cot, |t| f(&xa, t, &b)), "w");
            assert_close(&gb, &numeric_grad(&b, &cot, |t| f(&xa, &w, t)), "b");
        }
    }

    #[test]
    fn apply_mask_and_shift_vjps() {
        let x = rand_t(&[4, 3, 3, 2], 21);
        for m in [rand_t(&[3, 3, 1], 22), rand_t(&[4, 3, 3, 1], 23)] {
            let cot = rand_t(x.dims(), 24);
            let (gx, gm) = apply_mask_backward(&x, &m, &cot).unwrap();
            assert_close(
                &gx,
                &numeric_grad(&x, &cot, |t| tsm::apply_mask(t, &m).unwrap()),
                "x",
            );
            assert_close(
                &gm,
                &numeric_grad(&m, &cot, |t| tsm::apply_mask(&x, t).unwrap()),
                "m",
            );
        }
        let x = rand_t(&[4, 2, 2, 5], 25);
        let spec = ShiftSpec::thirds(5, 2);
        let cot = rand_t(x.dims(), 26);
        let g = tsm::temporal_shift_adjoint(&cot, &spec).unwrap();
        assert_close(
            &g,
            &numeric_grad(&x, &cot, |t| tsm::temporal_shift(t, &spec).unwrap()),
            "shift",
        );
    }

    #[test]
    fn shift_adjoint_is_reverse_index_remap() {
        // <shift(x), g> == <x, shift_adjoint(g)> and boundary rows are zero
        let spec = ShiftSpec::thirds(3, 3);
        let g = Tensor::from_fn(&[3, 1, 1, 3], |i| (i + 1) as f64);
        let a = tsm::temporal_shift_adjoint(&g, &spec).unwrap();
        // advanced channel 0: frame t read t+1, so grad lands on t+1, frame 0 gets none
        assert_eq!(
            (0..3).map(|f| a.at(&[f, 0, 0, 0])).collect::<Vec<_>>(),
            vec![0.0, 1.0, 4.0]
        );
        // delayed channel 1: frame t read t-1, last frame gets none
        assert_eq!(
            (0..3).map(|f| a.at(&[f, 0, 0, 1])).collect::<Vec<_>>(),
            vec![5.0, 8.0, 0.0]
        );
        assert_eq!(
            (0..3).map(|f| a.at(&[f, 0, 0, 2])).collect::<Vec<_>>(),
            vec![3.0, 6.0, 9.0]
        );
    }

    #[test]
    fn l1_subgradient_at_zero_is_zero() {
        let mut tape = Tape::<f64>::new();
        let p = tape.param_from("p", Tensor::new(vec![3, 1], vec![1.0, 2.0, 3.0]).unwrap());
        let loss = tape.l1(p, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(tape.scalar(loss), 0.0);
        let g = tape.backward(loss).unwrap();
        assert!(g.get("p").unwrap().data().iter().all(|&v| v == 0.0));
    }
}
