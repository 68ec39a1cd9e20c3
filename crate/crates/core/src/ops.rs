//! Forward kernels for every layer of the network family.
//!
//! All kernels are pure and single-threaded. Each output element is
//! accumulated in a fixed order (bias first, then kernel taps in row-major
//! order, channels innermost), so results are bitwise reproducible.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Scalar, Tensor};

fn expect_rank<S: Scalar>(op: &'static str, t: &Tensor<S>, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::invalid(
            op,
            format!("expected rank {rank}, got dims {:?}", t.dims()),
        ));
    }
    Ok(())
}

fn expect_extent(
    op: &'static str,
    lhs_name: &'static str,
    lhs: usize,
    rhs_name: &'static str,
    rhs: usize,
) -> Result<()> {
    if lhs != rhs {
        return Err(Error::DimMismatch {
            op,
            lhs_name,
            lhs,
            rhs_name,
            rhs,
        });
    }
    Ok(())
}

/// Zero-padded "same" 2D convolution applied to each frame of a
/// `T×H×W×Cin` input with a `K×K×Cin×Cout` kernel (K odd, 3 in the models).
pub fn conv2d<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    const OP: &str = "conv2d";
    expect_rank(OP, input, 4)?;
    expect_rank(OP, kernel, 4)?;
    let &[t, h, w, cin] = input.dims() else {
        unreachable!()
    };
    let &[kh, kw, kcin, cout] = kernel.dims() else {
        unreachable!()
    };
    if kh != kw || kh % 2 == 0 {
        return Err(Error::invalid(
            OP,
            format!("kernel must be square and odd, got {kh}×{kw}"),
        ));
    }
    expect_extent(OP, "input channels", cin, "kernel input channels", kcin)?;
    expect_extent(
        OP,
        "kernel output channels",
        cout,
        "bias length",
        bias.len(),
    )?;

    let pad = (kh / 2) as isize;
    let x = input.data();
    let k = kernel.data();
    let b = bias.data();
    let mut out = vec![S::zero(); t * h * w * cout];
    for f in 0..t {
        for y in 0..h {
            for xo in 0..w {
                let base = ((f * h + y) * w + xo) * cout;
                let acc = &mut out[base..base + cout];
                acc.copy_from_slice(b);
                for ky in 0..kh {
                    let iy = y as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = xo as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let xin = &x[((f * h + iy as usize) * w + ix as usize) * cin..][..cin];
                        let kbase = &k[(ky * kw + kx) * cin * cout..][..cin * cout];
                        for (ci, &xv) in xin.iter().enumerate() {
                            let wrow = &kbase[ci * cout..(ci + 1) * cout];
                            for (o, &wv) in acc.iter_mut().zip(wrow) {
                                *o += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![t, h, w, cout], out)
}

/// Zero-padded "same" convolution over `(T, H, W)` jointly with a
/// `K×K×K×Cin×Cout` kernel.
pub fn conv3d<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    const OP: &str = "conv3d";
    expect_rank(OP, input, 4)?;
    expect_rank(OP, kernel, 5)?;
    let &[t, h, w, cin] = input.dims() else {
        unreachable!()
    };
    let &[kt, kh, kw, kcin, cout] = kernel.dims() else {
        unreachable!()
    };
    if kt != kh || kh != kw || kh % 2 == 0 {
        return Err(Error::invalid(
            OP,
            format!("kernel must be cubic and odd, got {kt}×{kh}×{kw}"),
        ));
    }
    expect_extent(OP, "input channels", cin, "kernel input channels", kcin)?;
    expect_extent(
        OP,
        "kernel output channels",
        cout,
        "bias length",
        bias.len(),
    )?;

    let pad = (kh / 2) as isize;
    let x = input.data();
    let k = kernel.data();
    let b = bias.data();
    let mut out = vec![S::zero(); t * h * w * cout];
    for f in 0..t {
        for y in 0..h {
            for xo in 0..w {
                let base = ((f * h + y) * w + xo) * cout;
                let acc = &mut out[base..base + cout];
                acc.copy_from_slice(b);
                for kf in 0..kt {
                    let it = f as isize + kf as isize - pad;
                    if it < 0 || it >= t as isize {
                        continue;
                    }
                    for ky in 0..kh {
                        let iy = y as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = xo as isize + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let xin = &x
                                [((it as usize * h + iy as usize) * w + ix as usize) * cin..]
                                [..cin];
                            let kbase = &k[((kf * kh + ky) * kw + kx) * cin * cout..][..cin * cout];
                            for (ci, &xv) in xin.iter().enumerate() {
                                let wrow = &kbase[ci * cout..(ci + 1) * cout];
                                for (o, &wv) in acc.iter_mut().zip(wrow) {
                                    *o += xv * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![t, h, w, cout], out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolWindow {
    /// 2×2 over `(H, W)`, applied per frame.
    Spatial,
    /// 2×2×2 over `(T, H, W)`.
    Spatiotemporal,
}

/// Non-overlapping mean pooling with stride equal to the window. Odd
/// trailing extents are dropped. Accepts `T×H×W×C`, or `H×W×C` for
/// [`PoolWindow::Spatial`].
pub fn avg_pool<S: Scalar>(input: &Tensor<S>, window: PoolWindow) -> Result<Tensor<S>> {
    const OP: &str = "avg_pool";
    let (t, h, w, c) = match (input.dims(), window) {
        (&[h, w, c], PoolWindow::Spatial) => (1, h, w, c),
        (&[t, h, w, c], _) => (t, h, w, c),
        (dims, _) => {
            return Err(Error::invalid(
                OP,
                format!("unsupported input dims {dims:?} for {window:?}"),
            ))
        }
    };
    if h < 2 || w < 2 {
        return Err(Error::invalid(
            OP,
            format!("cannot pool spatial extent {h}×{w} by 2"),
        ));
    }
    let (ho, wo) = (h / 2, w / 2);
    let x = input.data();
    let idx = |f: usize, y: usize, xx: usize| ((f * h + y) * w + xx) * c;
    match window {
        PoolWindow::Spatial => {
            let quarter = S::from_f64_lossy(0.25);
            let mut out = vec![S::zero(); t * ho * wo * c];
            for f in 0..t {
                for y in 0..ho {
                    for xx in 0..wo {
                        let o = ((f * ho + y) * wo + xx) * c;
                        let p00 = idx(f, 2 * y, 2 * xx);
                        let p01 = idx(f, 2 * y, 2 * xx + 1);
                        let p10 = idx(f, 2 * y + 1, 2 * xx);
                        let p11 = idx(f, 2 * y + 1, 2 * xx + 1);
                        for ch in 0..c {
                            out[o + ch] =
                                (x[p00 + ch] + x[p01 + ch] + x[p10 + ch] + x[p11 + ch]) * quarter;
                        }
                    }
                }
            }
            let dims = if input.rank() == 3 {
                vec![ho, wo, c]
            } else {
                vec![t, ho, wo, c]
            };
            Tensor::new(dims, out)
        }
        PoolWindow::Spatiotemporal => {
            if t < 2 {
                return Err(Error::invalid(OP, "cannot pool temporal extent 1 by 2"));
            }
            let to = t / 2;
            let eighth = S::from_f64_lossy(0.125);
            let mut out = vec![S::zero(); to * ho * wo * c];
            for f in 0..to {
                for y in 0..ho {
                    for xx in 0..wo {
                        let o = ((f * ho + y) * wo + xx) * c;
                        let taps = [
                            idx(2 * f, 2 * y, 2 * xx),
                            idx(2 * f, 2 * y, 2 * xx + 1),
                            idx(2 * f, 2 * y + 1, 2 * xx),
                            idx(2 * f, 2 * y + 1, 2 * xx + 1),
                            idx(2 * f + 1, 2 * y, 2 * xx),
                            idx(2 * f + 1, 2 * y, 2 * xx + 1),
                            idx(2 * f + 1, 2 * y + 1, 2 * xx),
                            idx(2 * f + 1, 2 * y + 1, 2 * xx + 1),
                        ];
                        for ch in 0..c {
                            let mut s = S::zero();
                            for &p in &taps {
                                s += x[p + ch];
                            }
                            out[o + ch] = s * eighth;
                        }
                    }
                }
            }
            Tensor::new(vec![to, ho, wo, c], out)
        }
    }
}

/// Affine map `N×F · F×M + M`.
pub fn dense<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    const OP: &str = "dense";
    expect_rank(OP, input, 2)?;
    expect_rank(OP, weight, 2)?;
    let &[n, f] = input.dims() else {
        unreachable!()
    };
    let &[wf, m] = weight.dims() else {
        unreachable!()
    };
    expect_extent(OP, "input features", f, "weight rows", wf)?;
    expect_extent(OP, "weight columns", m, "bias length", bias.len())?;
    let x = input.data();
    let wd = weight.data();
    let mut out = vec![S::zero(); n * m];
    for (row, acc) in out.chunks_exact_mut(m).enumerate() {
        acc.copy_from_slice(bias.data());
        for (fi, &xv) in x[row * f..(row + 1) * f].iter().enumerate() {
            for (o, &wv) in acc.iter_mut().zip(&wd[fi * m..(fi + 1) * m]) {
                *o += xv * wv;
            }
        }
    }
    Tensor::new(vec![n, m], out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Linear,
}

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }
}

pub fn activation<S: Scalar>(input: &Tensor<S>, kind: Activation) -> Tensor<S> {
    input.map(|v| kind.apply(v))
}

pub fn activation_in_place<S: Scalar>(t: &mut Tensor<S>, kind: Activation) {
    if kind == Activation::Linear {
        return;
    }
    for v in t.data_mut() {
        *v = kind.apply(*v);
    }
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1/(1-rate)`.
///
/// Entries are drawn in row-major order, one `f64` per entry from
/// [`rng::seeded`]`(seed)`; an entry is dropped when the draw is `< rate`.
pub fn dropout_mask<S: Scalar>(dims: &[usize], rate: f64, seed: u64) -> Result<Tensor<S>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(
            "dropout_mask",
            format!("rate {rate} outside [0, 1)"),
        ));
    }
    let keep = S::from_f64_lossy(1.0 / (1.0 - rate));
    let mut r = rng::seeded(seed);
    let mut mask = Tensor::zeros(dims);
    for v in mask.data_mut() {
        let u: f64 = r.random();
        *v = if u < rate { S::zero() } else { keep };
    }
    Ok(mask)
}

/// Elementwise product of equally-shaped tensors.
pub fn mul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.dims() != b.dims() {
        return Err(Error::Shape {
            op: "mul",
            expected: a.dims().to_vec(),
            found: b.dims().to_vec(),
        });
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x * y)
        .collect();
    Tensor::new(a.dims().to_vec(), data)
}
