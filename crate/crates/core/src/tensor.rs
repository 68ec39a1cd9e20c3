//! Dense row-major tensors.
//!
//! Layout is channels-last with the last dimension varying fastest. Video
//! and feature maps use `T×H×W×C`; single frames use `H×W×C`.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

use crate::error::{Error, Result};

/// Highest rank a tensor may have.
pub const MAX_RANK: usize = 5;

/// Floating-point element type. Networks run in `f32`; `f64` is used for
/// gradient verification.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Sum + Default + Debug + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S = f32> {
    dims: Vec<usize>,
    data: Vec<S>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > MAX_RANK {
        return Err(Error::invalid(
            "tensor",
            format!("rank {} outside 1..={MAX_RANK}", dims.len()),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("tensor", format!("zero extent in {dims:?}")));
    }
    Ok(dims.iter().product())
}

impl<S: Scalar> Tensor<S> {
    pub fn new(dims: impl Into<Vec<usize>>, data: Vec<S>) -> Result<Self> {
        let dims = dims.into();
        let len = check_dims(&dims)?;
        if len != data.len() {
            return Err(Error::DimMismatch {
                op: "tensor",
                lhs_name: "product(dims)",
                lhs: len,
                rhs_name: "data length",
                rhs: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    /// Panics on invalid dims; for internal construction with known shapes.
    pub fn zeros(dims: &[usize]) -> Self {
        Self::full(dims, S::zero())
    }

    pub fn full(dims: &[usize], value: S) -> Self {
        let len = check_dims(dims).expect("invalid tensor dims");
        Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(usize) -> S) -> Self {
        let len = check_dims(dims).expect("invalid tensor dims");
        Self {
            dims: dims.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn scalar(v: S) -> Self {
        Self {
            dims: vec![1],
            data: vec![v],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn reshape(self, dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        if len != self.data.len() {
            return Err(Error::Shape {
                op: "reshape",
                expected: self.dims,
                found: dims.to_vec(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> S {
        self.sum() / S::from_usize(self.len()).unwrap()
    }

    /// Row-major flat offset of a full index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn at(&self, index: &[usize]) -> S {
        self.data[self.offset(index)]
    }

    /// Sub-tensor along the leading axis (e.g. one frame of a clip).
    pub fn slice_outer(&self, i: usize) -> Tensor<S> {
        let inner: usize = self.dims[1..].iter().product();
        let dims = if self.rank() == 1 {
            vec![1]
        } else {
            self.dims[1..].to_vec()
        };
        Tensor {
            dims,
            data: self.data[i * inner..(i + 1) * inner].to_vec(),
        }
    }

    /// Contiguous range `[start, end)` along the leading axis.
    pub fn narrow_outer(&self, start: usize, end: usize) -> Result<Tensor<S>> {
        if start >= end || end > self.dims[0] {
            return Err(Error::invalid(
                "narrow_outer",
                format!("range {start}..{end} outside extent {}", self.dims[0]),
            ));
        }
        let inner: usize = self.dims[1..].iter().product();
        let mut dims = self.dims.clone();
        dims[0] = end - start;
        Ok(Tensor {
            dims,
            data: self.data[start * inner..end * inner].to_vec(),
        })
    }

    /// Stacks equally-shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor<S>]) -> Result<Tensor<S>> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("stack", "no tensors"))?;
        let mut dims = vec![items.len()];
        dims.extend_from_slice(first.dims());
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.dims() != first.dims() {
                return Err(Error::Shape {
                    op: "stack",
                    expected: first.dims().to_vec(),
                    found: t.dims().to_vec(),
                });
            }
            data.extend_from_slice(t.data());
        }
        Tensor::new(dims, data)
    }

    /// Mean over the leading axis, e.g. a clip window averaged to one frame.
    pub fn mean_outer(&self) -> Tensor<S> {
        let n = self.dims[0];
        let inner: usize = self.dims[1..].iter().product();
        let mut out = vec![S::zero(); inner];
        for chunk in self.data.chunks_exact(inner) {
            for (o, &v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        let inv = S::one() / S::from_usize(n).unwrap();
        for o in &mut out {
            *o *= inv;
        }
        Tensor {
            dims: self.dims[1..].to_vec(),
            data: out,
        }
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bitwise_eq(&self, other: &Tensor<S>) -> bool {
        self.dims == other.dims
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_f64_lossy().to_bits() == b.to_f64_lossy().to_bits())
    }
}

/// A `T×H×W×3` frame stack with its sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    pub frames: Tensor<f32>,
    pub fps: f64,
}

impl VideoClip {
    pub fn new(frames: Tensor<f32>, fps: f64) -> Result<Self> {
        if frames.rank() != 4 || frames.dims()[3] != 3 {
            return Err(Error::invalid(
                "video clip",
                format!("expected T×H×W×3 frames, got {:?}", frames.dims()),
            ));
        }
        if !(fps > 0.0) {
            return Err(Error::invalid(
                "video clip",
                format!("fps must be > 0, got {fps}"),
            ));
        }
        Ok(Self { frames, fps })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.frames.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.frames.dims()[2]
    }

    pub fn frame(&self, t: usize) -> Tensor<f32> {
        self.frames.slice_outer(t)
    }
}
