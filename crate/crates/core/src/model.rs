//! The convolutional attention network family.
//!
//! Every architecture has a motion branch (normalized difference frames) and
//! an appearance branch (raw frames), each with four 3×3 convolutions.
//! After the second and fourth convolution the appearance features produce a
//! soft attention mask that gates the motion features, followed by 2×2
//! average pooling and dropout. Per-frame dense heads emit one value per
//! frame.
//!
//! | arch     | motion convs       | appearance input      | masks      |
//! |----------|--------------------|-----------------------|------------|
//! | `can2d`  | 2D                 | all window frames, 2D | per frame  |
//! | `can3d`  | 3D                 | all window frames, 3D | per frame  |
//! | `hybrid` | 3D                 | window mean frame, 2D | one/window |
//! | `tscan`  | temporal shift + 2D| window mean frame, 2D | one/window |
//!
//! The forward pass is written once against [`Exec`], which is implemented
//! both by the plain evaluator [`Eager`] and by the gradient tape.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{self, Activation, PoolWindow};
use crate::rng;
use crate::tensor::{Scalar, Tensor};
use crate::tsm::{self, ShiftSpec};
use crate::vtf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Can2d,
    Can3d,
    Hybrid,
    Tscan,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Can2d, Arch::Can3d, Arch::Hybrid, Arch::Tscan];

    /// Whether the appearance branch sees a single window-averaged frame.
    pub fn averaged_appearance(self) -> bool {
        matches!(self, Arch::Hybrid | Arch::Tscan)
    }

    pub fn is_temporal(self) -> bool {
        !matches!(self, Arch::Can2d)
    }

    fn motion_conv(self) -> ConvKind {
        match self {
            Arch::Can2d | Arch::Tscan => ConvKind::D2,
            Arch::Can3d | Arch::Hybrid => ConvKind::D3,
        }
    }

    fn appearance_conv(self) -> ConvKind {
        match self {
            Arch::Can3d => ConvKind::D3,
            _ => ConvKind::D2,
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Arch::Can2d => "can2d",
            Arch::Can3d => "can3d",
            Arch::Hybrid => "hybrid",
            Arch::Tscan => "tscan",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ConvKind {
    D2,
    D3,
}

/// How a `tscan` motion branch partitions channels for the temporal shift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftPolicy {
    /// `floor(C/3)` channels each direction.
    #[default]
    Thirds,
    /// No channels shifted.
    Disabled,
}

fn default_window_len() -> usize {
    10
}
fn default_input_size() -> usize {
    36
}
fn default_filters() -> [usize; 4] {
    [32, 32, 64, 64]
}
fn default_hidden() -> usize {
    128
}
fn default_dropout() -> [f64; 2] {
    [0.25, 0.5]
}

/// Architecture descriptor; serialized as the model JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub arch: Arch,
    #[serde(default)]
    pub multi_task: bool,
    #[serde(default = "default_window_len")]
    pub window_len: usize,
    /// Square input side in pixels.
    #[serde(default = "default_input_size")]
    pub input_size: usize,
    #[serde(default = "default_filters")]
    pub filters: [usize; 4],
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// `[after each pooling stage, before the output layer]`.
    #[serde(default = "default_dropout")]
    pub dropout: [f64; 2],
    #[serde(default)]
    pub shift: ShiftPolicy,
}

impl ModelSpec {
    pub fn new(arch: Arch) -> Self {
        Self {
            arch,
            multi_task: false,
            window_len: default_window_len(),
            input_size: default_input_size(),
            filters: default_filters(),
            hidden: default_hidden(),
            dropout: default_dropout(),
            shift: ShiftPolicy::Thirds,
        }
    }

    pub fn multi_task(mut self, on: bool) -> Self {
        self.multi_task = on;
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "model spec";
        if self.input_size < 4 {
            return Err(Error::invalid(
                OP,
                format!("input_size {} < 4", self.input_size),
            ));
        }
        if self.window_len == 0 || (self.arch.is_temporal() && self.window_len < 2) {
            return Err(Error::invalid(
                OP,
                format!("window_len {} too small for {}", self.window_len, self.arch),
            ));
        }
        if self.filters.contains(&0) || self.hidden == 0 {
            return Err(Error::invalid(
                OP,
                "filter counts and hidden width must be positive",
            ));
        }
        if self.dropout.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::invalid(
                OP,
                format!("dropout rates {:?} outside [0, 1)", self.dropout),
            ));
        }
        Ok(())
    }

    /// Side length after both pooling stages.
    pub fn pooled_size(&self) -> usize {
        self.input_size / 2 / 2
    }

    /// Features per frame entering the dense head.
    pub fn flat_features(&self) -> usize {
        self.pooled_size() * self.pooled_size() * self.filters[3]
    }

    pub fn heads(&self) -> &'static [&'static str] {
        if self.multi_task {
            &["bvp", "resp"]
        } else {
            &["bvp"]
        }
    }

    pub fn shift_spec(&self, channels: usize) -> ShiftSpec {
        match self.shift {
            ShiftPolicy::Thirds => ShiftSpec::thirds(channels, self.window_len),
            ShiftPolicy::Disabled => ShiftSpec::disabled(channels, self.window_len),
        }
    }

    /// Every parameter name with its shape, in canonical order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let chans = [
            3,
            self.filters[0],
            self.filters[1],
            self.filters[2],
            self.filters[3],
        ];
        for (branch, kind) in [
            ("motion", self.arch.motion_conv()),
            ("appearance", self.arch.appearance_conv()),
        ] {
            for layer in 0..4 {
                let (cin, cout) = (chans[layer], chans[layer + 1]);
                let w = match kind {
                    ConvKind::D2 => vec![3, 3, cin, cout],
                    ConvKind::D3 => vec![3, 3, 3, cin, cout],
                };
                out.push((format!("{branch}.conv{}.w", layer + 1), w));
                out.push((format!("{branch}.conv{}.b", layer + 1), vec![cout]));
            }
        }
        out.push(("attn1.w".into(), vec![1, 1, self.filters[1], 1]));
        out.push(("attn1.b".into(), vec![1]));
        out.push(("attn2.w".into(), vec![1, 1, self.filters[3], 1]));
        out.push(("attn2.b".into(), vec![1]));
        for head in self.heads() {
            out.push((
                format!("{head}.fc1.w"),
                vec![self.flat_features(), self.hidden],
            ));
            out.push((format!("{head}.fc1.b"), vec![self.hidden]));
            out.push((format!("{head}.fc2.w"), vec![self.hidden, 1]));
            out.push((format!("{head}.fc2.b"), vec![1]));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, d)| d.iter().product::<usize>())
            .sum()
    }
}

/// Named parameter tensors. Also used for gradients and optimizer state,
/// which share the same names and shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet<S = f32> {
    params: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> Default for WeightSet<S> {
    fn default() -> Self {
        Self {
            params: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> WeightSet<S> {
    pub fn zeros_like_spec(spec: &ModelSpec) -> Self {
        let params = spec
            .param_shapes()
            .into_iter()
            .map(|(n, d)| (n, Tensor::zeros(&d)))
            .collect();
        Self { params }
    }

    pub fn zeros_like(other: &WeightSet<S>) -> Self {
        let params = other
            .params
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.dims())))
            .collect();
        Self { params }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.params
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<S>) {
        self.params.insert(name.into(), t);
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor<S>> {
        self.params.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<S>)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<S>)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> WeightSet<U> {
        WeightSet {
            params: self
                .params
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
        }
    }

    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((na, a), (nb, b))| na == nb && a.bitwise_eq(b))
    }

    /// Checks names and shapes exactly against `spec`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let shapes = spec.param_shapes();
        for (name, dims) in &shapes {
            let t = self.get(name)?;
            if t.dims() != dims.as_slice() {
                return Err(Error::Shape {
                    op: "weights",
                    expected: dims.clone(),
                    found: t.dims().to_vec(),
                });
            }
        }
        if let Some(extra) = self
            .params
            .keys()
            .find(|n| !shapes.iter().any(|(s, _)| s == *n))
        {
            return Err(Error::UnexpectedParam(extra.clone()));
        }
        Ok(())
    }
}

impl WeightSet<f32> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let records: Vec<(&str, &Tensor<f32>)> =
            self.params.iter().map(|(n, t)| (n.as_str(), t)).collect();
        vtf::save(path, &records)
    }

    /// Loads a weights file and validates it against `spec`.
    pub fn load(path: impl AsRef<Path>, spec: &ModelSpec) -> Result<Self> {
        let params = vtf::load(path)?.into_iter().collect();
        let w = Self { params };
        w.validate(spec)?;
        Ok(w)
    }
}

/// Glorot-uniform weights drawn from one seeded stream in canonical
/// parameter order; biases zero.
pub fn build_model(spec: &ModelSpec, init_seed: u64) -> Result<WeightSet<f32>> {
    spec.validate()?;
    let mut r = rng::seeded(init_seed);
    let mut ws = WeightSet::default();
    for (name, dims) in spec.param_shapes() {
        let t = if name.ends_with(".b") {
            Tensor::zeros(&dims)
        } else {
            let receptive: usize = dims[..dims.len() - 2].iter().product();
            let fan_in = receptive * dims[dims.len() - 2];
            let fan_out = receptive * dims[dims.len() - 1];
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Tensor::from_fn(&dims, |_| (limit * (2.0 * r.random::<f64>() - 1.0)) as f32)
        };
        ws.insert(name, t);
    }
    Ok(ws)
}

/// One model input window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowInput<S = f32> {
    /// `T×H×W×3` normalized difference frames.
    pub motion: Tensor<S>,
    /// `T×H×W×3` raw frames for `can2d`/`can3d`, or one `H×W×3` averaged
    /// frame for `hybrid`/`tscan`.
    pub appearance: Tensor<S>,
}

impl<S: Scalar> WindowInput<S> {
    /// Builds the input an architecture expects from difference frames and
    /// the matching raw frames.
    pub fn from_frames(arch: Arch, motion: Tensor<S>, raw: &Tensor<S>) -> Self {
        let appearance = if arch.averaged_appearance() {
            raw.mean_outer()
        } else {
            raw.clone()
        };
        Self { motion, appearance }
    }

    pub fn cast<U: Scalar>(&self) -> WindowInput<U> {
        WindowInput {
            motion: self.motion.cast(),
            appearance: self.appearance.cast(),
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let s = spec.input_size;
        let frames = [spec.window_len, s, s, 3];
        if self.motion.dims() != frames {
            return Err(Error::Shape {
                op: "window input (motion)",
                expected: frames.to_vec(),
                found: self.motion.dims().to_vec(),
            });
        }
        let expect: Vec<usize> = if spec.arch.averaged_appearance() {
            vec![s, s, 3]
        } else {
            frames.to_vec()
        };
        if self.appearance.dims() != expect.as_slice() {
            return Err(Error::Shape {
                op: "window input (appearance)",
                expected: expect,
                found: self.appearance.dims().to_vec(),
            });
        }
        self.motion.ensure_finite("motion input")?;
        self.appearance.ensure_finite("appearance input")
    }
}

/// Evaluation backend for the forward graph.
pub trait Exec<S: Scalar> {
    type V;

    fn input(&mut self, t: Tensor<S>) -> Self::V;
    fn param(&mut self, name: &str) -> Result<Self::V>;
    fn value<'a>(&'a self, v: &'a Self::V) -> &'a Tensor<S>;

    fn conv2d(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn conv3d(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn avg_pool(&mut self, x: &Self::V, window: PoolWindow) -> Result<Self::V>;
    fn dense(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn activation(&mut self, x: Self::V, kind: Activation) -> Self::V;
    fn temporal_shift(&mut self, x: &Self::V, spec: &ShiftSpec) -> Result<Self::V>;
    fn attention_mask(&mut self, xa: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn apply_mask(&mut self, x: &Self::V, mask: &Self::V) -> Result<Self::V>;
    /// Multiplies by a fixed mask (dropout).
    fn scale_by(&mut self, x: Self::V, mask: Tensor<S>) -> Result<Self::V>;
    fn reshape(&mut self, x: Self::V, dims: &[usize]) -> Result<Self::V>;
}

/// Plain evaluation; parameters are borrowed from the weight set.
pub struct Eager<'w, S: Scalar> {
    weights: &'w WeightSet<S>,
}

impl<'w, S: Scalar> Eager<'w, S> {
    pub fn new(weights: &'w WeightSet<S>) -> Self {
        Self { weights }
    }
}

impl<'w, S: Scalar> Exec<S> for Eager<'w, S> {
    type V = Cow<'w, Tensor<S>>;

    fn input(&mut self, t: Tensor<S>) -> Self::V {
        Cow::Owned(t)
    }
    fn param(&mut self, name: &str) -> Result<Self::V> {
        self.weights.get(name).map(Cow::Borrowed)
    }
    fn value<'a>(&'a self, v: &'a Self::V) -> &'a Tensor<S> {
        v
    }
    fn conv2d(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V> {
        ops::conv2d(x, w, b).map(Cow::Owned)
    }
    fn conv3d(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V> {
        ops::conv3d(x, w, b).map(Cow::Owned)
    }
    fn avg_pool(&mut self, x: &Self::V, window: PoolWindow) -> Result<Self::V> {
        ops::avg_pool(x, window).map(Cow::Owned)
    }
    fn dense(&mut self, x: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V> {
        ops::dense(x, w, b).map(Cow::Owned)
    }
    fn activation(&mut self, x: Self::V, kind: Activation) -> Self::V {
        let mut t = x.into_owned();
        ops::activation_in_place(&mut t, kind);
        Cow::Owned(t)
    }
    fn temporal_shift(&mut self, x: &Self::V, spec: &ShiftSpec) -> Result<Self::V> {
        tsm::temporal_shift(x, spec).map(Cow::Owned)
    }
    fn attention_mask(&mut self, xa: &Self::V, w: &Self::V, b: &Self::V) -> Result<Self::V> {
        tsm::attention_mask(xa, w, b).map(Cow::Owned)
    }
    fn apply_mask(&mut self, x: &Self::V, mask: &Self::V) -> Result<Self::V> {
        tsm::apply_mask(x, mask).map(Cow::Owned)
    }
    fn scale_by(&mut self, x: Self::V, mask: Tensor<S>) -> Result<Self::V> {
        ops::mul(&x, &mask).map(Cow::Owned)
    }
    fn reshape(&mut self, x: Self::V, dims: &[usize]) -> Result<Self::V> {
        x.into_owned().reshape(dims).map(Cow::Owned)
    }
}

/// Per-head outputs of one forward pass, each `T×1`.
pub struct HeadValues<V> {
    pub bvp: V,
    pub resp: Option<V>,
}

/// Dropout sites, used to key per-site mask seeds.
#[derive(Clone, Copy)]
enum DropSite {
    MotionPool1 = 0,
    AppearancePool1 = 1,
    MotionPool2 = 2,
    Head0 = 3,
}

fn dropout<S: Scalar, E: Exec<S>>(
    exec: &mut E,
    x: E::V,
    rate: f64,
    train_seed: Option<u64>,
    site: u64,
) -> Result<E::V> {
    match train_seed {
        Some(seed) if rate > 0.0 => {
            let dims = exec.value(&x).dims().to_vec();
            let mask = ops::dropout_mask(&dims, rate, rng::derive_seed(seed, site))?;
            exec.scale_by(x, mask)
        }
        _ => Ok(x),
    }
}

fn conv_layer<S: Scalar, E: Exec<S>>(
    exec: &mut E,
    x: &E::V,
    kind: ConvKind,
    prefix: &str,
) -> Result<E::V> {
    let w = exec.param(&format!("{prefix}.w"))?;
    let b = exec.param(&format!("{prefix}.b"))?;
    let y = match kind {
        ConvKind::D2 => exec.conv2d(x, &w, &b)?,
        ConvKind::D3 => exec.conv3d(x, &w, &b)?,
    };
    Ok(exec.activation(y, Activation::Tanh))
}

fn motion_conv<S: Scalar, E: Exec<S>>(
    exec: &mut E,
    spec: &ModelSpec,
    x: &E::V,
    layer: usize,
) -> Result<E::V> {
    let prefix = format!("motion.conv{layer}");
    if spec.arch == Arch::Tscan {
        let c = exec.value(x).dims()[3];
        let shifted = exec.temporal_shift(x, &spec.shift_spec(c))?;
        conv_layer(exec, &shifted, ConvKind::D2, &prefix)
    } else {
        conv_layer(exec, x, spec.arch.motion_conv(), &prefix)
    }
}

fn attention_bridge<S: Scalar, E: Exec<S>>(
    exec: &mut E,
    motion: &E::V,
    appearance: &E::V,
    idx: usize,
) -> Result<E::V> {
    let w = exec.param(&format!("attn{idx}.w"))?;
    let b = exec.param(&format!("attn{idx}.b"))?;
    let mask = exec.attention_mask(appearance, &w, &b)?;
    exec.apply_mask(motion, &mask)
}

/// Builds the forward graph on any backend. `train_seed` enables dropout
/// with masks derived from that seed; `None` is inference.
pub fn forward_graph<S: Scalar, E: Exec<S>>(
    exec: &mut E,
    spec: &ModelSpec,
    input: &WindowInput<S>,
    train_seed: Option<u64>,
) -> Result<HeadValues<E::V>> {
    input.validate(spec)?;
    let t = spec.window_len;
    let s = spec.input_size;
    let app_kind = spec.arch.appearance_conv();
    let [rate_pool, rate_head] = spec.dropout;

    let motion = exec.input(input.motion.clone());
    let appearance = if spec.arch.averaged_appearance() {
        exec.input(input.appearance.clone().reshape(&[1, s, s, 3])?)
    } else {
        exec.input(input.appearance.clone())
    };

    let m1 = motion_conv(exec, spec, &motion, 1)?;
    let m2 = motion_conv(exec, spec, &m1, 2)?;
    let a1 = conv_layer(exec, &appearance, app_kind, "appearance.conv1")?;
    let a2 = conv_layer(exec, &a1, app_kind, "appearance.conv2")?;

    let g1 = attention_bridge(exec, &m2, &a2, 1)?;
    let p1 = exec.avg_pool(&g1, PoolWindow::Spatial)?;
    let d1 = dropout(
        exec,
        p1,
        rate_pool,
        train_seed,
        DropSite::MotionPool1 as u64,
    )?;
    let ap1 = exec.avg_pool(&a2, PoolWindow::Spatial)?;
    let ad1 = dropout(
        exec,
        ap1,
        rate_pool,
        train_seed,
        DropSite::AppearancePool1 as u64,
    )?;

    let m3 = motion_conv(exec, spec, &d1, 3)?;
    let m4 = motion_conv(exec, spec, &m3, 4)?;
    let a3 = conv_layer(exec, &ad1, app_kind, "appearance.conv3")?;
    let a4 = conv_layer(exec, &a3, app_kind, "appearance.conv4")?;

    let g2 = attention_bridge(exec, &m4, &a4, 2)?;
    let p2 = exec.avg_pool(&g2, PoolWindow::Spatial)?;
    let d2 = dropout(
        exec,
        p2,
        rate_pool,
        train_seed,
        DropSite::MotionPool2 as u64,
    )?;
    let flat = exec.reshape(d2, &[t, spec.flat_features()])?;

    let mut heads = Vec::with_capacity(2);
    for (i, head) in spec.heads().iter().enumerate() {
        let w1 = exec.param(&format!("{head}.fc1.w"))?;
        let b1 = exec.param(&format!("{head}.fc1.b"))?;
        let h = exec.dense(&flat, &w1, &b1)?;
        let h = exec.activation(h, Activation::Tanh);
        let h = dropout(
            exec,
            h,
            rate_head,
            train_seed,
            DropSite::Head0 as u64 + i as u64,
        )?;
        let w2 = exec.param(&format!("{head}.fc2.w"))?;
        let b2 = exec.param(&format!("{head}.fc2.b"))?;
        heads.push(exec.dense(&h, &w2, &b2)?);
    }
    let mut heads = heads.into_iter();
    Ok(HeadValues {
        bvp: heads.next().expect("at least one head"),
        resp: heads.next(),
    })
}

/// Per-frame head outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput<S = f32> {
    pub bvp: Vec<S>,
    pub resp: Option<Vec<S>>,
}

/// Runs one window through the network. In `train_mode` dropout masks are
/// derived from `seed`; otherwise `seed` is unused.
pub fn forward<S: Scalar>(
    spec: &ModelSpec,
    weights: &WeightSet<S>,
    input: &WindowInput<S>,
    train_mode: bool,
    seed: u64,
) -> Result<ForwardOutput<S>> {
    let mut exec = Eager::new(weights);
    let heads = forward_graph(&mut exec, spec, input, train_mode.then_some(seed))?;
    Ok(ForwardOutput {
        bvp: heads.bvp.into_owned().into_data(),
        resp: heads.resp.map(|r| r.into_owned().into_data()),
    })
}
