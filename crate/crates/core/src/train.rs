//! Multi-task L1 loss, batch gradients, Adadelta and the training loop.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamTape;
use crate::error::{Error, Result};
use crate::model::{forward_graph, ModelSpec, WeightSet, WindowInput};
use crate::rng;
use crate::tensor::{Scalar, Tensor};
use crate::vtf;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight of the respiration term.
    pub alpha: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(
                "loss config",
                format!("alpha {} must be finite and >= 0", self.alpha),
            ));
        }
        Ok(())
    }
}

fn mean_abs<S: Scalar>(pred: &[S], target: &[S], what: &'static str) -> Result<S> {
    if pred.len() != target.len() {
        return Err(Error::DimMismatch {
            op: what,
            lhs_name: "prediction length",
            lhs: pred.len(),
            rhs_name: "target length",
            rhs: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid(what, "empty window"));
    }
    let sum: S = pred.iter().zip(target).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(sum / S::from_usize(pred.len()).unwrap())
}

/// `(1/T)Σ|b−b′| + α·(1/T)Σ|r−r′|`; the respiration term is dropped when
/// `resp` is `None`.
pub fn multitask_loss<S: Scalar>(
    bvp_pred: &[S],
    bvp: &[S],
    resp: Option<(&[S], &[S])>,
    cfg: &LossConfig,
) -> Result<S> {
    cfg.validate()?;
    let mut loss = mean_abs(bvp_pred, bvp, "pulse loss")?;
    if let Some((pred, target)) = resp {
        if pred.len() != bvp.len() {
            return Err(Error::DimMismatch {
                op: "multitask loss",
                lhs_name: "pulse length",
                lhs: bvp.len(),
                rhs_name: "respiration length",
                rhs: pred.len(),
            });
        }
        loss += S::from_f64_lossy(cfg.alpha) * mean_abs(pred, target, "respiration loss")?;
    }
    Ok(loss)
}

/// One training window with its per-frame targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSample<S = f32> {
    pub input: WindowInput<S>,
    pub bvp: Vec<S>,
    pub resp: Vec<S>,
}

impl<S: Scalar> TrainSample<S> {
    pub fn cast<U: Scalar>(&self) -> TrainSample<U> {
        let conv = |v: &[S]| {
            v.iter()
                .map(|x| U::from_f64_lossy(x.to_f64_lossy()))
                .collect()
        };
        TrainSample {
            input: self.input.cast(),
            bvp: conv(&self.bvp),
            resp: conv(&self.resp),
        }
    }
}

/// Loss and parameter gradients for one window. `train_seed` selects the
/// dropout masks; `None` disables dropout.
pub fn sample_gradients<S: Scalar>(
    spec: &ModelSpec,
    weights: &WeightSet<S>,
    sample: &TrainSample<S>,
    cfg: &LossConfig,
    train_seed: Option<u64>,
) -> Result<(S, WeightSet<S>)> {
    cfg.validate()?;
    let mut exec = ParamTape::new(weights);
    let heads = forward_graph(&mut exec, spec, &sample.input, train_seed)?;
    let tape = &mut exec.tape;
    let mut loss = tape.l1(heads.bvp, &sample.bvp)?;
    if let Some(resp) = heads.resp {
        let r = tape.l1(resp, &sample.resp)?;
        loss = tape.add_scaled(loss, r, S::from_f64_lossy(cfg.alpha));
    }
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    let mut grads = tape.backward(loss)?;
    // parameters the graph never touched still get an explicit zero
    for (name, w) in weights.iter() {
        if grads.get(name).is_err() {
            grads.insert(name.clone(), Tensor::zeros(w.dims()));
        }
    }
    Ok((value, grads))
}

/// Mean loss and mean gradients over a batch. Examples run in parallel and
/// are reduced in ascending index order. Example `i` uses dropout seed
/// `derive_seed(seed, i)`.
pub fn backward<S: Scalar>(
    spec: &ModelSpec,
    weights: &WeightSet<S>,
    batch: &[&TrainSample<S>],
    cfg: &LossConfig,
    seed: Option<u64>,
) -> Result<(S, WeightSet<S>)> {
    if batch.is_empty() {
        return Err(Error::invalid("backward", "empty batch"));
    }
    let per_example: Vec<Result<(S, WeightSet<S>)>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            sample_gradients(
                spec,
                weights,
                s,
                cfg,
                seed.map(|sd| rng::derive_seed(sd, i as u64)),
            )
        })
        .collect();
    let mut total = WeightSet::zeros_like(weights);
    let mut loss = S::zero();
    for r in per_example {
        let (l, g) = r?;
        loss += l;
        for (name, acc) in total.iter_mut() {
            for (a, &b) in acc.data_mut().iter_mut().zip(g.get(name)?.data()) {
                *a += b;
            }
        }
    }
    let n = S::from_usize(batch.len()).unwrap();
    for (_, acc) in total.iter_mut() {
        for a in acc.data_mut() {
            *a /= n;
        }
    }
    Ok((loss / n, total))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaConfig {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self {
            lr: 1.0,
            rho: 0.95,
            eps: 1e-7,
        }
    }
}

/// Running averages of squared gradients and squared updates.
#[derive(Clone, Debug)]
pub struct AdadeltaState<S = f32> {
    pub cfg: AdadeltaConfig,
    pub grad_sq: WeightSet<S>,
    pub update_sq: WeightSet<S>,
}

impl<S: Scalar> AdadeltaState<S> {
    pub fn new(weights: &WeightSet<S>, cfg: AdadeltaConfig) -> Self {
        Self {
            cfg,
            grad_sq: WeightSet::zeros_like(weights),
            update_sq: WeightSet::zeros_like(weights),
        }
    }
}

/// ```text
/// E[g²] ← ρE[g²] + (1−ρ)g²
/// Δ     ← −√(E[Δ²]+ε)/√(E[g²]+ε) · g
/// E[Δ²] ← ρE[Δ²] + (1−ρ)Δ²
/// w     ← w + lr·Δ
/// ```
pub fn adadelta_step<S: Scalar>(
    weights: &mut WeightSet<S>,
    grads: &WeightSet<S>,
    state: &mut AdadeltaState<S>,
) -> Result<()> {
    if grads.len() != weights.len() {
        return Err(Error::DimMismatch {
            op: "adadelta",
            lhs_name: "weight tensors",
            lhs: weights.len(),
            rhs_name: "gradient tensors",
            rhs: grads.len(),
        });
    }
    let rho = S::from_f64_lossy(state.cfg.rho);
    let one_m_rho = S::from_f64_lossy(1.0 - state.cfg.rho);
    let eps = S::from_f64_lossy(state.cfg.eps);
    let lr = S::from_f64_lossy(state.cfg.lr);
    for (name, w) in weights.iter_mut() {
        let g = grads.get(name)?;
        if g.dims() != w.dims() {
            return Err(Error::Shape {
                op: "adadelta",
                expected: w.dims().to_vec(),
                found: g.dims().to_vec(),
            });
        }
        let eg = state.grad_sq.get_mut(name)?.data_mut();
        let ed = state.update_sq.get_mut(name)?.data_mut();
        for (((wv, &gv), egv), edv) in w.data_mut().iter_mut().zip(g.data()).zip(eg).zip(ed) {
            *egv = rho * *egv + one_m_rho * gv * gv;
            let delta = -((*edv + eps).sqrt() / (*egv + eps).sqrt()) * gv;
            *edv = rho * *edv + one_m_rho * delta * delta;
            *wv += lr * delta;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub optimizer: AdadeltaConfig,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: 32,
            seed,
            loss: LossConfig::default(),
            optimizer: AdadeltaConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub weights: WeightSet<f32>,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Minibatch Adadelta. Each epoch visits the windows in the order
/// `permutation(n, derive_seed(seed, epoch))`; batch `b` of epoch `e` draws
/// dropout masks from `derive_seed(derive_seed(seed, e), b)`.
pub fn train(
    spec: &ModelSpec,
    initial: WeightSet<f32>,
    data: &[TrainSample<f32>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainResult> {
    spec.validate()?;
    initial.validate(spec)?;
    cfg.loss.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("train", "empty dataset"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("train", "batch size must be positive"));
    }
    let mut weights = initial;
    let mut state = AdadeltaState::new(&weights, cfg.optimizer);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let epoch_seed = rng::derive_seed(cfg.seed, epoch as u64);
        let order = rng::permutation(data.len(), epoch_seed);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&TrainSample<f32>> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grads) = backward(
                spec,
                &weights,
                &batch,
                &cfg.loss,
                Some(rng::derive_seed(epoch_seed, b as u64)),
            )?;
            total += loss as f64 * batch.len() as f64;
            adadelta_step(&mut weights, &grads, &mut state)?;
        }
        let mean = total / data.len() as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(TrainResult {
        weights,
        loss_history: history,
    })
}

/// Mean inference-mode loss over a dataset.
pub fn evaluate_loss(
    spec: &ModelSpec,
    weights: &WeightSet<f32>,
    data: &[TrainSample<f32>],
    cfg: &LossConfig,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("evaluate_loss", "empty dataset"));
    }
    let losses: Vec<Result<f64>> = data
        .par_iter()
        .map(|s| {
            let out = crate::model::forward(spec, weights, &s.input, false, 0)?;
            let resp = out.resp.as_deref().map(|r| (r, s.resp.as_slice()));
            multitask_loss(&out.bvp, &s.bvp, resp, cfg).map(|l| l as f64)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / data.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub window_len: usize,
    pub input_size: usize,
    pub windows: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// One stored window. `raw` holds every raw frame so any architecture's
/// appearance input can be rebuilt from it.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredWindow {
    pub motion: Tensor<f32>,
    pub raw: Tensor<f32>,
    pub bvp: Vec<f32>,
    pub resp: Vec<f32>,
}

impl StoredWindow {
    pub fn to_sample(&self, spec: &ModelSpec) -> TrainSample<f32> {
        TrainSample {
            input: WindowInput::from_frames(spec.arch, self.motion.clone(), &self.raw),
            bvp: self.bvp.clone(),
            resp: self.resp.clone(),
        }
    }
}

/// Writes `window_00000.vtf`, ... plus the manifest.
pub fn save_dataset(dir: impl AsRef<Path>, windows: &[(StoredWindow, Split)]) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let first = windows
        .first()
        .ok_or_else(|| Error::invalid("save_dataset", "no windows"))?;
    let dims = first.0.motion.dims();
    let mut entries = Vec::with_capacity(windows.len());
    for (i, (w, split)) in windows.iter().enumerate() {
        let file = format!("window_{i:05}.vtf");
        let t = w.bvp.len();
        let bvp = Tensor::new(vec![t], w.bvp.clone())?;
        let resp = Tensor::new(vec![t], w.resp.clone())?;
        vtf::save(
            dir.join(&file),
            &[
                ("motion", &w.motion),
                ("appearance", &w.raw),
                ("bvp", &bvp),
                ("resp", &resp),
            ],
        )?;
        entries.push(ManifestEntry {
            file,
            split: *split,
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        window_len: dims[0],
        input_size: dims[1],
        windows: entries,
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn load_window(path: impl AsRef<Path>) -> Result<StoredWindow> {
    let mut records = vtf::load(path)?;
    let motion = vtf::take(&mut records, "motion")?;
    let raw = vtf::take(&mut records, "appearance")?;
    let bvp = vtf::take(&mut records, "bvp")?.into_data();
    let resp = vtf::take(&mut records, "resp")?.into_data();
    if raw.dims() != motion.dims() {
        return Err(Error::Shape {
            op: "dataset window",
            expected: motion.dims().to_vec(),
            found: raw.dims().to_vec(),
        });
    }
    let t = motion.dims()[0];
    if bvp.len() != t || resp.len() != t {
        return Err(Error::Format(format!("targets must have {t} entries")));
    }
    Ok(StoredWindow {
        motion,
        raw,
        bvp,
        resp,
    })
}

/// Loads the windows of one split, in manifest order.
pub fn load_dataset(dir: impl AsRef<Path>, split: Split) -> Result<(Manifest, Vec<StoredWindow>)> {
    let dir: PathBuf = dir.as_ref().to_path_buf();
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported manifest schema_version {}",
            manifest.schema_version
        )));
    }
    let windows = manifest
        .windows
        .iter()
        .filter(|e| e.split == split)
        .map(|e| load_window(dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, windows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let cfg = LossConfig::default();
        let z = multitask_loss(
            &[1.0, 2.0],
            &[1.0, 2.0],
            Some((&[0.0, 0.0][..], &[0.0, 0.0][..])),
            &cfg,
        )
        .unwrap();
        assert_eq!(z, 0.0);
        let c = multitask_loss(
            &[0.2f64, -0.2],
            &[0.0, 0.0],
            Some((&[1.0][..], &[1.0][..])),
            &cfg,
        );
        assert!(c.is_err());
        let c = multitask_loss(
            &[0.2f64, 1.2],
            &[0.0, 1.0],
            Some((&[1.0, 2.0][..], &[1.0, 2.0][..])),
            &cfg,
        )
        .unwrap();
        assert!((c - 0.2).abs() < 1e-12);
        assert!(multitask_loss(&[1.0], &[1.0, 2.0], None, &cfg).is_err());
        assert!(multitask_loss(&[1.0], &[1.0], None, &LossConfig { alpha: -1.0 }).is_err());
    }

    #[test]
    fn adadelta_first_step_matches_scalar_formula() {
        let mut w = WeightSet::<f64>::default();
        w.insert("x", Tensor::new(vec![2], vec![1.0, -1.0]).unwrap());
        let mut g = WeightSet::<f64>::default();
        g.insert("x", Tensor::new(vec![2], vec![0.3, -2.0]).unwrap());
        let cfg = AdadeltaConfig::default();
        let mut st = AdadeltaState::new(&w, cfg);
        adadelta_step(&mut w, &g, &mut st).unwrap();
        for (i, (&w0, &gv)) in [1.0, -1.0].iter().zip(&[0.3, -2.0]).enumerate() {
            let upd = -cfg.lr * (cfg.eps / ((1.0 - cfg.rho) * gv * gv + cfg.eps)).sqrt() * gv;
            assert_eq!(w.get("x").unwrap().data()[i], w0 + upd);
        }
    }

    #[test]
    fn adadelta_zero_gradient_decays_accumulators() {
        let mut w = WeightSet::<f64>::default();
        w.insert("x", Tensor::new(vec![1], vec![0.5]).unwrap());
        let mut st = AdadeltaState::new(&w, AdadeltaConfig::default());
        st.grad_sq.get_mut("x").unwrap().data_mut()[0] = 2.0;
        st.update_sq.get_mut("x").unwrap().data_mut()[0] = 4.0;
        let g = WeightSet::zeros_like(&w);
        adadelta_step(&mut w, &g, &mut st).unwrap();
        assert_eq!(w.get("x").unwrap().data()[0], 0.5);
        assert_eq!(st.grad_sq.get("x").unwrap().data()[0], 0.95 * 2.0);
        assert_eq!(st.update_sq.get("x").unwrap().data()[0], 0.95 * 4.0);
    }

    #[test]
    fn adadelta_rejects_shape_mismatch() {
        let mut w = WeightSet::<f32>::default();
        w.insert("x", Tensor::zeros(&[2]));
        let mut g = WeightSet::<f32>::default();
        g.insert("x", Tensor::zeros(&[3]));
        let mut st = AdadeltaState::new(&w, AdadeltaConfig::default());
        assert!(matches!(
            adadelta_step(&mut w, &g, &mut st),
            Err(Error::Shape { .. })
        ));
    }
}
