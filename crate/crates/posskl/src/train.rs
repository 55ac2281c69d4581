//! Linear softmax classifier trained under possibilistic supervision.
//!
//! Two objectives over the same affine score map: the projection objective
//! takes as target the KL projection of the current prediction onto the
//! admissible set of its annotation, recomputed every optimizer step and held
//! constant in the gradient; the fixed objective targets the antipignistic
//! probability of the annotation. Optimization is mini-batch Adam with an
//! additive L2 weight-decay gradient term.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::antipignistic::{poss_to_prob, PossVec};
use crate::dykstra::kl_project;
use crate::error::{Error, Result};
use crate::feasible::{build_feasible_set, FeasibleSet, GapPolicy};
use crate::simplex::{kl_divergence, ProbVec, CLIP_FLOOR};
use crate::synth::DatasetRecord;

/// Affine score map `x -> W x + b` with `W` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub n: usize,
    pub d: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            w: vec![0.0; n * d],
            b: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Target is the KL projection of the current prediction.
    Projection,
    /// Target is the fixed antipignistic probability of the annotation.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub learning_rate: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Defaults to 64 for up to 200 training items, 128 beyond.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Defaults to 80 for up to 200 training items, 60 beyond.
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    #[serde(default = "default_proj_tol")]
    pub proj_tol: f64,
    #[serde(default = "default_proj_max_cycles")]
    pub proj_max_cycles: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_weight_decay() -> f64 {
    1e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}
fn default_proj_tol() -> f64 {
    1e-8
}
fn default_proj_max_cycles() -> usize {
    2000
}

impl TrainConfig {
    pub fn new(objective: Objective, learning_rate: f64, seed: u64) -> Self {
        Self {
            objective,
            learning_rate,
            weight_decay: default_weight_decay(),
            batch_size: None,
            epochs: None,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_eps: default_adam_eps(),
            proj_tol: default_proj_tol(),
            proj_max_cycles: default_proj_max_cycles(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(
                "learning rate must be positive".into(),
            ));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter("weight decay must be >= 0".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        let beta_ok = |b: f64| b > 0.0 && b < 1.0;
        if !beta_ok(self.adam_beta1) || !beta_ok(self.adam_beta2) || self.adam_eps <= 0.0 {
            return Err(Error::InvalidParameter("bad Adam parameters".into()));
        }
        if !(self.proj_tol > 0.0 && self.proj_tol < 1.0) || self.proj_max_cycles == 0 {
            return Err(Error::InvalidParameter("bad projection parameters".into()));
        }
        Ok(())
    }

    pub fn resolved_batch_size(&self, n_train: usize) -> usize {
        self.batch_size
            .unwrap_or(if n_train <= 200 { 64 } else { 128 })
    }

    pub fn resolved_epochs(&self, n_train: usize) -> usize {
        self.epochs.unwrap_or(if n_train <= 200 { 80 } else { 60 })
    }

    /// Hex SHA-256 of the serialized config, written into checkpoints.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serializable");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Per-record immutables built once: the admissible set of the annotation
/// and its antipignistic probability.
#[derive(Debug, Clone)]
pub struct RecordContext {
    pub fs: FeasibleSet,
    pub p_dot: ProbVec,
}

impl RecordContext {
    pub fn new(pi: &PossVec) -> Result<Self> {
        Ok(Self {
            fs: build_feasible_set(pi, &GapPolicy::default())?,
            p_dot: poss_to_prob(pi)?,
        })
    }
}

/// Parameter-shaped gradients.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

/// Diagnostics of one loss evaluation.
#[derive(Debug, Clone)]
pub struct LossInfo {
    pub loss: f64,
    /// KL to the fixed antipignistic target at the same prediction; the
    /// projection loss can never exceed it.
    pub fixed_target_loss: f64,
    pub projection_cycles: usize,
    pub projection_converged: bool,
    pub target: ProbVec,
}

/// Max-shifted softmax of the affine scores; strictly positive.
pub fn predict(model: &LinearModel, x: &[f64]) -> Result<ProbVec> {
    if x.len() != model.d {
        return Err(Error::LengthMismatch(x.len(), model.d));
    }
    let mut scores = model.b.clone();
    for (c, score) in scores.iter_mut().enumerate() {
        let row = &model.w[c * model.d..(c + 1) * model.d];
        *score += row.iter().zip(x).map(|(w, xf)| w * xf).sum::<f64>();
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVec::new(exps.into_iter().map(|e| e / sum).collect())
}

/// Loss and parameter gradient of one record under `config.objective`, with
/// the target treated as a constant. The gradient with respect to the scores
/// is `q - target`; weight decay adds `wd * parameter` to each gradient.
pub fn loss_and_gradient(
    model: &LinearModel,
    record: &DatasetRecord,
    ctx: &RecordContext,
    config: &TrainConfig,
) -> Result<(LossInfo, Gradients)> {
    let q = predict(model, &record.x)?;
    let q = if q.strictly_positive() {
        q
    } else {
        q.clipped(CLIP_FLOOR)?
    };
    let fixed_target_loss = kl_divergence(&ctx.p_dot, &q)?;
    let (target, cycles, converged) = match config.objective {
        Objective::Projection => {
            let report = kl_project(&q, &ctx.fs, config.proj_tol, config.proj_max_cycles)?;
            (report.p_star, report.cycles_used, report.converged)
        }
        Objective::Fixed => (ctx.p_dot.clone(), 0, true),
    };
    let loss = kl_divergence(&target, &q)?;
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("non-finite loss {loss}")));
    }

    let mut dw = vec![0.0; model.n * model.d];
    let mut db = vec![0.0; model.n];
    for c in 0..model.n {
        let g = q.as_slice()[c] - target.as_slice()[c];
        db[c] = g + config.weight_decay * model.b[c];
        let row = &mut dw[c * model.d..(c + 1) * model.d];
        let wrow = &model.w[c * model.d..(c + 1) * model.d];
        for f in 0..model.d {
            row[f] = g * record.x[f] + config.weight_decay * wrow[f];
        }
    }
    Ok((
        LossInfo {
            loss,
            fixed_target_loss,
            projection_cycles: cycles,
            projection_converged: converged,
            target,
        },
        Gradients { dw, db },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    /// Mean Dykstra cycles per projection in the epoch; zero under the fixed
    /// objective.
    pub mean_projection_cycles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub config: TrainConfig,
    pub epochs: Vec<EpochStats>,
    /// Number of items whose projection loss exceeded the fixed-target loss
    /// beyond tolerance; should stay zero.
    pub loss_order_violations: usize,
}

struct AdamState {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
    step: usize,
}

impl AdamState {
    fn new(n: usize, d: usize) -> Self {
        Self {
            m_w: vec![0.0; n * d],
            v_w: vec![0.0; n * d],
            m_b: vec![0.0; n],
            v_b: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, model: &mut LinearModel, grads: &Gradients, config: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (config.adam_beta1, config.adam_beta2);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let lr = config.learning_rate;
        let eps = config.adam_eps;
        let apply = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        apply(&mut model.w, &mut self.m_w, &mut self.v_w, &grads.dw);
        apply(&mut model.b, &mut self.m_b, &mut self.v_b, &grads.db);
    }
}

/// Mini-batch Adam over the dataset. Deterministic for a fixed seed: the
/// shuffling stream is derived from it and per-item work is order-independent.
pub fn train(
    dataset: &[DatasetRecord],
    config: &TrainConfig,
) -> Result<(LinearModel, TrainHistory)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset[0].pi.len();
    let d = dataset[0].x.len();
    for r in dataset {
        if r.pi.len() != n || r.x.len() != d || r.label >= n {
            return Err(Error::MalformedData("inconsistent record shapes".into()));
        }
    }
    let contexts: Vec<RecordContext> = dataset
        .par_iter()
        .map(|r| RecordContext::new(&r.pi))
        .collect::<Result<_>>()?;

    let mut model = LinearModel::zeros(n, d);
    let mut adam = AdamState::new(n, d);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch_size = config.resolved_batch_size(dataset.len());
    let epochs = config.resolved_epochs(dataset.len());

    let mut history = TrainHistory {
        config: config.clone(),
        epochs: Vec::with_capacity(epochs),
        loss_order_violations: 0,
    };
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut cycle_sum = 0usize;
        let mut projection_count = 0usize;
        for batch in indices.chunks(batch_size) {
            let results: Vec<(LossInfo, Gradients)> = batch
                .par_iter()
                .map(|&i| loss_and_gradient(&model, &dataset[i], &contexts[i], config))
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut dw = vec![0.0; n * d];
            let mut db = vec![0.0; n];
            for (info, grads) in &results {
                loss_sum += info.loss;
                if config.objective == Objective::Projection {
                    cycle_sum += info.projection_cycles;
                    projection_count += 1;
                    if info.loss > info.fixed_target_loss + 1e-10 {
                        history.loss_order_violations += 1;
                    }
                }
                for (acc, g) in dw.iter_mut().zip(&grads.dw) {
                    *acc += scale * g;
                }
                for (acc, g) in db.iter_mut().zip(&grads.db) {
                    *acc += scale * g;
                }
            }
            adam.update(&mut model, &Gradients { dw, db }, config);
        }
        let train_accuracy = evaluate(&model, dataset)?;
        history.epochs.push(EpochStats {
            epoch,
            mean_loss: loss_sum / dataset.len() as f64,
            train_accuracy,
            mean_projection_cycles: if projection_count > 0 {
                cycle_sum as f64 / projection_count as f64
            } else {
                0.0
            },
        });
    }
    Ok((model, history))
}

/// Top-1 accuracy; argmax ties break toward the lowest class index.
pub fn evaluate(model: &LinearModel, dataset: &[DatasetRecord]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for r in dataset {
        let q = predict(model, &r.x)?;
        let mut best = 0usize;
        for (k, &v) in q.as_slice().iter().enumerate() {
            if v > q.as_slice()[best] {
                best = k;
            }
        }
        if best == r.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    n: usize,
    d: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    config_hash: String,
}

/// Write a model checkpoint as JSON with a config hash.
pub fn write_checkpoint<W: Write>(
    mut w: W,
    model: &LinearModel,
    config: &TrainConfig,
) -> Result<()> {
    let ckpt = Checkpoint {
        n: model.n,
        d: model.d,
        w: model.w.clone(),
        b: model.b.clone(),
        config_hash: config.hash(),
    };
    writeln!(w, "{}", serde_json::to_string(&ckpt).expect("serializable"))
        .map_err(|e| Error::MalformedData(e.to_string()))
}

/// Read a checkpoint written by [`write_checkpoint`]; the config hash is
/// returned alongside the model.
pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(LinearModel, String)> {
    let mut text = String::new();
    r.read_to_string(&mut text)
        .map_err(|e| Error::MalformedData(e.to_string()))?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::MalformedData(e.to_string()))?;
    if ckpt.w.len() != ckpt.n * ckpt.d || ckpt.b.len() != ckpt.n {
        return Err(Error::MalformedData("checkpoint shape mismatch".into()));
    }
    Ok((
        LinearModel {
            n: ckpt.n,
            d: ckpt.d,
            w: ckpt.w,
            b: ckpt.b,
        },
        ckpt.config_hash,
    ))
}

/// Write the per-epoch history as CSV.
pub fn write_history<W: Write>(mut w: W, history: &TrainHistory) -> Result<()> {
    let io_err = |e: std::io::Error| Error::MalformedData(e.to_string());
    writeln!(w, "epoch,mean_loss,train_accuracy,mean_projection_cycles").map_err(io_err)?;
    for e in &history.epochs {
        writeln!(
            w,
            "{},{},{},{}",
            e.epoch, e.mean_loss, e.train_accuracy, e.mean_projection_cycles
        )
        .map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn record(x: Vec<f64>, label: usize, pi: Vec<f64>) -> DatasetRecord {
        DatasetRecord {
            x,
            label,
            pi: PossVec::new(pi).unwrap(),
        }
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let model = LinearModel::zeros(4, 3);
        let q = predict(&model, &[1.0, -2.0, 0.5]).unwrap();
        for &v in q.as_slice() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_matches_hand_value_and_shift_invariance() {
        let mut model = LinearModel::zeros(2, 1);
        model.b = vec![2.0_f64.ln(), 0.0];
        let q = predict(&model, &[0.0]).unwrap();
        assert!((q.as_slice()[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((q.as_slice()[1] - 1.0 / 3.0).abs() < 1e-14);

        let mut shifted = model.clone();
        shifted.b = vec![2.0_f64.ln() + 123.0, 123.0];
        let q2 = predict(&shifted, &[0.0]).unwrap();
        for (a, b) in q.as_slice().iter().zip(q2.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn feasible_prediction_gives_zero_projection_loss() {
        let pi = PossVec::new(vec![1.0, 0.5, 0.5]).unwrap();
        let ctx = RecordContext::new(&pi).unwrap();
        // a model whose prediction is the antipignistic point itself
        let mut model = LinearModel::zeros(3, 1);
        model.b = ctx.p_dot.as_slice().iter().map(|p| p.ln()).collect();
        let rec = record(vec![0.0], 0, vec![1.0, 0.5, 0.5]);
        let config = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::new(Objective::Projection, 0.01, 0)
        };
        let (info, grads) = loss_and_gradient(&model, &rec, &ctx, &config).unwrap();
        assert!(info.loss.abs() < 1e-12, "loss {}", info.loss);
        assert!(grads.dw.iter().chain(&grads.db).all(|&g| g.abs() < 1e-8));
    }

    #[test]
    fn fixed_objective_loss_matches_direct_evaluation() {
        let pi = PossVec::new(vec![1.0, 0.4, 0.3]).unwrap();
        let ctx = RecordContext::new(&pi).unwrap();
        let model = LinearModel::zeros(3, 2);
        let rec = record(vec![0.5, -0.5], 0, vec![1.0, 0.4, 0.3]);
        let config = TrainConfig::new(Objective::Fixed, 0.01, 0);
        let (info, _) = loss_and_gradient(&model, &rec, &ctx, &config).unwrap();
        let q = predict(&model, &rec.x).unwrap();
        let direct = kl_divergence(&ctx.p_dot, &q).unwrap();
        assert_eq!(info.loss, direct);
    }

    #[test]
    fn projection_loss_never_exceeds_fixed_loss() {
        let pi = PossVec::new(vec![1.0, 0.9, 0.2, 0.1]).unwrap();
        let ctx = RecordContext::new(&pi).unwrap();
        let mut model = LinearModel::zeros(4, 2);
        model.w = vec![0.3, -0.2, 0.1, 0.4, -0.5, 0.2, 0.0, 0.7];
        let rec = record(vec![1.0, 2.0], 0, pi.as_slice().to_vec());
        let config = TrainConfig::new(Objective::Projection, 0.01, 0);
        let (info, _) = loss_and_gradient(&model, &rec, &ctx, &config).unwrap();
        assert!(info.loss <= info.fixed_target_loss + 1e-10);
    }

    #[test]
    fn projection_targets_are_feasible_or_flagged() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let config = TrainConfig::new(Objective::Projection, 0.01, 0);
        for _ in 0..20 {
            let n = 5;
            let d = 3;
            let mut pi: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
            pi[0] = 1.0;
            let ctx = RecordContext::new(&PossVec::new(pi.clone()).unwrap()).unwrap();
            let mut model = LinearModel::zeros(n, d);
            for w in model.w.iter_mut().chain(model.b.iter_mut()) {
                *w = rng.random_range(-2.0..2.0);
            }
            let rec = record((0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), 0, pi);
            let (info, _) = loss_and_gradient(&model, &rec, &ctx, &config).unwrap();
            let violation = ctx.fs.max_violation(&info.target).unwrap();
            assert!(
                violation <= config.proj_tol || !info.projection_converged,
                "unflagged infeasible target, violation {violation}"
            );
        }
    }

    fn finite_difference_check(objective: Objective, weight_decay: f64) {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (n, d) = (4, 3);
            let mut pi: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
            pi[0] = 1.0;
            let ctx = RecordContext::new(&PossVec::new(pi.clone()).unwrap()).unwrap();
            let mut model = LinearModel::zeros(n, d);
            for w in model.w.iter_mut().chain(model.b.iter_mut()) {
                *w = rng.random_range(-1.0..1.0);
            }
            let rec = record((0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), 0, pi);
            let config = TrainConfig {
                weight_decay,
                ..TrainConfig::new(objective, 0.01, 0)
            };
            let (info, grads) = loss_and_gradient(&model, &rec, &ctx, &config).unwrap();
            // freeze the target and difference the total objective (loss +
            // L2 penalty) over each parameter
            let target = info.target.clone();
            let total = |m: &LinearModel| -> f64 {
                let q = predict(m, &rec.x).unwrap();
                let kl = kl_divergence(&target, &q).unwrap();
                let l2: f64 = m.w.iter().chain(&m.b).map(|v| v * v).sum();
                kl + 0.5 * weight_decay * l2
            };
            let h = 1e-5;
            let check = |get: &dyn Fn(&mut LinearModel) -> &mut f64, analytic: f64| {
                let mut plus = model.clone();
                *get(&mut plus) += h;
                let mut minus = model.clone();
                *get(&mut minus) -= h;
                let fd = (total(&plus) - total(&minus)) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (fd - analytic).abs() / denom < 1e-4,
                    "fd {fd} vs analytic {analytic}"
                );
            };
            for k in 0..n * d {
                check(&|m: &mut LinearModel| &mut m.w[k], grads.dw[k]);
            }
            for k in 0..n {
                check(&|m: &mut LinearModel| &mut m.b[k], grads.db[k]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_projection() {
        finite_difference_check(Objective::Projection, 0.0);
        finite_difference_check(Objective::Projection, 1e-2);
    }

    #[test]
    fn gradients_match_finite_differences_fixed() {
        finite_difference_check(Objective::Fixed, 0.0);
        finite_difference_check(Objective::Fixed, 1e-2);
    }

    fn tiny_dataset() -> Vec<DatasetRecord> {
        let config = SynthConfig {
            n_classes: 4,
            dim: 3,
            beta: 2.0,
            noise: 0.5,
            alpha: 0.4,
            alpha_noise: 0.1,
            delta_pi: 0.01,
            rho_pi: 1e-6,
            n_train: 40,
            n_test: 1,
            seed: 9,
        };
        generate(&config).unwrap().0
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let data = tiny_dataset();
        let config = TrainConfig {
            epochs: Some(0),
            ..TrainConfig::new(Objective::Fixed, 0.01, 0)
        };
        let (model, history) = train(&data, &config).unwrap();
        assert!(model.w.iter().all(|&w| w == 0.0));
        assert!(history.epochs.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let data = tiny_dataset();
        let config = TrainConfig {
            epochs: Some(15),
            batch_size: Some(16),
            ..TrainConfig::new(Objective::Projection, 0.05, 3)
        };
        let (model_a, hist_a) = train(&data, &config).unwrap();
        let (model_b, hist_b) = train(&data, &config).unwrap();
        assert_eq!(model_a, model_b);
        assert_eq!(hist_a, hist_b);
        assert!(hist_a.epochs.last().unwrap().mean_loss < hist_a.epochs[0].mean_loss);
        assert_eq!(hist_a.loss_order_violations, 0);
        assert!(hist_a
            .epochs
            .iter()
            .all(|e| e.mean_projection_cycles >= 1.0));
    }

    #[test]
    fn evaluate_handles_ties_and_empty_input() {
        let model = LinearModel::zeros(3, 1);
        // uniform prediction: argmax tie-break picks class 0
        let data = vec![
            record(vec![0.0], 0, vec![1.0, 0.5, 0.5]),
            record(vec![0.0], 1, vec![0.5, 1.0, 0.5]),
        ];
        assert_eq!(evaluate(&model, &data).unwrap(), 0.5);
        assert!(evaluate(&model, &[]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut model = LinearModel::zeros(2, 2);
        model.w = vec![0.1, -0.2, 0.3, 0.4];
        model.b = vec![0.5, -0.6];
        let config = TrainConfig::new(Objective::Fixed, 0.01, 7);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model, &config).unwrap();
        let (back, hash) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(model, back);
        assert_eq!(hash, config.hash());
    }

    #[test]
    fn history_csv_has_stable_schema() {
        let history = TrainHistory {
            config: TrainConfig::new(Objective::Fixed, 0.01, 0),
            epochs: vec![EpochStats {
                epoch: 0,
                mean_loss: 0.5,
                train_accuracy: 0.25,
                mean_projection_cycles: 0.0,
            }],
            loss_order_violations: 0,
        };
        let mut buf = Vec::new();
        write_history(&mut buf, &history).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,mean_loss,train_accuracy,mean_projection_cycles"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.25,0");
    }
}
