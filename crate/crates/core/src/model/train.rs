use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{targets, ModelParams};
use crate::corpus::FeatureSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Phase {
    #[default]
    Pretrain,
    Finetune,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Phase::Pretrain),
            "finetune" => Ok(Phase::Finetune),
            other => Err(Error::Config(format!("unknown phase {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Songs per step.
    pub batch_size: usize,
    pub max_steps: usize,
    pub dropout: f64,
    pub seed: u64,
    pub phase: Phase,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.00015,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-6,
            batch_size: 8,
            max_steps: 1000,
            dropout: 0.1,
            seed: 0,
            phase: Phase::Pretrain,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: ModelParams,
    v: ModelParams,
}

impl Adam {
    pub fn new(params: &ModelParams, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let (lr, eps) = (self.lr, self.eps);
        let g = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((_, w), (_, _, g)), (_, m)), (_, v)) in params.tensors_mut().into_iter().zip(g).zip(ms).zip(vs) {
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub phase: Phase,
    /// Mean per-token NLL of each step's batch, before that step's update.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn steps(&self) -> usize {
        self.losses.len()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Runs `cfg.max_steps` Adam steps over shuffled batches of `corpus`.
/// Fully determined by `cfg.seed`. Call twice with different corpora and
/// phases for pre-training followed by fine-tuning.
pub fn train(params: &mut ModelParams, corpus: &[FeatureSequence], cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(params, corpus, cfg, |_, _, _| true)
}

/// Like [`train`], calling `keep_going(step, loss, params)` after every
/// update; training stops early when it returns `false`.
pub fn train_with(
    params: &mut ModelParams,
    corpus: &[FeatureSequence],
    cfg: &TrainConfig,
    mut keep_going: impl FnMut(usize, f64, &ModelParams) -> bool,
) -> Result<TrainReport> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    for seq in corpus {
        params.config.check_sequence(seq)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(params, cfg);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.max_steps);
    let mut grads = params.zeros_like();

    for step in 0..cfg.max_steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size.min(corpus.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let n_targets: usize = batch.iter().map(|&i| targets(&corpus[i]).count()).sum();
        if n_targets == 0 {
            return Err(Error::invalid("batch has no predictable tokens"));
        }
        let scale = 1.0 / n_targets as f64;

        grads.for_each_tensor_mut(|_, t| t.fill(0.0));
        let mut nll = 0.0;
        for &i in &batch {
            let seq = &corpus[i];
            let cache = params.forward_train(seq, cfg.dropout, &mut rng)?;
            nll += params.backward(seq, &cache, scale, &mut grads);
        }
        let loss = nll * scale;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, loss });
        }
        losses.push(loss);
        adam.update(params, &grads);
        if !params.all_finite() {
            return Err(Error::NonFiniteLoss { step, loss: f64::NAN });
        }
        if step % 100 == 0 || step + 1 == cfg.max_steps {
            debug!("{} step {step}: loss {loss:.5}", cfg.phase);
        }
        if !keep_going(step, loss, params) {
            break;
        }
    }
    if let Some(last) = losses.last() {
        info!("{} finished {} steps, last loss {last:.5}", cfg.phase, losses.len());
    }
    Ok(TrainReport {
        phase: cfg.phase,
        losses,
    })
}
