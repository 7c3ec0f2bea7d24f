use std::path::Path;
use std::time::Instant;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::nll_and_grad;
use super::ode::FlowModel;
use crate::error::{Error, Result};
use crate::samples::format_f17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(Error::Argument(format!("batch size {} must be in 1..={n_train}", self.batch_size)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Argument(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Argument("learning rate and weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossRecord {
    /// Test NLL of the model handed to the trainer.
    pub initial_test_nll: f64,
    pub train_nll: Vec<f64>,
    pub test_nll: Vec<f64>,
    /// Elapsed seconds since the start of training, at the end of each epoch.
    pub seconds: Vec<f64>,
    /// Training samples dropped because their trajectories diverged, per epoch.
    pub diverged: Vec<usize>,
}

impl LossRecord {
    pub fn epochs(&self) -> usize {
        self.train_nll.len()
    }

    pub fn final_test_nll(&self) -> f64 {
        self.test_nll.last().copied().unwrap_or(self.initial_test_nll)
    }

    /// Header `epoch,train_nll,test_nll,seconds`, one row per epoch.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_nll", "test_nll", "seconds"])?;
        for e in 0..self.epochs() {
            w.write_record([
                (e + 1).to_string(),
                format_f17(self.train_nll[e]),
                format_f17(self.test_nll[e]),
                format!("{:.3}", self.seconds[e]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rec = LossRecord::default();
        for row in r.records() {
            let row = row?;
            let field = |i: usize| -> Result<f64> {
                row.get(i)
                    .ok_or_else(|| Error::Format(format!("{}: short row", path.display())))?
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
            };
            rec.train_nll.push(field(1)?);
            rec.test_nll.push(field(2)?);
            rec.seconds.push(field(3)?);
            rec.diverged.push(0);
        }
        Ok(rec)
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(n: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One update; parameters with `decay[i] == false` are not decayed.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64, decay: impl Fn(usize) -> bool) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            if decay(i) {
                theta[i] -= lr * weight_decay * theta[i];
            }
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            theta[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Mini-batch maximum-likelihood training. The learning rate is multiplied by
/// `gamma` after each epoch; test NLL is measured before training and after every epoch.
pub fn train(
    mut model: FlowModel,
    train_rows: ArrayView2<'_, f64>,
    test_rows: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
) -> Result<(FlowModel, LossRecord)> {
    cfg.validate(train_rows.nrows())?;
    if test_rows.nrows() == 0 {
        return Err(Error::Argument("empty test set".into()));
    }
    let n = train_rows.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamW::new(model.net.n_params());
    let bias = model.net.output_bias_index();
    let mut lr = cfg.lr;
    let start = Instant::now();
    let mut record = LossRecord { initial_test_nll: evaluate(&model, test_rows), ..Default::default() };
    log::info!("initial test NLL {:.6}", record.initial_test_nll);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut used = 0usize;
        let mut dropped = 0usize;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = train_rows.select(Axis(0), idx);
            let out = nll_and_grad(&model.net, &model.config, &model.base, batch.view())
                .map_err(|e| Error::TrainingAborted { epoch, batch: bi + 1, reason: e.to_string() })?;
            if out.diverged * 10 > idx.len() {
                return Err(Error::TrainingAborted {
                    epoch,
                    batch: bi + 1,
                    reason: format!("{} of {} trajectories diverged", out.diverged, idx.len()),
                });
            }
            loss_sum += out.nll * out.used as f64;
            used += out.used;
            dropped += out.diverged;
            adam.step(model.net.theta_mut(), &out.grad, lr, cfg.weight_decay, |i| i != bias);
        }
        lr *= cfg.gamma;
        let train_nll = loss_sum / used as f64;
        let test_nll = evaluate(&model, test_rows);
        record.train_nll.push(train_nll);
        record.test_nll.push(test_nll);
        record.seconds.push(start.elapsed().as_secs_f64());
        record.diverged.push(dropped);
        log::info!(
            "epoch {epoch}/{}: train NLL {train_nll:.6}, test NLL {test_nll:.6}, {:.1}s",
            cfg.epochs,
            start.elapsed().as_secs_f64()
        );
    }
    Ok((model, record))
}

fn evaluate(model: &FlowModel, test_rows: ArrayView2<'_, f64>) -> f64 {
    let (nll, dropped) = model.nll_lenient(test_rows);
    if dropped > 0 {
        log::warn!("{dropped} test trajectories diverged and were left out of the test NLL");
    }
    nll
}
