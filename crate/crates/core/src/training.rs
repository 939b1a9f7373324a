//! Full-graph training with early stopping on validation accuracy.

use serde::{Deserialize, Serialize};

use crate::dataset::{GraphDataset, Split};
use crate::error::{Error, Result};
use crate::models::{nll_loss, Arch, GraphInput, Mode, Model, ModelConfig, ModelParams};
use crate::numerics::adam::{adam_step, AdamConfig, OptimizerState};
use crate::numerics::matrix::Matrix;
use crate::numerics::ops::derive_seed;
use crate::numerics::sparse::{build_normalized_adjacency, SparseAdjacency};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub patience: usize,
    /// Seeds the per-epoch dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs_max: 300, lr: 0.005, weight_decay: 5e-4, patience: 20, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        if self.patience > self.epochs_max {
            return Err(Error::InvalidConfig(format!(
                "patience {} exceeds epoch budget {}",
                self.patience, self.epochs_max
            )));
        }
        if self.epochs_max == 0 {
            return Err(Error::InvalidConfig("epochs_max must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub arch: Arch,
    pub dataset: String,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
}

/// Features and normalized adjacency of a dataset, in the compute type.
#[derive(Debug, Clone)]
pub struct GraphTensors<T> {
    pub features: Matrix<T>,
    pub adjacency: SparseAdjacency<T>,
}

impl<T: Scalar> GraphTensors<T> {
    pub fn from_dataset(ds: &GraphDataset) -> Result<Self> {
        Ok(Self { features: ds.features.cast(), adjacency: build_normalized_adjacency(&ds.edges, ds.num_nodes())? })
    }

    pub fn input(&self) -> GraphInput<'_, T> {
        GraphInput::new(&self.features, &self.adjacency)
    }
}

fn mask_nodes(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

/// Fraction of `nodes` whose prediction equals the label.
pub fn accuracy(predicted: &[usize], labels: &[u16], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    let correct = nodes.iter().filter(|&&i| predicted[i] == labels[i] as usize).count();
    Ok(correct as f64 / nodes.len() as f64)
}

/// Eval-mode accuracy of `model` over one split.
pub fn evaluate<T: Scalar>(model: &Model<T>, ds: &GraphDataset, split: Split) -> Result<f64> {
    let nodes = mask_nodes(ds.mask(split));
    if nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    let graph = GraphTensors::<T>::from_dataset(ds)?;
    let out = model.forward(&graph.input(), Mode::Eval)?;
    accuracy(&out.predicted, &ds.labels, &nodes)
}

/// Per-epoch hook; returning `false` cancels training.
pub trait TrainObserver {
    fn epoch(&mut self, record: &EpochRecord, epochs_max: usize) -> bool;
}

impl<F: FnMut(&EpochRecord, usize) -> bool> TrainObserver for F {
    fn epoch(&mut self, record: &EpochRecord, epochs_max: usize) -> bool {
        self(record, epochs_max)
    }
}

/// Trains a fresh model initialized from `config.seed`.
pub fn train_model<T: Scalar>(ds: &GraphDataset, config: ModelConfig, tcfg: &TrainConfig) -> Result<(Model<T>, TrainReport)> {
    train_model_observed(ds, config, tcfg, &mut |_: &EpochRecord, _: usize| true)
}

pub fn train_model_observed<T: Scalar>(
    ds: &GraphDataset,
    config: ModelConfig,
    tcfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(Model<T>, TrainReport)> {
    tcfg.validate()?;
    if config.in_dim != ds.num_features() {
        return Err(Error::DimensionMismatch { dataset: ds.num_features(), model: config.in_dim });
    }
    if config.num_classes != ds.num_classes {
        return Err(Error::InvalidConfig(format!(
            "model has {} classes, dataset {}",
            config.num_classes, ds.num_classes
        )));
    }
    let train_nodes = mask_nodes(&ds.train_mask);
    if train_nodes.is_empty() {
        return Err(Error::EmptyTrainMask);
    }
    let val_nodes = mask_nodes(&ds.val_mask);
    let test_nodes = mask_nodes(&ds.test_mask);

    let graph = GraphTensors::<T>::from_dataset(ds)?;
    let input = graph.input();
    let mut model = Model::<T>::init(config)?;
    let sizes: Vec<usize> = model.params.tensors().iter().map(|t| t.data().len()).collect();
    let adam = AdamConfig { lr: tcfg.lr, weight_decay: tcfg.weight_decay, ..AdamConfig::default() };
    let mut opt = OptimizerState::<T>::new(adam, &sizes);

    let mut best: Option<(usize, f64, ModelParams<T>)> = None;
    let mut history = Vec::new();
    for epoch in 0..tcfg.epochs_max {
        let mode = Mode::Train { seed: derive_seed(tcfg.seed, epoch as u64) };
        let (out, cache) = model.forward_cached(&input, mode)?;
        let (loss, dlp) = nll_loss(&out.log_probs, &ds.labels, &train_nodes);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let grads = model.backward(&input, &cache, &dlp)?;
        {
            let g = grads.params.tensors();
            let grad_slices: Vec<&[T]> = g.iter().map(|t| t.data()).collect();
            let mut p = model.params.tensors_mut();
            let mut param_slices: Vec<&mut [T]> = p.iter_mut().map(|t| t.data_mut()).collect();
            adam_step(&mut param_slices, &grad_slices, &mut opt)?;
        }
        if !model.params.is_finite() {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }

        // validation accuracy of the weights after this epoch's update
        let eval = model.forward(&input, Mode::Eval)?;
        let val_accuracy = if val_nodes.is_empty() { 0.0 } else { accuracy(&eval.predicted, &ds.labels, &val_nodes)? };
        let record = EpochRecord { epoch, train_loss: loss, val_accuracy };
        history.push(record);
        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, model.params.clone()));
        }
        if !observer.epoch(&record, tcfg.epochs_max) {
            return Err(Error::Cancelled);
        }
        let best_epoch = best.as_ref().map(|b| b.0).unwrap_or(0);
        if epoch - best_epoch >= tcfg.patience {
            break;
        }
    }

    let (best_epoch, best_val_accuracy, params) = best.expect("at least one epoch");
    model.params = params;
    let test_accuracy = if test_nodes.is_empty() {
        0.0
    } else {
        let eval = model.forward(&input, Mode::Eval)?;
        accuracy(&eval.predicted, &ds.labels, &test_nodes)?
    };
    let report = TrainReport {
        arch: model.arch(),
        dataset: ds.name.clone(),
        epochs_run: history.len(),
        history,
        best_epoch,
        best_val_accuracy,
        test_accuracy,
    };
    Ok((model, report))
}
