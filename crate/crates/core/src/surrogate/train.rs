use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Envelope, Mlp, ModelKind, Scaler, SurrogateModel, MODEL_FORMAT, MODEL_VERSION};
use crate::error::{Error, Result};
use crate::oracle::{CharacterizationSample, Dataset};
use crate::surrogate::Adam;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            hidden_dim: 64,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 2000,
            patience: 100,
            validation_fraction: 0.2,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 0 when no epoch improved on the initial network.
    pub best_epoch: usize,
    /// Per-element MSE in target units (dB²) at the returned weights.
    pub validation_mse: f64,
    /// `(train_mse, validation_mse)` per epoch, index 0 is the initial network.
    pub history: Vec<(f64, f64)>,
    pub train_profiles: Vec<u32>,
    pub validation_profiles: Vec<u32>,
}

pub(crate) fn input_normalized(sample: &CharacterizationSample) -> Vec<f64> {
    let peak = sample
        .input_dbm
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    sample.input_dbm.iter().map(|p| p - peak).collect()
}

fn feature_row(sample: &CharacterizationSample) -> Vec<f64> {
    let mut x = input_normalized(sample);
    x.push(sample.total_input_dbm);
    x.push(sample.total_output_dbm);
    x
}

/// Zero-mean gain shape for gain models, NF in dB for NF models.
pub(crate) fn target_row(sample: &CharacterizationSample, kind: ModelKind) -> Vec<f64> {
    match kind {
        ModelKind::Gain => {
            let mean = sample.gain_db.iter().sum::<f64>() / sample.gain_db.len() as f64;
            sample.gain_db.iter().map(|g| g - mean).collect()
        }
        ModelKind::Nf => sample.nf_db.clone(),
    }
}

/// Splits profile ids 80/20 (by default) after a seeded shuffle.
fn split_profiles(samples: &[CharacterizationSample], fraction: f64, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let mut ids: Vec<u32> = samples.iter().map(|s| s.profile_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_val = if ids.len() > 1 {
        ((ids.len() as f64 * fraction).round() as usize).clamp(1, ids.len() - 1)
    } else {
        0
    };
    let mut val = ids[..n_val].to_vec();
    let mut train = ids[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

fn mse(net: &Mlp, x: &[Vec<f64>], y: &[Vec<f64>], out_scale: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut total = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let p = net.forward(xi);
        total += p
            .iter()
            .zip(yi)
            .zip(out_scale)
            .map(|((p, t), s)| ((p - t) * s).powi(2))
            .sum::<f64>();
    }
    total / (x.len() * y[0].len()) as f64
}

/// Trains a surrogate on `dataset`. Deterministic given `config.seed`.
///
/// The returned model holds the weights of the epoch with the lowest
/// validation MSE. With a single profile everything is used for training and
/// the training MSE stands in for validation.
pub fn train(
    dataset: &Dataset,
    kind: ModelKind,
    config: &TrainConfig,
) -> Result<(SurrogateModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 || config.hidden_dim == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::InvalidOptimization(
            "batch size, hidden width and learning rate must be positive".into(),
        ));
    }
    let n_ch = dataset.grid.len();
    let (train_ids, val_ids) =
        split_profiles(&dataset.samples, config.validation_fraction, config.seed);
    let (train_s, val_s): (Vec<&CharacterizationSample>, Vec<&CharacterizationSample>) = dataset
        .samples
        .iter()
        .partition(|s| train_ids.binary_search(&s.profile_id).is_ok());

    let raw_x: Vec<Vec<f64>> = train_s.iter().map(|s| feature_row(s)).collect();
    let raw_y: Vec<Vec<f64>> = train_s.iter().map(|s| target_row(s, kind)).collect();
    let input_scaler = Scaler::fit(&raw_x);
    let output_scaler = Scaler::fit(&raw_y);
    let xs: Vec<Vec<f64>> = raw_x.iter().map(|r| input_scaler.transform(r)).collect();
    let ys: Vec<Vec<f64>> = raw_y.iter().map(|r| output_scaler.transform(r)).collect();
    let (vx, vy): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if val_s.is_empty() {
        (xs.clone(), ys.clone())
    } else {
        val_s
            .iter()
            .map(|s| {
                (
                    input_scaler.transform(&feature_row(s)),
                    output_scaler.transform(&target_row(s, kind)),
                )
            })
            .unzip()
    };

    let envelope = Envelope {
        total_input_dbm: min_max(train_s.iter().map(|s| s.total_input_dbm)),
        total_output_dbm: min_max(train_s.iter().map(|s| s.total_output_dbm)),
        min_input_db: raw_x
            .iter()
            .flat_map(|r| r[..n_ch].iter().copied())
            .fold(0.0, f64::min),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Mlp::new(n_ch + 2, config.hidden_dim, n_ch, &mut rng);
    let mut adam = Adam::new(&net, config.learning_rate);
    let mut grads = net.zeros_like();
    let scale = &output_scaler.scale;

    let mut best = net.clone();
    let mut best_val = mse(&net, &vx, &vy, scale);
    let mut best_epoch = 0;
    let mut history = vec![(mse(&net, &xs, &ys, scale), best_val)];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.fill_zero();
            for &i in batch {
                loss_sum += net.accumulate_squared_error(&xs[i], &ys[i], &mut grads);
            }
            // Gradient of the per-element mean.
            grads.scale(2.0 / (batch.len() * n_ch) as f64);
            adam.step(&mut net, &grads);
        }
        if !loss_sum.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        epochs_run = epoch;
        let val = mse(&net, &vx, &vy, scale);
        if !val.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push((mse(&net, &xs, &ys, scale), val));
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            best = net.clone();
        } else if epoch - best_epoch >= config.patience {
            log::debug!("early stop at epoch {epoch}, best {best_epoch}");
            break;
        }
        if epoch % 100 == 0 {
            log::debug!("{kind} epoch {epoch}: validation mse {val:.5}");
        }
    }

    let unit_id = dataset
        .samples
        .first()
        .map(|s| s.unit_id.clone())
        .unwrap_or_default();
    let model = SurrogateModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        kind,
        grid: dataset.grid.as_ref().clone(),
        unit_id,
        training_seed: config.seed,
        net: best,
        input_scaler,
        output_scaler,
        envelope,
    };
    Ok((
        model,
        TrainReport {
            epochs_run,
            best_epoch,
            validation_mse: best_val,
            history,
            train_profiles: train_ids,
            validation_profiles: val_ids,
        },
    ))
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}
