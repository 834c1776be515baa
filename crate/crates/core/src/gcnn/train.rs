use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss, GcnnError, GcnnModel, LossMode, TrainingBatch, TrainingExample};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss_mode: LossMode,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 8,
            learning_rate: 0.05,
            momentum: 0.9,
            loss_mode: LossMode::Minibatch,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GcnnError> {
        if self.batch_size == 0 {
            return Err(GcnnError::InvalidConfig("batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(GcnnError::InvalidConfig(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(GcnnError::InvalidConfig(format!(
                "momentum {} must be in [0, 1)",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// SGD with momentum over shuffled batches. Returns the trained model and
/// the mean loss of every epoch, where each batch counts in proportion to
/// its loss denominator (graphs in mini-batch mode, binary nodes in
/// full-batch mode). The losses are measured before each update.
pub fn train(
    model: &GcnnModel,
    dataset: &[TrainingExample],
    config: &TrainConfig,
) -> Result<(GcnnModel, Vec<f64>), GcnnError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(GcnnError::EmptyDataset);
    }
    TrainingBatch::new(dataset).validate()?;
    for ex in dataset {
        model.check_graph(&ex.graph)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = model.clone();
    let mut velocity = model.params.zeros_like();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        let mut total_weight = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = TrainingBatch::new(chunk.iter().map(|&i| &dataset[i]));
            let share = match config.loss_mode {
                LossMode::Minibatch => batch.num_graphs(),
                LossMode::Fullbatch => batch.num_nodes(),
            } as f64;
            let (value, grad) = loss(&model, &batch, config.loss_mode)?;
            if !value.is_finite() || !grad.is_finite() {
                return Err(GcnnError::DivergenceDetected { epoch });
            }
            weighted += share * value;
            total_weight += share;
            for (v, g) in velocity
                .blocks_mut()
                .into_iter()
                .zip(grad.blocks())
            {
                for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
                    *vi = config.momentum * *vi - config.learning_rate * gi;
                }
            }
            model.params.add_scaled(&velocity, 1.0);
            if !model.params.is_finite() {
                return Err(GcnnError::DivergenceDetected { epoch });
            }
        }
        let epoch_loss = if total_weight > 0.0 {
            weighted / total_weight
        } else {
            0.0
        };
        curve.push(epoch_loss);
    }
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::encode;
    use crate::instance::generate_knapsack;
    use crate::gcnn::Target;

    fn dataset(n: usize) -> Vec<TrainingExample> {
        (0..n as u64)
            .map(|s| {
                let inst = generate_knapsack(s, 6, 1);
                let graph = encode(&inst);
                // High-value items are labelled 1; learnable from the objective feature.
                let labels = inst.vars().iter().map(|v| f64::from(v.obj <= -50.0)).collect();
                TrainingExample {
                    name: inst.name().into(),
                    graph,
                    targets: vec![Target::uniform(labels, 1.0)],
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_model_and_curve_flat() {
        let data = dataset(5);
        let model = GcnnModel::new(8, 1);
        let config = TrainConfig {
            epochs: 4,
            batch_size: 2,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let (trained, curve) = train(&model, &data, &config).unwrap();
        assert_eq!(trained, model);
        for l in &curve {
            assert!((l - curve[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_decreases_on_learnable_labels() {
        let data = dataset(6);
        let model = GcnnModel::new(8, 2);
        let config = TrainConfig {
            epochs: 60,
            batch_size: 3,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let (_, curve) = train(&model, &data, &config).unwrap();
        assert!(curve.last().unwrap() < &(0.5 * curve[0]), "{curve:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let data = dataset(5);
        let model = GcnnModel::new(8, 3);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 2,
            ..TrainConfig::default()
        };
        assert_eq!(
            train(&model, &data, &config).unwrap(),
            train(&model, &data, &config).unwrap()
        );
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let data = dataset(4);
        let model = GcnnModel::new(8, 4);
        let config = TrainConfig {
            epochs: 200,
            batch_size: 4,
            learning_rate: 1e200,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&model, &data, &config),
            Err(GcnnError::DivergenceDetected { .. })
        ));
    }

    #[test]
    fn config_and_dataset_validation() {
        let model = GcnnModel::new(8, 4);
        assert_eq!(
            train(&model, &[], &TrainConfig::default()),
            Err(GcnnError::EmptyDataset)
        );
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&model, &dataset(1), &bad),
            Err(GcnnError::InvalidConfig(_))
        ));
    }
}
