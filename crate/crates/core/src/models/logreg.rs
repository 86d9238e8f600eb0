use super::optim::Adagrad;
use super::{check_vector, epoch_batches, ModelError, TrainConfig, TrainingLog, NUM_LABELS};
use crate::corpus::Label;
use crate::features::FeatureVector;
use crate::math::{argmax, softmax};

/// Per-token multinomial logistic regression. Weights are stored row-major,
/// one row of `num_features` per label in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    num_features: usize,
    weights: Vec<f64>,
}

impl LogRegModel {
    pub fn zeros(num_features: usize) -> LogRegModel {
        LogRegModel { num_features, weights: vec![0.0; NUM_LABELS * num_features] }
    }

    pub fn from_weights(num_features: usize, weights: Vec<f64>) -> Result<LogRegModel, ModelError> {
        if weights.len() != NUM_LABELS * num_features {
            return Err(ModelError::DimensionMismatch(format!(
                "{} weights for {} labels x {} features",
                weights.len(),
                NUM_LABELS,
                num_features
            )));
        }
        Ok(LogRegModel { num_features, weights })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, label: Label) -> &[f64] {
        let start = label.index() * self.num_features;
        &self.weights[start..start + self.num_features]
    }

    fn scores(&self, v: &FeatureVector) -> [f64; NUM_LABELS] {
        std::array::from_fn(|y| v.dot(&self.weights[y * self.num_features..(y + 1) * self.num_features]))
    }

    /// Most probable label; ties go to the earlier label.
    pub fn predict_label(&self, v: &FeatureVector) -> Result<Label, ModelError> {
        let p = logreg_predict(self, v)?;
        Ok(Label::ALL[argmax(&p)])
    }
}

/// Softmax distribution over labels in label order.
pub fn logreg_predict(model: &LogRegModel, vector: &FeatureVector) -> Result<[f64; NUM_LABELS], ModelError> {
    check_vector(vector, model.num_features)?;
    let p = softmax(&model.scores(vector));
    Ok([p[0], p[1], p[2], p[3]])
}

/// Mean cross-entropy plus `l2/2 * |w|^2`, and its gradient.
pub fn logreg_loss_grad(
    model: &LogRegModel,
    data: &[(FeatureVector, Label)],
    l2: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let mut grad = vec![0.0; model.weights.len()];
    let data_term = accumulate(model, data.iter(), &mut grad)?;
    let scale = 1.0 / data.len() as f64;
    let mut penalty = 0.0;
    for (g, &w) in grad.iter_mut().zip(&model.weights) {
        // accumulate() adds the log-likelihood gradient; flip it for the loss
        *g = -*g * scale + l2 * w;
        penalty += w * w;
    }
    Ok((-data_term * scale + 0.5 * l2 * penalty, grad))
}

/// Adds the gradient of the summed log-likelihood to `grad` and returns the
/// summed log-likelihood.
fn accumulate<'a>(
    model: &LogRegModel,
    data: impl Iterator<Item = &'a (FeatureVector, Label)>,
    grad: &mut [f64],
) -> Result<f64, ModelError> {
    let f = model.num_features;
    let mut total = 0.0;
    for (v, gold) in data {
        let p = logreg_predict(model, v)?;
        total += p[gold.index()].ln();
        for (y, py) in p.iter().enumerate() {
            let coef = if y == gold.index() { 1.0 - py } else { -py };
            for &(id, x) in v.entries() {
                grad[y * f + id as usize] += coef * x;
            }
        }
    }
    Ok(total)
}

/// Mini-batch training of L2-regularized cross-entropy with Adagrad steps.
pub fn logreg_train(
    data: &[(FeatureVector, Label)],
    num_features: usize,
    config: &TrainConfig,
) -> Result<(LogRegModel, TrainingLog), ModelError> {
    config.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    for (v, _) in data {
        check_vector(v, num_features)?;
    }
    let mut model = LogRegModel::zeros(num_features);
    let mut opt = Adagrad::new(config.learning_rate, model.weights.len());
    let mut grad = vec![0.0; model.weights.len()];
    let mut log = TrainingLog::default();

    for epoch in epoch_batches(data.len(), config) {
        let mut epoch_total = 0.0;
        for batch in epoch {
            grad.iter_mut().for_each(|g| *g = 0.0);
            epoch_total += accumulate(&model, batch.iter().map(|&i| &data[i]), &mut grad)?;
            let scale = 1.0 / batch.len() as f64;
            for (g, &w) in grad.iter_mut().zip(&model.weights) {
                *g = *g * scale - config.l2 * w;
            }
            opt.ascend(&mut model.weights, &grad);
        }
        log.epoch_objective.push(epoch_total / data.len() as f64);
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fv(pairs: &[(u32, f64)]) -> FeatureVector {
        FeatureVector::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn zero_weights_give_uniform() {
        let m = LogRegModel::zeros(3);
        let p = logreg_predict(&m, &fv(&[(0, 1.0), (2, 1.0)])).unwrap();
        assert_eq!(p, [0.25; 4]);
        assert_eq!(m.predict_label(&fv(&[(1, 1.0)])).unwrap(), Label::Redup);
    }

    #[test]
    fn hand_set_weights_match_direct_softmax() {
        // rows: redup, rep, other, O over features {0, 1}
        let w = vec![1.0, -0.5, 0.25, 2.0, 0.0, 0.0, -1.0, 0.75];
        let m = LogRegModel::from_weights(2, w).unwrap();
        let x = fv(&[(0, 2.0), (1, 1.0)]);
        let z = [2.0 - 0.5, 0.5 + 2.0, 0.0, -2.0 + 0.75];
        let denom: f64 = z.iter().map(|s: &f64| s.exp()).sum();
        let p = logreg_predict(&m, &x).unwrap();
        for k in 0..4 {
            assert!((p[k] - z[k].exp() / denom).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = LogRegModel::zeros(2);
        assert!(matches!(logreg_predict(&m, &fv(&[(2, 1.0)])), Err(ModelError::DimensionMismatch(_))));
        assert!(LogRegModel::from_weights(2, vec![0.0; 7]).is_err());
        let data = vec![(fv(&[(5, 1.0)]), Label::O)];
        assert!(matches!(logreg_train(&data, 2, &TrainConfig::default()), Err(ModelError::DimensionMismatch(_))));
        assert!(matches!(logreg_train(&[], 2, &TrainConfig::default()), Err(ModelError::EmptyData)));
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data: Vec<(FeatureVector, Label)> = (0..20)
            .map(|i| if i % 2 == 0 { (fv(&[(0, 1.0)]), Label::Redup) } else { (fv(&[(1, 1.0)]), Label::Rep) })
            .collect();
        let cfg = TrainConfig { epochs: 50, ..Default::default() };
        let (m, log) = logreg_train(&data, 2, &cfg).unwrap();
        for (v, gold) in &data {
            assert_eq!(m.predict_label(v).unwrap(), *gold);
        }
        assert_eq!(log.epoch_objective.len(), 50);
    }

    #[test]
    fn single_example_overfits() {
        let data = vec![(fv(&[(0, 1.0), (1, 1.0)]), Label::Other)];
        let cfg = TrainConfig { epochs: 100, ..Default::default() };
        let (m, _) = logreg_train(&data, 2, &cfg).unwrap();
        let p = logreg_predict(&m, &data[0].0).unwrap();
        assert_eq!(argmax(&p), Label::Other.index());
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<(FeatureVector, Label)> = (0..40)
            .map(|_| {
                let a = rng.random_range(0..6u32);
                (fv(&[(a, 1.0), ((a + 1) % 6, 0.5)]), Label::ALL[a as usize % 4])
            })
            .collect();
        let cfg = TrainConfig { seed: 11, ..Default::default() };
        let (a, _) = logreg_train(&data, 6, &cfg).unwrap();
        let (b, _) = logreg_train(&data, 6, &cfg).unwrap();
        let bits = |m: &LogRegModel| m.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn scaling_weights_keeps_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Vec<f64> = (0..4 * 5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = LogRegModel::from_weights(5, w.clone()).unwrap();
        let scaled = LogRegModel::from_weights(5, w.iter().map(|x| x * 3.7).collect()).unwrap();
        for _ in 0..50 {
            let v = fv(&[(rng.random_range(0..5), 1.0), (rng.random_range(0..5), rng.random_range(0.1..2.0))]);
            assert_eq!(m.predict_label(&v).unwrap(), scaled.predict_label(&v).unwrap());
            let p = logreg_predict(&m, &v).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }
}
