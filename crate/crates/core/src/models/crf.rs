use super::optim::Adagrad;
use super::{check_vector, epoch_batches, ModelError, TrainConfig, TrainingLog, NUM_LABELS};
use crate::corpus::Label;
use crate::features::FeatureVector;
use crate::math::logsumexp;

const L: usize = NUM_LABELS;

/// Linear-chain CRF over the four labels.
///
/// Parameters live in one flat vector: unary weights (label-major, one row of
/// `num_features` per label), then the `L x L` transition matrix indexed
/// `[from][to]`, then begin scores, then end scores. Gradients use the same
/// layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    num_features: usize,
    params: Vec<f64>,
}

impl CrfModel {
    pub fn num_params_for(num_features: usize) -> usize {
        L * num_features + L * L + 2 * L
    }

    pub fn zeros(num_features: usize) -> CrfModel {
        CrfModel { num_features, params: vec![0.0; Self::num_params_for(num_features)] }
    }

    pub fn from_params(num_features: usize, params: Vec<f64>) -> Result<CrfModel, ModelError> {
        if params.len() != Self::num_params_for(num_features) {
            return Err(ModelError::DimensionMismatch(format!(
                "{} parameters for a CRF over {} features",
                params.len(),
                num_features
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::DimensionMismatch("non-finite CRF parameter".into()));
        }
        Ok(CrfModel { num_features, params })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn unary_offset(&self, label: usize, feature: usize) -> usize {
        label * self.num_features + feature
    }

    pub fn transition_offset(&self, from: usize, to: usize) -> usize {
        L * self.num_features + from * L + to
    }

    pub fn begin_offset(&self, label: usize) -> usize {
        L * self.num_features + L * L + label
    }

    pub fn end_offset(&self, label: usize) -> usize {
        L * self.num_features + L * L + L + label
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.params[self.transition_offset(from, to)]
    }

    pub fn begin(&self, label: usize) -> f64 {
        self.params[self.begin_offset(label)]
    }

    pub fn end(&self, label: usize) -> f64 {
        self.params[self.end_offset(label)]
    }

    /// Per-position unary scores.
    pub fn unary_scores(&self, vectors: &[FeatureVector]) -> Result<Vec<[f64; L]>, ModelError> {
        if vectors.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let f = self.num_features;
        vectors
            .iter()
            .map(|v| {
                check_vector(v, f)?;
                Ok(std::array::from_fn(|y| v.dot(&self.params[y * f..(y + 1) * f])))
            })
            .collect()
    }

    /// Unnormalized score of one label sequence.
    pub fn sequence_score(&self, vectors: &[FeatureVector], labels: &[Label]) -> Result<f64, ModelError> {
        check_labels(vectors, labels)?;
        let unary = self.unary_scores(vectors)?;
        Ok(self.score_with(&unary, labels.iter().map(|l| l.index())))
    }

    fn score_with(&self, unary: &[[f64; L]], labels: impl Iterator<Item = usize>) -> f64 {
        let mut score = 0.0;
        let mut prev: Option<usize> = None;
        for (t, y) in labels.enumerate() {
            score += unary[t][y];
            score += match prev {
                None => self.begin(y),
                Some(p) => self.transition(p, y),
            };
            prev = Some(y);
        }
        score + prev.map_or(0.0, |y| self.end(y))
    }

    /// Best label sequence for a sentence.
    pub fn tag(&self, vectors: &[FeatureVector]) -> Result<Vec<Label>, ModelError> {
        crf_viterbi(self, vectors).map(|(labels, _)| labels)
    }
}

fn check_labels(vectors: &[FeatureVector], labels: &[Label]) -> Result<(), ModelError> {
    if vectors.len() != labels.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Forward and backward log-space tables for one sequence.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub unary: Vec<[f64; L]>,
    pub alpha: Vec<[f64; L]>,
    pub beta: Vec<[f64; L]>,
    /// Log partition from the forward pass.
    pub log_z: f64,
    /// Log partition from the backward pass.
    pub log_z_backward: f64,
}

impl ForwardBackward {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `P(y_t = y)` for every label.
    pub fn marginal(&self, t: usize) -> [f64; L] {
        std::array::from_fn(|y| (self.alpha[t][y] + self.beta[t][y] - self.log_z).exp())
    }

    /// `P(y_{t-1} = a, y_t = b)` as `[a][b]`, for `t >= 1`.
    pub fn pair_marginal(&self, model: &CrfModel, t: usize) -> [[f64; L]; L] {
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                (self.alpha[t - 1][a] + model.transition(a, b) + self.unary[t][b] + self.beta[t][b] - self.log_z)
                    .exp()
            })
        })
    }
}

pub fn crf_forward_backward(model: &CrfModel, vectors: &[FeatureVector]) -> Result<ForwardBackward, ModelError> {
    let unary = model.unary_scores(vectors)?;
    let n = unary.len();

    let mut alpha = vec![[0.0; L]; n];
    alpha[0] = std::array::from_fn(|y| model.begin(y) + unary[0][y]);
    for t in 1..n {
        alpha[t] = std::array::from_fn(|y| {
            let incoming: [f64; L] = std::array::from_fn(|p| alpha[t - 1][p] + model.transition(p, y));
            unary[t][y] + logsumexp(&incoming)
        });
    }
    let finals: [f64; L] = std::array::from_fn(|y| alpha[n - 1][y] + model.end(y));
    let log_z = logsumexp(&finals);

    let mut beta = vec![[0.0; L]; n];
    beta[n - 1] = std::array::from_fn(|y| model.end(y));
    for t in (0..n - 1).rev() {
        beta[t] = std::array::from_fn(|y| {
            let outgoing: [f64; L] =
                std::array::from_fn(|next| model.transition(y, next) + unary[t + 1][next] + beta[t + 1][next]);
            logsumexp(&outgoing)
        });
    }
    let starts: [f64; L] = std::array::from_fn(|y| model.begin(y) + unary[0][y] + beta[0][y]);
    let log_z_backward = logsumexp(&starts);

    Ok(ForwardBackward { unary, alpha, beta, log_z, log_z_backward })
}

/// Log of the sum of `exp(score)` over all label sequences.
pub fn crf_log_partition(model: &CrfModel, vectors: &[FeatureVector]) -> Result<f64, ModelError> {
    crf_forward_backward(model, vectors).map(|fb| fb.log_z)
}

/// Adds the gradient of the unregularized log-likelihood to `grad` and
/// returns that log-likelihood.
fn accumulate_grad(
    model: &CrfModel,
    vectors: &[FeatureVector],
    labels: &[Label],
    grad: &mut [f64],
) -> Result<f64, ModelError> {
    check_labels(vectors, labels)?;
    let fb = crf_forward_backward(model, vectors)?;
    let gold: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let n = gold.len();
    let loglik = model.score_with(&fb.unary, gold.iter().copied()) - fb.log_z;

    for (t, v) in vectors.iter().enumerate() {
        let marginal = fb.marginal(t);
        for (y, p) in marginal.iter().enumerate() {
            let coef = if y == gold[t] { 1.0 - p } else { -p };
            for &(id, x) in v.entries() {
                grad[model.unary_offset(y, id as usize)] += coef * x;
            }
        }
        if t > 0 {
            let pair = fb.pair_marginal(model, t);
            for (a, row) in pair.iter().enumerate() {
                for (b, p) in row.iter().enumerate() {
                    grad[model.transition_offset(a, b)] -= p;
                }
            }
            grad[model.transition_offset(gold[t - 1], gold[t])] += 1.0;
        }
    }
    let first = fb.marginal(0);
    let last = fb.marginal(n - 1);
    for y in 0..L {
        grad[model.begin_offset(y)] -= first[y];
        grad[model.end_offset(y)] -= last[y];
    }
    grad[model.begin_offset(gold[0])] += 1.0;
    grad[model.end_offset(gold[n - 1])] += 1.0;
    Ok(loglik)
}

/// Conditional log-likelihood of `labels` minus `l2/2 * |params|^2`, and its
/// gradient with respect to every parameter.
pub fn crf_loglik_grad(
    model: &CrfModel,
    vectors: &[FeatureVector],
    labels: &[Label],
    l2: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    let mut grad = vec![0.0; model.params.len()];
    let loglik = accumulate_grad(model, vectors, labels, &mut grad)?;
    let mut penalty = 0.0;
    for (g, &w) in grad.iter_mut().zip(&model.params) {
        *g -= l2 * w;
        penalty += w * w;
    }
    Ok((loglik - 0.5 * l2 * penalty, grad))
}

/// Highest-scoring label sequence and its score. At each backtrack step ties
/// go to the earlier label in label order.
pub fn crf_viterbi(model: &CrfModel, vectors: &[FeatureVector]) -> Result<(Vec<Label>, f64), ModelError> {
    let unary = model.unary_scores(vectors)?;
    let n = unary.len();
    let mut delta = vec![[0.0; L]; n];
    let mut back = vec![[0usize; L]; n];
    delta[0] = std::array::from_fn(|y| model.begin(y) + unary[0][y]);
    for t in 1..n {
        for y in 0..L {
            let mut best = 0;
            let mut best_score = delta[t - 1][0] + model.transition(0, y);
            for p in 1..L {
                let s = delta[t - 1][p] + model.transition(p, y);
                if s > best_score {
                    best = p;
                    best_score = s;
                }
            }
            delta[t][y] = best_score + unary[t][y];
            back[t][y] = best;
        }
    }
    let mut last = 0;
    let mut best_score = delta[n - 1][0] + model.end(0);
    for y in 1..L {
        let s = delta[n - 1][y] + model.end(y);
        if s > best_score {
            last = y;
            best_score = s;
        }
    }
    let mut path = vec![last; n];
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    Ok((path.into_iter().map(|y| Label::ALL[y]).collect(), best_score))
}

/// Mini-batch gradient ascent on the L2-regularized conditional
/// log-likelihood with Adagrad steps. Batch gradients are means over the
/// batch; the log records the mean per-sentence log-likelihood seen during
/// each epoch.
pub fn crf_train(
    data: &[(Vec<FeatureVector>, Vec<Label>)],
    num_features: usize,
    config: &TrainConfig,
) -> Result<(CrfModel, TrainingLog), ModelError> {
    config.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    for (vectors, labels) in data {
        check_labels(vectors, labels)?;
        if vectors.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        for v in vectors {
            check_vector(v, num_features)?;
        }
    }
    let mut model = CrfModel::zeros(num_features);
    let mut opt = Adagrad::new(config.learning_rate, model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut log = TrainingLog::default();

    for epoch in epoch_batches(data.len(), config) {
        let mut epoch_total = 0.0;
        for batch in epoch {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in &batch {
                let (vectors, labels) = &data[i];
                epoch_total += accumulate_grad(&model, vectors, labels, &mut grad)?;
            }
            let scale = 1.0 / batch.len() as f64;
            for (g, &w) in grad.iter_mut().zip(&model.params) {
                *g = *g * scale - config.l2 * w;
            }
            opt.ascend(&mut model.params, &grad);
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

    pub(super) fn random_instance(seed: u64, num_features: usize, max_len: usize) -> (CrfModel, Vec<FeatureVector>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..CrfModel::num_params_for(num_features)).map(|_| rng.random_range(-1.5..1.5)).collect();
        let model = CrfModel::from_params(num_features, params).unwrap();
        let n = rng.random_range(1..=max_len);
        let vectors = (0..n)
            .map(|_| {
                FeatureVector::from_pairs(
                    (0..3).map(|_| (rng.random_range(0..num_features as u32), rng.random_range(0.5..1.5))),
                )
            })
            .collect();
        (model, vectors)
    }

    fn all_sequences(n: usize) -> impl Iterator<Item = Vec<Label>> {
        (0..L.pow(n as u32)).map(move |mut code| {
            let mut seq = vec![Label::Redup; n];
            for slot in seq.iter_mut().rev() {
                *slot = Label::ALL[code % L];
                code /= L;
            }
            seq
        })
    }

    #[test]
    fn length_one_zero_model_partition_is_log4() {
        let m = CrfModel::zeros(2);
        let v = vec![FeatureVector::from_pairs([(0, 1.0)])];
        assert!((crf_log_partition(&m, &v).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn partition_matches_enumeration_length_three() {
        for seed in 0..10 {
            let (m, mut v) = random_instance(seed, 5, 3);
            v.resize_with(3, || FeatureVector::from_pairs([(1, 1.0)]));
            let scores: Vec<f64> = all_sequences(3).map(|s| m.sequence_score(&v, &s).unwrap()).collect();
            assert_eq!(scores.len(), 64);
            let brute = scores.iter().map(|s| s.exp()).sum::<f64>().ln();
            assert!((crf_log_partition(&m, &v).unwrap() - brute).abs() < 1e-8);
        }
    }

    #[test]
    fn forward_and_backward_agree() {
        for seed in 0..30 {
            let (m, v) = random_instance(seed, 6, 12);
            let fb = crf_forward_backward(&m, &v).unwrap();
            assert!((fb.log_z - fb.log_z_backward).abs() < 1e-8);
            for t in 0..fb.len() {
                let s: f64 = fb.marginal(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-10);
                if t > 0 {
                    let pair = fb.pair_marginal(&m, t);
                    let total: f64 = pair.iter().flatten().sum();
                    assert!((total - 1.0).abs() < 1e-10);
                    // pair marginals sum to the unary marginal of the later position
                    let col: [f64; L] = std::array::from_fn(|b| pair.iter().map(|r| r[b]).sum());
                    let m_t = fb.marginal(t);
                    for y in 0..L {
                        assert!((col[y] - m_t[y]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn viterbi_zero_model_is_all_redup() {
        let m = CrfModel::zeros(3);
        let v: Vec<FeatureVector> = (0..4).map(|i| FeatureVector::from_pairs([(i % 3, 1.0)])).collect();
        let (path, score) = crf_viterbi(&m, &v).unwrap();
        assert_eq!(path, vec![Label::Redup; 4]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn viterbi_length_one_is_argmax() {
        let (m, mut v) = random_instance(5, 4, 1);
        v.truncate(1);
        let unary = m.unary_scores(&v).unwrap();
        let scores: Vec<f64> = (0..L).map(|y| unary[0][y] + m.begin(y) + m.end(y)).collect();
        let (path, score) = crf_viterbi(&m, &v).unwrap();
        assert_eq!(path[0].index(), crate::math::argmax(&scores));
        assert!((score - scores[path[0].index()]).abs() < 1e-12);
    }

    #[test]
    fn loglik_is_non_positive_without_l2() {
        for seed in 0..10 {
            let (m, v) = random_instance(seed, 4, 6);
            let labels: Vec<Label> = (0..v.len()).map(|i| Label::ALL[i % 4]).collect();
            let (ll, _) = crf_loglik_grad(&m, &v, &labels, 0.0).unwrap();
            assert!(ll <= 0.0);
            let fb = crf_forward_backward(&m, &v).unwrap();
            assert!(fb.log_z >= m.sequence_score(&v, &labels).unwrap());
        }
    }

    #[test]
    fn errors() {
        let m = CrfModel::zeros(2);
        assert!(matches!(crf_log_partition(&m, &[]), Err(ModelError::EmptySequence)));
        let v = vec![FeatureVector::from_pairs([(3, 1.0)])];
        assert!(matches!(crf_viterbi(&m, &v), Err(ModelError::DimensionMismatch(_))));
        let ok = vec![FeatureVector::from_pairs([(1, 1.0)])];
        assert!(matches!(crf_loglik_grad(&m, &ok, &[], 0.0), Err(ModelError::DimensionMismatch(_))));
        assert!(CrfModel::from_params(2, vec![0.0; 3]).is_err());
        assert!(matches!(crf_train(&[], 2, &TrainConfig::default()), Err(ModelError::EmptyData)));
    }

    #[test]
    fn training_increases_likelihood_and_is_deterministic() {
        // feature 0 -> REDUP, 1 -> REP, 2 -> O, with a REDUP REDUP pattern
        let sent = |ids: &[u32], labels: &[Label]| {
            (ids.iter().map(|&i| FeatureVector::from_pairs([(i, 1.0)])).collect::<Vec<_>>(), labels.to_vec())
        };
        let data = vec![
            sent(&[2, 0, 0, 2], &[Label::O, Label::Redup, Label::Redup, Label::O]),
            sent(&[1, 1, 2], &[Label::Rep, Label::Rep, Label::O]),
            sent(&[2, 2], &[Label::O, Label::O]),
            sent(&[0, 0], &[Label::Redup, Label::Redup]),
        ];
        let cfg = TrainConfig { epochs: 30, batch_size: 2, learning_rate: 0.01, ..Default::default() };
        let (m, log) = crf_train(&data, 3, &cfg).unwrap();
        for w in log.epoch_objective.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective decreased: {:?}", log.epoch_objective);
        }
        let (m2, _) = crf_train(&data, 3, &cfg).unwrap();
        assert_eq!(
            m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            m2.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
        let fast = TrainConfig { epochs: 50, ..Default::default() };
        let (m, _) = crf_train(&data, 3, &fast).unwrap();
        for (v, labels) in &data {
            assert_eq!(&m.tag(v).unwrap(), labels);
        }
    }
}
