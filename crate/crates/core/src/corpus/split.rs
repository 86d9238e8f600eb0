use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, LabeledCorpus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    ratios: [f64; 3],
    pub seed: u64,
    pub stratify: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { ratios: [0.8, 0.1, 0.1], seed: 0, stratify: true }
    }
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64, stratify: bool) -> Result<SplitSpec, CorpusError> {
        let valid = ratios.iter().all(|r| r.is_finite() && *r >= 0.0)
            && (ratios.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if !valid {
            return Err(CorpusError::InvalidRatios(ratios));
        }
        Ok(SplitSpec { ratios, seed, stratify })
    }

    pub fn ratios(&self) -> [f64; 3] {
        self.ratios
    }
}

/// Splits `n` items by `ratios` with the largest-remainder method. Ties in the
/// remainder go to the earlier part.
pub(crate) fn largest_remainder(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| n as f64 * r);
    let mut counts = exact.map(|x| x.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Partitions a labeled corpus into train/validation/test.
///
/// With stratification, sentences are bucketed by the set of non-O classes
/// they contain and every bucket is divided by the same ratios. Bucket quotas
/// use largest remainders and are then reconciled so that the split totals
/// equal the largest-remainder apportionment of the whole corpus. Each output
/// keeps the input order of its sentences.
pub fn stratified_split(
    corpus: &LabeledCorpus,
    spec: &SplitSpec,
) -> Result<(LabeledCorpus, LabeledCorpus, LabeledCorpus), CorpusError> {
    if !corpus.is_fully_labeled() {
        return Err(CorpusError::UnlabeledCorpus);
    }
    let ratios = spec.ratios;
    let mut buckets: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, s) in corpus.sentences().iter().enumerate() {
        let key = if spec.stratify { s.signature() } else { 0 };
        buckets.entry(key).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut members: Vec<Vec<usize>> = buckets.into_values().collect();
    for m in &mut members {
        m.shuffle(&mut rng);
    }

    let targets = largest_remainder(corpus.len(), ratios);
    let mut quotas: Vec<[usize; 3]> = members.iter().map(|m| largest_remainder(m.len(), ratios)).collect();
    reconcile(&mut quotas, &members, ratios, targets);

    let mut parts: [Vec<usize>; 3] = Default::default();
    for (m, q) in members.iter().zip(&quotas) {
        let mut rest = m.as_slice();
        for (part, &take) in parts.iter_mut().zip(q) {
            let (head, tail) = rest.split_at(take);
            part.extend_from_slice(head);
            rest = tail;
        }
    }
    let [train, validation, test] = parts.map(|mut idx| {
        idx.sort_unstable();
        LabeledCorpus::new(idx.into_iter().map(|i| corpus.sentences()[i].clone()).collect())
    });
    Ok((train, validation, test))
}

/// Moves single sentences between parts until per-part totals hit `targets`,
/// each time choosing the bucket whose rounding is hurt least by the move.
fn reconcile(quotas: &mut [[usize; 3]], members: &[Vec<usize>], ratios: [f64; 3], targets: [usize; 3]) {
    loop {
        let totals: [usize; 3] = std::array::from_fn(|k| quotas.iter().map(|q| q[k]).sum());
        let Some(over) = (0..3).find(|&k| totals[k] > targets[k]) else { return };
        let Some(under) = (0..3).find(|&k| totals[k] < targets[k]) else { return };
        let mut best: Option<(usize, f64)> = None;
        for (b, q) in quotas.iter().enumerate() {
            if q[over] == 0 {
                continue;
            }
            let n = members[b].len() as f64;
            let gain = (q[over] as f64 - n * ratios[over]) + (n * ratios[under] - q[under] as f64);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((b, gain));
            }
        }
        let (b, _) = best.expect("an over-full part has a bucket with a positive quota");
        quotas[b][over] -= 1;
        quotas[b][under] += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Language, Sentence};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn corpus_with_signatures(n: usize, every: usize) -> LabeledCorpus {
        let sentences = (0..n)
            .map(|i| {
                let labels = if every > 0 && i % every == 0 {
                    vec![Label::Redup, Label::Redup, Label::O]
                } else {
                    vec![Label::O, Label::O, Label::O]
                };
                Sentence::from_words(format!("s{i}"), Language::Hi, &["a", "a", "b"], Some(labels)).unwrap()
            })
            .collect();
        LabeledCorpus::new(sentences)
    }

    #[test]
    fn largest_remainder_hindi_sizes() {
        assert_eq!(largest_remainder(4528, [0.8, 0.1, 0.1]), [3622, 453, 453]);
        assert_eq!(largest_remainder(0, [0.8, 0.1, 0.1]), [0, 0, 0]);
        assert_eq!(largest_remainder(1, [0.8, 0.1, 0.1]), [1, 0, 0]);
    }

    #[test]
    fn rejects_bad_ratios() {
        assert!(SplitSpec::new([0.5, 0.5, 0.1], 0, true).is_err());
        assert!(SplitSpec::new([1.2, -0.1, -0.1], 0, true).is_err());
        assert!(SplitSpec::new([0.7, 0.2, 0.1], 0, true).is_ok());
    }

    #[test]
    fn rejects_unlabeled() {
        let s = Sentence::from_words("x", Language::Hi, &["a"], None).unwrap();
        let c = LabeledCorpus::new(vec![s]);
        assert_eq!(stratified_split(&c, &SplitSpec::default()), Err(CorpusError::UnlabeledCorpus));
    }

    #[test]
    fn hindi_sizes_with_stratification() {
        let c = corpus_with_signatures(4528, 4);
        let (tr, va, te) = stratified_split(&c, &SplitSpec::default()).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (3622, 453, 453));
    }

    #[test]
    fn deterministic_given_seed() {
        let c = corpus_with_signatures(10, 0);
        let spec = SplitSpec::new([0.8, 0.1, 0.1], 17, true).unwrap();
        let a = stratified_split(&c, &spec).unwrap();
        let b = stratified_split(&c, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_proportions_by_recount() {
        // 25% of sentences carry reduplication
        let c = corpus_with_signatures(2000, 4);
        let (tr, va, te) = stratified_split(&c, &SplitSpec::default()).unwrap();
        for part in [&tr, &va, &te] {
            let with = part.sentences().iter().filter(|s| s.signature() != 0).count();
            let share = with as f64 / part.len() as f64;
            assert!((share - 0.25).abs() <= 0.25 * 0.05, "share {share}");
        }
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..300, every in 0usize..7, seed in any::<u64>(), stratify in any::<bool>()) {
            let c = corpus_with_signatures(n, every);
            let spec = SplitSpec::new([0.8, 0.1, 0.1], seed, stratify).unwrap();
            let (tr, va, te) = stratified_split(&c, &spec).unwrap();
            let expected = largest_remainder(n, spec.ratios());
            prop_assert_eq!([tr.len(), va.len(), te.len()], expected);
            let mut seen = HashSet::new();
            for s in tr.sentences().iter().chain(va.sentences()).chain(te.sentences()) {
                prop_assert!(seen.insert(s.id().to_string()));
            }
            prop_assert_eq!(seen.len(), n);
        }
    }
}
