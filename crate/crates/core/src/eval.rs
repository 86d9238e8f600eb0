//! Token-level scoring, multi-run aggregation and inter-annotator agreement.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("agreement table: {0}")]
    InvalidTable(String),
    #[error("kappa undefined: every rating falls in one category")]
    DegenerateAgreement,
    #[error("runs must be >= 1")]
    NoRuns,
    #[error("run {run} (seed {seed}) failed: {source}")]
    RunFailed {
        run: usize,
        seed: u64,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// Counts indexed `[gold][predicted]` in label order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; Label::COUNT]; Label::COUNT],
}

impl ConfusionMatrix {
    pub fn add(&mut self, gold: Label, pred: Label) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn get(&self, gold: Label, pred: Label) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    pub fn true_positives(&self, label: Label) -> u64 {
        self.get(label, label)
    }

    pub fn predicted(&self, label: Label) -> u64 {
        Label::ALL.iter().map(|&g| self.get(g, label)).sum()
    }

    pub fn support(&self, label: Label) -> u64 {
        self.counts[label.index()].iter().sum()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14}", "gold\\pred")?;
        for l in Label::ALL {
            write!(f, "{:>14}", l.as_str())?;
        }
        for g in Label::ALL {
            write!(f, "\n{:<14}", g.as_str())?;
            for p in Label::ALL {
                write!(f, "{:>14}", self.get(g, p))?;
            }
        }
        Ok(())
    }
}

/// Counts every token once at `(gold, pred)`.
pub fn build_confusion<G, P>(gold: &[G], pred: &[P]) -> Result<ConfusionMatrix, EvalError>
where
    G: AsRef<[Label]>,
    P: AsRef<[Label]>,
{
    if gold.len() != pred.len() {
        return Err(EvalError::ShapeMismatch(format!("{} gold sequences, {} predicted", gold.len(), pred.len())));
    }
    let mut m = ConfusionMatrix::default();
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g.len() != p.len() {
            return Err(EvalError::ShapeMismatch(format!(
                "sequence {i}: {} gold labels, {} predicted",
                g.len(),
                p.len()
            )));
        }
        for (&gl, &pl) in g.iter().zip(p) {
            m.add(gl, pl);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// A zero denominator was replaced by 0.
    pub zero_division: bool,
}

impl ClassMetrics {
    fn from_counts(tp: u64, predicted: u64, support: u64) -> ClassMetrics {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        ClassMetrics { precision, recall, f1, support, zero_division: predicted == 0 || support == 0 }
    }
}

/// Per-class metrics for the three non-O classes and their unweighted means.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub redup: ClassMetrics,
    pub rep: ClassMetrics,
    pub other: ClassMetrics,
    /// Diagnostics only; never enters the macro average.
    pub o: ClassMetrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub tokens: u64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::Redup => &self.redup,
            Label::Rep => &self.rep,
            Label::Other => &self.other,
            Label::O => &self.o,
        }
    }

    /// Classes whose precision or recall hit a zero denominator.
    pub fn zero_division(&self) -> Vec<Label> {
        Label::CLASSES.into_iter().filter(|&l| self.class(l).zero_division).collect()
    }

    pub fn metrics(&self) -> Metrics {
        Metrics([
            self.redup.precision,
            self.redup.recall,
            self.redup.f1,
            self.rep.precision,
            self.rep.recall,
            self.rep.f1,
            self.other.precision,
            self.other.recall,
            self.other.f1,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
        ])
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}{:>10}{:>10}{:>10}{:>10}", "class", "P", "R", "F1", "support")?;
        for l in Label::CLASSES {
            let c = self.class(l);
            writeln!(
                f,
                "{:<14}{:>10.4}{:>10.4}{:>10.4}{:>10}",
                l.as_str(),
                c.precision,
                c.recall,
                c.f1,
                c.support
            )?;
        }
        write!(
            f,
            "{:<14}{:>10.4}{:>10.4}{:>10.4}{:>10}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1, self.tokens
        )
    }
}

/// Precision, recall and F1 per class with the zero-denominator-is-zero
/// convention; macro values average exactly REDUP, REP and OTHER.
pub fn compute_metrics(matrix: &ConfusionMatrix) -> EvalReport {
    let class = |l: Label| ClassMetrics::from_counts(matrix.true_positives(l), matrix.predicted(l), matrix.support(l));
    let (redup, rep, other, o) = (class(Label::Redup), class(Label::Rep), class(Label::Other), class(Label::O));
    let mean = |f: fn(&ClassMetrics) -> f64| (f(&redup) + f(&rep) + f(&other)) / 3.0;
    EvalReport {
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        redup,
        rep,
        other,
        o,
        tokens: matrix.total(),
        confusion: *matrix,
    }
}

/// The twelve reported numbers in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics(pub [f64; 12]);

impl Metrics {
    pub const KEYS: [&'static str; 12] = [
        "redup_p", "redup_r", "redup_f1", "rep_p", "rep_r", "rep_f1", "other_p", "other_r", "other_f1", "macro_p",
        "macro_r", "macro_f1",
    ];

    pub fn get(&self, key: &str) -> Option<f64> {
        Self::KEYS.iter().position(|k| *k == key).map(|i| self.0[i])
    }

    pub fn macro_f1(&self) -> f64 {
        self.0[11]
    }
}

/// Per-run reports with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seeds: Vec<u64>,
    pub reports: Vec<EvalReport>,
    pub mean: Metrics,
    pub std: Metrics,
}

impl RunSummary {
    pub fn from_reports(seeds: Vec<u64>, reports: Vec<EvalReport>) -> RunSummary {
        let n = reports.len() as f64;
        let rows: Vec<Metrics> = reports.iter().map(EvalReport::metrics).collect();
        let mean = Metrics(std::array::from_fn(|k| rows.iter().map(|r| r.0[k]).sum::<f64>() / n));
        let std = Metrics(std::array::from_fn(|k| {
            if rows.len() < 2 {
                return 0.0;
            }
            let ss: f64 = rows.iter().map(|r| (r.0[k] - mean.0[k]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        }));
        RunSummary { seeds, reports, mean, std }
    }

    pub fn runs(&self) -> usize {
        self.reports.len()
    }

    /// Flat JSON object: mean metrics under their plain keys, standard
    /// deviations under `<key>_std`, run count, zero-division notes, and
    /// every provenance entry under `config.<key>`.
    pub fn to_json(&self, provenance: &BTreeMap<String, String>) -> Value {
        let mut obj = Map::new();
        for (k, key) in Metrics::KEYS.iter().enumerate() {
            obj.insert((*key).to_string(), json!(self.mean.0[k]));
            obj.insert(format!("{key}_std"), json!(self.std.0[k]));
        }
        obj.insert("runs".into(), json!(self.runs()));
        obj.insert("seeds".into(), json!(self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")));
        obj.insert("tokens".into(), json!(self.reports.first().map_or(0, |r| r.tokens)));
        let mut zero: Vec<&str> = Vec::new();
        for r in &self.reports {
            for l in r.zero_division() {
                if !zero.contains(&l.as_str()) {
                    zero.push(l.as_str());
                }
            }
        }
        obj.insert("zero_division".into(), json!(zero.join(",")));
        for (k, v) in provenance {
            obj.insert(format!("config.{k}"), json!(v));
        }
        Value::Object(obj)
    }
}

/// Runs `experiment` with seeds `base_seed .. base_seed + runs` in order.
pub fn multi_run<F, E>(mut experiment: F, runs: usize, base_seed: u64) -> Result<RunSummary, EvalError>
where
    F: FnMut(u64) -> Result<EvalReport, E>,
    E: Into<Box<dyn std::error::Error + Send + Sync>>,
{
    if runs == 0 {
        return Err(EvalError::NoRuns);
    }
    let mut seeds = Vec::with_capacity(runs);
    let mut reports = Vec::with_capacity(runs);
    for run in 0..runs {
        let seed = base_seed.wrapping_add(run as u64);
        let report = experiment(seed).map_err(|e| EvalError::RunFailed { run, seed, source: e.into() })?;
        seeds.push(seed);
        reports.push(report);
    }
    Ok(RunSummary::from_reports(seeds, reports))
}

/// Rating counts per item and category; every row sums to the number of
/// raters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementTable {
    counts: Vec<Vec<u32>>,
    raters: u32,
}

impl AgreementTable {
    pub fn new(counts: Vec<Vec<u32>>) -> Result<AgreementTable, EvalError> {
        let first = counts.first().ok_or_else(|| EvalError::InvalidTable("no items".into()))?;
        let categories = first.len();
        let raters: u32 = first.iter().sum();
        if raters < 2 {
            return Err(EvalError::InvalidTable("need at least two raters per item".into()));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != categories {
                return Err(EvalError::InvalidTable(format!("item {i} has {} categories", row.len())));
            }
            if row.iter().sum::<u32>() != raters {
                return Err(EvalError::InvalidTable(format!("item {i} does not sum to {raters}")));
            }
        }
        Ok(AgreementTable { counts, raters })
    }

    /// Builds a table from one label per rater per item.
    pub fn from_ratings<R: AsRef<[Label]>>(items: &[R]) -> Result<AgreementTable, EvalError> {
        let counts = items
            .iter()
            .map(|r| {
                let mut row = vec![0u32; Label::COUNT];
                for l in r.as_ref() {
                    row[l.index()] += 1;
                }
                row
            })
            .collect();
        AgreementTable::new(counts)
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }
}

/// Fleiss' kappa: `(P - Pe) / (1 - Pe)`.
pub fn fleiss_kappa(table: &AgreementTable) -> Result<f64, EvalError> {
    let n = table.raters as f64;
    let items = table.counts.len() as f64;
    let categories = table.counts[0].len();

    let p_bar = table
        .counts
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c as f64) * (c as f64)).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let pj = table.counts.iter().map(|row| row[j] as f64).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(EvalError::DegenerateAgreement);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let gold = vec![vec![Redup, Redup, O], vec![Rep, Other]];
        let m = build_confusion(&gold, &gold).unwrap();
        for g in Label::ALL {
            for p in Label::ALL {
                if g != p {
                    assert_eq!(m.get(g, p), 0);
                }
            }
        }
        assert_eq!(m.total(), 5);
        assert_eq!(compute_metrics(&m).macro_f1, 1.0);
    }

    #[test]
    fn four_token_example() {
        let m = build_confusion(&[vec![Redup, Rep, O, Other]], &[vec![Redup, Redup, O, Other]]).unwrap();
        assert_eq!(m.get(Rep, Redup), 1);
        assert_eq!(m.get(Redup, Redup), 1);
        assert_eq!(m.get(O, O), 1);
        assert_eq!(m.get(Other, Other), 1);
        assert_eq!(m.total(), 4);
        let r = compute_metrics(&m);
        assert_eq!(r.redup.precision, 0.5);
        assert_eq!(r.redup.recall, 1.0);
        assert_eq!(r.redup.f1, 2.0 / 3.0);
        assert_eq!(r.rep.f1, 0.0);
        assert!(r.rep.zero_division);
        assert_eq!(r.other.f1, 1.0);
        assert!((r.macro_f1 - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_zero_matrix() {
        let empty: Vec<Vec<Label>> = Vec::new();
        let m = build_confusion(&empty, &empty).unwrap();
        assert_eq!(m, ConfusionMatrix::default());
        let r = compute_metrics(&m);
        assert_eq!(r.macro_f1, 0.0);
        assert_eq!(r.zero_division(), vec![Redup, Rep, Other]);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(build_confusion(&[vec![O]], &[vec![O, O]]), Err(EvalError::ShapeMismatch(_))));
        assert!(matches!(build_confusion(&[vec![O]], &Vec::<Vec<Label>>::new()), Err(EvalError::ShapeMismatch(_))));
    }

    #[test]
    fn absent_class_is_zero_with_note() {
        let m = build_confusion(&[vec![Redup, O]], &[vec![Redup, O]]).unwrap();
        let r = compute_metrics(&m);
        assert_eq!((r.other.precision, r.other.recall, r.other.f1), (0.0, 0.0, 0.0));
        assert!(r.other.zero_division);
        assert!(!r.redup.zero_division);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_perfect_agreement() {
        let t = AgreementTable::new(vec![vec![3, 0], vec![0, 3], vec![3, 0]]).unwrap();
        assert_eq!(fleiss_kappa(&t).unwrap(), 1.0);
    }

    #[test]
    fn kappa_two_by_two() {
        // P = 0.5, Pe = 0.625
        let t = AgreementTable::new(vec![vec![2, 0], vec![1, 1]]).unwrap();
        assert!((fleiss_kappa(&t).unwrap() - (-1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate() {
        let t = AgreementTable::new(vec![vec![0, 2, 0], vec![0, 2, 0]]).unwrap();
        assert!(matches!(fleiss_kappa(&t), Err(EvalError::DegenerateAgreement)));
    }

    #[test]
    fn kappa_reference_table() {
        // worked example: 10 items, 14 raters, 5 categories
        let rows = vec![
            vec![0, 0, 0, 0, 14],
            vec![0, 2, 6, 4, 2],
            vec![0, 0, 3, 5, 6],
            vec![0, 3, 9, 2, 0],
            vec![2, 2, 8, 1, 1],
            vec![7, 7, 0, 0, 0],
            vec![3, 2, 6, 3, 0],
            vec![2, 5, 3, 2, 2],
            vec![6, 5, 2, 1, 0],
            vec![0, 2, 2, 3, 7],
        ];
        let k = fleiss_kappa(&AgreementTable::new(rows).unwrap()).unwrap();
        assert!((k - 0.209_930_704_421_955_2).abs() < 1e-12, "{k}");
    }

    #[test]
    fn table_validation() {
        assert!(AgreementTable::new(vec![]).is_err());
        assert!(AgreementTable::new(vec![vec![1, 0]]).is_err());
        assert!(AgreementTable::new(vec![vec![2, 0], vec![1, 0]]).is_err());
        let t = AgreementTable::from_ratings(&[vec![Redup, Redup, Rep], vec![O, O, O]]).unwrap();
        assert_eq!(t.raters(), 3);
        assert_eq!(t.items(), 2);
    }

    fn report_with_f1(f: f64) -> EvalReport {
        let mut r = compute_metrics(&ConfusionMatrix::default());
        r.macro_f1 = f;
        r.redup.f1 = f;
        r
    }

    #[test]
    fn single_run_has_zero_std() {
        let s = multi_run(|_| Ok::<_, EvalError>(report_with_f1(0.7)), 1, 42).unwrap();
        assert_eq!(s.mean.macro_f1(), 0.7);
        assert_eq!(s.std.macro_f1(), 0.0);
        assert_eq!(s.seeds, vec![42]);
    }

    #[test]
    fn constant_experiment_has_zero_std() {
        let s = multi_run(|_| Ok::<_, EvalError>(report_with_f1(0.4)), 5, 0).unwrap();
        assert_eq!(s.runs(), 5);
        assert!(s.std.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mean_and_sample_std() {
        let s = multi_run(|seed| Ok::<_, EvalError>(report_with_f1(if seed == 10 { 0.6 } else { 0.8 })), 2, 10).unwrap();
        assert!((s.mean.macro_f1() - 0.7).abs() < 1e-15);
        // sample std of {0.6, 0.8} = sqrt(0.02)
        assert!((s.std.macro_f1() - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.mean.get("redup_f1"), Some(s.mean.0[2]));
    }

    #[test]
    fn failures_carry_run_index() {
        let err = multi_run(|seed| if seed == 3 { Err("boom") } else { Ok(report_with_f1(0.5)) }, 5, 1).unwrap_err();
        assert!(matches!(err, EvalError::RunFailed { run: 2, seed: 3, .. }));
        assert!(matches!(multi_run(|_| Ok::<_, EvalError>(report_with_f1(0.5)), 0, 1), Err(EvalError::NoRuns)));
    }

    #[test]
    fn json_keys() {
        let s = multi_run(|_| Ok::<_, EvalError>(report_with_f1(0.5)), 2, 0).unwrap();
        let prov: BTreeMap<String, String> = [("seed".to_string(), "0".to_string())].into();
        let v = s.to_json(&prov);
        for key in Metrics::KEYS.iter().chain(&["runs", "macro_f1_std", "config.seed"]) {
            assert!(v.get(*key).is_some(), "missing {key}");
        }
        assert_eq!(v["runs"], json!(2));
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<Vec<(usize, usize)>>> {
        proptest::collection::vec(proptest::collection::vec((0usize..4, 0usize..4), 0..8), 0..12)
    }

    proptest! {
        #[test]
        fn metrics_are_total_and_bounded(seqs in arb_pairs()) {
            let gold: Vec<Vec<Label>> = seqs.iter().map(|s| s.iter().map(|p| Label::ALL[p.0]).collect()).collect();
            let pred: Vec<Vec<Label>> = seqs.iter().map(|s| s.iter().map(|p| Label::ALL[p.1]).collect()).collect();
            let m = build_confusion(&gold, &pred).unwrap();
            let r = compute_metrics(&m);
            for x in r.metrics().0 {
                prop_assert!(x.is_finite() && (0.0..=1.0).contains(&x));
            }
            let tp: u64 = Label::CLASSES.iter().map(|&l| m.true_positives(l)).sum();
            let diag: u64 = (0..3).map(|i| m.counts[i][i]).sum();
            prop_assert_eq!(tp, diag);
            for c in [r.redup, r.rep, r.other] {
                let expected = if c.precision + c.recall > 0.0 { 2.0 * c.precision * c.recall / (c.precision + c.recall) } else { 0.0 };
                prop_assert!((c.f1 - expected).abs() < 1e-15);
            }
            // sentence order does not matter
            let mut rg = gold.clone();
            let mut rp = pred.clone();
            rg.reverse();
            rp.reverse();
            prop_assert_eq!(compute_metrics(&build_confusion(&rg, &rp).unwrap()), r);
        }

        #[test]
        fn kappa_at_most_one(rows in proptest::collection::vec(0u32..4, 1..10)) {
            // 3 raters, 2 categories: row value = raters choosing category 0
            let rows: Vec<Vec<u32>> = rows.into_iter().map(|a| vec![a.min(3), 3 - a.min(3)]).collect();
            let concentrated = rows.iter().all(|r| r.contains(&3));
            let t = AgreementTable::new(rows).unwrap();
            match fleiss_kappa(&t) {
                Ok(k) => {
                    prop_assert!(k <= 1.0 + 1e-12);
                    prop_assert_eq!((k - 1.0).abs() < 1e-12, concentrated);
                }
                Err(EvalError::DegenerateAgreement) => prop_assert!(concentrated),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }
}
