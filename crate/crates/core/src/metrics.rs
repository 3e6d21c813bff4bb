//! Metrics, annotations, aggregation operators, constraints and ranking.
//!
//! Each process carries one value vector per metric (one entry per hardware
//! target). A variant is evaluated bottom-up from its source: a process with
//! no predecessors in the variant keeps its own value, any other process
//! composes its value with the merge of its predecessors' evaluations, one
//! merge operand per incoming channel. With `merge = max` and
//! `compose = sum` this is the usual max-plus longest-path timing.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ProcessId, Variant};

/// Absolute tolerance of the `==` comparator.
pub const EQ_TOLERANCE: f64 = 1e-9;

/// Per-metric evaluation: metric name to one value per target.
pub type Evaluations = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("unknown metric {0}")]
    UnknownMetric(String),
    #[error("metric {0} declared twice")]
    DuplicateMetric(String),
    #[error("metric priority {0} used twice")]
    DuplicatePriority(u32),
    #[error("process {process} has no annotation for metric {metric}")]
    MissingAnnotation { process: String, metric: String },
    #[error("annotation for {process}/{metric} has {got} values, expected {expected}")]
    LengthMismatch {
        process: String,
        metric: String,
        expected: usize,
        got: usize,
    },
    #[error("annotation table needs at least one target")]
    NoTargets,
    #[error("target index {index} out of range ({len} targets)")]
    TargetOutOfRange { index: usize, len: usize },
    #[error("variant contains a cycle")]
    Cycle,
    #[error("variant must have exactly one sink, found {0}")]
    NotSingleSink(usize),
    #[error("empty variant")]
    EmptyVariant,
    #[error("operator {0} undefined on an empty operand list")]
    EmptyMerge(Operator),
}

/// Aggregation operator; used n-ary as merge and binary as compose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Max,
    Min,
    Sum,
    Avg,
    Mul,
}

impl Operator {
    pub fn merge(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return match self {
                Operator::Sum => Some(0.0),
                Operator::Mul => Some(1.0),
                _ => None,
            };
        }
        let it = values.iter().copied();
        Some(match self {
            Operator::Max => it.fold(f64::NEG_INFINITY, f64::max),
            Operator::Min => it.fold(f64::INFINITY, f64::min),
            Operator::Sum => it.sum(),
            Operator::Avg => it.sum::<f64>() / values.len() as f64,
            Operator::Mul => it.product(),
        })
    }

    pub fn compose(self, own: f64, merged: f64) -> f64 {
        match self {
            Operator::Max => own.max(merged),
            Operator::Min => own.min(merged),
            Operator::Sum => own + merged,
            Operator::Avg => (own + merged) / 2.0,
            Operator::Mul => own * merged,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Max => "max",
            Operator::Min => "min",
            Operator::Sum => "sum",
            Operator::Avg => "avg",
            Operator::Mul => "mul",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "max" => Operator::Max,
            "min" => Operator::Min,
            "sum" => Operator::Sum,
            "avg" => Operator::Avg,
            "mul" => Operator::Mul,
            _ => return Err(format!("unknown operator {s:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Higher,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Lower => "lower",
            Direction::Higher => "higher",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Metric {
    pub name: String,
    /// Lower value means higher priority.
    pub priority: u32,
    pub direction: Direction,
    pub merge: Operator,
    pub compose: Operator,
}

/// Metrics ordered by priority.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MetricSet(Vec<Metric>);

impl MetricSet {
    pub fn new(mut metrics: Vec<Metric>) -> Result<Self, MetricsError> {
        let mut names = BTreeSet::new();
        let mut priorities = BTreeSet::new();
        for m in &metrics {
            if !names.insert(m.name.clone()) {
                return Err(MetricsError::DuplicateMetric(m.name.clone()));
            }
            if !priorities.insert(m.priority) {
                return Err(MetricsError::DuplicatePriority(m.priority));
            }
        }
        metrics.sort_by_key(|m| m.priority);
        Ok(MetricSet(metrics))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Metric> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.0.iter().find(|m| m.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|m| m.name == name)
    }

    pub fn as_slice(&self) -> &[Metric] {
        &self.0
    }
}

/// ν(p, m): value vectors per (process, metric), one entry per target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationTable {
    targets: Vec<String>,
    values: BTreeMap<(ProcessId, String), Vec<f64>>,
}

impl AnnotationTable {
    pub fn new(targets: Vec<String>) -> Self {
        AnnotationTable {
            targets,
            values: BTreeMap::new(),
        }
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn set(&mut self, process: ProcessId, metric: &str, values: Vec<f64>) -> Result<(), MetricsError> {
        if self.targets.is_empty() {
            return Err(MetricsError::NoTargets);
        }
        if values.len() != self.targets.len() {
            return Err(MetricsError::LengthMismatch {
                process: process.to_string(),
                metric: metric.to_string(),
                expected: self.targets.len(),
                got: values.len(),
            });
        }
        self.values.insert((process, metric.to_string()), values);
        Ok(())
    }

    pub fn get(&self, process: &ProcessId, metric: &str) -> Option<&[f64]> {
        self.values
            .get(&(process.clone(), metric.to_string()))
            .map(Vec::as_slice)
    }

    pub fn require(&self, process: &ProcessId, metric: &str) -> Result<&[f64], MetricsError> {
        self.get(process, metric)
            .ok_or_else(|| MetricsError::MissingAnnotation {
                process: process.to_string(),
                metric: metric.to_string(),
            })
    }

    pub fn remove_process(&mut self, process: &ProcessId) {
        self.values.retain(|(p, _), _| p != process);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProcessId, &str, &[f64])> {
        self.values.iter().map(|((p, m), v)| (p, m.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How a duplicate's value derives from the original parallel process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DupRule {
    /// ν(p, m) / degree: the work is split evenly.
    Divide,
    /// ν(p, m) unchanged.
    Replicate,
    Constant(f64),
}

impl DupRule {
    pub fn apply(self, original: f64, degree: u32) -> f64 {
        match self {
            DupRule::Divide => original / degree as f64,
            DupRule::Replicate => original,
            DupRule::Constant(c) => c,
        }
    }
}

/// `c0 + c1 * degree`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Affine {
    pub c0: f64,
    pub c1: f64,
}

impl Affine {
    pub fn new(c0: f64, c1: f64) -> Self {
        Affine { c0, c1 }
    }

    pub fn eval(self, degree: u32) -> f64 {
        self.c0 + self.c1 * degree as f64
    }
}

/// Derivation of unfolded annotations for one (parallel process, metric).
/// The distribute node gets `overhead_in`, the gather node `overhead_out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelRule {
    pub dup: DupRule,
    pub overhead_in: Affine,
    pub overhead_out: Affine,
}

impl ParallelRule {
    pub fn new(dup: DupRule) -> Self {
        ParallelRule {
            dup,
            overhead_in: Affine::default(),
            overhead_out: Affine::default(),
        }
    }

    pub fn with_overheads(mut self, overhead_in: Affine, overhead_out: Affine) -> Self {
        self.overhead_in = overhead_in;
        self.overhead_out = overhead_out;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParallelRules(BTreeMap<(ProcessId, String), ParallelRule>);

impl ParallelRules {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous rule for the pair, if any.
    pub fn insert(&mut self, process: ProcessId, metric: &str, rule: ParallelRule) -> Option<ParallelRule> {
        self.0.insert((process, metric.to_string()), rule)
    }

    pub fn get(&self, process: &ProcessId, metric: &str) -> Option<&ParallelRule> {
        self.0.get(&(process.clone(), metric.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProcessId, &str, &ParallelRule)> {
        self.0.iter().map(|((p, m), r)| (p, m.as_str(), r))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Lt => value < bound,
            Comparator::Le => value <= bound,
            Comparator::Gt => value > bound,
            Comparator::Ge => value >= bound,
            Comparator::Eq => (value - bound).abs() <= EQ_TOLERANCE,
        }
    }

    pub fn is_upper_bound(self) -> bool {
        matches!(self, Comparator::Lt | Comparator::Le)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "==",
        }
    }
}

impl FromStr for Comparator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            "==" => Comparator::Eq,
            _ => return Err(format!("unknown comparator {s:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub metric: String,
    pub comparator: Comparator,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Top-b selection only at the sink; output matches exhaustive enumeration.
    #[default]
    Exact,
    /// Top-b selection at every process; faster, may miss optima.
    Beam,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplorationConfig {
    pub constraints: Vec<Constraint>,
    /// Number of best variants to keep; 0 keeps every feasible one.
    pub best: usize,
    pub target_index: usize,
    pub mode: Mode,
}

impl ExplorationConfig {
    pub fn check(&self, metrics: &MetricSet, targets: usize) -> Result<(), MetricsError> {
        if self.target_index >= targets {
            return Err(MetricsError::TargetOutOfRange {
                index: self.target_index,
                len: targets,
            });
        }
        for c in &self.constraints {
            if metrics.get(&c.metric).is_none() {
                return Err(MetricsError::UnknownMetric(c.metric.clone()));
            }
        }
        Ok(())
    }
}

/// Evaluates every metric of `metrics` on `variant`, element-wise per target.
pub fn aggregate_variant(
    variant: &Variant,
    metrics: &MetricSet,
    ann: &AnnotationTable,
) -> Result<Evaluations, MetricsError> {
    let procs: Vec<&ProcessId> = variant.processes.iter().collect();
    if procs.is_empty() {
        return Err(MetricsError::EmptyVariant);
    }
    let local: BTreeMap<&ProcessId, usize> = procs.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let n = procs.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for ch in &variant.channels {
        let (w, r) = (local[&ch.writer], local[&ch.reader]);
        preds[r].push(w);
        succs[w].push(r);
    }
    let sinks: Vec<usize> = (0..n).filter(|&i| succs[i].is_empty()).collect();
    if sinks.len() != 1 {
        return Err(MetricsError::NotSingleSink(sinks.len()));
    }

    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(p) = ready.pop_front() {
        order.push(p);
        for &s in &succs[p] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.push_back(s);
            }
        }
    }
    if order.len() != n {
        return Err(MetricsError::Cycle);
    }

    let targets = ann.targets().len();
    let mut out = Evaluations::new();
    let mut value = vec![vec![0.0; targets]; n];
    let mut operands = Vec::new();
    for m in metrics.iter() {
        for &p in &order {
            let own = ann.require(procs[p], &m.name)?;
            for t in 0..targets {
                value[p][t] = if preds[p].is_empty() {
                    own[t]
                } else {
                    operands.clear();
                    operands.extend(preds[p].iter().map(|&q| value[q][t]));
                    let merged = m.merge.merge(&operands).ok_or(MetricsError::EmptyMerge(m.merge))?;
                    m.compose.compose(own[t], merged)
                };
            }
        }
        out.insert(m.name.clone(), value[sinks[0]].clone());
    }
    Ok(out)
}

/// Conjunction of every constraint at the configured target.
pub fn check_feasible(evals: &Evaluations, cfg: &ExplorationConfig) -> Result<bool, MetricsError> {
    for c in &cfg.constraints {
        let values = evals
            .get(&c.metric)
            .ok_or_else(|| MetricsError::UnknownMetric(c.metric.clone()))?;
        let v = *values.get(cfg.target_index).ok_or(MetricsError::TargetOutOfRange {
            index: cfg.target_index,
            len: values.len(),
        })?;
        if !c.comparator.holds(v, c.bound) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Lexicographic comparison over metrics in priority order at one target.
/// `Less` means `a` is better.
pub fn compare_evaluations(a: &Evaluations, b: &Evaluations, metrics: &MetricSet, target: usize) -> Ordering {
    for m in metrics.iter() {
        let va = a.get(&m.name).and_then(|v| v.get(target)).copied().unwrap_or(f64::NAN);
        let vb = b.get(&m.name).and_then(|v| v.get(target)).copied().unwrap_or(f64::NAN);
        let ord = match m.direction {
            Direction::Lower => va.total_cmp(&vb),
            Direction::Higher => vb.total_cmp(&va),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Best-first order with canonical-key tie-break, truncated to `cfg.best`
/// when it is non-zero.
pub fn rank_variants(mut variants: Vec<Variant>, metrics: &MetricSet, cfg: &ExplorationConfig) -> Vec<Variant> {
    variants.sort_by(|a, b| {
        compare_evaluations(&a.evaluations, &b.evaluations, metrics, cfg.target_index).then_with(|| a.key.cmp(&b.key))
    });
    if cfg.best > 0 {
        variants.truncate(cfg.best);
    }
    variants
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{energy_metric, pid, time_metric};
    use crate::model::{Channel, Color};

    fn chain_variant(names: &[&str]) -> Variant {
        Variant::new(
            names
                .windows(2)
                .map(|w| Channel::new(pid(w[0]), pid(w[1]), Color::new("k").unwrap())),
        )
    }

    fn table(values: &[(&str, f64)]) -> AnnotationTable {
        let mut ann = AnnotationTable::new(vec!["cpu".into()]);
        for (p, v) in values {
            ann.set(pid(p), "time", vec![*v]).unwrap();
        }
        ann
    }

    fn time_only() -> MetricSet {
        MetricSet::new(vec![time_metric()]).unwrap()
    }

    #[test]
    fn chain_sums() {
        let v = chain_variant(&["a", "b", "c"]);
        let ann = table(&[("a", 2.0), ("b", 3.0), ("c", 4.0)]);
        let ev = aggregate_variant(&v, &time_only(), &ann).unwrap();
        assert_eq!(ev["time"], vec![9.0]);
    }

    #[test]
    fn diamond_is_max_plus() {
        let k = Color::new("k").unwrap();
        let v = Variant::new(vec![
            Channel::new(pid("a"), pid("b"), k.clone()),
            Channel::new(pid("a"), pid("c"), k.clone()),
            Channel::new(pid("b"), pid("d"), k.clone()),
            Channel::new(pid("c"), pid("d"), k),
        ]);
        let ann = table(&[("a", 1.0), ("b", 2.0), ("c", 5.0), ("d", 1.0)]);
        let ev = aggregate_variant(&v, &time_only(), &ann).unwrap();
        assert_eq!(ev["time"], vec![7.0]);
    }

    #[test]
    fn missing_annotation_is_named() {
        let v = chain_variant(&["a", "b"]);
        let ann = table(&[("a", 1.0)]);
        let err = aggregate_variant(&v, &time_only(), &ann).unwrap_err();
        assert_eq!(
            err,
            MetricsError::MissingAnnotation {
                process: "b".into(),
                metric: "time".into()
            }
        );
    }

    #[test]
    fn cyclic_variant_rejected() {
        let k = Color::new("k").unwrap();
        let v = Variant::new(vec![
            Channel::new(pid("a"), pid("b"), k.clone()),
            Channel::new(pid("b"), pid("c"), k.clone()),
            Channel::new(pid("c"), pid("b"), k.clone()),
            Channel::new(pid("c"), pid("d"), k),
        ]);
        let ann = table(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 1.0)]);
        assert_eq!(aggregate_variant(&v, &time_only(), &ann), Err(MetricsError::Cycle));
    }

    #[test]
    fn targets_aggregate_independently() {
        let v = chain_variant(&["a", "b"]);
        let mut ann = AnnotationTable::new(vec!["big".into(), "little".into()]);
        ann.set(pid("a"), "time", vec![1.0, 10.0]).unwrap();
        ann.set(pid("b"), "time", vec![2.0, 20.0]).unwrap();
        let ev = aggregate_variant(&v, &time_only(), &ann).unwrap();
        assert_eq!(ev["time"], vec![3.0, 30.0]);
        assert!(ann.set(pid("a"), "time", vec![1.0]).is_err());
    }

    #[test]
    fn operators() {
        assert_eq!(Operator::Avg.merge(&[]), None);
        assert_eq!(Operator::Avg.merge(&[1.0, 2.0, 6.0]), Some(3.0));
        assert_eq!(Operator::Mul.merge(&[2.0, 3.0]), Some(6.0));
        assert_eq!(Operator::Min.compose(2.0, 1.0), 1.0);
        assert_eq!(Operator::Avg.compose(2.0, 4.0), 3.0);
        for op in ["max", "min", "sum", "avg", "mul"] {
            assert_eq!(op.parse::<Operator>().unwrap().as_str(), op);
        }
    }

    fn evals(pairs: &[(&str, f64)]) -> Evaluations {
        pairs.iter().map(|(m, v)| (m.to_string(), vec![*v])).collect()
    }

    fn cfg(constraints: Vec<(&str, Comparator, f64)>) -> ExplorationConfig {
        ExplorationConfig {
            constraints: constraints
                .into_iter()
                .map(|(m, comparator, bound)| Constraint {
                    metric: m.into(),
                    comparator,
                    bound,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn feasibility_examples() {
        let e = evals(&[("time", 9.0)]);
        assert!(check_feasible(&e, &cfg(vec![("time", Comparator::Le, 10.0)])).unwrap());
        let e = evals(&[("time", 9.0), ("energy", 5.0)]);
        let c = cfg(vec![("time", Comparator::Le, 10.0), ("energy", Comparator::Lt, 5.0)]);
        assert!(!check_feasible(&e, &c).unwrap());
        assert!(check_feasible(&e, &cfg(vec![])).unwrap());
        assert!(check_feasible(&evals(&[]), &cfg(vec![("x", Comparator::Lt, 1.0)])).is_err());
    }

    #[test]
    fn equality_uses_tolerance() {
        assert!(Comparator::Eq.holds(1.0 + 1e-10, 1.0));
        assert!(!Comparator::Eq.holds(1.0 + 1e-6, 1.0));
    }

    fn scored(key: &str, time: f64, energy: f64) -> Variant {
        let mut v = chain_variant(&["a", key]);
        v.evaluations = evals(&[("time", time), ("energy", energy)]);
        v
    }

    #[test]
    fn ranking_examples() {
        let metrics = MetricSet::new(vec![time_metric(), energy_metric()]).unwrap();
        let ranked = rank_variants(
            vec![scored("x", 9.0, 0.0), scored("y", 7.0, 0.0)],
            &metrics,
            &cfg(vec![]),
        );
        assert_eq!(ranked[0].evaluations["time"], vec![7.0]);

        let ranked = rank_variants(
            vec![scored("x", 5.0, 3.0), scored("y", 5.0, 2.0)],
            &metrics,
            &cfg(vec![]),
        );
        assert_eq!(ranked[0].evaluations["energy"], vec![2.0]);

        let ranked = rank_variants(
            vec![scored("z", 1.0, 1.0), scored("b", 1.0, 1.0)],
            &metrics,
            &cfg(vec![]),
        );
        assert!(ranked[0].key < ranked[1].key);

        let mut c = cfg(vec![]);
        c.best = 1;
        assert_eq!(
            rank_variants(vec![scored("z", 1.0, 1.0), scored("b", 2.0, 1.0)], &metrics, &c).len(),
            1
        );
    }

    #[test]
    fn higher_is_better_flips_order() {
        let mut m = time_metric();
        m.name = "accuracy".into();
        m.direction = Direction::Higher;
        let metrics = MetricSet::new(vec![m]).unwrap();
        let a = evals(&[("accuracy", 0.9)]);
        let b = evals(&[("accuracy", 0.8)]);
        assert_eq!(compare_evaluations(&a, &b, &metrics, 0), Ordering::Less);
    }

    #[test]
    fn metric_set_rejects_duplicates() {
        let mut e = energy_metric();
        e.priority = 0;
        assert_eq!(
            MetricSet::new(vec![time_metric(), e]),
            Err(MetricsError::DuplicatePriority(0))
        );
        assert!(MetricSet::new(vec![time_metric(), time_metric()]).is_err());
    }
}
