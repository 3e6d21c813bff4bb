//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mapn_core::metrics::{AnnotationTable, Direction, Metric, MetricSet, Operator};
use mapn_core::model::{Channel, Color, MapnGraph, ProcessId};
use mapn_core::Variant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn pid(s: &str) -> ProcessId {
    ProcessId::new(s).unwrap()
}

pub fn metric(name: &str, priority: u32, merge: Operator, compose: Operator) -> Metric {
    Metric {
        name: name.into(),
        priority,
        direction: Direction::Lower,
        merge,
        compose,
    }
}

/// Random single-color DAG on `n >= 2` processes `p0..p{n-1}` with unique
/// source `p0` and sink `p{n-1}`; edges only go from lower to higher index.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize) -> Vec<Channel> {
    let mut edges = BTreeSet::new();
    for j in 1..n {
        edges.insert((rng.gen_range(0..j), j));
    }
    for i in 0..n - 1 {
        edges.insert((i, rng.gen_range(i + 1..n)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.2) {
                edges.insert((i, j));
            }
        }
    }
    let color = Color::new("k").unwrap();
    edges
        .into_iter()
        .map(|(i, j)| Channel::new(pid(&format!("p{i}")), pid(&format!("p{j}")), color.clone()))
        .collect()
}

/// Successor lists keyed by process, from a channel list.
fn successors(channels: &[Channel]) -> BTreeMap<&ProcessId, Vec<&ProcessId>> {
    let mut succ: BTreeMap<&ProcessId, Vec<&ProcessId>> = BTreeMap::new();
    for c in channels {
        succ.entry(&c.writer).or_default().push(&c.reader);
        succ.entry(&c.reader).or_default();
    }
    succ
}

/// Every source-to-sink path of a single-source single-sink DAG.
pub fn all_paths(channels: &[Channel], source: &ProcessId, sink: &ProcessId) -> Vec<Vec<ProcessId>> {
    let succ = successors(channels);
    let mut paths = Vec::new();
    let mut stack = vec![vec![source.clone()]];
    while let Some(path) = stack.pop() {
        let last = path.last().unwrap();
        if last == sink {
            paths.push(path);
            continue;
        }
        for &next in &succ[last] {
            let mut p = path.clone();
            p.push(next.clone());
            stack.push(p);
        }
    }
    paths
}

/// Path weight summed from the source forward.
fn path_sum(path: &[ProcessId], value: &impl Fn(&ProcessId) -> f64) -> f64 {
    path.iter().fold(0.0, |acc, p| acc + value(p))
}

/// Longest (max-plus) or shortest (min-plus) path weight by exhaustive
/// path enumeration.
pub fn extreme_path(
    channels: &[Channel],
    source: &ProcessId,
    sink: &ProcessId,
    value: impl Fn(&ProcessId) -> f64,
    longest: bool,
) -> f64 {
    let sums = all_paths(channels, source, sink)
        .into_iter()
        .map(|p| path_sum(&p, &value));
    if longest {
        sums.fold(f64::NEG_INFINITY, f64::max)
    } else {
        sums.fold(f64::INFINITY, f64::min)
    }
}

/// Sum/sum aggregation: each process contributes its value once per path
/// from it to the sink.
pub fn path_weighted_sum(channels: &[Channel], sink: &ProcessId, value: impl Fn(&ProcessId) -> f64) -> f64 {
    let succ = successors(channels);
    let mut count: BTreeMap<&ProcessId, f64> = BTreeMap::new();
    fn paths_to<'a>(
        p: &'a ProcessId,
        sink: &ProcessId,
        succ: &BTreeMap<&'a ProcessId, Vec<&'a ProcessId>>,
        memo: &mut BTreeMap<&'a ProcessId, f64>,
    ) -> f64 {
        if p == sink {
            return 1.0;
        }
        if let Some(&n) = memo.get(p) {
            return n;
        }
        let n = succ[p].iter().map(|q| paths_to(q, sink, succ, memo)).sum();
        memo.insert(p, n);
        n
    }
    let procs: Vec<&ProcessId> = succ.keys().copied().collect();
    procs
        .iter()
        .map(|p| value(p) * paths_to(p, sink, &succ, &mut count))
        .sum()
}

/// Random annotations on multiples of 1/4 so float sums are exact.
pub fn quarter_values(rng: &mut ChaCha8Rng, processes: &BTreeSet<ProcessId>, metrics: &MetricSet) -> AnnotationTable {
    let mut t = AnnotationTable::new(vec!["cpu".into()]);
    for p in processes {
        for m in metrics.iter() {
            t.set(p.clone(), &m.name, vec![rng.gen_range(0..400) as f64 / 4.0])
                .unwrap();
        }
    }
    t
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn variant_of(channels: &[Channel]) -> Variant {
    Variant::new(channels.iter().cloned())
}

/// Fork and join sets computed directly from the channel list.
pub fn forks_and_joins(g: &MapnGraph) -> (BTreeSet<ProcessId>, BTreeSet<ProcessId>) {
    let mut out: BTreeMap<&ProcessId, BTreeSet<&Color>> = BTreeMap::new();
    let mut inc: BTreeMap<&ProcessId, BTreeSet<&Color>> = BTreeMap::new();
    for c in g.channels() {
        out.entry(&c.writer).or_default().insert(&c.color);
        inc.entry(&c.reader).or_default().insert(&c.color);
    }
    let pick = |m: BTreeMap<&ProcessId, BTreeSet<&Color>>| {
        m.into_iter()
            .filter(|(_, cs)| cs.len() >= 2)
            .map(|(p, _)| p.clone())
            .collect()
    };
    (pick(out), pick(inc))
}

/// One small graph per well-formedness property, each breaking only it.
pub fn minimal_violators() -> Vec<(u8, MapnGraph)> {
    let p1 = MapnGraph::builder()
        .path(&["a", "b", "c", "d", "e"], "black")
        .path(&["a", "x", "b"], "red")
        .path(&["d", "y", "e"], "red")
        .build()
        .unwrap();
    let p2 = MapnGraph::builder()
        .path(&["a", "b", "c", "b"], "black")
        .path(&["c", "d"], "black")
        .build()
        .unwrap();
    let p3 = MapnGraph::builder()
        .path(&["a", "c"], "black")
        .path(&["b", "c"], "black")
        .build()
        .unwrap();
    let p4 = MapnGraph::builder()
        .channel("a", "b", "black")
        .channel("a", "c", "black")
        .channel("a", "e", "green")
        .path(&["b", "d"], "black")
        .path(&["c", "d"], "black")
        .path(&["e", "d"], "green")
        .build()
        .unwrap();
    let p5 = MapnGraph::builder()
        .parallel("a", &[1, 2])
        .path(&["s", "a", "b", "d"], "black")
        .path(&["a", "c", "d"], "red")
        .build()
        .unwrap();
    let p6 = MapnGraph::builder()
        .path(&["a", "b", "c", "e", "f"], "black")
        .path(&["b", "d", "e"], "black")
        .path(&["c", "x", "f"], "red")
        .build()
        .unwrap();
    vec![(1, p1), (2, p2), (3, p3), (4, p4), (5, p5), (6, p6)]
}
