//! Reference graphs used throughout the tests, the acceptance suite and the
//! CLI examples.
//!
//! `sample_graph` is the running synthetic example: source `a`, sink `u`, forks
//! `{b, c, g, p, v}`, joins `{d, e, f, j, u}`, and a parallel process `t`
//! with degrees `{1, 2, 4}`. `broken_block_graph` adds a dark-orange alternative from `f`
//! to `o` that breaks the structured-block rule around `g`.

use crate::metrics::{AnnotationTable, Direction, DupRule, Metric, MetricSet, Operator, ParallelRule, ParallelRules};
use crate::model::{MapnGraph, ProcessId};
use crate::Model;

fn sample_builder() -> crate::model::GraphBuilder {
    MapnGraph::builder()
        .parallel("t", &[1, 2, 4])
        .path(&["a", "b", "c", "d", "e", "f", "g"], "black")
        .path(&["g", "m", "n", "j"], "black")
        .path(&["g", "o", "j"], "black")
        .path(&["j", "v", "x", "u"], "black")
        .path(&["b", "p", "q", "d"], "green")
        .path(&["p", "r", "d"], "blue")
        .path(&["p", "s", "e"], "orange")
        .path(&["c", "w", "f"], "purple")
        .path(&["g", "k", "h", "j"], "red")
        .path(&["g", "i", "h"], "red")
        .path(&["i", "l", "j"], "red")
        .path(&["v", "t", "u"], "turkis")
}

pub fn sample_graph() -> MapnGraph {
    sample_builder().build().expect("sample graph is structurally valid")
}

pub fn broken_block_graph() -> MapnGraph {
    sample_builder()
        .path(&["f", "f1", "f2", "f3", "o"], "darkorange")
        .build()
        .expect("broken-block graph is structurally valid")
}

/// Max-plus execution-time metric.
pub fn time_metric() -> Metric {
    Metric {
        name: "time".into(),
        priority: 0,
        direction: Direction::Lower,
        merge: Operator::Max,
        compose: Operator::Sum,
    }
}

/// Additive energy metric.
pub fn energy_metric() -> Metric {
    Metric {
        name: "energy".into(),
        priority: 1,
        direction: Direction::Lower,
        merge: Operator::Sum,
        compose: Operator::Sum,
    }
}

/// Annotates every process of `graph` with `value` for each metric, one
/// target, and gives parallel processes a divide rule without overhead.
pub fn uniform_model(graph: MapnGraph, metrics: MetricSet, value: f64) -> Model {
    let mut annotations = AnnotationTable::new(vec!["cpu".into()]);
    let mut rules = ParallelRules::new();
    for p in graph.processes() {
        for m in metrics.iter() {
            annotations.set(p.id.clone(), &m.name, vec![value]).expect("one target");
            if p.is_parallel() {
                rules.insert(p.id.clone(), &m.name, ParallelRule::new(DupRule::Divide));
            }
        }
    }
    Model {
        graph,
        metrics,
        annotations,
        rules,
    }
}

/// Sample graph with all-ones execution time.
pub fn sample_model() -> Model {
    uniform_model(
        sample_graph(),
        MetricSet::new(vec![time_metric()]).expect("single metric"),
        1.0,
    )
}

pub fn pid(name: &str) -> ProcessId {
    ProcessId::new(name).expect("valid fixture name")
}
