//! Unfolding of parallel processes into per-degree lanes.
//!
//! A parallel process `p` with degrees `{d1, ..., dk}` is replaced by `k`
//! alternative lanes between its predecessors and successors. The lane for
//! degree `d` is a distribute node `p.i<d>`, duplicates `p.<d>.1 ..
//! p.<d>.<d>` and a gather node `p.o<d>`. The smallest degree's lane keeps
//! the original color; every other lane gets the fresh color `p∥d`, which
//! turns the predecessors into forks and the successors into joins.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::metrics::{MetricsError, ParallelRules};
use crate::model::{Channel, Color, GraphError, MapnGraph, Process, ProcessId, PARALLEL_MARK};
use crate::oracle::{self, OracleError};
use crate::wellformed::{self, Diagnostic};
use crate::Model;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnfoldError {
    #[error("parallel process {0} must read and write a single color each")]
    NotMonochromatic(String),
    #[error("parallel process {0} cannot be the source or the sink")]
    Boundary(String),
    #[error("no parallel rule for process {process} and metric {metric}")]
    MissingRule { process: String, metric: String },
    #[error("unfolding {process} would reuse existing name {name}")]
    NameClash { process: String, name: String },
    #[error("unfolded graph is not well-formed: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    NotWellFormed(Vec<Diagnostic>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Distribute,
    Duplicate,
    Gather,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub original: ProcessId,
    pub degree: u32,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedModel {
    pub model: Model,
    /// Every added process mapped to the parallel process it came from.
    pub provenance: BTreeMap<ProcessId, Provenance>,
}

fn lane_color(p: &ProcessId, degree: u32) -> String {
    format!("{p}{PARALLEL_MARK}{degree}")
}

fn single_color(p: &ProcessId, colors: &[Color]) -> Result<Color, UnfoldError> {
    match colors {
        [c] => Ok(c.clone()),
        [] => Err(UnfoldError::Boundary(p.to_string())),
        _ => Err(UnfoldError::NotMonochromatic(p.to_string())),
    }
}

/// Replaces every parallel process of `model` by its lanes. Models without
/// parallel processes are returned unchanged with an empty provenance map.
pub fn unfold_model(model: &Model) -> Result<UnfoldedModel, UnfoldError> {
    let g = &model.graph;
    let parallel: Vec<&Process> = g.parallel_processes().collect();
    if parallel.is_empty() {
        return Ok(UnfoldedModel {
            model: model.clone(),
            provenance: BTreeMap::new(),
        });
    }
    let unfolding: BTreeSet<&ProcessId> = parallel.iter().map(|p| &p.id).collect();
    let mut processes: Vec<Process> = g.processes().iter().filter(|p| !p.is_parallel()).cloned().collect();
    let mut taken: BTreeSet<String> = g.processes().iter().map(|p| p.id.to_string()).collect();
    let existing_colors: BTreeSet<&str> = g.colors().iter().map(Color::as_str).collect();
    let mut channels: Vec<Channel> = g
        .channels()
        .iter()
        .filter(|c| !unfolding.contains(&c.writer) && !unfolding.contains(&c.reader))
        .cloned()
        .collect();
    let mut annotations = model.annotations.clone();
    let mut rules = ParallelRules::new();
    let mut provenance = BTreeMap::new();
    let targets = annotations.targets().len();

    for p in &parallel {
        let q = g.queries(&p.id)?;
        let in_color = single_color(&p.id, &q.incoming_colors)?;
        let out_color = single_color(&p.id, &q.outgoing_colors)?;
        let preds: Vec<&ProcessId> = q.read_channels.iter().map(|c| &c.writer).collect();
        let succs: Vec<&ProcessId> = q.write_channels.iter().map(|c| &c.reader).collect();
        if preds.iter().chain(&succs).any(|n| unfolding.contains(n)) {
            // Adjacent parallel processes would need lane-to-lane wiring.
            return Err(UnfoldError::NotMonochromatic(p.id.to_string()));
        }

        let mut per_metric = Vec::new();
        for m in model.metrics.iter() {
            let rule = model
                .rules
                .get(&p.id, &m.name)
                .ok_or_else(|| UnfoldError::MissingRule {
                    process: p.id.to_string(),
                    metric: m.name.clone(),
                })?;
            let own = annotations.require(&p.id, &m.name)?.to_vec();
            per_metric.push((m.name.clone(), *rule, own));
        }
        annotations.remove_process(&p.id);

        for (lane, &d) in p.parallel_degrees.iter().enumerate() {
            let (inner, first, last) = if lane == 0 {
                (in_color.clone(), in_color.clone(), out_color.clone())
            } else {
                let fresh = lane_color(&p.id, d);
                if existing_colors.contains(fresh.as_str()) {
                    return Err(UnfoldError::NameClash {
                        process: p.id.to_string(),
                        name: fresh,
                    });
                }
                let c = Color::new(fresh)?;
                (c.clone(), c.clone(), c)
            };
            let mut node = |name: String, role: Role| -> Result<ProcessId, UnfoldError> {
                if !taken.insert(name.clone()) {
                    return Err(UnfoldError::NameClash {
                        process: p.id.to_string(),
                        name,
                    });
                }
                let id = ProcessId::new(name)?;
                provenance.insert(
                    id.clone(),
                    Provenance {
                        original: p.id.clone(),
                        degree: d,
                        role,
                    },
                );
                processes.push(Process::new(id.clone()));
                Ok(id)
            };
            let dist = node(format!("{}.i{d}", p.id), Role::Distribute)?;
            let gather = node(format!("{}.o{d}", p.id), Role::Gather)?;
            let dups = (1..=d)
                .map(|j| node(format!("{}.{d}.{j}", p.id), Role::Duplicate))
                .collect::<Result<Vec<_>, _>>()?;

            for pred in &preds {
                channels.push(Channel::new((*pred).clone(), dist.clone(), first.clone()));
            }
            for dup in &dups {
                channels.push(Channel::new(dist.clone(), dup.clone(), inner.clone()));
                channels.push(Channel::new(dup.clone(), gather.clone(), inner.clone()));
            }
            for succ in &succs {
                channels.push(Channel::new(gather.clone(), (*succ).clone(), last.clone()));
            }

            for (metric, rule, own) in &per_metric {
                annotations.set(dist.clone(), metric, vec![rule.overhead_in.eval(d); targets])?;
                annotations.set(gather.clone(), metric, vec![rule.overhead_out.eval(d); targets])?;
                let dup_values: Vec<f64> = own.iter().map(|&v| rule.dup.apply(v, d)).collect();
                for dup in &dups {
                    annotations.set(dup.clone(), metric, dup_values.clone())?;
                }
            }
        }
    }

    for (p, m, r) in model.rules.iter() {
        if !unfolding.contains(p) {
            rules.insert(p.clone(), m, *r);
        }
    }
    let graph = MapnGraph::new(processes, channels)?;
    let diagnostics = wellformed::validate(&graph);
    if wellformed::has_errors(&diagnostics) {
        return Err(UnfoldError::NotWellFormed(diagnostics));
    }
    Ok(UnfoldedModel {
        model: Model {
            graph,
            metrics: model.metrics.clone(),
            annotations,
            rules,
        },
        provenance,
    })
}

/// Number of variants the unfolded graph would have, computed on `g`
/// directly: each variant of `g` counts once per combination of lanes of
/// the parallel processes it contains.
pub fn count_unfolded_variants(g: &MapnGraph) -> Result<u128, OracleError> {
    if g.channels().is_empty() {
        return Ok(g
            .processes()
            .first()
            .map_or(0, |p| p.parallel_degrees.len().max(1) as u128));
    }
    let lanes: Vec<u128> = g
        .processes()
        .iter()
        .map(|p| p.parallel_degrees.len().max(1) as u128)
        .collect();
    let mut total: u128 = 0;
    oracle::for_each_variant_closure(g, oracle::DEFAULT_CAP, |cl| {
        total += cl
            .reached
            .iter()
            .zip(&lanes)
            .filter(|(r, _)| **r)
            .map(|(_, l)| *l)
            .product::<u128>();
        Ok(())
    })?;
    Ok(total)
}
