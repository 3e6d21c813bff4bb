//! Brute-force variant enumeration.
//!
//! Every assignment σ of an outgoing color to each *reached* fork defines a
//! closure from the source: a reached non-fork forwards along all its write
//! channels, a reached fork only along the channels of σ(fork). Closures
//! that reach the sink and read every join input of the chosen color are
//! variants. Forks outside the closure are never branched on, so pruned
//! branches do not multiply the count.
//!
//! This is the reference the incremental explorer is tested against; it
//! favours obviousness over speed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::metrics::{aggregate_variant, check_feasible, rank_variants, ExplorationConfig, MetricsError};
use crate::model::{canonical_key, GraphError, MapnGraph, Variant};
use crate::Model;

/// Default limit on the number of complete fork assignments visited.
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph must have exactly one source and one sink")]
    NotSingleSourceSink,
    #[error("join {process} reads several colors in one variant; the validator should have rejected this graph")]
    MixedJoin { process: String },
    #[error("more than {0} fork assignments; enumeration aborted")]
    Overflow(usize),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A complete closure handed to visitors: reached processes and included
/// channels, both indexed like the graph.
pub(crate) struct Closure<'a> {
    pub reached: &'a [bool],
    pub included: &'a [bool],
}

struct Walker<'g> {
    g: &'g MapnGraph,
    order: Vec<usize>,
    reached: Vec<bool>,
    included: Vec<bool>,
    trail: Vec<usize>,
    chan_trail: Vec<usize>,
    leaves: usize,
    cap: usize,
}

impl Walker<'_> {
    fn mark(&mut self, c: usize) {
        self.included[c] = true;
        self.chan_trail.push(c);
        let r = self.g.edges()[c].reader;
        if !self.reached[r] {
            self.reached[r] = true;
            self.trail.push(r);
        }
    }

    fn undo(&mut self, trail: usize, chans: usize) {
        for p in self.trail.drain(trail..) {
            self.reached[p] = false;
        }
        for c in self.chan_trail.drain(chans..) {
            self.included[c] = false;
        }
    }

    fn walk<F>(&mut self, pos: usize, visit: &mut F) -> Result<(), OracleError>
    where
        F: FnMut(&Closure<'_>) -> Result<(), OracleError>,
    {
        let g = self.g;
        for i in pos..self.order.len() {
            let p = self.order[i];
            if !self.reached[p] {
                continue;
            }
            if g.is_fork(p) {
                for color in g.out_colors(p) {
                    let (t, c) = (self.trail.len(), self.chan_trail.len());
                    for &ch in g.writes_of(p) {
                        if g.edges()[ch].color == color {
                            self.mark(ch);
                        }
                    }
                    self.walk(i + 1, visit)?;
                    self.undo(t, c);
                }
                return Ok(());
            }
            for &ch in g.writes_of(p) {
                self.mark(ch);
            }
        }
        self.leaves += 1;
        if self.leaves > self.cap {
            return Err(OracleError::Overflow(self.cap));
        }
        visit(&Closure {
            reached: &self.reached,
            included: &self.included,
        })
    }
}

/// Calls `visit` once per complete fork assignment whose closure is a valid
/// variant.
pub(crate) fn for_each_variant_closure<F>(g: &MapnGraph, cap: usize, mut visit: F) -> Result<(), OracleError>
where
    F: FnMut(&Closure<'_>) -> Result<(), OracleError>,
{
    let order = g.topo_order()?;
    let (sources, sinks) = g.sources_and_sinks();
    if sources.len() != 1 || sinks.len() != 1 {
        return Err(OracleError::NotSingleSourceSink);
    }
    let source = g.idx(sources.first().unwrap())?;
    let sink = g.idx(sinks.first().unwrap())?;
    let n = g.processes().len();
    let mut w = Walker {
        g,
        order,
        reached: vec![false; n],
        included: vec![false; g.channels().len()],
        trail: Vec::new(),
        chan_trail: Vec::new(),
        leaves: 0,
        cap,
    };
    w.reached[source] = true;
    w.walk(0, &mut |cl: &Closure<'_>| {
        if !cl.reached[sink] {
            return Ok(());
        }
        for p in (0..n).filter(|&p| cl.reached[p] && p != source) {
            let mut color = None;
            let mut count = 0;
            for &ch in g.reads_of(p).iter().filter(|&&ch| cl.included[ch]) {
                let c = g.edges()[ch].color;
                if color.is_some_and(|k| k != c) {
                    return Err(OracleError::MixedJoin {
                        process: g.processes()[p].id.to_string(),
                    });
                }
                color = Some(c);
                count += 1;
            }
            let color = color.expect("reached non-source process has an included read");
            let expected = g.reads_of(p).iter().filter(|&&ch| g.edges()[ch].color == color).count();
            if count != expected {
                return Ok(());
            }
        }
        visit(cl)
    })
}

/// All variants of `g`, sorted by canonical key.
pub fn enumerate_variants(g: &MapnGraph) -> Result<Vec<Variant>, OracleError> {
    enumerate_variants_capped(g, DEFAULT_CAP)
}

pub fn enumerate_variants_capped(g: &MapnGraph, cap: usize) -> Result<Vec<Variant>, OracleError> {
    if g.channels().is_empty() {
        return match g.processes() {
            [only] => Ok(vec![Variant::single(only.id.clone())]),
            _ => Err(OracleError::NotSingleSourceSink),
        };
    }
    let mut found: BTreeMap<String, Variant> = BTreeMap::new();
    for_each_variant_closure(g, cap, |cl| {
        let channels: Vec<_> = (0..cl.included.len())
            .filter(|&c| cl.included[c])
            .map(|c| &g.channels()[c])
            .collect();
        let key = canonical_key(channels.iter().copied());
        found
            .entry(key)
            .or_insert_with(|| Variant::new(channels.into_iter().cloned()));
        Ok(())
    })?;
    Ok(found.into_values().collect())
}

/// Evaluates, filters by feasibility and ranks.
pub fn evaluate_and_rank(
    variants: Vec<Variant>,
    model: &Model,
    cfg: &ExplorationConfig,
) -> Result<Vec<Variant>, OracleError> {
    cfg.check(&model.metrics, model.annotations.targets().len())?;
    let mut feasible = Vec::new();
    for v in variants {
        let evals = aggregate_variant(&v, &model.metrics, &model.annotations)?;
        if check_feasible(&evals, cfg)? {
            feasible.push(v.with_evaluations(evals));
        }
    }
    Ok(rank_variants(feasible, &model.metrics, cfg))
}
