//! Incremental exploration of the compact graph.
//!
//! Instead of enumerating variants and evaluating each from scratch, the
//! explorer walks the graph once, color by color, and carries *alternative
//! records* along the channels: every record is a source-rooted partial
//! variant ending at some process, together with its aggregated metric
//! values at that process. Joins combine the records of their same-colored
//! inputs into a cross product restricted to mutually compatible records
//! (no fork with two different chosen colors). Records reaching the sink
//! are exactly the variants of the graph.
//!
//! The outer queue `Q` holds `(process, color)` pairs still to be expanded;
//! the inner queue walks channels of the popped color as far as the
//! same-color inputs allow. `Q` is ordered by topological rank so every
//! pair is expanded at most once. Each channel keeps a cursor into its
//! writer's append-only record list, which makes re-traversals send only
//! what is new.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::metrics::{
    check_feasible, rank_variants, Comparator, Direction, Evaluations, ExplorationConfig, MetricsError, Mode, Operator,
};
use crate::model::{Channel, Color, GraphError, MapnGraph, ProcessId, Variant};
use crate::Model;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph must have exactly one source and one sink")]
    NotSingleSourceSink,
    #[error("parallel process {0} must be unfolded before exploration")]
    NotUnfolded(String),
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Counters collected during one exploration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExploreStats {
    pub queue_pops: usize,
    pub queue_pushes: usize,
    /// Largest number of times one `(process, color)` pair entered `Q`.
    pub max_pushes_per_pair: usize,
    pub channel_visits: usize,
    pub records: usize,
}

#[derive(Debug, Clone)]
struct Record {
    channels: Box<[u64]>,
    /// `(fork, chosen color)` sorted by fork.
    choices: Box<[(u32, u32)]>,
    evals: Box<[f64]>,
    label: (u32, u32),
    is_sink: bool,
    dead: bool,
}

#[derive(Debug, Clone, Copy)]
struct MetricOps {
    merge: Operator,
    compose: Operator,
    direction: Direction,
}

/// Upper bound that can be checked on partial records.
#[derive(Debug, Clone, Copy)]
struct MonotoneBound {
    slot: usize,
    comparator: Comparator,
    bound: f64,
}

/// Dense view of the model used by the exploration loop.
struct Dense {
    n: usize,
    colors: usize,
    targets: usize,
    target: usize,
    words: usize,
    order: Vec<usize>,
    rank: Vec<usize>,
    source: usize,
    sink: usize,
    own: Vec<Box<[f64]>>,
    ops: Vec<MetricOps>,
    bounds: Vec<MonotoneBound>,
    /// Per channel: index of its same-color group at the reader and position inside it.
    group_of: Vec<(usize, usize)>,
    /// Per process: read channels grouped by color.
    groups: Vec<Vec<(usize, Vec<usize>)>>,
    /// Per process: write channels grouped by color.
    outs: Vec<Vec<(usize, Vec<usize>)>>,
    in_colors: Vec<Vec<usize>>,
    is_fork: Vec<bool>,
    color_sinks: Vec<BTreeSet<usize>>,
    /// Channel keys, and channel indices sorted by key.
    keys: Vec<String>,
    key_order: Vec<usize>,
}

fn group_by_color(g: &MapnGraph, list: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for &c in list {
        let color = g.edges()[c].color;
        match out.iter_mut().find(|(k, _)| *k == color) {
            Some((_, v)) => v.push(c),
            None => out.push((color, vec![c])),
        }
    }
    out.sort_by_key(|(k, _)| *k);
    out
}

impl Dense {
    fn new(model: &Model, cfg: &ExplorationConfig) -> Result<Self, ExploreError> {
        let g = &model.graph;
        if let Some(p) = g.parallel_processes().next() {
            return Err(ExploreError::NotUnfolded(p.id.to_string()));
        }
        let targets = model.annotations.targets().len();
        cfg.check(&model.metrics, targets)?;
        let order = g.topo_order()?;
        let n = g.processes().len();
        let mut rank = vec![0; n];
        for (r, &p) in order.iter().enumerate() {
            rank[p] = r;
        }
        let (sources, sinks) = g.sources_and_sinks();
        if sources.len() != 1 || sinks.len() != 1 {
            return Err(ExploreError::NotSingleSourceSink);
        }
        let source = g.idx(sources.first().unwrap())?;
        let sink = g.idx(sinks.first().unwrap())?;

        let metrics: Vec<_> = model.metrics.iter().collect();
        let mut own = Vec::with_capacity(n);
        for p in g.processes() {
            let mut v = Vec::with_capacity(metrics.len() * targets);
            for m in &metrics {
                v.extend_from_slice(model.annotations.require(&p.id, &m.name)?);
            }
            own.push(v.into_boxed_slice());
        }
        let ops: Vec<MetricOps> = metrics
            .iter()
            .map(|m| MetricOps {
                merge: m.merge,
                compose: m.compose,
                direction: m.direction,
            })
            .collect();

        let t = cfg.target_index;
        let bounds = cfg
            .constraints
            .iter()
            .filter(|c| c.comparator.is_upper_bound())
            .filter_map(|c| {
                let mi = model.metrics.position(&c.metric)?;
                let m = metrics[mi];
                let monotone = matches!(m.compose, Operator::Sum | Operator::Max)
                    && matches!(m.merge, Operator::Sum | Operator::Max)
                    && own.iter().all(|v| v[mi * targets + t] >= 0.0);
                monotone.then_some(MonotoneBound {
                    slot: mi * targets + t,
                    comparator: c.comparator,
                    bound: c.bound,
                })
            })
            .collect();

        let groups: Vec<_> = (0..n).map(|p| group_by_color(g, g.reads_of(p))).collect();
        let outs: Vec<_> = (0..n).map(|p| group_by_color(g, g.writes_of(p))).collect();
        let mut group_of = vec![(0, 0); g.channels().len()];
        for gs in &groups {
            for (gi, (_, chs)) in gs.iter().enumerate() {
                for (pos, &c) in chs.iter().enumerate() {
                    group_of[c] = (gi, pos);
                }
            }
        }
        let mut color_sinks = vec![BTreeSet::new(); g.colors().len()];
        for (ci, color) in g.colors().iter().enumerate() {
            let sub = g.colored_subgraph(color)?;
            color_sinks[ci] = sub.sinks.iter().map(|p| g.idx(p)).collect::<Result<_, _>>()?;
        }
        let keys: Vec<String> = g.channels().iter().map(Channel::key).collect();
        let mut key_order: Vec<usize> = (0..keys.len()).collect();
        key_order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
        Ok(Dense {
            n,
            colors: g.colors().len(),
            targets,
            target: t,
            words: g.channels().len().div_ceil(64).max(1),
            order,
            rank,
            source,
            sink,
            own,
            ops,
            bounds,
            group_of,
            in_colors: (0..n).map(|p| g.in_colors(p)).collect(),
            is_fork: (0..n).map(|p| g.is_fork(p)).collect(),
            groups,
            outs,
            color_sinks,
            keys,
            key_order,
        })
    }

    fn violates_bound(&self, evals: &[f64]) -> bool {
        self.bounds.iter().any(|b| !b.comparator.holds(evals[b.slot], b.bound))
    }

    fn compare(&self, a: &[f64], b: &[f64]) -> Ordering {
        for (mi, op) in self.ops.iter().enumerate() {
            let slot = mi * self.targets + self.target;
            let ord = match op.direction {
                Direction::Lower => a[slot].total_cmp(&b[slot]),
                Direction::Higher => b[slot].total_cmp(&a[slot]),
            };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }
}

/// Merges sorted choice lists; `None` on a fork chosen with two colors.
fn merge_choices(a: &[(u32, u32)], b: &[(u32, u32)]) -> Option<Vec<(u32, u32)>> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                if a[i].1 != b[j].1 {
                    return None;
                }
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some(out)
}

type Trace<'a> = Box<dyn FnMut(&str) + 'a>;

/// Channel bitset, fork choices and evaluations of a record under construction.
type Partial = (Vec<u64>, Vec<Choice>, Vec<f64>);

/// `(fork, chosen color)`.
type Choice = (u32, u32);

/// Working state of one exploration; exposed so the queue and propagation
/// steps can be driven and inspected one at a time.
pub struct ExplorationState<'a> {
    model: &'a Model,
    cfg: &'a ExplorationConfig,
    d: Dense,
    records: Vec<Vec<Record>>,
    live: Vec<usize>,
    /// Per channel: writer record indices received through it.
    entries: Vec<Vec<u32>>,
    cursor: Vec<usize>,
    visits: Vec<u32>,
    queue: BTreeSet<(usize, usize)>,
    pushes: Vec<usize>,
    treated: Vec<bool>,
    next_label: Vec<u32>,
    pending: Vec<bool>,
    stats: ExploreStats,
    trace: Option<Trace<'a>>,
}

impl<'a> ExplorationState<'a> {
    /// Prepares the state with the source's record and its outgoing colors in `Q`.
    pub fn new(model: &'a Model, cfg: &'a ExplorationConfig) -> Result<Self, ExploreError> {
        let d = Dense::new(model, cfg)?;
        let m = model.graph.channels().len();
        let mut s = ExplorationState {
            model,
            cfg,
            records: vec![Vec::new(); d.n],
            live: vec![0; d.n],
            entries: vec![Vec::new(); m],
            cursor: vec![0; m],
            visits: vec![0; m],
            queue: BTreeSet::new(),
            pushes: vec![0; d.n * d.colors.max(1)],
            treated: vec![false; d.colors],
            next_label: vec![0; d.colors],
            pending: vec![false; m],
            stats: ExploreStats::default(),
            trace: None,
            d,
        };
        let src = s.d.source;
        s.records[src].push(Record {
            channels: vec![0; s.d.words].into_boxed_slice(),
            choices: Box::new([]),
            evals: s.d.own[src].clone(),
            label: (0, 0),
            is_sink: src == s.d.sink,
            dead: false,
        });
        s.live[src] = 1;
        s.stats.records = 1;
        let colors: Vec<usize> = s.d.outs[src].iter().map(|(c, _)| *c).collect();
        for color in colors {
            s.treated[color] = true;
            s.push_queue(src, color);
        }
        Ok(s)
    }

    /// Receives one line per queue operation and channel step.
    pub fn with_trace(mut self, trace: impl FnMut(&str) + 'a) -> Self {
        self.trace = Some(Box::new(trace));
        self
    }

    fn graph(&self) -> &'a MapnGraph {
        &self.model.graph
    }

    fn log(&mut self, line: impl FnOnce(&Self) -> String) {
        if self.trace.is_some() {
            let text = line(self);
            if let Some(t) = self.trace.as_mut() {
                t(&text);
            }
        }
    }

    fn pname(&self, p: usize) -> &'a str {
        self.graph().processes()[p].id.as_str()
    }

    fn cname(&self, c: usize) -> &'a str {
        self.graph().colors()[c].as_str()
    }

    /// `color#n`, with a trailing `$` when the record ends at the color's sink.
    fn label(&self, r: &Record) -> String {
        let (c, n) = r.label;
        format!("{}#{n}{}", self.cname(c as usize), if r.is_sink { "$" } else { "" })
    }

    fn push_queue(&mut self, p: usize, color: usize) {
        if self.queue.insert((self.d.rank[p], color)) {
            self.stats.queue_pushes += 1;
            let slot = &mut self.pushes[p * self.d.colors + color];
            *slot += 1;
            self.stats.max_pushes_per_pair = self.stats.max_pushes_per_pair.max(*slot);
            self.log(|s| format!("Q push ({}, {})", s.pname(p), s.cname(color)));
        }
    }

    /// Pending `(process, color)` pairs in pop order.
    pub fn queued(&self) -> Vec<(ProcessId, Color)> {
        let g = self.graph();
        self.queue
            .iter()
            .map(|&(r, c)| (g.processes()[self.d.order[r]].id.clone(), g.colors()[c].clone()))
            .collect()
    }

    /// Live records at `p` as partial variants with their evaluations at `p`.
    pub fn alternatives_at(&self, p: &ProcessId) -> Result<Vec<Variant>, ExploreError> {
        let i = self.graph().idx(p)?;
        Ok(self.records[i]
            .iter()
            .filter(|r| !r.dead)
            .map(|r| self.to_variant(r, i))
            .collect())
    }

    pub fn stats(&self) -> &ExploreStats {
        &self.stats
    }

    fn channel_index(&self, ch: &Channel) -> Result<usize, ExploreError> {
        self.graph()
            .channels()
            .binary_search(ch)
            .map_err(|_| ExploreError::UnknownChannel(ch.key()))
    }

    fn to_variant(&self, r: &Record, at: usize) -> Variant {
        let g = self.graph();
        let mut channels = Vec::new();
        let mut key = String::new();
        let mut member = vec![false; self.d.n];
        for &c in &self.d.key_order {
            if r.channels[c / 64] >> (c % 64) & 1 == 1 {
                if !key.is_empty() {
                    key.push(';');
                }
                key.push_str(&self.d.keys[c]);
                let e = g.edges()[c];
                member[e.writer] = true;
                member[e.reader] = true;
                channels.push(g.channels()[c].clone());
            }
        }
        let v = if channels.is_empty() {
            Variant::single(g.processes()[at].id.clone())
        } else {
            let processes = (0..self.d.n)
                .filter(|&p| member[p])
                .map(|p| g.processes()[p].id.clone())
                .collect();
            Variant::from_parts(channels, key, processes)
        };
        let t = self.d.targets;
        let evals: Evaluations = self
            .model
            .metrics
            .iter()
            .enumerate()
            .map(|(mi, m)| (m.name.clone(), r.evals[mi * t..(mi + 1) * t].to_vec()))
            .collect();
        v.with_evaluations(evals)
    }

    fn has_alternative_of_color(&self, r: usize, color: usize, in_flight: usize) -> bool {
        if self.live[r] > 0 {
            return true;
        }
        let unvisited_out = self.d.outs[r]
            .iter()
            .filter(|(c, _)| *c == color)
            .flat_map(|(_, chs)| chs)
            .any(|&ch| self.visits[ch] == 0);
        let w = self.graph().edges()[in_flight].writer;
        let incoming = self.records[w][self.cursor[in_flight]..].iter().any(|rec| !rec.dead);
        unvisited_out || incoming
    }

    /// Queue update for `reader` while `in_flight` (of color `xi`) is being
    /// propagated into it. Nothing happens until every read channel of the
    /// reader has been visited, counting `in_flight` as visited.
    pub fn update_exploration_queue(
        &mut self,
        reader: &ProcessId,
        xi: &Color,
        in_flight: &Channel,
    ) -> Result<(), ExploreError> {
        let r = self.graph().idx(reader)?;
        let xi = self
            .graph()
            .color_idx(xi)
            .ok_or_else(|| GraphError::UnknownColor(xi.to_string()))?;
        let ch = self.channel_index(in_flight)?;
        self.update_queue(r, xi, ch);
        Ok(())
    }

    fn update_queue(&mut self, r: usize, xi: usize, in_flight: usize) {
        let all_visited = self
            .graph()
            .reads_of(r)
            .iter()
            .all(|&c| c == in_flight || self.visits[c] > 0);
        if !all_visited {
            return;
        }
        for oi in 0..self.d.outs[r].len() {
            let color = self.d.outs[r][oi].0;
            if color == xi {
                continue;
            }
            if self.treated[color] {
                if self.has_alternative_of_color(r, color, in_flight) {
                    self.push_queue(r, color);
                }
            } else if !self.d.in_colors[r].contains(&color) {
                self.treated[color] = true;
                self.push_queue(r, color);
            }
        }
    }

    /// Sends the writer's not-yet-sent records of `ch` to the reader and
    /// combines them with the reader's other same-colored inputs. Returns
    /// whether the reader may forward along its channels of the same color:
    /// every same-colored read channel has been visited and this step either
    /// produced records or was the channel's first visit.
    pub fn propagate_alternatives(&mut self, ch: &Channel) -> Result<bool, ExploreError> {
        let c = self.channel_index(ch)?;
        Ok(self.propagate(c))
    }

    fn propagate(&mut self, ch: usize) -> bool {
        self.visits[ch] += 1;
        self.stats.channel_visits += 1;
        let first = self.visits[ch] == 1;
        let e = self.graph().edges()[ch];
        let (w, r) = (e.writer, e.reader);
        let start = self.cursor[ch];
        self.cursor[ch] = self.records[w].len();
        let fresh: Vec<u32> = (start..self.records[w].len())
            .filter(|&i| !self.records[w][i].dead)
            .map(|i| i as u32)
            .collect();
        let created = if fresh.is_empty() {
            Vec::new()
        } else {
            self.combine(ch, &fresh)
        };
        self.entries[ch].extend_from_slice(&fresh);
        let gained = created.len();
        self.stats.records += gained;
        self.live[r] += gained;
        self.records[r].extend(created);
        if self.cfg.mode == Mode::Beam && self.cfg.best > 0 {
            self.prune_beam(r);
        }
        let (gi, _) = self.d.group_of[ch];
        let ready = self.d.groups[r][gi].1.iter().all(|&c| self.visits[c] > 0);
        self.log(|s| {
            let newest = match s.records[r][s.records[r].len() - gained..] {
                [] => String::new(),
                [ref first, .., ref last] => format!(" {}..{}", s.label(first), s.label(last)),
                [ref only] => format!(" {}", s.label(only)),
            };
            format!(
                "q {}>{}#{}: +{gained}{newest} at {} ({} live){}",
                s.pname(w),
                s.pname(r),
                s.cname(e.color),
                s.pname(r),
                s.live[r],
                if ready { "" } else { ", waiting" }
            )
        });
        ready && (gained > 0 || first)
    }

    /// Records at the reader formed by each fresh writer record on `ch`
    /// together with every compatible combination of records already
    /// received on the other channels of the same color.
    fn combine(&mut self, ch: usize, fresh: &[u32]) -> Vec<Record> {
        let g = self.graph();
        let e = g.edges()[ch];
        let r = e.reader;
        let (gi, _) = self.d.group_of[ch];
        let group = &self.d.groups[r][gi].1;
        let others: Vec<usize> = group.iter().copied().filter(|&c| c != ch).collect();
        if others.iter().any(|&c| self.entries[c].is_empty()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut picked: Vec<(usize, u32)> = Vec::with_capacity(group.len());
        for &idx in fresh {
            let Some((bits, choices)) = self.extend(ch, idx, None) else {
                continue;
            };
            picked.clear();
            picked.push((ch, idx));
            self.combine_rec(&others, 0, bits, choices, &mut picked, &mut out);
        }
        let color = e.color;
        let is_sink = self.d.color_sinks[color].contains(&r);
        out.into_iter()
            .filter(|(_, _, evals)| !self.d.violates_bound(evals))
            .map(|(channels, choices, evals)| {
                self.next_label[color] += 1;
                Record {
                    channels: channels.into_boxed_slice(),
                    choices: choices.into_boxed_slice(),
                    evals: evals.into_boxed_slice(),
                    label: (color as u32, self.next_label[color]),
                    is_sink,
                    dead: false,
                }
            })
            .collect()
    }

    /// Adds channel `ch` and the writer's choice to record `idx`, optionally
    /// on top of an accumulated channel set and choice list.
    fn extend(&self, ch: usize, idx: u32, acc: Option<(&[u64], &[Choice])>) -> Option<(Vec<u64>, Vec<Choice>)> {
        let e = self.graph().edges()[ch];
        let rec = &self.records[e.writer][idx as usize];
        let mut choices = match acc {
            Some((_, prev)) => merge_choices(prev, &rec.choices)?,
            None => rec.choices.to_vec(),
        };
        if self.d.is_fork[e.writer] {
            choices = merge_choices(&choices, &[(e.writer as u32, e.color as u32)])?;
        }
        let mut bits = match acc {
            Some((prev, _)) => prev.iter().zip(rec.channels.iter()).map(|(a, b)| a | b).collect(),
            None => rec.channels.to_vec(),
        };
        bits[ch / 64] |= 1 << (ch % 64);
        Some((bits, choices))
    }

    fn combine_rec(
        &self,
        others: &[usize],
        k: usize,
        bits: Vec<u64>,
        choices: Vec<(u32, u32)>,
        picked: &mut Vec<(usize, u32)>,
        out: &mut Vec<Partial>,
    ) {
        if k == others.len() {
            out.push((bits, choices, self.evaluate(picked)));
            return;
        }
        let ch = others[k];
        for &idx in &self.entries[ch] {
            if let Some((b, c)) = self.extend(ch, idx, Some((&bits, &choices))) {
                picked.push((ch, idx));
                self.combine_rec(others, k + 1, b, c, picked, out);
                picked.pop();
            }
        }
    }

    fn evaluate(&self, picked: &[(usize, u32)]) -> Vec<f64> {
        let g = self.graph();
        let r = g.edges()[picked[0].0].reader;
        let own = &self.d.own[r];
        let t = self.d.targets;
        let mut operands = Vec::with_capacity(picked.len());
        let mut out = vec![0.0; own.len()];
        for (mi, op) in self.d.ops.iter().enumerate() {
            for slot in mi * t..(mi + 1) * t {
                operands.clear();
                operands.extend(
                    picked
                        .iter()
                        .map(|&(ch, idx)| self.records[g.edges()[ch].writer][idx as usize].evals[slot]),
                );
                let merged = op.merge.merge(&operands).unwrap_or(f64::NAN);
                out[slot] = op.compose.compose(own[slot], merged);
            }
        }
        out
    }

    /// Keeps the `best` lexicographically best live records at `r`.
    fn prune_beam(&mut self, r: usize) {
        let best = self.cfg.best;
        if self.live[r] <= best {
            return;
        }
        let mut live: Vec<usize> = (0..self.records[r].len())
            .filter(|&i| !self.records[r][i].dead)
            .collect();
        let recs = &self.records[r];
        live.sort_by(|&a, &b| self.d.compare(&recs[a].evals, &recs[b].evals).then(a.cmp(&b)));
        for &i in &live[best..] {
            self.records[r][i].dead = true;
        }
        self.live[r] = best;
    }

    /// Drains `Q`.
    pub fn run(&mut self) {
        while let Some((rank, color)) = self.queue.pop_first() {
            let p = self.d.order[rank];
            self.stats.queue_pops += 1;
            self.log(|s| format!("Q pop ({}, {})", s.pname(p), s.cname(color)));
            let mut q: VecDeque<usize> = self.same_color_writes(p, color).collect();
            for &ch in &q {
                self.pending[ch] = true;
            }
            while let Some(ch) = q.pop_front() {
                self.pending[ch] = false;
                let r = self.graph().edges()[ch].reader;
                self.update_queue(r, color, ch);
                if self.propagate(ch) {
                    let next: Vec<usize> = self.same_color_writes(r, color).collect();
                    for c in next {
                        if !std::mem::replace(&mut self.pending[c], true) {
                            q.push_back(c);
                        }
                    }
                }
            }
        }
    }

    fn same_color_writes(&self, p: usize, color: usize) -> impl Iterator<Item = usize> + '_ {
        self.d.outs[p]
            .iter()
            .filter(move |(c, _)| *c == color)
            .flat_map(|(_, chs)| chs.iter().copied())
    }

    /// Feasible sink records as ranked variants.
    pub fn finish(self) -> Result<(Vec<Variant>, ExploreStats), ExploreError> {
        let sink = self.d.sink;
        let mut variants = Vec::new();
        for rec in self.records[sink].iter().filter(|r| !r.dead) {
            let v = self.to_variant(rec, sink);
            if check_feasible(&v.evaluations, self.cfg)? {
                variants.push(v);
            }
        }
        Ok((rank_variants(variants, &self.model.metrics, self.cfg), self.stats))
    }
}

/// Feasible variants of an unfolded model, ranked and truncated to `cfg.best`.
pub fn explore_graph(model: &Model, cfg: &ExplorationConfig) -> Result<Vec<Variant>, ExploreError> {
    explore_with_stats(model, cfg).map(|(v, _)| v)
}

pub fn explore_with_stats(
    model: &Model,
    cfg: &ExplorationConfig,
) -> Result<(Vec<Variant>, ExploreStats), ExploreError> {
    let mut state = ExplorationState::new(model, cfg)?;
    state.run();
    state.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, pid, time_metric, uniform_model};
    use crate::metrics::{Constraint, MetricSet};
    use crate::oracle::{enumerate_variants, evaluate_and_rank};
    use crate::unfold::unfold_model;

    fn color(name: &str) -> Color {
        Color::new(name).unwrap()
    }

    fn ch(w: &str, r: &str, c: &str) -> Channel {
        Channel::new(pid(w), pid(r), color(c))
    }

    fn time_model(g: MapnGraph, values: &[(&str, f64)]) -> Model {
        let mut m = uniform_model(g, MetricSet::new(vec![time_metric()]).unwrap(), 1.0);
        for (p, v) in values {
            m.annotations.set(pid(p), "time", vec![*v]).unwrap();
        }
        m
    }

    #[test]
    fn chain_has_one_variant() {
        let g = MapnGraph::builder().path(&["a", "b", "c"], "k").build().unwrap();
        let model = time_model(g, &[("a", 2.0), ("b", 3.0), ("c", 4.0)]);
        let vs = explore_graph(&model, &ExplorationConfig::default()).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].evaluations["time"], vec![9.0]);
    }

    #[test]
    fn bound_kills_one_alternative() {
        let g = MapnGraph::builder()
            .path(&["a", "b", "d"], "black")
            .path(&["a", "c", "d"], "red")
            .build()
            .unwrap();
        let model = time_model(g, &[("b", 1.0), ("c", 10.0)]);
        let cfg = ExplorationConfig {
            constraints: vec![Constraint {
                metric: "time".into(),
                comparator: Comparator::Le,
                bound: 5.0,
            }],
            ..Default::default()
        };
        let vs = explore_graph(&model, &cfg).unwrap();
        assert_eq!(vs.len(), 1);
        assert!(vs[0].processes.contains(&pid("b")));
    }

    #[test]
    fn sample_graph_matches_oracle() {
        let model = unfold_model(&fixtures::sample_model()).unwrap().model;
        let cfg = ExplorationConfig::default();
        let (explored, stats) = explore_with_stats(&model, &cfg).unwrap();
        let oracle = evaluate_and_rank(enumerate_variants(&model.graph).unwrap(), &model, &cfg).unwrap();
        assert_eq!(explored.len(), 40);
        assert_eq!(explored, oracle);
        assert!(stats.max_pushes_per_pair <= 1 + model.graph.colors().len());
    }

    #[test]
    fn single_process_graph() {
        let g = MapnGraph::builder().process("solo").build().unwrap();
        let model = time_model(g, &[("solo", 3.0)]);
        let vs = explore_graph(&model, &ExplorationConfig::default()).unwrap();
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].evaluations["time"], vec![3.0]);
    }

    #[test]
    fn rejects_parallel_processes() {
        let err = explore_graph(&fixtures::sample_model(), &ExplorationConfig::default()).unwrap_err();
        assert_eq!(err, ExploreError::NotUnfolded("t".into()));
    }

    #[test]
    fn join_waits_for_all_same_color_inputs() {
        let model = unfold_model(&fixtures::sample_model()).unwrap().model;
        let cfg = ExplorationConfig::default();
        let mut s = ExplorationState::new(&model, &cfg).unwrap();
        for c in [
            ch("a", "b", "black"),
            ch("b", "c", "black"),
            ch("c", "d", "black"),
            ch("d", "e", "black"),
            ch("e", "f", "black"),
            ch("f", "g", "black"),
            ch("g", "o", "black"),
        ] {
            assert!(s.propagate_alternatives(&c).unwrap());
        }
        assert!(!s.propagate_alternatives(&ch("o", "j", "black")).unwrap());
        assert!(s.alternatives_at(&pid("j")).unwrap().is_empty());
        assert!(s.propagate_alternatives(&ch("g", "m", "black")).unwrap());
        assert!(s.propagate_alternatives(&ch("m", "n", "black")).unwrap());
        assert!(s.propagate_alternatives(&ch("n", "j", "black")).unwrap());
        assert_eq!(s.alternatives_at(&pid("j")).unwrap().len(), 1);
    }

    #[test]
    fn linear_channel_composes() {
        let g = MapnGraph::builder().path(&["a", "b"], "k").build().unwrap();
        let model = time_model(g, &[("a", 2.0), ("b", 5.0)]);
        let cfg = ExplorationConfig::default();
        let mut s = ExplorationState::new(&model, &cfg).unwrap();
        assert!(s.propagate_alternatives(&ch("a", "b", "k")).unwrap());
        let alts = s.alternatives_at(&pid("b")).unwrap();
        assert_eq!(alts.len(), 1);
        assert_eq!(alts[0].evaluations["time"], vec![7.0]);
    }

    #[test]
    fn gating_and_repush() {
        let model = unfold_model(&fixtures::sample_model()).unwrap().model;
        let cfg = ExplorationConfig::default();
        let mut s = ExplorationState::new(&model, &cfg).unwrap();
        let before = s.queued();
        // j still misses most of its inputs.
        s.update_exploration_queue(&pid("j"), &color("red"), &ch("l", "j", "red"))
            .unwrap();
        assert_eq!(s.queued(), before);

        // Reaching fork p over green queues its fresh colors.
        s.update_exploration_queue(&pid("p"), &color("green"), &ch("b", "p", "green"))
            .unwrap();
        let queued = s.queued();
        assert!(queued.contains(&(pid("p"), color("blue"))));
        assert!(queued.contains(&(pid("p"), color("orange"))));
    }

    #[test]
    fn red_arrival_repushes_black_at_j() {
        let model = unfold_model(&fixtures::sample_model()).unwrap().model;
        let cfg = ExplorationConfig::default();
        let mut s = ExplorationState::new(&model, &cfg).unwrap();
        let mut lines = Vec::new();
        let mut traced = ExplorationState::new(&model, &cfg)
            .unwrap()
            .with_trace(|l: &str| lines.push(l.to_string()));
        traced.run();
        drop(traced);
        assert!(lines.iter().any(|l| l == "Q push (j, black)"));
        s.run();
        assert_eq!(s.queued(), vec![]);
    }

    #[test]
    fn join_cross_product() {
        // Two independent forks upstream of a monochromatic join: 2 x 2 records.
        let g = MapnGraph::builder()
            .path(&["s", "a"], "k")
            .path(&["s", "b"], "k")
            .path(&["a", "a1", "a3"], "x1")
            .path(&["a", "a2", "a3"], "x2")
            .path(&["b", "b1", "b3"], "y1")
            .path(&["b", "b2", "b3"], "y2")
            .path(&["a3", "j"], "k")
            .path(&["b3", "j"], "k")
            .build()
            .unwrap();
        let model = time_model(g, &[]);
        let cfg = ExplorationConfig::default();
        let mut s = ExplorationState::new(&model, &cfg).unwrap();
        s.run();
        let at_j = s.alternatives_at(&pid("j")).unwrap();
        assert_eq!(at_j.len(), 4);
        assert_eq!(enumerate_variants(&model.graph).unwrap().len(), 4);
    }

    #[test]
    fn beam_keeps_subset_of_exact() {
        let model = unfold_model(&fixtures::sample_model()).unwrap().model;
        let exact = explore_graph(&model, &ExplorationConfig::default()).unwrap();
        let beam_cfg = ExplorationConfig {
            best: 2,
            mode: Mode::Beam,
            ..Default::default()
        };
        let beam = explore_graph(&model, &beam_cfg).unwrap();
        assert!(!beam.is_empty() && beam.len() <= 2);
        for v in &beam {
            assert!(exact.iter().any(|e| e.key == v.key));
        }
    }
}
