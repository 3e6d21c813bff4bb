//! Graph model for multi-alternative process networks.
//!
//! A [`MapnGraph`] is a set of processes connected by colored channels. Each
//! color marks one algorithmic alternative; a process that writes (reads)
//! channels of two or more colors is a fork (join) where alternatives split
//! (meet). Some processes are tagged parallel and carry the set of
//! data-parallel degrees to unfold them into.
//!
//! The graph is immutable once built. Internally everything is indexed so the
//! exploration and enumeration passes can work on dense integer ids; the
//! public query surface speaks in [`ProcessId`]s, [`Color`]s and [`Channel`]s.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

/// Marker reserved for colors minted by unfolding (`<process>∥<degree>`).
pub const PARALLEL_MARK: char = '∥';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid process id {0:?}: expected letters, digits, '_' or '.'")]
    InvalidProcessId(String),
    #[error("invalid color {0:?}: expected letters, digits, '_', '.' or '∥'")]
    InvalidColor(String),
    #[error("process {0} declared twice")]
    DuplicateProcess(String),
    #[error("channel {0} declared twice")]
    DuplicateChannel(String),
    #[error("channel {channel} references unknown process {process}")]
    DanglingReference { channel: String, process: String },
    #[error("self-loop channel {0} is not supported")]
    SelfLoop(String),
    #[error("process {process}: parallel degrees must be positive and strictly increasing, got {degrees:?}")]
    InvalidDegrees { process: String, degrees: Vec<u32> },
    #[error("unknown process {0}")]
    UnknownProcess(String),
    #[error("unknown color {0}")]
    UnknownColor(String),
    #[error("graph contains a directed cycle through {0:?}")]
    Cycle(Vec<String>),
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

/// Name of a process: a non-empty token of ASCII letters, digits, `_` and `.`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ProcessId(Arc<str>);

impl ProcessId {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(is_token_char) {
            return Err(GraphError::InvalidProcessId(name));
        }
        Ok(ProcessId(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Channel color. Same grammar as [`ProcessId`], plus the `∥` mark that
/// only unfolding is expected to produce.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Color(Arc<str>);

impl Color {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(|c| is_token_char(c) || c == PARALLEL_MARK) {
            return Err(GraphError::InvalidColor(name));
        }
        Ok(Color(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Process {
    pub id: ProcessId,
    /// Data-parallel degrees; empty when the process is not parallel.
    pub parallel_degrees: Vec<u32>,
}

impl Process {
    pub fn new(id: ProcessId) -> Self {
        Process {
            id,
            parallel_degrees: Vec::new(),
        }
    }

    pub fn parallel(id: ProcessId, degrees: Vec<u32>) -> Result<Self, GraphError> {
        let ok = !degrees.is_empty() && degrees[0] >= 1 && degrees.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(GraphError::InvalidDegrees {
                process: id.to_string(),
                degrees,
            });
        }
        Ok(Process {
            id,
            parallel_degrees: degrees,
        })
    }

    pub fn is_parallel(&self) -> bool {
        !self.parallel_degrees.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Channel {
    pub writer: ProcessId,
    pub reader: ProcessId,
    pub color: Color,
}

impl Channel {
    pub fn new(writer: ProcessId, reader: ProcessId, color: Color) -> Self {
        Channel { writer, reader, color }
    }

    /// `writer>reader#color`, the unit of a variant's canonical key.
    pub fn key(&self) -> String {
        format!("{}>{}#{}", self.writer, self.reader, self.color)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}#{}", self.writer, self.reader, self.color)
    }
}

/// Dense form of a channel used by the analysis passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Edge {
    pub writer: usize,
    pub reader: usize,
    pub color: usize,
}

/// Per-process view returned by [`MapnGraph::queries`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessQueries {
    pub write_channels: Vec<Channel>,
    pub read_channels: Vec<Channel>,
    pub outgoing_colors: Vec<Color>,
    pub incoming_colors: Vec<Color>,
}

/// Channels of one color together with their endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredSubgraph {
    pub color: Color,
    pub channels: Vec<Channel>,
    pub processes: BTreeSet<ProcessId>,
    pub sources: BTreeSet<ProcessId>,
    pub sinks: BTreeSet<ProcessId>,
    pub connected: bool,
}

impl ColoredSubgraph {
    /// Connected with a unique source and a unique sink.
    pub fn is_alternative(&self) -> bool {
        self.connected && self.sources.len() == 1 && self.sinks.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapnGraph {
    processes: Vec<Process>,
    channels: Vec<Channel>,
    colors: Vec<Color>,
    index: BTreeMap<ProcessId, usize>,
    color_index: BTreeMap<Color, usize>,
    edges: Vec<Edge>,
    writes: Vec<Vec<usize>>,
    reads: Vec<Vec<usize>>,
}

impl MapnGraph {
    pub fn new(processes: Vec<Process>, channels: Vec<Channel>) -> Result<Self, GraphError> {
        let mut processes = processes;
        processes.sort();
        let mut index = BTreeMap::new();
        for (i, p) in processes.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateProcess(p.id.to_string()));
            }
        }

        let mut channels = channels;
        channels.sort();
        for w in channels.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateChannel(w[0].key()));
            }
        }
        for ch in &channels {
            for end in [&ch.writer, &ch.reader] {
                if !index.contains_key(end) {
                    return Err(GraphError::DanglingReference {
                        channel: ch.key(),
                        process: end.to_string(),
                    });
                }
            }
            if ch.writer == ch.reader {
                return Err(GraphError::SelfLoop(ch.key()));
            }
        }

        let colors: Vec<Color> = channels
            .iter()
            .map(|c| c.color.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let color_index: BTreeMap<Color, usize> = colors.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();

        let mut writes = vec![Vec::new(); processes.len()];
        let mut reads = vec![Vec::new(); processes.len()];
        let edges: Vec<Edge> = channels
            .iter()
            .enumerate()
            .map(|(ci, ch)| {
                let e = Edge {
                    writer: index[&ch.writer],
                    reader: index[&ch.reader],
                    color: color_index[&ch.color],
                };
                writes[e.writer].push(ci);
                reads[e.reader].push(ci);
                e
            })
            .collect();

        Ok(MapnGraph {
            processes,
            channels,
            colors,
            index,
            color_index,
            edges,
            writes,
            reads,
        })
    }

    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn processes(&self) -> &[Process] {
        &self.processes
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn process(&self, id: &ProcessId) -> Option<&Process> {
        self.index.get(id).map(|&i| &self.processes[i])
    }

    pub fn contains(&self, id: &ProcessId) -> bool {
        self.index.contains_key(id)
    }

    pub fn has_color(&self, color: &Color) -> bool {
        self.color_index.contains_key(color)
    }

    pub fn parallel_processes(&self) -> impl Iterator<Item = &Process> {
        self.processes.iter().filter(|p| p.is_parallel())
    }

    pub fn queries(&self, p: &ProcessId) -> Result<ProcessQueries, GraphError> {
        let i = self.idx(p)?;
        let write_channels: Vec<Channel> = self.writes[i].iter().map(|&c| self.channels[c].clone()).collect();
        let read_channels: Vec<Channel> = self.reads[i].iter().map(|&c| self.channels[c].clone()).collect();
        let outgoing_colors = write_channels
            .iter()
            .map(|c| c.color.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let incoming_colors = read_channels
            .iter()
            .map(|c| c.color.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(ProcessQueries {
            write_channels,
            read_channels,
            outgoing_colors,
            incoming_colors,
        })
    }

    /// Processes without read channels and processes without write channels.
    pub fn sources_and_sinks(&self) -> (BTreeSet<ProcessId>, BTreeSet<ProcessId>) {
        let sources = (0..self.processes.len())
            .filter(|&i| self.reads[i].is_empty())
            .map(|i| self.processes[i].id.clone())
            .collect();
        let sinks = (0..self.processes.len())
            .filter(|&i| self.writes[i].is_empty())
            .map(|i| self.processes[i].id.clone())
            .collect();
        (sources, sinks)
    }

    /// Fork set (writes ≥ 2 colors) and join set (reads ≥ 2 colors).
    pub fn fork_join_sets(&self) -> (BTreeSet<ProcessId>, BTreeSet<ProcessId>) {
        let forks = (0..self.processes.len())
            .filter(|&i| self.is_fork(i))
            .map(|i| self.processes[i].id.clone())
            .collect();
        let joins = (0..self.processes.len())
            .filter(|&i| self.is_join(i))
            .map(|i| self.processes[i].id.clone())
            .collect();
        (forks, joins)
    }

    pub fn colored_subgraph(&self, color: &Color) -> Result<ColoredSubgraph, GraphError> {
        let ci = *self
            .color_index
            .get(color)
            .ok_or_else(|| GraphError::UnknownColor(color.to_string()))?;
        let edges: Vec<usize> = (0..self.edges.len()).filter(|&e| self.edges[e].color == ci).collect();
        let members: BTreeSet<usize> = edges
            .iter()
            .flat_map(|&e| [self.edges[e].writer, self.edges[e].reader])
            .collect();
        let has_in: BTreeSet<usize> = edges.iter().map(|&e| self.edges[e].reader).collect();
        let has_out: BTreeSet<usize> = edges.iter().map(|&e| self.edges[e].writer).collect();
        let name = |i: &usize| self.processes[*i].id.clone();
        Ok(ColoredSubgraph {
            color: color.clone(),
            channels: edges.iter().map(|&e| self.channels[e].clone()).collect(),
            processes: members.iter().map(name).collect(),
            sources: members.iter().filter(|i| !has_in.contains(i)).map(name).collect(),
            sinks: members.iter().filter(|i| !has_out.contains(i)).map(name).collect(),
            connected: self.weakly_connected(&edges),
        })
    }

    /// Topological order of process indices, or the processes left on cycles.
    pub(crate) fn topo_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.processes.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.reads[i].len()).collect();
        let mut ready: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(p) = ready.pop_front() {
            order.push(p);
            for &c in &self.writes[p] {
                let r = self.edges[c].reader;
                indeg[r] -= 1;
                if indeg[r] == 0 {
                    ready.push_back(r);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n)
                .filter(|&i| indeg[i] > 0)
                .map(|i| self.processes[i].id.to_string())
                .collect();
            return Err(GraphError::Cycle(stuck));
        }
        Ok(order)
    }

    pub(crate) fn idx(&self, p: &ProcessId) -> Result<usize, GraphError> {
        self.index
            .get(p)
            .copied()
            .ok_or_else(|| GraphError::UnknownProcess(p.to_string()))
    }

    pub(crate) fn color_idx(&self, c: &Color) -> Option<usize> {
        self.color_index.get(c).copied()
    }

    pub(crate) fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub(crate) fn writes_of(&self, p: usize) -> &[usize] {
        &self.writes[p]
    }

    pub(crate) fn reads_of(&self, p: usize) -> &[usize] {
        &self.reads[p]
    }

    pub(crate) fn out_colors(&self, p: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.writes[p].iter().map(|&c| self.edges[c].color).collect();
        set.into_iter().collect()
    }

    pub(crate) fn in_colors(&self, p: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.reads[p].iter().map(|&c| self.edges[c].color).collect();
        set.into_iter().collect()
    }

    pub(crate) fn is_fork(&self, p: usize) -> bool {
        let mut colors = self.writes[p].iter().map(|&c| self.edges[c].color);
        match colors.next() {
            Some(first) => colors.any(|c| c != first),
            None => false,
        }
    }

    pub(crate) fn is_join(&self, p: usize) -> bool {
        let mut colors = self.reads[p].iter().map(|&c| self.edges[c].color);
        match colors.next() {
            Some(first) => colors.any(|c| c != first),
            None => false,
        }
    }

    fn weakly_connected(&self, edges: &[usize]) -> bool {
        if edges.is_empty() {
            return true;
        }
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &e in edges {
            let Edge { writer, reader, .. } = self.edges[e];
            adj.entry(writer).or_default().push(reader);
            adj.entry(reader).or_default().push(writer);
        }
        let start = *adj.keys().next().unwrap();
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &adj[&p] {
                if seen.insert(q) {
                    stack.push(q);
                }
            }
        }
        seen.len() == adj.len()
    }
}

/// Convenience builder taking plain string names.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    processes: Vec<(String, Vec<u32>)>,
    channels: Vec<(String, String, String)>,
}

impl GraphBuilder {
    pub fn process(mut self, name: &str) -> Self {
        self.processes.push((name.to_string(), Vec::new()));
        self
    }

    pub fn processes(mut self, names: &[&str]) -> Self {
        for n in names {
            self.processes.push((n.to_string(), Vec::new()));
        }
        self
    }

    pub fn parallel(mut self, name: &str, degrees: &[u32]) -> Self {
        self.processes.push((name.to_string(), degrees.to_vec()));
        self
    }

    /// Adds a channel; endpoints not declared otherwise become plain processes.
    pub fn channel(mut self, writer: &str, reader: &str, color: &str) -> Self {
        self.channels
            .push((writer.to_string(), reader.to_string(), color.to_string()));
        self
    }

    /// Adds a monochromatic path through `names`.
    pub fn path(mut self, names: &[&str], color: &str) -> Self {
        for w in names.windows(2) {
            self = self.channel(w[0], w[1], color);
        }
        self
    }

    pub fn build(self) -> Result<MapnGraph, GraphError> {
        let mut declared: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (name, degrees) in &self.processes {
            if declared.insert(name.clone(), degrees.clone()).is_some() {
                return Err(GraphError::DuplicateProcess(name.clone()));
            }
        }
        for (w, r, _) in &self.channels {
            declared.entry(w.clone()).or_default();
            declared.entry(r.clone()).or_default();
        }
        let processes = declared
            .into_iter()
            .map(|(name, degrees)| {
                let id = ProcessId::new(name)?;
                if degrees.is_empty() {
                    Ok(Process::new(id))
                } else {
                    Process::parallel(id, degrees)
                }
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        let channels = self
            .channels
            .into_iter()
            .map(|(w, r, c)| Ok(Channel::new(ProcessId::new(w)?, ProcessId::new(r)?, Color::new(c)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        MapnGraph::new(processes, channels)
    }
}

/// One end-to-end single-choice subgraph of a [`MapnGraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub channels: Vec<Channel>,
    pub processes: BTreeSet<ProcessId>,
    pub evaluations: BTreeMap<String, Vec<f64>>,
    pub key: String,
}

impl Variant {
    pub fn new(channels: impl IntoIterator<Item = Channel>) -> Self {
        let mut keyed: Vec<(String, Channel)> = channels.into_iter().map(|c| (c.key(), c)).collect();
        keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        let key = keyed.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(";");
        Self::from_sorted(keyed.into_iter().map(|(_, c)| c).collect(), key)
    }

    /// Builds a variant from channels already in canonical key order and
    /// their joined key.
    pub(crate) fn from_sorted(channels: Vec<Channel>, key: String) -> Self {
        let mut processes: Vec<ProcessId> = channels
            .iter()
            .flat_map(|c| [c.writer.clone(), c.reader.clone()])
            .collect();
        processes.sort_unstable();
        processes.dedup();
        Self::from_parts(channels, key, processes)
    }

    /// Like [`Variant::from_sorted`] with the process list supplied in
    /// ascending order.
    pub(crate) fn from_parts(channels: Vec<Channel>, key: String, processes: Vec<ProcessId>) -> Self {
        Variant {
            channels,
            processes: processes.into_iter().collect(),
            evaluations: BTreeMap::new(),
            key,
        }
    }

    /// The variant of a graph that consists of a lone process.
    pub fn single(process: ProcessId) -> Self {
        Variant {
            channels: Vec::new(),
            processes: BTreeSet::from([process]),
            evaluations: BTreeMap::new(),
            key: String::new(),
        }
    }

    pub fn with_evaluations(mut self, evaluations: BTreeMap<String, Vec<f64>>) -> Self {
        self.evaluations = evaluations;
        self
    }
}

/// Sorted `writer>reader#color` items joined with `;`.
pub fn canonical_key<'a>(channels: impl IntoIterator<Item = &'a Channel>) -> String {
    let mut keys: Vec<String> = channels.into_iter().map(Channel::key).collect();
    keys.sort();
    keys.dedup();
    keys.join(";")
}
