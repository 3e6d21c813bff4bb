//! Well-formedness checks.
//!
//! A graph is well-formed when:
//!
//! 1. every color's channels form one connected subgraph;
//! 2. the graph is acyclic;
//! 3. there is exactly one source and one sink;
//! 4. a fork writes the same number of channels for each of its colors, and
//!    a join reads the same number of channels for each of its colors;
//! 5. no parallel process is a fork or a join;
//! 6. alternatives form structured blocks: for every color `α` with unique
//!    source `s` and sink `t`, and every color `ξ` (including `α` itself)
//!    with a `ξ`-only path from `s` to `t`, the interior processes of those
//!    paths write exactly as many `ξ` channels as they read.
//!
//! [`validate`] reports every violation as a [`Diagnostic`]; errors block
//! unfolding and exploration.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::metrics::AnnotationTable;
use crate::model::{Channel, Color, MapnGraph, Process, ProcessId};
use crate::Model;

/// Name of the process added by [`normalize_source_sink`] in front of multiple sources.
pub const FICTIVE_SOURCE: &str = "__src";
/// Name of the process added by [`normalize_source_sink`] behind multiple sinks.
pub const FICTIVE_SINK: &str = "__snk";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub property: u8,
    pub severity: Severity,
    pub message: String,
    pub processes: Vec<ProcessId>,
    pub channels: Vec<Channel>,
}

impl Diagnostic {
    fn error(property: u8, message: String, processes: Vec<ProcessId>) -> Self {
        Diagnostic {
            property,
            severity: Severity::Error,
            message,
            processes,
            channels: Vec::new(),
        }
    }

    fn with_channels(mut self, channels: Vec<Channel>) -> Self {
        self.channels = channels;
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let offenders: Vec<String> = self
            .processes
            .iter()
            .map(ToString::to_string)
            .chain(self.channels.iter().map(Channel::key))
            .collect();
        write!(
            f,
            "P{} {}: {} [{}]",
            self.property,
            self.severity,
            self.message,
            offenders.join(", ")
        )
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}

/// Runs every check in property order. An empty result means well-formed.
pub fn validate(g: &MapnGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_unreferenced(g, &mut out);
    check_color_connectivity(g, &mut out);
    check_acyclic(g, &mut out);
    check_source_sink(g, &mut out);
    check_rates(g, &mut out);
    check_parallel(g, &mut out);
    check_structured_blocks(g, &mut out);
    out
}

fn name(g: &MapnGraph, i: usize) -> ProcessId {
    g.processes()[i].id.clone()
}

fn check_unreferenced(g: &MapnGraph, out: &mut Vec<Diagnostic>) {
    if g.channels().is_empty() {
        return;
    }
    for (i, p) in g.processes().iter().enumerate() {
        if g.writes_of(i).is_empty() && g.reads_of(i).is_empty() {
            out.push(Diagnostic {
                property: 3,
                severity: Severity::Warning,
                message: "process is not connected to any channel".into(),
                processes: vec![p.id.clone()],
                channels: Vec::new(),
            });
        }
    }
}

fn check_color_connectivity(g: &MapnGraph, out: &mut Vec<Diagnostic>) {
    for color in g.colors() {
        let sub = g.colored_subgraph(color).expect("color taken from graph");
        if !sub.connected {
            out.push(Diagnostic::error(
                1,
                format!("color {color} is used in disconnected subgraphs"),
                sub.processes.into_iter().collect(),
            ));
        }
    }
}

fn check_acyclic(g: &MapnGraph, out: &mut Vec<Diagnostic>) {
    if g.topo_order().is_ok() {
        return;
    }
    let n = g.processes().len();
    let succ = |p: usize| g.writes_of(p).iter().map(move |&c| g.edges()[c].reader);
    let on_cycle: Vec<ProcessId> = (0..n)
        .filter(|&start| {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = succ(start).collect();
            while let Some(p) = stack.pop() {
                if p == start {
                    return true;
                }
                if !std::mem::replace(&mut seen[p], true) {
                    stack.extend(succ(p));
                }
            }
            false
        })
        .map(|i| name(g, i))
        .collect();
    out.push(Diagnostic::error(2, "graph contains a directed cycle".into(), on_cycle));
}

fn check_source_sink(g: &MapnGraph, out: &mut Vec<Diagnostic>) {
    let (sources, sinks) = g.sources_and_sinks();
    let all = || g.processes().iter().map(|p| p.id.clone()).collect::<Vec<_>>();
    for (set, what) in [(sources, "source"), (sinks, "sink")] {
        match set.len() {
            1 => {}
            0 => out.push(Diagnostic::error(3, format!("graph has no {what}"), all())),
            k => out.push(Diagnostic::error(
                3,
                format!("graph has {k} {what}s, expected one"),
                set.into_iter().collect(),
            )),
        }
    }
}

/// Channels of `list` grouped by color index.
fn per_color(g: &MapnGraph, list: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &c in list {
        m.entry(g.edges()[c].color).or_default().push(c);
    }
    m
}

fn check_rates(g: &MapnGraph, out: &mut Vec<Diagnostic>) {
    for i in 0..g.processes().len() {
        for (is_fork, list, what) in [
            (g.is_fork(i), g.writes_of(i), "fork writes"),
            (g.is_join(i), g.reads_of(i), "join reads"),
        ] {
            if !is_fork {
                continue;
            }
            let groups = per_color(g, list);
            let counts: BTreeSet<usize> = groups.values().map(Vec::len).collect();
            if counts.len() > 1 {
                let detail: Vec<String> = groups
                    .iter()
                    .map(|(c, chs)| format!("{}={}", g.colors()[*c], chs.len()))
                    .collect();
                out.push(
                    Diagnostic::error(
                        4,
                        format!("{what} unequal channel counts per color ({})", detail.join(", ")),
                        vec![name(g, i)],
                    )
                    .with_channels(list.iter().map(|&c| g.channels()[c].clone()).collect()),
                );
            }
        }
    }
}

fn check_parallel(g: &MapnGraph, out: &mut Vec<Diagnostic>) {
    for (i, p) in g.processes().iter().enumerate() {
        if !p.is_parallel() {
            continue;
        }
        let role = match (g.is_fork(i), g.is_join(i)) {
            (false, false) => continue,
            (true, false) => "a fork",
            (false, true) => "a join",
            (true, true) => "a fork and a join",
        };
        out.push(Diagnostic::error(
            5,
            format!("parallel process is {role}"),
            vec![p.id.clone()],
        ));
    }
}

/// Processes reachable from `from` along channels of color `color`.
fn reach(g: &MapnGraph, from: usize, color: usize, forward: bool) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(p) = queue.pop_front() {
        let list = if forward { g.writes_of(p) } else { g.reads_of(p) };
        for &c in list {
            let e = g.edges()[c];
            if e.color != color {
                continue;
            }
            let next = if forward { e.reader } else { e.writer };
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

fn count_color(g: &MapnGraph, list: &[usize], color: usize) -> usize {
    list.iter().filter(|&&c| g.edges()[c].color == color).count()
}

fn check_structured_blocks(g: &MapnGraph, out: &mut Vec<Diagnostic>) {
    for (alpha_idx, alpha) in g.colors().iter().enumerate() {
        let sub = g.colored_subgraph(alpha).expect("color taken from graph");
        if !sub.is_alternative() {
            continue;
        }
        let s = g.idx(sub.sources.first().unwrap()).unwrap();
        let t = g.idx(sub.sinks.first().unwrap()).unwrap();
        for xi in 0..g.colors().len() {
            let fwd = reach(g, s, xi, true);
            if !fwd.contains(&t) {
                continue;
            }
            let bwd = reach(g, t, xi, false);
            let interior: Vec<usize> = fwd.intersection(&bwd).copied().filter(|&p| p != s && p != t).collect();
            let writes: usize = interior.iter().map(|&p| count_color(g, g.writes_of(p), xi)).sum();
            let reads: usize = interior.iter().map(|&p| count_color(g, g.reads_of(p), xi)).sum();
            if writes == reads {
                continue;
            }
            let offenders: Vec<ProcessId> = interior
                .iter()
                .filter(|&&p| count_color(g, g.writes_of(p), xi) != count_color(g, g.reads_of(p), xi))
                .map(|&p| name(g, p))
                .collect();
            let xi_name = &g.colors()[xi];
            let message = if xi == alpha_idx {
                format!(
                    "alternative {alpha} from {} to {} is not a structured block: interior writes {writes} {alpha} channels, reads {reads}",
                    sub.sources.first().unwrap(),
                    sub.sinks.first().unwrap(),
                )
            } else {
                format!(
                    "alternative {alpha} from {} to {} does not substitute a structured block of {xi_name}: interior writes {writes} {xi_name} channels, reads {reads}",
                    sub.sources.first().unwrap(),
                    sub.sinks.first().unwrap(),
                )
            };
            out.push(Diagnostic::error(6, message, offenders));
        }
    }
}

/// Adds a fictive source in front of multiple sources and a fictive sink
/// behind multiple sinks. Each new channel takes the unique outgoing
/// (incoming) color of the process it connects. The fictive processes are
/// annotated with zero for every metric and target. Graphs that already
/// have a single source and sink are returned unchanged.
pub fn normalize_source_sink(model: &Model) -> Result<Model, Diagnostic> {
    let g = &model.graph;
    let (sources, sinks) = g.sources_and_sinks();
    if sources.is_empty() || sinks.is_empty() {
        return Err(Diagnostic::error(
            3,
            "graph without source or sink cannot be normalized".into(),
            g.processes().iter().map(|p| p.id.clone()).collect(),
        ));
    }
    let mut processes: Vec<Process> = g.processes().to_vec();
    let mut channels: Vec<Channel> = g.channels().to_vec();
    let mut annotations: AnnotationTable = model.annotations.clone();
    let mut added = Vec::new();

    let mut connect = |ends: &BTreeSet<ProcessId>, fictive: &str, is_source: bool| -> Result<(), Diagnostic> {
        if ends.len() <= 1 {
            return Ok(());
        }
        let fid = ProcessId::new(fictive).expect("reserved name is a valid token");
        if g.contains(&fid) {
            return Err(Diagnostic::error(
                3,
                format!("cannot add fictive process {fictive}: name already in use"),
                vec![fid],
            ));
        }
        for p in ends {
            let q = g.queries(p).expect("process taken from graph");
            let colors: &[Color] = if is_source {
                &q.outgoing_colors
            } else {
                &q.incoming_colors
            };
            let color = match colors {
                [c] => c.clone(),
                _ => {
                    return Err(Diagnostic::error(
                        3,
                        format!("{p} has no single color to connect to {fictive}"),
                        vec![p.clone()],
                    ))
                }
            };
            channels.push(if is_source {
                Channel::new(fid.clone(), p.clone(), color)
            } else {
                Channel::new(p.clone(), fid.clone(), color)
            });
        }
        processes.push(Process::new(fid.clone()));
        added.push(fid);
        Ok(())
    };
    connect(&sources, FICTIVE_SOURCE, true)?;
    connect(&sinks, FICTIVE_SINK, false)?;

    if added.is_empty() {
        return Ok(model.clone());
    }
    let zeros = vec![0.0; annotations.targets().len()];
    for fid in &added {
        for m in model.metrics.iter() {
            annotations
                .set(fid.clone(), &m.name, zeros.clone())
                .map_err(|e| Diagnostic::error(3, e.to_string(), vec![fid.clone()]))?;
        }
    }
    let graph = MapnGraph::new(processes, channels).map_err(|e| Diagnostic::error(3, e.to_string(), added.clone()))?;
    Ok(Model {
        graph,
        metrics: model.metrics.clone(),
        annotations,
        rules: model.rules.clone(),
    })
}
