//! Result reports in plain text or JSON.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;

use crate::metrics::{check_feasible, ExplorationConfig, MetricsError};
use crate::model::{Channel, MapnGraph, ProcessId, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Human-readable text; `color` adds ANSI styling.
    Text {
        color: bool,
    },
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub processes: usize,
    pub channels: usize,
    pub colors: usize,
    pub forks: usize,
    pub joins: usize,
    pub parallel: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variants: Option<u128>,
}

impl GraphStats {
    pub fn of(g: &MapnGraph) -> Self {
        let (forks, joins) = g.fork_join_sets();
        GraphStats {
            processes: g.processes().len(),
            channels: g.channels().len(),
            colors: g.colors().len(),
            forks: forks.len(),
            joins: joins.len(),
            parallel: g.parallel_processes().count(),
            variants: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub rank: usize,
    pub key: String,
    pub processes: Vec<ProcessId>,
    pub channels: Vec<Channel>,
    /// Value of every metric for the selected target.
    pub evaluations: BTreeMap<String, f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub target: String,
    pub graph: GraphStats,
    pub variants: Vec<VariantReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn new(command: &str, target: &str, graph: GraphStats) -> Self {
        Report {
            command: command.into(),
            target: target.into(),
            graph,
            variants: Vec::new(),
            timings_ms: None,
        }
    }

    /// Adds ranked variants; rank follows slice order, starting at 1.
    pub fn with_variants(mut self, variants: &[Variant], cfg: &ExplorationConfig) -> Result<Self, MetricsError> {
        for (i, v) in variants.iter().enumerate() {
            let evaluations = v
                .evaluations
                .iter()
                .filter_map(|(m, vals)| vals.get(cfg.target_index).map(|x| (m.clone(), *x)))
                .collect();
            self.variants.push(VariantReport {
                rank: i + 1,
                key: v.key.clone(),
                processes: v.processes.iter().cloned().collect(),
                channels: v.channels.clone(),
                evaluations,
                feasible: check_feasible(&v.evaluations, cfg)?,
            });
        }
        Ok(self)
    }

    pub fn with_timing(mut self, phase: &str, ms: f64) -> Self {
        self.timings_ms
            .get_or_insert_with(BTreeMap::new)
            .insert(phase.into(), ms);
        self
    }
}

struct Style {
    on: bool,
}

impl Style {
    fn paint(&self, code: &str, text: &str) -> String {
        if self.on {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }
}

pub fn write_report(out: &mut impl Write, report: &Report, format: ReportFormat) -> io::Result<()> {
    let color = match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            return writeln!(out);
        }
        ReportFormat::Text { color } => color,
    };
    let s = Style { on: color };
    let g = &report.graph;
    write!(
        out,
        "{}: {} processes, {} channels, {} colors, {} forks, {} joins, {} parallel",
        s.paint("1", "graph"),
        g.processes,
        g.channels,
        g.colors,
        g.forks,
        g.joins,
        g.parallel
    )?;
    if let Some(n) = g.variants {
        write!(out, ", {n} variants")?;
    }
    writeln!(out)?;
    if report.command != "stats" {
        writeln!(out, "{} variants for target {}", report.variants.len(), report.target)?;
    }
    for v in &report.variants {
        let evals: Vec<String> = v.evaluations.iter().map(|(m, x)| format!("{m}={x}")).collect();
        let status = if v.feasible {
            s.paint("32", "feasible")
        } else {
            s.paint("31", "infeasible")
        };
        writeln!(
            out,
            "{} {} [{status}]",
            s.paint("1", &format!("#{}", v.rank)),
            evals.join(" ")
        )?;
        let names: Vec<&str> = v.processes.iter().map(ProcessId::as_str).collect();
        writeln!(out, "  processes: {}", names.join(" "))?;
        if !v.key.is_empty() {
            writeln!(out, "  channels: {}", v.key)?;
        }
    }
    if let Some(t) = &report.timings_ms {
        let items: Vec<String> = t.iter().map(|(k, ms)| format!("{k} {ms:.3} ms")).collect();
        writeln!(out, "timings: {}", items.join(", "))?;
    }
    Ok(())
}
