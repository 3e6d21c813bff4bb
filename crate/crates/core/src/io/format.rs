//! The line-oriented graph document.
//!
//! ```text
//! mapn 1
//! target big
//! target little
//! process t parallel 1 2 4
//! channel a t black
//! channel t b black
//! metric time priority=0 merge=max compose=sum direction=lower
//! annotate t time 8 12
//! par_rule t time dup=divide in=1,0.5 out=1,0.5
//! ```
//!
//! One statement per line, `#` starts a comment. Statements may appear in
//! any order after the header; references are resolved once the whole
//! document is read. Processes used by channels must be declared. Without
//! `target` lines the document has a single target named `default`.
//! In a `metric` line `direction` defaults to `lower`; in a `par_rule`
//! line `in` and `out` default to `0,0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{parse_number, tokenize, ParseError, Token};
use crate::metrics::{
    Affine, AnnotationTable, Direction, DupRule, Metric, MetricSet, Operator, ParallelRule, ParallelRules,
};
use crate::model::{Channel, Color, MapnGraph, Process, ProcessId};
use crate::unfold::{Role, UnfoldedModel};
use crate::Model;

pub const HEADER: &str = "mapn 1";
pub const DEFAULT_TARGET: &str = "default";

struct Located<T> {
    line: usize,
    column: usize,
    value: T,
}

fn at<T>(line: usize, tok: Token<'_>, value: T) -> Located<T> {
    Located {
        line,
        column: tok.column,
        value,
    }
}

fn process_id(line: usize, tok: Token<'_>) -> Result<ProcessId, ParseError> {
    ProcessId::new(tok.text).map_err(|e| ParseError::new(line, tok.column, e.to_string()))
}

fn color(line: usize, tok: Token<'_>) -> Result<Color, ParseError> {
    Color::new(tok.text).map_err(|e| ParseError::new(line, tok.column, e.to_string()))
}

fn expect_len(
    line: usize,
    tokens: &[Token<'_>],
    min: usize,
    max: Option<usize>,
    usage: &str,
) -> Result<(), ParseError> {
    let n = tokens.len();
    if n < min || max.is_some_and(|m| n > m) {
        let col = tokens
            .get(n.min(max.unwrap_or(n)))
            .or(tokens.last())
            .map_or(1, |t| t.column);
        return Err(ParseError::new(line, col, format!("expected `{usage}`")));
    }
    Ok(())
}

/// Splits `key=value` and checks the key against `allowed`.
fn key_value<'a>(line: usize, tok: Token<'a>, allowed: &[&str]) -> Result<(&'a str, &'a str), ParseError> {
    match tok.text.split_once('=') {
        Some((k, v)) if allowed.contains(&k) && !v.is_empty() => Ok((k, v)),
        _ => Err(ParseError::new(
            line,
            tok.column,
            format!(
                "expected one of {} as key=value, found {:?}",
                allowed.join(", "),
                tok.text
            ),
        )),
    }
}

fn affine(line: usize, tok: Token<'_>, value: &str) -> Result<Affine, ParseError> {
    let bad = || ParseError::new(line, tok.column, format!("expected <c0>,<c1>, found {value:?}"));
    let (a, b) = value.split_once(',').ok_or_else(bad)?;
    let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
    Ok(Affine::new(num(a)?, num(b)?))
}

fn operator(line: usize, tok: Token<'_>, value: &str) -> Result<Operator, ParseError> {
    value.parse().map_err(|e: String| ParseError::new(line, tok.column, e))
}

/// Parses a graph document into a model.
pub fn parse_graph(text: &str) -> Result<Model, ParseError> {
    let mut lines = tokenize(text);
    match lines.next() {
        Some((_, t)) if t.len() == 2 && t[0].text == "mapn" && t[1].text == "1" => {}
        Some((line, t)) => {
            return Err(ParseError::new(
                line,
                t[0].column,
                format!("expected header `{HEADER}`"),
            ));
        }
        None => {
            return Err(ParseError::new(
                1,
                1,
                format!("empty document, expected header `{HEADER}`"),
            ))
        }
    }

    let mut processes: Vec<Located<Process>> = Vec::new();
    let mut channels: Vec<Located<Channel>> = Vec::new();
    let mut metrics: Vec<Located<Metric>> = Vec::new();
    let mut targets: Vec<String> = Vec::new();
    let mut annotations: Vec<Located<(ProcessId, String, Vec<f64>)>> = Vec::new();
    let mut rules: Vec<Located<(ProcessId, String, ParallelRule)>> = Vec::new();

    for (line, t) in lines {
        let kw = t[0];
        match kw.text {
            "process" => {
                expect_len(line, &t, 2, None, "process <id> [parallel <d1> <d2> ...]")?;
                let id = process_id(line, t[1])?;
                let process = if t.len() == 2 {
                    Process::new(id)
                } else {
                    if t[2].text != "parallel" || t.len() == 3 {
                        return Err(ParseError::new(line, t[2].column, "expected `parallel <d1> <d2> ...`"));
                    }
                    let degrees = t[3..]
                        .iter()
                        .map(|d| {
                            d.text.parse::<u32>().map_err(|_| {
                                ParseError::new(line, d.column, format!("expected a degree, found {:?}", d.text))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Process::parallel(id, degrees).map_err(|e| ParseError::new(line, t[3].column, e.to_string()))?
                };
                processes.push(at(line, t[1], process));
            }
            "channel" => {
                expect_len(line, &t, 4, Some(4), "channel <writer> <reader> <color>")?;
                let ch = Channel::new(process_id(line, t[1])?, process_id(line, t[2])?, color(line, t[3])?);
                channels.push(at(line, t[1], ch));
            }
            "metric" => {
                expect_len(
                    line,
                    &t,
                    2,
                    None,
                    "metric <name> priority=<k> merge=<op> compose=<op> [direction=<lower|higher>]",
                )?;
                let name = process_id(line, t[1])?.to_string();
                let (mut priority, mut merge, mut compose, mut direction) = (None, None, None, None);
                for &tok in &t[2..] {
                    let (k, v) = key_value(line, tok, &["priority", "merge", "compose", "direction"])?;
                    let slot_taken = match k {
                        "priority" => priority
                            .replace(v.parse::<u32>().map_err(|_| {
                                ParseError::new(line, tok.column, format!("expected a priority, found {v:?}"))
                            })?)
                            .is_some(),
                        "merge" => merge.replace(operator(line, tok, v)?).is_some(),
                        "compose" => compose.replace(operator(line, tok, v)?).is_some(),
                        _ => direction
                            .replace(match v {
                                "lower" => Direction::Lower,
                                "higher" => Direction::Higher,
                                _ => {
                                    return Err(ParseError::new(
                                        line,
                                        tok.column,
                                        format!("expected lower or higher, found {v:?}"),
                                    ))
                                }
                            })
                            .is_some(),
                    };
                    if slot_taken {
                        return Err(ParseError::new(line, tok.column, format!("{k} given twice")));
                    }
                }
                let missing = |what: &str| ParseError::new(line, kw.column, format!("metric {name} needs {what}="));
                let metric = Metric {
                    priority: priority.ok_or_else(|| missing("priority"))?,
                    merge: merge.ok_or_else(|| missing("merge"))?,
                    compose: compose.ok_or_else(|| missing("compose"))?,
                    direction: direction.unwrap_or(Direction::Lower),
                    name,
                };
                metrics.push(at(line, t[1], metric));
            }
            "target" => {
                expect_len(line, &t, 2, Some(2), "target <label>")?;
                let label = process_id(line, t[1])?.to_string();
                if targets.contains(&label) {
                    return Err(ParseError::new(
                        line,
                        t[1].column,
                        format!("target {label} declared twice"),
                    ));
                }
                targets.push(label);
            }
            "annotate" => {
                expect_len(line, &t, 4, None, "annotate <process> <metric> <v0> [<v1> ...]")?;
                let values = t[3..]
                    .iter()
                    .map(|&v| parse_number(line, v))
                    .collect::<Result<Vec<_>, _>>()?;
                annotations.push(at(line, t[1], (process_id(line, t[1])?, t[2].text.to_string(), values)));
            }
            "par_rule" => {
                expect_len(
                    line,
                    &t,
                    4,
                    Some(6),
                    "par_rule <process> <metric> dup=<divide|replicate|constant:<c>> [in=<c0>,<c1>] [out=<c0>,<c1>]",
                )?;
                let (mut dup, mut inn, mut out) = (None, None, None);
                for &tok in &t[3..] {
                    let (k, v) = key_value(line, tok, &["dup", "in", "out"])?;
                    let taken = match k {
                        "dup" => {
                            let rule = match v {
                                "divide" => DupRule::Divide,
                                "replicate" => DupRule::Replicate,
                                _ => match v.strip_prefix("constant:").map(str::parse::<f64>) {
                                    Some(Ok(c)) if c.is_finite() => DupRule::Constant(c),
                                    _ => {
                                        return Err(ParseError::new(
                                            line,
                                            tok.column,
                                            format!("expected divide, replicate or constant:<c>, found {v:?}"),
                                        ))
                                    }
                                },
                            };
                            dup.replace(rule).is_some()
                        }
                        "in" => inn.replace(affine(line, tok, v)?).is_some(),
                        _ => out.replace(affine(line, tok, v)?).is_some(),
                    };
                    if taken {
                        return Err(ParseError::new(line, tok.column, format!("{k} given twice")));
                    }
                }
                let dup = dup.ok_or_else(|| ParseError::new(line, kw.column, "par_rule needs dup="))?;
                let rule = ParallelRule::new(dup).with_overheads(inn.unwrap_or_default(), out.unwrap_or_default());
                rules.push(at(line, t[1], (process_id(line, t[1])?, t[2].text.to_string(), rule)));
            }
            other => {
                return Err(ParseError::new(line, kw.column, format!("unknown statement {other:?}")));
            }
        }
    }
    assemble(processes, channels, metrics, targets, annotations, rules)
}

fn assemble(
    processes: Vec<Located<Process>>,
    channels: Vec<Located<Channel>>,
    metrics: Vec<Located<Metric>>,
    mut targets: Vec<String>,
    annotations: Vec<Located<(ProcessId, String, Vec<f64>)>>,
    rules: Vec<Located<(ProcessId, String, ParallelRule)>>,
) -> Result<Model, ParseError> {
    let mut declared: BTreeMap<ProcessId, &Process> = BTreeMap::new();
    for p in &processes {
        if declared.insert(p.value.id.clone(), &p.value).is_some() {
            return Err(ParseError::new(
                p.line,
                p.column,
                format!("process {} declared twice", p.value.id),
            ));
        }
    }
    let mut seen = BTreeSet::new();
    for ch in &channels {
        let c = &ch.value;
        for end in [&c.writer, &c.reader] {
            if !declared.contains_key(end) {
                return Err(ParseError::new(
                    ch.line,
                    ch.column,
                    format!("channel {c} references undeclared process {end}"),
                ));
            }
        }
        if c.writer == c.reader {
            return Err(ParseError::new(ch.line, ch.column, format!("self-loop channel {c}")));
        }
        if !seen.insert(c) {
            return Err(ParseError::new(
                ch.line,
                ch.column,
                format!("channel {c} declared twice"),
            ));
        }
    }

    let mut names = BTreeSet::new();
    let mut priorities = BTreeSet::new();
    for m in &metrics {
        if !names.insert(m.value.name.as_str()) {
            return Err(ParseError::new(
                m.line,
                m.column,
                format!("metric {} declared twice", m.value.name),
            ));
        }
        if !priorities.insert(m.value.priority) {
            return Err(ParseError::new(
                m.line,
                m.column,
                format!("priority {} used twice", m.value.priority),
            ));
        }
    }

    if targets.is_empty() {
        targets.push(DEFAULT_TARGET.to_string());
    }
    let mut table = AnnotationTable::new(targets);
    let mut annotated = BTreeSet::new();
    for a in &annotations {
        let (p, m, values) = &a.value;
        if !declared.contains_key(p) {
            return Err(ParseError::new(
                a.line,
                a.column,
                format!("annotation for undeclared process {p}"),
            ));
        }
        if !names.contains(m.as_str()) {
            return Err(ParseError::new(
                a.line,
                a.column,
                format!("annotation for undeclared metric {m}"),
            ));
        }
        if !annotated.insert((p, m)) {
            return Err(ParseError::new(
                a.line,
                a.column,
                format!("{p} annotated twice for {m}"),
            ));
        }
        table
            .set(p.clone(), m, values.clone())
            .map_err(|e| ParseError::new(a.line, a.column, e.to_string()))?;
    }

    let mut parallel_rules = ParallelRules::new();
    for r in &rules {
        let (p, m, rule) = &r.value;
        match declared.get(p) {
            None => {
                return Err(ParseError::new(
                    r.line,
                    r.column,
                    format!("par_rule for undeclared process {p}"),
                ))
            }
            Some(proc) if !proc.is_parallel() => {
                return Err(ParseError::new(
                    r.line,
                    r.column,
                    format!("par_rule for non-parallel process {p}"),
                ))
            }
            _ => {}
        }
        if !names.contains(m.as_str()) {
            return Err(ParseError::new(
                r.line,
                r.column,
                format!("par_rule for undeclared metric {m}"),
            ));
        }
        if parallel_rules.insert(p.clone(), m, *rule).is_some() {
            return Err(ParseError::new(
                r.line,
                r.column,
                format!("par_rule for {p}/{m} given twice"),
            ));
        }
    }

    let first_line = |v: &[Located<Process>]| v.first().map_or(1, |p| p.line);
    let graph = MapnGraph::new(
        processes.iter().map(|p| p.value.clone()).collect(),
        channels.into_iter().map(|c| c.value).collect(),
    )
    .map_err(|e| ParseError::new(first_line(&processes), 1, e.to_string()))?;
    let metrics = MetricSet::new(metrics.into_iter().map(|m| m.value).collect())
        .map_err(|e| ParseError::new(1, 1, e.to_string()))?;
    Ok(Model {
        graph,
        metrics,
        annotations: table,
        rules: parallel_rules,
    })
}

fn dup_text(d: DupRule) -> String {
    match d {
        DupRule::Divide => "divide".into(),
        DupRule::Replicate => "replicate".into(),
        DupRule::Constant(c) => format!("constant:{c}"),
    }
}

fn write_body(out: &mut String, model: &Model) {
    for t in model.annotations.targets() {
        writeln!(out, "target {t}").unwrap();
    }
    for p in model.graph.processes() {
        write!(out, "process {}", p.id).unwrap();
        if p.is_parallel() {
            out.push_str(" parallel");
            for d in &p.parallel_degrees {
                write!(out, " {d}").unwrap();
            }
        }
        out.push('\n');
    }
    for c in model.graph.channels() {
        writeln!(out, "channel {} {} {}", c.writer, c.reader, c.color).unwrap();
    }
    for m in model.metrics.iter() {
        writeln!(
            out,
            "metric {} priority={} merge={} compose={} direction={}",
            m.name,
            m.priority,
            m.merge,
            m.compose,
            m.direction.as_str()
        )
        .unwrap();
    }
    for (p, m, values) in model.annotations.iter() {
        write!(out, "annotate {p} {m}").unwrap();
        for v in values {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    for (p, m, r) in model.rules.iter() {
        writeln!(
            out,
            "par_rule {p} {m} dup={} in={},{} out={},{}",
            dup_text(r.dup),
            r.overhead_in.c0,
            r.overhead_in.c1,
            r.overhead_out.c0,
            r.overhead_out.c1
        )
        .unwrap();
    }
}

/// Canonical text of `model`; `parse_graph` reads it back to an equal model.
pub fn serialize_model(model: &Model) -> String {
    let mut out = format!("{HEADER}\n");
    write_body(&mut out, model);
    out
}

/// Like [`serialize_model`], with one comment per added process recording
/// the parallel process, degree and role it stems from.
pub fn serialize_unfolded(unfolded: &UnfoldedModel) -> String {
    let mut out = format!("{HEADER}\n");
    for (id, p) in &unfolded.provenance {
        let role = match p.role {
            Role::Distribute => "distribute",
            Role::Duplicate => "duplicate",
            Role::Gather => "gather",
        };
        writeln!(out, "# {id} <- {} degree {} {role}", p.original, p.degree).unwrap();
    }
    write_body(&mut out, &unfolded.model);
    out
}
