//! Constraint files.
//!
//! ```text
//! constraint time <= 300
//! constraint energy < 1e4
//! best 5
//! target little
//! mode exact
//! ```
//!
//! Every line is optional; `best` defaults to 0 (keep all feasible
//! variants), `target` to the first declared target and `mode` to `exact`.
//! `constraint` may repeat; the other statements may appear once.

use super::{parse_number, tokenize, ParseError};
use crate::metrics::{Comparator, Constraint, ExplorationConfig, MetricSet, Mode};

/// Parses a constraint file against the metric set and targets of a model.
pub fn parse_constraints(text: &str, metrics: &MetricSet, targets: &[String]) -> Result<ExplorationConfig, ParseError> {
    let mut cfg = ExplorationConfig::default();
    let (mut best_seen, mut target_seen, mut mode_seen) = (false, false, false);
    for (line, t) in tokenize(text) {
        let kw = t[0];
        let arity = |n: usize, usage: &str| {
            if t.len() == n {
                Ok(())
            } else {
                let col = t.get(n).or(t.last()).map_or(1, |tok| tok.column);
                Err(ParseError::new(line, col, format!("expected `{usage}`")))
            }
        };
        let once = |seen: &mut bool| {
            if std::mem::replace(seen, true) {
                Err(ParseError::new(line, kw.column, format!("{} given twice", kw.text)))
            } else {
                Ok(())
            }
        };
        match kw.text {
            "constraint" => {
                arity(4, "constraint <metric> <op> <bound>")?;
                if metrics.get(t[1].text).is_none() {
                    return Err(ParseError::new(
                        line,
                        t[1].column,
                        format!("unknown metric {:?}", t[1].text),
                    ));
                }
                let comparator: Comparator = t[2]
                    .text
                    .parse()
                    .map_err(|e: String| ParseError::new(line, t[2].column, e))?;
                cfg.constraints.push(Constraint {
                    metric: t[1].text.to_string(),
                    comparator,
                    bound: parse_number(line, t[3])?,
                });
            }
            "best" => {
                arity(2, "best <count>")?;
                once(&mut best_seen)?;
                cfg.best = t[1].text.parse().map_err(|_| {
                    ParseError::new(line, t[1].column, format!("expected a count, found {:?}", t[1].text))
                })?;
            }
            "target" => {
                arity(2, "target <label>")?;
                once(&mut target_seen)?;
                cfg.target_index = targets
                    .iter()
                    .position(|l| l == t[1].text)
                    .ok_or_else(|| ParseError::new(line, t[1].column, format!("unknown target {:?}", t[1].text)))?;
            }
            "mode" => {
                arity(2, "mode <exact|beam>")?;
                once(&mut mode_seen)?;
                cfg.mode = match t[1].text {
                    "exact" => Mode::Exact,
                    "beam" => Mode::Beam,
                    other => {
                        return Err(ParseError::new(
                            line,
                            t[1].column,
                            format!("expected exact or beam, found {other:?}"),
                        ))
                    }
                };
            }
            other => return Err(ParseError::new(line, kw.column, format!("unknown statement {other:?}"))),
        }
    }
    Ok(cfg)
}
