//! Export of a graph and its variants as a scenario-aware dataflow XML.
//!
//! Every process becomes a kernel actor and every channel a rate-1 edge.
//! A detector actor holds one scenario per variant; inside a scenario each
//! channel is listed with rate 1 when the variant uses it and 0 otherwise.
//! The detector cycles through the scenarios in order.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::model::{Channel, MapnGraph, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SadfError {
    #[error("nothing to export: the variant list is empty")]
    NoVariants,
    #[error("variant uses channel {0} which is not in the graph")]
    UnknownChannel(String),
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn export_sadf(g: &MapnGraph, variants: &[Variant]) -> Result<String, SadfError> {
    if variants.is_empty() {
        return Err(SadfError::NoVariants);
    }
    let names: BTreeMap<&Channel, String> = g
        .channels()
        .iter()
        .enumerate()
        .map(|(i, c)| (c, format!("ch{i}")))
        .collect();
    for v in variants {
        if let Some(c) = v.channels.iter().find(|c| !names.contains_key(c)) {
            return Err(SadfError::UnknownChannel(c.to_string()));
        }
    }

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<graph type=\"sadf\">\n");
    for p in g.processes() {
        writeln!(out, "  <actor name=\"{}\" kind=\"kernel\"/>", escape(p.id.as_str())).unwrap();
    }
    for c in g.channels() {
        writeln!(
            out,
            "  <channel name=\"{}\" src=\"{}\" dst=\"{}\" color=\"{}\" srcRate=\"1\" dstRate=\"1\"/>",
            names[c],
            escape(c.writer.as_str()),
            escape(c.reader.as_str()),
            escape(c.color.as_str())
        )
        .unwrap();
    }
    out.push_str("  <detector name=\"detector\">\n");
    for (i, v) in variants.iter().enumerate() {
        writeln!(out, "    <scenario name=\"s{i}\" key=\"{}\">", escape(&v.key)).unwrap();
        for c in g.channels() {
            let rate = u8::from(v.channels.contains(c));
            writeln!(out, "      <channel ref=\"{}\" rate=\"{rate}\"/>", names[c]).unwrap();
        }
        out.push_str("    </scenario>\n");
    }
    for i in 0..variants.len() {
        let next = (i + 1) % variants.len();
        writeln!(out, "    <transition from=\"s{i}\" to=\"s{next}\"/>").unwrap();
    }
    out.push_str("  </detector>\n</graph>\n");
    Ok(out)
}
