//! Graphviz rendering of the colored graph.

use std::fmt::Write;

use crate::model::MapnGraph;

/// Renders `g` as a DOT digraph; edges carry their color as label.
/// Parallel processes are drawn as boxes listing their degrees.
pub fn to_dot(g: &MapnGraph) -> String {
    let mut out = String::from("digraph mapn {\n  rankdir=LR;\n");
    for p in g.processes() {
        if p.is_parallel() {
            let degrees: Vec<String> = p.parallel_degrees.iter().map(u32::to_string).collect();
            writeln!(
                out,
                "  \"{}\" [shape=box, label=\"{} {{{}}}\"];",
                p.id,
                p.id,
                degrees.join(",")
            )
            .unwrap();
        } else {
            writeln!(out, "  \"{}\";", p.id).unwrap();
        }
    }
    for c in g.channels() {
        writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", c.writer, c.reader, c.color).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn one_line_per_element() {
        let g = fixtures::sample_graph();
        let dot = to_dot(&g);
        assert_eq!(dot.matches(" -> ").count(), g.channels().len());
        assert!(dot.contains("\"t\" [shape=box, label=\"t {1,2,4}\"];"));
    }
}
