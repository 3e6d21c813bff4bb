//! Seeded synthetic graph generator for benchmarks and property tests.
//!
//! A generated graph is a spine from source to sink in color `c0` made of
//! short chains, alternative blocks and parallel processes. A block is a
//! fork, two or more alternatives and a join; its first alternative keeps
//! the enclosing color, the others get fresh colors. An alternative is a
//! chain of one or two processes, optionally followed by a nested block.
//! The variant count is the product of the spine blocks' counts times 3
//! per parallel process (degrees `{1, 2, 4}`), where a block counts the sum
//! of its alternatives. Block sizes are steered so the count lands in
//! `[target, 2 * target]`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fixtures::{energy_metric, time_metric};
use crate::metrics::{Affine, AnnotationTable, DupRule, MetricSet, ParallelRule, ParallelRules};
use crate::model::MapnGraph;
use crate::Model;

pub const PARALLEL_DEGREES: [u32; 3] = [1, 2, 4];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator settings: {0}")]
    InvalidSpec(String),
    #[error("cannot reach {target} variants within a factor of two using {parallel} parallel processes")]
    Unsatisfiable { target: u64, parallel: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub target_variants: u64,
    /// Deepest nesting level of alternative blocks (1 = no nesting).
    pub max_depth: u32,
    /// Largest number of alternatives per block.
    pub max_fork_width: u32,
    pub parallel_count: u32,
    pub seed: u64,
    /// Adds an additive `energy` metric next to `time`.
    pub two_metrics: bool,
}

impl GenSpec {
    pub fn new(target_variants: u64, seed: u64) -> Self {
        GenSpec {
            target_variants,
            max_depth: 3,
            max_fork_width: 4,
            parallel_count: 0,
            seed,
            two_metrics: false,
        }
    }
}

struct Builder {
    rng: ChaCha8Rng,
    spec: GenSpec,
    next_process: usize,
    next_color: usize,
    parallel: Vec<String>,
    channels: Vec<(String, String, String)>,
}

impl Builder {
    fn process(&mut self) -> String {
        let name = format!("n{}", self.next_process);
        self.next_process += 1;
        name
    }

    fn color(&mut self) -> String {
        let name = format!("c{}", self.next_color);
        self.next_color += 1;
        name
    }

    fn link(&mut self, from: &str, to: &str, color: &str) {
        self.channels.push((from.into(), to.into(), color.into()));
    }

    /// Appends a chain of `len` new processes after `from`; returns the last one.
    fn chain(&mut self, from: String, len: usize, color: &str) -> String {
        let mut last = from;
        for _ in 0..len {
            let next = self.process();
            self.link(&last, &next, color);
            last = next;
        }
        last
    }

    /// Largest variant count of a block at `depth`.
    fn cap(&self, depth: u32) -> u64 {
        let k = self.spec.max_fork_width as u64;
        if depth + 1 >= self.spec.max_depth {
            k
        } else {
            k.saturating_mul(self.cap(depth + 1))
        }
    }

    /// Builds a block with `count` variants forking at `entry`; returns the join.
    fn block(&mut self, entry: &str, count: u64, depth: u32, color: &str) -> String {
        let max_part = if depth + 1 >= self.spec.max_depth {
            1
        } else {
            self.cap(depth + 1)
        };
        let k_lo = 2.max(count.div_ceil(max_part));
        let k_hi = (self.spec.max_fork_width as u64).min(count);
        let k = self.rng.gen_range(k_lo..=k_hi);
        let mut parts = vec![1u64; k as usize];
        let mut rest = count - k;
        while rest > 0 {
            let open: Vec<usize> = (0..parts.len()).filter(|&i| parts[i] < max_part).collect();
            let i = *open.choose(&mut self.rng).expect("count within block capacity");
            let room = (max_part - parts[i]).min(rest);
            let add = self.rng.gen_range(1..=room);
            parts[i] += add;
            rest -= add;
        }
        let join = self.process();
        for (i, part) in parts.into_iter().enumerate() {
            let alt_color = if i == 0 { color.to_string() } else { self.color() };
            let len = self.rng.gen_range(1..=2);
            let mut last = self.chain(entry.to_string(), len, &alt_color);
            if part > 1 {
                last = self.block(&last, part, depth + 1, &alt_color);
            }
            self.link(&last, &join, &alt_color);
        }
        join
    }
}

fn contains_power_of_two(lo: u64, hi: u64) -> bool {
    let mut p = 1u64;
    while p < lo {
        match p.checked_mul(2) {
            Some(n) => p = n,
            None => return false,
        }
    }
    p <= hi
}

/// Generates a well-formed model whose (unfolded) variant count lies in
/// `[target_variants, 2 * target_variants]`.
pub fn generate(spec: &GenSpec) -> Result<Model, GenError> {
    if spec.target_variants == 0 {
        return Err(GenError::InvalidSpec("target variants must be at least 1".into()));
    }
    if spec.max_depth == 0 {
        return Err(GenError::InvalidSpec("max depth must be at least 1".into()));
    }
    if spec.max_fork_width < 2 {
        return Err(GenError::InvalidSpec("max fork width must be at least 2".into()));
    }
    let unsatisfiable = GenError::Unsatisfiable {
        target: spec.target_variants,
        parallel: spec.parallel_count,
    };
    let lane_factor = 3u64.checked_pow(spec.parallel_count).ok_or(unsatisfiable.clone())?;
    let mut lo = spec.target_variants.div_ceil(lane_factor);
    let mut hi = spec.target_variants.saturating_mul(2) / lane_factor;
    if lo > hi {
        return Err(unsatisfiable);
    }

    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        spec: spec.clone(),
        next_process: 0,
        next_color: 0,
        parallel: Vec::new(),
        channels: Vec::new(),
    };
    let spine_color = b.color();
    let cap0 = b.cap(0);
    let mut counts = Vec::new();
    while lo > 1 {
        let candidates: Vec<u64> = (2..=cap0.min(hi))
            .filter(|&c| {
                let (l, h) = (lo.div_ceil(c), hi / c);
                l <= h && contains_power_of_two(l, h)
            })
            .collect();
        let c = *candidates.choose(&mut b.rng).expect("band keeps a power of two");
        counts.push(Some(c));
        lo = lo.div_ceil(c);
        hi /= c;
    }
    counts.extend(std::iter::repeat_n(None, spec.parallel_count as usize));
    counts.shuffle(&mut b.rng);

    let source = b.process();
    let mut last = source;
    for item in counts {
        let len = b.rng.gen_range(0..=1);
        last = b.chain(last, len, &spine_color);
        match item {
            Some(count) => last = b.block(&last, count, 0, &spine_color),
            None => {
                let name = format!("n{}", b.next_process);
                b.next_process += 1;
                b.parallel.push(name.clone());
                b.link(&last, &name, &spine_color);
                last = b.chain(name, 1, &spine_color);
            }
        }
    }
    let len = b.rng.gen_range(1..=2);
    b.chain(last, len, &spine_color);

    let mut builder = MapnGraph::builder();
    for p in &b.parallel {
        builder = builder.parallel(p, &PARALLEL_DEGREES);
    }
    for (w, r, c) in &b.channels {
        builder = builder.channel(w, r, c);
    }
    let graph = builder.build().expect("generated names are valid tokens");

    let mut metrics = vec![time_metric()];
    if spec.two_metrics {
        metrics.push(energy_metric());
    }
    let metrics = MetricSet::new(metrics).expect("fixed metric set");
    let mut annotations = AnnotationTable::new(vec!["cpu".into()]);
    let mut rules = ParallelRules::new();
    for p in graph.processes() {
        for m in metrics.iter() {
            let v = (b.rng.gen_range(1.0..=100.0f64) * 100.0).round() / 100.0;
            annotations.set(p.id.clone(), &m.name, vec![v]).expect("one target");
        }
        if p.is_parallel() {
            rules.insert(
                p.id.clone(),
                "time",
                ParallelRule::new(DupRule::Divide).with_overheads(Affine::new(1.0, 0.5), Affine::new(1.0, 0.5)),
            );
            if spec.two_metrics {
                rules.insert(
                    p.id.clone(),
                    "energy",
                    ParallelRule::new(DupRule::Divide).with_overheads(Affine::new(0.5, 0.0), Affine::new(0.5, 0.0)),
                );
            }
        }
    }
    Ok(Model {
        graph,
        metrics,
        annotations,
        rules,
    })
}
