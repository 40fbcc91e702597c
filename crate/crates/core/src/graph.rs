//! Finite symmetric weighted graphs with loops.
//!
//! Storage is compressed sparse rows with sorted neighbor arrays; a loop at
//! `x` is stored as the diagonal entry `(x, x)`. Vertices are dense indices,
//! semantic annotations live in [`Labels`].

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest graph the generators will materialize.
const MAX_MATERIALIZED: usize = 20_000_000;

/// Restart budget for the configuration model.
const REJECTION_BUDGET: usize = 100_000;

/// Read access to a (possibly quotiented) nonnegative walk-count operator.
///
/// Each row is a list of neighbor classes `(target, multiplicity, weight)`:
/// `multiplicity` neighbors, each joined by an edge of weight `weight`, all
/// of which are represented by the single index `target`. Plain graphs have
/// multiplicity one everywhere.
pub trait Adjacency {
    fn vertex_count(&self) -> usize;

    fn for_each_neighbor<F: FnMut(usize, u32, f64)>(&self, x: usize, f: F);

    /// `dst = A src`.
    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        for (x, out) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            self.for_each_neighbor(x, |y, m, w| acc += f64::from(m) * w * src[y]);
            *out = acc;
        }
    }
}

/// Optional per-vertex annotations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    /// Lattice coordinate.
    pub coordinate: Option<Vec<Vec<i64>>>,
    /// Canopy level `|x|` (distance to the leaf set plus one).
    pub level: Option<Vec<usize>>,
    /// Graph distance to the distinguished root.
    pub root_distance: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    degree_bound: f64,
    labels: Labels,
}

/// Accumulates edges and loops, then freezes them into a [`WeightedGraph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
    labels: Labels,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
            labels: Labels::default(),
        }
    }

    fn check(&self, x: usize) -> Result<()> {
        if x >= self.n {
            return Err(Error::VertexOutOfRange {
                vertex: x,
                count: self.n,
            });
        }
        Ok(())
    }

    /// Adds an undirected edge. Repeating an edge is an error.
    pub fn edge(&mut self, x: usize, y: usize, w: f64) -> Result<&mut Self> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return self.add_loop(x, w);
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidGraph(format!(
                "edge ({x}, {y}) has non-positive weight {w}"
            )));
        }
        let key = (x.min(y), x.max(y));
        if self.entries.insert(key, w).is_some() {
            return Err(Error::InvalidGraph(format!("duplicate edge ({x}, {y})")));
        }
        Ok(self)
    }

    /// Adds `w` to the loop weight at `x`.
    pub fn add_loop(&mut self, x: usize, w: f64) -> Result<&mut Self> {
        self.check(x)?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidGraph(format!(
                "loop at {x} has negative weight {w}"
            )));
        }
        if w > 0.0 {
            *self.entries.entry((x, x)).or_insert(0.0) += w;
        }
        Ok(self)
    }

    pub fn labels(&mut self, labels: Labels) -> &mut Self {
        self.labels = labels;
        self
    }

    pub fn build(&self) -> Result<WeightedGraph> {
        let n = self.n;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(x, y), &w) in &self.entries {
            rows[x].push((y, w));
            if x != y {
                rows[y].push((x, w));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(y, _)| y);
            for &(y, w) in row.iter() {
                targets.push(y);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        let mut g = WeightedGraph {
            offsets,
            targets,
            weights,
            degree_bound: 0.0,
            labels: self.labels.clone(),
        };
        g.degree_bound = (0..n)
            .map(|x| g.weighted_degree(x).max(g.degree(x) as f64))
            .fold(0.0, f64::max);
        Ok(g)
    }
}

impl Adjacency for WeightedGraph {
    fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(usize, u32, f64)>(&self, x: usize, mut f: F) {
        let (lo, hi) = (self.offsets[x], self.offsets[x + 1]);
        for i in lo..hi {
            f(self.targets[i], 1, self.weights[i]);
        }
    }

    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        for (x, out) in dst.iter_mut().enumerate() {
            let (lo, hi) = (self.offsets[x], self.offsets[x + 1]);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += self.weights[i] * src[self.targets[i]];
            }
            *out = acc;
        }
    }
}

impl WeightedGraph {
    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected non-loop edges.
    pub fn edge_count(&self) -> usize {
        let loops = (0..self.vertex_count())
            .filter(|&x| self.loop_weight(x) > 0.0)
            .count();
        (self.targets.len() - loops) / 2
    }

    /// Sorted neighbor indices of `x`, including `x` itself if it carries a loop.
    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.targets[self.offsets[x]..self.offsets[x + 1]]
    }

    /// Weights aligned with [`neighbors`](Self::neighbors).
    pub fn row_weights(&self, x: usize) -> &[f64] {
        &self.weights[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbors(x)
            .iter()
            .copied()
            .zip(self.row_weights(x).iter().copied())
    }

    pub(crate) fn entry_count(&self) -> usize {
        self.targets.len()
    }

    /// `A_xy`, zero when not adjacent.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        match self.neighbors(x).binary_search(&y) {
            Ok(i) => self.row_weights(x)[i],
            Err(_) => 0.0,
        }
    }

    pub fn loop_weight(&self, x: usize) -> f64 {
        self.weight(x, x)
    }

    /// Combinatorial degree `#{y : A_xy > 0}`.
    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    /// Weighted degree `Σ_y A_xy`.
    pub fn weighted_degree(&self, x: usize) -> f64 {
        self.row_weights(x).iter().sum()
    }

    /// Declared bound `D` on both degree notions.
    pub fn degree_bound(&self) -> f64 {
        self.degree_bound
    }

    pub fn max_weighted_degree(&self) -> f64 {
        (0..self.vertex_count())
            .map(|x| self.weighted_degree(x))
            .fold(0.0, f64::max)
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Labels) -> Self {
        self.labels = labels;
        self
    }

    /// Undirected edges `(x, y, w)` with `x < y`, followed by nothing else.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.vertex_count())
            .flat_map(move |x| self.row(x).map(move |(y, w)| (x, y, w)))
            .filter(|&(x, y, _)| x < y)
    }

    /// Loops `(x, w)`.
    pub fn loops(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.vertex_count())
            .map(|x| (x, self.loop_weight(x)))
            .filter(|&(_, w)| w > 0.0)
    }

    /// `Some(d)` if every vertex has exactly `d` unit-weight non-loop edges.
    pub fn regular_degree(&self) -> Option<usize> {
        let n = self.vertex_count();
        if n == 0 {
            return None;
        }
        let d = self.degree(0);
        for x in 0..n {
            if self.degree(x) != d || self.row(x).any(|(y, w)| y == x || w != 1.0) {
                return None;
            }
        }
        Some(d)
    }

    /// Breadth-first distances from a set of sources; `usize::MAX` when unreachable.
    pub fn distances_from(&self, sources: &[usize]) -> Vec<usize> {
        let n = self.vertex_count();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &s in sources {
            if s < n && dist[s] == usize::MAX {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            for &y in self.neighbors(x) {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count() > 0 && self.distances_from(&[0]).iter().all(|&d| d != usize::MAX)
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.vertex_count() {
            return Err(Error::VertexOutOfRange {
                vertex: x,
                count: self.vertex_count(),
            });
        }
        Ok(())
    }

    fn to_builder(&self) -> GraphBuilder {
        let mut b = GraphBuilder::new(self.vertex_count());
        for x in 0..self.vertex_count() {
            for (y, w) in self.row(x) {
                if x <= y {
                    b.entries.insert((x, y), w);
                }
            }
        }
        b.labels = self.labels.clone();
        b
    }
}

/// Loop perturbation `σ·V_ω`: self-loops of weight `sigma` on `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub support: Vec<usize>,
    pub sigma: f64,
}

impl LoopSpec {
    pub fn new(support: Vec<usize>, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "loop amplitude must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(Self { support, sigma })
    }

    pub fn single(site: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![site], sigma)
    }
}

/// Returns `G + σ V_ω`. Loop weights add to any existing loop.
pub fn perturb_loops(graph: &WeightedGraph, spec: &LoopSpec) -> Result<WeightedGraph> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "loop amplitude must be finite and non-negative, got {}",
            spec.sigma
        )));
    }
    for &x in &spec.support {
        graph.check_vertex(x)?;
    }
    if spec.sigma == 0.0 {
        return Ok(graph.clone());
    }
    let mut b = graph.to_builder();
    let mut support = spec.support.clone();
    support.sort_unstable();
    support.dedup();
    for x in support {
        b.add_loop(x, spec.sigma)?;
    }
    b.build()
}

/// Graph families the generators know how to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cycle {
        n: usize,
    },
    Path {
        n: usize,
    },
    Complete {
        n: usize,
    },
    Petersen,
    /// Configuration model conditioned on simple and connected, full restarts.
    RandomRegular {
        n: usize,
        d: usize,
        seed: u64,
    },
    /// Random recursive tree plus independent extra edges with probability `p`;
    /// integer weights uniform in `1..=max_weight`.
    RandomConnected {
        n: usize,
        p: f64,
        max_weight: u32,
        seed: u64,
    },
    /// Ball of radius `radius` around the root (vertex 0) of the `d`-regular tree.
    TreeBall {
        d: usize,
        radius: usize,
    },
    /// Box `[-half_width, half_width]^dim` of the integer lattice; the origin is vertex 0.
    LatticeBox {
        dim: usize,
        half_width: usize,
    },
    /// All descendants of a level-`levels` vertex of the canopy tree; vertex 0 is the top.
    CanopyTrunc {
        d: usize,
        levels: usize,
    },
}

pub fn generate(family: &Family) -> Result<WeightedGraph> {
    match *family {
        Family::Cycle { n } => {
            if n < 3 {
                return Err(Error::InvalidParameter(format!(
                    "cycle needs n >= 3, got {n}"
                )));
            }
            let mut b = GraphBuilder::new(n);
            for x in 0..n {
                b.edge(x, (x + 1) % n, 1.0)?;
            }
            b.build()
        }
        Family::Path { n } => {
            if n < 1 {
                return Err(Error::InvalidParameter("path needs n >= 1".into()));
            }
            let mut b = GraphBuilder::new(n);
            for x in 1..n {
                b.edge(x - 1, x, 1.0)?;
            }
            b.build()
        }
        Family::Complete { n } => {
            if n < 1 {
                return Err(Error::InvalidParameter(
                    "complete graph needs n >= 1".into(),
                ));
            }
            let mut b = GraphBuilder::new(n);
            for x in 0..n {
                for y in x + 1..n {
                    b.edge(x, y, 1.0)?;
                }
            }
            b.build()
        }
        Family::Petersen => {
            let mut b = GraphBuilder::new(10);
            for i in 0..5 {
                b.edge(i, (i + 1) % 5, 1.0)?;
                b.edge(5 + i, 5 + (i + 2) % 5, 1.0)?;
                b.edge(i, 5 + i, 1.0)?;
            }
            b.build()
        }
        Family::RandomRegular { n, d, seed } => random_regular(n, d, seed),
        Family::RandomConnected {
            n,
            p,
            max_weight,
            seed,
        } => random_connected(n, p, max_weight, seed),
        Family::TreeBall { d, radius } => tree_ball(d, radius),
        Family::LatticeBox { dim, half_width } => lattice_box(dim, half_width),
        Family::CanopyTrunc { d, levels } => canopy_trunc(d, levels),
    }
}

fn random_regular(n: usize, d: usize, seed: u64) -> Result<WeightedGraph> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "random_regular needs n, d >= 1".into(),
        ));
    }
    if d >= n || (n * d) % 2 == 1 || (d == 1 && n > 2) {
        return Err(Error::InfeasibleDegreeSequence { n, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|x| std::iter::repeat_n(x, d)).collect();
    'attempt: for _ in 0..REJECTION_BUDGET {
        stubs.shuffle(&mut rng);
        let mut b = GraphBuilder::new(n);
        for pair in stubs.chunks_exact(2) {
            let (x, y) = (pair[0], pair[1]);
            if x == y || b.edge(x, y, 1.0).is_err() {
                continue 'attempt;
            }
        }
        let g = b.build()?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::RejectionBudgetExceeded {
        attempts: REJECTION_BUDGET,
    })
}

fn random_connected(n: usize, p: f64, max_weight: u32, seed: u64) -> Result<WeightedGraph> {
    if n == 0 || !(0.0..=1.0).contains(&p) || max_weight == 0 {
        return Err(Error::InvalidParameter(format!(
            "random_connected needs n >= 1, p in [0,1], max_weight >= 1 (got {n}, {p}, {max_weight})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = |rng: &mut ChaCha8Rng| f64::from(rng.random_range(1..=max_weight));
    let mut b = GraphBuilder::new(n);
    for x in 1..n {
        let parent = rng.random_range(0..x);
        let w = weight(&mut rng);
        b.edge(parent, x, w)?;
    }
    for x in 0..n {
        for y in x + 1..n {
            if rng.random::<f64>() < p && !b.entries.contains_key(&(x, y)) {
                let w = weight(&mut rng);
                b.edge(x, y, w)?;
            }
        }
    }
    b.build()
}

fn tree_ball(d: usize, radius: usize) -> Result<WeightedGraph> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "tree needs d >= 2, got {d}"
        )));
    }
    let mut count = 1usize;
    let mut shell = d;
    for _ in 0..radius {
        count = count
            .checked_add(shell)
            .filter(|&c| c <= MAX_MATERIALIZED)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("tree_ball({d}, {radius}) is too large"))
            })?;
        shell = shell.saturating_mul(d - 1);
    }
    let mut b = GraphBuilder::new(count);
    let mut dist = vec![0usize; count];
    let mut next = 1;
    for x in 0..count {
        if dist[x] == radius {
            continue;
        }
        let children = if x == 0 { d } else { d - 1 };
        for _ in 0..children {
            b.edge(x, next, 1.0)?;
            dist[next] = dist[x] + 1;
            next += 1;
        }
    }
    b.labels(Labels {
        root_distance: Some(dist),
        ..Labels::default()
    });
    b.build()
}

fn lattice_box(dim: usize, half_width: usize) -> Result<WeightedGraph> {
    if dim == 0 {
        return Err(Error::InvalidParameter("lattice needs dim >= 1".into()));
    }
    let side = 2 * half_width + 1;
    let count = side
        .checked_pow(dim as u32)
        .filter(|&c| c <= MAX_MATERIALIZED)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("lattice_box({dim}, {half_width}) is too large"))
        })?;
    // Mixed-radix order with the origin swapped into slot 0.
    let h = half_width as i64;
    let origin_raw = (0..dim).fold(0usize, |acc, _| acc * side + half_width);
    let vertex_of_raw = |raw: usize| -> usize {
        if raw == origin_raw {
            0
        } else if raw == 0 {
            origin_raw
        } else {
            raw
        }
    };
    let raw_of = |c: &[i64]| -> usize {
        c.iter()
            .rev()
            .fold(0usize, |acc, &v| acc * side + (v + h) as usize)
    };
    let mut coords: Vec<Vec<i64>> = vec![Vec::new(); count];
    for raw in 0..count {
        let mut c = Vec::with_capacity(dim);
        let mut r = raw;
        for _ in 0..dim {
            c.push((r % side) as i64 - h);
            r /= side;
        }
        coords[vertex_of_raw(raw)] = c;
    }
    let index_of = |c: &[i64]| vertex_of_raw(raw_of(c));
    let mut b = GraphBuilder::new(count);
    for c in &coords {
        let x = index_of(c);
        for axis in 0..dim {
            if c[axis] < h {
                let mut c2 = c.clone();
                c2[axis] += 1;
                b.edge(x, index_of(&c2), 1.0)?;
            }
        }
    }
    let root_distance = coords
        .iter()
        .map(|c| c.iter().map(|v| v.unsigned_abs() as usize).sum())
        .collect();
    b.labels(Labels {
        coordinate: Some(coords),
        root_distance: Some(root_distance),
        ..Labels::default()
    });
    b.build()
}

fn canopy_trunc(d: usize, levels: usize) -> Result<WeightedGraph> {
    if d < 3 || levels == 0 {
        return Err(Error::InvalidParameter(format!(
            "canopy truncation needs d >= 3 and levels >= 1, got ({d}, {levels})"
        )));
    }
    let q = d - 1;
    let mut count = 0usize;
    let mut width = 1usize;
    for _ in 0..levels {
        count = count
            .checked_add(width)
            .filter(|&c| c <= MAX_MATERIALIZED)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("canopy_trunc({d}, {levels}) is too large"))
            })?;
        width = width.saturating_mul(q);
    }
    let mut b = GraphBuilder::new(count);
    let mut level = vec![0usize; count];
    level[0] = levels;
    let mut next = 1;
    for x in 0..count {
        if level[x] == 1 {
            continue;
        }
        for _ in 0..q {
            b.edge(x, next, 1.0)?;
            level[next] = level[x] - 1;
            next += 1;
        }
    }
    let root_distance = level.iter().map(|&l| levels - l).collect();
    b.labels(Labels {
        level: Some(level),
        root_distance: Some(root_distance),
        ..Labels::default()
    });
    b.build()
}

/// Writes the edge-list text format: header `n <count> d-bound <D>`, then
/// `x y w` per undirected edge and `loop x w` per loop.
pub fn write_edge_list<W: Write>(graph: &WeightedGraph, mut out: W) -> Result<()> {
    writeln!(
        out,
        "n {} d-bound {}",
        graph.vertex_count(),
        graph.degree_bound()
    )?;
    for (x, y, w) in graph.edges() {
        writeln!(out, "{x} {y} {w}")?;
    }
    for (x, w) in graph.loops() {
        writeln!(out, "loop {x} {w}")?;
    }
    Ok(())
}

pub fn to_edge_list_string(graph: &WeightedGraph) -> String {
    let mut buf = Vec::new();
    write_edge_list(graph, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("edge list is ASCII")
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<WeightedGraph> {
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = input.lines().enumerate();
    let (count, bound) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(parse_err(0, "missing header".into()));
        };
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 4 || tok[0] != "n" || tok[2] != "d-bound" {
            return Err(parse_err(i + 1, format!("bad header `{line}`")));
        }
        let n: usize = tok[1]
            .parse()
            .map_err(|e| parse_err(i + 1, format!("vertex count: {e}")))?;
        let bound: f64 = tok[3]
            .parse()
            .map_err(|e| parse_err(i + 1, format!("degree bound: {e}")))?;
        break (n, bound);
    };
    let mut b = GraphBuilder::new(count);
    for (i, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|e| parse_err(i + 1, format!("`{s}`: {e}")))
        };
        let real = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| parse_err(i + 1, format!("`{s}`: {e}")))
        };
        match tok.as_slice() {
            ["loop", x, w] => {
                b.add_loop(num(x)?, real(w)?)?;
            }
            [x, y, w] => {
                b.edge(num(x)?, num(y)?, real(w)?)?;
            }
            _ => return Err(parse_err(i + 1, format!("unrecognized line `{line}`"))),
        }
    }
    let g = b.build()?;
    if g.degree_bound() > bound {
        return Err(Error::InvalidGraph(format!(
            "declared degree bound {bound} below actual {}",
            g.degree_bound()
        )));
    }
    Ok(g)
}
