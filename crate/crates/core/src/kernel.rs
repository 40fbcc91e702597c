//! Sparse row-stochastic transition kernels attached to a graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkKind {
    Srw,
    Merw,
    Urw,
    Custom,
}

/// Transition matrix `p_xy` in compressed rows. Zero entries are allowed;
/// `support` queries report only strictly positive ones.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    kind: WalkKind,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
}

impl MarkovKernel {
    /// Builds a kernel on the edges of `graph` with `p_xy = f(x, y, A_xy)`.
    /// The result is not normalized.
    pub fn from_graph_fn<F>(graph: &WeightedGraph, kind: WalkKind, mut f: F) -> Self
    where
        F: FnMut(usize, usize, f64) -> f64,
    {
        let n = graph.vertex_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(graph.entry_count());
        let mut probs = Vec::with_capacity(graph.entry_count());
        offsets.push(0);
        for x in 0..n {
            for (y, w) in graph.row(x) {
                targets.push(y);
                probs.push(f(x, y, w));
            }
            offsets.push(targets.len());
        }
        Self {
            kind,
            offsets,
            targets,
            probs,
        }
    }

    /// Weighted simple random walk `p_xy = A_xy / deg_A(x)`.
    pub fn srw(graph: &WeightedGraph) -> Self {
        let deg: Vec<f64> = (0..graph.vertex_count())
            .map(|x| graph.weighted_degree(x))
            .collect();
        Self::from_graph_fn(graph, WalkKind::Srw, |x, _, w| w / deg[x])
    }

    /// Random kernel on the edges of `graph`: each entry proportional to an
    /// independent uniform draw from `[0.05, 1)`.
    pub fn random(graph: &WeightedGraph, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_graph_fn(graph, WalkKind::Custom, |_, _, _| {
            rng.random_range(0.05..1.0)
        })
        .normalized()
    }

    /// Builds a kernel from explicit rows, validating non-negativity and row sums.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, kind: WalkKind) -> Result<Self> {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for (x, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(y, _)| y);
            let mut sum = 0.0;
            for (i, &(y, p)) in row.iter().enumerate() {
                if y >= n {
                    return Err(Error::VertexOutOfRange {
                        vertex: y,
                        count: n,
                    });
                }
                if i > 0 && row[i - 1].0 == y {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate kernel entry ({x}, {y})"
                    )));
                }
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "kernel entry ({x}, {y}) = {p} is not a probability"
                    )));
                }
                sum += p;
                targets.push(y);
                probs.push(p);
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "kernel row {x} sums to {sum}"
                )));
            }
            offsets.push(targets.len());
        }
        Ok(Self {
            kind,
            offsets,
            targets,
            probs,
        })
    }

    pub fn kind(&self) -> WalkKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: WalkKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.probs[r].iter().copied())
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        let r = self.offsets[x]..self.offsets[x + 1];
        match self.targets[r.clone()].binary_search(&y) {
            Ok(i) => self.probs[r.start + i],
            Err(_) => 0.0,
        }
    }

    /// Worst `|Σ_y p_xy − 1|` over rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.vertex_count())
            .map(|x| (self.row(x).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Divides each row by its sum.
    pub fn normalized(mut self) -> Self {
        for x in 0..self.vertex_count() {
            let r = self.offsets[x]..self.offsets[x + 1];
            let s: f64 = self.probs[r.clone()].iter().sum();
            if s > 0.0 {
                for p in &mut self.probs[r] {
                    *p /= s;
                }
            }
        }
        self
    }

    /// Every positive entry must sit on an edge of `graph`. With `exact`,
    /// every edge must also carry positive probability.
    pub fn check_support(&self, graph: &WeightedGraph, exact: bool) -> Result<()> {
        if self.vertex_count() != graph.vertex_count() {
            return Err(Error::KernelSupportMismatch { vertex: 0 });
        }
        for x in 0..self.vertex_count() {
            for (y, p) in self.row(x) {
                if p > 0.0 && graph.weight(x, y) == 0.0 {
                    return Err(Error::KernelSupportMismatch { vertex: x });
                }
            }
            if exact && graph.row(x).any(|(y, _)| self.prob(x, y) <= 0.0) {
                return Err(Error::KernelSupportMismatch { vertex: x });
            }
        }
        Ok(())
    }

    /// `(x, y, p_xy)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.vertex_count())
            .flat_map(|x| self.row(x).map(move |(y, p)| (x, y, p)))
            .collect()
    }

    /// Next state given a uniform draw `u ∈ [0, 1)`.
    pub fn step(&self, x: usize, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = x;
        for (y, p) in self.row(x) {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = y;
            if u < acc {
                return y;
            }
        }
        last
    }

    /// `ν ↦ νP`.
    pub fn push_forward(&self, nu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (x, &mass) in nu.iter().enumerate().take(self.vertex_count()) {
            if mass == 0.0 {
                continue;
            }
            for (y, p) in self.row(x) {
                out[y] += mass * p;
            }
        }
    }

    /// True if the directed support graph is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let n = self.vertex_count();
        if n == 0 {
            return false;
        }
        let reach = |forward: bool| -> bool {
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for x in 0..n {
                for (y, p) in self.row(x) {
                    if p > 0.0 {
                        if forward {
                            adj[x].push(y);
                        } else {
                            adj[y].push(x);
                        }
                    }
                }
            }
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Family};

    #[test]
    fn srw_rows_are_uniform() {
        let g = generate(&Family::Petersen).unwrap();
        let k = MarkovKernel::srw(&g);
        assert!(k.max_row_sum_error() < 1e-15);
        assert!(k.triplets().iter().all(|&(_, _, p)| p == 1.0 / 3.0));
        k.check_support(&g, true).unwrap();
        assert!(k.is_irreducible());
    }

    #[test]
    fn from_rows_validates() {
        assert!(MarkovKernel::from_rows(vec![vec![(0, 0.5)]], WalkKind::Custom).is_err());
        assert!(MarkovKernel::from_rows(vec![vec![(1, 1.0)]], WalkKind::Custom).is_err());
        let k = MarkovKernel::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]], WalkKind::Custom)
            .unwrap();
        assert_eq!(k.step(0, 0.99), 1);
    }

    #[test]
    fn support_mismatch_detected() {
        let g = generate(&Family::Path { n: 3 }).unwrap();
        let k = MarkovKernel::from_rows(
            vec![vec![(2, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]],
            WalkKind::Custom,
        )
        .unwrap();
        assert!(matches!(
            k.check_support(&g, false),
            Err(Error::KernelSupportMismatch { vertex: 0 })
        ));
    }
}
