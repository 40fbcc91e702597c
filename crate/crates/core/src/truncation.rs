//! Exact finite truncations of the infinite tree, lattice and canopy tree.
//!
//! A truncation is either materialized as a [`WeightedGraph`] or, for the
//! spherically symmetric models, stored as the quotient by the shell/level
//! partition. The partition is equitable, so walk counts computed on the
//! quotient equal those of any vertex in the corresponding cell.
//!
//! Every truncation carries a per-vertex `depth`; walk counts of length `n`
//! from `x` coincide with the infinite model whenever `depth(x) + n <= radius`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate, perturb_loops, Adjacency, Family, LoopSpec, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborClass {
    pub target: usize,
    pub multiplicity: u32,
    pub weight: f64,
}

/// Quotient operator with rows of [`NeighborClass`]es. Not symmetric in general.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellOperator {
    rows: Vec<Vec<NeighborClass>>,
}

impl ShellOperator {
    pub fn new(rows: Vec<Vec<NeighborClass>>) -> Self {
        Self { rows }
    }

    pub fn row(&self, x: usize) -> &[NeighborClass] {
        &self.rows[x]
    }
}

impl Adjacency for ShellOperator {
    fn vertex_count(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(usize, u32, f64)>(&self, x: usize, mut f: F) {
        for c in &self.rows[x] {
            f(c.target, c.multiplicity, c.weight);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TruncationModel {
    Tree { d: usize },
    Lattice { dim: usize },
    Canopy { d: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruncationBody {
    Graph(WeightedGraph),
    Shells(ShellOperator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallTruncation {
    model: TruncationModel,
    radius: usize,
    center: usize,
    body: TruncationBody,
    depth: Vec<usize>,
}

fn class(target: usize, multiplicity: usize, weight: f64) -> NeighborClass {
    NeighborClass {
        target,
        multiplicity: multiplicity as u32,
        weight,
    }
}

impl BallTruncation {
    /// Shell quotient of the radius-`radius` ball in `T_d`; index `k` is the
    /// sphere at distance `k` from the center.
    pub fn tree(d: usize, radius: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "tree needs d >= 2, got {d}"
            )));
        }
        let mut rows = Vec::with_capacity(radius + 1);
        for k in 0..=radius {
            let mut row = Vec::new();
            if k > 0 {
                row.push(class(k - 1, 1, 1.0));
            }
            if k < radius {
                row.push(class(k + 1, if k == 0 { d } else { d - 1 }, 1.0));
            }
            rows.push(row);
        }
        Ok(Self {
            model: TruncationModel::Tree { d },
            radius,
            center: 0,
            body: TruncationBody::Shells(ShellOperator::new(rows)),
            depth: (0..=radius).collect(),
        })
    }

    /// Materialized ball in `T_d`; vertex 0 is the center.
    pub fn tree_graph(d: usize, radius: usize) -> Result<Self> {
        let g = generate(&Family::TreeBall { d, radius })?;
        let depth = g
            .labels()
            .root_distance
            .clone()
            .expect("tree balls carry root distances");
        Ok(Self {
            model: TruncationModel::Tree { d },
            radius,
            center: 0,
            body: TruncationBody::Graph(g),
            depth,
        })
    }

    /// Box `[-half_width, half_width]^dim` of `Z^dim`; depth is the sup-norm.
    pub fn lattice(dim: usize, half_width: usize) -> Result<Self> {
        let g = generate(&Family::LatticeBox { dim, half_width })?;
        let depth = g
            .labels()
            .coordinate
            .as_ref()
            .expect("lattice boxes carry coordinates")
            .iter()
            .map(|c| {
                c.iter()
                    .map(|v| v.unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        Ok(Self {
            model: TruncationModel::Lattice { dim },
            radius: half_width,
            center: 0,
            body: TruncationBody::Graph(g),
            depth,
        })
    }

    /// Level quotient of the canopy tree cut at level `levels`; index `i`
    /// holds level `i + 1` and the center is the top level.
    pub fn canopy(d: usize, levels: usize) -> Result<Self> {
        if d < 3 || levels == 0 {
            return Err(Error::InvalidParameter(format!(
                "canopy needs d >= 3 and levels >= 1, got ({d}, {levels})"
            )));
        }
        let rows = (1..=levels)
            .map(|l| {
                let mut row = Vec::new();
                if l > 1 {
                    row.push(class(l - 2, d - 1, 1.0));
                }
                if l < levels {
                    row.push(class(l, 1, 1.0));
                }
                row
            })
            .collect();
        Ok(Self {
            model: TruncationModel::Canopy { d },
            radius: levels,
            center: levels - 1,
            body: TruncationBody::Shells(ShellOperator::new(rows)),
            depth: (1..=levels).collect(),
        })
    }

    /// Materialized canopy truncation; vertex 0 is the top, depth is the level.
    pub fn canopy_graph(d: usize, levels: usize) -> Result<Self> {
        let g = generate(&Family::CanopyTrunc { d, levels })?;
        let depth = g.labels().level.clone().expect("canopy carries levels");
        Ok(Self {
            model: TruncationModel::Canopy { d },
            radius: levels,
            center: 0,
            body: TruncationBody::Graph(g),
            depth,
        })
    }

    /// Adds a loop of weight `sigma` at the center.
    pub fn with_center_loop(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "loop amplitude must be finite and non-negative, got {sigma}"
            )));
        }
        if sigma == 0.0 {
            return Ok(self);
        }
        let center = self.center;
        self.body = match self.body {
            TruncationBody::Graph(g) => {
                TruncationBody::Graph(perturb_loops(&g, &LoopSpec::single(center, sigma)?)?)
            }
            TruncationBody::Shells(mut s) => {
                let row = &mut s.rows[center];
                match row.iter_mut().find(|c| c.target == center) {
                    Some(c) => c.weight += sigma,
                    None => {
                        row.insert(0, class(center, 1, sigma));
                    }
                }
                TruncationBody::Shells(s)
            }
        };
        Ok(self)
    }

    pub fn model(&self) -> TruncationModel {
        self.model
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn body(&self) -> &TruncationBody {
        &self.body
    }

    pub fn depth(&self, x: usize) -> usize {
        self.depth[x]
    }

    /// Quotient index of canopy level `level`, or of tree shell `level`.
    pub fn shell_index(&self, level: usize) -> Result<usize> {
        let idx = match self.model {
            TruncationModel::Canopy { .. } => level.checked_sub(1),
            _ => Some(level),
        };
        match (idx, &self.body) {
            (Some(i), TruncationBody::Shells(s)) if i < s.vertex_count() => Ok(i),
            _ => Err(Error::InvalidParameter(format!(
                "no shell {level} in this truncation"
            ))),
        }
    }

    /// Hard check of the exactness window `depth(x) + n <= radius`.
    pub fn check_window(&self, x: usize, n: usize) -> Result<()> {
        if x >= self.depth.len() {
            return Err(Error::VertexOutOfRange {
                vertex: x,
                count: self.depth.len(),
            });
        }
        let depth = self.depth[x];
        if depth + n > self.radius {
            return Err(Error::WindowViolation {
                depth,
                n,
                radius: self.radius,
            });
        }
        Ok(())
    }

    pub fn neighbor_classes(&self, x: usize) -> Vec<NeighborClass> {
        let mut out = Vec::new();
        self.for_each_neighbor(x, |target, multiplicity, weight| {
            out.push(NeighborClass {
                target,
                multiplicity,
                weight,
            })
        });
        out
    }
}

impl Adjacency for BallTruncation {
    fn vertex_count(&self) -> usize {
        match &self.body {
            TruncationBody::Graph(g) => g.vertex_count(),
            TruncationBody::Shells(s) => s.vertex_count(),
        }
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(usize, u32, f64)>(&self, x: usize, f: F) {
        match &self.body {
            TruncationBody::Graph(g) => g.for_each_neighbor(x, f),
            TruncationBody::Shells(s) => s.for_each_neighbor(x, f),
        }
    }

    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        match &self.body {
            TruncationBody::Graph(g) => g.apply(src, dst),
            TruncationBody::Shells(s) => s.apply(src, dst),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_a_hard_error() {
        let b = BallTruncation::tree(4, 10).unwrap();
        b.check_window(3, 7).unwrap();
        assert!(matches!(
            b.check_window(3, 8),
            Err(Error::WindowViolation {
                depth: 3,
                n: 8,
                radius: 10
            })
        ));
    }

    #[test]
    fn center_loop_on_quotient() {
        let b = BallTruncation::tree(4, 5)
            .unwrap()
            .with_center_loop(1.0)
            .unwrap();
        let row = b.neighbor_classes(0);
        assert_eq!(row[0], class(0, 1, 1.0));
        assert_eq!(row[1], class(1, 4, 1.0));
    }

    #[test]
    fn canopy_quotient_rows() {
        let b = BallTruncation::canopy(3, 4).unwrap();
        assert_eq!(b.center(), 3);
        assert_eq!(b.neighbor_classes(0), vec![class(1, 1, 1.0)]);
        assert_eq!(
            b.neighbor_classes(1),
            vec![class(0, 2, 1.0), class(2, 1, 1.0)]
        );
        assert_eq!(b.neighbor_classes(3), vec![class(2, 2, 1.0)]);
        assert_eq!(b.shell_index(2).unwrap(), 1);
    }

    #[test]
    fn lattice_depth_is_sup_norm() {
        let b = BallTruncation::lattice(2, 3).unwrap();
        assert_eq!(b.depth(0), 0);
        assert_eq!(b.radius(), 3);
        assert!((0..b.vertex_count()).all(|x| b.depth(x) <= 3));
    }
}
