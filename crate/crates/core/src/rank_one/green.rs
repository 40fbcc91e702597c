//! Green functions `f_ox(t) = (1 − tA)^{-1}_ox` for the regular tree, the
//! integer lattice and finite graphs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lattice::{line_green, plane_green_origin, LatticeSeries};
use crate::error::{Error, Result};
use crate::graph::{Adjacency, WeightedGraph};
use crate::spectral::principal_pair;

pub const DEFAULT_SERIES_TERMS: usize = 10_000;
pub const MIN_SERIES_TERMS: usize = 1_000;
/// Finite graphs up to this size use a dense LU solve.
const DENSE_LIMIT: usize = 512;

/// Where a vertex sits relative to the perturbed site `o`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    /// Distance from `o` in the tree.
    Shell(usize),
    /// Lattice point, `o` at the origin.
    Point(Vec<i64>),
    /// Vertex of a finite graph.
    Vertex(usize),
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Site::Shell(k) => write!(f, "{k}"),
            Site::Vertex(x) => write!(f, "{x}"),
            Site::Point(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "({})", parts.join(" "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankOneModel {
    Tree { d: usize },
    Lattice { dim: usize },
    Finite { graph: WeightedGraph, root: usize },
}

impl RankOneModel {
    pub fn label(&self) -> String {
        match self {
            RankOneModel::Tree { d } => format!("tree(d={d})"),
            RankOneModel::Lattice { dim } => format!("lattice(dim={dim})"),
            RankOneModel::Finite { graph, root } => {
                format!("finite(n={}, root={root})", graph.vertex_count())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GreenMethod {
    ClosedForm,
    Series { terms: usize },
    LinearSolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: f64,
    pub error_bound: f64,
    pub method: GreenMethod,
}

/// Tree kernel `h(t) = 2 / (1 + sqrt(1 − 4 q t²))`, the generating function
/// of first returns to a vertex from one of its children.
pub fn tree_h(q: f64, t: f64) -> f64 {
    2.0 / (1.0 + (1.0 - 4.0 * q * t * t).max(0.0).sqrt())
}

type SeriesCache = Mutex<HashMap<Vec<u64>, Arc<LatticeSeries>>>;

/// Green function of a rank-one model. Lattice series are cached per
/// symmetry class and shared between threads.
#[derive(Debug)]
pub struct GreenFunction {
    model: RankOneModel,
    terms: usize,
    cache: SeriesCache,
    /// Spectral radius of the unperturbed finite graph.
    finite_rho: f64,
}

impl GreenFunction {
    pub fn new(model: RankOneModel) -> Result<Self> {
        Self::with_terms(model, DEFAULT_SERIES_TERMS)
    }

    pub fn tree(d: usize) -> Result<Self> {
        Self::new(RankOneModel::Tree { d })
    }

    pub fn lattice(dim: usize) -> Result<Self> {
        Self::new(RankOneModel::Lattice { dim })
    }

    /// `terms` is the number of exactly computed lattice series terms.
    pub fn with_terms(model: RankOneModel, terms: usize) -> Result<Self> {
        let mut finite_rho = f64::NAN;
        match &model {
            RankOneModel::Tree { d } if *d < 2 => {
                return Err(Error::InvalidParameter(format!(
                    "tree needs d >= 2, got {d}"
                )))
            }
            RankOneModel::Lattice { dim } if *dim == 0 || *dim > 12 => {
                return Err(Error::InvalidParameter(format!(
                    "lattice dimension must be in 1..=12, got {dim}"
                )))
            }
            RankOneModel::Lattice { .. } if terms < MIN_SERIES_TERMS => {
                return Err(Error::InvalidParameter(format!(
                    "lattice series needs at least {MIN_SERIES_TERMS} terms, got {terms}"
                )))
            }
            RankOneModel::Finite { graph, root } => {
                graph.check_vertex(*root)?;
                finite_rho = principal_pair(graph, 1e-13)?.rho;
            }
            _ => {}
        }
        Ok(Self {
            model,
            terms,
            cache: Mutex::new(HashMap::new()),
            finite_rho,
        })
    }

    pub fn model(&self) -> &RankOneModel {
        &self.model
    }

    pub fn series_terms(&self) -> usize {
        self.terms
    }

    /// Walk growth `d` of the unperturbed model (`ρ(A)` for finite graphs).
    pub fn base_rate(&self) -> f64 {
        match &self.model {
            RankOneModel::Tree { d } => *d as f64,
            RankOneModel::Lattice { dim } => 2.0 * *dim as f64,
            RankOneModel::Finite { .. } => self.finite_rho,
        }
    }

    /// `ℓ²` spectral radius `r(A)` of the unperturbed model.
    pub fn l2_radius(&self) -> f64 {
        match &self.model {
            RankOneModel::Tree { d } => 2.0 * ((*d - 1) as f64).sqrt(),
            _ => self.base_rate(),
        }
    }

    /// Largest admissible `t`; included except for finite graphs.
    pub fn domain_limit(&self) -> f64 {
        1.0 / self.l2_radius()
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let limit = self.domain_limit();
        let ok = match self.model {
            RankOneModel::Finite { .. } => t >= 0.0 && t < limit * (1.0 - 1e-12),
            _ => t >= 0.0 && t <= limit * (1.0 + 1e-15),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BranchCut { t, limit })
        }
    }

    /// `f_o·(t)` evaluated at `site`.
    pub fn green(&self, t: f64, site: &Site) -> Result<GreenValue> {
        self.check_t(t)?;
        match (&self.model, site) {
            (RankOneModel::Tree { d }, Site::Shell(k)) => {
                let q = (*d - 1) as f64;
                let h = tree_h(q, t);
                let g_oo = 1.0 / (1.0 - *d as f64 * t * t * h);
                Ok(GreenValue {
                    value: g_oo * (t * h).powi(*k as i32),
                    error_bound: 0.0,
                    method: GreenMethod::ClosedForm,
                })
            }
            (RankOneModel::Lattice { dim }, Site::Point(x)) => {
                if x.len() != *dim {
                    return Err(Error::InvalidParameter(format!(
                        "lattice point {site} has wrong dimension (expected {dim})"
                    )));
                }
                Ok(self.lattice_green(*dim, t, x))
            }
            (RankOneModel::Finite { graph, .. }, Site::Vertex(x)) => {
                graph.check_vertex(*x)?;
                let (col, method) = self.finite_column(t)?;
                Ok(GreenValue {
                    value: col[*x],
                    error_bound: 0.0,
                    method,
                })
            }
            _ => Err(Error::InvalidParameter(format!(
                "site {site} does not belong to model {}",
                self.model.label()
            ))),
        }
    }

    /// `f_oo(t)`.
    pub fn f_oo(&self, t: f64) -> Result<f64> {
        Ok(self.green(t, &self.origin())?.value)
    }

    pub fn origin(&self) -> Site {
        match &self.model {
            RankOneModel::Tree { .. } => Site::Shell(0),
            RankOneModel::Lattice { dim } => Site::Point(vec![0; *dim]),
            RankOneModel::Finite { root, .. } => Site::Vertex(*root),
        }
    }

    fn lattice_green(&self, dim: usize, t: f64, x: &[i64]) -> GreenValue {
        let s = (2 * dim) as f64 * t;
        let mut key: Vec<u64> = x.iter().map(|v| v.unsigned_abs()).collect();
        key.sort_unstable();
        if dim == 1 || (dim == 2 && key.iter().all(|&v| v == 0)) {
            let value = if dim == 1 {
                line_green(s, key[0])
            } else {
                plane_green_origin(s)
            };
            return GreenValue {
                value,
                error_bound: 0.0,
                method: GreenMethod::ClosedForm,
            };
        }
        let series = self.series(key);
        let (value, error_bound) = series.evaluate(s);
        GreenValue {
            value,
            error_bound,
            method: GreenMethod::Series { terms: self.terms },
        }
    }

    fn series(&self, key: Vec<u64>) -> Arc<LatticeSeries> {
        if let Some(s) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Arc::clone(s);
        }
        let series = Arc::new(LatticeSeries::new(&key, self.terms));
        self.cache
            .lock()
            .expect("cache poisoned")
            .entry(key)
            .or_insert(series)
            .clone()
    }

    /// Column `(1 − tA)^{-1} e_o` of a finite graph.
    pub fn finite_column(&self, t: f64) -> Result<(Vec<f64>, GreenMethod)> {
        let RankOneModel::Finite { graph, root } = &self.model else {
            return Err(Error::InvalidParameter("not a finite model".into()));
        };
        self.check_t(t)?;
        let n = graph.vertex_count();
        if n <= DENSE_LIMIT {
            let m = DMatrix::from_fn(n, n, |i, j| {
                f64::from(u8::from(i == j)) - t * graph.weight(i, j)
            });
            let mut e = DVector::zeros(n);
            e[*root] = 1.0;
            let sol = m.lu().solve(&e).ok_or_else(|| Error::BranchCut {
                t,
                limit: self.domain_limit(),
            })?;
            return Ok((sol.iter().copied().collect(), GreenMethod::LinearSolve));
        }
        Ok((
            conjugate_gradient(graph, t, *root)?,
            GreenMethod::LinearSolve,
        ))
    }
}

/// Solves `(1 − tA) f = e_root`; the matrix is positive definite for `t < 1/ρ(A)`.
fn conjugate_gradient(graph: &WeightedGraph, t: f64, root: usize) -> Result<Vec<f64>> {
    let n = graph.vertex_count();
    let apply = |v: &[f64], out: &mut [f64]| {
        graph.apply(v, out);
        for (o, &x) in out.iter_mut().zip(v) {
            *o = x - t * *o;
        }
    };
    let mut f = vec![0.0; n];
    let mut r = vec![0.0; n];
    r[root] = 1.0;
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = 1.0;
    let max_iter = 20 * n + 1000;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            f[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if rr_new.sqrt() <= 1e-15 * f.iter().map(|v| v * v).sum::<f64>().sqrt() {
            return Ok(f);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        what: "finite Green function solve",
        iterations: max_iter,
        residual: rr.sqrt(),
    })
}
