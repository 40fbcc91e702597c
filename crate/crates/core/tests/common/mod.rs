//! Shared test corpus and brute-force oracles.
#![allow(dead_code)]

use merw_core::{generate, Family, GraphBuilder, WeightedGraph};
use nalgebra::{DMatrix, SymmetricEigen};

pub fn star(leaves: usize) -> WeightedGraph {
    let mut b = GraphBuilder::new(leaves + 1);
    for y in 1..=leaves {
        b.edge(0, y, 1.0).unwrap();
    }
    b.build().unwrap()
}

/// Small connected graphs with integer weights, loops included.
pub fn corpus() -> Vec<(String, WeightedGraph)> {
    let mut out: Vec<(String, WeightedGraph)> = Vec::new();
    let mut add = |name: String, g: WeightedGraph| out.push((name, g));
    for n in 2..=6 {
        add(format!("path{n}"), generate(&Family::Path { n }).unwrap());
    }
    for n in 3..=8 {
        add(format!("cycle{n}"), generate(&Family::Cycle { n }).unwrap());
    }
    for n in [4, 5] {
        add(
            format!("complete{n}"),
            generate(&Family::Complete { n }).unwrap(),
        );
    }
    add("star4".into(), star(4));
    add(
        "tree_ball_3_1".into(),
        generate(&Family::TreeBall { d: 3, radius: 1 }).unwrap(),
    );
    add(
        "canopy_3_3".into(),
        generate(&Family::CanopyTrunc { d: 3, levels: 3 }).unwrap(),
    );
    add(
        "line_box_3".into(),
        generate(&Family::LatticeBox {
            dim: 1,
            half_width: 3,
        })
        .unwrap(),
    );
    add("petersen".into(), generate(&Family::Petersen).unwrap());
    add(
        "plane_box_1".into(),
        generate(&Family::LatticeBox {
            dim: 2,
            half_width: 1,
        })
        .unwrap(),
    );
    for seed in 0..8u64 {
        let n = 5 + (seed as usize % 4);
        let g = generate(&Family::RandomConnected {
            n,
            p: 0.3,
            max_weight: 3,
            seed,
        })
        .unwrap();
        add(format!("random{n}_s{seed}"), g);
    }
    let mut b = GraphBuilder::new(4);
    b.edge(0, 1, 1.0)
        .unwrap()
        .edge(1, 2, 1.0)
        .unwrap()
        .edge(2, 3, 1.0)
        .unwrap();
    b.add_loop(0, 2.0).unwrap();
    add("path4_loop".into(), b.build().unwrap());
    let mut b = GraphBuilder::new(5);
    for x in 0..5 {
        b.edge(x, (x + 1) % 5, 1.0 + (x % 2) as f64).unwrap();
    }
    b.add_loop(0, 1.0).unwrap().add_loop(2, 3.0).unwrap();
    add("cycle5_weighted_loops".into(), b.build().unwrap());
    out
}

/// Enumerates every walk of length `n` from `x`, calling `visit(walk, weight)`.
pub fn enumerate_walks(
    g: &WeightedGraph,
    x: usize,
    n: usize,
    visit: &mut impl FnMut(&[usize], f64),
) {
    fn go(
        g: &WeightedGraph,
        walk: &mut Vec<usize>,
        weight: f64,
        left: usize,
        visit: &mut impl FnMut(&[usize], f64),
    ) {
        if left == 0 {
            visit(walk, weight);
            return;
        }
        let x = *walk.last().unwrap();
        for (y, w) in g.row(x) {
            walk.push(y);
            go(g, walk, weight * w, left - 1, visit);
            walk.pop();
        }
    }
    let mut walk = vec![x];
    go(g, &mut walk, 1.0, n, visit);
}

pub fn dense(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        for (y, w) in g.row(x) {
            m[(x, y)] = w;
        }
    }
    m
}

/// Largest eigenvalue and positive unit eigenvector from a full dense solve.
pub fn dense_principal(g: &WeightedGraph) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(dense(g));
    let (i, rho) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let v = eig.eigenvectors.column(i);
    let sign = if v.sum() < 0.0 { -1.0 } else { 1.0 };
    (rho, v.iter().map(|a| sign * a).collect())
}
