//! Simple undirected graphs and the cut / induced-edge polynomials.

use std::collections::BTreeSet;

use rug::Rational;

use super::Degree2Polynomial;
use crate::error::{Error, Result};

/// A simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, normalizing each edge to `(min, max)` and rejecting
    /// self-loops, duplicate edges and out-of-range vertices.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::Precondition(format!(
                    "self-loop at vertex {}",
                    u + 1
                )));
            }
            if u >= n || v >= n {
                return Err(Error::Precondition(format!(
                    "edge ({}, {}) outside 1..={n}",
                    u + 1,
                    v + 1
                )));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::Precondition(format!(
                    "duplicate edge ({}, {})",
                    e.0 + 1,
                    e.1 + 1
                )));
            }
            out.push(e);
        }
        Ok(Self { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of edges cut by the bipartition `{x_i = 1}` / `{x_i = -1}`.
    pub fn cut_size(&self, x: &[i8]) -> usize {
        self.edges.iter().filter(|&&(u, v)| x[u] != x[v]).count()
    }

    /// Number of edges with both endpoints in `{i : x_i = 1}`.
    pub fn induced_size(&self, x: &[i8]) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| x[u] > 0 && x[v] > 0)
            .count()
    }
}

/// `q_CUT(x) = (|E| - sum_{ij in E} x_i x_j) / 2`, the number of cut edges.
pub fn graph_cut_poly(g: &Graph) -> Degree2Polynomial {
    let mut p = Degree2Polynomial::new_multilinear(g.n());
    let half = Rational::from((1, 2));
    for &(u, v) in g.edges() {
        p.add_quad(u, v, Rational::from(-&half))
            .expect("valid edge");
    }
    p.add_constant(Rational::from((g.edges().len(), 2)));
    p
}

/// `q_INDUCED(x) = sum_{ij in E} (1 + x_i)/2 * (1 + x_j)/2`, the number of
/// edges inside `{i : x_i = 1}`.
pub fn graph_induced_poly(g: &Graph) -> Degree2Polynomial {
    let mut p = Degree2Polynomial::new_multilinear(g.n());
    let quarter = Rational::from((1, 4));
    for &(u, v) in g.edges() {
        p.add_quad(u, v, quarter.clone()).expect("valid edge");
        p.add_lin(u, quarter.clone()).expect("valid edge");
        p.add_lin(v, quarter.clone()).expect("valid edge");
        p.add_constant(quarter.clone());
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn cut_examples() {
        let p = graph_cut_poly(&triangle());
        assert_eq!(p.evaluate_signs(&[1, 1, 1]), 0);
        assert_eq!(p.evaluate_signs(&[1, 1, -1]), 2);
        let path = graph_cut_poly(&Graph::new(2, vec![(0, 1)]).unwrap());
        assert_eq!(path.evaluate_signs(&[1, -1]), 1);
    }

    #[test]
    fn induced_examples() {
        let p = graph_induced_poly(&triangle());
        assert_eq!(p.evaluate_signs(&[1, 1, 1]), 3);
        assert_eq!(p.evaluate_signs(&[-1, -1, -1]), 0);
        assert_eq!(p.evaluate_signs(&[1, 1, -1]), 1);
    }

    #[test]
    fn rejects_loops() {
        assert!(Graph::new(2, vec![(1, 1)]).is_err());
        assert!(Graph::new(2, vec![(0, 1), (1, 0)]).is_err());
    }
}
