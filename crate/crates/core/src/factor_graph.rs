//! Bipartite user/resource graph built from the `K x J` binary matrix `F`.
//!
//! `F[k][j] = 1` iff user `j` occupies resource `k`. Neighbor lists are kept in
//! ascending index order so message schedules are deterministic. Each `1` in
//! `F` is an edge; edges are numbered resource-major (all edges of resource 0
//! first, users ascending within a resource).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    matrix: Vec<Vec<u8>>,
    resource_neighbors: Vec<Vec<usize>>,
    user_neighbors: Vec<Vec<usize>>,
    edge_ids: Vec<Vec<Option<usize>>>,
    edges: Vec<(usize, usize)>,
}

impl FactorGraph {
    pub fn from_matrix(f: &[Vec<u8>]) -> Result<Self> {
        let k = f.len();
        if k == 0 {
            return Err(Error::Graph("matrix has no rows".into()));
        }
        let j = f[0].len();
        if j == 0 {
            return Err(Error::Graph("matrix has no columns".into()));
        }
        for (r, row) in f.iter().enumerate() {
            if row.len() != j {
                return Err(Error::Graph(format!(
                    "row {} has {} columns, expected {j}",
                    r + 1,
                    row.len()
                )));
            }
            if let Some(c) = row.iter().position(|&v| v > 1) {
                return Err(Error::Graph(format!(
                    "entry ({}, {}) = {} is not binary",
                    r + 1,
                    c + 1,
                    row[c]
                )));
            }
        }

        let resource_neighbors: Vec<Vec<usize>> =
            f.iter().map(|row| (0..j).filter(|&c| row[c] == 1).collect()).collect();
        let user_neighbors: Vec<Vec<usize>> = (0..j).map(|c| (0..k).filter(|&r| f[r][c] == 1).collect()).collect();
        if let Some(r) = resource_neighbors.iter().position(Vec::is_empty) {
            return Err(Error::Graph(format!("resource {} has no users", r + 1)));
        }
        if let Some(c) = user_neighbors.iter().position(Vec::is_empty) {
            return Err(Error::Graph(format!("user {} has no resources", c + 1)));
        }

        let mut edge_ids = vec![vec![None; j]; k];
        let mut edges = Vec::new();
        for (r, users) in resource_neighbors.iter().enumerate() {
            for &u in users {
                edge_ids[r][u] = Some(edges.len());
                edges.push((r, u));
            }
        }

        Ok(Self {
            matrix: f.to_vec(),
            resource_neighbors,
            user_neighbors,
            edge_ids,
            edges,
        })
    }

    /// Parses a whitespace-separated 0/1 matrix, one resource per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse_matrix(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<u8>().map_err(|_| Error::Parse {
                        line: n + 1,
                        message: format!("`{t}` is not a matrix entry"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_matrix(&rows)
    }

    pub fn resources(&self) -> usize {
        self.matrix.len()
    }

    pub fn users(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn matrix(&self) -> &[Vec<u8>] {
        &self.matrix
    }

    /// Users on resource `k`, ascending.
    pub fn resource_neighbors(&self, k: usize) -> &[usize] {
        &self.resource_neighbors[k]
    }

    /// Resources used by user `j`, ascending.
    pub fn user_neighbors(&self, j: usize) -> &[usize] {
        &self.user_neighbors[j]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, k: usize, j: usize) -> Option<usize> {
        self.edge_ids[k][j]
    }

    /// `(resource, user)` of an edge id.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// `d_f` if every resource has the same degree.
    pub fn regular_resource_degree(&self) -> Option<usize> {
        let d = self.resource_neighbors[0].len();
        self.resource_neighbors.iter().all(|n| n.len() == d).then_some(d)
    }

    /// `N` if every user has the same degree.
    pub fn regular_user_degree(&self) -> Option<usize> {
        let n = self.user_neighbors[0].len();
        self.user_neighbors.iter().all(|u| u.len() == n).then_some(n)
    }

    /// `100 * J / K`.
    pub fn overloading_factor(&self) -> f64 {
        100.0 * self.users() as f64 / self.resources() as f64
    }

    pub fn to_text(&self) -> String {
        self.matrix
            .iter()
            .map(|row| row.iter().map(u8::to_string).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }
}
