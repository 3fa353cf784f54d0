//! Channel adjacency from the anteroposterior/mediolateral lattice rule:
//! within a row, consecutive lateral positions connect; within a lateral
//! column, consecutive rows connect. Edges are undirected and unweighted;
//! self-loops are never stored (attention masking adds them downstream).

use std::collections::BTreeMap;

use crate::label::{parse_label, ElectrodeLabel};
use crate::GraphError;

#[derive(Clone, Debug)]
pub struct AdjacencyGraph {
    labels: Vec<ElectrodeLabel>,
    matrix: Vec<u8>, // C*C, row-major
}

impl AdjacencyGraph {
    pub fn num_channels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[ElectrodeLabel] {
        &self.labels
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.matrix[i * self.labels.len() + j] != 0
    }

    /// Dense symmetric 0/1 matrix, row-major.
    pub fn matrix(&self) -> &[u8] {
        &self.matrix
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&j| self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }

    /// Undirected edge list with i < j, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let c = self.labels.len();
        let mut out = Vec::new();
        for i in 0..c {
            for j in i + 1..c {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.raw.eq_ignore_ascii_case(label))
    }
}

pub fn build_adjacency<S: AsRef<str>>(labels: &[S]) -> Result<AdjacencyGraph, GraphError> {
    let parsed: Vec<ElectrodeLabel> =
        labels.iter().map(|s| parse_label(s.as_ref())).collect::<Result<_, _>>()?;

    for (i, a) in parsed.iter().enumerate() {
        for b in parsed.iter().skip(i + 1) {
            if a.raw.eq_ignore_ascii_case(&b.raw) {
                return Err(GraphError::DuplicateLabel { label: a.raw.clone() });
            }
            if a.row == b.row && a.lateral_index == b.lateral_index {
                return Err(GraphError::PositionCollision {
                    a: a.raw.clone(),
                    b: b.raw.clone(),
                });
            }
        }
    }

    let c = parsed.len();
    let mut matrix = vec![0u8; c * c];
    let mut connect = |i: usize, j: usize| {
        matrix[i * c + j] = 1;
        matrix[j * c + i] = 1;
    };

    // rows: consecutive lateral positions
    let mut rows: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    for (i, l) in parsed.iter().enumerate() {
        rows.entry(l.row).or_default().push(i);
    }
    for members in rows.values_mut() {
        members.sort_by_key(|&i| parsed[i].lateral_index);
        for w in members.windows(2) {
            connect(w[0], w[1]);
        }
    }

    // columns: consecutive anteroposterior rows
    let mut cols: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, l) in parsed.iter().enumerate() {
        cols.entry(l.lateral_index).or_default().push(i);
    }
    for members in cols.values_mut() {
        members.sort_by_key(|&i| parsed[i].row);
        for w in members.windows(2) {
            connect(w[0], w[1]);
        }
    }

    Ok(AdjacencyGraph { labels: parsed, matrix })
}

/// Per-node degrees plus the connected-component count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeHistogram {
    pub degrees: BTreeMap<String, usize>,
    pub connected_components: usize,
}

pub fn degree_histogram(g: &AdjacencyGraph) -> DegreeHistogram {
    let c = g.num_channels();
    let degrees = g
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.raw.clone(), g.degree(i)))
        .collect();

    let mut seen = vec![false; c];
    let mut components = 0;
    for start in 0..c {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(n) = stack.pop() {
            for nb in g.neighbors(n) {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    DegreeHistogram { degrees, connected_components: components }
}
