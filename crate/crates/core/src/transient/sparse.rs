// SPDX-License-Identifier: Apache-2.0

//! Symmetric sparse matrices and an envelope (skyline) Cholesky solver
//! with reverse Cuthill-McKee ordering.

use std::collections::{BTreeMap, VecDeque};

/// Symmetric matrix stored as the lower triangle, row by row.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SymMatrix {
    n: usize,
    /// `rows[i]` holds `(j, a_ij)` for `j <= i`, sorted by `j`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Builds from `(i, j, v)` triplets; duplicates add, both triangles accepted.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            *acc[r].entry(c).or_insert(0.0) += v;
        }
        SymMatrix {
            n,
            rows: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        let triplets = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, a * v)))
            .chain(
                other
                    .rows
                    .iter()
                    .enumerate()
                    .flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, b * v))),
            );
        SymMatrix::from_triplets(self.n, triplets)
    }

    /// `y = self · x`.
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if j != i && v != 0.0 {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }
}

/// Reverse Cuthill-McKee order (`order[new] = old`), one BFS per component
/// started from a minimum-degree node.
pub(crate) fn rcm_order(m: &SymMatrix) -> Vec<usize> {
    let adj = m.neighbours();
    let n = m.dim();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !seen[u]).collect();
            next.sort_by_key(|&u| (adj[u].len(), u));
            next.dedup();
            for u in next {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `L` of a permuted SPD matrix in envelope storage.
#[derive(Debug, Clone)]
pub(crate) struct Envelope {
    order: Vec<usize>,
    /// First stored column of each row.
    first: Vec<usize>,
    /// Offset of row `i`'s first stored entry in `vals`.
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl Envelope {
    /// Factors `m`; `None` when a pivot is not positive.
    pub fn factor(m: &SymMatrix, order: &[usize]) -> Option<Self> {
        let n = m.dim();
        let mut pos = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let mut perm_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in m.rows.iter().enumerate() {
            for &(j, v) in row {
                let (a, b) = (pos[i], pos[j]);
                let (r, c) = if a >= b { (a, b) } else { (b, a) };
                perm_rows[r].push((c, v));
            }
        }
        let first: Vec<usize> = perm_rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|&(c, _)| c).min().unwrap_or(i).min(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut vals = vec![0.0; total];
        for (i, row) in perm_rows.iter().enumerate() {
            for &(c, v) in row {
                vals[start[i] + c - first[i]] += v;
            }
        }
        let at = |i: usize, j: usize| start[i] + j - first[i];
        for i in 0..n {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let mut s = vals[at(i, j)];
                for k in lo..j {
                    s -= vals[at(i, k)] * vals[at(j, k)];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    vals[at(i, i)] = s.sqrt();
                } else {
                    vals[at(i, j)] = s / vals[at(j, j)];
                }
            }
        }
        Some(Envelope {
            order: order.to_vec(),
            first,
            start,
            vals,
        })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.order.len();
        let at = |i: usize, j: usize| self.start[i] + j - self.first[i];
        let mut y: Vec<f64> = self.order.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.vals[at(i, k)] * y[k];
            }
            y[i] = s / self.vals[at(i, i)];
        }
        for i in (0..n).rev() {
            y[i] /= self.vals[at(i, i)];
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.vals[at(i, k)] * yi;
            }
        }
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
    }

    #[cfg(test)]
    fn stored(&self) -> usize {
        self.vals.len()
    }
}
