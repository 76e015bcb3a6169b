//! Brute-force `SL(2, Z_n)` enumeration and plain BFS.

use std::collections::{HashMap, VecDeque};

pub type Mat = [u64; 4];

/// Every `[a, b, c, d]` with entries in `0..n` and `ad - bc = 1 (mod n)`.
pub fn sl2_elements(n: u64) -> Vec<Mat> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    if (a * d % n + n - b * c % n) % n == 1 % n {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

pub fn mat_mul(x: &Mat, y: &Mat, n: u64) -> Mat {
    [
        (x[0] * y[0] + x[1] * y[2]) % n,
        (x[0] * y[1] + x[1] * y[3]) % n,
        (x[2] * y[0] + x[3] * y[2]) % n,
        (x[2] * y[1] + x[3] * y[3]) % n,
    ]
}

/// `[[1,1],[0,1]]`, its inverse, `[[1,0],[1,1]]` and its inverse.
pub fn generator_mats(n: u64) -> [Mat; 4] {
    let one = 1 % n;
    let m = (n - 1) % n;
    [[one, one, 0, one], [one, m, 0, one], [one, 0, one, one], [one, 0, m, one]]
}

/// Simple undirected neighbours of each node under right multiplication.
pub fn cayley_neighbors(nodes: &[Mat], n: u64) -> Vec<Vec<usize>> {
    let index: HashMap<Mat, usize> = nodes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let gens = generator_mats(n);
    nodes
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut nb: Vec<usize> = gens
                .iter()
                .map(|s| index[&mat_mul(g, s, n)])
                .filter(|&j| j != i)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect()
}

/// Hop distances from `src`; `usize::MAX` marks unreachable nodes.
pub fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[src] = 0;
    let mut q = VecDeque::from([src]);
    while let Some(v) = q.pop_front() {
        for &u in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                q.push_back(u);
            }
        }
    }
    dist
}

/// Diameter, or `None` when disconnected.
pub fn diameter(adj: &[Vec<usize>]) -> Option<usize> {
    let mut best = 0;
    for v in 0..adj.len() {
        let d = bfs(adj, v);
        if d.contains(&usize::MAX) {
            return None;
        }
        best = best.max(*d.iter().max().unwrap_or(&0));
    }
    Some(best)
}
