//! Cayley graphs over SL(2, Z_n).
//!
//! Vertices are the 2x2 integer matrices modulo `n` with unit determinant.
//! Edges join `g` to `g * s` for every generator `s` in the inverse-closed set
//!
//! ```text
//! [[1, 1], [0, 1]]   [[1, n-1], [0, 1]]   [[1, 0], [1, 1]]   [[1, 0], [n-1, 1]]
//! ```
//!
//! For `n >= 3` these four right-multiplications are distinct, so every vertex
//! has degree exactly 4. For `n = 2` the generators collapse pairwise; the
//! stored adjacency is always the deduplicated simple graph.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, IlseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GroupElement {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub n: u64,
}

impl GroupElement {
    /// Builds an element, reducing entries modulo `n` and checking the determinant.
    pub fn new(a: u64, b: u64, c: u64, d: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return invalid("modulus must be positive");
        }
        let e = Self {
            a: a % n,
            b: b % n,
            c: c % n,
            d: d % n,
            n,
        };
        if e.det() != 1 % n {
            return invalid(format!("determinant of {:?} is not 1 mod {n}", e.key()));
        }
        Ok(e)
    }

    pub fn identity(n: u64) -> Self {
        Self {
            a: 1 % n,
            b: 0,
            c: 0,
            d: 1 % n,
            n,
        }
    }

    /// (ad - bc) mod n
    pub fn det(&self) -> u64 {
        let n = self.n;
        (self.a * self.d % n + n - self.b * self.c % n) % n
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        Self {
            a: (self.a * rhs.a + self.b * rhs.c) % n,
            b: (self.a * rhs.b + self.b * rhs.d) % n,
            c: (self.c * rhs.a + self.d * rhs.c) % n,
            d: (self.c * rhs.b + self.d * rhs.d) % n,
            n,
        }
    }

    pub fn key(&self) -> (u64, u64, u64, u64) {
        (self.a, self.b, self.c, self.d)
    }
}

/// The canonical generator set, in the fixed order used for BFS construction.
pub fn generators(n: u64) -> Vec<GroupElement> {
    let m = n - 1;
    vec![
        GroupElement { a: 1 % n, b: 1 % n, c: 0, d: 1 % n, n },
        GroupElement { a: 1 % n, b: m % n, c: 0, d: 1 % n, n },
        GroupElement { a: 1 % n, b: 0, c: 1 % n, d: 1 % n, n },
        GroupElement { a: 1 % n, b: 0, c: m % n, d: 1 % n, n },
    ]
}

fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut primes = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            primes.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        primes.push(n);
    }
    primes
}

/// |SL(2, Z_n)| = n^3 * prod_{p | n} (1 - 1/p^2), in exact integer arithmetic.
pub fn group_size(n: u64) -> Result<u64> {
    if n == 0 {
        return invalid("group_size: n must be >= 1");
    }
    let mut size = n
        .checked_mul(n)
        .and_then(|v| v.checked_mul(n))
        .ok_or_else(|| IlseError::InvalidArgument(format!("group_size: n = {n} overflows")))?;
    for p in distinct_prime_factors(n) {
        // n^3 is divisible by p^2 whenever p | n, so this stays exact.
        size = size / (p * p) * (p * p - 1);
    }
    Ok(size)
}

/// Least `n >= 2` whose group has at least `layers` elements, with that size.
pub fn smallest_n_for(layers: u64) -> Result<(u64, u64)> {
    if layers == 0 {
        return invalid("smallest_n_for: L must be >= 1");
    }
    let mut n = 2;
    loop {
        let size = group_size(n)?;
        if size >= layers {
            return Ok((n, size));
        }
        n += 1;
    }
}

#[derive(Debug, Clone)]
pub struct CayleyGraph {
    pub modulus: u64,
    /// Group elements in BFS discovery order from the identity.
    pub nodes: Vec<GroupElement>,
    /// Sorted, deduplicated, self-loop-free neighbor lists.
    pub adjacency: Vec<Vec<usize>>,
    pub generators: Vec<GroupElement>,
}

/// Builds the Cayley graph of SL(2, Z_n) by breadth-first closure from the identity.
pub fn build_cayley(n: u64) -> Result<CayleyGraph> {
    if n < 2 {
        return invalid(format!("build_cayley: n must be >= 2, got {n}"));
    }
    let gens = generators(n);
    let identity = GroupElement::identity(n);

    let mut index: HashMap<(u64, u64, u64, u64), usize> = HashMap::new();
    let mut nodes = vec![identity];
    let mut raw_edges: Vec<Vec<usize>> = vec![Vec::new()];
    index.insert(identity.key(), 0);
    let mut frontier = VecDeque::from([0usize]);

    while let Some(u) = frontier.pop_front() {
        let g = nodes[u];
        for s in &gens {
            let h = g.mul(s);
            let v = match index.get(&h.key()) {
                Some(&v) => v,
                None => {
                    let v = nodes.len();
                    nodes.push(h);
                    raw_edges.push(Vec::new());
                    index.insert(h.key(), v);
                    frontier.push_back(v);
                    v
                }
            };
            raw_edges[u].push(v);
        }
    }

    let adjacency = raw_edges
        .into_iter()
        .enumerate()
        .map(|(u, mut nbrs)| {
            nbrs.retain(|&v| v != u);
            nbrs.sort_unstable();
            nbrs.dedup();
            nbrs
        })
        .collect();

    let graph = CayleyGraph {
        modulus: n,
        nodes,
        adjacency,
        generators: gens,
    };
    let expected = group_size(n)?;
    if graph.node_count() as u64 != expected {
        return Err(IlseError::InvariantViolation(format!(
            "closure produced {} nodes, expected {expected}",
            graph.node_count()
        )));
    }
    Ok(graph)
}

impl CayleyGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Degree -> number of nodes with that degree, ascending by degree.
    pub fn degree_histogram(&self) -> Vec<(usize, usize)> {
        degree_histogram(&self.adjacency)
    }

    pub fn is_symmetric(&self) -> bool {
        self.adjacency
            .iter()
            .enumerate()
            .all(|(u, nbrs)| nbrs.iter().all(|&v| self.adjacency[v].binary_search(&u).is_ok()))
    }

    pub fn diameter(&self) -> Result<usize> {
        graph_diameter(&self.adjacency)
    }

    /// Writes `u v` per undirected edge (u < v), 0-based.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            for &v in nbrs.iter().filter(|&&v| v > u) {
                writeln!(out, "{u} {v}")?;
            }
        }
        Ok(())
    }
}

pub fn degree_histogram(adjacency: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut hist = std::collections::BTreeMap::new();
    for nbrs in adjacency {
        *hist.entry(nbrs.len()).or_insert(0usize) += 1;
    }
    hist.into_iter().collect()
}

fn bfs_distances(adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn is_connected(adjacency: &[Vec<usize>]) -> bool {
    adjacency.is_empty() || bfs_distances(adjacency, 0).iter().all(Option::is_some)
}

/// Exact diameter by all-pairs BFS. O(|V| * |E|).
pub fn graph_diameter(adjacency: &[Vec<usize>]) -> Result<usize> {
    let mut diameter = 0;
    for s in 0..adjacency.len() {
        for d in bfs_distances(adjacency, s) {
            match d {
                Some(d) => diameter = diameter.max(d),
                None => {
                    return Err(IlseError::InvariantViolation(
                        "graph_diameter: graph is disconnected".into(),
                    ))
                }
            }
        }
    }
    Ok(diameter)
}

/// Adjacency of the complete graph K_L.
pub fn complete_graph(l: usize) -> Vec<Vec<usize>> {
    (0..l)
        .map(|u| (0..l).filter(|&v| v != u).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_order(n: u64) -> u64 {
        let mut count = 0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        if (a * d + n * n - b * c) % n == 1 % n {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn group_size_small_values() {
        assert_eq!(group_size(1).unwrap(), 1);
        assert_eq!(group_size(2).unwrap(), 6);
        assert_eq!(group_size(3).unwrap(), 24);
        assert_eq!(group_size(5).unwrap(), 120);
        assert!(group_size(0).is_err());
    }

    #[test]
    fn group_size_matches_enumeration() {
        for n in 1..=12 {
            assert_eq!(group_size(n).unwrap(), brute_force_order(n), "n = {n}");
        }
    }

    #[test]
    fn smallest_n_examples() {
        assert_eq!(smallest_n_for(24).unwrap(), (3, 24));
        assert_eq!(smallest_n_for(25).unwrap(), (4, 48));
        assert_eq!(smallest_n_for(1).unwrap(), (2, 6));
        assert!(smallest_n_for(0).is_err());
    }

    #[test]
    fn n3_graph_is_4_regular() {
        let g = build_cayley(3).unwrap();
        assert_eq!(g.node_count(), 24);
        assert_eq!(g.degree_histogram(), vec![(4, 24)]);
        assert!(is_connected(&g.adjacency));
        assert!(g.is_symmetric());
    }

    #[test]
    fn n2_graph_is_degenerate() {
        let g = build_cayley(2).unwrap();
        assert_eq!(g.node_count(), 6);
        assert!(g.adjacency.iter().all(|nbrs| nbrs.len() < 4));
        // [[1,1],[0,1]] is its own inverse mod 2, so S collapses to two involutions
        // and the graph is a 6-cycle.
        assert_eq!(g.degree_histogram(), vec![(2, 6)]);
        assert_eq!(g.diameter().unwrap(), 3);
    }

    #[test]
    fn identity_neighbors_are_generators() {
        for n in [3, 4, 7] {
            let g = build_cayley(n).unwrap();
            assert_eq!(g.nodes[0], GroupElement::identity(n));
            let mut from_gens: Vec<_> = g.generators.iter().map(GroupElement::key).collect();
            from_gens.sort_unstable();
            let mut nbrs: Vec<_> = g.adjacency[0].iter().map(|&v| g.nodes[v].key()).collect();
            nbrs.sort_unstable();
            assert_eq!(nbrs, from_gens);
        }
    }

    #[test]
    fn build_rejects_small_modulus() {
        assert!(build_cayley(1).is_err());
        assert!(build_cayley(0).is_err());
    }

    #[test]
    fn diameter_edge_cases() {
        assert_eq!(graph_diameter(&[vec![]]).unwrap(), 0);
        assert!(graph_diameter(&[vec![], vec![]]).is_err());
        let g = build_cayley(5).unwrap();
        assert_eq!(g.node_count(), 120);
        assert!((g.diameter().unwrap() as f64) <= 4.0 * 120f64.log2());
    }

    #[test]
    fn edge_list_export() {
        let g = build_cayley(3).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 48);
        assert!(text.lines().all(|l| {
            let (u, v) = l.split_once(' ').unwrap();
            u.parse::<usize>().unwrap() < v.parse::<usize>().unwrap()
        }));
    }

    #[test]
    fn element_validation() {
        assert!(GroupElement::new(1, 1, 0, 1, 5).is_ok());
        assert!(GroupElement::new(2, 0, 0, 2, 5).is_err());
        let e = GroupElement::new(6, 5, 0, 1, 5).unwrap();
        assert_eq!(e.key(), (1, 0, 0, 1));
    }
}
