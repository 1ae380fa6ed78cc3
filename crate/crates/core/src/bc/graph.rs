use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BcError;

/// Undirected graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrGraph {
    n: usize,
    offsets: Vec<usize>,
    adj: Vec<u32>,
}

impl CsrGraph {
    /// Symmetrizes, drops self-loops and deduplicates `edges` over `n`
    /// vertices.
    pub fn compress(edges: &[(u32, u32)], n: usize) -> Result<Self, BcError> {
        let mut both = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            for w in [u, v] {
                if w as usize >= n {
                    return Err(BcError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u != v {
                both.push((u, v));
                both.push((v, u));
            }
        }
        both.sort_unstable();
        both.dedup();
        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &both {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let adj = both.into_iter().map(|(_, v)| v).collect();
        Ok(Self { n, offsets, adj })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u as u32, v)))
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &Permutation) -> Self {
        assert_eq!(perm.len(), self.n, "permutation size mismatch");
        let edges: Vec<_> = self
            .edges()
            .map(|(u, v)| (perm.apply(u), perm.apply(v)))
            .collect();
        Self::compress(&edges, self.n).expect("a permutation keeps labels in range")
    }
}

/// Vertex relabeling `v -> map[v]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n as u32).collect(),
        }
    }

    /// Seeded Fisher-Yates shuffle.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            map.swap(i, j);
        }
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, v: u32) -> u32 {
        self.map[v as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dedupe_and_self_loops() {
        let g = CsrGraph::compress(&[(0, 1), (1, 0), (1, 1)], 2).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn empty_graph() {
        let g = CsrGraph::compress(&[], 5).unwrap();
        assert_eq!(g.vertex_count(), 5);
        assert!((0..5).all(|v| g.degree(v) == 0));
    }

    #[test]
    fn out_of_range() {
        assert_eq!(
            CsrGraph::compress(&[(0, 3)], 3).unwrap_err(),
            BcError::VertexOutOfRange { vertex: 3, n: 3 }
        );
    }

    #[test]
    fn identity_relabel_is_noop() {
        let g = CsrGraph::compress(&[(0, 1), (2, 3), (1, 3)], 4).unwrap();
        assert_eq!(g.relabel(&Permutation::identity(4)), g);
        assert_eq!(Permutation::random(50, 9), Permutation::random(50, 9));
    }

    proptest! {
        #[test]
        fn csr_is_symmetric(edges in proptest::collection::vec((0u32..30, 0u32..30), 0..200)) {
            let g = CsrGraph::compress(&edges, 30).unwrap();
            for u in 0..30 {
                let nb = g.neighbors(u);
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
                for &v in nb {
                    prop_assert!(v as usize != u);
                    prop_assert!(g.neighbors(v as usize).contains(&(u as u32)));
                }
            }
        }
    }
}
