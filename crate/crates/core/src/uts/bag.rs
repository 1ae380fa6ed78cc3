use serde::{Deserialize, Serialize};

use super::tree::{NodeDescriptor, Tree};

/// Pending nodes of one subtree, consumed depth-first from the back.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkBag {
    pub nodes: Vec<NodeDescriptor>,
    /// Nodes consumed so far by this bag and the bags it was split from.
    pub traversed: u64,
}

impl WorkBag {
    pub fn new(nodes: Vec<NodeDescriptor>) -> Self {
        Self {
            nodes,
            traversed: 0,
        }
    }

    pub fn root(seed: u32) -> Self {
        Self::new(vec![NodeDescriptor::root(seed)])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Pops up to `n` nodes, pushing the children of each. Returns the
    /// number of nodes consumed, which is below `n` only if the bag empties.
    pub fn traverse(&mut self, n: u64, tree: &Tree) -> u64 {
        let mut visited = 0;
        while visited < n {
            let Some(node) = self.nodes.pop() else { break };
            visited += 1;
            expand(&node, tree, &mut self.nodes);
        }
        self.traversed += visited;
        visited
    }

    /// Distributes the nodes into `min(s, len)` contiguous chunks whose sizes
    /// differ by at most one. An empty bag yields no bags.
    ///
    /// # Panics
    ///
    /// Panics if `s` is zero.
    pub fn split(self, s: usize) -> Vec<WorkBag> {
        assert!(s >= 1, "split factor must be at least 1");
        let k = s.min(self.nodes.len());
        if k == 0 {
            return Vec::new();
        }
        let base = self.nodes.len() / k;
        let extra = self.nodes.len() % k;
        let traversed = self.traversed;
        let mut it = self.nodes.into_iter();
        (0..k)
            .map(|j| WorkBag {
                nodes: it.by_ref().take(base + usize::from(j < extra)).collect(),
                traversed,
            })
            .collect()
    }
}

#[inline]
pub(crate) fn expand(node: &NodeDescriptor, tree: &Tree, out: &mut Vec<NodeDescriptor>) {
    for i in 0..tree.child_count(node) {
        out.push(node.spawn_child(i));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_bag() {
        let tree = Tree::new(4.0, 5);
        let mut b = WorkBag::default();
        assert_eq!(b.traverse(10, &tree), 0);
        assert!(b.is_empty());
        assert!(b.split(5).is_empty());
    }

    #[test]
    fn one_step_from_root() {
        let tree = Tree::new(4.0, 5);
        let mut b = WorkBag::root(19);
        let m = tree.child_count(&b.nodes[0]) as usize;
        assert_eq!(b.traverse(1, &tree), 1);
        assert_eq!(b.len(), m);
    }

    #[test]
    fn split_sizes() {
        let nodes: Vec<_> = (0..10)
            .map(|i| NodeDescriptor::root(19).spawn_child(i))
            .collect();
        let sizes: Vec<_> = WorkBag::new(nodes.clone())
            .split(5)
            .iter()
            .map(WorkBag::len)
            .collect();
        assert_eq!(sizes, vec![2; 5]);
        let sizes: Vec<_> = WorkBag::new(nodes[..3].to_vec())
            .split(5)
            .iter()
            .map(WorkBag::len)
            .collect();
        assert_eq!(sizes, vec![1; 3]);
    }

    proptest! {
        #[test]
        fn split_partitions_exactly(n in 0usize..200, s in 1usize..50) {
            let nodes: Vec<_> = (0..n as u32).map(|i| NodeDescriptor::root(7).spawn_child(i)).collect();
            let parts = WorkBag::new(nodes.clone()).split(s);
            prop_assert_eq!(parts.len(), s.min(n));
            let sizes: Vec<_> = parts.iter().map(WorkBag::len).collect();
            if let (Some(lo), Some(hi)) = (sizes.iter().min(), sizes.iter().max()) {
                prop_assert!(hi - lo <= 1 && *lo >= 1);
            }
            let joined: Vec<_> = parts.into_iter().flat_map(|b| b.nodes).collect();
            prop_assert_eq!(joined, nodes);
        }

        #[test]
        fn traverse_conserves_nodes(seed in 0u32..1_000, n in 1u64..500) {
            let tree = Tree::new(4.0, 6);
            let mut bag = WorkBag::root(seed);
            bag.traverse(3, &tree);
            let before = bag.len() as u64;
            let mut spawned = 0u64;
            let mut probe = bag.clone();
            let mut visited = 0;
            while visited < n {
                let Some(node) = probe.nodes.pop() else { break };
                visited += 1;
                let m = tree.child_count(&node);
                spawned += m as u64;
                for i in 0..m {
                    probe.nodes.push(node.spawn_child(i));
                }
            }
            let v = bag.traverse(n, &tree);
            prop_assert_eq!(v, visited);
            prop_assert_eq!(v + bag.len() as u64, before + spawned);
            prop_assert_eq!(&bag.nodes, &probe.nodes);
        }
    }
}
