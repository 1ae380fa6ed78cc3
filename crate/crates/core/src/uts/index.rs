use std::collections::HashMap;

use super::bag::{expand, WorkBag};
use super::tree::{NodeDescriptor, State, Tree};

/// Memoized subtree sizes for every node down to `max_depth`.
///
/// With the index, a traversal that would consume a whole indexed subtree
/// skips it in one step. The resulting visited counts and surviving bags are
/// identical to [`WorkBag::traverse`], because a depth-first traversal that
/// pops a node whose subtree fits in the remaining budget consumes exactly
/// that subtree and leaves the rest of the stack untouched.
pub struct SubtreeIndex {
    tree: Tree,
    max_depth: u32,
    sizes: HashMap<(State, u32), u64>,
}

impl SubtreeIndex {
    /// Walks the whole tree under `root` once.
    pub fn build(tree: Tree, root: NodeDescriptor, max_depth: u32) -> Self {
        let mut index = Self {
            tree,
            max_depth,
            sizes: HashMap::new(),
        };
        index.size_of(&root);
        index
    }

    fn size_of(&mut self, node: &NodeDescriptor) -> u64 {
        let size = if node.depth < self.max_depth {
            let m = self.tree.child_count(node);
            1 + (0..m)
                .map(|i| self.size_of(&node.spawn_child(i)))
                .sum::<u64>()
        } else {
            let mut bag = WorkBag::new(vec![*node]);
            bag.traverse(u64::MAX, &self.tree)
        };
        if node.depth <= self.max_depth {
            self.sizes.insert((node.state, node.depth), size);
        }
        size
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn entries(&self) -> usize {
        self.sizes.len()
    }

    /// Size of the subtree rooted at `node`, if indexed.
    pub fn subtree_size(&self, node: &NodeDescriptor) -> Option<u64> {
        self.sizes.get(&(node.state, node.depth)).copied()
    }

    /// Same contract and result as [`WorkBag::traverse`].
    pub fn traverse(&self, bag: &mut WorkBag, n: u64) -> u64 {
        let mut visited = 0;
        while visited < n {
            let Some(node) = bag.nodes.pop() else { break };
            if let Some(size) = self.subtree_size(&node) {
                if size <= n - visited {
                    visited += size;
                    continue;
                }
            }
            visited += 1;
            expand(&node, &self.tree, &mut bag.nodes);
        }
        bag.traversed += visited;
        visited
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn indexed_traversal_equals_plain(seed in 0u32..100, n in 1u64..3_000, k in 0u32..6) {
            let tree = Tree::new(4.0, 7);
            let index = SubtreeIndex::build(tree.clone(), NodeDescriptor::root(seed), k);
            let mut plain = WorkBag::root(seed);
            let mut fast = WorkBag::root(seed);
            loop {
                let a = plain.traverse(n, &tree);
                let b = index.traverse(&mut fast, n);
                prop_assert_eq!(a, b);
                prop_assert_eq!(&plain, &fast);
                if plain.is_empty() {
                    break;
                }
            }
        }
    }

    #[test]
    fn root_size_is_tree_size() {
        let tree = Tree::new(4.0, 8);
        let root = NodeDescriptor::root(19);
        let index = SubtreeIndex::build(tree.clone(), root, 4);
        let mut bag = WorkBag::root(19);
        assert_eq!(
            index.subtree_size(&root),
            Some(bag.traverse(u64::MAX, &tree))
        );
    }
}
