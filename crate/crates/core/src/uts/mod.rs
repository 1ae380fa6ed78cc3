//! Unbalanced Tree Search over SHA-1 generated geometric trees.
//!
//! The master loop in [`run_uts`] submits traversal tasks, each consuming at
//! most `iters` nodes of its bag, and splits every returned bag into at most
//! `split_factor` new tasks until the tree is exhausted.

mod bag;
mod index;
mod tree;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveController;
use crate::exec::TaskKind;
use crate::exec::{Dispatcher, ExecError, TaskId};
use crate::workload::Workload;

pub use bag::WorkBag;
pub use index::SubtreeIndex;
pub use tree::{GeometricSampler, NodeDescriptor, State, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub seed: u32,
    pub b0: f64,
    pub depth: u32,
    pub split_factor: usize,
    pub iters: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            seed: 19,
            b0: 4.0,
            depth: 10,
            split_factor: 8,
            iters: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UtsError {
    #[error("invalid tree parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), UtsError> {
        if !(self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(UtsError::InvalidParams("b0 must be > 0".into()));
        }
        if self.split_factor == 0 {
            return Err(UtsError::InvalidParams("split_factor must be >= 1".into()));
        }
        if self.iters == 0 {
            return Err(UtsError::InvalidParams("iters must be >= 1".into()));
        }
        Ok(())
    }

    pub fn tree(&self) -> Tree {
        Tree::new(self.b0, self.depth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraverseRequest {
    pub b0: f64,
    pub depth: u32,
    pub iters: u64,
    pub bag: WorkBag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraverseResponse {
    pub visited: u64,
    pub bag: WorkBag,
}

/// Plain traversal task.
#[derive(Debug, Clone, Copy, Default)]
pub struct UtsWorkload;

impl Workload for UtsWorkload {
    type Request = TraverseRequest;
    type Response = TraverseResponse;
    const KIND: TaskKind = TaskKind::UtsTraverse;

    fn execute(&self, req: &TraverseRequest) -> Result<TraverseResponse, ExecError> {
        if req.iters == 0 {
            return Err(ExecError::TaskFailed("iters must be >= 1".into()));
        }
        let tree = Tree::new(req.b0, req.depth);
        let mut bag = req.bag.clone();
        let visited = bag.traverse(req.iters, &tree);
        Ok(TraverseResponse { visited, bag })
    }

    fn work_units(_: &TraverseRequest, resp: &TraverseResponse) -> u64 {
        resp.visited
    }
}

/// Traversal through a prebuilt [`SubtreeIndex`]. Produces exactly the
/// responses of [`UtsWorkload`] for the indexed tree, much faster; meant for
/// the synthetic dispatcher.
#[derive(Clone)]
pub struct IndexedUtsWorkload {
    index: Arc<SubtreeIndex>,
}

impl IndexedUtsWorkload {
    pub fn new(index: Arc<SubtreeIndex>) -> Self {
        Self { index }
    }
}

impl Workload for IndexedUtsWorkload {
    type Request = TraverseRequest;
    type Response = TraverseResponse;
    const KIND: TaskKind = TaskKind::UtsTraverse;

    fn execute(&self, req: &TraverseRequest) -> Result<TraverseResponse, ExecError> {
        let tree = self.index.tree();
        if req.b0 != tree.b0() || req.depth != tree.depth_cutoff() {
            return Err(ExecError::TaskFailed(
                "request does not match the indexed tree".into(),
            ));
        }
        let mut bag = req.bag.clone();
        let visited = self.index.traverse(&mut bag, req.iters);
        Ok(TraverseResponse { visited, bag })
    }

    fn work_units(_: &TraverseRequest, resp: &TraverseResponse) -> u64 {
        resp.visited
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtsOutcome {
    pub nodes: u64,
    pub tasks: u64,
    /// Highest number of outstanding tasks seen by the master.
    pub peak_active: usize,
    /// Nodes visited by each task.
    pub task_units: Vec<(TaskId, u64)>,
}

/// Master loop: dispatches the root bag, then for every returned bag splits
/// it and dispatches the parts, until nothing is outstanding. With a
/// controller, the split factor and iteration bound are retuned after every
/// collected bag from the number of tasks still outstanding.
pub fn run_uts<W, D>(
    params: &TreeParams,
    dispatcher: &mut D,
    mut controller: Option<&mut AdaptiveController>,
) -> Result<UtsOutcome, UtsError>
where
    W: Workload<Request = TraverseRequest, Response = TraverseResponse>,
    D: Dispatcher<W> + ?Sized,
{
    params.validate()?;
    let (mut split, mut iters) = match controller.as_deref() {
        Some(c) => c.current(),
        None => (params.split_factor, params.iters),
    };
    let request = |bag, iters| TraverseRequest {
        b0: params.b0,
        depth: params.depth,
        iters,
        bag,
    };
    let mut out = UtsOutcome::default();
    dispatcher.dispatch(request(WorkBag::root(params.seed), iters))?;
    out.tasks = 1;
    out.peak_active = 1;
    while let Some(done) = dispatcher.next() {
        let resp = done.result?;
        out.nodes += resp.visited;
        out.task_units.push((done.task_id, resp.visited));
        if let Some(c) = controller.as_deref_mut() {
            (split, iters) = c.on_completion(dispatcher.outstanding());
        }
        for bag in resp.bag.split(split) {
            dispatcher.dispatch(request(bag, iters))?;
            out.tasks += 1;
        }
        out.peak_active = out.peak_active.max(dispatcher.outstanding());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{ExecutorDispatcher, InlineDispatcher, LocalExecutor};

    fn recursive_count(tree: &Tree, node: &NodeDescriptor) -> u64 {
        1 + (0..tree.child_count(node))
            .map(|i| recursive_count(tree, &node.spawn_child(i)))
            .sum::<u64>()
    }

    #[test]
    fn small_tree_counts_agree() {
        let params = TreeParams {
            depth: 6,
            split_factor: 3,
            iters: 17,
            ..Default::default()
        };
        let expect = recursive_count(&params.tree(), &NodeDescriptor::root(params.seed));
        let mut inline = InlineDispatcher::new(UtsWorkload);
        let a = run_uts::<UtsWorkload, _>(&params, &mut inline, None).unwrap();
        assert_eq!(a.nodes, expect);
        let ex = LocalExecutor::new(3);
        let mut d = ExecutorDispatcher::new(&ex);
        let b = run_uts::<UtsWorkload, _>(&params, &mut d, None).unwrap();
        assert_eq!(b.nodes, expect);
        assert_eq!(b.task_units.iter().map(|t| t.1).sum::<u64>(), expect);
    }

    #[test]
    fn depth_zero_is_root_only() {
        let params = TreeParams {
            depth: 0,
            ..Default::default()
        };
        let mut inline = InlineDispatcher::new(UtsWorkload);
        assert_eq!(
            run_uts::<UtsWorkload, _>(&params, &mut inline, None)
                .unwrap()
                .nodes,
            1
        );
    }

    #[test]
    fn count_grows_with_depth() {
        let mut last = 0;
        for depth in 1..8 {
            let tree = Tree::new(4.0, depth);
            let n = recursive_count(&tree, &NodeDescriptor::root(19));
            assert!(n > last);
            last = n;
        }
    }

    #[test]
    fn invalid_params() {
        let bad = TreeParams {
            iters: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(UtsError::InvalidParams(_))));
    }
}
