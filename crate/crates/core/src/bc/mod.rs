//! Betweenness centrality over R-MAT graphs.
//!
//! Sources are statically partitioned into contiguous ranges, one task per
//! range. Each task rebuilds the graph from its parameters, runs Brandes'
//! accumulation for its sources and returns a partial score map; the master
//! sums the partials.

mod graph;
mod rmat;

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::exec::{Dispatcher, ExecError, TaskKind};
use crate::seed::sub_seed;
use crate::workload::Workload;

pub use graph::{CsrGraph, Permutation};
pub use rmat::{rmat_generate, RmatParams};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BcError {
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: u32, n: usize },
    #[error("graph too large for the enumeration oracle: {0} vertices (max 256)")]
    GraphTooLarge(usize),
    #[error("invalid R-MAT parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Vertex permutation used when `params.permute` is set.
pub fn permutation_for(params: &RmatParams) -> Permutation {
    Permutation::random(params.vertex_count(), sub_seed(params.seed, "permute"))
}

/// The graph a task works on: generated, compressed and, if requested,
/// relabeled.
pub fn build_graph(params: &RmatParams) -> Result<CsrGraph, BcError> {
    params.validate()?;
    let g = CsrGraph::compress(&rmat_generate(params), params.vertex_count())?;
    Ok(if params.permute {
        g.relabel(&permutation_for(params))
    } else {
        g
    })
}

fn shared_graph(params: &RmatParams) -> Result<Arc<CsrGraph>, BcError> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<CsrGraph>>>> = OnceLock::new();
    let key = serde_json::to_string(params).expect("params serialize");
    let cache = CACHE.get_or_init(Default::default);
    if let Some(g) = cache.lock().expect("graph cache poisoned").get(&key) {
        return Ok(g.clone());
    }
    let g = Arc::new(build_graph(params)?);
    cache
        .lock()
        .expect("graph cache poisoned")
        .insert(key, g.clone());
    Ok(g)
}

/// Reusable per-source buffers for Brandes' algorithm.
pub struct BrandesState {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<u32>,
    queue: VecDeque<u32>,
}

impl BrandesState {
    pub fn new(n: usize) -> Self {
        Self {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    /// Adds the dependencies of source `s` on every other vertex to `bc`.
    pub fn accumulate(&mut self, g: &CsrGraph, s: usize, bc: &mut [f64]) {
        self.dist.fill(-1);
        self.sigma.fill(0.0);
        self.delta.fill(0.0);
        self.order.clear();
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s as u32);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let v = v as usize;
            for &w in g.neighbors(v) {
                let w = w as usize;
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w as u32);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }
        // Predecessors of w are its neighbours one level closer to s.
        for &w in self.order.iter().rev() {
            let w = w as usize;
            for &v in g.neighbors(w) {
                let v = v as usize;
                if self.dist[v] == self.dist[w] - 1 {
                    self.delta[v] += self.sigma[v] / self.sigma[w] * (1.0 + self.delta[w]);
                }
            }
            if w != s {
                bc[w] += self.delta[w];
            }
        }
    }
}

/// Betweenness contributions of sources `start..=end`, over ordered
/// `(s, t)` pairs.
pub fn brandes_range(g: &CsrGraph, start: usize, end: usize) -> Vec<f64> {
    let n = g.vertex_count();
    assert!(start <= end && end < n, "source range out of bounds");
    let mut bc = vec![0.0; n];
    let mut st = BrandesState::new(n);
    for s in start..=end {
        st.accumulate(g, s, &mut bc);
    }
    bc
}

/// Full betweenness by Brandes over every source.
pub fn brandes(g: &CsrGraph) -> Vec<f64> {
    match g.vertex_count() {
        0 => Vec::new(),
        n => brandes_range(g, 0, n - 1),
    }
}

/// Betweenness by explicit enumeration: all-pairs BFS distances and path
/// counts, then `BC(v) = Σ σ_sv·σ_vt / σ_st` over ordered pairs whose
/// shortest paths pass through `v`.
pub fn bc_oracle(g: &CsrGraph) -> Result<Vec<f64>, BcError> {
    let n = g.vertex_count();
    if n > 256 {
        return Err(BcError::GraphTooLarge(n));
    }
    let mut dist = vec![vec![u32::MAX; n]; n];
    let mut count = vec![vec![0f64; n]; n];
    for s in 0..n {
        let (d, c) = (&mut dist[s], &mut count[s]);
        d[s] = 0;
        c[s] = 1.0;
        let mut frontier = vec![s];
        let mut level = 0;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in g.neighbors(u) {
                    let v = v as usize;
                    if d[v] == u32::MAX {
                        d[v] = level + 1;
                        next.push(v);
                    }
                }
            }
            // Counts for the new level only depend on the finished one.
            for &v in &next {
                c[v] = g
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| d[u as usize] == level)
                    .map(|&u| c[u as usize])
                    .sum();
            }
            frontier = next;
            level += 1;
        }
    }
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            if s == t || dist[s][t] == u32::MAX {
                continue;
            }
            for (v, score) in bc.iter_mut().enumerate() {
                if v == s || v == t || dist[s][v] == u32::MAX || dist[v][t] == u32::MAX {
                    continue;
                }
                if dist[s][v] + dist[v][t] == dist[s][t] {
                    *score += count[s][v] * count[v][t] / count[s][t];
                }
            }
        }
    }
    Ok(bc)
}

/// Contiguous source ranges `start..=end` for `tasks` tasks; fewer ranges
/// when there are fewer vertices than tasks.
pub fn partition(n: usize, tasks: usize) -> Vec<(usize, usize)> {
    let k = tasks.min(n);
    (0..k).map(|i| (n * i / k, n * (i + 1) / k - 1)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcRequest {
    pub params: RmatParams,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcResponse {
    pub start: usize,
    pub end: usize,
    pub partial: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BcWorkload;

impl Workload for BcWorkload {
    type Request = BcRequest;
    type Response = BcResponse;
    const KIND: TaskKind = TaskKind::BcRange;

    fn execute(&self, req: &BcRequest) -> Result<BcResponse, ExecError> {
        let fail = |e: BcError| ExecError::TaskFailed(e.to_string());
        let graph = if req.params.regenerate_per_task {
            Arc::new(build_graph(&req.params).map_err(fail)?)
        } else {
            shared_graph(&req.params).map_err(fail)?
        };
        if req.start > req.end || req.end >= graph.vertex_count() {
            return Err(ExecError::TaskFailed(format!(
                "source range {}..={} out of bounds",
                req.start, req.end
            )));
        }
        Ok(BcResponse {
            start: req.start,
            end: req.end,
            partial: brandes_range(&graph, req.start, req.end),
        })
    }

    fn work_units(req: &BcRequest, _: &BcResponse) -> u64 {
        (req.end - req.start + 1) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcOutcome {
    /// Scores indexed by original (unpermuted) vertex label.
    pub scores: Vec<f64>,
    /// Sources handled by each task, in partition order.
    pub sources_per_task: Vec<usize>,
}

/// Master loop: one task per source range, partials summed in partition
/// order so the result does not depend on completion order.
pub fn run_bc<D: Dispatcher<BcWorkload> + ?Sized>(
    params: &RmatParams,
    dispatcher: &mut D,
) -> Result<BcOutcome, BcError> {
    params.validate()?;
    let n = params.vertex_count();
    let ranges = partition(n, params.tasks);
    let mut slot_of = HashMap::new();
    for (i, &(start, end)) in ranges.iter().enumerate() {
        let id = dispatcher.dispatch(BcRequest {
            params: params.clone(),
            start,
            end,
        })?;
        slot_of.insert(id, i);
    }
    let mut partials: Vec<Option<Vec<f64>>> = vec![None; ranges.len()];
    while let Some(done) = dispatcher.next() {
        let resp = done.result?;
        partials[slot_of[&done.task_id]] = Some(resp.partial);
    }
    let mut permuted = vec![0.0; n];
    for p in partials {
        let p = p.expect("every dispatched range completes");
        for (acc, x) in permuted.iter_mut().zip(p) {
            *acc += x;
        }
    }
    let scores = if params.permute {
        let perm = permutation_for(params);
        (0..n)
            .map(|v| permuted[perm.apply(v as u32) as usize])
            .collect()
    } else {
        permuted
    };
    Ok(BcOutcome {
        scores,
        sources_per_task: ranges.iter().map(|&(s, e)| e - s + 1).collect(),
    })
}
