use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BcError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmatParams {
    /// log2 of the vertex count.
    pub scale: u32,
    pub edge_factor: u32,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub seed: u64,
    /// Number of source-range tasks.
    pub tasks: usize,
    /// Relabel vertices with a seeded permutation before partitioning.
    pub permute: bool,
    /// Rebuild the graph inside every task. When false, tasks in the same
    /// process share one generated graph.
    pub regenerate_per_task: bool,
}

impl Default for RmatParams {
    fn default() -> Self {
        Self {
            scale: 10,
            edge_factor: 8,
            a: 0.55,
            b: 0.1,
            c: 0.1,
            d: 0.25,
            seed: 2,
            tasks: 128,
            permute: true,
            regenerate_per_task: true,
        }
    }
}

impl RmatParams {
    pub fn validate(&self) -> Result<(), BcError> {
        let p = [self.a, self.b, self.c, self.d];
        if p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(BcError::InvalidParams(
                "quadrant probabilities must be >= 0 and sum to 1".into(),
            ));
        }
        if self.scale > 31 {
            return Err(BcError::InvalidParams("scale must be <= 31".into()));
        }
        if self.tasks == 0 {
            return Err(BcError::InvalidParams("tasks must be >= 1".into()));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        1usize << self.scale
    }
}

/// `edge_factor · N` candidate edges by recursive quadrant descent. Edge `e`
/// draws from its own ChaCha8 stream, so any edge can be regenerated alone.
pub fn rmat_generate(p: &RmatParams) -> Vec<(u32, u32)> {
    let n = p.vertex_count() as u64;
    let m = p.edge_factor as u64 * n;
    let base = ChaCha8Rng::seed_from_u64(p.seed);
    let (ab, abc) = (p.a + p.b, p.a + p.b + p.c);
    (0..m)
        .map(|e| {
            let mut rng = base.clone();
            rng.set_stream(e);
            let (mut u, mut v) = (0u32, 0u32);
            for _ in 0..p.scale {
                let r: f64 = rng.gen();
                let (du, dv) = if r < p.a {
                    (0, 0)
                } else if r < ab {
                    (0, 1)
                } else if r < abc {
                    (1, 0)
                } else {
                    (1, 1)
                };
                u = u << 1 | du;
                v = v << 1 | dv;
            }
            (u, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::CsrGraph;

    #[test]
    fn scale_zero_is_all_self_loops() {
        let p = RmatParams {
            scale: 0,
            ..Default::default()
        };
        let edges = rmat_generate(&p);
        assert_eq!(edges.len(), 8);
        assert!(edges.iter().all(|&e| e == (0, 0)));
        assert_eq!(CsrGraph::compress(&edges, 1).unwrap().edge_count(), 0);
    }

    #[test]
    fn deterministic() {
        let p = RmatParams {
            scale: 8,
            ..Default::default()
        };
        assert_eq!(rmat_generate(&p), rmat_generate(&p));
        let other = RmatParams {
            seed: 3,
            ..p.clone()
        };
        assert_ne!(rmat_generate(&p), rmat_generate(&other));
    }

    #[test]
    fn degree_distribution_is_skewed() {
        let p = RmatParams::default();
        let g = CsrGraph::compress(&rmat_generate(&p), p.vertex_count()).unwrap();
        let n = g.vertex_count();
        let max = (0..n).map(|v| g.degree(v)).max().unwrap() as f64;
        let mean = 2.0 * g.edge_count() as f64 / n as f64;
        assert!(max > 4.0 * mean, "max {max} mean {mean}");
    }

    #[test]
    fn rejects_bad_probabilities() {
        let p = RmatParams {
            a: 0.6,
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(BcError::InvalidParams(_))));
    }
}
