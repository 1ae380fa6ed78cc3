use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

pub type State = [u8; 20];

const SHA1_IV: [u32; 5] = [
    0x6745_2301,
    0xEFCD_AB89,
    0x98BA_DCFE,
    0x1032_5476,
    0xC3D2_E1F0,
];

/// One tree node: its SHA-1 state and its depth (root = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub state: State,
    pub depth: u32,
}

impl NodeDescriptor {
    /// The root for `seed`: SHA-1 over sixteen zero bytes followed by the
    /// seed as a big-endian u32.
    pub fn root(seed: u32) -> Self {
        let mut input = [0u8; 20];
        input[16..].copy_from_slice(&seed.to_be_bytes());
        Self {
            state: Sha1::digest(input).into(),
            depth: 0,
        }
    }

    /// Child `index`: SHA-1(parent state || big-endian u32 index).
    pub fn spawn_child(&self, index: u32) -> Self {
        // The 24-byte message fits one padded block: 0x80 terminator and a
        // 192-bit length in the last byte.
        let mut block = [0u8; 64];
        block[..20].copy_from_slice(&self.state);
        block[20..24].copy_from_slice(&index.to_be_bytes());
        block[24] = 0x80;
        block[63] = 0xC0;
        let mut h = SHA1_IV;
        sha1::compress(&mut h, &[block.into()]);
        let mut state = [0u8; 20];
        for (out, word) in state.chunks_exact_mut(4).zip(h) {
            out.copy_from_slice(&word.to_be_bytes());
        }
        Self {
            state,
            depth: self.depth + 1,
        }
    }

    /// The 31-bit random value carried by the state.
    pub fn rand31(&self) -> u32 {
        u32::from_be_bytes([
            self.state[16],
            self.state[17],
            self.state[18],
            self.state[19],
        ]) & 0x7fff_ffff
    }
}

/// Geometric child-count sampler `m = floor(ln(1-u) / ln(1-p))`,
/// `p = 1 / (1 + b0)`, `u = rand31 / 2^31`.
///
/// The fast path compares against precomputed thresholds `2^31 (1 - q^k)`
/// and falls back to the logarithm within a guard band around each one, so
/// results are identical to the formula.
#[derive(Debug, Clone)]
pub struct GeometricSampler {
    ln_q: f64,
    thresholds: Vec<f64>,
}

const GUARD: f64 = 8.0;
const TABLE_LEN: usize = 160;
const TWO_POW_31: f64 = 2_147_483_648.0;

impl GeometricSampler {
    pub fn new(b0: f64) -> Self {
        let p = 1.0 / (1.0 + b0);
        let q = 1.0 - p;
        let ln_q = q.ln();
        let thresholds = (0..TABLE_LEN)
            .map(|k| TWO_POW_31 * (1.0 - q.powi(k as i32)))
            .collect();
        Self { ln_q, thresholds }
    }

    pub fn exact(&self, h: u32) -> u32 {
        let u = h as f64 / TWO_POW_31;
        ((1.0 - u).ln() / self.ln_q).floor() as u32
    }

    #[inline]
    pub fn sample(&self, h: u32) -> u32 {
        let x = h as f64;
        let t = &self.thresholds;
        let mut k = 0;
        while k + 1 < t.len() && x >= t[k + 1] {
            k += 1;
        }
        if k + 1 == t.len() || x - t[k] <= GUARD || t[k + 1] - x <= GUARD {
            return self.exact(h);
        }
        k as u32
    }
}

/// Geometric tree shape with a fixed depth cut-off.
#[derive(Debug, Clone)]
pub struct Tree {
    b0: f64,
    depth_cutoff: u32,
    sampler: GeometricSampler,
}

impl Tree {
    pub fn new(b0: f64, depth_cutoff: u32) -> Self {
        Self {
            b0,
            depth_cutoff,
            sampler: GeometricSampler::new(b0),
        }
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn depth_cutoff(&self) -> u32 {
        self.depth_cutoff
    }

    /// Zero at or below the cut-off depth.
    #[inline]
    pub fn child_count(&self, node: &NodeDescriptor) -> u32 {
        if node.depth >= self.depth_cutoff {
            0
        } else {
            self.sampler.sample(node.rand31())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn spawn_matches_plain_sha1() {
        let root = NodeDescriptor::root(19);
        for i in [0u32, 1, 7, 99] {
            let mut h = Sha1::new();
            h.update(root.state);
            h.update(i.to_be_bytes());
            let expect: State = h.finalize().into();
            let child = root.spawn_child(i);
            assert_eq!(child.state, expect);
            assert_eq!(child.depth, 1);
        }
        assert_ne!(root.spawn_child(0).state, root.spawn_child(1).state);
        assert_eq!(root.spawn_child(3), root.spawn_child(3));
    }

    #[test]
    fn root_digest_is_fixed() {
        let mut input = [0u8; 20];
        input[16..].copy_from_slice(&19u32.to_be_bytes());
        let expect: State = Sha1::digest(input).into();
        assert_eq!(NodeDescriptor::root(19).state, expect);
        assert_eq!(NodeDescriptor::root(19), NodeDescriptor::root(19));
    }

    #[test]
    fn fast_path_agrees_near_every_threshold() {
        for b0 in [0.5, 1.0, 4.0, 16.0, 200.0] {
            let s = GeometricSampler::new(b0);
            for &t in &s.thresholds {
                if t > TWO_POW_31 - 1.0 {
                    break;
                }
                let c = t.round() as i64;
                for h in (c - 40).max(0)..(c + 40).min(i32::MAX as i64) {
                    assert_eq!(s.sample(h as u32), s.exact(h as u32), "b0={b0} h={h}");
                }
            }
        }
    }

    #[test]
    fn sample_mean_is_b0() {
        let s = GeometricSampler::new(4.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let total: u64 = (0..n)
            .map(|_| s.sample(rng.gen::<u32>() & 0x7fff_ffff) as u64)
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn cutoff_has_no_children() {
        let tree = Tree::new(4.0, 3);
        let mut n = NodeDescriptor::root(19);
        n.depth = 3;
        assert_eq!(tree.child_count(&n), 0);
        n.depth = 7;
        assert_eq!(tree.child_count(&n), 0);
    }

    proptest! {
        #[test]
        fn fast_path_agrees(h in 0u32..0x8000_0000, b0 in 0.1f64..64.0) {
            let s = GeometricSampler::new(b0);
            prop_assert_eq!(s.sample(h), s.exact(h));
        }
    }
}
