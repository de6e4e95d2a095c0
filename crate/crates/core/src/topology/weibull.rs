//! Synthetic topologies with discrete-Weibull node degrees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{components, NodeId, Topology, TopologyError};

/// Degree sequences drawn before giving up.
pub const MAX_SEQUENCE_ATTEMPTS: usize = 500;

/// Discrete Weibull law with survival `P(D >= k) = exp(-(k/scale)^shape)`, `k >= 0`.
///
/// Sampled as `floor(X)` where `X` is a continuous Weibull variate, which has
/// exactly this survival function on the integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteWeibull {
    shape: f64,
    scale: f64,
}

impl DiscreteWeibull {
    pub fn new(shape: f64, scale: f64) -> Result<Self, TopologyError> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(TopologyError::InvalidParameter(format!("shape must be positive, got {shape}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(TopologyError::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        Ok(DiscreteWeibull { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn survival(&self, k: f64) -> f64 {
        (-(k / self.scale).powf(self.shape)).exp()
    }

    fn inverse_survival(&self, s: f64) -> f64 {
        self.scale * (-s.ln()).powf(1.0 / self.shape)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // 1 - U lies in (0, 1], keeping ln finite.
        let u = 1.0 - rng.random::<f64>();
        self.inverse_survival(u).floor().min(u64::MAX as f64) as u64
    }

    /// Draw conditioned on `lo <= D <= hi` (inverse transform on the truncated law).
    pub fn sample_truncated<R: Rng + ?Sized>(&self, rng: &mut R, lo: u64, hi: u64) -> Option<u64> {
        let s_lo = self.survival(lo as f64);
        let s_hi = self.survival((hi + 1) as f64);
        if s_lo - s_hi <= 0.0 {
            return None;
        }
        let u = s_hi + (s_lo - s_hi) * (1.0 - rng.random::<f64>());
        let d = self.inverse_survival(u).floor() as u64;
        Some(d.clamp(lo, hi))
    }
}

/// Generates a connected simple graph whose degree sequence is drawn from the
/// discrete Weibull law truncated to `[1, n-1]`.
///
/// The sequence is realized with Havel–Hakimi, then random degree-preserving
/// double-edge swaps join components until the graph is connected. Sequences that
/// are odd, non-graphical, too sparse to be connected, or that fail to connect
/// within the swap budget are redrawn, up to [`MAX_SEQUENCE_ATTEMPTS`] times.
pub fn gen_weibull_topology(n: usize, shape: f64, scale: f64, seed: u64) -> Result<Topology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes(n));
    }
    let law = DiscreteWeibull::new(shape, scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let infeasible = || TopologyError::InfeasibleDegrees { attempts: MAX_SEQUENCE_ATTEMPTS, n, shape, scale };

    for _ in 0..MAX_SEQUENCE_ATTEMPTS {
        let mut degrees = Vec::with_capacity(n);
        for _ in 0..n {
            degrees.push(law.sample_truncated(&mut rng, 1, n as u64 - 1).ok_or_else(infeasible)? as usize);
        }
        let sum: usize = degrees.iter().sum();
        if sum % 2 == 1 || sum < 2 * (n - 1) || !is_graphical(&degrees) {
            continue;
        }
        let mut links = havel_hakimi(&degrees);
        if connect_by_swaps(n, &mut links, &mut rng) {
            let name = format!("weibull-n{n}-k{shape}-s{scale}-seed{seed}");
            return Topology::new(name, n, links);
        }
    }
    Err(infeasible())
}

/// Erdős–Gallai test.
pub(crate) fn is_graphical(degrees: &[usize]) -> bool {
    let mut d = degrees.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    if d.iter().sum::<usize>() % 2 == 1 {
        return false;
    }
    let n = d.len();
    let mut lhs = 0usize;
    for k in 1..=n {
        lhs += d[k - 1];
        let rhs = k * (k - 1) + d[k..].iter().map(|&x| x.min(k)).sum::<usize>();
        if lhs > rhs {
            return false;
        }
    }
    true
}

/// Deterministic Havel–Hakimi realization of a graphical sequence. Ties on
/// remaining degree go to the smaller node id.
fn havel_hakimi(degrees: &[usize]) -> Vec<(NodeId, NodeId)> {
    let mut rem: Vec<(usize, NodeId)> = degrees.iter().copied().zip(0..).collect();
    let mut links = Vec::with_capacity(degrees.iter().sum::<usize>() / 2);
    loop {
        rem.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let (d, v) = rem[0];
        if d == 0 {
            break;
        }
        rem[0].0 = 0;
        for slot in rem.iter_mut().skip(1).take(d) {
            debug_assert!(slot.0 > 0, "sequence was checked graphical");
            slot.0 -= 1;
            links.push((v.min(slot.1), v.max(slot.1)));
        }
    }
    links.sort_unstable();
    links
}

/// Joins components by swapping `(a,b),(c,d)` for `(a,c),(b,d)` (or the other
/// pairing) across two components; the new links cannot duplicate existing ones
/// since their endpoints were in different components. Returns whether the graph ended connected.
fn connect_by_swaps<R: Rng>(n: usize, links: &mut Vec<(NodeId, NodeId)>, rng: &mut R) -> bool {
    let budget = 20 * links.len() + 1000;
    for _ in 0..budget {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in links.iter() {
            adj[u].push(v);
            adj[v].push(u);
        }
        let comps = components(&adj);
        if comps.len() == 1 {
            links.sort_unstable();
            return true;
        }
        let mut comp_of = vec![0; n];
        for (ci, c) in comps.iter().enumerate() {
            for &v in c {
                comp_of[v] = ci;
            }
        }
        let i = rng.random_range(0..links.len());
        let ci = comp_of[links[i].0];
        let others: Vec<usize> = (0..links.len()).filter(|&j| comp_of[links[j].0] != ci).collect();
        let j = others[rng.random_range(0..others.len())];
        let (a, b) = links[i];
        let (c, d) = links[j];
        let (e1, e2) = if rng.random_bool(0.5) { ((a, c), (b, d)) } else { ((a, d), (b, c)) };
        let e1 = (e1.0.min(e1.1), e1.0.max(e1.1));
        let e2 = (e2.0.min(e2.1), e2.0.max(e2.1));
        links[i] = e1;
        links[j] = e2;
    }
    false
}
