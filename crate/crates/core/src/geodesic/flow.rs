//! Minimum-weight vertex cover of a bipartite incompatibility graph via
//! Edmonds–Karp max-flow.

use std::collections::VecDeque;

/// Stand-in for an infinite capacity. Vertex weights on each side sum to
/// one, so any value above one never becomes a bottleneck.
const INFINITE: f64 = 2.0;

/// Residual capacities at or below this are treated as absent.
pub const RESIDUAL_EPS: f64 = 1e-12;

/// Bipartite graph between the dropped splits `A` (left) and the added
/// splits `B` (right) of one support pair. Edges join incompatible splits.
#[derive(Clone, Debug)]
pub struct IncompatibilityGraph {
    /// Left vertex weights `|a|^2 / ||A||^2`.
    pub left: Vec<f64>,
    /// Right vertex weights `|b|^2 / ||B||^2`.
    pub right: Vec<f64>,
    /// `edges[i]` are the right vertices adjacent to left vertex `i`.
    pub edges: Vec<Vec<usize>>,
}

impl IncompatibilityGraph {
    /// Build from raw split weights; each side is normalized by its squared
    /// norm.
    pub fn from_weights(a: &[f64], b: &[f64], edges: Vec<Vec<usize>>) -> Self {
        let na: f64 = a.iter().map(|w| w * w).sum();
        let nb: f64 = b.iter().map(|w| w * w).sum();
        IncompatibilityGraph {
            left: a.iter().map(|w| w * w / na).collect(),
            right: b.iter().map(|w| w * w / nb).collect(),
            edges,
        }
    }
}

/// Result of [`min_weight_cover`].
///
/// `reachable_left` and `reachable_right` are the vertices reachable from
/// the source in the final residual graph. The minimum cover is the
/// unreachable left vertices together with the reachable right ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub flow: f64,
    pub reachable_left: Vec<usize>,
    pub reachable_right: Vec<usize>,
}

impl Cover {
    pub fn cover_left(&self, n_left: usize) -> Vec<usize> {
        complement(&self.reachable_left, n_left)
    }

    pub fn cover_right(&self) -> Vec<usize> {
        self.reachable_right.clone()
    }

    /// Total vertex weight of the minimum cover.
    pub fn cover_weight(&self, g: &IncompatibilityGraph) -> f64 {
        let l: f64 = self.cover_left(g.left.len()).iter().map(|&i| g.left[i]).sum();
        let r: f64 = self.reachable_right.iter().map(|&j| g.right[j]).sum();
        l + r
    }
}

pub(crate) fn complement(sorted: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted.len());
    let mut k = 0;
    for i in 0..n {
        if k < sorted.len() && sorted[k] == i {
            k += 1;
        } else {
            out.push(i);
        }
    }
    out
}

struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

struct Network {
    adj: Vec<Vec<Arc>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Network {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64) {
        let rf = self.adj[to].len();
        let rt = self.adj[from].len();
        self.adj[from].push(Arc { to, cap, rev: rf });
        self.adj[to].push(Arc {
            to: from,
            cap: 0.0,
            rev: rt,
        });
    }

    /// Breadth-first search over arcs with residual capacity above the
    /// threshold. Returns predecessor (node, arc index) per node.
    fn bfs(&self, s: usize) -> Vec<Option<(usize, usize)>> {
        let n = self.adj.len();
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for (k, arc) in self.adj[v].iter().enumerate() {
                if arc.cap > RESIDUAL_EPS && !seen[arc.to] {
                    seen[arc.to] = true;
                    pred[arc.to] = Some((v, k));
                    q.push_back(arc.to);
                }
            }
        }
        pred
    }
}

/// Max-flow from a source wired to every left vertex to a sink wired from
/// every right vertex, with infinite capacity on incompatibility edges.
/// The augmenting-path search visits vertices in index order, so callers
/// that index vertices by canonical split order get reproducible results.
pub fn min_weight_cover(g: &IncompatibilityGraph) -> Cover {
    let m = g.left.len();
    let k = g.right.len();
    let s = 0;
    let t = m + k + 1;
    let mut net = Network::new(m + k + 2);
    for (i, &w) in g.left.iter().enumerate() {
        net.add(s, 1 + i, w);
    }
    for (i, nbrs) in g.edges.iter().enumerate() {
        for &j in nbrs {
            net.add(1 + i, 1 + m + j, INFINITE);
        }
    }
    for (j, &w) in g.right.iter().enumerate() {
        net.add(1 + m + j, t, w);
    }

    let mut flow = 0.0;
    loop {
        let pred = net.bfs(s);
        if pred[t].is_none() {
            // Residual reachability gives the cut.
            let reachable_left = (0..m).filter(|&i| pred[1 + i].is_some()).collect();
            let reachable_right = (0..k).filter(|&j| pred[1 + m + j].is_some()).collect();
            return Cover {
                flow,
                reachable_left,
                reachable_right,
            };
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while let Some((u, a)) = pred[v] {
            bottleneck = bottleneck.min(net.adj[u][a].cap);
            v = u;
        }
        let mut v = t;
        while let Some((u, a)) = pred[v] {
            let rev = net.adj[u][a].rev;
            net.adj[u][a].cap -= bottleneck;
            net.adj[v][rev].cap += bottleneck;
            v = u;
        }
        flow += bottleneck;
    }
}
