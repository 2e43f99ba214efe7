//! Distance-based tree estimation and hierarchical clustering.

use std::fmt;
use std::str::FromStr;

use crate::alignment::{Alignment, Alphabet};
use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;
use crate::tree::{Tree, TreeBuilder};

/// Weighted proportion of sites at which two rows differ.
pub fn hamming_matrix(a: &Alignment) -> Result<DistanceMatrix> {
    let total = a.total_weight();
    if total == 0 {
        return Err(Error::InvalidArgument("all column weights are zero".into()));
    }
    let w = a.weights();
    DistanceMatrix::from_fn(a.taxa().to_vec(), |i, j| {
        let (ri, rj) = (a.row(i), a.row(j));
        let diff: u64 = (0..w.len())
            .filter(|&s| ri[s] != rj[s])
            .map(|s| w[s] as u64)
            .sum();
        diff as f64 / total as f64
    })
}

/// Jukes-Cantor corrected distance `-3/4 ln(1 - 4p/3)`.
pub fn jc69_distance(p: f64) -> f64 {
    -0.75 * (-4.0 * p / 3.0).ln_1p()
}

pub fn jc69_matrix(a: &Alignment) -> Result<DistanceMatrix> {
    if a.alphabet() != Alphabet::Dna {
        return Err(Error::InvalidArgument(
            "Jukes-Cantor distances need a DNA alignment".into(),
        ));
    }
    let h = hamming_matrix(a)?;
    let n = h.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = h.get(i, j);
            if p >= 0.75 {
                return Err(Error::Saturation(h.labels()[i].clone(), h.labels()[j].clone(), p));
            }
        }
    }
    h.map(jc69_distance)
}

/// Where the root label is attached to an estimated tree.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Rooting {
    /// Neighbor joining: midpoint of the final join. UPGMA: its own root.
    #[default]
    Natural,
    /// At the node adjacent to the named leaf.
    Outgroup(String),
}

impl Rooting {
    pub fn apply(&self, t: Tree) -> Result<Tree> {
        match self {
            Rooting::Natural => Ok(t),
            Rooting::Outgroup(l) => t.root_at_outgroup(l),
        }
    }
}

/// Bottom-up construction: `kids[v]` lists `(child, length)` and nodes
/// `0..n` are the leaves.
fn assemble(labels: &[String], kids: &[Vec<(usize, f64)>], root: usize) -> Result<Tree> {
    let mut b = TreeBuilder::new();
    let mut stack: Vec<(usize, usize)> = kids[root].iter().rev().map(|&(c, _)| (c, 0)).collect();
    let mut len_of = vec![0.0; kids.len()];
    for v in 0..kids.len() {
        for &(c, l) in &kids[v] {
            len_of[c] = l;
        }
    }
    while let Some((v, parent)) = stack.pop() {
        if v < labels.len() {
            b.add_leaf(parent, labels[v].clone(), len_of[v]);
        } else {
            let id = b.add_internal(parent, len_of[v]);
            stack.extend(kids[v].iter().rev().map(|&(c, _)| (c, id)));
        }
    }
    b.finish()
}

fn clamp_length(l: f64, what: &str) -> f64 {
    if l < 0.0 {
        log::warn!("negative {what} branch length {l} set to 0");
        0.0
    } else {
        l
    }
}

/// Saitou-Nei neighbor joining, rooted at the midpoint of the final join.
/// Equal Q values resolve to the lexicographically smallest pair of
/// active clusters (leaves first, then joins in creation order).
pub fn neighbor_joining(d: &DistanceMatrix) -> Result<Tree> {
    let n = d.len();
    if n < 3 {
        return Err(Error::TooFewLeaves { needed: 3, got: n });
    }
    let total = 2 * n - 1;
    let mut dist = vec![0.0; total * total];
    for i in 0..n {
        for j in 0..n {
            dist[i * total + j] = d.get(i, j);
        }
    }
    let mut kids: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
    let mut active: Vec<usize> = (0..n).collect();
    let mut next = n;
    while active.len() > 2 {
        let m = active.len();
        let r: Vec<f64> = active
            .iter()
            .map(|&i| active.iter().map(|&k| dist[i * total + k]).sum())
            .collect();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..m {
            for b in (a + 1)..m {
                let q = (m as f64 - 2.0) * dist[active[a] * total + active[b]] - r[a] - r[b];
                if q < best.0 {
                    best = (q, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let (i, j) = (active[a], active[b]);
        let dij = dist[i * total + j];
        let li = 0.5 * dij + (r[a] - r[b]) / (2.0 * (m as f64 - 2.0));
        let lj = dij - li;
        let u = next;
        next += 1;
        kids[u] = vec![(i, clamp_length(li, "NJ")), (j, clamp_length(lj, "NJ"))];
        for &k in &active {
            if k != i && k != j {
                let duk = 0.5 * (dist[i * total + k] + dist[j * total + k] - dij);
                dist[u * total + k] = duk;
                dist[k * total + u] = duk;
            }
        }
        active.remove(b);
        active.remove(a);
        active.push(u);
    }
    // The last two clusters are joined by the final edge; the root sits
    // at its midpoint.
    let (x, y) = (active[0], active[1]);
    let half = 0.5 * clamp_length(dist[x * total + y], "NJ");
    kids.push(vec![(x, half), (y, half)]);
    assemble(d.labels(), &kids, total)
}

/// One agglomeration step: clusters `a` and `b` joined at `height`.
/// Leaves are clusters `0..n`; merge `k` creates cluster `n + k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Average,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "average" | "upgma" => Ok(Linkage::Average),
            _ => Err(Error::InvalidArgument(format!("unknown linkage `{s}`"))),
        }
    }
}

/// Agglomerative clustering with merge height equal to the linkage
/// distance. Ties resolve to the lexicographically smallest cluster pair.
pub fn agglomerate(d: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = d.len();
    if n < 2 {
        return Err(Error::TooFewLeaves { needed: 2, got: n });
    }
    let total = 2 * n - 1;
    let mut dist = vec![0.0; total * total];
    for i in 0..n {
        for j in 0..n {
            dist[i * total + j] = d.get(i, j);
        }
    }
    let mut size = vec![1usize; total];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    while active.len() > 1 {
        let m = active.len();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..m {
            for b in (a + 1)..m {
                let x = dist[active[a] * total + active[b]];
                if x < best.0 {
                    best = (x, a, b);
                }
            }
        }
        let (h, a, b) = best;
        let (i, j) = (active[a], active[b]);
        let u = n + merges.len();
        merges.push(Merge { a: i, b: j, height: h });
        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let (dik, djk) = (dist[i * total + k], dist[j * total + k]);
            let duk = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Average => {
                    (size[i] as f64 * dik + size[j] as f64 * djk) / (size[i] + size[j]) as f64
                }
            };
            dist[u * total + k] = duk;
            dist[k * total + u] = duk;
        }
        size[u] = size[i] + size[j];
        active.remove(b);
        active.remove(a);
        active.push(u);
    }
    Ok(Dendrogram {
        labels: d.labels().to_vec(),
        merges,
    })
}

pub fn single_linkage(d: &DistanceMatrix) -> Result<Dendrogram> {
    agglomerate(d, Linkage::Single)
}

/// Average linkage with merge heights at half the inter-cluster distance,
/// so leaf-to-leaf path lengths reproduce ultrametric inputs.
pub fn upgma(d: &DistanceMatrix) -> Result<Tree> {
    let mut dg = agglomerate(d, Linkage::Average)?;
    for m in &mut dg.merges {
        m.height *= 0.5;
    }
    dg.to_tree()
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    fn height_of(&self, c: usize) -> f64 {
        let n = self.n_leaves();
        if c < n {
            0.0
        } else {
            self.merges[c - n].height
        }
    }

    /// Tree whose branch lengths are differences of merge heights.
    pub fn to_tree(&self) -> Result<Tree> {
        let n = self.n_leaves();
        let total = n + self.merges.len();
        let mut kids: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
        for (k, m) in self.merges.iter().enumerate() {
            let h = m.height;
            kids[n + k] = [m.a, m.b]
                .iter()
                .map(|&c| (c, clamp_length(h - self.height_of(c), "dendrogram")))
                .collect();
        }
        assemble(&self.labels, &kids, total - 1)
    }

    pub fn to_newick(&self) -> Result<String> {
        Ok(crate::newick::write_newick(&self.to_tree()?))
    }
}

/// Cluster index per leaf after undoing the `k - 1` highest merges.
/// Clusters are numbered by their smallest leaf.
pub fn cut_dendrogram(d: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    let n = d.n_leaves();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot cut {n} leaves into {k} clusters"
        )));
    }
    let mut parent: Vec<usize> = (0..n + d.merges.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    // The lowest n - k merges stay; ties keep creation order, so a kept
    // merge never has a removed merge below it.
    let mut order: Vec<usize> = (0..d.merges.len()).collect();
    order.sort_by(|&x, &y| d.merges[x].height.total_cmp(&d.merges[y].height));
    for &t in &order[..n - k] {
        let m = d.merges[t];
        let u = n + t;
        for c in [m.a, m.b] {
            let r = find(&mut parent, c);
            parent[r] = u;
        }
    }
    let mut ids = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(n);
    for leaf in 0..n {
        let r = find(&mut parent, leaf);
        let next = ids.len();
        out.push(*ids.entry(r).or_insert(next));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Estimator {
    #[default]
    Nj,
    Upgma,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nj" => Ok(Estimator::Nj),
            "upgma" => Ok(Estimator::Upgma),
            _ => Err(Error::InvalidArgument(format!("unknown estimator `{s}`"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Nj => "nj",
            Estimator::Upgma => "upgma",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DistanceKind {
    #[default]
    Hamming,
    Jc69,
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(DistanceKind::Hamming),
            "jc69" => Ok(DistanceKind::Jc69),
            _ => Err(Error::InvalidArgument(format!("unknown distance `{s}`"))),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Hamming => "hamming",
            DistanceKind::Jc69 => "jc69",
        })
    }
}

/// How a tree is estimated from an alignment. Every tree compared within
/// one analysis must come from the same configuration so that all of them
/// hang from the root the same way.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    pub distance: DistanceKind,
    pub rooting: Rooting,
}

impl EstimatorConfig {
    pub fn distances(&self, a: &Alignment) -> Result<DistanceMatrix> {
        match self.distance {
            DistanceKind::Hamming => hamming_matrix(a),
            DistanceKind::Jc69 => jc69_matrix(a),
        }
    }

    pub fn from_distances(&self, d: &DistanceMatrix) -> Result<Tree> {
        let t = match self.estimator {
            Estimator::Nj => neighbor_joining(d)?,
            Estimator::Upgma => upgma(d)?,
        };
        self.rooting.apply(t)
    }

    pub fn estimate(&self, a: &Alignment) -> Result<Tree> {
        self.from_distances(&self.distances(a)?)
    }
}
