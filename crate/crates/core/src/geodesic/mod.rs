//! Geodesic paths and distances in BHV tree space.
//!
//! The shortest path between two trees is found bin by bin (see
//! [`crate::splits::partition_into_bins`]). Within a bin the path starts
//! as the cone path through the star tree and its support pairs are split
//! whenever the incompatibility graph of a pair has max-flow below one.
//! When every pair has flow at least one the path is the geodesic.

mod flow;
mod path;

pub use flow::{min_weight_cover, Cover, IncompatibilityGraph, RESIDUAL_EPS};
pub use path::{boundary_trees, point_on_path, transitions};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{numbered_labels, DistanceMatrix};
use crate::splits::{
    classify_edges, partition_into_bins, tree_to_splits_in, universe_of, Bin, Bits, SharedSplit,
    Split, SplitSet, Universe,
};
use crate::tree::Tree;

/// Pairs whose flow reaches `1 - FLOW_TOLERANCE` are not split further.
pub const FLOW_TOLERANCE: f64 = 1e-10;

/// Splits dropped from the first tree (`a`) and added from the second
/// (`b`) in one orthant transition.
#[derive(Clone, Debug)]
pub struct SupportPair {
    pub a: Vec<Split>,
    pub b: Vec<Split>,
}

pub(crate) fn norm(splits: &[Split]) -> f64 {
    splits.iter().map(|s| s.weight * s.weight).sum::<f64>().sqrt()
}

impl SupportPair {
    pub fn norm_a(&self) -> f64 {
        norm(&self.a)
    }

    pub fn norm_b(&self) -> f64 {
        norm(&self.b)
    }

    /// `||A|| / ||B||`, nondecreasing along a valid path.
    pub fn ratio(&self) -> f64 {
        self.norm_a() / self.norm_b()
    }

    /// Path parameter in `[0, 1]` at which this transition happens.
    pub fn transition_time(&self) -> f64 {
        let (na, nb) = (self.norm_a(), self.norm_b());
        na / (na + nb)
    }

    fn length_sq(&self) -> f64 {
        let s = self.norm_a() + self.norm_b();
        s * s
    }
}

#[derive(Clone, Debug)]
pub struct BinPath {
    /// Shared edge the bin hangs under; `None` for the root bin.
    pub root: Option<Bits>,
    pub pairs: Vec<SupportPair>,
}

/// A path between two trees together with its length.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub(crate) start: SplitSet,
    pub(crate) end: SplitSet,
    pub bins: Vec<BinPath>,
    /// Splits present in both trees with their two weights.
    pub shared_deltas: Vec<SharedSplit>,
    /// Unique splits compatible with every unique split of the other tree.
    /// They change linearly along the path like shared splits whose weight
    /// in the other tree is zero.
    pub compatible_unique: Vec<SharedSplit>,
    pub distance: f64,
}

impl GeodesicPath {
    pub fn universe(&self) -> &Universe {
        self.start.universe()
    }

    pub fn start(&self) -> &SplitSet {
        &self.start
    }

    pub fn end(&self) -> &SplitSet {
        &self.end
    }

    pub fn n_pairs(&self) -> usize {
        self.bins.iter().map(|b| b.pairs.len()).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &SupportPair> {
        self.bins.iter().flat_map(|b| b.pairs.iter())
    }

    /// Check both validity conditions on every bin: later dropped sets are
    /// compatible with earlier added sets, and `||A_i||/||B_i||` is
    /// nondecreasing. Pairs with an empty side (cone paths only) are
    /// skipped for the ratio test.
    pub fn is_valid(&self) -> bool {
        self.bins.iter().all(|b| pairs_valid(&b.pairs))
    }
}

fn pairs_valid(pairs: &[SupportPair]) -> bool {
    for (i, later) in pairs.iter().enumerate() {
        for earlier in &pairs[..i] {
            if !later
                .a
                .iter()
                .all(|x| earlier.b.iter().all(|y| x.compatible_with(y)))
            {
                return false;
            }
        }
    }
    pairs.windows(2).all(|w| {
        let (r0, r1) = (w[0].ratio(), w[1].ratio());
        r0.is_nan() || r1.is_nan() || r0 <= r1 * (1.0 + 1e-12) + 1e-300
    })
}

/// Resolve both trees over the labels of `t`.
fn split_pair(t: &Tree, t2: &Tree) -> Result<(SplitSet, SplitSet)> {
    let u = universe_of(t);
    let u2 = universe_of(t2);
    if u != u2 {
        let s1 = SplitSet::new(u.clone(), Vec::new());
        let s2 = SplitSet::new(u2, Vec::new());
        s1.same_universe(&s2)?;
    }
    let a = tree_to_splits_in(t, &u)?;
    let b = tree_to_splits_in(t2, &u)?;
    Ok((a, b))
}

pub fn geodesic(t: &Tree, t2: &Tree) -> Result<GeodesicPath> {
    let (a, b) = split_pair(t, t2)?;
    geodesic_splits(&a, &b)
}

pub fn geodesic_distance(t: &Tree, t2: &Tree) -> Result<f64> {
    let (a, b) = split_pair(t, t2)?;
    distance_splits(&a, &b)
}

/// The cone path: one support pair per bin holding every nonzero unique
/// split of each tree.
pub fn cone_path(t: &SplitSet, t2: &SplitSet) -> Result<GeodesicPath> {
    let c = classify_edges(t, t2)?;
    let bins = partition_into_bins(&c);
    let mut out = Vec::new();
    let mut sum = shared_sum(&c.shared);
    for bin in &bins {
        let a: Vec<Split> = bin.unique_t.iter().filter(|s| s.weight > 0.0).cloned().collect();
        let b: Vec<Split> = bin.unique_t2.iter().filter(|s| s.weight > 0.0).cloned().collect();
        if a.is_empty() && b.is_empty() {
            continue;
        }
        let pair = SupportPair { a, b };
        sum += pair.length_sq();
        out.push(BinPath {
            root: bin.root.clone(),
            pairs: vec![pair],
        });
    }
    Ok(GeodesicPath {
        start: t.clone(),
        end: t2.clone(),
        bins: out,
        shared_deltas: c.shared,
        compatible_unique: Vec::new(),
        distance: sum.sqrt(),
    })
}

fn shared_sum(shared: &[SharedSplit]) -> f64 {
    shared
        .iter()
        .map(|s| {
            let d = s.weight_t - s.weight_t2;
            d * d
        })
        .sum()
}

/// Index-level solution for one bin.
struct BinSolution {
    /// Support pairs as index lists into the bin's `unique_t`/`unique_t2`.
    pairs: Vec<(Vec<usize>, Vec<usize>)>,
    free_t: Vec<usize>,
    free_t2: Vec<usize>,
}

fn sq_norm(bin_side: &[Split], idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| bin_side[i].weight * bin_side[i].weight)
        .sum()
}

fn solve_bin(bin: &Bin) -> BinSolution {
    let nz_t: Vec<usize> = (0..bin.unique_t.len())
        .filter(|&i| bin.unique_t[i].weight > 0.0)
        .collect();
    let nz_t2: Vec<bool> = bin.unique_t2.iter().map(|s| s.weight > 0.0).collect();

    // Splits with no conflict on the other side leave the algorithm.
    let mut has_conflict_t2 = vec![false; bin.unique_t2.len()];
    let mut a0 = Vec::new();
    let mut free_t = Vec::new();
    for &i in &nz_t {
        let mut any = false;
        for &j in &bin.incompatible[i] {
            if nz_t2[j] {
                any = true;
                has_conflict_t2[j] = true;
            }
        }
        if any {
            a0.push(i);
        } else {
            free_t.push(i);
        }
    }
    let mut b0 = Vec::new();
    let mut free_t2 = Vec::new();
    for (j, &nz) in nz_t2.iter().enumerate() {
        if !nz {
            continue;
        }
        if has_conflict_t2[j] {
            b0.push(j);
        } else {
            free_t2.push(j);
        }
    }

    let mut pairs = Vec::new();
    if !a0.is_empty() {
        pairs.push((a0, b0));
    }

    // Position of each unique_t2 index inside the current pair's B list.
    let mut local_b = vec![usize::MAX; bin.unique_t2.len()];
    let mut i = 0;
    while i < pairs.len() {
        let (ref a, ref b) = pairs[i];
        for (k, &j) in b.iter().enumerate() {
            local_b[j] = k;
        }
        let aw: Vec<f64> = a.iter().map(|&x| bin.unique_t[x].weight).collect();
        let bw: Vec<f64> = b.iter().map(|&y| bin.unique_t2[y].weight).collect();
        let edges: Vec<Vec<usize>> = a
            .iter()
            .map(|&x| {
                bin.incompatible[x]
                    .iter()
                    .filter(|&&j| local_b[j] != usize::MAX)
                    .map(|&j| local_b[j])
                    .collect()
            })
            .collect();
        for &j in b {
            local_b[j] = usize::MAX;
        }
        let g = IncompatibilityGraph::from_weights(&aw, &bw, edges);
        let cover = min_weight_cover(&g);
        if cover.flow >= 1.0 - FLOW_TOLERANCE {
            i += 1;
            continue;
        }
        // Unreachable vertices move first, reachable ones second.
        let ra = &cover.reachable_left;
        let rb = &cover.reachable_right;
        if ra.is_empty() || rb.is_empty() || ra.len() == a.len() || rb.len() == b.len() {
            // Only reachable through floating-point noise near flow 1.
            i += 1;
            continue;
        }
        let second_a: Vec<usize> = ra.iter().map(|&k| a[k]).collect();
        let second_b: Vec<usize> = rb.iter().map(|&k| b[k]).collect();
        let first_a: Vec<usize> = flow::complement(ra, a.len()).into_iter().map(|k| a[k]).collect();
        let first_b: Vec<usize> = flow::complement(rb, b.len()).into_iter().map(|k| b[k]).collect();
        pairs.splice(i..=i, [(first_a, first_b), (second_a, second_b)]);
        debug_assert!(index_pairs_valid(bin, &pairs));
    }
    BinSolution {
        pairs,
        free_t,
        free_t2,
    }
}

fn index_pairs_valid(bin: &Bin, pairs: &[(Vec<usize>, Vec<usize>)]) -> bool {
    let mut ok = true;
    for (i, (later_a, _)) in pairs.iter().enumerate() {
        for (_, earlier_b) in &pairs[..i] {
            for &x in later_a {
                for &y in earlier_b {
                    ok &= !bin.incompatible[x].contains(&y);
                }
            }
        }
    }
    let ratios: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| (sq_norm(&bin.unique_t, a) / sq_norm(&bin.unique_t2, b)).sqrt())
        .collect();
    ok && ratios.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9))
}

fn solution_sum(bin: &Bin, sol: &BinSolution) -> f64 {
    let mut s = 0.0;
    for (a, b) in &sol.pairs {
        let l = sq_norm(&bin.unique_t, a).sqrt() + sq_norm(&bin.unique_t2, b).sqrt();
        s += l * l;
    }
    s + sq_norm(&bin.unique_t, &sol.free_t) + sq_norm(&bin.unique_t2, &sol.free_t2)
}

/// Distance only, skipping path materialization.
pub fn distance_splits(t: &SplitSet, t2: &SplitSet) -> Result<f64> {
    let c = classify_edges(t, t2)?;
    let bins = partition_into_bins(&c);
    let mut sum = shared_sum(&c.shared);
    for bin in &bins {
        let sol = solve_bin(bin);
        sum += solution_sum(bin, &sol);
    }
    Ok(sum.sqrt())
}

pub fn geodesic_splits(t: &SplitSet, t2: &SplitSet) -> Result<GeodesicPath> {
    let c = classify_edges(t, t2)?;
    let bins = partition_into_bins(&c);
    let mut sum = shared_sum(&c.shared);
    let mut out = Vec::new();
    let mut compatible_unique = Vec::new();
    for bin in &bins {
        let sol = solve_bin(bin);
        sum += solution_sum(bin, &sol);
        for &i in &sol.free_t {
            let s = &bin.unique_t[i];
            compatible_unique.push(SharedSplit {
                split: s.clone(),
                weight_t: s.weight,
                weight_t2: 0.0,
            });
        }
        for &j in &sol.free_t2 {
            let s = &bin.unique_t2[j];
            compatible_unique.push(SharedSplit {
                split: s.clone(),
                weight_t: 0.0,
                weight_t2: s.weight,
            });
        }
        if sol.pairs.is_empty() {
            continue;
        }
        let pairs = sol
            .pairs
            .iter()
            .map(|(a, b)| SupportPair {
                a: a.iter().map(|&i| bin.unique_t[i].clone()).collect(),
                b: b.iter().map(|&j| bin.unique_t2[j].clone()).collect(),
            })
            .collect();
        out.push(BinPath {
            root: bin.root.clone(),
            pairs,
        });
    }
    Ok(GeodesicPath {
        start: t.clone(),
        end: t2.clone(),
        bins: out,
        shared_deltas: c.shared,
        compatible_unique,
        distance: sum.sqrt(),
    })
}

/// `sqrt(||U_T||^2 + ||U_T'||^2 + sum of shared deltas^2)`, a lower bound on
/// the geodesic distance (reached when all unique splits are compatible).
pub fn lower_bound(t: &SplitSet, t2: &SplitSet) -> Result<f64> {
    let c = classify_edges(t, t2)?;
    let u: f64 = c
        .unique_t
        .iter()
        .chain(c.unique_t2.iter())
        .map(|s| s.weight * s.weight)
        .sum();
    Ok((u + shared_sum(&c.shared)).sqrt())
}

/// All pairwise geodesic distances. Pairs are computed independently on
/// the current rayon pool; results do not depend on the pool size.
pub fn distance_matrix(trees: &[Tree]) -> Result<DistanceMatrix> {
    distance_matrix_labeled(trees, numbered_labels("t", trees.len()))
}

pub fn distance_matrix_labeled(trees: &[Tree], labels: Vec<String>) -> Result<DistanceMatrix> {
    if labels.len() != trees.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} trees",
            labels.len(),
            trees.len()
        )));
    }
    let n = trees.len();
    if n == 0 {
        return DistanceMatrix::new(labels, Vec::new());
    }
    let u = universe_of(&trees[0]);
    let sets: Vec<SplitSet> = trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let ui = universe_of(t);
            if ui != u {
                SplitSet::new(u.clone(), Vec::new())
                    .same_universe(&SplitSet::new(ui, Vec::new()))
                    .map_err(|e| Error::LeafSetMismatch(format!("tree {}: {e}", i + 1)))?;
            }
            tree_to_splits_in(t, &u)
        })
        .collect::<Result<_>>()?;
    let distances = split_set_distances(&sets)?;
    DistanceMatrix::from_upper(labels, &distances)
}

/// Upper-triangle distances `(0,1), (0,2), …, (1,2), …` between split sets.
pub fn split_set_distances(sets: &[SplitSet]) -> Result<Vec<f64>> {
    let n = sets.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| distance_splits(&sets[i], &sets[j]))
        .collect()
}
