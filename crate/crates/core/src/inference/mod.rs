//! Resampling harnesses and summaries over collections of trees.

mod anneal;
mod bootstrap;

pub use anneal::{anneal_to_boundary, write_trace, AnnealResult, Schedule, TraceRow};
pub use bootstrap::{bootstrap_trees, bootstrap_trees_with, bootstrap_weights};

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::geodesic_splits;
use crate::matrix::{euclidean, DistanceMatrix};
use crate::newick::write_topology;
use crate::splits::{splits_to_tree, tree_to_splits, tree_to_splits_in, universe_of, Bits, SplitSet};
use crate::tree::Tree;
use crate::treebuild::{neighbor_joining, upgma, Estimator, Rooting};

#[derive(Clone, Debug)]
pub struct TopologyBin {
    /// Sorted internal split masks.
    pub key: Vec<Bits>,
    /// Branch-length-free Newick of the first member.
    pub topology: String,
    pub count: usize,
    /// Indices of member trees, ascending.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TopologyBins {
    /// Decreasing count; ties by first appearance.
    pub bins: Vec<TopologyBin>,
    pub total: usize,
}

impl TopologyBins {
    pub fn counts(&self) -> Vec<usize> {
        self.bins.iter().map(|b| b.count).collect()
    }

    /// Bin index of every input tree.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![0; self.total];
        for (k, b) in self.bins.iter().enumerate() {
            for &m in &b.members {
                out[m] = k;
            }
        }
        out
    }

    pub fn shannon(&self) -> f64 {
        shannon_diversity(&self.counts())
    }

    /// TSV rows `rank, count, topology`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("rank\tcount\ttopology\n");
        for (k, b) in self.bins.iter().enumerate() {
            s.push_str(&format!("{}\t{}\t{}\n", k + 1, b.count, b.topology));
        }
        s
    }
}

/// Group trees by topology, ignoring branch lengths.
pub fn bin_topologies(trees: &[Tree]) -> Result<TopologyBins> {
    let Some(first) = trees.first() else {
        return Ok(TopologyBins {
            bins: Vec::new(),
            total: 0,
        });
    };
    let u = universe_of(first);
    let mut index: HashMap<Vec<Bits>, usize> = HashMap::new();
    let mut bins: Vec<TopologyBin> = Vec::new();
    for (i, t) in trees.iter().enumerate() {
        if universe_of(t) != u {
            return Err(Error::LeafSetMismatch(format!("tree {} differs from tree 1", i + 1)));
        }
        let s = tree_to_splits_in(t, &u)?;
        let key: Vec<Bits> = s.internal().map(|x| x.mask().clone()).collect();
        match index.get(&key) {
            Some(&k) => {
                bins[k].count += 1;
                bins[k].members.push(i);
            }
            None => {
                index.insert(key.clone(), bins.len());
                bins.push(TopologyBin {
                    key,
                    topology: write_topology(t),
                    count: 1,
                    members: vec![i],
                });
            }
        }
    }
    // Stable sort keeps first-appearance order among equal counts.
    bins.sort_by(|a, b| b.count.cmp(&a.count));
    Ok(TopologyBins {
        bins,
        total: trees.len(),
    })
}

fn plug_in_entropy(counts: &[usize]) -> (f64, f64, f64) {
    let n: usize = counts.iter().sum();
    let nf = n as f64;
    // Written as p ln(1/p) so a single bin gives +0 rather than -0.
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let c = c as f64;
            c / nf * (nf / c).ln()
        })
        .sum::<f64>();
    let s = counts.iter().filter(|&&c| c > 0).count() as f64;
    (h, s, nf)
}

/// `-sum p ln p - (S - 1) / (2N)`.
pub fn shannon_diversity(counts: &[usize]) -> f64 {
    let (h, s, n) = plug_in_entropy(counts);
    if n == 0.0 {
        return 0.0;
    }
    h - (s - 1.0) / (2.0 * n)
}

/// The same index with a caller-supplied bias denominator in place of `2N`.
pub fn shannon_diversity_with(counts: &[usize], denominator: f64) -> f64 {
    let (h, s, _) = plug_in_entropy(counts);
    h - (s - 1.0) / denominator
}

/// Drop every internal split, keeping the pendant lengths.
pub fn star_tree(t: &Tree) -> Result<Tree> {
    let s = tree_to_splits(t);
    let pendants = s.pendants().cloned().collect();
    splits_to_tree(&SplitSet::new(s.universe().clone(), pendants))
}

/// `(2r - 3)!!`, the number of rooted binary trees on `r` labelled leaves
/// (equivalently, of resolutions near an `r`-way multifurcation).
pub fn neighborhood_count(r: u32) -> Result<u128> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need r >= 2, got {r}")));
    }
    let mut acc: u128 = 1;
    let mut k = 2 * r as u128 - 3;
    while k > 1 {
        acc = acc
            .checked_mul(k)
            .ok_or_else(|| Error::Numerical(format!("(2r-3)!! overflows for r = {r}")))?;
        k -= 2;
    }
    Ok(acc)
}

/// Numeric table with labelled rows and columns.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// `values[row][col]`.
    pub values: Vec<Vec<f64>>,
}

impl DataMatrix {
    pub fn transposed(&self) -> DataMatrix {
        let values = (0..self.col_labels.len())
            .map(|c| self.values.iter().map(|r| r[c]).collect())
            .collect();
        DataMatrix {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            values,
        }
    }

    /// CSV with a header row of column labels and a leading label column.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<DataMatrix> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(r);
        let col_labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut row_labels = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            row_labels.push(rec.get(0).unwrap_or("").to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Matrix(format!("bad number `{f}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != col_labels.len() {
                return Err(Error::Matrix(format!(
                    "row `{}` has {} values, expected {}",
                    row_labels.last().unwrap(),
                    row.len(),
                    col_labels.len()
                )));
            }
            values.push(row);
        }
        Ok(DataMatrix {
            row_labels,
            col_labels,
            values,
        })
    }
}

/// Which entries a leave-one-out run removes; the other axis supplies the
/// leaves of the estimated trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Axis {
    /// Drop one column at a time; rows are the leaves.
    #[default]
    Columns,
    /// Drop one row at a time; columns are the leaves.
    Rows,
}

/// Trees estimated from Euclidean distances between leaves, once on all
/// variables (labelled `Original`, listed first) and once without each
/// variable in turn.
pub fn loo_trees(
    data: &DataMatrix,
    axis: Axis,
    estimator: Estimator,
    rooting: &Rooting,
) -> Result<Vec<(String, Tree)>> {
    let m = match axis {
        Axis::Columns => data.clone(),
        Axis::Rows => data.transposed(),
    };
    if m.col_labels.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out needs at least 3 variables, got {}",
            m.col_labels.len()
        )));
    }
    let build = |skip: Option<usize>| -> Result<Tree> {
        let pts: Vec<Vec<f64>> = m
            .values
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|&(c, _)| Some(c) != skip)
                    .map(|(_, &x)| x)
                    .collect()
            })
            .collect();
        let d: DistanceMatrix = euclidean(m.row_labels.clone(), &pts)?;
        let t = match estimator {
            Estimator::Nj => neighbor_joining(&d)?,
            Estimator::Upgma => upgma(&d)?,
        };
        rooting.apply(t)
    };
    let mut out = vec![("Original".to_string(), build(None)?)];
    let rest: Vec<(String, Tree)> = (0..m.col_labels.len())
        .into_par_iter()
        .map(|c| {
            build(Some(c))
                .map(|t| (m.col_labels[c].clone(), t))
                .map_err(|e| Error::LeaveOneOut {
                    label: m.col_labels[c].clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    out.extend(rest);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNeighbor {
    /// Position in the candidate list.
    pub index: usize,
    pub distance: f64,
}

/// Candidates one codimension-1 boundary away from `t`: the geodesic
/// crosses exactly one orthant wall, trading a single split for a single
/// split.
pub fn nearest_boundary_neighbors(t: &Tree, candidates: &[Tree]) -> Result<Vec<BoundaryNeighbor>> {
    let u = universe_of(t);
    let s = tree_to_splits_in(t, &u)?;
    let hits: Vec<Option<BoundaryNeighbor>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            if universe_of(c) != u {
                return Err(Error::LeafSetMismatch(format!("candidate {}", i + 1)));
            }
            let p = geodesic_splits(&s, &tree_to_splits_in(c, &u)?)?;
            let one_for_one = p.n_pairs() == 1
                && p.compatible_unique.is_empty()
                && p.pairs().all(|x| x.a.len() == 1 && x.b.len() == 1);
            Ok(one_for_one.then_some(BoundaryNeighbor {
                index: i,
                distance: p.distance,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::geodesic_distance;
    use crate::newick::parse_newick;
    use proptest::prelude::*;

    fn nw(s: &str) -> Tree {
        parse_newick(s).unwrap()
    }

    #[test]
    fn bins() {
        let a = nw("((A:1,B:1):1,(C:1,D:1):1);");
        let a2 = nw("((A:3,B:1):0.2,(C:1,D:2):1);");
        let b = nw("((A:1,C:1):1,(B:1,D:1):1);");
        let one = bin_topologies(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(one.bins.len(), 1);
        assert_eq!(bin_topologies(&[a.clone(), a2.clone()]).unwrap().bins.len(), 1);
        let two = bin_topologies(&[b.clone(), a.clone(), a2]).unwrap();
        assert_eq!(two.counts(), vec![2, 1]);
        assert_eq!(two.labels(), vec![1, 0, 0]);
        assert_eq!(two.bins[0].topology, "((A,B),(C,D));");
        assert!(bin_topologies(&[a, nw("((A,B),(C,E));")]).is_err());
    }

    #[test]
    fn diversity_cases() {
        assert_eq!(shannon_diversity(&[7]), 0.0);
        assert!(shannon_diversity(&[7]).is_sign_positive());
        let n = 40;
        let sw = shannon_diversity(&vec![1; n]);
        let want = (n as f64).ln() - (n as f64 - 1.0) / (2.0 * n as f64);
        assert!((sw - want).abs() < 1e-12);
        assert!((shannon_diversity_with(&[2, 2], 8.0) - (2f64.ln() - 1.0 / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn star() {
        let t = nw("((A:1,B:2):0.5,(C:3,D:4):1.5);");
        let s = star_tree(&t).unwrap();
        assert_eq!(crate::newick::write_newick(&s), "(A:1,B:2,C:3,D:4);");
        let again = star_tree(&s).unwrap();
        assert_eq!(crate::newick::write_newick(&again), "(A:1,B:2,C:3,D:4);");
        let d = geodesic_distance(&t, &s).unwrap();
        assert!((d - (0.25f64 + 2.25).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn double_factorial() {
        assert_eq!(neighborhood_count(2).unwrap(), 1);
        assert_eq!(neighborhood_count(3).unwrap(), 3);
        assert_eq!(neighborhood_count(5).unwrap(), 105);
        assert!(neighborhood_count(1).is_err());
        assert!(neighborhood_count(29).is_ok());
        assert!(neighborhood_count(30).is_err());
    }

    #[test]
    fn loo() {
        let data = DataMatrix {
            row_labels: ["s1", "s2", "s3", "s4"].map(String::from).to_vec(),
            col_labels: ["g1", "g2", "g3"].map(String::from).to_vec(),
            values: vec![
                vec![0.0, 1.0, 5.0],
                vec![0.5, 1.2, 5.0],
                vec![3.0, 0.1, 5.0],
                vec![3.2, 0.4, 5.0],
            ],
        };
        let trees = loo_trees(&data, Axis::Columns, Estimator::Upgma, &Rooting::Natural).unwrap();
        assert_eq!(trees.len(), 4);
        assert_eq!(trees[0].0, "Original");
        // g3 is constant: dropping it changes nothing.
        let g3 = &trees.iter().find(|(l, _)| l == "g3").unwrap().1;
        assert_eq!(geodesic_distance(&trees[0].1, g3).unwrap(), 0.0);
        let by_row = loo_trees(&data.transposed(), Axis::Rows, Estimator::Upgma, &Rooting::Natural)
            .unwrap();
        assert_eq!(by_row.len(), 4);
        let narrow = DataMatrix {
            col_labels: data.col_labels[..2].to_vec(),
            values: data.values.iter().map(|r| r[..2].to_vec()).collect(),
            ..data.clone()
        };
        assert!(loo_trees(&narrow, Axis::Columns, Estimator::Upgma, &Rooting::Natural).is_err());
    }

    #[test]
    fn boundary_neighbors() {
        let t = nw("(((A:1,B:1):1,C:1):1,D:1,E:1);");
        let nni = nw("(((A:1,C:1):0.5,B:1):1,D:1,E:1);");
        let far = nw("(((C:1,D:1):1,A:1):1,B:1,E:1);");
        let hits = nearest_boundary_neighbors(&t, &[t.clone(), nni.clone(), far]).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].index, 1);
        assert_eq!(hits[0].distance, geodesic_distance(&t, &nni).unwrap());
    }

    proptest! {
        #[test]
        fn equal_counts_maximize(parts in proptest::collection::vec(1usize..30, 2..12)) {
            let s = parts.len();
            let n: usize = parts.iter().sum();
            // Same S and N, spread as evenly as possible.
            let even: Vec<usize> = (0..s).map(|i| n / s + usize::from(i < n % s)).collect();
            prop_assert!(shannon_diversity(&even) >= shannon_diversity(&parts) - 1e-12);
        }
    }
}
