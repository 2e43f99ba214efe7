//! Bit-vector split algebra.
//!
//! Every edge of a rooted tree is identified by the set of leaves below it.
//! Masks have `n + 1` bit positions: `0..n` for the leaves in universe
//! order and position `n` for the implicit root label `Z`, which is never
//! set because the stored side is always the one without `Z`.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tree::{Tree, TreeBuilder};

/// Packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    words: Box<[u64]>,
}

impl std::fmt::Debug for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ones: Vec<usize> = self.iter_ones().collect();
        write!(f, "Bits{ones:?}")
    }
}

impl Bits {
    pub fn zeros(nbits: usize) -> Self {
        Bits {
            words: vec![0u64; nbits.div_ceil(64).max(1)].into_boxed_slice(),
        }
    }

    pub fn from_indices(nbits: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut b = Bits::zeros(nbits);
        for i in idx {
            b.set(i);
        }
        b
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn union_with(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= *b;
        }
    }

    pub fn is_subset_of(&self, other: &Bits) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &Bits) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .any(|(a, b)| a & b != 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + t)
                }
            })
        })
    }

    /// Rooted compatibility in one pass over the words: the pair is
    /// incompatible only when `a ∩ b`, `a \ b` and `b \ a` are all
    /// nonempty (the two complements always share `Z`).
    pub fn compatible_with(&self, other: &Bits) -> bool {
        let (mut both, mut only_a, mut only_b) = (0u64, 0u64, 0u64);
        for (a, b) in self.words.iter().zip(other.words.iter()) {
            both |= a & b;
            only_a |= a & !b;
            only_b |= !a & b;
        }
        both == 0 || only_a == 0 || only_b == 0
    }
}

/// A weighted split. Equality, ordering and hashing look at the mask only.
#[derive(Clone, Debug)]
pub struct Split {
    mask: Bits,
    size: usize,
    pub weight: f64,
}

impl Split {
    pub fn new(mask: Bits, weight: f64) -> Self {
        let size = mask.count();
        Split { mask, size, weight }
    }

    pub fn mask(&self) -> &Bits {
        &self.mask
    }

    /// Number of leaves below the edge (cached).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_pendant(&self) -> bool {
        self.size == 1
    }

    pub fn compatible_with(&self, other: &Split) -> bool {
        self.mask.compatible_with(&other.mask)
    }
}

impl PartialEq for Split {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
    }
}
impl Eq for Split {}
impl Hash for Split {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.mask.hash(state)
    }
}
impl PartialOrd for Split {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Split {
    fn cmp(&self, other: &Self) -> Ordering {
        self.mask.cmp(&other.mask)
    }
}

/// Sorted leaf labels; bit `i` of a mask stands for `labels[i]`.
pub type Universe = Arc<[String]>;

pub fn universe_of(tree: &Tree) -> Universe {
    tree.sorted_labels().into()
}

/// Number of bit positions used by masks over `u` (leaves plus `Z`).
pub fn mask_bits(u: &Universe) -> usize {
    u.len() + 1
}

/// All splits of one tree, sorted by mask.
#[derive(Clone, Debug)]
pub struct SplitSet {
    universe: Universe,
    splits: Vec<Split>,
}

impl SplitSet {
    pub fn new(universe: Universe, mut splits: Vec<Split>) -> Self {
        splits.sort();
        splits.dedup();
        SplitSet { universe, splits }
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn internal(&self) -> impl Iterator<Item = &Split> {
        self.splits.iter().filter(|s| s.size >= 2)
    }

    pub fn pendants(&self) -> impl Iterator<Item = &Split> {
        self.splits.iter().filter(|s| s.size == 1)
    }

    pub fn get(&self, mask: &Bits) -> Option<&Split> {
        self.splits
            .binary_search_by(|s| s.mask.cmp(mask))
            .ok()
            .map(|i| &self.splits[i])
    }

    pub fn same_universe(&self, other: &SplitSet) -> Result<()> {
        if Arc::ptr_eq(&self.universe, &other.universe) || self.universe == other.universe {
            Ok(())
        } else if self.universe.len() != other.universe.len() {
            Err(Error::UniverseMismatch(
                self.universe.len(),
                other.universe.len(),
            ))
        } else {
            Err(Error::LeafSetMismatch(describe_mismatch(
                &self.universe,
                &other.universe,
            )))
        }
    }

    /// Labels of the leaves in a mask.
    pub fn mask_labels(&self, mask: &Bits) -> Vec<&str> {
        mask.iter_ones()
            .filter(|&i| i < self.universe.len())
            .map(|i| self.universe[i].as_str())
            .collect()
    }
}

fn describe_mismatch(a: &[String], b: &[String]) -> String {
    let only_a: Vec<&str> = a
        .iter()
        .filter(|l| b.binary_search(l).is_err())
        .map(String::as_str)
        .collect();
    let only_b: Vec<&str> = b
        .iter()
        .filter(|l| a.binary_search(l).is_err())
        .map(String::as_str)
        .collect();
    format!("only in first: {only_a:?}; only in second: {only_b:?}")
}

pub fn tree_to_splits(tree: &Tree) -> SplitSet {
    tree_to_splits_in(tree, &universe_of(tree)).expect("a tree's own labels form its universe")
}

/// Splits of `tree` expressed over an explicit label universe.
pub fn tree_to_splits_in(tree: &Tree, universe: &Universe) -> Result<SplitSet> {
    let nbits = mask_bits(universe);
    let mut masks: Vec<Option<Bits>> = vec![None; tree.n_nodes()];
    let mut splits = Vec::with_capacity(tree.n_edges());
    for v in tree.postorder() {
        let mut m = Bits::zeros(nbits);
        if let Some(l) = tree.leaf_label(v) {
            let i = universe
                .binary_search_by(|u| u.as_str().cmp(l))
                .map_err(|_| Error::UnknownLabel(l.to_string()))?;
            m.set(i);
        }
        for &c in tree.children(v) {
            m.union_with(masks[c].as_ref().expect("postorder visits children first"));
        }
        if v != tree.root() {
            splits.push(Split::new(m.clone(), tree.length(v)));
        }
        masks[v] = Some(m);
    }
    Ok(SplitSet::new(universe.clone(), splits))
}

pub fn compatible(s: &Split, t: &Split) -> Result<bool> {
    if s.mask.n_words() != t.mask.n_words() {
        return Err(Error::UniverseMismatch(
            s.mask.n_words() * 64,
            t.mask.n_words() * 64,
        ));
    }
    Ok(s.compatible_with(t))
}

/// A split present in both trees, with its weight in each.
#[derive(Clone, Debug)]
pub struct SharedSplit {
    pub split: Split,
    pub weight_t: f64,
    pub weight_t2: f64,
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub universe: Universe,
    pub shared: Vec<SharedSplit>,
    pub unique_t: Vec<Split>,
    pub unique_t2: Vec<Split>,
}

/// Sorted-merge of the two split lists into shared and unique edges.
pub fn classify_edges(t: &SplitSet, t2: &SplitSet) -> Result<Classification> {
    t.same_universe(t2)?;
    let (a, b) = (t.splits(), t2.splits());
    let (mut i, mut j) = (0, 0);
    let mut shared = Vec::new();
    let mut unique_t = Vec::new();
    let mut unique_t2 = Vec::new();
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => unreachable!(),
        };
        match ord {
            Ordering::Equal => {
                shared.push(SharedSplit {
                    split: a[i].clone(),
                    weight_t: a[i].weight,
                    weight_t2: b[j].weight,
                });
                i += 1;
                j += 1;
            }
            Ordering::Less => {
                unique_t.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                unique_t2.push(b[j].clone());
                j += 1;
            }
        }
    }
    // Pendant edges: every leaf of the shared universe must be covered.
    for s in unique_t.iter().chain(unique_t2.iter()) {
        if s.is_pendant() {
            let l = s.mask.iter_ones().next().unwrap_or(0);
            return Err(Error::LeafSetMismatch(format!(
                "leaf `{}` has a pendant edge in only one tree",
                t.universe()[l]
            )));
        }
    }
    Ok(Classification {
        universe: t.universe().clone(),
        shared,
        unique_t,
        unique_t2,
    })
}

/// Unique edges of both trees hanging under one tightest shared edge.
#[derive(Clone, Debug)]
pub struct Bin {
    /// Mask of the shared edge owning the bin; `None` for the root.
    pub root: Option<Bits>,
    pub unique_t: Vec<Split>,
    pub unique_t2: Vec<Split>,
    /// `incompatible[i]` lists the indices into `unique_t2` of splits that
    /// are incompatible with `unique_t[i]`.
    pub incompatible: Vec<Vec<usize>>,
}

impl Bin {
    fn new(root: Option<Bits>) -> Self {
        Bin {
            root,
            unique_t: Vec::new(),
            unique_t2: Vec::new(),
            incompatible: Vec::new(),
        }
    }

    fn cache_incompatibility(&mut self) {
        self.incompatible = self
            .unique_t
            .iter()
            .map(|a| {
                self.unique_t2
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| !a.compatible_with(b))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
    }
}

/// Assign each unique edge to the shared edge with the fewest extra
/// downward leaves that strictly contains it; the root collects the rest.
/// Empty bins are not returned. The root bin, if present, comes first.
pub fn partition_into_bins(c: &Classification) -> Vec<Bin> {
    let owners: Vec<&SharedSplit> = c.shared.iter().filter(|s| s.split.size >= 2).collect();
    let assign = |u: &Split| -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (k, s) in owners.iter().enumerate() {
            if s.split.size > u.size && u.mask.is_subset_of(&s.split.mask) {
                let diff = s.split.size - u.size;
                if best.is_none_or(|(d, _)| diff < d) {
                    best = Some((diff, k));
                }
            }
        }
        best.map(|(_, k)| k)
    };

    // Slot 0 is the root; slot k+1 the k-th owner.
    let mut bins: Vec<Bin> = std::iter::once(Bin::new(None))
        .chain(owners.iter().map(|s| Bin::new(Some(s.split.mask.clone()))))
        .collect();
    for u in &c.unique_t {
        let slot = assign(u).map_or(0, |k| k + 1);
        bins[slot].unique_t.push(u.clone());
    }
    for u in &c.unique_t2 {
        let slot = assign(u).map_or(0, |k| k + 1);
        bins[slot].unique_t2.push(u.clone());
    }
    bins.retain(|b| !b.unique_t.is_empty() || !b.unique_t2.is_empty());
    for b in &mut bins {
        b.cache_incompatibility();
    }
    bins
}

/// Materialize a tree from a compatible split family.
pub fn splits_to_tree(s: &SplitSet) -> Result<Tree> {
    let n = s.universe().len();
    let full = Bits::from_indices(mask_bits(s.universe()), 0..n);
    let mut order: Vec<&Split> = s.splits().iter().collect();
    for sp in &order {
        if sp.mask.is_empty() || sp.mask.get(n) || sp.mask == full {
            return Err(Error::InvalidArgument(format!(
                "split {:?} is not a valid edge",
                s.mask_labels(&sp.mask)
            )));
        }
    }
    let mut have_pendant = vec![false; n];
    for sp in s.pendants() {
        have_pendant[sp.mask.iter_ones().next().expect("pendant has one leaf")] = true;
    }
    if let Some(i) = have_pendant.iter().position(|&p| !p) {
        return Err(Error::MissingPendant(s.universe()[i].clone()));
    }

    order.sort_by(|a, b| b.size.cmp(&a.size).then_with(|| a.mask.cmp(&b.mask)));
    let mut builder = TreeBuilder::new();
    let mut owner = vec![builder.root(); n];
    for sp in order {
        let mut leaves = sp.mask.iter_ones();
        let first = leaves.next().expect("nonempty");
        let parent = owner[first];
        if sp.mask.iter_ones().any(|l| owner[l] != parent) {
            return Err(Error::IncompatibleSplits);
        }
        let id = if sp.size == 1 {
            builder.add_leaf(parent, s.universe()[first].clone(), sp.weight)
        } else {
            builder.add_internal(parent, sp.weight)
        };
        for l in sp.mask.iter_ones() {
            owner[l] = id;
        }
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::{parse_newick, write_newick};
    use proptest::prelude::*;

    fn split_labels(s: &SplitSet) -> Vec<String> {
        let mut v: Vec<String> = s
            .splits()
            .iter()
            .map(|sp| s.mask_labels(sp.mask()).join(""))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn three_leaf_splits() {
        let s = tree_to_splits(&parse_newick("((A,B),C);").unwrap());
        assert_eq!(split_labels(&s), vec!["A", "AB", "B", "C"]);
        assert_eq!(mask_bits(s.universe()), 4);
        for sp in s.splits() {
            assert!(!sp.mask().get(3), "Z bit must stay clear");
        }
    }

    #[test]
    fn two_leaf_and_balanced() {
        let s = tree_to_splits(&parse_newick("(A,B);").unwrap());
        assert_eq!(split_labels(&s), vec!["A", "B"]);
        let s = tree_to_splits(&parse_newick("((A,B),(C,D));").unwrap());
        let l = split_labels(&s);
        assert!(l.contains(&"AB".to_string()) && l.contains(&"CD".to_string()));
    }

    #[test]
    fn binary_edge_count() {
        let t = parse_newick("(((A,B),C),((D,E),F));").unwrap();
        let s = tree_to_splits(&t);
        assert_eq!(s.len(), 2 * 6 - 2);
        assert_eq!(s.internal().count(), 6 - 2);
    }

    #[test]
    fn unknown_label() {
        let t = parse_newick("((A,B),Q);").unwrap();
        let u: Universe = vec!["A".to_string(), "B".into(), "C".into()].into();
        assert!(matches!(tree_to_splits_in(&t, &u), Err(Error::UnknownLabel(_))));
    }

    fn sp(n: usize, idx: &[usize]) -> Split {
        Split::new(Bits::from_indices(n + 1, idx.iter().copied()), 1.0)
    }

    #[test]
    fn compatibility_cases() {
        // Universe A,B,C,D (+Z).
        let ab = sp(4, &[0, 1]);
        let ac = sp(4, &[0, 2]);
        let abc = sp(4, &[0, 1, 2]);
        let cd = sp(4, &[2, 3]);
        assert!(compatible(&ab, &ab).unwrap());
        assert!(!compatible(&ab, &ac).unwrap());
        assert!(compatible(&ab, &abc).unwrap());
        assert!(compatible(&ab, &cd).unwrap());
        let far = sp(100, &[0, 1]);
        assert!(compatible(&ab, &far).is_err());
    }

    #[test]
    fn classify_nni_pair() {
        let t = tree_to_splits(&parse_newick("((A,B),C,D);").unwrap());
        let t2 = tree_to_splits(&parse_newick("((A,C),B,D);").unwrap());
        let c = classify_edges(&t, &t2).unwrap();
        assert_eq!(c.shared.len(), 4);
        assert!(c.shared.iter().all(|s| s.split.is_pendant()));
        assert_eq!(c.unique_t.len(), 1);
        assert_eq!(c.unique_t2.len(), 1);
    }

    #[test]
    fn classify_identical() {
        let t = tree_to_splits(&parse_newick("(((A,B),C),(D,E));").unwrap());
        let c = classify_edges(&t, &t).unwrap();
        assert_eq!(c.shared.len(), t.len());
        assert!(c.unique_t.is_empty() && c.unique_t2.is_empty());
        assert!(partition_into_bins(&c).is_empty());
    }

    #[test]
    fn classify_disjoint_five_leaves() {
        // Internal splits: {A,B},{A,B,C},{D,E} vs {A,E},{A,D,E},{B,C};
        // no internal split appears in both.
        let t = tree_to_splits(&parse_newick("(((A,B),C),(D,E));").unwrap());
        let t2 = tree_to_splits(&parse_newick("(((A,E),D),(B,C));").unwrap());
        let c = classify_edges(&t, &t2).unwrap();
        assert_eq!(c.shared.len(), 5);
        assert!(c.shared.iter().all(|s| s.split.is_pendant()));
        let bins = partition_into_bins(&c);
        assert_eq!(bins.len(), 1);
        assert!(bins[0].root.is_none());
    }

    #[test]
    fn leaf_set_mismatch() {
        let t = tree_to_splits(&parse_newick("((A,B),C);").unwrap());
        let t2 = tree_to_splits(&parse_newick("((A,B),D);").unwrap());
        assert!(classify_edges(&t, &t2).is_err());
        let t3 = tree_to_splits(&parse_newick("((A,B),(C,D));").unwrap());
        assert!(matches!(
            classify_edges(&t, &t3),
            Err(Error::UniverseMismatch(3, 4))
        ));
    }

    #[test]
    fn two_bins_around_shared_clade() {
        // Shared internal edge {A,B,C} only; inside it {A,B} vs {B,C}.
        let t = tree_to_splits(&parse_newick("((((A,B),C),D),(E,F));").unwrap());
        let t2 = tree_to_splits(&parse_newick("(((A,(B,C)),E),(D,F));").unwrap());
        let c = classify_edges(&t, &t2).unwrap();
        let bins = partition_into_bins(&c);
        assert_eq!(bins.len(), 2);
        assert!(bins[0].root.is_none());
        let inner = &bins[1];
        let names = |v: &[Split]| -> Vec<String> {
            v.iter().map(|s| t.mask_labels(s.mask()).join("")).collect()
        };
        assert_eq!(names(&inner.unique_t), vec!["AB"]);
        assert_eq!(names(&inner.unique_t2), vec!["BC"]);
        assert_eq!(names(&bins[0].unique_t), vec!["ABCD", "EF"]);
        assert_eq!(names(&bins[0].unique_t2), vec!["ABCE", "DF"]);
        assert_eq!(inner.incompatible, vec![vec![0]]);
    }

    #[test]
    fn splits_to_tree_cases() {
        let t = parse_newick("((A:1,B:2):3,C:4);").unwrap();
        let s = tree_to_splits(&t);
        assert_eq!(write_newick(&splits_to_tree(&s).unwrap()), write_newick(&t));

        let u: Universe = vec!["A".to_string(), "B".into(), "C".into(), "D".into()].into();
        let pend: Vec<Split> = (0..4).map(|i| sp(4, &[i])).collect();
        let star = splits_to_tree(&SplitSet::new(u.clone(), pend.clone())).unwrap();
        assert_eq!(write_newick(&star), "(A:1,B:1,C:1,D:1);");

        let mut bad = pend.clone();
        bad.push(sp(4, &[0, 1]));
        bad.push(sp(4, &[0, 2]));
        assert!(matches!(
            splits_to_tree(&SplitSet::new(u.clone(), bad)),
            Err(Error::IncompatibleSplits)
        ));
        assert!(matches!(
            splits_to_tree(&SplitSet::new(u, pend[..3].to_vec())),
            Err(Error::MissingPendant(l)) if l == "D"
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_random_trees(n in 2usize..=100, seed in any::<u64>()) {
            let t = crate::simulate::random_tree(n, seed);
            let s = tree_to_splits(&t);
            prop_assert_eq!(s.len(), 2 * n - 2);
            let back = splits_to_tree(&s).unwrap();
            let s2 = tree_to_splits(&back);
            prop_assert_eq!(s.splits(), s2.splits());
            for (x, y) in s.splits().iter().zip(s2.splits()) {
                prop_assert_eq!(x.weight, y.weight);
            }
        }

        #[test]
        fn splits_of_one_tree_are_compatible(n in 2usize..40, seed in any::<u64>(), seed2 in any::<u64>()) {
            let s = tree_to_splits(&crate::simulate::random_tree(n, seed));
            let other = tree_to_splits(&crate::simulate::random_tree(n, seed2));
            for a in s.splits() {
                for b in s.splits() {
                    prop_assert!(a.compatible_with(b));
                }
                for b in other.splits() {
                    prop_assert_eq!(a.compatible_with(b), b.compatible_with(a));
                }
            }
        }

        #[test]
        fn bins_account_for_every_edge(n in 3usize..30, seed in any::<u64>(), seed2 in any::<u64>()) {
            let s = tree_to_splits(&crate::simulate::random_tree(n, seed));
            let s2 = tree_to_splits(&crate::simulate::random_tree(n, seed2));
            let c = classify_edges(&s, &s2).unwrap();
            let bins = partition_into_bins(&c);
            let in_bins_t: usize = bins.iter().map(|b| b.unique_t.len()).sum();
            let in_bins_t2: usize = bins.iter().map(|b| b.unique_t2.len()).sum();
            prop_assert_eq!(c.shared.len() + in_bins_t, s.len());
            prop_assert_eq!(c.shared.len() + in_bins_t2, s2.len());
            let mut seen = std::collections::HashSet::new();
            for b in &bins {
                for x in b.unique_t.iter().chain(&b.unique_t2) {
                    prop_assert!(seen.insert((x.mask().clone(), s.get(x.mask()).is_some())));
                }
                for (i, x) in b.unique_t.iter().enumerate() {
                    for y in &b.unique_t {
                        prop_assert!(x.compatible_with(y));
                    }
                    for (j, y) in b.unique_t2.iter().enumerate() {
                        prop_assert_eq!(!x.compatible_with(y), b.incompatible[i].contains(&j));
                    }
                }
            }
            // Splits in different bins never conflict.
            for (bi, b) in bins.iter().enumerate() {
                for (bj, o) in bins.iter().enumerate() {
                    if bi == bj { continue; }
                    for x in &b.unique_t {
                        for y in &o.unique_t2 {
                            prop_assert!(x.compatible_with(y));
                        }
                    }
                }
            }
        }
    }
}
