//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treespace::tree::{Tree, TreeBuilder};

/// Clades of every non-root node as bitmasks over the sorted labels, with
/// their branch lengths. Written against the public tree API only.
pub fn clades(t: &Tree) -> BTreeMap<u64, f64> {
    let labels = t.sorted_labels();
    assert!(labels.len() <= 64);
    let bit = |l: &str| 1u64 << labels.iter().position(|x| x == l).unwrap();
    let mut mask = vec![0u64; t.n_nodes()];
    let mut out = BTreeMap::new();
    for v in t.postorder() {
        mask[v] = match t.leaf_label(v) {
            Some(l) => bit(l),
            None => t.children(v).iter().map(|&c| mask[c]).fold(0, |a, b| a | b),
        };
        if v != t.root() {
            *out.entry(mask[v]).or_insert(0.0) += t.length(v);
        }
    }
    out
}

fn compatible(x: u64, y: u64) -> bool {
    let i = x & y;
    i == 0 || i == x || i == y
}

fn norm(ws: &[f64]) -> f64 {
    ws.iter().map(|w| w * w).sum::<f64>().sqrt()
}

/// Geodesic distance by exhaustive search: the minimum of
/// `sqrt(sum (|A_i| + |B_i|)^2 + shared)` over every ordered support
/// `(A_1, B_1) .. (A_k, B_k)` of the unique splits that partitions both
/// sides, keeps `A_i` compatible with `B_j` for `i > j`, and has
/// nondecreasing `|A_i| / |B_i|`. A leading pair may have empty `A` and a
/// trailing pair empty `B`. Feasible for a handful of unique splits.
pub fn brute_force_distance(t: &Tree, t2: &Tree) -> f64 {
    assert_eq!(t.sorted_labels(), t2.sorted_labels());
    let c1 = clades(t);
    let c2 = clades(t2);
    let mut shared = 0.0;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (&m, &w) in &c1 {
        match c2.get(&m) {
            Some(&w2) => shared += (w - w2) * (w - w2),
            None if w > 0.0 => a.push((m, w)),
            None => {}
        }
    }
    for (&m, &w) in &c2 {
        if !c1.contains_key(&m) && w > 0.0 {
            b.push((m, w));
        }
    }
    assert!(a.len() + b.len() <= 12, "too many unique splits for the oracle");
    let mut best = f64::INFINITY;
    for k in 0..=a.len().min(b.len()) {
        // Slot k of `fa` is the trailing pair; slot k of `fb` the leading one.
        let mut fa = vec![0usize; a.len()];
        loop {
            let mut fb = vec![0usize; b.len()];
            loop {
                if let Some(v) = evaluate(&a, &b, &fa, &fb, k) {
                    best = best.min(v);
                }
                if !step(&mut fb, k + 1) {
                    break;
                }
            }
            if !step(&mut fa, k + 1) {
                break;
            }
        }
    }
    (best + shared).sqrt()
}

/// Odometer increment in base `base`; false after the last value.
fn step(d: &mut [usize], base: usize) -> bool {
    for x in d.iter_mut() {
        *x += 1;
        if *x < base {
            return true;
        }
        *x = 0;
    }
    false
}

/// Squared length of one labelled support, or `None` if it is not valid.
/// Pair order: leading `(∅, B)` = position 0, middle pairs 1..=k,
/// trailing `(A, ∅)` = position k + 1.
fn evaluate(a: &[(u64, f64)], b: &[(u64, f64)], fa: &[usize], fb: &[usize], k: usize) -> Option<f64> {
    let pos_a = |s: usize| if s == k { k + 1 } else { s + 1 };
    let pos_b = |s: usize| if s == k { 0 } else { s + 1 };
    let mut wa = vec![Vec::new(); k + 2];
    let mut wb = vec![Vec::new(); k + 2];
    for (i, &(_, w)) in a.iter().enumerate() {
        wa[pos_a(fa[i])].push(w);
    }
    for (j, &(_, w)) in b.iter().enumerate() {
        wb[pos_b(fb[j])].push(w);
    }
    if (1..=k).any(|p| wa[p].is_empty() || wb[p].is_empty()) {
        return None;
    }
    for (i, &(ma, _)) in a.iter().enumerate() {
        for (j, &(mb, _)) in b.iter().enumerate() {
            if pos_a(fa[i]) > pos_b(fb[j]) && !compatible(ma, mb) {
                return None;
            }
        }
    }
    let ratios: Vec<f64> = (1..=k).map(|p| norm(&wa[p]) / norm(&wb[p])).collect();
    if ratios.windows(2).any(|r| r[0] > r[1]) {
        return None;
    }
    Some(
        (0..k + 2)
            .map(|p| {
                let s = norm(&wa[p]) + norm(&wb[p]);
                s * s
            })
            .sum(),
    )
}

/// Random rooted tree by recursive uniform splitting of the label set, with
/// uniform(0, 1) edge lengths and labels `t1..tn` in shuffled order.
pub fn rtree(n: usize, rng: &mut ChaCha8Rng) -> Tree {
    assert!(n >= 2);
    let mut labels: Vec<String> = (1..=n).map(|i| format!("t{i}")).collect();
    labels.shuffle(rng);
    let mut b = TreeBuilder::new();
    let mut stack = vec![(b.root(), labels)];
    while let Some((node, set)) = stack.pop() {
        let cut = rng.random_range(1..set.len());
        let (l, r) = set.split_at(cut);
        for half in [l, r] {
            let len: f64 = rng.random();
            if half.len() == 1 {
                b.add_leaf(node, half[0].clone(), len);
            } else {
                let v = b.add_internal(node, len);
                stack.push((v, half.to_vec()));
            }
        }
    }
    b.finish().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every rooted binary topology on `labels`, as Newick with one `{}` slot
/// per internal edge length (pendants fixed at 1).
pub fn rooted_topologies(labels: &[&str]) -> Vec<String> {
    fn sub(labels: &[&str]) -> Vec<String> {
        if labels.len() == 1 {
            return vec![format!("{}:1", labels[0])];
        }
        let mut out = Vec::new();
        for (l, r) in bipartitions(labels) {
            for x in sub(&l) {
                for y in sub(&r) {
                    let wrap = |s: String, n: usize| if n == 1 { s } else { format!("({s}):{{}}") };
                    out.push(format!("{},{}", wrap(x.clone(), l.len()), wrap(y, r.len())));
                }
            }
        }
        out
    }
    /// Unordered splits into two nonempty parts; the first part holds
    /// `labels[0]`.
    fn bipartitions<'a>(labels: &[&'a str]) -> Vec<(Vec<&'a str>, Vec<&'a str>)> {
        let n = labels.len();
        (0..1u32 << (n - 1))
            .filter(|&m| m != (1 << (n - 1)) - 1)
            .map(|m| {
                let mut l = vec![labels[0]];
                let mut r = Vec::new();
                for (i, &x) in labels[1..].iter().enumerate() {
                    if m >> i & 1 == 1 {
                        l.push(x);
                    } else {
                        r.push(x);
                    }
                }
                (l, r)
            })
            .collect()
    }
    sub(labels).into_iter().map(|s| format!("({s});")).collect()
}

/// Copy of `t` with every branch length replaced by `f(old)`.
pub fn reweight(t: &Tree, mut f: impl FnMut(f64) -> f64) -> Tree {
    let mut b = TreeBuilder::new();
    let mut id = vec![0usize; t.n_nodes()];
    id[t.root()] = b.root();
    for v in t.preorder() {
        if v == t.root() {
            continue;
        }
        let p = id[t.parent(v).unwrap()];
        let len = f(t.length(v));
        id[v] = match t.leaf_label(v) {
            Some(l) => b.add_leaf(p, l, len),
            None => b.add_internal(p, len),
        };
    }
    b.finish().unwrap()
}

pub fn fill(template: &str, ws: &[f64]) -> String {
    let mut s = template.to_string();
    for w in ws {
        s = s.replacen("{}", &w.to_string(), 1);
    }
    s
}
