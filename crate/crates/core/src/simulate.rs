//! Tree shapes and character evolution along trees.
//!
//! Random draws are keyed by `(seed, edge, site)`: every edge owns a
//! ChaCha stream and every site a fixed window within it, so the output
//! does not depend on how sites are split across threads.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::alignment::{Alignment, Alphabet};
use crate::error::{Error, Result};
use crate::tree::{Tree, TreeBuilder};

/// Label of the leaf added by `outgroup` in [`make_tree`].
pub const OUTGROUP: &str = "OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Complete binary tree; leaf count must be a power of two.
    Balanced,
    /// Caterpillar.
    Comb,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" | "bethe" => Ok(Shape::Balanced),
            "comb" | "caterpillar" => Ok(Shape::Comb),
            _ => Err(Error::InvalidArgument(format!("unknown tree shape `{s}`"))),
        }
    }
}

/// `A`..`Z` for up to 26 leaves, otherwise `t1`..`tn`.
pub fn leaf_names(n: usize) -> Vec<String> {
    if n <= 26 {
        (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
    } else {
        (1..=n).map(|i| format!("t{i}")).collect()
    }
}

/// A balanced or comb tree on `n` leaves with every edge `edge_len`.
/// With `outgroup`, a leaf named [`OUTGROUP`] hangs from a new root
/// beside the original tree.
pub fn make_tree(shape: Shape, n: usize, edge_len: f64, outgroup: bool) -> Result<Tree> {
    if !(edge_len > 0.0 && edge_len.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "edge length must be positive, got {edge_len}"
        )));
    }
    if n < 2 {
        return Err(Error::TooFewLeaves { needed: 2, got: n });
    }
    if shape == Shape::Balanced && !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "balanced tree needs a power-of-two leaf count, got {n}"
        )));
    }
    let names = leaf_names(n);
    let mut b = TreeBuilder::new();
    let top = if outgroup {
        b.add_leaf(b.root(), OUTGROUP, edge_len);
        b.add_internal(b.root(), edge_len)
    } else {
        b.root()
    };
    match shape {
        Shape::Balanced => {
            fn grow(b: &mut TreeBuilder, parent: usize, names: &[String], len: f64) {
                if names.len() == 1 {
                    b.add_leaf(parent, names[0].clone(), len);
                    return;
                }
                let (l, r) = names.split_at(names.len() / 2);
                for half in [l, r] {
                    if half.len() == 1 {
                        b.add_leaf(parent, half[0].clone(), len);
                    } else {
                        let v = b.add_internal(parent, len);
                        grow(b, v, half, len);
                    }
                }
            }
            grow(&mut b, top, &names, edge_len);
        }
        Shape::Comb => {
            // Deepest cherry holds the first two names.
            let mut parent = top;
            for k in (2..n).rev() {
                b.add_leaf(parent, names[k].clone(), edge_len);
                parent = b.add_internal(parent, edge_len);
            }
            b.add_leaf(parent, names[0].clone(), edge_len);
            b.add_leaf(parent, names[1].clone(), edge_len);
        }
    }
    b.finish()
}

/// The topology of [`make_tree`] with clock-like lengths: every leaf sits
/// at distance `height` from the root and internal nodes are evenly spaced
/// by depth, so a comb gets short inner edges and a balanced tree long
/// ones. With `outgroup`, the new root lies one depth step above the old
/// one.
pub fn clock_tree(shape: Shape, n: usize, height: f64, outgroup: bool) -> Result<Tree> {
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::InvalidArgument(format!("height must be positive, got {height}")));
    }
    let t = make_tree(shape, n, 1.0, false)?;
    let order = t.preorder();
    let mut level = vec![0usize; t.n_nodes()];
    for &v in &order[1..] {
        level[v] = level[t.parent(v).expect("non-root")] + 1;
    }
    let depth = order.iter().filter(|&&v| t.is_leaf(v)).map(|&v| level[v]).max().unwrap_or(1);
    let step = height / depth as f64;
    let node_height = |v: usize| if t.is_leaf(v) { 0.0 } else { height - level[v] as f64 * step };
    let mut b = TreeBuilder::new();
    let top = if outgroup {
        b.add_leaf(b.root(), OUTGROUP, height + step);
        b.add_internal(b.root(), step)
    } else {
        b.root()
    };
    let mut id = vec![0usize; t.n_nodes()];
    id[t.root()] = top;
    for &v in &order[1..] {
        let p = t.parent(v).expect("non-root");
        let len = node_height(p) - node_height(v);
        id[v] = match t.leaf_label(v) {
            Some(l) => b.add_leaf(id[p], l, len),
            None => b.add_internal(id[p], len),
        };
    }
    b.finish()
}

/// Grow a tree by splitting a uniformly chosen leaf until there are `n`,
/// with unit-exponential edge lengths and labels `t1..tn` assigned in
/// random order.
pub fn random_tree(n: usize, seed: u64) -> Tree {
    assert!(n >= 2, "random_tree needs at least 2 leaves");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // parent[v]; node 0 is the root, leaves tracked separately.
    let mut parent: Vec<usize> = vec![usize::MAX, 0, 0];
    let mut leaves = vec![1, 2];
    while leaves.len() < n {
        let k = rng.random_range(0..leaves.len());
        let v = leaves.swap_remove(k);
        let c = parent.len();
        parent.push(v);
        parent.push(v);
        leaves.push(c);
        leaves.push(c + 1);
    }
    let lengths: Vec<f64> = (0..parent.len()).map(|_| rng.sample(Exp1)).collect();
    let mut names: Vec<String> = (1..=n).map(|i| format!("t{i}")).collect();
    names.shuffle(&mut rng);
    leaves.sort_unstable();
    let mut is_leaf = vec![None; parent.len()];
    for (k, &v) in leaves.iter().enumerate() {
        is_leaf[v] = Some(k);
    }

    // Parents always precede children, so one pass builds the tree.
    let mut b = TreeBuilder::new();
    let mut id = vec![0; parent.len()];
    for v in 1..parent.len() {
        let p = id[parent[v]];
        id[v] = match is_leaf[v] {
            Some(k) => b.add_leaf(p, names[k].clone(), lengths[v]),
            None => b.add_internal(p, lengths[v]),
        };
    }
    b.finish().expect("random tree is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Two-state symmetric (Cavender-Farris-Neyman).
    Cfn,
    /// Four-state Jukes-Cantor.
    Jc69,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cfn" => Ok(ModelKind::Cfn),
            "jc69" | "jc" => Ok(ModelKind::Jc69),
            _ => Err(Error::InvalidArgument(format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionModel {
    pub kind: ModelKind,
    /// Substitution rate per unit branch length.
    pub rate: f64,
}

impl EvolutionModel {
    pub fn new(kind: ModelKind, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || rate.is_nan() {
            return Err(Error::InvalidArgument(format!("rate must be nonnegative, got {rate}")));
        }
        Ok(EvolutionModel { kind, rate })
    }

    pub fn alphabet(&self) -> Alphabet {
        match self.kind {
            ModelKind::Cfn => Alphabet::Binary,
            ModelKind::Jc69 => Alphabet::Dna,
        }
    }

    /// Probability that the state at the end of an edge of length `t`
    /// differs from the start.
    pub fn change_probability(&self, t: f64) -> f64 {
        let x = self.rate * t;
        match self.kind {
            ModelKind::Cfn => -0.5 * (-2.0 * x).exp_m1(),
            ModelKind::Jc69 => -0.75 * (-4.0 * x / 3.0).exp_m1(),
        }
    }
}

/// Two 64-bit draws per site: one decides whether the state changes, the
/// other picks the new state.
const WORDS_PER_SITE: u128 = 4;
const SITE_CHUNK: usize = 256;

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index below `n` by multiply-shift.
fn below(x: u64, n: u64) -> u64 {
    ((x as u128 * n as u128) >> 64) as u64
}

/// Simulate `length` sites along `tree`. Rows follow the sorted leaf
/// labels.
pub fn evolve(tree: &Tree, model: &EvolutionModel, length: usize, seed: u64) -> Result<Alignment> {
    if length == 0 {
        return Err(Error::InvalidArgument("alignment length must be at least 1".into()));
    }
    let k = model.alphabet().size() as u64;
    let order = tree.preorder();
    let p_change: Vec<f64> = (0..tree.n_nodes())
        .map(|v| model.change_probability(tree.length(v)))
        .collect();
    let n_chunks = length.div_ceil(SITE_CHUNK);
    // states[chunk][node][site-in-chunk]
    let chunks: Vec<Vec<Vec<u8>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SITE_CHUNK;
            let hi = (lo + SITE_CHUNK).min(length);
            let mut states = vec![vec![0u8; hi - lo]; tree.n_nodes()];
            let root = tree.root();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0);
            rng.set_word_pos(lo as u128 * WORDS_PER_SITE);
            for s in 0..hi - lo {
                let x = rng.next_u64();
                let _ = rng.next_u64();
                states[root][s] = below(x, k) as u8;
            }
            for &v in &order {
                let Some(p) = tree.parent(v) else { continue };
                rng.set_stream(v as u64 + 1);
                rng.set_word_pos(lo as u128 * WORDS_PER_SITE);
                for s in 0..hi - lo {
                    let change = unit(rng.next_u64()) < p_change[v];
                    let pick = rng.next_u64();
                    let from = states[p][s];
                    states[v][s] = if change {
                        // Uniform among the other k - 1 states.
                        let r = below(pick, k - 1) as u8;
                        if r >= from {
                            r + 1
                        } else {
                            r
                        }
                    } else {
                        from
                    };
                }
            }
            states
        })
        .collect();
    let mut leaves: Vec<(String, usize)> = (0..tree.n_nodes())
        .filter_map(|v| tree.leaf_label(v).map(|l| (l.to_string(), v)))
        .collect();
    leaves.sort();
    let rows = leaves
        .iter()
        .map(|&(_, v)| chunks.iter().flat_map(|c| c[v].iter().copied()).collect())
        .collect();
    Alignment::new(leaves.into_iter().map(|(l, _)| l).collect(), model.alphabet(), rows)
}
