//! Rooted, weighted, leaf-labelled trees.
//!
//! A [`Tree`] is an arena of nodes. Leaves carry unique labels, every
//! non-root node carries the length of the edge to its parent. Internal
//! non-root nodes always have at least two children; unary nodes are
//! suppressed during construction by merging edge lengths.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub(crate) parent: Option<usize>,
    pub(crate) children: Vec<usize>,
    pub(crate) length: f64,
    pub(crate) leaf: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
    labels: Vec<String>,
    root: usize,
}

/// Incremental construction of a [`Tree`]. Validation happens in
/// [`TreeBuilder::finish`].
#[derive(Debug, Default)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
    labels: Vec<String>,
}

pub type NodeId = usize;

impl TreeBuilder {
    pub fn new() -> Self {
        let mut b = TreeBuilder::default();
        b.nodes.push(Node {
            parent: None,
            children: Vec::new(),
            length: 0.0,
            leaf: None,
        });
        b
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn add_internal(&mut self, parent: NodeId, length: f64) -> NodeId {
        self.push(parent, length, None)
    }

    pub fn add_leaf(&mut self, parent: NodeId, label: impl Into<String>, length: f64) -> NodeId {
        let idx = self.labels.len();
        self.labels.push(label.into());
        self.push(parent, length, Some(idx))
    }

    pub fn set_length(&mut self, v: NodeId, length: f64) {
        self.nodes[v].length = length;
    }

    fn push(&mut self, parent: NodeId, length: f64, leaf: Option<usize>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            length,
            leaf,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn finish(self) -> Result<Tree> {
        let TreeBuilder { nodes, labels } = self;
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        for n in nodes.iter().skip(1) {
            if !n.length.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite branch length {}",
                    n.length
                )));
            }
            if n.length < 0.0 {
                return Err(Error::NegativeLength(n.length));
            }
        }
        if labels.len() < 2 {
            return Err(Error::TooFewLeaves {
                needed: 2,
                got: labels.len(),
            });
        }
        Ok(compact(nodes, labels, 0))
    }
}

/// Rebuild a node arena in preorder from `root`, dropping childless
/// internal nodes and suppressing unary ones.
fn compact(nodes: Vec<Node>, labels: Vec<String>, root: usize) -> Tree {
    // Count leaves under each node to drop empty internal subtrees.
    let mut has_leaf = vec![false; nodes.len()];
    let order = preorder_from(&nodes, root);
    for &v in order.iter().rev() {
        has_leaf[v] = nodes[v].leaf.is_some() || nodes[v].children.iter().any(|&c| has_leaf[c]);
    }

    // Effective root: descend while the root has a single useful child.
    let mut top = root;
    loop {
        let useful: Vec<usize> = nodes[top]
            .children
            .iter()
            .copied()
            .filter(|&c| has_leaf[c])
            .collect();
        if useful.len() == 1 && nodes[top].leaf.is_none() && nodes[useful[0]].leaf.is_none() {
            top = useful[0];
        } else {
            break;
        }
    }

    let mut out: Vec<Node> = Vec::with_capacity(nodes.len());
    out.push(Node {
        parent: None,
        children: Vec::new(),
        length: 0.0,
        leaf: nodes[top].leaf,
    });
    // (old node, new parent, accumulated length)
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for &c in nodes[top].children.iter().rev() {
        if has_leaf[c] {
            stack.push((c, 0));
        }
    }
    while let Some((old, new_parent)) = stack.pop() {
        let mut cur = old;
        let mut len = nodes[cur].length;
        // Skip unary chains.
        loop {
            let useful: Vec<usize> = nodes[cur]
                .children
                .iter()
                .copied()
                .filter(|&c| has_leaf[c])
                .collect();
            if nodes[cur].leaf.is_none() && useful.len() == 1 {
                cur = useful[0];
                len += nodes[cur].length;
            } else {
                break;
            }
        }
        let id = out.len();
        out.push(Node {
            parent: Some(new_parent),
            children: Vec::new(),
            length: len,
            leaf: nodes[cur].leaf,
        });
        out[new_parent].children.push(id);
        for &c in nodes[cur].children.iter().rev() {
            if has_leaf[c] {
                stack.push((c, id));
            }
        }
    }
    // The stack reverses children; restore original order.
    for n in &mut out {
        n.children.sort_unstable();
    }

    // Reindex labels in preorder.
    let mut new_labels = Vec::with_capacity(labels.len());
    for n in &mut out {
        if let Some(l) = n.leaf {
            n.leaf = Some(new_labels.len());
            new_labels.push(labels[l].clone());
        }
    }
    Tree {
        nodes: out,
        labels: new_labels,
        root: 0,
    }
}

fn preorder_from(nodes: &[Node], root: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        for &c in nodes[v].children.iter().rev() {
            stack.push(c);
        }
    }
    order
}

impl Tree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    /// Leaf labels in preorder of the leaves.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sorted_labels(&self) -> Vec<String> {
        let mut l = self.labels.clone();
        l.sort();
        l
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v].children
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    /// Length of the edge above `v` (zero for the root).
    pub fn length(&self, v: NodeId) -> f64 {
        self.nodes[v].length
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v].leaf.is_some()
    }

    pub fn leaf_label(&self, v: NodeId) -> Option<&str> {
        self.nodes[v].leaf.map(|i| self.labels[i].as_str())
    }

    /// Number of edges, i.e. of non-root nodes.
    pub fn n_edges(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn preorder(&self) -> Vec<NodeId> {
        preorder_from(&self.nodes, self.root)
    }

    pub fn postorder(&self) -> Vec<NodeId> {
        let mut o = self.preorder();
        o.reverse();
        o
    }

    pub fn is_binary(&self) -> bool {
        self.nodes.iter().all(|n| n.leaf.is_some() || n.children.len() == 2)
    }

    /// Multiply every branch length by `c`.
    pub fn scaled(&self, c: f64) -> Tree {
        let mut t = self.clone();
        for n in &mut t.nodes {
            n.length *= c;
        }
        t
    }

    /// Collapse internal edges of length exactly zero into multifurcations.
    pub fn collapse_zero_edges(&self) -> Tree {
        let mut nodes = self.nodes.clone();
        for v in self.postorder() {
            let n = &self.nodes[v];
            if v == self.root || n.leaf.is_some() || n.length != 0.0 {
                continue;
            }
            let p = nodes[v].parent.expect("non-root has a parent");
            let kids = std::mem::take(&mut nodes[v].children);
            for &k in &kids {
                nodes[k].parent = Some(p);
            }
            let pos = nodes[p]
                .children
                .iter()
                .position(|&c| c == v)
                .expect("child listed by parent");
            nodes[p].children.splice(pos..=pos, kids);
        }
        compact(nodes, self.labels.clone(), self.root)
    }

    /// Re-hang the tree so that the root sits at the node adjacent to the
    /// leaf `outgroup`. The outgroup's pendant edge then carries the whole
    /// length separating it from the rest of the tree.
    pub fn root_at_outgroup(&self, outgroup: &str) -> Result<Tree> {
        let leaf = self
            .nodes
            .iter()
            .position(|n| n.leaf.map(|i| self.labels[i].as_str()) == Some(outgroup))
            .ok_or_else(|| Error::UnknownLabel(outgroup.to_string()))?;

        // Undirected adjacency; a degree-2 root is spliced out.
        let n = self.nodes.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (v, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                adj[v].push((p, node.length));
                adj[p].push((v, node.length));
            }
        }
        let r = self.root;
        if adj[r].len() == 2 && self.nodes[r].leaf.is_none() {
            let (a, la) = adj[r][0];
            let (b, lb) = adj[r][1];
            adj[r].clear();
            for (x, other) in [(a, b), (b, a)] {
                let e = adj[x].iter_mut().find(|(y, _)| *y == r).expect("root neighbour");
                *e = (other, la + lb);
            }
        }
        let (hub, pend_len) = adj[leaf][0];
        if self.nodes[hub].leaf.is_some() {
            // Two-leaf tree: nothing else to hang from.
            let mut b = TreeBuilder::new();
            b.add_leaf(0, outgroup, pend_len);
            b.add_leaf(0, self.labels[self.nodes[hub].leaf.unwrap()].clone(), 0.0);
            return b.finish();
        }

        let mut b = TreeBuilder::new();
        let mut stack: Vec<(usize, usize, usize, f64)> = Vec::new(); // (old, old_from, new_parent, len)
        for &(w, len) in adj[hub].iter().rev() {
            stack.push((w, hub, 0, len));
        }
        while let Some((v, from, np, len)) = stack.pop() {
            if let Some(li) = self.nodes[v].leaf {
                b.add_leaf(np, self.labels[li].clone(), len);
                continue;
            }
            let id = b.add_internal(np, len);
            for &(w, l2) in adj[v].iter().rev() {
                if w != from {
                    stack.push((w, v, id, l2));
                }
            }
        }
        b.finish()
    }

    /// Leaf label → leaf index map.
    pub fn label_index(&self) -> HashMap<&str, usize> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }

    /// For every node, the smallest leaf label below it (used for
    /// canonical child ordering).
    pub(crate) fn min_labels(&self) -> Vec<&str> {
        let mut min: Vec<Option<&str>> = vec![None; self.nodes.len()];
        for v in self.postorder() {
            let node = &self.nodes[v];
            let mut best = node.leaf.map(|i| self.labels[i].as_str());
            for &c in &node.children {
                let m = min[c];
                if best.is_none() || (m.is_some() && m < best) {
                    best = m;
                }
            }
            min[v] = best;
        }
        min.into_iter().map(|m| m.unwrap_or("")).collect()
    }

    /// Path-length distance between every pair of leaves, indexed by leaf
    /// index.
    pub fn patristic_distances(&self) -> Vec<Vec<f64>> {
        let n = self.n_leaves();
        let mut depth = vec![0.0; self.nodes.len()];
        let order = self.preorder();
        for &v in &order {
            if let Some(p) = self.nodes[v].parent {
                depth[v] = depth[p] + self.nodes[v].length;
            }
        }
        // Leaf sets via postorder to find LCA depths.
        let mut leaf_node = vec![0; n];
        for (v, node) in self.nodes.iter().enumerate() {
            if let Some(i) = node.leaf {
                leaf_node[i] = v;
            }
        }
        let mut d = vec![vec![0.0; n]; n];
        // Ancestor chain per leaf.
        let chains: Vec<Vec<usize>> = leaf_node
            .iter()
            .map(|&v| {
                let mut c = vec![v];
                let mut cur = v;
                while let Some(p) = self.nodes[cur].parent {
                    c.push(p);
                    cur = p;
                }
                c.reverse();
                c
            })
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&chains[i], &chains[j]);
                let mut k = 0;
                while k < a.len() && k < b.len() && a[k] == b[k] {
                    k += 1;
                }
                let lca = a[k - 1];
                let dist = depth[leaf_node[i]] + depth[leaf_node[j]] - 2.0 * depth[lca];
                d[i][j] = dist;
                d[j][i] = dist;
            }
        }
        d
    }

    /// Relabel leaves through `f`.
    pub fn relabeled(&self, mut f: impl FnMut(&str) -> String) -> Result<Tree> {
        let mut t = self.clone();
        t.labels = self.labels.iter().map(|l| f(l)).collect();
        let mut seen = HashSet::new();
        for l in &t.labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(t)
    }
}
