//! Newick reading and writing.
//!
//! Branch lengths that are absent default to `1.0`. A length on the root
//! itself is accepted and discarded, as are internal node labels and
//! bracketed comments. Output is canonical: children are ordered by the
//! smallest leaf label they contain and lengths use the shortest decimal
//! representation that round-trips.

use crate::error::{Error, Result};
use crate::tree::{NodeId, Tree, TreeBuilder};

pub const DEFAULT_BRANCH_LENGTH: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Collapse zero-length internal edges into multifurcations.
    pub collapse_zero: bool,
}

pub fn parse_newick(text: &str) -> Result<Tree> {
    parse_newick_with(text, ParseOptions::default())
}

pub fn parse_newick_with(text: &str, opts: ParseOptions) -> Result<Tree> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        builder: TreeBuilder::new(),
    };
    p.skip_ws();
    if p.peek().is_none() {
        return Err(Error::newick(0, "empty input"));
    }
    let root = p.builder.root();
    p.subtree_into(root, true)?;
    p.skip_ws();
    match p.peek() {
        Some(b';') => p.pos += 1,
        Some(b')') => return Err(Error::newick(p.pos, "unbalanced parentheses: unexpected ')'")),
        Some(c) => {
            return Err(Error::newick(
                p.pos,
                format!("unexpected character '{}'", c as char),
            ))
        }
        None => return Err(Error::newick(p.pos, "missing terminating ';'")),
    }
    p.skip_ws();
    if p.peek().is_some() {
        return Err(Error::newick(
            p.pos,
            "trailing content after ';' (expected a single tree)",
        ));
    }
    let tree = p.builder.finish()?;
    Ok(if opts.collapse_zero {
        tree.collapse_zero_edges()
    } else {
        tree
    })
}

/// Parse a file holding several `;`-terminated trees. Lines starting with
/// `#` are metadata and skipped.
pub fn parse_newick_multi(text: &str, opts: ParseOptions) -> Result<Vec<Tree>> {
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    split_statements(&body)
        .into_iter()
        .map(|s| parse_newick_with(s, opts))
        .collect()
}

fn split_statements(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut in_quote = false;
    let mut in_comment = false;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'\'' if !in_comment => in_quote = !in_quote,
            b'[' if !in_quote => in_comment = true,
            b']' if !in_quote => in_comment = false,
            b';' if !in_quote && !in_comment => {
                out.push(&text[start..=i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(&text[start..]);
    }
    out.retain(|s| !s.trim().is_empty());
    out
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    builder: TreeBuilder,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    while let Some(c) = self.peek() {
                        self.pos += 1;
                        if c == b']' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    /// Parse one subtree. `node` is the builder node it fills when `is_root`,
    /// otherwise its parent.
    fn subtree_into(&mut self, node: NodeId, is_root: bool) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let open = self.pos;
            self.pos += 1;
            let target = if is_root {
                node
            } else {
                self.builder.add_internal(node, DEFAULT_BRANCH_LENGTH)
            };
            loop {
                self.subtree_into(target, false)?;
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    None | Some(b';') => {
                        return Err(Error::newick(
                            open,
                            "unbalanced parentheses: '(' never closed",
                        ))
                    }
                    Some(c) => {
                        return Err(Error::newick(
                            self.pos,
                            format!("unexpected character '{}'", c as char),
                        ))
                    }
                }
            }
            // Internal label (e.g. support value), ignored.
            self.label()?;
            let len = self.length()?;
            if !is_root {
                if let Some(l) = len {
                    self.builder.set_length(target, l);
                }
            }
            Ok(())
        } else {
            let start = self.pos;
            let label = self
                .label()?
                .ok_or_else(|| Error::newick(start, "leaf without a label"))?;
            let len = self.length()?.unwrap_or(DEFAULT_BRANCH_LENGTH);
            if is_root {
                return Err(Error::TooFewLeaves { needed: 2, got: 1 });
            }
            self.builder.add_leaf(node, label, len);
            Ok(())
        }
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        match self.peek() {
            Some(b'\'') => {
                let start = self.pos;
                self.pos += 1;
                let mut s = Vec::new();
                loop {
                    match self.peek() {
                        None => return Err(Error::newick(start, "unterminated quoted label")),
                        Some(b'\'') => {
                            self.pos += 1;
                            if self.peek() == Some(b'\'') {
                                s.push(b'\'');
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                        Some(c) => {
                            s.push(c);
                            self.pos += 1;
                        }
                    }
                }
                String::from_utf8(s)
                    .map(Some)
                    .map_err(|_| Error::newick(start, "label is not valid UTF-8"))
            }
            _ => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if matches!(c, b'(' | b')' | b',' | b':' | b';' | b'[' | b'\'')
                        || c.is_ascii_whitespace()
                    {
                        break;
                    }
                    self.pos += 1;
                }
                if self.pos == start {
                    Ok(None)
                } else {
                    let raw = std::str::from_utf8(&self.src[start..self.pos])
                        .map_err(|_| Error::newick(start, "label is not valid UTF-8"))?;
                    Ok(Some(raw.replace('_', " ")))
                }
            }
        }
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_ws();
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let raw = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::newick(start, format!("invalid branch length `{raw}`")))?;
        if !v.is_finite() {
            return Err(Error::newick(start, "non-finite branch length"));
        }
        if v < 0.0 {
            return Err(Error::NegativeLength(v));
        }
        Ok(Some(v))
    }
}

/// Canonical Newick with branch lengths.
pub fn write_newick(tree: &Tree) -> String {
    write_impl(tree, true)
}

/// Canonical Newick without branch lengths (topology only).
pub fn write_topology(tree: &Tree) -> String {
    write_impl(tree, false)
}

fn write_impl(tree: &Tree, lengths: bool) -> String {
    let mins = tree.min_labels();
    let mut out = String::new();
    write_node(tree, tree.root(), &mins, lengths, &mut out);
    out.push(';');
    out
}

fn write_node(tree: &Tree, v: NodeId, mins: &[&str], lengths: bool, out: &mut String) {
    if let Some(l) = tree.leaf_label(v) {
        out.push_str(&quote_label(l));
    } else {
        let mut kids = tree.children(v).to_vec();
        kids.sort_by(|&a, &b| mins[a].cmp(mins[b]));
        out.push('(');
        for (i, &c) in kids.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_node(tree, c, mins, lengths, out);
        }
        out.push(')');
    }
    if lengths && v != tree.root() {
        out.push(':');
        out.push_str(&format!("{}", tree.length(v)));
    }
}

fn quote_label(l: &str) -> String {
    let needs = l.chars().any(|c| "()[]',:;_".contains(c) || c.is_whitespace() && c != ' ');
    if needs {
        format!("'{}'", l.replace('\'', "''"))
    } else {
        l.replace(' ', "_")
    }
}
