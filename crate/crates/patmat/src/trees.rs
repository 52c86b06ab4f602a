//! Rooted, ordered, labeled trees.
//!
//! Text format: `node := label | label '(' node (',' node)* ')'`. A label is
//! either a bare token without `(`, `)`, `,`, quotes or whitespace, or a
//! double-quoted string with `\"` and `\\` escapes.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeParseError {
    #[error("empty tree text")]
    Empty,
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: &'static str },
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct LabeledTree {
    labels: Vec<String>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    root: Option<NodeId>,
}

impl LabeledTree {
    /// The empty tree θ.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn leaf(label: impl Into<String>) -> Self {
        let mut t = Self::empty();
        t.add_node(label, None);
        t
    }

    /// Appends a node. `parent` must already exist; the new node becomes its
    /// rightmost child. The first node added without a parent is the root.
    pub fn add_node(&mut self, label: impl Into<String>, parent: Option<NodeId>) -> NodeId {
        let id = self.labels.len();
        match parent {
            Some(p) => {
                assert!(p < id, "parent {p} does not exist");
                self.children[p].push(id);
            }
            None => {
                assert!(self.root.is_none(), "tree already has a root");
                self.root = Some(id);
            }
        }
        self.labels.push(label.into());
        self.parent.push(parent);
        self.children.push(Vec::new());
        id
    }

    /// Builds a tree from a parent array; `parents[i]` must be `None` for
    /// exactly one node. Children keep increasing id order.
    pub fn from_parents(labels: Vec<String>, parents: &[Option<NodeId>]) -> Self {
        assert_eq!(labels.len(), parents.len());
        let n = labels.len();
        let mut children = vec![Vec::new(); n];
        let mut root = None;
        for (v, p) in parents.iter().enumerate() {
            match p {
                Some(p) => children[*p].push(v),
                None => {
                    assert!(root.is_none(), "more than one root");
                    root = Some(v);
                }
            }
        }
        assert!(n == 0 || root.is_some(), "no root");
        let t = LabeledTree { labels, parent: parents.to_vec(), children, root };
        assert_eq!(t.walk_pre().len(), n, "parent array has a cycle");
        t
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root.expect("empty tree has no root")
    }

    pub fn root_opt(&self) -> Option<NodeId> {
        self.root
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v].is_empty()
    }

    /// Nodes in preorder.
    pub fn walk_pre(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack: Vec<NodeId> = self.root.into_iter().collect();
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        out
    }

    /// Nodes in postorder.
    pub fn walk_post(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack: Vec<(NodeId, usize)> = self.root.into_iter().map(|r| (r, 0)).collect();
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if *i < self.children[v].len() {
                let c = self.children[v][*i];
                *i += 1;
                stack.push((c, 0));
            } else {
                out.push(v);
                stack.pop();
            }
        }
        out
    }

    /// Leaves from left to right.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.walk_pre().into_iter().filter(|&v| self.is_leaf(v)).collect()
    }

    /// Copy of the subtree rooted at `v`, renumbered in preorder.
    pub fn subtree(&self, v: NodeId) -> LabeledTree {
        let mut t = LabeledTree::empty();
        let mut stack = vec![(v, None)];
        while let Some((u, p)) = stack.pop() {
            let id = t.add_node(self.labels[u].clone(), p);
            // push reversed so the leftmost child is added first
            for &c in self.children[u].iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        // add_node appends children in pop order, which is left to right
        t
    }

    /// Same tree with node `v` deleted: its children take its place.
    pub fn delete_node(&self, v: NodeId) -> LabeledTree {
        assert!(Some(v) != self.root || self.children[v].len() == 1, "cannot delete this root");
        let mut t = LabeledTree::empty();
        let start = if Some(v) == self.root { self.children[v][0] } else { self.root() };
        let mut stack = vec![(start, None)];
        while let Some((u, p)) = stack.pop() {
            let id = t.add_node(self.labels[u].clone(), p);
            let mut kids = Vec::new();
            for &c in &self.children[u] {
                if c == v {
                    kids.extend(self.children[v].iter().copied());
                } else {
                    kids.push(c);
                }
            }
            for &c in kids.iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        t
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, msg: &'static str) -> TreeParseError {
        TreeParseError::Syntax { offset: self.pos, msg }
    }

    fn label(&mut self) -> Result<String, TreeParseError> {
        self.ws();
        if self.s.get(self.pos) == Some(&b'"') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.s.get(self.pos) {
                    None => return Err(self.err("unterminated quoted label")),
                    Some(b'"') => {
                        self.pos += 1;
                        break;
                    }
                    Some(b'\\') => {
                        self.pos += 1;
                        match self.s.get(self.pos) {
                            Some(&c) => out.push(c),
                            None => return Err(self.err("dangling escape")),
                        }
                        self.pos += 1;
                    }
                    Some(&c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return String::from_utf8(out).map_err(|_| self.err("invalid utf-8 in label"));
        }
        let start = self.pos;
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            if matches!(c, b'(' | b')' | b',' | b'"') || c.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a label"));
        }
        Ok(std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string())
    }

    fn node(&mut self, t: &mut LabeledTree, parent: Option<NodeId>) -> Result<(), TreeParseError> {
        let l = self.label()?;
        let id = t.add_node(l, parent);
        self.ws();
        if self.s.get(self.pos) == Some(&b'(') {
            self.pos += 1;
            loop {
                self.node(t, Some(id))?;
                self.ws();
                match self.s.get(self.pos) {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
        }
        Ok(())
    }
}

/// Parses the parenthesized tree format.
pub fn parse_tree(text: &str) -> Result<LabeledTree, TreeParseError> {
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    p.ws();
    if p.pos == p.s.len() {
        return Err(TreeParseError::Empty);
    }
    let mut t = LabeledTree::empty();
    p.node(&mut t, None)?;
    p.ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(t)
}

fn write_label(out: &mut String, l: &str) {
    let bare = !l.is_empty()
        && !l.bytes().any(|c| matches!(c, b'(' | b')' | b',' | b'"' | b'\\') || c.is_ascii_whitespace());
    if bare {
        out.push_str(l);
    } else {
        out.push('"');
        for c in l.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    }
}

/// Inverse of [`parse_tree`]. The empty tree serializes to `""`.
pub fn serialize(t: &LabeledTree) -> String {
    let mut out = String::new();
    let Some(r) = t.root else { return out };
    // (node, next child index)
    let mut stack = vec![(r, 0usize)];
    write_label(&mut out, t.label(r));
    while let Some(&mut (v, ref mut i)) = stack.last_mut() {
        let kids = t.children(v);
        if *i < kids.len() {
            out.push(if *i == 0 { '(' } else { ',' });
            let c = kids[*i];
            *i += 1;
            write_label(&mut out, t.label(c));
            stack.push((c, 0));
        } else {
            if !kids.is_empty() {
                out.push(')');
            }
            stack.pop();
        }
    }
    out
}

impl fmt::Display for LabeledTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

impl fmt::Debug for LabeledTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LabeledTree({})", serialize(self))
    }
}

impl std::str::FromStr for LabeledTree {
    type Err = TreeParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tree(s)
    }
}

/// Maps label strings to dense integer ids.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    map: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.map.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.map.insert(s.to_string(), id);
        self.names.push(s.to_string());
        id
    }

    pub fn get(&self, s: &str) -> Option<u32> {
        self.map.get(s).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn intern_tree(&mut self, t: &LabeledTree) -> Vec<u32> {
        t.labels().iter().map(|l| self.intern(l)).collect()
    }
}

/// Traversal numbers and an ancestor-doubling table for nca queries.
#[derive(Debug, Clone)]
pub struct TreeIndex {
    pub pre: Vec<usize>,
    pub post: Vec<usize>,
    pub depth: Vec<usize>,
    pub size: Vec<usize>,
    pub parent: Vec<Option<NodeId>>,
    /// `by_pre[i]` is the node with preorder number `i`.
    pub by_pre: Vec<NodeId>,
    pub by_post: Vec<NodeId>,
    up: Vec<Vec<u32>>,
}

impl TreeIndex {
    pub fn new(t: &LabeledTree) -> Self {
        let n = t.len();
        let by_pre = t.walk_pre();
        let by_post = t.walk_post();
        let mut pre = vec![0; n];
        let mut post = vec![0; n];
        for (i, &v) in by_pre.iter().enumerate() {
            pre[v] = i;
        }
        for (i, &v) in by_post.iter().enumerate() {
            post[v] = i;
        }
        let mut depth = vec![0; n];
        for &v in &by_pre {
            if let Some(p) = t.parent(v) {
                depth[v] = depth[p] + 1;
            }
        }
        let mut size = vec![1; n];
        for &v in &by_post {
            if let Some(p) = t.parent(v) {
                size[p] += size[v];
            }
        }
        let parent: Vec<Option<NodeId>> = (0..n).map(|v| t.parent(v)).collect();
        let mut levels = 1;
        while (1usize << levels) < n.max(1) {
            levels += 1;
        }
        let mut up = vec![(0..n).map(|v| parent[v].unwrap_or(v) as u32).collect::<Vec<_>>()];
        for k in 1..levels {
            let prev = &up[k - 1];
            let next = (0..n).map(|v| prev[prev[v] as usize]).collect();
            up.push(next);
        }
        TreeIndex { pre, post, depth, size, parent, by_pre, by_post, up }
    }

    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    /// `v` is an ancestor of `w` or equal to it.
    #[inline]
    pub fn is_ancestor(&self, v: NodeId, w: NodeId) -> bool {
        self.pre[v] <= self.pre[w] && self.post[v] >= self.post[w]
    }

    #[inline]
    pub fn is_proper_ancestor(&self, v: NodeId, w: NodeId) -> bool {
        v != w && self.is_ancestor(v, w)
    }

    /// `v ⊲ w`: `v` is to the left of `w`.
    #[inline]
    pub fn left_of(&self, v: NodeId, w: NodeId) -> bool {
        self.pre[v] < self.pre[w] && self.post[v] < self.post[w]
    }

    /// `v ⊴ w`: left of, or related by ancestry.
    #[inline]
    pub fn semi_le(&self, v: NodeId, w: NodeId) -> bool {
        !self.left_of(w, v)
    }

    pub fn ancestor_at_depth(&self, mut v: NodeId, d: usize) -> NodeId {
        debug_assert!(d <= self.depth[v]);
        let mut diff = self.depth[v] - d;
        let mut k = 0;
        while diff > 0 {
            if diff & 1 == 1 {
                v = self.up[k][v] as usize;
            }
            diff >>= 1;
            k += 1;
        }
        v
    }

    /// Nearest common ancestor in `O(log n)`.
    pub fn nca(&self, v: NodeId, w: NodeId) -> NodeId {
        let (mut a, mut b) = (v, w);
        if self.depth[a] > self.depth[b] {
            a = self.ancestor_at_depth(a, self.depth[b]);
        } else {
            b = self.ancestor_at_depth(b, self.depth[a]);
        }
        if a == b {
            return a;
        }
        for k in (0..self.up.len()).rev() {
            let (ua, ub) = (self.up[k][a], self.up[k][b]);
            if ua != ub {
                a = ua as usize;
                b = ub as usize;
            }
        }
        self.parent[a].expect("nodes are in the same tree")
    }

    /// Subset of a semiordered list with no proper descendant in the list,
    /// returned ordered and without duplicates.
    pub fn deep(&self, x: &[NodeId]) -> Vec<NodeId> {
        let mut out = Vec::new();
        let Some(&first) = x.first() else { return out };
        let mut cur = first;
        for &y in &x[1..] {
            debug_assert!(self.semi_le(cur, y) || self.is_ancestor(y, cur), "deep: input not semiordered");
            if self.left_of(cur, y) {
                out.push(cur);
                cur = y;
            } else if self.is_proper_ancestor(cur, y) {
                cur = y;
            }
        }
        out.push(cur);
        out
    }

    pub fn is_ordered(&self, x: &[NodeId]) -> bool {
        x.windows(2).all(|w| self.left_of(w[0], w[1]))
    }

    pub fn is_semiordered(&self, x: &[NodeId]) -> bool {
        x.windows(2).all(|w| self.semi_le(w[0], w[1]))
    }
}

#[cfg(test)]
pub(crate) mod testgen {
    use super::LabeledTree;
    use rand::Rng;

    /// Random tree with `n` nodes over labels `alphabet`.
    pub fn random_tree<R: Rng>(rng: &mut R, n: usize, alphabet: &[&str]) -> LabeledTree {
        let mut t = LabeledTree::empty();
        for i in 0..n {
            let l = alphabet[rng.gen_range(0..alphabet.len())];
            let p = if i == 0 { None } else { Some(rng.gen_range(0..i)) };
            t.add_node(l, p);
        }
        t
    }

    /// All trees with exactly `n` nodes over `alphabet`, up to node numbering.
    pub fn all_trees(n: usize, alphabet: &[&str]) -> Vec<LabeledTree> {
        // shapes as preorder parent arrays where each parent is on the rightmost path
        fn shapes(n: usize) -> Vec<Vec<Option<usize>>> {
            let mut out = Vec::new();
            if n == 0 {
                return out;
            }
            let mut cur = vec![None];
            fn rec(cur: &mut Vec<Option<usize>>, n: usize, out: &mut Vec<Vec<Option<usize>>>) {
                if cur.len() == n {
                    out.push(cur.clone());
                    return;
                }
                // rightmost path from the last node up to the root
                let mut v = Some(cur.len() - 1);
                while let Some(u) = v {
                    cur.push(Some(u));
                    rec(cur, n, out);
                    cur.pop();
                    v = cur[u];
                }
            }
            rec(&mut cur, n, &mut out);
            out
        }
        let mut out = Vec::new();
        for s in shapes(n) {
            let total = alphabet.len().pow(n as u32);
            for mut code in 0..total {
                let labels = (0..n)
                    .map(|_| {
                        let l = alphabet[code % alphabet.len()].to_string();
                        code /= alphabet.len();
                        l
                    })
                    .collect();
                out.push(LabeledTree::from_parents(labels, &s));
            }
        }
        out
    }
}
