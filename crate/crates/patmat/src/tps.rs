//! Tree path subsequence: which root-to-leaf paths of `P` are subsequences
//! of which root-to-leaf paths of `T`.
//!
//! Both algorithms walk `T` and keep a *state*, a deep set of nodes of `P`
//! extended with one pseudo-leaf `⊥ᵢ` (label β) below each leaf `i` of `P`.
//! Reading a node `y` replaces every state node labeled `label(y)` by its
//! children. Path `i` is a subsequence of `path(y)` for a leaf `y` iff `⊥ᵢ`
//! is in the state at `y`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::trees::{Interner, LabeledTree, NodeId};

/// Label of the pseudo-leaves.
pub const BETA: u32 = u32::MAX;

/// `P` with pseudo-leaves attached. Node ids of `P` are kept; pseudo-leaf
/// `⊥ᵢ` gets id `n_P + i`.
#[derive(Debug, Clone)]
pub struct ExtPattern {
    pub labels: Vec<u32>,
    pub children: Vec<Vec<NodeId>>,
    pub parent: Vec<Option<NodeId>>,
    pub root: NodeId,
    /// pattern leaf index of each pseudo-leaf, `None` for ordinary nodes
    pub bot: Vec<Option<usize>>,
}

impl ExtPattern {
    pub fn new(p: &LabeledTree, names: &mut Interner) -> Self {
        let n = p.len();
        let mut labels: Vec<u32> = p.labels().iter().map(|l| names.intern(l)).collect();
        let mut children: Vec<Vec<NodeId>> = (0..n).map(|v| p.children(v).to_vec()).collect();
        let mut parent: Vec<Option<NodeId>> = (0..n).map(|v| p.parent(v)).collect();
        let mut bot = vec![None; n];
        for (i, leaf) in p.leaves().into_iter().enumerate() {
            let id = labels.len();
            labels.push(BETA);
            children.push(Vec::new());
            parent.push(Some(leaf));
            bot.push(Some(i));
            children[leaf].push(id);
        }
        ExtPattern { labels, children, parent, root: p.root(), bot }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `Down` on an explicit node set.
pub fn down(p: &ExtPattern, x: &[NodeId], label: u32) -> Vec<NodeId> {
    let mut out = Vec::new();
    for &v in x {
        if p.labels[v] == label {
            out.extend(&p.children[v]);
        } else {
            out.push(v);
        }
    }
    out
}

/// Text tree with labels resolved against the pattern's interner.
struct Text {
    labels: Vec<u32>,
    children: Vec<Vec<NodeId>>,
    root: NodeId,
    leaf_index: Vec<usize>,
}

fn prepare(p: &LabeledTree, t: &LabeledTree) -> (ExtPattern, Text) {
    let mut names = Interner::new();
    let ep = ExtPattern::new(p, &mut names);
    let labels = t.labels().iter().map(|l| names.get(l).unwrap_or(u32::MAX - 1)).collect();
    let mut leaf_index = vec![usize::MAX; t.len()];
    for (j, y) in t.leaves().into_iter().enumerate() {
        leaf_index[y] = j;
    }
    let children = (0..t.len()).map(|v| t.children(v).to_vec()).collect();
    (ep, Text { labels, children, root: t.root(), leaf_index })
}

/// The node dictionary: `X^c` by label for the current state and `X^p` by
/// text node for nodes removed on the way down.
#[derive(Debug, Clone, Default)]
pub struct NodeDict {
    xc: HashMap<u32, Vec<NodeId>>,
    xp: HashMap<NodeId, Vec<NodeId>>,
    /// slot of each pattern node inside its `X^c` list
    pos: Vec<usize>,
}

impl NodeDict {
    pub fn new(p: &ExtPattern) -> Self {
        let mut d = NodeDict { pos: vec![usize::MAX; p.len()], ..Default::default() };
        d.insert_c(p, p.root);
        d
    }

    fn insert_c(&mut self, p: &ExtPattern, x: NodeId) {
        let list = self.xc.entry(p.labels[x]).or_default();
        self.pos[x] = list.len();
        list.push(x);
    }

    fn remove_c(&mut self, p: &ExtPattern, x: NodeId) {
        let list = self.xc.get_mut(&p.labels[x]).expect("node in X^c");
        let i = self.pos[x];
        debug_assert_eq!(list[i], x);
        list.swap_remove(i);
        if i < list.len() {
            self.pos[list[i]] = i;
        }
        if list.is_empty() {
            self.xc.remove(&p.labels[x]);
        }
        self.pos[x] = usize::MAX;
    }

    pub fn down(&mut self, p: &ExtPattern, y: NodeId, label: u32) {
        let Some(x) = self.xc.remove(&label) else { return };
        for &v in &x {
            self.pos[v] = usize::MAX;
        }
        for &v in &x {
            for &c in &p.children[v] {
                self.insert_c(p, c);
            }
        }
        self.xp.entry(y).or_default().extend(x);
    }

    pub fn up(&mut self, p: &ExtPattern, y: NodeId) {
        let Some(x) = self.xp.remove(&y) else { return };
        for &v in &x {
            for &c in &p.children[v] {
                self.remove_c(p, c);
            }
            self.insert_c(p, v);
        }
    }

    /// The current state, sorted.
    pub fn state(&self) -> Vec<NodeId> {
        let mut s: Vec<NodeId> = self.xc.values().flatten().copied().collect();
        s.sort_unstable();
        s
    }

    pub fn bottoms(&self) -> &[NodeId] {
        self.xc.get(&BETA).map_or(&[], |v| v.as_slice())
    }

    /// Canonical form of both dictionaries, for equality checks.
    pub fn snapshot(&self) -> (Vec<(u32, Vec<NodeId>)>, Vec<(NodeId, Vec<NodeId>)>) {
        let mut c: Vec<(u32, Vec<NodeId>)> = self.xc.iter().map(|(&k, v)| {
            let mut v = v.clone();
            v.sort_unstable();
            (k, v)
        }).collect();
        c.sort();
        let mut q: Vec<(NodeId, Vec<NodeId>)> = self.xp.iter().filter(|(_, v)| !v.is_empty()).map(|(&k, v)| {
            let mut v = v.clone();
            v.sort_unstable();
            (k, v)
        }).collect();
        q.sort();
        (c, q)
    }
}

/// Sorted `(pattern leaf, text leaf)` pairs, both numbered left to right
/// from 0.
pub type TpsReport = Vec<(usize, usize)>;

fn sort_report(mut r: TpsReport) -> TpsReport {
    r.sort_unstable_by_key(|&(i, j)| (j, i));
    r
}

/// Depth-first traversal with a single node dictionary, restored by `Up`.
pub fn tps_simple(p: &LabeledTree, t: &LabeledTree) -> TpsReport {
    if p.is_empty() || t.is_empty() {
        return Vec::new();
    }
    let (ep, tx) = prepare(p, t);
    let mut d = NodeDict::new(&ep);
    let mut out = Vec::new();
    let mut stack = vec![(tx.root, 0usize)];
    d.down(&ep, tx.root, tx.labels[tx.root]);
    while let Some(&mut (y, ref mut i)) = stack.last_mut() {
        if tx.children[y].is_empty() && *i == 0 {
            for &b in d.bottoms() {
                out.push((ep.bot[b].unwrap(), tx.leaf_index[y]));
            }
        }
        if *i < tx.children[y].len() {
            let c = tx.children[y][*i];
            *i += 1;
            d.down(&ep, c, tx.labels[c]);
            stack.push((c, 0));
        } else {
            d.up(&ep, y);
            stack.pop();
        }
    }
    sort_report(out)
}

/// One micro tree: nodes of `P` in preorder, bit `k` is `nodes[k]`.
#[derive(Debug, Clone)]
pub struct MicroTree {
    pub nodes: Vec<NodeId>,
    pub parent: Option<usize>,
    /// bit of this tree's root inside the parent micro tree
    pub root_bit_in_parent: usize,
    pub children: Vec<usize>,
    /// children of each bit, as a mask
    pub child_mask: Vec<u64>,
    pub eq: HashMap<u32, u64>,
    pub leaf_mask: u64,
    /// balanced-parenthesis shape key
    pub shape: Vec<bool>,
    table: Option<Arc<Vec<u64>>>,
}

impl MicroTree {
    pub fn child_of(&self, x: u64) -> u64 {
        match &self.table {
            Some(t) => t[x as usize],
            None => self.child_direct(x),
        }
    }

    pub fn child_direct(&self, mut x: u64) -> u64 {
        let mut r = 0;
        while x != 0 {
            let b = x.trailing_zeros() as usize;
            r |= self.child_mask[b];
            x &= x - 1;
        }
        r
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    pub fn table_ptr(&self) -> Option<*const Vec<u64>> {
        self.table.as_ref().map(Arc::as_ptr)
    }
}

#[derive(Debug, Clone)]
pub struct MicroDecomposition {
    pub s: usize,
    pub micro: Vec<MicroTree>,
    /// parents before children
    pub order: Vec<usize>,
    pub n: usize,
}

/// Table entries allowed across all shapes.
pub const DEFAULT_TABLE_BUDGET: usize = 1 << 22;

/// Clusters a tree given by child lists into micro trees of at most `s`
/// nodes that overlap only in their roots.
///
/// Bottom-up: each node keeps a residual cluster below it. Consecutive child
/// residuals are packed into groups that fit with the node itself; all
/// groups but the smallest are closed as micro trees rooted at the node. A
/// residual that reaches `s` nodes is closed and restarts as the node alone.
pub fn micro_clusters(children: &[Vec<NodeId>], root: NodeId, s: usize) -> Vec<Vec<NodeId>> {
    let s = s.max(2);
    let n = children.len();
    let mut residual: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut closed: Vec<Vec<NodeId>> = Vec::new();
    let mut covered_as_root = vec![false; n];
    // postorder
    let mut post = Vec::with_capacity(n);
    let mut st = vec![(root, 0usize)];
    while let Some(&mut (v, ref mut i)) = st.last_mut() {
        if *i < children[v].len() {
            let c = children[v][*i];
            *i += 1;
            st.push((c, 0));
        } else {
            post.push(v);
            st.pop();
        }
    }
    for &v in &post {
        let mut groups: Vec<Vec<NodeId>> = Vec::new();
        let mut cur: Vec<NodeId> = Vec::new();
        for &c in &children[v] {
            let r = std::mem::take(&mut residual[c]);
            if 1 + cur.len() + r.len() > s {
                groups.push(std::mem::take(&mut cur));
            }
            cur.extend(r);
        }
        if !cur.is_empty() || groups.is_empty() {
            groups.push(cur);
        }
        let keep = (0..groups.len()).min_by_key(|&g| groups[g].len()).unwrap();
        for (g, grp) in groups.iter().enumerate() {
            if g != keep {
                let mut m = vec![v];
                m.extend(grp);
                closed.push(m);
                covered_as_root[v] = true;
            }
        }
        let mut res = vec![v];
        res.extend(std::mem::take(&mut groups[keep]));
        if res.len() == s {
            closed.push(res);
            covered_as_root[v] = true;
            res = vec![v];
        }
        residual[v] = res;
    }
    let last = std::mem::take(&mut residual[root]);
    if last.len() > 1 || !covered_as_root[root] {
        closed.push(last);
    }
    closed
}

fn shape_key(nodes: &[NodeId], children: &[Vec<NodeId>], inside: &HashMap<NodeId, usize>) -> Vec<bool> {
    let mut key = Vec::with_capacity(2 * nodes.len());
    let mut st = vec![(nodes[0], 0usize)];
    key.push(true);
    while let Some(&mut (v, ref mut i)) = st.last_mut() {
        let kids = &children[v];
        while *i < kids.len() && !inside.contains_key(&kids[*i]) {
            *i += 1;
        }
        if *i < kids.len() {
            let c = kids[*i];
            *i += 1;
            key.push(true);
            st.push((c, 0));
        } else {
            key.push(false);
            st.pop();
        }
    }
    key
}

impl MicroDecomposition {
    pub fn new(p: &ExtPattern, s: usize, budget: usize) -> Self {
        assert!((1..=64).contains(&s), "micro tree size must be in 1..=64");
        let clusters = micro_clusters(&p.children, p.root, s);
        let mut micro = Vec::with_capacity(clusters.len());
        // micro tree whose non-root part contains each node
        let mut owner_nonroot = vec![usize::MAX; p.len()];
        let mut tables: HashMap<Vec<bool>, Arc<Vec<u64>>> = HashMap::new();
        let mut used = 0usize;
        for (mi, mut nodes) in clusters.into_iter().enumerate() {
            // preorder inside the micro tree
            let set: HashMap<NodeId, usize> = nodes.iter().map(|&v| (v, 0)).collect();
            let mut pre = Vec::with_capacity(nodes.len());
            let mut st = vec![nodes[0]];
            while let Some(v) = st.pop() {
                pre.push(v);
                st.extend(p.children[v].iter().rev().filter(|c| set.contains_key(c)));
            }
            debug_assert_eq!(pre.len(), nodes.len());
            nodes = pre;
            let bit: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
            for &v in &nodes[1..] {
                owner_nonroot[v] = mi;
            }
            let child_mask: Vec<u64> = nodes
                .iter()
                .map(|&v| p.children[v].iter().filter_map(|c| bit.get(c)).fold(0u64, |m, &k| m | 1 << k))
                .collect();
            let mut eq: HashMap<u32, u64> = HashMap::new();
            let mut leaf_mask = 0;
            for (k, &v) in nodes.iter().enumerate() {
                *eq.entry(p.labels[v]).or_default() |= 1 << k;
                if p.bot[v].is_some() {
                    leaf_mask |= 1 << k;
                }
            }
            let shape = shape_key(&nodes, &p.children, &bit);
            let table = if let Some(t) = tables.get(&shape) {
                Some(t.clone())
            } else if nodes.len() <= 24 && used + (1 << nodes.len()) <= budget {
                let size = 1usize << nodes.len();
                used += size;
                let mut t = vec![0u64; size];
                for x in 1..size {
                    let low = x.trailing_zeros() as usize;
                    t[x] = t[x & (x - 1)] | child_mask[low];
                }
                let t = Arc::new(t);
                tables.insert(shape.clone(), t.clone());
                Some(t)
            } else {
                None
            };
            micro.push(MicroTree {
                nodes,
                parent: None,
                root_bit_in_parent: 0,
                children: Vec::new(),
                child_mask,
                eq,
                leaf_mask,
                shape,
                table,
            });
        }
        for mi in 0..micro.len() {
            let r = micro[mi].nodes[0];
            let par = owner_nonroot[r];
            if par != usize::MAX {
                let b = micro[par].nodes.iter().position(|&v| v == r).unwrap();
                micro[mi].parent = Some(par);
                micro[mi].root_bit_in_parent = b;
                micro[par].children.push(mi);
            }
        }
        let mut order = Vec::with_capacity(micro.len());
        let mut st: Vec<usize> = (0..micro.len()).filter(|&m| micro[m].parent.is_none()).rev().collect();
        while let Some(m) = st.pop() {
            order.push(m);
            st.extend(micro[m].children.iter().rev());
        }
        MicroDecomposition { s, micro, order, n: p.len() }
    }

    /// The state `{root(P)}`.
    pub fn initial(&self, p: &ExtPattern) -> Vec<u64> {
        self.micro.iter().map(|m| (m.nodes[0] == p.root) as u64).collect()
    }

    pub fn down(&self, x: &[u64], label: u32) -> Vec<u64> {
        let mut out = vec![0u64; x.len()];
        for &mi in &self.order {
            let m = &self.micro[mi];
            let b = match m.parent {
                Some(par) => out[par] >> m.root_bit_in_parent & 1,
                None => 0,
            };
            let xm = x[mi];
            let e = m.eq.get(&label).copied().unwrap_or(0);
            out[mi] = m.child_of(xm & e) | (xm & !e) | b;
        }
        out
    }

    /// Decodes a bit state to sorted pattern nodes.
    pub fn decode(&self, x: &[u64]) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = Vec::new();
        for (mi, m) in self.micro.iter().enumerate() {
            let mut bits = x[mi];
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                v.push(m.nodes[k]);
                bits &= bits - 1;
            }
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn encode(&self, nodes: &[NodeId]) -> Vec<u64> {
        let set: std::collections::HashSet<NodeId> = nodes.iter().copied().collect();
        self.micro
            .iter()
            .map(|m| m.nodes.iter().enumerate().filter(|(_, v)| set.contains(v)).fold(0, |a, (k, _)| a | 1 << k))
            .collect()
    }

    pub fn shared_tables(&self) -> usize {
        let mut ptrs: Vec<_> = self.micro.iter().filter_map(|m| m.table_ptr()).collect();
        ptrs.sort();
        ptrs.dedup();
        ptrs.len()
    }
}

/// Micro-tree decomposition of `P` as used by [`tps_fast`].
pub fn micro_decompose(p: &LabeledTree, s: usize) -> MicroDecomposition {
    let mut names = Interner::new();
    let ep = ExtPattern::new(p, &mut names);
    // decompose the plain pattern: drop pseudo-leaves from the child lists
    let n = p.len();
    let plain = ExtPattern {
        labels: ep.labels[..n].to_vec(),
        children: ep.children[..n].iter().map(|c| c.iter().copied().filter(|&x| x < n).collect()).collect(),
        parent: ep.parent[..n].to_vec(),
        root: ep.root,
        bot: vec![None; n],
    };
    MicroDecomposition::new(&plain, s, DEFAULT_TABLE_BUDGET)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TpsStats {
    pub max_live_states: usize,
}

/// Default micro tree size for a word size.
pub fn default_micro_size(word_bits: usize) -> usize {
    (word_bits / 4).clamp(2, 16)
}

/// Heavy-path traversal over bit-vector states.
pub fn tps_fast(p: &LabeledTree, t: &LabeledTree, s: usize) -> TpsReport {
    tps_fast_stats(p, t, s, DEFAULT_TABLE_BUDGET).0
}

pub fn tps_fast_stats(p: &LabeledTree, t: &LabeledTree, s: usize, budget: usize) -> (TpsReport, TpsStats) {
    if p.is_empty() || t.is_empty() {
        return (Vec::new(), TpsStats::default());
    }
    let (ep, tx) = prepare(p, t);
    let md = MicroDecomposition::new(&ep, s, budget);
    let n = tx.labels.len();
    let mut size = vec![1usize; n];
    let mut post = Vec::with_capacity(n);
    let mut st = vec![(tx.root, 0usize)];
    while let Some(&mut (v, ref mut i)) = st.last_mut() {
        if *i < tx.children[v].len() {
            let c = tx.children[v][*i];
            *i += 1;
            st.push((c, 0));
        } else {
            post.push(v);
            st.pop();
        }
    }
    for &v in &post {
        size[v] += tx.children[v].iter().map(|&c| size[c]).sum::<usize>();
    }
    struct Run<'a> {
        md: &'a MicroDecomposition,
        ep: &'a ExtPattern,
        tx: &'a Text,
        size: Vec<usize>,
        live: usize,
        max_live: usize,
        out: TpsReport,
    }
    impl Run<'_> {
        fn make(&mut self, x: &[u64], y: NodeId) -> Vec<u64> {
            self.live += 1;
            self.max_live = self.max_live.max(self.live);
            self.md.down(x, self.tx.labels[y])
        }
        fn visit(&mut self, mut y: NodeId, mut x: Vec<u64>) {
            loop {
                let kids = &self.tx.children[y];
                if kids.is_empty() {
                    for (mi, m) in self.md.micro.iter().enumerate() {
                        let mut bits = x[mi] & m.leaf_mask;
                        while bits != 0 {
                            let k = bits.trailing_zeros() as usize;
                            self.out.push((self.ep.bot[m.nodes[k]].unwrap(), self.tx.leaf_index[y]));
                            bits &= bits - 1;
                        }
                    }
                    self.live -= 1;
                    return;
                }
                let heavy = *kids.iter().max_by_key(|&&c| self.size[c]).unwrap();
                for &c in kids.clone().iter() {
                    if c != heavy {
                        let xc = self.make(&x, c);
                        self.visit(c, xc);
                    }
                }
                let xz = self.make(&x, heavy);
                drop(x);
                self.live -= 1;
                x = xz;
                y = heavy;
            }
        }
    }
    let mut run = Run { md: &md, ep: &ep, tx: &tx, size, live: 0, max_live: 0, out: Vec::new() };
    let init = md.initial(&ep);
    let x0 = run.make(&init, tx.root);
    run.visit(tx.root, x0);
    let stats = TpsStats { max_live_states: run.max_live };
    (sort_report(run.out), stats)
}

/// Checks every pattern path against every text path with two pointers.
pub fn tps_oracle(p: &LabeledTree, t: &LabeledTree) -> TpsReport {
    let paths = |x: &LabeledTree| -> Vec<Vec<String>> {
        x.leaves()
            .into_iter()
            .map(|l| {
                let mut path = Vec::new();
                let mut u = Some(l);
                while let Some(v) = u {
                    path.push(x.label(v).to_string());
                    u = x.parent(v);
                }
                path.reverse();
                path
            })
            .collect()
    };
    if p.is_empty() || t.is_empty() {
        return Vec::new();
    }
    let (pp, tp) = (paths(p), paths(t));
    let mut out = Vec::new();
    for (j, b) in tp.iter().enumerate() {
        for (i, a) in pp.iter().enumerate() {
            let mut k = 0;
            for s in b {
                if k < a.len() && &a[k] == s {
                    k += 1;
                }
            }
            if k == a.len() {
                out.push((i, j));
            }
        }
    }
    sort_report(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::parse_tree;
    use crate::trees::testgen::{all_trees, random_tree};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(s: &str) -> LabeledTree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn framework_example() {
        let p = t("a(c(a),b)");
        let tt = t("a(c(a(b),b(b)))");
        let mut names = Interner::new();
        let ep = ExtPattern::new(&p, &mut names);
        let lab = |s: &str| names.get(s).unwrap();
        // x1 = 1 (c), x2 = 3 (b), x3 = 2 (a)
        let x = down(&ep, &[0], lab("a"));
        assert_eq!(x, vec![1, 3]);
        let x1 = down(&ep, &x, lab("c"));
        assert_eq!(x1, vec![2, 3]);
        // text leaves: node 3 is leaf 0, node 5 is leaf 1
        let want = vec![(0, 0), (1, 0), (1, 1)];
        assert_eq!(tps_simple(&p, &tt), want);
        assert_eq!(tps_fast(&p, &tt, 2), want);
        assert_eq!(tps_oracle(&p, &tt), want);
    }

    #[test]
    fn single_node_pattern() {
        let p = t("a");
        let tt = t("b(a(c),c,d(a))");
        assert_eq!(tps_simple(&p, &tt), vec![(0, 0), (0, 2)]);
    }

    #[test]
    fn up_inverts_down() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let (np, nt) = (rng.gen_range(1..=10), rng.gen_range(1..=10));
            let p = random_tree(&mut rng, np, &["a", "b", "c"]);
            let tt = random_tree(&mut rng, nt, &["a", "b", "c"]);
            let (ep, tx) = prepare(&p, &tt);
            let mut d = NodeDict::new(&ep);
            // walk to a random node, checking Up(Down(X, y), y) = X on the way
            let mut y = tx.root;
            d.down(&ep, y, tx.labels[y]);
            while !tx.children[y].is_empty() {
                let c = tx.children[y][rng.gen_range(0..tx.children[y].len())];
                let before = d.snapshot();
                let mut probe = d.clone();
                probe.down(&ep, c, tx.labels[c]);
                let st = probe.state();
                assert!(st.iter().all(|&a| st.iter().all(|&b| a == b || !is_anc(&ep, a, b))), "antichain");
                probe.up(&ep, c);
                assert_eq!(probe.snapshot(), before);
                d.down(&ep, c, tx.labels[c]);
                y = c;
            }
        }
    }

    fn is_anc(p: &ExtPattern, a: NodeId, b: NodeId) -> bool {
        let mut u = Some(b);
        while let Some(v) = u {
            if v == a {
                return true;
            }
            u = p.parent[v];
        }
        false
    }

    #[test]
    fn exhaustive_small() {
        let mut trees = Vec::new();
        for n in 1..=5 {
            trees.extend(all_trees(n, &["a", "b"]));
        }
        for p in trees.iter().step_by(3) {
            for tt in trees.iter().step_by(2) {
                let o = tps_oracle(p, tt);
                assert_eq!(tps_simple(p, tt), o, "{p} {tt}");
                for s in [1, 2, 3] {
                    assert_eq!(tps_fast(p, tt, s), o, "{p} {tt} s={s}");
                }
            }
        }
    }

    #[test]
    fn random_fast_vs_simple() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..300 {
            let (np, nt) = (rng.gen_range(1..=40), rng.gen_range(1..=40));
            let p = random_tree(&mut rng, np, &["a", "b", "c"]);
            let tt = random_tree(&mut rng, nt, &["a", "b", "c"]);
            let o = tps_simple(&p, &tt);
            for s in [1, 2, 4, 8] {
                assert_eq!(tps_fast(&p, &tt, s), o);
            }
            // no tables at all
            assert_eq!(tps_fast_stats(&p, &tt, 8, 0).0, o);
        }
    }

    #[test]
    fn live_states_logarithmic() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = random_tree(&mut rng, 30, &["a", "b"]);
        for n in [10usize, 100, 1000, 10_000] {
            for _ in 0..3 {
                let tt = random_tree(&mut rng, n, &["a", "b"]);
                let (_, st) = tps_fast_stats(&p, &tt, 8, DEFAULT_TABLE_BUDGET);
                assert!(st.max_live_states as f64 <= (n as f64).log2() + 3.0, "{n}: {}", st.max_live_states);
            }
        }
    }

    fn audit(d: &MicroDecomposition, children: &[Vec<NodeId>], root: NodeId) {
        let n = children.len();
        let mut cover = vec![0usize; n];
        let mut nonroot = vec![0usize; n];
        for m in &d.micro {
            assert!(m.nodes.len() <= d.s.max(2));
            for (k, &v) in m.nodes.iter().enumerate() {
                cover[v] += 1;
                if k > 0 {
                    nonroot[v] += 1;
                    // connected: parent inside
                    assert!(m.nodes.iter().any(|&u| children[u].contains(&v)));
                }
            }
        }
        assert!(cover.iter().all(|&c| c >= 1));
        assert!(nonroot.iter().all(|&c| c <= 1));
        assert_eq!(nonroot[root], 0);
        let bound = 4 * n.div_ceil(d.s.max(2));
        assert!(d.micro.len() <= bound, "{} > {bound}", d.micro.len());
    }

    #[test]
    fn decomposition_examples() {
        let d = micro_decompose(&t("a"), 3);
        assert_eq!(d.micro.len(), 1);
        let path = t("a(b(c(d(e(f(g))))))");
        let d = micro_decompose(&path, 3);
        assert!(d.micro.len() <= 5);
        assert_eq!(d.micro.len(), 3);
        let ch: Vec<Vec<usize>> = (0..7).map(|v| path.children(v).to_vec()).collect();
        audit(&d, &ch, 0);
        let bin = t("a(a(a(a,a),a(a,a)),a(a(a,a),a(a,a)))");
        assert_eq!(bin.len(), 15);
        let d = micro_decompose(&bin, 4);
        let ch: Vec<Vec<usize>> = (0..15).map(|v| bin.children(v).to_vec()).collect();
        audit(&d, &ch, 0);
    }

    #[test]
    fn decomposition_random_audit_and_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..300 {
            let n = rng.gen_range(1..=80);
            let p = random_tree(&mut rng, n, &["a", "b"]);
            let mut names = Interner::new();
            let ep = ExtPattern::new(&p, &mut names);
            for s in [1, 2, 3, 5, 8, 16] {
                let d = MicroDecomposition::new(&ep, s, DEFAULT_TABLE_BUDGET);
                audit(&d, &ep.children, ep.root);
                for m in &d.micro {
                    for x in 0..(1u64 << m.nodes.len()).min(256) {
                        assert_eq!(m.child_of(x), m.child_direct(x));
                    }
                }
                // shape sharing: one table per distinct shape
                let mut shapes: Vec<&Vec<bool>> = d.micro.iter().map(|m| &m.shape).collect();
                shapes.sort();
                shapes.dedup();
                assert_eq!(d.shared_tables(), shapes.len());
                // encode/decode round trip
                let x: Vec<usize> = (0..ep.len()).filter(|_| rng.gen_bool(0.3)).collect();
                assert_eq!(d.decode(&d.encode(&x)), x);
            }
        }
    }
}
