//! Ordered tree inclusion with deep embeddings and node-list set procedures.
//!
//! `P ⊑ T` if `P` can be obtained from `T` by deleting nodes. The procedure
//! [`TextTree::emb`] computes the deep occurrences of `P`, the roots of
//! embeddings of `P` that have no embedding strictly below them.

use crate::trees::{Interner, LabeledTree, NodeId, TreeIndex};

const NIL: usize = usize::MAX;

/// `[parent(x) | x ∈ X]`, dropping the root.
pub fn parent_list(ix: &TreeIndex, x: &[NodeId]) -> Vec<NodeId> {
    x.iter().filter_map(|&v| ix.parent[v]).collect()
}

/// `[nca(y₁, y₂) | (y₁, y₂) ∈ Y]`
pub fn nca_list(ix: &TreeIndex, y: &[(NodeId, NodeId)]) -> Vec<NodeId> {
    y.iter().map(|&(a, b)| ix.nca(a, b)).collect()
}

/// Minimum ordered pairs.
///
/// Returns `(y₁, x)` for each `(y₂, x) ∈ mop(Y|₂, X)`, where `(y₁, y₂) ∈ Y`.
pub fn mop(ix: &TreeIndex, y: &[(NodeId, NodeId)], x: &[NodeId]) -> Vec<(NodeId, NodeId)> {
    debug_assert!(ix.is_ordered(x), "mop: X not ordered");
    debug_assert!(ix.is_ordered(&y.iter().map(|p| p.1).collect::<Vec<_>>()), "mop: Y not ordered");
    let mut out = Vec::new();
    let Some(&(y1, y2)) = y.first() else { return out };
    let Some(mut h) = x.iter().position(|&v| ix.left_of(y2, v)) else { return out };
    let (mut cy, mut cx) = (y1, x[h]);
    for &(a, b) in &y[1..] {
        while h < x.len() && !ix.left_of(b, x[h]) {
            h += 1;
        }
        if h == x.len() {
            out.push((cy, cx));
            return out;
        }
        if ix.left_of(cx, x[h]) {
            out.push((cy, cx));
            cy = a;
            cx = x[h];
        } else {
            cy = a;
        }
    }
    out.push((cy, cx));
    out
}

/// How many times each node of `T` entered the `Z` list of [`fl`].
#[derive(Debug, Clone, Default)]
pub struct FlCounter {
    pub visits: Vec<u32>,
}

impl FlCounter {
    pub fn new(n: usize) -> Self {
        FlCounter { visits: vec![0; n] }
    }
    pub fn max(&self) -> u32 {
        self.visits.iter().copied().max().unwrap_or(0)
    }
}

/// For ordered `X`, the deep set of first ancestors labeled `a`.
///
/// One doubly linked list holds `Z`, `S` and `R`; `next` threads the
/// elements still in `Z`, everything else in the list is in `R`.
pub fn fl(ix: &TreeIndex, labels: &[u32], x: &[NodeId], a: u32, mut counter: Option<&mut FlCounter>) -> Vec<NodeId> {
    debug_assert!(ix.is_ordered(x), "fl: X not ordered");
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut node = x.to_vec();
    let mut pred: Vec<usize> = (0..n).map(|i| if i == 0 { NIL } else { i - 1 }).collect();
    let mut succ: Vec<usize> = (0..n).map(|i| if i + 1 == n { NIL } else { i + 1 }).collect();
    let mut next = succ.clone();
    let mut head = 0;
    let mut z_head = 0;

    let unlink = |s: usize, pred: &mut Vec<usize>, succ: &mut Vec<usize>, head: &mut usize| {
        let (p, q) = (pred[s], succ[s]);
        if p == NIL {
            *head = q;
        } else {
            succ[p] = q;
        }
        if q != NIL {
            pred[q] = p;
        }
    };

    while z_head != NIL {
        // move every element of Z up one step or into R
        let mut prev = NIL;
        let mut s = z_head;
        while s != NIL {
            let nx = next[s];
            if let Some(c) = counter.as_deref_mut() {
                c.visits[node[s]] += 1;
            }
            let drop_from_z = if labels[node[s]] == a {
                true
            } else if let Some(p) = ix.parent[node[s]] {
                node[s] = p;
                false
            } else {
                unlink(s, &mut pred, &mut succ, &mut head);
                true
            };
            if drop_from_z {
                if prev == NIL {
                    z_head = nx;
                } else {
                    next[prev] = nx;
                }
            } else {
                prev = s;
            }
            s = nx;
        }
        // Deep(S) along the Z thread
        if z_head != NIL {
            let mut prev = NIL;
            let mut cur = z_head;
            let mut y = next[cur];
            while y != NIL {
                let ny = next[y];
                if ix.left_of(node[cur], node[y]) {
                    prev = cur;
                    cur = y;
                } else if ix.is_proper_ancestor(node[cur], node[y]) {
                    unlink(cur, &mut pred, &mut succ, &mut head);
                    if prev == NIL {
                        z_head = y;
                    } else {
                        next[prev] = y;
                    }
                    cur = y;
                } else {
                    unlink(y, &mut pred, &mut succ, &mut head);
                    next[cur] = ny;
                }
                y = ny;
            }
        }
        // Deep*(S, R): drop elements with a descendant next to them
        let mut prev = NIL;
        let mut s = z_head;
        while s != NIL {
            let nx = next[s];
            let has_desc = [pred[s], succ[s]].iter().any(|&q| q != NIL && ix.is_ancestor(node[s], node[q]));
            if has_desc {
                unlink(s, &mut pred, &mut succ, &mut head);
                if prev == NIL {
                    z_head = nx;
                } else {
                    next[prev] = nx;
                }
            } else {
                prev = s;
            }
            s = nx;
        }
    }
    let mut out = Vec::new();
    let mut s = head;
    while s != NIL {
        out.push(node[s]);
        s = succ[s];
    }
    out
}

/// A text tree prepared for repeated inclusion queries.
#[derive(Debug, Clone)]
pub struct TextTree {
    pub tree: LabeledTree,
    pub index: TreeIndex,
    names: Interner,
    labels: Vec<u32>,
    leaves: Vec<NodeId>,
}

impl TextTree {
    pub fn new(tree: LabeledTree) -> Self {
        let index = TreeIndex::new(&tree);
        let mut names = Interner::new();
        let labels = names.intern_tree(&tree);
        let leaves = tree.leaves();
        TextTree { tree, index, names, labels, leaves }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_id(&self, s: &str) -> Option<u32> {
        self.names.get(s)
    }

    /// Deep occurrences of `p`, ordered left to right. Empty iff `p ⋢ T`.
    pub fn emb(&self, p: &LabeledTree) -> Vec<NodeId> {
        self.emb_counted(p, None)
    }

    pub fn emb_counted(&self, p: &LabeledTree, mut counter: Option<&mut FlCounter>) -> Vec<NodeId> {
        if p.is_empty() || self.tree.is_empty() {
            return Vec::new();
        }
        let ix = &self.index;
        let mut res: Vec<Option<Vec<NodeId>>> = vec![None; p.len()];
        for v in p.walk_post() {
            let Some(a) = self.names.get(p.label(v)) else { return Vec::new() };
            let kids = p.children(v);
            let start = match kids.len() {
                0 => self.leaves.clone(),
                1 => {
                    let r1 = res[kids[0]].take().unwrap();
                    ix.deep(&parent_list(ix, &r1))
                }
                _ => {
                    let r1 = res[kids[0]].take().unwrap();
                    let mut u: Vec<(NodeId, NodeId)> = r1.iter().map(|&r| (r, r)).collect();
                    for &c in &kids[1..] {
                        let ri = res[c].take().unwrap();
                        u = mop(ix, &u, &ri);
                    }
                    ix.deep(&nca_list(ix, &u))
                }
            };
            let r = ix.deep(&fl(ix, &self.labels, &start, a, counter.as_deref_mut()));
            if r.is_empty() {
                return Vec::new();
            }
            res[v] = Some(r);
        }
        res[p.root()].take().unwrap()
    }

    pub fn includes(&self, p: &LabeledTree) -> bool {
        !self.emb(p).is_empty()
    }

    /// Every node `u` with `p ⊑ T(u)`, in preorder.
    pub fn including_subtrees(&self, p: &LabeledTree) -> Vec<NodeId> {
        let mut mark = vec![false; self.tree.len()];
        for mut v in self.emb(p) {
            while !mark[v] {
                mark[v] = true;
                match self.index.parent[v] {
                    Some(u) => v = u,
                    None => break,
                }
            }
        }
        self.index.by_pre.iter().copied().filter(|&v| mark[v]).collect()
    }
}

pub fn emb(p: &LabeledTree, t: &LabeledTree) -> Vec<NodeId> {
    TextTree::new(t.clone()).emb(p)
}

pub fn including_subtrees(p: &LabeledTree, t: &LabeledTree) -> Vec<NodeId> {
    TextTree::new(t.clone()).including_subtrees(p)
}

/// Inclusion by the ρ dynamic program over closest right relatives.
///
/// `ρ(v, q)` is the node of smallest postorder number to the right of `q`
/// whose subtree has a root preserving embedding of `P(v)`; `q = ⊥` stands
/// for "left of everything".
pub fn km_oracle(p: &LabeledTree, t: &LabeledTree) -> bool {
    if p.is_empty() {
        return true;
    }
    if t.is_empty() {
        return false;
    }
    let ix = TreeIndex::new(t);
    let n = t.len();
    // slot n is ⊥; the value None is ⊤
    let right_of = |q: usize, w: usize| q == n || ix.left_of(q, w);
    let max_left: Vec<usize> = (0..n)
        .map(|w| (0..n).filter(|&u| ix.left_of(u, w)).max_by_key(|&u| ix.post[u]).unwrap_or(n))
        .collect();
    let mut rho: Vec<Vec<Option<usize>>> = vec![Vec::new(); p.len()];
    for v in p.walk_post() {
        let kids = p.children(v);
        let rooted: Vec<bool> = (0..n)
            .map(|w| {
                if p.label(v) != t.label(w) {
                    return false;
                }
                let mut q = max_left[w];
                for &c in kids {
                    match rho[c][q] {
                        Some(x) if ix.is_proper_ancestor(w, x) => q = x,
                        _ => return false,
                    }
                }
                true
            })
            .collect();
        rho[v] = (0..=n)
            .map(|q| (0..n).filter(|&w| rooted[w] && right_of(q, w)).min_by_key(|&w| ix.post[w]))
            .collect();
    }
    rho[p.root()][n].is_some()
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

    /// Inclusion by trying all node deletions.
    fn delete_oracle(p: &LabeledTree, t: &LabeledTree) -> bool {
        fn go(p: &str, t: &LabeledTree, seen: &mut std::collections::HashSet<String>) -> bool {
            let s = t.to_string();
            if s == p {
                return true;
            }
            if !seen.insert(s) {
                return false;
            }
            (0..t.len()).any(|v| {
                let ok = Some(v) != t.root_opt() || t.children(v).len() == 1;
                ok && t.len() > 1 && go(p, &t.delete_node(v), seen)
            })
        }
        p.len() <= t.len() && go(&p.to_string(), t, &mut Default::default())
    }

    #[test]
    fn km_examples() {
        assert!(km_oracle(&t("f(b,e)"), &t("f(d(a,c(b)),e)")));
        let x = t("f(d(a,c(b)),e)");
        assert!(km_oracle(&x, &x));
        assert!(!km_oracle(&t("a(b)"), &t("b(a)")));
    }

    #[test]
    fn km_matches_deletion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let np = rng.gen_range(1..=4);
            let nt = rng.gen_range(1..=6);
            let p = random_tree(&mut rng, np, &["a", "b"]);
            let tt = random_tree(&mut rng, nt, &["a", "b"]);
            assert_eq!(km_oracle(&p, &tt), delete_oracle(&p, &tt), "{p} {tt}");
        }
    }

    #[test]
    fn embexample_root_only() {
        let tt = TextTree::new(t("a(b(a),b(a,b(a)),a(a,b))"));
        assert_eq!(tt.emb(&t("a(b(a),a)")), vec![0]);
        assert_eq!(tt.including_subtrees(&t("a(b(a),a)")), vec![0]);
        // Emb(2) = b-nodes over an a: the first child of the root and the inner b
        assert_eq!(tt.emb(&t("b(a)")), vec![1, 5]);
    }

    #[test]
    fn single_node_pattern_is_deep_label_set() {
        let tt = TextTree::new(t("a(b(a),b(a,b(a)),a(a,b))"));
        let got = tt.emb(&t("a"));
        let want: Vec<usize> = tt.index.deep(&tt.index.by_pre.iter().copied().filter(|&v| tt.tree.label(v) == "a").collect::<Vec<_>>());
        assert_eq!(got, want);
        assert!(tt.emb(&t("z")).is_empty());
    }

    #[test]
    fn emb_exhaustive_vs_km() {
        let mut ps = Vec::new();
        for n in 1..=4 {
            ps.extend(all_trees(n, &["a", "b"]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut ts = Vec::new();
        for n in 1..=5 {
            ts.extend(all_trees(n, &["a", "b"]));
        }
        for _ in 0..150 {
            let n = rng.gen_range(6..=8);
            ts.push(random_tree(&mut rng, n, &["a", "b"]));
        }
        for tt in &ts {
            let text = TextTree::new(tt.clone());
            for p in &ps {
                let e = text.emb(p);
                assert_eq!(!e.is_empty(), km_oracle(p, tt), "{p} in {tt}");
                assert!(text.index.is_ordered(&e));
            }
        }
    }

    #[test]
    fn including_subtrees_vs_km() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let np = rng.gen_range(1..=4);
            let nt = rng.gen_range(1..=10);
            let p = random_tree(&mut rng, np, &["a", "b"]);
            let tt = random_tree(&mut rng, nt, &["a", "b"]);
            let text = TextTree::new(tt.clone());
            let got = text.including_subtrees(&p);
            let want: Vec<usize> = text.index.by_pre.iter().copied().filter(|&u| km_oracle(&p, &tt.subtree(u))).collect();
            assert_eq!(got, want, "{p} in {tt}");
            // deep occurrences are exactly the minimal including nodes
            let e = text.emb(&p);
            let minimal: Vec<usize> = want.iter().copied().filter(|&u| !want.iter().any(|&w| text.index.is_proper_ancestor(u, w))).collect();
            assert_eq!(e, minimal);
        }
    }

    fn random_deep<R: Rng>(rng: &mut R, ix: &TreeIndex, p: f64) -> Vec<usize> {
        let cand: Vec<usize> = ix.by_pre.iter().copied().filter(|_| rng.gen_bool(p)).collect();
        ix.deep(&cand)
    }

    fn mop_oracle(ix: &TreeIndex, y: &[(usize, usize)], x: &[usize]) -> Vec<(usize, usize)> {
        let le = |a: usize, b: usize| a == b || ix.left_of(a, b);
        let phi: Vec<(usize, usize)> =
            y.iter().flat_map(|&(_, a)| x.iter().map(move |&b| (a, b))).filter(|&(a, b)| ix.left_of(a, b)).collect();
        let mut out = Vec::new();
        for &(a, b) in &phi {
            let beaten = phi.iter().any(|&(a2, b2)| {
                (ix.left_of(a, a2) && le(b2, b)) || (le(a, a2) && ix.left_of(b2, b))
            });
            if !beaten {
                let y1 = y.iter().find(|p| p.1 == a).unwrap().0;
                out.push((y1, b));
            }
        }
        out.sort_by_key(|&(_, b)| ix.pre[b]);
        out
    }

    #[test]
    fn mop_examples() {
        let tt = t("r(a,b,c,d)");
        let ix = TreeIndex::new(&tt);
        assert_eq!(mop(&ix, &[(1, 1), (2, 2)], &[3, 4]), vec![(2, 3)]);
        assert!(mop(&ix, &[(1, 1)], &[]).is_empty());
    }

    #[test]
    fn mop_matches_phi_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..1000 {
            let tt = random_tree(&mut rng, 15, &["a"]);
            let ix = TreeIndex::new(&tt);
            let y2 = random_deep(&mut rng, &ix, 0.3);
            let y: Vec<(usize, usize)> = y2
                .iter()
                .map(|&v| {
                    let d = rng.gen_range(0..=ix.depth[v]);
                    (ix.ancestor_at_depth(v, d), v)
                })
                .collect();
            let x = random_deep(&mut rng, &ix, 0.3);
            assert_eq!(mop(&ix, &y, &x), mop_oracle(&ix, &y, &x), "{tt} {y:?} {x:?}");
        }
    }

    #[test]
    fn fl_matches_walk_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=20);
            let tt = random_tree(&mut rng, n, &["a", "b", "c"]);
            let text = TextTree::new(tt.clone());
            let ix = &text.index;
            let x = random_deep(&mut rng, ix, 0.4);
            for lab in ["a", "b", "c"] {
                let Some(a) = text.label_id(lab) else { continue };
                let mut ups = Vec::new();
                for &v in &x {
                    let mut u = Some(v);
                    while let Some(w) = u {
                        if tt.label(w) == lab {
                            ups.push(w);
                            break;
                        }
                        u = ix.parent[w];
                    }
                }
                ups.sort_by_key(|&v| ix.pre[v]);
                let want = ix.deep(&ups);
                let got = ix.deep(&fl(ix, text.labels(), &x, a, None));
                assert_eq!(got, want, "{tt} {x:?} {lab}");
            }
        }
        let tt = TextTree::new(t("a(b,c)"));
        let b = tt.label_id("b").unwrap();
        assert_eq!(fl(&tt.index, tt.labels(), &[1], b, None), vec![1]);
    }

    #[test]
    fn fl_visits_each_node_at_most_twice_on_a_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..200 {
            let n = rng.gen_range(10..=60);
            let tt = random_tree(&mut rng, n, &["a", "b"]);
            let text = TextTree::new(tt);
            let len = rng.gen_range(1..=6);
            let labs: Vec<&str> = (0..len).map(|_| if rng.gen_bool(0.5) { "a" } else { "b" }).collect();
            // a path-shaped pattern drives Emb through a chain of Fl calls
            let mut s = String::new();
            for (i, l) in labs.iter().enumerate() {
                if i > 0 {
                    s.push('(');
                }
                s.push_str(l);
            }
            s.push_str(&")".repeat(len - 1));
            let p = t(&s);
            let mut c = FlCounter::new(text.tree.len());
            text.emb_counted(&p, Some(&mut c));
            assert!(c.max() <= 2, "{} {s}", text.tree);
        }
    }
}
