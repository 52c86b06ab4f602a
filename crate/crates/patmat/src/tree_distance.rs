//! Ordered tree edit distance and tree alignment distance.
//!
//! All three algorithms number nodes in postorder. A forest of one tree is
//! a postorder interval `[l, r]`: deleting the rightmost root `r` leaves
//! `[l, r-1]`, the children of `r` are `[lml(r), r-1]`, and the rest of the
//! forest is `[l, lml(r)-1]`, where `lml` is the leftmost leaf descendant.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::trees::{Interner, LabeledTree};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("cost({a}, {b}) = {c} is negative or not finite")]
    Invalid { a: String, b: String, c: f64 },
    #[error("cost({a}, {a}) = {c} is not zero")]
    NotReflexive { a: String, c: f64 },
    #[error("cost is not symmetric for {a} and {b}")]
    Asymmetric { a: String, b: String },
    #[error("triangle inequality fails: cost({a}, {c}) > cost({a}, {b}) + cost({b}, {c})")]
    Triangle { a: String, b: String, c: String },
    #[error("cost file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A cost for each pair of labels, where `None` is the blank λ.
///
/// Pairs that were not given explicitly cost 0 when equal and 1 otherwise.
#[derive(Debug, Clone, Default)]
pub struct CostFunction {
    table: HashMap<(Option<String>, Option<String>), f64>,
}

fn lam(s: &Option<String>) -> &str {
    s.as_deref().unwrap_or("-")
}

impl CostFunction {
    pub fn unit() -> Self {
        Self::default()
    }

    /// Sets `cost(a, b)`; the reverse direction is set too unless it was
    /// already given explicitly.
    pub fn set(&mut self, a: Option<&str>, b: Option<&str>, c: f64) {
        let (a, b) = (a.map(str::to_string), b.map(str::to_string));
        self.table.insert((a.clone(), b.clone()), c);
        self.table.entry((b, a)).or_insert(c);
    }

    /// Parses lines `a b cost`, with `-` standing for λ. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, CostError> {
        let mut cf = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(CostError::Parse { line: i + 1, msg: "expected `a b cost`".into() });
            }
            let c: f64 = parts[2]
                .parse()
                .map_err(|_| CostError::Parse { line: i + 1, msg: format!("bad cost {:?}", parts[2]) })?;
            fn blank(s: &str) -> Option<&str> {
                (s != "-").then_some(s)
            }
            cf.set(blank(parts[0]), blank(parts[1]), c);
        }
        Ok(cf)
    }

    pub fn cost(&self, a: Option<&str>, b: Option<&str>) -> f64 {
        if let Some(&c) = self.table.get(&(a.map(str::to_string), b.map(str::to_string))) {
            return c;
        }
        if a == b {
            0.0
        } else {
            1.0
        }
    }

    fn listed(&self) -> HashSet<&str> {
        self.table.keys().flat_map(|(a, b)| [a, b]).flatten().map(String::as_str).collect()
    }

    /// Checks the metric axioms over the given labels and λ.
    ///
    /// Unlisted labels all behave alike, so one representative of them is
    /// enough when the label set is large.
    pub fn validate<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Result<(), CostError> {
        let mut seen: Vec<&str> = Vec::new();
        let mut set = HashSet::new();
        for l in labels {
            if set.insert(l) {
                seen.push(l);
            }
        }
        if seen.len() > 64 {
            let listed = self.listed();
            let mut keep: Vec<&str> = seen.iter().copied().filter(|l| listed.contains(l)).collect();
            if let Some(&u) = seen.iter().find(|l| !listed.contains(*l)) {
                keep.push(u);
            }
            seen = keep;
        }
        let mut all: Vec<Option<String>> = seen.iter().map(|s| Some(s.to_string())).collect();
        all.push(None);
        let c = |a: &Option<String>, b: &Option<String>| self.cost(a.as_deref(), b.as_deref());
        for a in &all {
            let x = c(a, a);
            if x != 0.0 {
                return Err(CostError::NotReflexive { a: lam(a).into(), c: x });
            }
            for b in &all {
                let x = c(a, b);
                if !x.is_finite() || x < 0.0 {
                    return Err(CostError::Invalid { a: lam(a).into(), b: lam(b).into(), c: x });
                }
                if x != c(b, a) {
                    return Err(CostError::Asymmetric { a: lam(a).into(), b: lam(b).into() });
                }
            }
        }
        for a in &all {
            for b in &all {
                for d in &all {
                    if c(a, d) > c(a, b) + c(b, d) + 1e-9 {
                        return Err(CostError::Triangle { a: lam(a).into(), b: lam(b).into(), c: lam(d).into() });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Postorder view of a tree with costs resolved to numbers.
struct Post {
    /// leftmost leaf of each node
    lml: Vec<usize>,
    /// children of each node, in postorder numbers
    kids: Vec<Vec<usize>>,
    labels: Vec<u32>,
}

impl Post {
    fn new(t: &LabeledTree, names: &mut Interner) -> Self {
        let order = t.walk_post();
        let n = order.len();
        let mut num = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            num[v] = i;
        }
        let mut lml = vec![0; n];
        let mut kids = vec![Vec::new(); n];
        let mut labels = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            kids[i] = t.children(v).iter().map(|&c| num[c]).collect();
            lml[i] = kids[i].first().map_or(i, |&c| lml[c]);
            labels[i] = names.intern(t.label(v));
        }
        Post { lml, kids, labels }
    }

    fn len(&self) -> usize {
        self.lml.len()
    }
}

/// Cost tables for a pair of trees.
struct Costs {
    del: Vec<f64>,
    ins: Vec<f64>,
    rel: Vec<Vec<f64>>,
}

fn prepare(t1: &LabeledTree, t2: &LabeledTree, c: &CostFunction) -> Result<(Post, Post, Costs), CostError> {
    c.validate(t1.labels().iter().chain(t2.labels()).map(String::as_str))?;
    let mut names = Interner::new();
    let p1 = Post::new(t1, &mut names);
    let p2 = Post::new(t2, &mut names);
    let k = names.len();
    let name = |i: usize| Some(names.name(i as u32));
    let rel_id: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| c.cost(name(a), name(b))).collect()).collect();
    let del = p1.labels.iter().map(|&a| c.cost(name(a as usize), None)).collect();
    let ins = p2.labels.iter().map(|&b| c.cost(None, name(b as usize))).collect();
    let rel = p1.labels.iter().map(|&a| p2.labels.iter().map(|&b| rel_id[a as usize][b as usize]).collect()).collect();
    Ok((p1, p2, Costs { del, ins, rel }))
}

/// Tree edit distance by the memoized forest recursion. Use for small trees.
pub fn edit_distance_oracle(t1: &LabeledTree, t2: &LabeledTree, c: &CostFunction) -> Result<f64, CostError> {
    let (p1, p2, cs) = prepare(t1, t2, c)?;
    struct Ctx<'a> {
        p1: &'a Post,
        p2: &'a Post,
        cs: &'a Costs,
        memo: HashMap<(usize, usize, usize, usize), f64>,
    }
    // forests are half-open postorder intervals [l, r)
    fn go(x: &mut Ctx, l1: usize, r1: usize, l2: usize, r2: usize) -> f64 {
        if l1 == r1 && l2 == r2 {
            return 0.0;
        }
        if let Some(&v) = x.memo.get(&(l1, r1, l2, r2)) {
            return v;
        }
        let v = if l2 == r2 {
            go(x, l1, r1 - 1, l2, r2) + x.cs.del[r1 - 1]
        } else if l1 == r1 {
            go(x, l1, r1, l2, r2 - 1) + x.cs.ins[r2 - 1]
        } else {
            let (v, w) = (r1 - 1, r2 - 1);
            let (lv, lw) = (x.p1.lml[v], x.p2.lml[w]);
            let a = go(x, l1, v, l2, r2) + x.cs.del[v];
            let b = go(x, l1, r1, l2, w) + x.cs.ins[w];
            let m = go(x, lv, v, lw, w) + go(x, l1, lv, l2, lw) + x.cs.rel[v][w];
            a.min(b).min(m)
        };
        x.memo.insert((l1, r1, l2, r2), v);
        v
    }
    let mut x = Ctx { p1: &p1, p2: &p2, cs: &cs, memo: HashMap::new() };
    Ok(go(&mut x, 0, p1.len(), 0, p2.len()))
}

fn keyroots(p: &Post) -> Vec<usize> {
    // a node is a keyroot iff no later node shares its leftmost leaf
    let mut last_with = HashMap::new();
    for v in 0..p.len() {
        last_with.insert(p.lml[v], v);
    }
    let mut k: Vec<usize> = last_with.into_values().collect();
    k.sort_unstable();
    k
}

/// Zhang–Shasha tree edit distance over keyroot pairs.
pub fn zhang_shasha(t1: &LabeledTree, t2: &LabeledTree, c: &CostFunction) -> Result<f64, CostError> {
    let (p1, p2, cs) = prepare(t1, t2, c)?;
    let (n1, n2) = (p1.len(), p2.len());
    if n1 == 0 || n2 == 0 {
        return Ok(cs.del.iter().sum::<f64>() + cs.ins.iter().sum::<f64>());
    }
    let mut td = vec![vec![0.0; n2]; n1];
    let mut fd = vec![vec![0.0; n2 + 1]; n1 + 1];
    for &i in &keyroots(&p1) {
        for &j in &keyroots(&p2) {
            let (li, lj) = (p1.lml[i], p2.lml[j]);
            // fd[a][b]: forest [li, li+a) against [lj, lj+b)
            fd[0][0] = 0.0;
            for a in 1..=i - li + 1 {
                fd[a][0] = fd[a - 1][0] + cs.del[li + a - 1];
            }
            for b in 1..=j - lj + 1 {
                fd[0][b] = fd[0][b - 1] + cs.ins[lj + b - 1];
            }
            for a in 1..=i - li + 1 {
                let v = li + a - 1;
                for b in 1..=j - lj + 1 {
                    let w = lj + b - 1;
                    let del = fd[a - 1][b] + cs.del[v];
                    let ins = fd[a][b - 1] + cs.ins[w];
                    if p1.lml[v] == li && p2.lml[w] == lj {
                        let m = fd[a - 1][b - 1] + cs.rel[v][w];
                        let d = del.min(ins).min(m);
                        fd[a][b] = d;
                        td[v][w] = d;
                    } else {
                        let (pa, pb) = (p1.lml[v] - li, p2.lml[w] - lj);
                        let m = fd[pa][pb] + td[v][w];
                        fd[a][b] = del.min(ins).min(m);
                    }
                }
            }
        }
    }
    Ok(td[n1 - 1][n2 - 1])
}

/// Square table over half-open child ranges `[h, k)`.
#[derive(Clone, Default)]
struct RangeTable {
    n: usize,
    v: Vec<f64>,
}

impl RangeTable {
    fn new(n: usize) -> Self {
        RangeTable { n, v: vec![f64::INFINITY; (n + 1) * (n + 1)] }
    }
    #[inline]
    fn get(&self, h: usize, k: usize) -> f64 {
        self.v[h * (self.n + 1) + k]
    }
    #[inline]
    fn set(&mut self, h: usize, k: usize, x: f64) {
        self.v[h * (self.n + 1) + k] = x;
    }
}

/// Ordered tree alignment distance (Jiang, Wang and Zhang).
///
/// For every node pair `(v, w)` two range families are kept:
/// `g1[v][w][h..k] = α(F1(v_h..v_k), F2(w))` and
/// `g2[v][w][h..k] = α(F1(v), F2(w_h..w_k))`. They are filled from the
/// forest tables that fix the first child on one side.
pub fn alignment_distance(t1: &LabeledTree, t2: &LabeledTree, c: &CostFunction) -> Result<f64, CostError> {
    let (p1, p2, cs) = prepare(t1, t2, c)?;
    let (n1, n2) = (p1.len(), p2.len());
    if n1 == 0 || n2 == 0 {
        return Ok(cs.del.iter().sum::<f64>() + cs.ins.iter().sum::<f64>());
    }
    // cost of deleting or inserting a whole subtree
    let mut del_t = vec![0.0; n1];
    for v in 0..n1 {
        del_t[v] = cs.del[v] + p1.kids[v].iter().map(|&c| del_t[c]).sum::<f64>();
    }
    let mut ins_t = vec![0.0; n2];
    for w in 0..n2 {
        ins_t[w] = cs.ins[w] + p2.kids[w].iter().map(|&c| ins_t[c]).sum::<f64>();
    }
    let del_f = |v: usize| del_t[v] - cs.del[v];
    let ins_f = |w: usize| ins_t[w] - cs.ins[w];

    let mut at = vec![vec![0.0; n2]; n1];
    let mut g1: Vec<Vec<RangeTable>> = vec![vec![RangeTable::default(); n2]; n1];
    let mut g2: Vec<Vec<RangeTable>> = vec![vec![RangeTable::default(); n2]; n1];
    let mut d = Vec::new();

    for v in 0..n1 {
        let vs = &p1.kids[v];
        let i = vs.len();
        for w in 0..n2 {
            let ws = &p2.kids[w];
            let j = ws.len();
            let mut t1 = RangeTable::new(i);
            let mut t2 = RangeTable::new(j);
            for h in 0..=i {
                t1.set(h, h, ins_f(w));
            }
            for h in 0..=j {
                t2.set(h, h, del_f(v));
            }
            // forest DP with the ranges starting at child s of v and child t of w
            let run = |s: usize, t: usize, d: &mut Vec<f64>| {
                let cols = j + 1;
                d.clear();
                d.resize((i + 1) * cols, f64::INFINITY);
                let at_ = |p: usize, q: usize| p * cols + q;
                d[at_(s, t)] = 0.0;
                for p in s + 1..=i {
                    d[at_(p, t)] = d[at_(p - 1, t)] + del_t[vs[p - 1]];
                }
                for q in t + 1..=j {
                    d[at_(s, q)] = d[at_(s, q - 1)] + ins_t[ws[q - 1]];
                }
                for p in s + 1..=i {
                    let a = vs[p - 1];
                    for q in t + 1..=j {
                        let b = ws[q - 1];
                        let mut best = d[at_(p - 1, q - 1)] + at[a][b];
                        best = best.min(d[at_(p - 1, q)] + del_t[a]);
                        best = best.min(d[at_(p, q - 1)] + ins_t[b]);
                        // v_k..v_p under an inserted w_q
                        let gb = &g1[v][b];
                        for k in s..p {
                            best = best.min(cs.ins[b] + d[at_(k, q - 1)] + gb.get(k, p));
                        }
                        // w_k..w_q under a deleted v_p
                        let ga = &g2[a][w];
                        for k in t..q {
                            best = best.min(cs.del[a] + d[at_(p - 1, k)] + ga.get(k, q));
                        }
                        d[at_(p, q)] = best;
                    }
                }
            };
            for s in 0..i {
                run(s, 0, &mut d);
                for p in s + 1..=i {
                    t1.set(s, p, d[p * (j + 1) + j]);
                }
            }
            for t in 0..j {
                run(0, t, &mut d);
                for q in t + 1..=j {
                    t2.set(t, q, d[i * (j + 1) + q]);
                }
            }
            let forest = if i == 0 { ins_f(w) } else { t1.get(0, i) };
            let mut best = forest + cs.rel[v][w];
            for &wr in ws {
                best = best.min(ins_t[w] + at[v][wr] - ins_t[wr]);
            }
            for &vr in vs {
                best = best.min(del_t[v] + at[vr][w] - del_t[vr]);
            }
            at[v][w] = best;
            g1[v][w] = t1;
            g2[v][w] = t2;
        }
    }
    Ok(at[n1 - 1][n2 - 1])
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

    /// Alignment by the rightmost-root recursion over forests given as root
    /// lists. Independent of the range tables above.
    fn alignment_oracle(t1: &LabeledTree, t2: &LabeledTree, c: &CostFunction) -> f64 {
        type Memo = HashMap<(Vec<usize>, Vec<usize>), f64>;
        struct X<'a> {
            t1: &'a LabeledTree,
            t2: &'a LabeledTree,
            c: &'a CostFunction,
            memo: Memo,
        }
        fn sub_cost(t: &LabeledTree, roots: &[usize], f: &dyn Fn(&str) -> f64) -> f64 {
            let mut s = 0.0;
            let mut st: Vec<usize> = roots.to_vec();
            while let Some(v) = st.pop() {
                s += f(t.label(v));
                st.extend(t.children(v));
            }
            s
        }
        fn go(x: &mut X, f1: &[usize], f2: &[usize]) -> f64 {
            if f1.is_empty() {
                return sub_cost(x.t2, f2, &|l| x.c.cost(None, Some(l)));
            }
            if f2.is_empty() {
                return sub_cost(x.t1, f1, &|l| x.c.cost(Some(l), None));
            }
            let key = (f1.to_vec(), f2.to_vec());
            if let Some(&v) = x.memo.get(&key) {
                return v;
            }
            let (v, w) = (*f1.last().unwrap(), *f2.last().unwrap());
            let (r1, r2) = (&f1[..f1.len() - 1], &f2[..f2.len() - 1]);
            let (k1, k2) = (x.t1.children(v).to_vec(), x.t2.children(w).to_vec());
            let (lv, lw) = (x.t1.label(v).to_string(), x.t2.label(w).to_string());
            let mut best = go(x, r1, r2) + x.c.cost(Some(&lv), Some(&lw)) + go(x, &k1, &k2);
            for s in 0..=f2.len() {
                let val = go(x, r1, &f2[..s]) + x.c.cost(Some(&lv), None) + go(x, &k1, &f2[s..]);
                best = best.min(val);
            }
            for s in 0..=f1.len() {
                let val = go(x, &f1[..s], r2) + x.c.cost(None, Some(&lw)) + go(x, &f1[s..], &k2);
                best = best.min(val);
            }
            x.memo.insert(key, best);
            best
        }
        let mut x = X { t1, t2, c, memo: HashMap::new() };
        let f1: Vec<usize> = t1.root_opt().into_iter().collect();
        let f2: Vec<usize> = t2.root_opt().into_iter().collect();
        go(&mut x, &f1, &f2)
    }

    #[test]
    fn edit_examples() {
        let u = CostFunction::unit();
        let a = t("f(d(a,c(b)),e)");
        assert_eq!(edit_distance_oracle(&a, &a, &u).unwrap(), 0.0);
        assert_eq!(edit_distance_oracle(&LabeledTree::empty(), &t("a(b,c)"), &u).unwrap(), 3.0);
        assert_eq!(zhang_shasha(&t("a"), &t("b"), &u).unwrap(), 1.0);
        let b = t("a(c(d(a,b)),d)");
        let o = edit_distance_oracle(&a, &b, &u).unwrap();
        assert!(o <= 4.0);
        assert_eq!(o, 4.0);
        assert_eq!(zhang_shasha(&a, &b, &u).unwrap(), o);
    }

    #[test]
    fn alignment_examples() {
        let u = CostFunction::unit();
        let (a, b) = (t("a(e(b,c),d)"), t("a(b,f(c,d))"));
        assert_eq!(alignment_distance(&a, &b, &u).unwrap(), 4.0);
        assert_eq!(zhang_shasha(&a, &b, &u).unwrap(), 2.0);
        assert_eq!(alignment_distance(&a, &a, &u).unwrap(), 0.0);
        let c = a.delete_node(1);
        let sum = alignment_distance(&a, &c, &u).unwrap() + alignment_distance(&c, &b, &u).unwrap();
        assert_eq!(sum, 2.0);
    }

    #[test]
    fn zhang_shasha_exhaustive_small() {
        let u = CostFunction::unit();
        let mut trees = Vec::new();
        for n in 1..=4 {
            trees.extend(all_trees(n, &["a", "b"]));
        }
        for x in &trees {
            for y in &trees {
                assert_eq!(zhang_shasha(x, y, &u).unwrap(), edit_distance_oracle(x, y, &u).unwrap(), "{x} {y}");
            }
        }
    }

    #[test]
    fn alignment_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = CostFunction::unit();
        for _ in 0..400 {
            let (n1, n2) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
            let a = random_tree(&mut rng, n1, &["a", "b", "c"]);
            let b = random_tree(&mut rng, n2, &["a", "b", "c"]);
            let al = alignment_distance(&a, &b, &u).unwrap();
            assert_eq!(al, alignment_oracle(&a, &b, &u), "{a} {b}");
            assert!(zhang_shasha(&a, &b, &u).unwrap() <= al);
        }
    }

    #[test]
    fn weighted_costs_agree() {
        let mut c = CostFunction::unit();
        c.set(Some("a"), Some("b"), 0.5);
        c.set(Some("a"), None, 1.5);
        c.set(Some("b"), None, 1.25);
        c.set(Some("c"), None, 0.75);
        c.set(Some("a"), Some("c"), 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let (n1, n2) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
            let a = random_tree(&mut rng, n1, &["a", "b", "c"]);
            let b = random_tree(&mut rng, n2, &["a", "b", "c"]);
            let zs = zhang_shasha(&a, &b, &c).unwrap();
            assert!((zs - edit_distance_oracle(&a, &b, &c).unwrap()).abs() < 1e-9);
            let al = alignment_distance(&a, &b, &c).unwrap();
            assert!((al - alignment_oracle(&a, &b, &c)).abs() < 1e-9, "{a} {b}");
            assert!(zs <= al + 1e-9);
        }
    }

    #[test]
    fn non_metric_rejected() {
        let mut c = CostFunction::unit();
        c.set(Some("a"), Some("b"), 5.0);
        let err = zhang_shasha(&t("a"), &t("b"), &c).unwrap_err();
        assert!(matches!(err, CostError::Triangle { .. }));
        let mut c = CostFunction::unit();
        c.set(Some("a"), Some("b"), -1.0);
        assert!(matches!(c.validate(["a", "b"]), Err(CostError::Invalid { .. })));
        let c = CostFunction::parse("a b 1\nb a 2\n").unwrap();
        assert!(matches!(c.validate(["a", "b"]), Err(CostError::Asymmetric { .. })));
    }

    #[test]
    fn cost_file() {
        let c = CostFunction::parse("# costs\na - 2\n\na b 1.5\n").unwrap();
        assert_eq!(c.cost(Some("a"), None), 2.0);
        assert_eq!(c.cost(None, Some("a")), 2.0);
        assert_eq!(c.cost(Some("b"), Some("a")), 1.5);
        assert_eq!(c.cost(Some("z"), Some("z")), 0.0);
        assert!(CostFunction::parse("a b").is_err());
        assert!(CostFunction::parse("a b x").is_err());
    }

    #[test]
    fn unit_distance_is_metric_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = CostFunction::unit();
        for _ in 0..200 {
            let ts: Vec<_> = (0..3).map(|_| {
                let n = rng.gen_range(1..=8);
                random_tree(&mut rng, n, &["a", "b"])
            }).collect();
            let d = |i: usize, j: usize| zhang_shasha(&ts[i], &ts[j], &u).unwrap();
            assert_eq!(d(0, 1), d(1, 0));
            assert_eq!(d(0, 0), 0.0);
            assert!(d(0, 2) <= d(0, 1) + d(1, 2));
        }
    }
}
