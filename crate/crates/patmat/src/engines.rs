//! Faster state-set simulations.
//!
//! An automaton too big for one data structure is split along a clustering
//! of its parse tree into a nested decomposition: one small automaton per
//! cluster, where each child cluster shows up as a pseudo-leaf labeled β.
//! Every small automaton gets a [`SimulationDs`]:
//!
//! * [`SimpleDs`]: ε-reachability matrix packed into one bit string, closure
//!   with a multiply, a subtract and a compress.
//! * [`SeparatorDs`]: closure in one pass per level of a separator tree.
//! * [`FrDs`]: tabulated successor and closure maps shared by every cluster
//!   with the same label-free shape.
//! * [`ClassicDs`]: breadth-first search.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use smallvec::{smallvec, SmallVec};

use crate::bitstring::BitString;
use crate::regex::{parse_regex, thompson, with_empty, AstNode, Kind, RegexAst, RegexError, StateSet, Sym, Tnfa, BETA_SYM};

/// Move/Close/Member/Insert over one automaton, in the structure's own
/// bit layout.
pub trait SimulationDs: Send + Sync {
    fn states(&self) -> usize;
    fn empty(&self) -> BitString;
    fn member(&self, s: &BitString, q: usize) -> bool;
    fn insert(&self, s: &mut BitString, q: usize);
    fn move_a(&self, s: &BitString, a: Sym) -> BitString;
    fn close_a(&self, s: &BitString) -> BitString;

    fn encode(&self, set: &StateSet) -> BitString {
        let mut b = self.empty();
        for q in set.iter_ones() {
            self.insert(&mut b, q);
        }
        b
    }

    fn decode(&self, s: &BitString) -> StateSet {
        let mut out = BitString::zeros(self.states());
        for q in 0..self.states() {
            if self.member(s, q) {
                out.set(q);
            }
        }
        out
    }
}

pub struct ClassicDs {
    tnfa: Tnfa,
}

impl ClassicDs {
    pub fn new(tnfa: Tnfa) -> Self {
        ClassicDs { tnfa }
    }
}

impl SimulationDs for ClassicDs {
    fn states(&self) -> usize {
        self.tnfa.n
    }
    fn empty(&self) -> BitString {
        self.tnfa.empty_set()
    }
    fn member(&self, s: &BitString, q: usize) -> bool {
        s.get(q)
    }
    fn insert(&self, s: &mut BitString, q: usize) {
        s.set(q)
    }
    fn move_a(&self, s: &BitString, a: Sym) -> BitString {
        self.tnfa.move_set(s, a)
    }
    fn close_a(&self, s: &BitString) -> BitString {
        self.tnfa.close(s)
    }
}

/// Small map keyed by symbol, sorted for binary search.
#[derive(Debug, Clone, Default)]
struct SymMap<T> {
    keys: Vec<Sym>,
    vals: Vec<T>,
}

impl<T> SymMap<T> {
    fn get(&self, a: &Sym) -> Option<&T> {
        self.keys.binary_search(a).ok().map(|i| &self.vals[i])
    }

    fn entry_or(&mut self, a: Sym, init: impl FnOnce() -> T) -> &mut T {
        let i = match self.keys.binary_search(&a) {
            Ok(i) => i,
            Err(i) => {
                self.keys.insert(i, a);
                self.vals.insert(i, init());
                i
            }
        };
        &mut self.vals[i]
    }
}

/// Symbol masks over the targets of symbol transitions.
fn symbol_masks(tnfa: &Tnfa, len: usize, pos: impl Fn(usize) -> usize) -> SymMap<BitString> {
    let mut d = SymMap::default();
    for &(_, v, a) in &tnfa.sym_edges {
        d.entry_or(a, || BitString::zeros(len)).set(pos(v));
    }
    d
}

/// Reflexive ε-reachability from one state, restricted to `inside`.
fn eps_reach(tnfa: &Tnfa, from: usize, inside: &[bool], reverse: Option<&[Vec<usize>]>) -> Vec<usize> {
    let mut seen = vec![false; tnfa.n];
    let mut st = vec![from];
    seen[from] = true;
    let mut out = Vec::new();
    while let Some(u) = st.pop() {
        out.push(u);
        let next: &[usize] = match reverse {
            Some(r) => &r[u],
            None => &tnfa.eps[u],
        };
        for &v in next {
            if inside[v] && !seen[v] {
                seen[v] = true;
                st.push(v);
            }
        }
    }
    out
}

fn reverse_eps(tnfa: &Tnfa) -> Vec<Vec<usize>> {
    let mut r = vec![Vec::new(); tnfa.n];
    for (u, e) in tnfa.eps.iter().enumerate() {
        for &v in e {
            r[v].push(u);
        }
    }
    r
}

/// State `j` of an `m`-state automaton sits at bit `j`. Block `i` of the
/// closure strings spans bits `i(m+1) .. i(m+1)+m`, with its test bit at the
/// top.
pub struct SimpleDs {
    m: usize,
    len: usize,
    /// `E, I, I>>m, X, C` as native words when `m(m+1) ≤ 128`
    narrow: Option<[u128; 5]>,
    d: SymMap<BitString>,
    e: BitString,
    i: BitString,
    i_shift: BitString,
    x: BitString,
    c: BitString,
}

impl SimpleDs {
    pub fn new(tnfa: &Tnfa) -> Self {
        let m = tnfa.n;
        let b = m + 1;
        let len = m * m + m;
        let mut e = BitString::zeros(len);
        let all = vec![true; m];
        for j in 0..m {
            for i in eps_reach(tnfa, j, &all, None) {
                e.set(i * b + j);
            }
        }
        let i = BitString::from_positions(len, (0..m).map(|k| k * b + m));
        let x = BitString::from_positions(len, (0..m).map(|k| k * b));
        let c = BitString::from_positions(len, (0..m).map(|k| (m - 1 - k) * m));
        let i_shift = i.shr(m);
        let narrow = (len <= 128).then(|| [e.low_u128(), i.low_u128(), i_shift.low_u128(), x.low_u128(), c.low_u128()]);
        SimpleDs { m, len, narrow, d: symbol_masks(tnfa, m, |v| v), e, i_shift, i, x, c }
    }

    fn close_narrow(&self, s: u128, [e, i, ish, x, c]: [u128; 5]) -> u128 {
        let mask = if self.len == 128 { !0 } else { (1u128 << self.len) - 1 };
        let y = s.wrapping_mul(x) & e;
        let z = ((y | i).wrapping_sub(ish)) & i;
        (z.wrapping_mul(c) & mask) >> (self.m * self.m)
    }

    fn widen(&self, s: &BitString) -> BitString {
        let mut w = s.clone();
        w.resize(self.len);
        w
    }

    /// `S × X` as an explicit shift-or of copies.
    pub fn copies_shift_or(&self, s: &BitString) -> BitString {
        let s = self.widen(s);
        let mut out = BitString::zeros(self.len);
        for k in 0..self.m {
            out.or_assign(&s.shl(k * (self.m + 1)));
        }
        out
    }

    pub fn copies_mul(&self, s: &BitString) -> BitString {
        self.widen(s).mul(&self.x)
    }

    /// Test bits gathered into `m` consecutive bits, by a shift-or.
    pub fn compress_shift_or(&self, z: &BitString) -> BitString {
        let mut out = BitString::zeros(self.m);
        for k in 0..self.m {
            if z.get(k * (self.m + 1) + self.m) {
                out.set(k);
            }
        }
        out
    }

    pub fn compress_mul(&self, z: &BitString) -> BitString {
        z.mul(&self.c).extract(self.m * self.m, self.m)
    }

    pub fn test_bits(&self, s: &BitString) -> BitString {
        let y = self.copies_mul(s).and(&self.e);
        y.or(&self.i).sub(&self.i_shift).and(&self.i)
    }
}

impl SimulationDs for SimpleDs {
    fn states(&self) -> usize {
        self.m
    }
    fn empty(&self) -> BitString {
        BitString::zeros(self.m)
    }
    fn member(&self, s: &BitString, q: usize) -> bool {
        s.get(q)
    }
    fn insert(&self, s: &mut BitString, q: usize) {
        s.set(q)
    }
    fn move_a(&self, s: &BitString, a: Sym) -> BitString {
        match self.d.get(&a) {
            Some(d) => s.shl(1).and(d),
            None => self.empty(),
        }
    }
    fn close_a(&self, s: &BitString) -> BitString {
        match self.narrow {
            Some(k) => BitString::from_u128(self.m, self.close_narrow(s.low_u128(), k)),
            None => self.compress_mul(&self.test_bits(s)),
        }
    }
}

impl SimpleDs {
    /// Closure through the multi-word path even when the native one applies.
    pub fn close_wide(&self, s: &BitString) -> BitString {
        self.compress_mul(&self.test_bits(s))
    }
}

fn ast_parents(ast: &RegexAst) -> Vec<Option<usize>> {
    let mut p = vec![None; ast.len()];
    for (v, n) in ast.nodes.iter().enumerate() {
        for &k in &n.kids {
            p[k] = Some(v);
        }
    }
    p
}

/// Node of the separator tree.
#[derive(Debug, Clone)]
pub struct SepNode {
    pub depth: usize,
    /// parse nodes of the cluster
    pub cluster: Vec<usize>,
    /// parse node whose two states form `X(v)`
    pub sep: usize,
    /// outer and inner child; `None` for a leaf
    pub kids: Option<(usize, usize)>,
    pub lo: usize,
    pub width: usize,
}

struct Level {
    xt: BitString,
    et: BitString,
    xp: BitString,
    ep: BitString,
    i: BitString,
    i_shift: BitString,
    t: usize,
}

/// Closure over separator-tree levels. A leaf interval of width `L` holds
/// `θ` at offset `L-2`, `φ` at `L-3` and the test bit at `L-1`; the outer
/// part of a split takes the high half of the interval.
pub struct SeparatorDs {
    n: usize,
    pub l: usize,
    pub depth: usize,
    pub nodes: Vec<SepNode>,
    pos: Vec<usize>,
    d: SymMap<BitString>,
    levels: Vec<Level>,
    /// set when some symbol transition does not have adjacent endpoints
    pub scatter: Option<Vec<(usize, usize, Sym)>>,
}

impl SeparatorDs {
    pub fn new(ast: &RegexAst, tnfa: &Tnfa) -> Self {
        let parent = ast_parents(ast);
        let mut nodes: Vec<SepNode> = Vec::new();
        let mut all: Vec<usize> = (0..ast.len()).collect();
        all.sort_by_key(|&v| tnfa.node_states[v].0);
        build_sep(&parent, ast.root, all, 0, &mut nodes);
        let depth = nodes.iter().map(|v| v.depth).max().unwrap_or(0);
        let l = 3 << depth;
        // assign intervals top-down
        nodes[0].lo = 0;
        nodes[0].width = l;
        let mut pos = vec![usize::MAX; tnfa.n];
        for v in 0..nodes.len() {
            let (lo, w) = (nodes[v].lo, nodes[v].width);
            match nodes[v].kids {
                Some((o, i)) => {
                    nodes[o].lo = lo + w / 2;
                    nodes[o].width = w / 2;
                    nodes[i].lo = lo;
                    nodes[i].width = w / 2;
                }
                None => {
                    let (t, f) = tnfa.node_states[nodes[v].sep];
                    pos[t] = lo + w - 2;
                    pos[f] = lo + w - 3;
                }
            }
        }
        let rev = reverse_eps(tnfa);
        let mut levels = Vec::with_capacity(depth + 1);
        for k in 0..=depth {
            let width = l >> k;
            let mut lv = Level {
                xt: BitString::zeros(l),
                et: BitString::zeros(l),
                xp: BitString::zeros(l),
                ep: BitString::zeros(l),
                i: BitString::from_positions(l, (0..(1 << k)).map(|b| b * width + width - 1)),
                i_shift: BitString::zeros(l),
                t: width - 1,
            };
            lv.i_shift = lv.i.shr(lv.t);
            levels.push(lv);
        }
        let mut inside = vec![false; tnfa.n];
        for v in &nodes {
            for &u in &v.cluster {
                let (a, b) = tnfa.node_states[u];
                inside[a] = true;
                inside[b] = true;
            }
            let (th, ph) = tnfa.node_states[v.sep];
            let to_th = eps_reach(tnfa, th, &inside, Some(&rev));
            let from_th = eps_reach(tnfa, th, &inside, None);
            let to_ph = eps_reach(tnfa, ph, &inside, Some(&rev));
            let from_ph = eps_reach(tnfa, ph, &inside, None);
            let last = if v.kids.is_none() { depth } else { v.depth };
            for lv in &mut levels[v.depth..=last] {
                for &q in &to_th {
                    lv.xt.set(pos[q]);
                }
                for &q in &from_th {
                    lv.et.set(pos[q]);
                }
                for &q in &to_ph {
                    lv.xp.set(pos[q]);
                }
                for &q in &from_ph {
                    lv.ep.set(pos[q]);
                }
            }
            for &u in &v.cluster {
                let (a, b) = tnfa.node_states[u];
                inside[a] = false;
                inside[b] = false;
            }
        }
        let adjacent = tnfa.sym_edges.iter().all(|&(u, v, _)| pos[v] + 1 == pos[u]);
        let scatter = (!adjacent).then(|| tnfa.sym_edges.clone());
        let d = symbol_masks(tnfa, l, |v| pos[v]);
        SeparatorDs { n: tnfa.n, l, depth, nodes, pos, d, levels, scatter }
    }

    pub fn position(&self, q: usize) -> usize {
        self.pos[q]
    }
}

fn build_sep(
    parent: &[Option<usize>],
    root: usize,
    cluster: Vec<usize>,
    depth: usize,
    out: &mut Vec<SepNode>,
) -> usize {
    let me = out.len();
    out.push(SepNode { depth, cluster: cluster.clone(), sep: root, kids: None, lo: 0, width: 0 });
    let t = cluster.len();
    if t == 1 {
        return me;
    }
    // subtree sizes inside the cluster; `cluster` is in preorder
    let idx: HashMap<usize, usize> = cluster.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut size = vec![1usize; t];
    for i in (1..t).rev() {
        let p = parent[cluster[i]].unwrap();
        size[idx[&p]] += size[i];
    }
    let best = (1..t).min_by_key(|&i| (size[i].max(t - size[i]), usize::MAX - size[i])).unwrap();
    let x = cluster[best];
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    let mut in_inner = vec![false; t];
    for i in 0..t {
        let v = cluster[i];
        let under = i == best || (i > 0 && parent[v].is_some_and(|p| idx.get(&p).is_some_and(|&j| in_inner[j])));
        in_inner[i] = under;
        if under {
            inner.push(v);
        } else {
            outer.push(v);
        }
    }
    out[me].sep = x;
    let o = build_sep(parent, root, outer, depth + 1, out);
    let i = build_sep(parent, x, inner, depth + 1, out);
    out[me].kids = Some((o, i));
    me
}

impl SimulationDs for SeparatorDs {
    fn states(&self) -> usize {
        self.n
    }
    fn empty(&self) -> BitString {
        BitString::zeros(self.l)
    }
    fn member(&self, s: &BitString, q: usize) -> bool {
        s.get(self.pos[q])
    }
    fn insert(&self, s: &mut BitString, q: usize) {
        s.set(self.pos[q])
    }
    fn move_a(&self, s: &BitString, a: Sym) -> BitString {
        if let Some(edges) = &self.scatter {
            let mut out = self.empty();
            for &(u, v, b) in edges {
                if b == a && s.get(self.pos[u]) {
                    out.set(self.pos[v]);
                }
            }
            return out;
        }
        match self.d.get(&a) {
            Some(d) => s.shr(1).and(d),
            None => self.empty(),
        }
    }
    fn close_a(&self, s: &BitString) -> BitString {
        let mut s = s.clone();
        let n = s.words().len();
        if n == 1 {
            let mut w = s.words()[0];
            for lv in &self.levels {
                let (i, is) = (lv.i.words()[0], lv.i_shift.words()[0]);
                let mut acc = 0;
                for (x, e) in [(&lv.xt, &lv.et), (&lv.xp, &lv.ep)] {
                    let z = ((w & x.words()[0]) | i).wrapping_sub(is) & i;
                    acc |= z.wrapping_sub(z.checked_shr(lv.t as u32).unwrap_or(0)) & e.words()[0];
                }
                w |= acc;
            }
            s.words_mut()[0] = w;
            return s;
        }
        let mut z: SmallVec<[u64; 8]> = smallvec![0; n];
        let mut acc: SmallVec<[u64; 8]> = smallvec![0; n];
        for lv in &self.levels {
            acc.iter_mut().for_each(|w| *w = 0);
            for (x, e) in [(&lv.xt, &lv.et), (&lv.xp, &lv.ep)] {
                let (sw, xw, iw, isw) = (s.words(), x.words(), lv.i.words(), lv.i_shift.words());
                // Z = ((S & X | I) - (I >> t)) & I
                let mut borrow = 0u64;
                for k in 0..n {
                    let (d1, b1) = ((sw[k] & xw[k]) | iw[k]).overflowing_sub(isw[k]);
                    let (d2, b2) = d1.overflowing_sub(borrow);
                    borrow = (b1 | b2) as u64;
                    z[k] = d2 & iw[k];
                }
                // G = (Z - (Z >> t)) & E
                let (ws, bs) = (lv.t / 64, lv.t % 64);
                let ew = e.words();
                let mut borrow = 0u64;
                for k in 0..n {
                    let src = k + ws;
                    let mut sh = if src < n { z[src] >> bs } else { 0 };
                    if bs != 0 && src + 1 < n {
                        sh |= z[src + 1] << (64 - bs);
                    }
                    let (d1, b1) = z[k].overflowing_sub(sh);
                    let (d2, b2) = d1.overflowing_sub(borrow);
                    borrow = (b1 | b2) as u64;
                    acc[k] |= d2 & ew[k];
                }
            }
            for (w, a) in s.words_mut().iter_mut().zip(&acc) {
                *w |= a;
            }
        }
        s
    }

}

impl SeparatorDs {
    /// Level-by-level closure on whole bit strings, as a cross-check for
    /// the word loop.
    pub fn close_reference(&self, s: &BitString) -> BitString {
        let mut s = s.clone();
        for lv in &self.levels {
            let g = |x: &BitString, e: &BitString| {
                let y = s.and(x);
                let z = y.or(&lv.i).sub(&lv.i_shift).and(&lv.i);
                let f = z.sub(&z.shr(lv.t));
                f.and(e)
            };
            let gt = g(&lv.xt, &lv.et);
            let gp = g(&lv.xp, &lv.ep);
            s.or_assign(&gt);
            s.or_assign(&gp);
        }
        s
    }
}

/// Preorder kinds with symbols erased.
pub fn shape_key(ast: &RegexAst) -> Vec<u8> {
    let mut key = Vec::with_capacity(ast.len());
    let mut st = vec![ast.root];
    while let Some(v) = st.pop() {
        key.push(match ast.nodes[v].kind {
            Kind::Sym(_) => b'l',
            Kind::Concat => b'c',
            Kind::Union => b'u',
            Kind::Star => b's',
        });
        st.extend(ast.nodes[v].kids.iter().rev());
    }
    key
}

#[derive(Debug)]
pub struct FrTables {
    succ: Vec<u64>,
    close: Vec<u64>,
}

/// Shape-keyed table cache with an entry budget.
#[derive(Debug, Default)]
pub struct FrCache {
    tables: HashMap<Vec<u8>, Arc<FrTables>>,
    used: usize,
    pub budget: usize,
}

impl FrCache {
    pub fn new(budget: usize) -> Self {
        FrCache { budget, ..Default::default() }
    }
}

pub const DEFAULT_FR_BUDGET: usize = 1 << 16;

pub fn fr_budget_from_env() -> usize {
    std::env::var("PATMAT_FR_BUDGET").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_FR_BUDGET)
}

/// Four-Russians structure: `Move(S, α) = Succ(S) ∩ Eq(α)`.
pub struct FrDs {
    n: usize,
    succ1: Vec<u64>,
    close1: Vec<u64>,
    eq: SymMap<u64>,
    tables: Option<Arc<FrTables>>,
}

impl FrDs {
    pub fn new(ast: &RegexAst, tnfa: &Tnfa, cache: &mut FrCache) -> Self {
        let n = tnfa.n;
        assert!(n <= 64, "four-russians structure holds at most 64 states");
        let mut succ1 = vec![0u64; n];
        for &(u, v, _) in &tnfa.sym_edges {
            succ1[u] |= 1 << v;
        }
        let all = vec![true; n];
        let close1: Vec<u64> =
            (0..n).map(|q| eps_reach(tnfa, q, &all, None).into_iter().fold(0, |m, v| m | 1 << v)).collect();
        let mut eq = SymMap::default();
        for &(_, v, a) in &tnfa.sym_edges {
            *eq.entry_or(a, || 0) |= 1 << v;
        }
        let key = shape_key(ast);
        let tables = match cache.tables.get(&key) {
            Some(t) => Some(t.clone()),
            None if n < 32 && cache.used + (2usize << n) <= cache.budget => {
                cache.used += 2 << n;
                let size = 1usize << n;
                let mut succ = vec![0u64; size];
                let mut close = vec![0u64; size];
                for x in 1..size {
                    let low = x.trailing_zeros() as usize;
                    succ[x] = succ[x & (x - 1)] | succ1[low];
                    close[x] = close[x & (x - 1)] | close1[low];
                }
                let t = Arc::new(FrTables { succ, close });
                cache.tables.insert(key, t.clone());
                Some(t)
            }
            None => None,
        };
        FrDs { n, succ1, close1, eq, tables }
    }

    /// False when the structure runs without tables (over budget).
    pub fn is_tabulated(&self) -> bool {
        self.tables.is_some()
    }

    pub fn table_ptr(&self) -> Option<*const FrTables> {
        self.tables.as_ref().map(Arc::as_ptr)
    }

    fn spread(v: &[u64], mut x: u64) -> u64 {
        let mut r = 0;
        while x != 0 {
            r |= v[x.trailing_zeros() as usize];
            x &= x - 1;
        }
        r
    }

    pub fn succ(&self, x: u64) -> u64 {
        match &self.tables {
            Some(t) => t.succ[x as usize],
            None => Self::spread(&self.succ1, x),
        }
    }
}

impl SimulationDs for FrDs {
    fn states(&self) -> usize {
        self.n
    }
    fn empty(&self) -> BitString {
        BitString::zeros(self.n)
    }
    fn member(&self, s: &BitString, q: usize) -> bool {
        s.get(q)
    }
    fn insert(&self, s: &mut BitString, q: usize) {
        s.set(q)
    }
    fn move_a(&self, s: &BitString, a: Sym) -> BitString {
        let e = self.eq.get(&a).copied().unwrap_or(0);
        BitString::from_u64(self.n, self.succ(s.low_word()) & e)
    }
    fn close_a(&self, s: &BitString) -> BitString {
        let x = s.low_word();
        let r = match &self.tables {
            Some(t) => t.close[x as usize],
            None => Self::spread(&self.close1, x),
        };
        BitString::from_u64(self.n, r)
    }
}

/// One automaton of a nested decomposition.
#[derive(Debug, Clone)]
pub struct SubAutomaton {
    /// parse tree of the cluster with β pseudo-leaves
    pub ast: RegexAst,
    pub tnfa: Tnfa,
    /// global parse node of each local node (pseudo-leaf: the child's root)
    pub to_global_node: Vec<usize>,
    /// global state of each local state
    pub to_global: Vec<usize>,
    pub parent: Option<usize>,
    /// `(child, θ, φ)` with the local states of the pseudo-leaf, in
    /// topological order
    pub children: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct NestedDecomposition {
    pub subs: Vec<SubAutomaton>,
    pub root: usize,
    pub x: usize,
    /// size of `N(R)`
    pub states: usize,
}

/// Node-disjoint clusters of at most `y` nodes, bottom-up: a node absorbs
/// its children's residual clusters until the total would exceed `y`, and
/// the largest residual is closed first.
pub fn cluster_parse_tree(ast: &RegexAst, y: usize) -> Vec<Vec<usize>> {
    let y = y.max(1);
    let n = ast.len();
    let mut post = Vec::with_capacity(n);
    let mut st = vec![(ast.root, false)];
    while let Some((v, done)) = st.pop() {
        if done {
            post.push(v);
        } else {
            st.push((v, true));
            for &k in ast.nodes[v].kids.iter().rev() {
                st.push((k, false));
            }
        }
    }
    let mut residual: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out = Vec::new();
    for &v in &post {
        let mut kids: Vec<Vec<usize>> = ast.nodes[v].kids.iter().map(|&k| std::mem::take(&mut residual[k])).collect();
        let mut total = 1 + kids.iter().map(Vec::len).sum::<usize>();
        while total > y {
            let big = (0..kids.len()).max_by_key(|&i| kids[i].len()).unwrap();
            total -= kids[big].len();
            out.push(std::mem::take(&mut kids[big]));
        }
        let mut r = vec![v];
        for k in kids {
            r.extend(k);
        }
        residual[v] = r;
    }
    out.push(std::mem::take(&mut residual[ast.root]));
    out
}

/// Splits `N(R)` into automata of at most `x` states (`x ≥ 6`).
pub fn nested_decompose(ast: &RegexAst, x: usize) -> NestedDecomposition {
    let x = x.max(6);
    let y = if 2 * ast.len() <= x { ast.len() } else { ((x - 2) / 4).max(1) };
    decompose_with(ast, cluster_parse_tree(ast, y), x)
}

pub fn decompose_with(ast: &RegexAst, clusters: Vec<Vec<usize>>, x: usize) -> NestedDecomposition {
    let global = thompson(ast);
    let mut cluster_of = vec![usize::MAX; ast.len()];
    for (c, cl) in clusters.iter().enumerate() {
        for &v in cl {
            cluster_of[v] = c;
        }
    }
    let parent = ast_parents(ast);
    let root_of: Vec<usize> = clusters
        .iter()
        .map(|cl| *cl.iter().find(|&&v| parent[v].is_none_or(|p| cluster_of[p] != cluster_of[v])).unwrap())
        .collect();
    let mut subs: Vec<Option<SubAutomaton>> = vec![None; clusters.len()];
    for (c, _) in clusters.iter().enumerate() {
        let mut local = RegexAst { nodes: Vec::new(), root: 0 };
        let mut to_global_node = Vec::new();
        let mut pseudo: Vec<(usize, usize)> = Vec::new();
        // copy the cluster, cutting at child clusters
        fn copy(
            ast: &RegexAst,
            v: usize,
            c: usize,
            cluster_of: &[usize],
            local: &mut RegexAst,
            map: &mut Vec<usize>,
            pseudo: &mut Vec<(usize, usize)>,
        ) -> usize {
            let id = local.nodes.len();
            map.push(v);
            if cluster_of[v] != c {
                local.nodes.push(AstNode { kind: Kind::Sym(BETA_SYM), kids: vec![] });
                pseudo.push((id, cluster_of[v]));
                return id;
            }
            local.nodes.push(AstNode { kind: ast.nodes[v].kind, kids: vec![] });
            let kids: Vec<usize> =
                ast.nodes[v].kids.iter().map(|&k| copy(ast, k, c, cluster_of, local, map, pseudo)).collect();
            local.nodes[id].kids = kids;
            id
        }
        copy(ast, root_of[c], c, &cluster_of, &mut local, &mut to_global_node, &mut pseudo);
        let tnfa = thompson(&local);
        let mut to_global = vec![0; tnfa.n];
        for (lv, &gv) in to_global_node.iter().enumerate() {
            let (lt, lf) = tnfa.node_states[lv];
            let (gt, gf) = global.node_states[gv];
            to_global[lt] = gt;
            to_global[lf] = gf;
        }
        let mut kids: Vec<(usize, usize, usize)> = pseudo
            .iter()
            .map(|&(lv, child)| (child, tnfa.node_states[lv].0, tnfa.node_states[lv].1))
            .collect();
        kids.sort_by_key(|&(_, t, _)| to_global[t]);
        subs[c] = Some(SubAutomaton { ast: local, tnfa, to_global_node, to_global, parent: None, children: kids });
    }
    let mut subs: Vec<SubAutomaton> = subs.into_iter().map(Option::unwrap).collect();
    for c in 0..subs.len() {
        for k in 0..subs[c].children.len() {
            let ch = subs[c].children[k].0;
            subs[ch].parent = Some(c);
        }
    }
    // renumber in preorder of the cluster tree
    let root = cluster_of[ast.root];
    let mut order = Vec::with_capacity(subs.len());
    let mut st = vec![root];
    while let Some(c) = st.pop() {
        order.push(c);
        st.extend(subs[c].children.iter().rev().map(|k| k.0));
    }
    let mut rank = vec![0; subs.len()];
    for (i, &c) in order.iter().enumerate() {
        rank[c] = i;
    }
    let mut renum: Vec<SubAutomaton> = order.iter().map(|&c| subs[c].clone()).collect();
    for s in &mut renum {
        s.parent = s.parent.map(|p| rank[p]);
        for k in &mut s.children {
            k.0 = rank[k.0];
        }
    }
    NestedDecomposition { subs: renum, root: 0, x, states: global.n }
}

impl NestedDecomposition {
    /// Union of all local edges in global numbering, pseudo-transitions
    /// dropped.
    pub fn unfold(&self) -> (Vec<(usize, usize)>, Vec<(usize, usize, Sym)>) {
        let mut eps = Vec::new();
        let mut syms = Vec::new();
        for s in &self.subs {
            for (u, e) in s.tnfa.eps.iter().enumerate() {
                for &v in e {
                    eps.push((s.to_global[u], s.to_global[v]));
                }
            }
            for &(u, v, a) in &s.tnfa.sym_edges {
                if a != BETA_SYM {
                    syms.push((s.to_global[u], s.to_global[v], a));
                }
            }
        }
        eps.sort_unstable();
        eps.dedup();
        syms.sort_unstable();
        syms.dedup();
        (eps, syms)
    }
}

/// Which structure backs each automaton of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsKind {
    Classic,
    Simple,
    Separator,
    Fr,
}

/// A decomposition with a data structure per automaton.
pub struct NestedSim {
    pub d: NestedDecomposition,
    pub ds: Vec<Box<dyn SimulationDs>>,
    x0: Vec<BitString>,
    nullable: bool,
    /// automata in the subtree of each automaton, itself included
    below: Vec<Vec<usize>>,
}

pub type StateArray = Vec<BitString>;

impl NestedSim {
    pub fn new(d: NestedDecomposition, kind: DsKind, fr_cache: &mut FrCache) -> Self {
        let ds: Vec<Box<dyn SimulationDs>> = d
            .subs
            .iter()
            .map(|s| -> Box<dyn SimulationDs> {
                match kind {
                    DsKind::Classic => Box::new(ClassicDs::new(s.tnfa.clone())),
                    DsKind::Simple => Box::new(SimpleDs::new(&s.tnfa)),
                    DsKind::Separator => Box::new(SeparatorDs::new(&s.ast, &s.tnfa)),
                    DsKind::Fr => Box::new(FrDs::new(&s.ast, &s.tnfa, fr_cache)),
                }
            })
            .collect();
        let mut below: Vec<Vec<usize>> = (0..d.subs.len()).map(|a| vec![a]).collect();
        fn collect(d: &NestedDecomposition, a: usize, out: &mut Vec<usize>) {
            for &(c, _, _) in &d.subs[a].children {
                out.push(c);
                collect(d, c, out);
            }
        }
        for (a, b) in below.iter_mut().enumerate() {
            collect(&d, a, b);
        }
        let mut sim = NestedSim { d, ds, x0: Vec::new(), nullable: false, below };
        let mut x = sim.empty_array();
        let r = sim.d.root;
        sim.ds[r].insert(&mut x[r], sim.d.subs[r].tnfa.start);
        sim.close_as(r, &mut x);
        sim.close_as(r, &mut x);
        sim.nullable = sim.ds[r].member(&x[r], sim.d.subs[r].tnfa.accept);
        sim.x0 = x;
        sim
    }

    pub fn empty_array(&self) -> StateArray {
        self.ds.iter().map(|d| d.empty()).collect()
    }

    pub fn initial(&self) -> &StateArray {
        &self.x0
    }

    fn dormant(&self, a: usize, x: &StateArray) -> bool {
        self.below[a].iter().all(|&b| x[b].is_zero())
    }

    pub fn move_as(&self, a: usize, x: &mut StateArray, sym: Sym) {
        x[a] = self.ds[a].move_a(&x[a], sym);
        for &(c, _, phi) in &self.d.subs[a].children {
            if self.dormant(c, x) {
                continue;
            }
            self.move_as(c, x, sym);
            let cphi = self.d.subs[c].tnfa.accept;
            if self.ds[c].member(&x[c], cphi) {
                self.ds[a].insert(&mut x[a], phi);
            }
        }
    }

    pub fn close_as(&self, a: usize, x: &mut StateArray) {
        x[a] = self.ds[a].close_a(&x[a]);
        for &(c, theta, phi) in &self.d.subs[a].children {
            if self.ds[a].member(&x[a], theta) {
                let ct = self.d.subs[c].tnfa.start;
                self.ds[c].insert(&mut x[c], ct);
            } else if self.dormant(c, x) {
                continue;
            }
            self.close_as(c, x);
            let cphi = self.d.subs[c].tnfa.accept;
            if self.ds[c].member(&x[c], cphi) && !self.ds[a].member(&x[a], phi) {
                self.ds[a].insert(&mut x[a], phi);
                x[a] = self.ds[a].close_a(&x[a]);
            }
        }
    }

    /// One step with `θ` re-inserted first.
    pub fn step(&self, x: &mut StateArray, sym: Sym) {
        for (s, s0) in x.iter_mut().zip(&self.x0) {
            s.or_assign(s0);
        }
        let r = self.d.root;
        self.move_as(r, x, sym);
        self.close_as(r, x);
        self.close_as(r, x);
    }

    pub fn accepting(&self, x: &StateArray) -> bool {
        let r = self.d.root;
        self.ds[r].member(&x[r], self.d.subs[r].tnfa.accept)
    }

    /// The global state set modeled by `x`.
    pub fn modeled(&self, x: &StateArray) -> StateSet {
        let mut out = BitString::zeros(self.d.states);
        for (i, s) in self.d.subs.iter().enumerate() {
            for q in 0..s.tnfa.n {
                if self.ds[i].member(&x[i], q) {
                    out.set(s.to_global[q]);
                }
            }
        }
        out
    }

    /// Whether every shared state agrees between parent and child.
    pub fn consistent(&self, x: &StateArray) -> bool {
        self.d.subs.iter().enumerate().all(|(a, s)| {
            s.children.iter().all(|&(c, t, f)| {
                let cs = &self.d.subs[c].tnfa;
                self.ds[a].member(&x[a], t) == self.ds[c].member(&x[c], cs.start)
                    && self.ds[a].member(&x[a], f) == self.ds[c].member(&x[c], cs.accept)
            })
        })
    }

    pub fn find_matches(&self, q: &[u8], no_empty: bool) -> Vec<usize> {
        let mut x = self.empty_array();
        let mut out = Vec::new();
        for (j, &c) in q.iter().enumerate() {
            self.step(&mut x, c as Sym);
            if self.accepting(&x) {
                out.push(j + 1);
            }
        }
        with_empty(out, self.nullable, q.len(), no_empty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Classic,
    Simple,
    Separator,
    Fr,
    Nested,
    Auto,
}

impl std::str::FromStr for EngineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "classic" => EngineKind::Classic,
            "simple" | "bitpar" => EngineKind::Simple,
            "separator" => EngineKind::Separator,
            "fr" => EngineKind::Fr,
            "nested" => EngineKind::Nested,
            "auto" => EngineKind::Auto,
            _ => return Err(format!("unknown engine '{s}'")),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub word_bits: usize,
    pub fr_budget: usize,
    /// states per automaton for the four-russians engine
    pub fr_states: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { word_bits: 64, fr_budget: fr_budget_from_env(), fr_states: 10 }
    }
}

fn isqrt(w: usize) -> usize {
    (w as f64).sqrt() as usize
}

/// Largest `m` whose `m(m+1)`-bit closure strings fit in two words.
fn simple_states(w: usize) -> usize {
    let mut m = 6;
    while (m + 1) * (m + 2) <= 2 * w {
        m += 1;
    }
    m
}

/// Resolved engine: the structure and the per-automaton state bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineChoice {
    Classic,
    Decomposed { ds: DsKind, x: usize },
}

/// Regimes for `auto`: up to `√w` states one simple structure, up to `w`
/// one separator structure, beyond that a decomposition into separator
/// structures of `w` states.
pub fn select_engine(states: usize, cfg: &EngineConfig, mode: EngineKind) -> EngineChoice {
    let w = cfg.word_bits.max(6);
    match mode {
        EngineKind::Classic => EngineChoice::Classic,
        EngineKind::Simple => EngineChoice::Decomposed { ds: DsKind::Simple, x: simple_states(w) },
        EngineKind::Separator => EngineChoice::Decomposed { ds: DsKind::Separator, x: w },
        EngineKind::Fr => EngineChoice::Decomposed { ds: DsKind::Fr, x: cfg.fr_states.clamp(6, 30) },
        EngineKind::Nested => EngineChoice::Decomposed { ds: DsKind::Separator, x: (w / 4).max(6) },
        EngineKind::Auto => {
            if states <= isqrt(w) {
                EngineChoice::Decomposed { ds: DsKind::Simple, x: states.max(6) }
            } else {
                EngineChoice::Decomposed { ds: DsKind::Separator, x: w }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchState {
    Classic(StateSet),
    Nested(StateArray),
}

enum Inner {
    Classic(Tnfa),
    Nested(NestedSim),
}

/// Compiled pattern.
pub struct Matcher {
    pub choice: EngineChoice,
    inner: Inner,
}

static FR_CACHE: Mutex<Option<FrCache>> = Mutex::new(None);

impl Matcher {
    pub fn new(pattern: &str, kind: EngineKind, cfg: &EngineConfig) -> Result<Self, RegexError> {
        Ok(Self::from_ast(&parse_regex(pattern)?, kind, cfg))
    }

    pub fn from_ast(ast: &RegexAst, kind: EngineKind, cfg: &EngineConfig) -> Self {
        let choice = select_engine(2 * ast.len(), cfg, kind);
        let inner = match choice {
            EngineChoice::Classic => Inner::Classic(thompson(ast)),
            EngineChoice::Decomposed { ds, x } => {
                let d = nested_decompose(ast, x);
                let mut guard = FR_CACHE.lock().unwrap();
                let cache = guard.get_or_insert_with(|| FrCache::new(cfg.fr_budget));
                if cache.budget != cfg.fr_budget {
                    *cache = FrCache::new(cfg.fr_budget);
                }
                Inner::Nested(NestedSim::new(d, ds, cache))
            }
        };
        Matcher { choice, inner }
    }

    pub fn find_matches(&self, q: &[u8], no_empty: bool) -> Vec<usize> {
        match &self.inner {
            Inner::Classic(n) => crate::regex::find_matches_opts(n, q, no_empty),
            Inner::Nested(s) => s.find_matches(q, no_empty),
        }
    }

    /// State before any input, for streaming with [`Matcher::advance`].
    pub fn start(&self) -> MatchState {
        match &self.inner {
            Inner::Classic(n) => MatchState::Classic(n.empty_set()),
            Inner::Nested(s) => MatchState::Nested(s.empty_array()),
        }
    }

    /// Reads one byte; true when a nonempty match ends here.
    pub fn advance(&self, st: &mut MatchState, c: u8) -> bool {
        match (&self.inner, st) {
            (Inner::Classic(n), MatchState::Classic(s)) => {
                s.or_assign(&n.initial());
                *s = n.step(s, c as Sym);
                s.get(n.accept)
            }
            (Inner::Nested(sim), MatchState::Nested(x)) => {
                sim.step(x, c as Sym);
                sim.accepting(x)
            }
            _ => panic!("state from another matcher"),
        }
    }

    pub fn nullable(&self) -> bool {
        match &self.inner {
            Inner::Classic(n) => n.nullable(),
            Inner::Nested(s) => s.nullable,
        }
    }

    pub fn sim(&self) -> Option<&NestedSim> {
        match &self.inner {
            Inner::Nested(s) => Some(s),
            Inner::Classic(_) => None,
        }
    }
}
