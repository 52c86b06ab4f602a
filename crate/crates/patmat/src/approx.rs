//! Edit distance, approximate string matching and approximate regular
//! expression matching.

use std::collections::HashMap;
use std::hash::Hash;

use crate::engines::{nested_decompose, NestedDecomposition};
use crate::regex::{thompson, RegexAst, Sym, Tnfa};

/// Full `(m+1) × (n+1)` distance matrix.
pub fn edit_matrix<T: PartialEq>(s: &[T], t: &[T]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![0; t.len() + 1]; s.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=t.len() {
        d[0][j] = j;
    }
    for i in 1..=s.len() {
        for j in 1..=t.len() {
            let l = (s[i - 1] != t[j - 1]) as usize;
            d[i][j] = (d[i - 1][j - 1] + l).min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

/// Unit-cost edit distance keeping one row.
pub fn edit_distance<T: PartialEq>(s: &[T], t: &[T]) -> usize {
    let (s, t) = if s.len() < t.len() { (t, s) } else { (s, t) };
    let mut row: Vec<usize> = (0..=t.len()).collect();
    for (i, a) in s.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for j in 1..=t.len() {
            let up = row[j];
            row[j] = (diag + (*a != t[j - 1]) as usize).min(up + 1).min(row[j - 1] + 1);
            diag = up;
        }
    }
    row[t.len()]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrStats {
    /// true when the cell encoding did not fit and plain DP was used
    pub fallback: bool,
    pub cells: usize,
    pub distinct_cells: usize,
}

/// Bits for one rank entry.
fn rank_bits(x: usize, y: usize) -> usize {
    (usize::BITS - (x * y).leading_zeros()) as usize
}

/// Four-Russians edit distance, independent of the alphabet: `x × x` cells
/// are keyed by boundary deltas and character ranks computed per `y × y`
/// block of cells.
pub fn edit_distance_fr<T: Ord + Hash + Clone>(s: &[T], t: &[T], x: usize, y: usize) -> usize {
    edit_distance_fr_stats(s, t, x, y).0
}

pub fn edit_distance_fr_stats<T: Ord + Hash + Clone>(s: &[T], t: &[T], x: usize, y: usize) -> (usize, FrStats) {
    let mut stats = FrStats::default();
    let b = rank_bits(x.max(1), y.max(1));
    if x == 0 || y == 0 || x * b > 64 || 2 * x > 64 {
        stats.fallback = true;
        return (edit_distance(s, t), stats);
    }
    let (m, n) = (s.len(), t.len());
    let mx = x * y;
    // rank codes per macro cell
    let mut s_code = vec![0u16; m];
    let mut t_code: Vec<Vec<u16>> = Vec::new();
    let mut memo: HashMap<(u64, u64, u64, u8, u8), (u64, u64)> = HashMap::new();
    let mut hdelta = vec![1i8; n];
    let mut corner_col = 0usize; // D[r0][0]
    for r0 in (0..m).step_by(x) {
        let r1 = (r0 + x).min(m);
        // recompute codes at the start of each macro row
        if r0 % mx == 0 {
            let sr = &s[r0..(r0 + mx).min(m)];
            t_code.clear();
            for c0 in (0..n).step_by(mx) {
                let tc = &t[c0..(c0 + mx).min(n)];
                let mut shared: Vec<&T> = sr.iter().filter(|a| tc.contains(a)).collect();
                shared.sort();
                shared.dedup();
                let rank = |a: &T| shared.binary_search(&a).map_or(0, |r| r as u16 + 1);
                t_code.push(tc.iter().map(rank).collect());
                // ranks on the S side depend on the T block, kept per block below
            }
        }
        let mut vdelta = vec![1i8; r1 - r0];
        for c0 in (0..n).step_by(x) {
            let c1 = (c0 + x).min(n);
            let mb = c0 / mx;
            // S ranks relative to this macro block
            if c0 % mx == 0 {
                let sr = &s[r0 - r0 % mx..(r0 - r0 % mx + mx).min(m)];
                let tc = &t[mb * mx..(mb * mx + mx).min(n)];
                let mut shared: Vec<&T> = sr.iter().filter(|a| tc.contains(a)).collect();
                shared.sort();
                shared.dedup();
                for i in r0..r1 {
                    s_code[i] = shared.binary_search(&&s[i]).map_or(0, |r| r as u16 + 1);
                }
            }
            let pack_codes = |codes: &mut dyn Iterator<Item = u16>| codes.enumerate().fold(0u64, |k, (i, c)| k | (c as u64) << (i * b));
            let ks = pack_codes(&mut s_code[r0..r1].iter().copied());
            let kt = pack_codes(&mut t_code[mb][c0 - mb * mx..c1 - mb * mx].iter().copied());
            let pack_delta = |d: &[i8]| d.iter().enumerate().fold(0u64, |k, (i, &v)| k | ((v + 1) as u64) << (2 * i));
            let kd = pack_delta(&hdelta[c0..c1]) | pack_delta(&vdelta) << 32;
            let key = (ks, kt, kd, (r1 - r0) as u8, (c1 - c0) as u8);
            stats.cells += 1;
            let (bottom, right) = *memo.entry(key).or_insert_with(|| {
                stats.distinct_cells += 1;
                eval_cell(&s_code[r0..r1], &t_code[mb][c0 - mb * mx..c1 - mb * mx], &hdelta[c0..c1], &vdelta)
            });
            for (j, h) in hdelta[c0..c1].iter_mut().enumerate() {
                *h = ((bottom >> (2 * j)) & 3) as i8 - 1;
            }
            for (i, v) in vdelta.iter_mut().enumerate() {
                *v = ((right >> (2 * i)) & 3) as i8 - 1;
            }
        }
        corner_col += r1 - r0;
    }
    let d = corner_col as i64 + hdelta.iter().map(|&v| v as i64).sum::<i64>();
    (d as usize, stats)
}

/// Evaluates one cell from its top and left deltas; returns packed bottom
/// and right deltas.
fn eval_cell(sc: &[u16], tc: &[u16], top: &[i8], left: &[i8]) -> (u64, u64) {
    let (h, w) = (sc.len(), tc.len());
    let mut row: Vec<i64> = Vec::with_capacity(w + 1);
    row.push(0);
    for &d in top {
        let last = *row.last().unwrap();
        row.push(last + d as i64);
    }
    let mut right = 0u64;
    let mut first = 0i64;
    for i in 0..h {
        let prev_right = row[w];
        let mut diag = row[0];
        first += left[i] as i64;
        row[0] = first;
        for j in 1..=w {
            let up = row[j];
            let l = !(sc[i] > 0 && sc[i] == tc[j - 1]) as i64;
            row[j] = (diag + l).min(up + 1).min(row[j - 1] + 1);
            diag = up;
        }
        right |= ((row[w] - prev_right + 1) as u64) << (2 * i);
    }
    let mut bottom = 0u64;
    for j in 1..=w {
        bottom |= ((row[j] - row[j - 1] + 1) as u64) << (2 * (j - 1));
    }
    (bottom, right)
}

/// All 1-based `j` such that some substring of `q` ending at `j` is within
/// edit distance `k` of `p` (top row of the table is zero).
pub fn approx_positions<T: PartialEq>(p: &[T], q: &[T], k: usize) -> Vec<usize> {
    let m = p.len();
    let mut col: Vec<usize> = (0..=m).collect();
    let mut out = Vec::new();
    if col[m] <= k {
        // only when k ≥ |p|, outside the usual precondition
        out.push(0);
    }
    for (j, c) in q.iter().enumerate() {
        let mut diag = col[0];
        col[0] = 0;
        for i in 1..=m {
            let up = col[i];
            col[i] = (diag + (p[i - 1] != *c) as usize).min(up + 1).min(col[i - 1] + 1);
            diag = up;
        }
        if col[m] <= k {
            out.push(j + 1);
        }
    }
    out
}

/// Whole string or any substring of the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Whole,
    Substring,
}

/// Per-state data shared by both evaluations.
#[derive(Debug, Clone)]
struct Graph {
    /// predecessor over the symbol transition, with its symbol
    sym_pred: Vec<Option<(usize, Sym)>>,
    fwd_preds: Vec<Vec<usize>>,
    all_preds: Vec<Vec<usize>>,
}

impl Graph {
    fn new(t: &Tnfa) -> Self {
        let mut sym_pred = vec![None; t.n];
        let mut fwd_preds = vec![Vec::new(); t.n];
        let mut all_preds = vec![Vec::new(); t.n];
        for &(u, v, a) in &t.sym_edges {
            sym_pred[v] = Some((u, a));
            fwd_preds[v].push(u);
            all_preds[v].push(u);
        }
        for (u, e) in t.eps.iter().enumerate() {
            for &v in e {
                all_preds[v].push(u);
                if !t.back.contains(&(u, v)) {
                    fwd_preds[v].push(u);
                }
            }
        }
        Graph { sym_pred, fwd_preds, all_preds }
    }

    fn pass1(&self, v: usize, old: &[u32], b1: &[u32], c: Sym, cap: u32) -> u32 {
        let r = match self.sym_pred[v] {
            Some((w, a)) => (old[v] + 1).min(old[w] + (a != c) as u32).min(b1[w] + 1),
            None => self.fwd_preds[v].iter().map(|&w| b1[w]).min().unwrap_or(cap),
        };
        r.min(cap)
    }

    fn pass2(&self, v: usize, b1: &[u32], b2: &[u32], cap: u32) -> u32 {
        let r = match self.sym_pred[v] {
            Some((w, _)) => b1[v].min(b2[w] + 1),
            None => self.all_preds[v].iter().map(|&w| b2[w]).min().unwrap_or(cap),
        };
        r.min(cap)
    }

    fn row0(&self, t: &Tnfa, cap: u32) -> Vec<u32> {
        let mut r = vec![cap; t.n];
        r[t.start] = 0;
        for v in 0..t.n {
            if v == t.start {
                continue;
            }
            r[v] = match self.sym_pred[v] {
                Some((w, _)) => r[w] + 1,
                None => self.fwd_preds[v].iter().map(|&w| r[w]).min().unwrap_or(cap),
            }
            .min(cap);
        }
        r
    }
}

fn theta_value(mode: Mode, i: usize, cap: u32) -> u32 {
    match mode {
        Mode::Whole => (i as u32).min(cap),
        Mode::Substring => 0,
    }
}

/// Reference evaluation over the whole automaton. Returns the saturated
/// value of `φ` after each prefix, `0..=n`.
pub fn approx_regex_flat(ast: &RegexAst, q: &[u8], d: usize, mode: Mode) -> Vec<u32> {
    let t = thompson(ast);
    let g = Graph::new(&t);
    let cap = d as u32 + 1;
    let mut cur = g.row0(&t, cap);
    let mut out = vec![cur[t.accept]];
    for (i, &c) in q.iter().enumerate() {
        let mut b1 = cur.clone();
        b1[t.start] = theta_value(mode, i + 1, cap);
        for v in 0..t.n {
            if v != t.start {
                b1[v] = g.pass1(v, &cur, &b1, c as Sym, cap);
            }
        }
        let mut b2 = b1.clone();
        for v in 0..t.n {
            if v != t.start {
                b2[v] = g.pass2(v, &b1, &b2, cap);
            }
        }
        cur = b2;
        out.push(cur[t.accept]);
    }
    out
}

/// Chunked evaluation over a nested decomposition.
pub struct ApproxRegex {
    pub d: usize,
    dec: NestedDecomposition,
    graphs: Vec<Graph>,
    /// per automaton: chunks in order, each a list of local states
    chunks: Vec<Vec<Vec<usize>>>,
    row0: Vec<Vec<u32>>,
}

impl ApproxRegex {
    /// `x` bounds the states per automaton.
    pub fn new(ast: &RegexAst, d: usize, x: usize) -> Self {
        let dec = nested_decompose(ast, x);
        let global = thompson(ast);
        let cap = d as u32 + 1;
        let g0 = Graph::new(&global).row0(&global, cap);
        let mut graphs = Vec::new();
        let mut chunks = Vec::new();
        let mut row0 = Vec::new();
        for s in &dec.subs {
            let t = &s.tnfa;
            graphs.push(Graph::new(t));
            let mut cs = Vec::new();
            let mut lo = t.start + 1;
            for &(_, th, ph) in &s.children {
                cs.push((lo..=th).collect());
                lo = ph + 1;
            }
            cs.push((lo..t.n).collect());
            chunks.push(cs);
            row0.push(s.to_global.iter().map(|&g| g0[g]).collect());
        }
        ApproxRegex { d, dec, graphs, chunks, row0 }
    }

    pub fn automata(&self) -> usize {
        self.dec.subs.len()
    }

    fn next1(&self, a: usize, b: u32, c: Sym, cur: &[Vec<u32>], p1: &mut [Vec<u32>], order: &dyn Fn(usize, &[usize]) -> Vec<usize>) -> u32 {
        let cap = self.d as u32 + 1;
        let s = &self.dec.subs[a];
        let mut v1 = cur[a].clone();
        v1[s.tnfa.start] = b;
        for (ci, chunk) in self.chunks[a].iter().enumerate() {
            for v in order(a, chunk) {
                v1[v] = self.graphs[a].pass1(v, &cur[a], &v1, c, cap);
            }
            if let Some(&(child, th, ph)) = s.children.get(ci) {
                v1[ph] = self.next1(child, v1[th], c, cur, p1, order);
            }
        }
        let r = v1[s.tnfa.accept];
        p1[a] = v1;
        r
    }

    fn next2(&self, a: usize, b: u32, p1: &[Vec<u32>], out: &mut [Vec<u32>], order: &dyn Fn(usize, &[usize]) -> Vec<usize>) -> u32 {
        let cap = self.d as u32 + 1;
        let s = &self.dec.subs[a];
        let mut v2 = p1[a].clone();
        v2[s.tnfa.start] = b;
        for (ci, chunk) in self.chunks[a].iter().enumerate() {
            for v in order(a, chunk) {
                v2[v] = self.graphs[a].pass2(v, &p1[a], &v2, cap);
            }
            if let Some(&(child, th, ph)) = s.children.get(ci) {
                v2[ph] = self.next2(child, v2[th], p1, out, order);
            }
        }
        let r = v2[s.tnfa.accept];
        out[a] = v2;
        r
    }

    /// Saturated value of `φ` after each prefix, `0..=n`.
    pub fn values(&self, q: &[u8], mode: Mode) -> Vec<u32> {
        self.values_ordered(q, mode, &|_, c| c.to_vec())
    }

    /// As [`ApproxRegex::values`], visiting each chunk in the order given by
    /// `order(automaton, chunk)`.
    pub fn values_ordered(&self, q: &[u8], mode: Mode, order: &dyn Fn(usize, &[usize]) -> Vec<usize>) -> Vec<u32> {
        let cap = self.d as u32 + 1;
        let r = self.dec.root;
        let acc = self.dec.subs[r].tnfa.accept;
        let mut cur = self.row0.clone();
        let mut p1 = cur.clone();
        let mut out = vec![cur[r][acc]];
        for (i, &c) in q.iter().enumerate() {
            let th = theta_value(mode, i + 1, cap);
            self.next1(r, th, c as Sym, &cur, &mut p1, order);
            let mut nxt = cur.clone();
            self.next2(r, th, &p1, &mut nxt, order);
            cur = nxt;
            out.push(cur[r][acc]);
        }
        out
    }

    /// Topological orders inside chunks may differ; this checks that a
    /// chunk only reads forward predecessors that come earlier.
    pub fn forward_preds_in_chunk(&self, a: usize, v: usize) -> Vec<usize> {
        self.graphs[a].fwd_preds[v].clone()
    }
}

/// End positions (`0..=n`) of substrings within distance `d` of the
/// language.
pub fn approx_regex(ast: &RegexAst, q: &[u8], d: usize) -> Vec<usize> {
    let ar = ApproxRegex::new(ast, d, 64);
    let v = ar.values(q, Mode::Substring);
    (0..v.len()).filter(|&j| v[j] as usize <= d).collect()
}

/// Whether all of `q` is within distance `d` of the language.
pub fn approx_regex_accepts(ast: &RegexAst, q: &[u8], d: usize) -> bool {
    let ar = ApproxRegex::new(ast, d, 64);
    *ar.values(q, Mode::Whole).last().unwrap() as usize <= d
}
