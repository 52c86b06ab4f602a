//! Approximate and regular expression search directly on ZL78/ZLW
//! compressed text.
//!
//! Both searches walk the elements left to right and keep a small
//! description per element. Phrase lengths and depth-`h` ancestors come from
//! a τ-spaced set of special dictionary nodes, so for ZL78 the extra space
//! is `O(n/τ)` plus what the searches retain. ZLW has no stored labels and
//! always builds the trie.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::approx::approx_positions;
use crate::regex::{thompson, with_empty, RegexAst, StateSet, Sym, Tnfa};
use crate::zl::{build_trie, select_special_nodes, CompressedText, Element, Scheme, SpecialSet, Trie, ZlError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("error threshold k = {k} must be below the pattern length {m}")]
    KTooLarge { k: usize, m: usize },
    #[error(transparent)]
    Corrupt(#[from] ZlError),
}

/// Dictionary access without materializing anything for ZL78.
enum Dict<'a> {
    Zl78 { el: &'a [Element], nodes: usize },
    Zlw(Trie),
}

impl<'a> Dict<'a> {
    fn new(z: &'a CompressedText) -> Result<Self, ZlError> {
        match z.scheme {
            Scheme::Zl78 => {
                let n = z.elements.len();
                for (i, e) in z.elements.iter().enumerate() {
                    if e.reference as usize > i {
                        return Err(ZlError::ForwardReference { index: i + 1, reference: e.reference as u64 });
                    }
                    if e.label.is_none() && i + 1 != n {
                        return Err(ZlError::Truncated);
                    }
                }
                let tail = z.elements.last().is_some_and(|e| e.label.is_none());
                Ok(Dict::Zl78 { el: &z.elements, nodes: n + 1 - tail as usize })
            }
            Scheme::Zlw => Ok(Dict::Zlw(build_trie(z)?)),
        }
    }

    fn nodes(&self) -> usize {
        match self {
            Dict::Zl78 { nodes, .. } => *nodes,
            Dict::Zlw(t) => t.nodes(),
        }
    }

    fn parent(&self, v: u32) -> u32 {
        match self {
            Dict::Zl78 { el, .. } => el[v as usize - 1].reference,
            Dict::Zlw(t) => t.parent[v as usize],
        }
    }

    fn label(&self, v: u32) -> u8 {
        match self {
            Dict::Zl78 { el, .. } => el[v as usize - 1].label.unwrap(),
            Dict::Zlw(t) => t.label[v as usize],
        }
    }

    fn outputs(&self) -> usize {
        match self {
            Dict::Zl78 { el, .. } => el.len(),
            Dict::Zlw(t) => t.outputs.len(),
        }
    }

    fn output(&self, i: usize) -> u32 {
        match self {
            Dict::Zl78 { el, .. } => match el[i].label {
                Some(_) => i as u32 + 1,
                None => el[i].reference,
            },
            Dict::Zlw(t) => t.outputs[i],
        }
    }

    fn explicit_nodes(&self) -> usize {
        match self {
            Dict::Zl78 { .. } => 0,
            Dict::Zlw(t) => t.nodes(),
        }
    }
}

/// Description of one element for approximate search. Positions are
/// 1-based; `mi` is relative to the phrase and `mo` to
/// `rsuf(previous) · rpre`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApproxDescription {
    pub u: usize,
    pub l: usize,
    pub rpre: Vec<u8>,
    pub rsuf: Vec<u8>,
    pub mi: Vec<u32>,
    pub mo: Vec<u32>,
    /// matches reported for this element
    pub m: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub special: usize,
    pub mi_entries: usize,
    /// largest number of retained objects at any time
    pub peak_live: usize,
    /// nodes of an explicitly built trie (ZLW only)
    pub trie_nodes: usize,
}

/// `M_I` stored sparsely: only nodes whose set is nonempty have an entry,
/// holding the own new match (if any) and the nearest ancestor entry.
#[derive(Debug, Clone, Copy)]
struct MiEntry {
    own: Option<u32>,
    up: Option<u32>,
}

struct ApproxRun<'a, 'p> {
    d: Dict<'a>,
    special: SpecialSet,
    p: &'p [u8],
    k: usize,
    h: usize,
    mi: HashMap<u32, MiEntry>,
    mi_entries: usize,
    done_nodes: u32,
}

impl ApproxRun<'_, '_> {
    fn len_of(&self, v: u32) -> usize {
        self.special.locate(v, |w| self.d.parent(w)).len as usize
    }

    /// Last `r` labels of `v`'s phrase, last label first.
    fn up_labels(&self, mut v: u32, r: usize, out: &mut Vec<u8>) {
        for _ in 0..r {
            out.push(self.d.label(v));
            v = self.d.parent(v);
        }
    }

    fn mi_of(&self, v: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut cur = self.mi.get(&v).copied();
        while let Some(e) = cur {
            out.extend(e.own);
            cur = e.up.and_then(|w| self.mi.get(&w).copied());
        }
        out.reverse();
        out
    }

    fn process_node(&mut self, v: u32) {
        let l = self.len_of(v);
        let r = self.h.min(l);
        let mut s = Vec::with_capacity(r);
        self.up_labels(v, r, &mut s);
        s.reverse();
        let own = approx_positions(self.p, &s, self.k).last() == Some(&r);
        let p = self.d.parent(v);
        let up = (p != 0 && self.mi.contains_key(&p)).then_some(p);
        if own || up.is_some() {
            self.mi.insert(v, MiEntry { own: own.then_some(l as u32), up });
            self.mi_entries += 1 + own as usize;
        }
    }

    fn rpre(&self, v: u32, l: usize) -> Vec<u8> {
        let info = self.special.locate(v, |w| self.d.parent(w));
        let (top, r) = match info.anc {
            Some(a) => (a, self.h),
            None => (v, l),
        };
        let mut s = Vec::with_capacity(r);
        self.up_labels(top, r, &mut s);
        s.reverse();
        s
    }

    /// The multi-phrase walk: `min(h, end)` characters ending at the end of
    /// element `i`.
    fn rsuf(&self, i: usize, end: usize) -> Vec<u8> {
        let mut l = self.h.min(end);
        let mut t = i;
        let mut s = Vec::with_capacity(l);
        loop {
            let v = self.d.output(t);
            let r = l.min(self.len_of(v));
            self.up_labels(v, r, &mut s);
            if r >= l || t == 0 {
                break;
            }
            l -= r;
            t -= 1;
        }
        s.reverse();
        s
    }
}

fn approx_run<'a, 'p>(z: &'a CompressedText, p: &'p [u8], k: usize, tau: usize) -> Result<ApproxRun<'a, 'p>, SearchError> {
    if k >= p.len() {
        return Err(SearchError::KTooLarge { k, m: p.len() });
    }
    let d = Dict::new(z)?;
    let h = p.len() + k;
    let special = select_special_nodes(d.nodes(), |w| d.parent(w), tau, h);
    Ok(ApproxRun { d, special, p, k, h, mi: HashMap::new(), mi_entries: 0, done_nodes: 0 })
}

/// Computes descriptions left to right and hands each one to `f`;
/// only the previous relevant suffix and the `M_I` store survive a step.
pub fn for_each_description(
    z: &CompressedText,
    p: &[u8],
    k: usize,
    tau: usize,
    mut f: impl FnMut(&ApproxDescription),
) -> Result<SearchStats, SearchError> {
    let mut run = approx_run(z, p, k, tau)?;
    let mut stats = SearchStats { special: run.special.len(), trie_nodes: run.d.explicit_nodes(), ..Default::default() };
    let mut u = 1usize;
    let mut prev_rsuf: Vec<u8> = Vec::new();
    for i in 0..run.d.outputs() {
        let v = run.d.output(i);
        while run.done_nodes < v {
            run.done_nodes += 1;
            let w = run.done_nodes;
            run.process_node(w);
        }
        let l = run.len_of(v);
        let rpre = run.rpre(v, l);
        let rsuf = run.rsuf(i, u + l - 1);
        let mi = run.mi_of(v);
        let mut window = prev_rsuf.clone();
        window.extend_from_slice(&rpre);
        let mo: Vec<u32> = approx_positions(p, &window, k).into_iter().map(|j| j as u32).collect();
        let shift = prev_rsuf.len();
        let mut m: Vec<usize> = mi.iter().map(|&j| j as usize + u - 1).collect();
        for &j in &mo {
            let pos = (j as usize + u - 1).checked_sub(shift);
            if let Some(pos) = pos.filter(|&q| q >= u && q < u + l) {
                m.push(pos);
            }
        }
        m.sort_unstable();
        m.dedup();
        let desc = ApproxDescription { u, l, rpre, rsuf, mi, mo, m };
        let live = stats.special
            + run.mi_entries
            + desc.rpre.len()
            + desc.rsuf.len()
            + prev_rsuf.len()
            + desc.mi.len()
            + desc.mo.len()
            + stats.trie_nodes;
        stats.peak_live = stats.peak_live.max(live);
        f(&desc);
        u += l;
        prev_rsuf = desc.rsuf;
    }
    stats.mi_entries = run.mi_entries;
    Ok(stats)
}

pub fn describe_elements(z: &CompressedText, p: &[u8], k: usize, tau: usize) -> Result<Vec<ApproxDescription>, SearchError> {
    let mut out = Vec::new();
    for_each_description(z, p, k, tau, |d| out.push(d.clone()))?;
    Ok(out)
}

pub fn capprox_search_stats(z: &CompressedText, p: &[u8], k: usize, tau: usize) -> Result<(Vec<usize>, SearchStats), SearchError> {
    let mut out = Vec::new();
    let st = for_each_description(z, p, k, tau, |d| out.extend_from_slice(&d.m))?;
    Ok((out, st))
}

/// Sorted 1-based end positions of approximate occurrences of `p`.
pub fn capprox_search(z: &CompressedText, p: &[u8], k: usize, tau: usize) -> Result<Vec<usize>, SearchError> {
    Ok(capprox_search_stats(z, p, k, tau)?.0)
}

const NO_NODE: u32 = u32::MAX;

/// One reported match with the state and dictionary node it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub pos: usize,
    pub element: usize,
    pub state: usize,
    pub node: u32,
}

/// State-set transitions with the start state injected before each symbol.
struct Runner {
    tn: Tnfa,
    init: StateSet,
}

impl Runner {
    fn new(ast: &RegexAst) -> Self {
        let tn = thompson(ast);
        let init = tn.initial();
        Runner { tn, init }
    }

    /// `δ̄(S, ε) = Close(S ∪ {θ})`
    fn empty(&self, s: &StateSet) -> StateSet {
        let mut x = self.tn.close(s);
        x.or_assign(&self.init);
        x
    }

    fn step(&self, s: &StateSet, c: u8) -> StateSet {
        let mut x = s.clone();
        x.or_assign(&self.init);
        self.tn.step(&x, c as Sym)
    }
}

/// `δ̄({s}, phrase(y))` for every member `y` of `c` and every state `s`,
/// each computed from the nearest member above `y`.
pub fn transition_sets_at(c: &SpecialSet, z: &CompressedText, ast: &RegexAst) -> Result<HashMap<u32, Vec<StateSet>>, ZlError> {
    let d = Dict::new(z)?;
    let r = Runner::new(ast);
    Ok(transition_sets(&d, c, &r))
}

fn transition_sets(d: &Dict, c: &SpecialSet, r: &Runner) -> HashMap<u32, Vec<StateSet>> {
    let n = r.tn.n;
    let mut out: HashMap<u32, Vec<StateSet>> = HashMap::new();
    out.insert(0, (0..n).map(|s| r.empty(&r.tn.singleton(s))).collect());
    for y in c.members() {
        if y == 0 {
            continue;
        }
        let mut labels = Vec::new();
        let mut w = y;
        loop {
            labels.push(d.label(w));
            w = d.parent(w);
            if out.contains_key(&w) {
                break;
            }
        }
        labels.reverse();
        let sets = out[&w]
            .iter()
            .map(|s0| labels.iter().fold(s0.clone(), |s, &a| r.step(&s, a)))
            .collect();
        out.insert(y, sets);
    }
    out
}

struct RegexRun<'a> {
    d: Dict<'a>,
    special: SpecialSet,
    r: Runner,
    sets: HashMap<u32, Vec<StateSet>>,
    /// `lastmatch[v * states + s]`
    lastmatch: Vec<u32>,
    depth: Vec<u32>,
}

impl RegexRun<'_> {
    fn new<'z>(z: &'z CompressedText, ast: &RegexAst, tau: usize) -> Result<RegexRun<'z>, ZlError> {
        let d = Dict::new(z)?;
        let special = select_special_nodes(d.nodes(), |w| d.parent(w), tau, usize::MAX);
        let r = Runner::new(ast);
        let sets = transition_sets(&d, &special, &r);
        Ok(RegexRun { d, special, r, sets, lastmatch: Vec::new(), depth: Vec::new() })
    }

    /// Path from the nearest member down to `v`, as labels, and the member.
    fn from_member(&self, v: u32) -> (u32, Vec<u8>) {
        let path = self.special.walk(v, |w| self.d.parent(w));
        let y = *path.last().unwrap();
        let labels = path[..path.len() - 1].iter().rev().map(|&w| self.d.label(w)).collect();
        (y, labels)
    }

    fn process_node(&mut self, v: u32) {
        let n = self.r.tn.n;
        let acc = self.r.tn.accept;
        if v == 0 {
            self.depth.push(0);
            self.lastmatch.extend(std::iter::repeat_n(NO_NODE, n));
            return;
        }
        let p = self.d.parent(v);
        self.depth.push(self.depth[p as usize] + 1);
        let (y, labels) = self.from_member(v);
        for s in 0..n {
            let end = labels.iter().fold(self.sets[&y][s].clone(), |x, &a| self.r.step(&x, a));
            let lm = if end.get(acc) { v } else { self.lastmatch[p as usize * n + s] };
            self.lastmatch.push(lm);
        }
    }

    /// `δ̄(S, phrase(v))` through the nearest member's transition sets.
    fn advance(&self, s: &StateSet, v: u32) -> StateSet {
        let (y, labels) = self.from_member(v);
        let t = &self.sets[&y];
        let mut x = t[self.r.tn.start].clone();
        for q in s.iter_ones() {
            x.or_assign(&t[q]);
        }
        labels.iter().fold(x, |x, &a| self.r.step(&x, a))
    }
}

/// Matches with provenance, sorted by position, one entry per position.
pub fn cregex_search_provenance(z: &CompressedText, ast: &RegexAst, tau: usize) -> Result<Vec<Provenance>, ZlError> {
    let mut run = RegexRun::new(z, ast, tau)?;
    let n = run.r.tn.n;
    let start = run.r.tn.start;
    let mut out = Vec::new();
    let mut s = run.r.tn.empty_set();
    let mut u = 1usize;
    let mut next_node = 0u32;
    for i in 0..run.d.outputs() {
        let v = run.d.output(i);
        while next_node <= v {
            run.process_node(next_node);
            next_node += 1;
        }
        // heads of the lastmatch chains for every s in S ∪ {θ}
        let mut heap: BinaryHeap<(u32, Reverse<usize>, u32)> = BinaryHeap::new();
        let push = |heap: &mut BinaryHeap<_>, st: usize, x: u32| {
            if x != NO_NODE {
                heap.push((run.depth[x as usize], Reverse(st), x));
            }
        };
        let mut states: Vec<usize> = s.iter_ones().collect();
        if !s.get(start) {
            states.push(start);
        }
        for &st in &states {
            push(&mut heap, st, run.lastmatch[v as usize * n + st]);
        }
        let mut found = Vec::new();
        let mut last = None;
        while let Some((dep, Reverse(st), x)) = heap.pop() {
            if last != Some(dep) {
                found.push(Provenance { pos: u + dep as usize - 1, element: i, state: st, node: x });
                last = Some(dep);
            }
            let p = run.d.parent(x);
            push(&mut heap, st, run.lastmatch[p as usize * n + st]);
        }
        found.reverse();
        out.extend(found);
        s = run.advance(&s, v);
        u += run.depth[v as usize] as usize;
    }
    Ok(out)
}

/// Same contract as the uncompressed matcher, including the convention
/// for the empty match.
pub fn cregex_search(z: &CompressedText, ast: &RegexAst, tau: usize, no_empty: bool) -> Result<Vec<usize>, ZlError> {
    let found: Vec<usize> = cregex_search_provenance(z, ast, tau)?.into_iter().map(|p| p.pos).collect();
    let nullable = thompson(ast).nullable();
    Ok(with_empty(found, nullable, z.len, no_empty))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::{find_matches_opts, parse_regex};
    use crate::regex::testgen::random_regex;
    use crate::zl::{compress, decompress, select_special};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ananas() -> CompressedText {
        compress(b"ananasbananer", Scheme::Zl78)
    }

    #[test]
    fn description_table() {
        let ds = describe_elements(&ananas(), b"base", 2, 1).unwrap();
        type Row = (usize, usize, &'static str, &'static str, Vec<u32>, Vec<u32>, Vec<usize>);
        let want: Vec<Row> = vec![
            (1, 1, "a", "a", vec![], vec![], vec![]),
            (2, 1, "n", "an", vec![], vec![], vec![]),
            (3, 2, "an", "anan", vec![], vec![], vec![]),
            (5, 2, "as", "ananas", vec![2], vec![6], vec![6]),
            (7, 1, "b", "nanasb", vec![], vec![6, 7], vec![7]),
            (8, 3, "ana", "asbana", vec![], vec![5, 6, 7, 8, 9], vec![8, 9, 10]),
            (11, 2, "ne", "banane", vec![], vec![2, 3, 4, 5, 6, 8], vec![12]),
            (13, 1, "r", "ananer", vec![], vec![2, 3, 4, 6], vec![]),
        ];
        assert_eq!(ds.len(), want.len());
        for (d, w) in ds.iter().zip(&want) {
            assert_eq!((d.u, d.l), (w.0, w.1));
            assert_eq!(d.rpre, w.2.as_bytes());
            assert_eq!(d.rsuf, w.3.as_bytes());
            assert_eq!((&d.mi, &d.mo, &d.m), (&w.4, &w.5, &w.6));
        }
        for tau in 1..=8 {
            assert_eq!(capprox_search(&ananas(), b"base", 2, tau).unwrap(), vec![6, 7, 8, 9, 10, 12]);
        }
    }

    #[test]
    fn rejects_large_k() {
        assert!(matches!(capprox_search(&ananas(), b"ab", 2, 1), Err(SearchError::KTooLarge { .. })));
    }

    fn random_text(rng: &mut ChaCha8Rng, len: usize, sig: u8) -> Vec<u8> {
        (0..len).map(|_| b'a' + rng.gen_range(0..sig)).collect()
    }

    #[test]
    fn capprox_equals_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for case in 0..500 {
            let sig = rng.gen_range(1..=4);
            let len = rng.gen_range(0..300);
            let q = random_text(&mut rng, len, sig);
            let m = rng.gen_range(1..=6);
            let p = random_text(&mut rng, m, sig);
            let k = rng.gen_range(0..m);
            let scheme = if case % 2 == 0 { Scheme::Zl78 } else { Scheme::Zlw };
            let z = compress(&q, scheme);
            let n = z.elements.len().max(1);
            let tau = [1, 2, 4, 16, n][rng.gen_range(0..5)].min(n);
            let want = approx_positions(&p, &q, k);
            let ds = describe_elements(&z, &p, k, tau).unwrap();
            let got: Vec<usize> = ds.iter().flat_map(|d| d.m.iter().copied()).collect();
            assert_eq!(got, want);
            for d in &ds {
                let h = m + k;
                let end = d.u + d.l - 1;
                assert_eq!(d.rpre, &q[d.u - 1..d.u - 1 + h.min(d.l)]);
                assert_eq!(d.rsuf, &q[end - h.min(end)..end]);
                assert!(d.mo.len() < 4 * m);
            }
        }
    }

    #[test]
    fn match_starts_in_interval() {
        let q = b"ananasbananer";
        for j in approx_positions(b"base", q, 2) {
            let starts: Vec<usize> =
                (1..=j).filter(|&i| crate::approx::edit_distance(b"base", &q[i - 1..j]) <= 2).collect();
            assert!(!starts.is_empty());
            for i in starts {
                assert!(i + 4 + 2 > j && i <= j + 2 + 1 - 4);
            }
        }
    }

    #[test]
    fn retained_objects_shrink_with_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let q = random_text(&mut rng, 200_000, 4);
        let z = compress(&q, Scheme::Zl78);
        let n = z.elements.len();
        let mut prev = usize::MAX;
        for tau in [1, 4, 16, 64] {
            let (occ, st) = capprox_search_stats(&z, b"abcdabca", 1, tau).unwrap();
            let bound = 4 * (n / tau + 8 + occ.len()) + 64;
            assert!(st.peak_live <= bound, "tau={tau}: {} > {bound}", st.peak_live);
            assert!(st.special <= 2 * n / tau + 1);
            assert!(st.peak_live <= prev);
            prev = st.peak_live;
        }
    }

    #[test]
    fn ananas_regex() {
        let r = parse_regex("a").unwrap();
        let z = ananas();
        assert_eq!(cregex_search(&z, &r, 2, false).unwrap(), vec![1, 3, 5, 8, 10]);
    }

    #[test]
    fn cregex_equals_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let fixed = parse_regex("ac|a*b").unwrap();
        for case in 0..400 {
            let ast = if case % 3 == 0 {
                fixed.clone()
            } else {
                let lits = rng.gen_range(1..=6);
                parse_regex(&random_regex(&mut rng, lits, b"abc")).unwrap()
            };
            let sig = rng.gen_range(1..=3);
            let len = rng.gen_range(0..300);
            let q = random_text(&mut rng, len, sig);
            let scheme = if case % 2 == 0 { Scheme::Zl78 } else { Scheme::Zlw };
            let z = compress(&q, scheme);
            let n = z.elements.len().max(1);
            let tau = [1, 2, 4, 16, n][rng.gen_range(0..5)].min(n);
            let tn = thompson(&ast);
            for no_empty in [false, true] {
                assert_eq!(cregex_search(&z, &ast, tau, no_empty).unwrap(), find_matches_opts(&tn, &q, no_empty));
            }
        }
    }

    #[test]
    fn provenance_audit() {
        let mut rng = ChaCha8Rng::seed_from_u64(94);
        for _ in 0..100 {
            let lits = rng.gen_range(1..=5);
            let ast = parse_regex(&random_regex(&mut rng, lits, b"ab")).unwrap();
            let len = rng.gen_range(1..200);
            let q = random_text(&mut rng, len, 2);
            let z = compress(&q, Scheme::Zl78);
            let t = build_trie(&z).unwrap();
            let r = Runner::new(&ast);
            let mut u = vec![1usize];
            for &v in &t.outputs {
                u.push(u.last().unwrap() + t.depth[v as usize] as usize);
            }
            let mut prev = 0;
            for pr in cregex_search_provenance(&z, &ast, 3).unwrap() {
                assert!(pr.pos > prev);
                prev = pr.pos;
                assert_eq!(pr.pos, u[pr.element] + t.depth[pr.node as usize] as usize - 1);
                // node is an ancestor of the element's output node
                let mut a = t.outputs[pr.element];
                while a != pr.node && a != 0 {
                    a = t.parent[a as usize];
                }
                assert_eq!(a, pr.node);
                // and the state reaches acceptance on its phrase
                let s0 = r.empty(&r.tn.singleton(pr.state));
                let end = t.spell(pr.node).iter().fold(s0, |s, &c| r.step(&s, c));
                assert!(end.get(r.tn.accept));
                // the state was live before the element (or is the start)
                let before = &q[..u[pr.element] - 1];
                let mut s = r.tn.empty_set();
                for &c in before {
                    s = r.step(&s, c);
                }
                assert!(s.get(pr.state) || pr.state == r.tn.start);
            }
        }
    }

    #[test]
    fn transition_sets_direct() {
        let ast = parse_regex("ac|a*b").unwrap();
        let r = Runner::new(&ast);
        // root: closure of {s, θ}
        let z = ananas();
        let c = select_special(&z, 1).unwrap();
        let sets = transition_sets_at(&c, &z, &ast).unwrap();
        for s in 0..r.tn.n {
            assert_eq!(sets[&0][s], r.empty(&r.tn.singleton(s)));
        }
        // chain text: sets reach a fixed point along the chain
        let zc = compress(&[b'a'; 300], Scheme::Zl78);
        let tc = build_trie(&zc).unwrap();
        let cc = select_special(&zc, 2).unwrap();
        let sc = transition_sets_at(&cc, &zc, &ast).unwrap();
        let deep: Vec<u32> = cc.members().into_iter().filter(|&y| tc.depth[y as usize] >= 3).collect();
        assert!(deep.len() >= 2);
        for w in deep.windows(2) {
            assert_eq!(sc[&w[0]], sc[&w[1]]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(95);
        for _ in 0..30 {
            let q = random_text(&mut rng, 400, 3);
            let z = compress(&q, Scheme::Zlw);
            let t = build_trie(&z).unwrap();
            let c = select_special(&z, 3).unwrap();
            let sets = transition_sets_at(&c, &z, &ast).unwrap();
            for y in c.members() {
                for s in 0..r.tn.n {
                    let direct = t.spell(y).iter().fold(r.empty(&r.tn.singleton(s)), |x, &a| r.step(&x, a));
                    assert_eq!(sets[&y][s], direct);
                }
            }
            assert_eq!(decompress(&z).unwrap(), q);
        }
    }
}
