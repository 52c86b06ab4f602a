//! Regular expressions: parser, Thompson automaton and the classic
//! state-set simulation.
//!
//! States are numbered recursively over the parse tree: `θ_v`, then the
//! states of the children, then `φ_v`. This order is topological when back
//! transitions are ignored, and the two endpoints of every symbol transition
//! get consecutive numbers.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::bitstring::BitString;

/// Input symbol. Bytes are `0..=255`; [`BETA_SYM`] labels pseudo-leaves.
pub type Sym = u16;
pub const BETA_SYM: Sym = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Sym(Sym),
    Concat,
    Union,
    Star,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub kind: Kind,
    pub kids: Vec<usize>,
}

/// Binary parse tree, stored as an arena.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegexAst {
    pub nodes: Vec<AstNode>,
    pub root: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegexError {
    #[error("empty expression")]
    Empty,
    #[error("unbalanced parenthesis at offset {0}")]
    Unbalanced(usize),
    #[error("'*' or '+' with nothing to repeat at offset {0}")]
    DanglingStar(usize),
    #[error("'|' with an empty side at offset {0}")]
    DanglingUnion(usize),
    #[error("unsupported operator '{ch}' at offset {offset}")]
    Unsupported { offset: usize, ch: char },
    #[error("malformed character class at offset {0}")]
    BadClass(usize),
    #[error("trailing backslash")]
    TrailingEscape,
}

impl RegexAst {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, kind: Kind, kids: Vec<usize>) -> usize {
        self.nodes.push(AstNode { kind, kids });
        self.nodes.len() - 1
    }

    /// Deep copy of the subtree at `v`, used to expand `r+` into `r r*`.
    fn copy(&mut self, v: usize) -> usize {
        let kids: Vec<usize> = self.nodes[v].kids.clone();
        let kids = kids.into_iter().map(|k| self.copy(k)).collect();
        self.push(self.nodes[v].kind, kids)
    }

    pub fn leaf(s: Sym) -> Self {
        RegexAst { nodes: vec![AstNode { kind: Kind::Sym(s), kids: vec![] }], root: 0 }
    }

    /// Number of star nodes.
    pub fn stars(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == Kind::Star).count()
    }

    /// Whether `q` is in the language, by direct recursion on end positions.
    pub fn accepts(&self, q: &[u8]) -> bool {
        self.ends(self.root, q, 0).contains(&q.len())
    }

    fn ends(&self, v: usize, q: &[u8], i: usize) -> Vec<usize> {
        let n = &self.nodes[v];
        let mut out = match n.kind {
            Kind::Sym(s) => {
                if i < q.len() && q[i] as Sym == s {
                    vec![i + 1]
                } else {
                    vec![]
                }
            }
            Kind::Concat => {
                let mut r = Vec::new();
                for j in self.ends(n.kids[0], q, i) {
                    r.extend(self.ends(n.kids[1], q, j));
                }
                r
            }
            Kind::Union => {
                let mut r = self.ends(n.kids[0], q, i);
                r.extend(self.ends(n.kids[1], q, i));
                r
            }
            Kind::Star => {
                let mut seen = vec![i];
                let mut todo = vec![i];
                while let Some(j) = todo.pop() {
                    for k in self.ends(n.kids[0], q, j) {
                        if !seen.contains(&k) {
                            seen.push(k);
                            todo.push(k);
                        }
                    }
                }
                seen
            }
        };
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn fmt_sym(s: Sym, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if s == BETA_SYM {
        return f.write_str("β");
    }
    let c = s as u8;
    if b"|*+?()[]\\".contains(&c) {
        write!(f, "\\{}", c as char)
    } else if c.is_ascii_graphic() || c == b' ' {
        write!(f, "{}", c as char)
    } else {
        write!(f, "\\x{c:02x}")
    }
}

impl fmt::Display for RegexAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(a: &RegexAst, v: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let n = &a.nodes[v];
            match n.kind {
                Kind::Sym(s) => fmt_sym(s, f),
                Kind::Concat => {
                    f.write_str("(")?;
                    go(a, n.kids[0], f)?;
                    go(a, n.kids[1], f)?;
                    f.write_str(")")
                }
                Kind::Union => {
                    f.write_str("(")?;
                    go(a, n.kids[0], f)?;
                    f.write_str("|")?;
                    go(a, n.kids[1], f)?;
                    f.write_str(")")
                }
                Kind::Star => {
                    f.write_str("(")?;
                    go(a, n.kids[0], f)?;
                    f.write_str(")*")
                }
            }
        }
        go(self, self.root, f)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    ast: RegexAst,
}

impl Parser<'_> {
    fn union(&mut self) -> Result<usize, RegexError> {
        let mut left = self.concat()?;
        if left.is_none() && self.i < self.s.len() && self.s[self.i] == b'|' {
            return Err(RegexError::DanglingUnion(self.i));
        }
        while self.i < self.s.len() && self.s[self.i] == b'|' {
            let at = self.i;
            self.i += 1;
            let right = self.concat()?.ok_or(RegexError::DanglingUnion(at))?;
            let l = left.unwrap();
            left = Some(self.ast.push(Kind::Union, vec![l, right]));
        }
        left.ok_or(RegexError::Empty)
    }

    fn concat(&mut self) -> Result<Option<usize>, RegexError> {
        let mut acc: Option<usize> = None;
        while self.i < self.s.len() && !matches!(self.s[self.i], b'|' | b')') {
            let r = self.repeat()?;
            acc = Some(match acc {
                None => r,
                Some(a) => self.ast.push(Kind::Concat, vec![a, r]),
            });
        }
        Ok(acc)
    }

    fn repeat(&mut self) -> Result<usize, RegexError> {
        let mut a = self.atom()?;
        while self.i < self.s.len() {
            match self.s[self.i] {
                b'*' => {
                    self.i += 1;
                    a = self.ast.push(Kind::Star, vec![a]);
                }
                b'+' => {
                    self.i += 1;
                    let c = self.ast.copy(a);
                    let st = self.ast.push(Kind::Star, vec![c]);
                    a = self.ast.push(Kind::Concat, vec![a, st]);
                }
                b'?' => return Err(RegexError::Unsupported { offset: self.i, ch: '?' }),
                _ => break,
            }
        }
        Ok(a)
    }

    fn escaped(&mut self) -> Result<u8, RegexError> {
        self.i += 1;
        let c = *self.s.get(self.i).ok_or(RegexError::TrailingEscape)?;
        self.i += 1;
        Ok(match c {
            b'n' => b'\n',
            b't' => b'\t',
            c => c,
        })
    }

    fn atom(&mut self) -> Result<usize, RegexError> {
        let at = self.i;
        match self.s[self.i] {
            b'*' | b'+' => Err(RegexError::DanglingStar(at)),
            b'?' => Err(RegexError::Unsupported { offset: at, ch: '?' }),
            b'(' => {
                self.i += 1;
                match self.s.get(self.i) {
                    None => return Err(RegexError::Unbalanced(at)),
                    Some(b')') => return Err(RegexError::Empty),
                    _ => {}
                }
                let r = self.union()?;
                if self.s.get(self.i) != Some(&b')') {
                    return Err(RegexError::Unbalanced(at));
                }
                self.i += 1;
                Ok(r)
            }
            b'[' => self.class(),
            b'\\' => {
                let c = self.escaped()?;
                Ok(self.ast.push(Kind::Sym(c as Sym), vec![]))
            }
            c => {
                self.i += 1;
                Ok(self.ast.push(Kind::Sym(c as Sym), vec![]))
            }
        }
    }

    fn class(&mut self) -> Result<usize, RegexError> {
        let at = self.i;
        self.i += 1;
        let mut set = [false; 256];
        let mut any = false;
        loop {
            let c = match self.s.get(self.i) {
                None => return Err(RegexError::BadClass(at)),
                Some(b']') if any => {
                    self.i += 1;
                    break;
                }
                Some(b'\\') => self.escaped()?,
                Some(&c) => {
                    self.i += 1;
                    c
                }
            };
            let mut hi = c;
            if self.s.get(self.i) == Some(&b'-') && self.s.get(self.i + 1).is_some_and(|&d| d != b']') {
                self.i += 1;
                hi = if self.s[self.i] == b'\\' { self.escaped()? } else {
                    self.i += 1;
                    self.s[self.i - 1]
                };
                if hi < c {
                    return Err(RegexError::BadClass(at));
                }
            }
            for b in c..=hi {
                set[b as usize] = true;
            }
            any = true;
        }
        let mut acc: Option<usize> = None;
        for b in 0..256 {
            if set[b] {
                let l = self.ast.push(Kind::Sym(b as Sym), vec![]);
                acc = Some(match acc {
                    None => l,
                    Some(a) => self.ast.push(Kind::Union, vec![a, l]),
                });
            }
        }
        Ok(acc.unwrap())
    }
}

/// Parses a pattern. `*` binds tighter than concatenation, which binds
/// tighter than `|`. `r+` expands to `r r*`, `[..]` to a union of bytes.
pub fn parse_regex(text: &str) -> Result<RegexAst, RegexError> {
    parse_regex_bytes(text.as_bytes())
}

pub fn parse_regex_bytes(s: &[u8]) -> Result<RegexAst, RegexError> {
    if s.is_empty() {
        return Err(RegexError::Empty);
    }
    let mut p = Parser { s, i: 0, ast: RegexAst { nodes: Vec::new(), root: 0 } };
    let root = p.union()?;
    if p.i < s.len() {
        // only a stray ')' stops the top-level union early
        return Err(RegexError::Unbalanced(p.i));
    }
    p.ast.root = root;
    Ok(p.ast)
}

/// Thompson automaton.
#[derive(Debug, Clone)]
pub struct Tnfa {
    pub n: usize,
    /// ε-successors of each state
    pub eps: Vec<Vec<usize>>,
    /// symbol transitions `(from, to, symbol)`; `to == from + 1`
    pub sym_edges: Vec<(usize, usize, Sym)>,
    /// back transitions among the ε-edges
    pub back: Vec<(usize, usize)>,
    /// label of the incoming symbol transition, if any
    pub incoming: Vec<Option<Sym>>,
    pub start: usize,
    pub accept: usize,
    /// `(θ_v, φ_v)` of each parse node
    pub node_states: Vec<(usize, usize)>,
}

/// Builds `N(R)`. Linear in the size of the parse tree.
pub fn thompson(ast: &RegexAst) -> Tnfa {
    let m = ast.len();
    let mut node_states = vec![(0, 0); m];
    // assign numbers with an explicit stack: enter gives θ, exit gives φ
    let mut next = 0;
    let mut st = vec![(ast.root, false)];
    while let Some((v, done)) = st.pop() {
        if done {
            node_states[v].1 = next;
            next += 1;
        } else {
            node_states[v].0 = next;
            next += 1;
            st.push((v, true));
            for &k in ast.nodes[v].kids.iter().rev() {
                st.push((k, false));
            }
        }
    }
    let n = next;
    let mut eps = vec![Vec::new(); n];
    let mut sym_edges = Vec::new();
    let mut back = Vec::new();
    let mut incoming = vec![None; n];
    for (v, node) in ast.nodes.iter().enumerate() {
        let (t, f) = node_states[v];
        let k = |i: usize| node_states[node.kids[i]];
        match node.kind {
            Kind::Sym(a) => {
                sym_edges.push((t, f, a));
                incoming[f] = Some(a);
            }
            Kind::Concat => {
                let (s0, s1) = k(0);
                let (t0, t1) = k(1);
                eps[t].push(s0);
                eps[s1].push(t0);
                eps[t1].push(f);
            }
            Kind::Union => {
                let (s0, s1) = k(0);
                let (t0, t1) = k(1);
                eps[t].push(s0);
                eps[t].push(t0);
                eps[s1].push(f);
                eps[t1].push(f);
            }
            Kind::Star => {
                let (s0, s1) = k(0);
                eps[t].push(s0);
                eps[t].push(f);
                eps[s1].push(f);
                eps[s1].push(s0);
                back.push((s1, s0));
            }
        }
    }
    let (start, accept) = node_states[ast.root];
    Tnfa { n, eps, sym_edges, back, incoming, start, accept, node_states }
}

pub type StateSet = BitString;

impl Tnfa {
    pub fn transitions(&self) -> usize {
        self.sym_edges.len() + self.eps.iter().map(Vec::len).sum::<usize>()
    }

    pub fn empty_set(&self) -> StateSet {
        BitString::zeros(self.n)
    }

    pub fn singleton(&self, s: usize) -> StateSet {
        let mut b = self.empty_set();
        b.set(s);
        b
    }

    pub fn move_set(&self, s: &StateSet, a: Sym) -> StateSet {
        let mut out = self.empty_set();
        for &(u, v, b) in &self.sym_edges {
            if b == a && s.get(u) {
                out.set(v);
            }
        }
        out
    }

    /// ε-closure by breadth-first search.
    pub fn close(&self, s: &StateSet) -> StateSet {
        let mut out = s.clone();
        let mut q: VecDeque<usize> = s.iter_ones().collect();
        while let Some(u) = q.pop_front() {
            for &v in &self.eps[u] {
                if !out.get(v) {
                    out.set(v);
                    q.push_back(v);
                }
            }
        }
        out
    }

    pub fn step(&self, s: &StateSet, a: Sym) -> StateSet {
        self.close(&self.move_set(s, a))
    }

    /// `Close({θ})`.
    pub fn initial(&self) -> StateSet {
        self.close(&self.singleton(self.start))
    }

    pub fn accepts(&self, q: &[u8]) -> bool {
        let mut s = self.initial();
        for &c in q {
            s = self.step(&s, c as Sym);
        }
        s.get(self.accept)
    }

    /// Whether ε is in the language.
    pub fn nullable(&self) -> bool {
        self.initial().get(self.accept)
    }
}

/// Merges nonempty match ends with the ε convention: when ε is in the
/// language every position `0..=n` matches unless `no_empty` is set.
pub fn with_empty(nonempty: Vec<usize>, nullable: bool, n: usize, no_empty: bool) -> Vec<usize> {
    if nullable && !no_empty {
        (0..=n).collect()
    } else {
        nonempty
    }
}

/// All `j` such that some substring `q[i..j]` is in the language; `j` is
/// 1-based, position 0 only for the empty match.
pub fn find_matches(n: &Tnfa, q: &[u8]) -> Vec<usize> {
    find_matches_opts(n, q, false)
}

pub fn find_matches_opts(n: &Tnfa, q: &[u8], no_empty: bool) -> Vec<usize> {
    let init = n.initial();
    let mut s = n.empty_set();
    let mut out = Vec::new();
    for (j, &c) in q.iter().enumerate() {
        s.or_assign(&init);
        s = n.step(&s, c as Sym);
        if s.get(n.accept) {
            out.push(j + 1);
        }
    }
    with_empty(out, n.nullable(), q.len(), no_empty)
}

#[cfg(test)]
pub(crate) mod testgen {

    use rand::Rng;

    /// Random expression with `lits` literals over `alpha`.
    pub fn random_regex<R: Rng>(rng: &mut R, lits: usize, alpha: &[u8]) -> String {
        if lits <= 1 {
            let c = alpha[rng.gen_range(0..alpha.len())] as char;
            return if rng.gen_bool(0.25) { format!("{c}*") } else { c.to_string() };
        }
        let l = rng.gen_range(1..lits);
        let a = random_regex(rng, l, alpha);
        let b = random_regex(rng, lits - l, alpha);
        let body = if rng.gen_bool(0.5) { format!("{a}{b}") } else { format!("({a}|{b})") };
        if rng.gen_bool(0.2) {
            format!("({body})*")
        } else {
            body
        }
    }

    /// Every expression with exactly `lits` literals over `alpha`, with at
    /// most one star per subexpression.
    pub fn all_regex(lits: usize, alpha: &[u8]) -> Vec<String> {
        let mut base: Vec<String> = Vec::new();
        if lits == 1 {
            for &c in alpha {
                base.push((c as char).to_string());
            }
        } else {
            for l in 1..lits {
                let left = all_regex(l, alpha);
                let right = all_regex(lits - l, alpha);
                for a in &left {
                    for b in &right {
                        base.push(format!("({a}{b})"));
                        base.push(format!("({a}|{b})"));
                    }
                }
            }
        }
        let mut out = base.clone();
        out.extend(base.iter().map(|b| format!("{b}*")));
        out
    }

    pub fn all_strings(max: usize, alpha: &[u8]) -> Vec<Vec<u8>> {
        let mut out = vec![vec![]];
        let mut layer = vec![vec![]];
        for _ in 0..max {
            let mut next = Vec::new();
            for s in &layer {
                for &c in alpha {
                    let mut t: Vec<u8> = s.clone();
                    t.push(c);
                    next.push(t);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}
