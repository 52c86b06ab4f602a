//! ZL78 and ZLW compression, the dictionary trie, and τ-spaced special
//! elements.
//!
//! A ZL78 element is `(reference, label)`. A ZLW element is a bare
//! reference into a dictionary that starts with one node per byte (ids
//! 1..=256), and each element after the first defines node `256 + j` as the
//! previous phrase extended by the first byte of the current one.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ZlError {
    #[error("not a compressed file (bad magic)")]
    BadMagic,
    #[error("unknown scheme byte {0}")]
    BadScheme(u8),
    #[error("compressed data is truncated")]
    Truncated,
    #[error("element {index} references {reference}, which is not defined yet")]
    ForwardReference { index: usize, reference: u64 },
    #[error("element {index} repeats an earlier phrase")]
    DuplicatePhrase { index: usize },
    #[error("decoded length {got} does not match recorded length {want}")]
    LengthMismatch { got: u64, want: u64 },
    #[error("trailing bytes after the last element")]
    Trailing,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Zl78,
    Zlw,
}

impl Scheme {
    pub fn byte(self) -> u8 {
        match self {
            Scheme::Zl78 => 78,
            Scheme::Zlw => 87,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zl78" => Ok(Scheme::Zl78),
            "zlw" => Ok(Scheme::Zlw),
            _ => Err(format!("unknown scheme '{s}' (zl78|zlw)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub reference: u32,
    /// `None` for every ZLW element and for a trailing ZL78 element that
    /// repeats an existing phrase.
    pub label: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedText {
    pub scheme: Scheme,
    pub elements: Vec<Element>,
    /// length of the source text
    pub len: usize,
}

const MAGIC: &[u8; 5] = b"PMZL1";
const ZLW_BASE: u32 = 256;

pub fn compress(q: &[u8], scheme: Scheme) -> CompressedText {
    let mut kids: HashMap<(u32, u8), u32> = HashMap::new();
    let mut elements = Vec::new();
    match scheme {
        Scheme::Zl78 => {
            let mut j = 0;
            while j < q.len() {
                let mut v = 0u32;
                while j < q.len() {
                    match kids.get(&(v, q[j])) {
                        Some(&w) => {
                            v = w;
                            j += 1;
                        }
                        None => break,
                    }
                }
                if j == q.len() {
                    elements.push(Element { reference: v, label: None });
                    break;
                }
                let id = elements.len() as u32 + 1;
                kids.insert((v, q[j]), id);
                elements.push(Element { reference: v, label: Some(q[j]) });
                j += 1;
            }
        }
        Scheme::Zlw => {
            let mut next = ZLW_BASE + 1;
            let mut j = 0;
            while j < q.len() {
                let mut v = q[j] as u32 + 1;
                j += 1;
                while j < q.len() {
                    match kids.get(&(v, q[j])) {
                        Some(&w) => {
                            v = w;
                            j += 1;
                        }
                        None => break,
                    }
                }
                elements.push(Element { reference: v, label: None });
                if j < q.len() {
                    kids.insert((v, q[j]), next);
                    next += 1;
                }
            }
        }
    }
    CompressedText { scheme, elements, len: q.len() }
}

/// Dictionary trie plus the node each element outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trie {
    pub parent: Vec<u32>,
    pub label: Vec<u8>,
    pub depth: Vec<u32>,
    /// children sorted by label
    pub kids: Vec<Vec<(u8, u32)>>,
    /// `outputs[i]` is the node whose phrase element `i` contributes
    pub outputs: Vec<u32>,
}

impl Trie {
    pub fn nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn child(&self, v: u32, c: u8) -> Option<u32> {
        let k = &self.kids[v as usize];
        k.binary_search_by_key(&c, |&(a, _)| a).ok().map(|i| k[i].1)
    }

    pub fn spell(&self, mut v: u32) -> Vec<u8> {
        let mut s = Vec::with_capacity(self.depth[v as usize] as usize);
        while v != 0 {
            s.push(self.label[v as usize]);
            v = self.parent[v as usize];
        }
        s.reverse();
        s
    }

    fn push(&mut self, p: u32, c: u8) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(p);
        self.label.push(c);
        self.depth.push(self.depth[p as usize] + 1);
        self.kids.push(Vec::new());
        id
    }

    fn link(&mut self, index: usize) -> Result<(), ZlError> {
        let v = self.parent.len() as u32 - 1;
        let (p, c) = (self.parent[v as usize], self.label[v as usize]);
        let k = &mut self.kids[p as usize];
        match k.binary_search_by_key(&c, |&(a, _)| a) {
            Ok(_) => Err(ZlError::DuplicatePhrase { index }),
            Err(i) => {
                k.insert(i, (c, v));
                Ok(())
            }
        }
    }
}

/// Builds the trie. ZL78 gives one node per labeled element plus the root;
/// ZLW gives the root, 256 byte nodes and one node per element but the last.
pub fn build_trie(z: &CompressedText) -> Result<Trie, ZlError> {
    let t = dictionary(z)?;
    let got: u64 = t.outputs.iter().map(|&v| t.depth[v as usize] as u64).sum();
    if got != z.len as u64 {
        return Err(ZlError::LengthMismatch { got, want: z.len as u64 });
    }
    Ok(t)
}

fn dictionary(z: &CompressedText) -> Result<Trie, ZlError> {
    let n = z.elements.len();
    let mut t = Trie {
        parent: vec![0],
        label: vec![0],
        depth: vec![0],
        kids: vec![Vec::new()],
        outputs: Vec::with_capacity(n),
    };
    match z.scheme {
        Scheme::Zl78 => {
            for (i, e) in z.elements.iter().enumerate() {
                if e.reference as usize >= t.nodes() {
                    return Err(ZlError::ForwardReference { index: i + 1, reference: e.reference as u64 });
                }
                match e.label {
                    Some(c) => {
                        let id = t.push(e.reference, c);
                        t.link(i + 1)?;
                        t.outputs.push(id);
                    }
                    None if i + 1 == n => t.outputs.push(e.reference),
                    None => return Err(ZlError::Truncated),
                }
            }
        }
        Scheme::Zlw => {
            for b in 0..=255u8 {
                t.push(0, b);
                t.link(0)?;
            }
            let first = |t: &Trie, mut v: u32| {
                while t.parent[v as usize] != 0 {
                    v = t.parent[v as usize];
                }
                t.label[v as usize]
            };
            for (j, e) in z.elements.iter().enumerate() {
                let r = e.reference;
                let limit = ZLW_BASE + j as u32;
                if r == 0 || r > limit {
                    return Err(ZlError::ForwardReference { index: j + 1, reference: r as u64 });
                }
                if j > 0 {
                    let prev = t.outputs[j - 1];
                    // r == limit: the node being defined, whose first byte is prev's
                    let c = if r == limit { first(&t, prev) } else { first(&t, r) };
                    t.push(prev, c);
                    t.link(j + 1)?;
                    debug_assert_eq!(t.label[limit as usize], first(&t, r));
                }
                t.outputs.push(r);
            }
        }
    }
    Ok(t)
}

pub fn decompress(z: &CompressedText) -> Result<Vec<u8>, ZlError> {
    let t = build_trie(z)?;
    let mut out = Vec::with_capacity(z.len);
    for &v in &t.outputs {
        let at = out.len();
        let mut w = v;
        while w != 0 {
            out.push(t.label[w as usize]);
            w = t.parent[w as usize];
        }
        out[at..].reverse();
    }
    Ok(out)
}

impl CompressedText {
    /// Container: magic, scheme byte, LEB128 element count and source
    /// length, then one LEB128 reference per element (plus the label byte
    /// for ZL78; a trailing element without label stores 0).
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[self.scheme.byte()])?;
        leb128::write::unsigned(w, self.elements.len() as u64)?;
        leb128::write::unsigned(w, self.len as u64)?;
        for e in &self.elements {
            leb128::write::unsigned(w, e.reference as u64)?;
            if self.scheme == Scheme::Zl78 {
                w.write_all(&[e.label.unwrap_or(0)])?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("writing to memory");
        v
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ZlError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, ZlError> {
        if buf.len() < 6 || &buf[..5] != MAGIC {
            return Err(ZlError::BadMagic);
        }
        let scheme = match buf[5] {
            78 => Scheme::Zl78,
            87 => Scheme::Zlw,
            b => return Err(ZlError::BadScheme(b)),
        };
        let mut r = &buf[6..];
        let uleb = |r: &mut &[u8]| leb128::read::unsigned(r).map_err(|_| ZlError::Truncated);
        let n = uleb(&mut r)?;
        let len = uleb(&mut r)?;
        let mut elements = Vec::with_capacity(n.min(buf.len() as u64) as usize);
        let mut labels = Vec::new();
        for i in 0..n {
            let reference = uleb(&mut r)?;
            if reference > u32::MAX as u64 {
                return Err(ZlError::ForwardReference { index: i as usize + 1, reference });
            }
            let label = if scheme == Scheme::Zl78 {
                let (&c, rest) = r.split_first().ok_or(ZlError::Truncated)?;
                r = rest;
                labels.push(c);
                Some(c)
            } else {
                None
            };
            elements.push(Element { reference: reference as u32, label });
        }
        if !r.is_empty() {
            return Err(ZlError::Trailing);
        }
        let mut z = CompressedText { scheme, elements, len: len as usize };
        // a trailing element that repeats a phrase is stored with label 0;
        // the recorded length tells the two readings apart
        if scheme == Scheme::Zl78 && labels.last() == Some(&0) {
            let last = z.elements.len() - 1;
            z.elements[last].label = None;
            if build_trie(&z).is_ok() {
                return Ok(z);
            }
            z.elements[last].label = Some(0);
        }
        build_trie(&z)?;
        Ok(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Special {
    /// phrase length
    pub len: u32,
    /// ancestor at the configured depth, when the phrase is longer
    pub anc: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct SpecialSet {
    pub tau: usize,
    /// depth for which ancestors are recorded
    pub h: usize,
    members: HashMap<u32, Special>,
}

impl SpecialSet {
    pub fn get(&self, v: u32) -> Option<&Special> {
        self.members.get(&v)
    }

    pub fn contains(&self, v: u32) -> bool {
        self.members.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.members.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Walks from `v` to its nearest member; returns the path (starting at
    /// `v`, ending at the member).
    pub fn walk(&self, v: u32, parent: impl Fn(u32) -> u32) -> Vec<u32> {
        let mut p = vec![v];
        let mut w = v;
        while !self.contains(w) {
            w = parent(w);
            p.push(w);
        }
        p
    }

    /// Length of the phrase of `v` and its ancestor at depth `h`.
    pub fn locate(&self, v: u32, parent: impl Fn(u32) -> u32) -> Special {
        let path = self.walk(v, parent);
        self.info_at(&path, 0)
    }

    /// Info for `path[k]` given a path that ends in a member.
    fn info_at(&self, path: &[u32], k: usize) -> Special {
        let y = self.members[path.last().unwrap()];
        let dist = path.len() - 1 - k;
        let len = y.len as usize + dist;
        let anc = if len > self.h {
            let up = len - self.h;
            if up <= dist {
                Some(path[k + up])
            } else {
                y.anc
            }
        } else {
            None
        };
        Special { len: len as u32, anc }
    }
}

/// Left-to-right selection over nodes `1..count` whose parents come
/// earlier; node 0 is the root and always a member.
pub fn select_special_nodes(count: usize, parent: impl Fn(u32) -> u32, tau: usize, h: usize) -> SpecialSet {
    let tau = tau.max(1);
    let mut s = SpecialSet { tau, h, members: HashMap::new() };
    s.members.insert(0, Special { len: 0, anc: None });
    for v in 1..count as u32 {
        let path = s.walk(v, &parent);
        if path.len() >= 2 * tau {
            let y = path[tau - 1];
            let info = s.info_at(&path, tau - 1);
            s.members.insert(y, info);
        }
    }
    s
}

/// Special elements of the dictionary with ancestors recorded at depth `h`
/// (`usize::MAX` records none).
pub fn select_special_h(z: &CompressedText, tau: usize, h: usize) -> Result<SpecialSet, ZlError> {
    let t = dictionary(z)?;
    Ok(select_special_nodes(t.nodes(), |v| t.parent[v as usize], tau, h))
}

pub fn select_special(z: &CompressedText, tau: usize) -> Result<SpecialSet, ZlError> {
    select_special_h(z, tau, usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn el(r: u32, c: u8) -> Element {
        Element { reference: r, label: Some(c) }
    }

    #[test]
    fn ananas_parse() {
        let z = compress(b"ananasbananer", Scheme::Zl78);
        let want = vec![el(0, b'a'), el(0, b'n'), el(1, b'n'), el(1, b's'), el(0, b'b'), el(3, b'a'), el(2, b'e'), el(0, b'r')];
        assert_eq!(z.elements, want);
        assert_eq!(decompress(&z).unwrap(), b"ananasbananer");
        let t = build_trie(&z).unwrap();
        assert_eq!(t.nodes(), 9);
        let root: Vec<u8> = t.kids[0].iter().map(|&(c, _)| c).collect();
        assert_eq!(root, b"abnr");
        assert_eq!(t.spell(6), b"ana");
    }

    #[test]
    fn edge_cases() {
        for s in [Scheme::Zl78, Scheme::Zlw] {
            let z = compress(b"", s);
            assert!(z.elements.is_empty());
            assert_eq!(decompress(&z).unwrap(), b"");
        }
        let z = compress(b"aaaa", Scheme::Zl78);
        assert_eq!(z.elements, vec![el(0, b'a'), el(1, b'a'), Element { reference: 1, label: None }]);
        assert_eq!(decompress(&z).unwrap(), b"aaaa");
        let z = compress(b"a", Scheme::Zl78);
        assert_eq!(build_trie(&z).unwrap().nodes(), 2);
        // KwKwK
        let z = compress(b"aaaaaaa", Scheme::Zlw);
        assert_eq!(z.elements.iter().map(|e| e.reference).collect::<Vec<_>>(), vec![98, 257, 258, 98]);
        assert_eq!(decompress(&z).unwrap(), b"aaaaaaa");
    }

    #[test]
    fn forward_reference_is_corrupt() {
        let z = CompressedText { scheme: Scheme::Zl78, elements: vec![el(0, b'a'), el(2, b'b')], len: 2 };
        assert!(matches!(decompress(&z), Err(ZlError::ForwardReference { index: 2, .. })));
        let z = CompressedText { scheme: Scheme::Zlw, elements: vec![Element { reference: 300, label: None }], len: 1 };
        assert!(matches!(decompress(&z), Err(ZlError::ForwardReference { index: 1, .. })));
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let mut inputs: Vec<Vec<u8>> = vec![vec![7; 5000], (0..=255u8).cycle().take(3000).collect()];
        // de Bruijn-like over {0,1}
        let mut db = Vec::new();
        for w in 0u32..512 {
            db.extend((0..9).map(|b| (w >> b & 1) as u8));
        }
        inputs.push(db);
        for _ in 0..30 {
            let len = rng.gen_range(0..2000);
            let sig = rng.gen_range(1..=256u32);
            inputs.push((0..len).map(|_| rng.gen_range(0..sig) as u8).collect());
        }
        inputs.push((0..100_000).map(|_| rng.gen_range(0..4u8) + b'a').collect());
        for q in &inputs {
            for s in [Scheme::Zl78, Scheme::Zlw] {
                let z = compress(q, s);
                assert_eq!(&decompress(&z).unwrap(), q);
                let back = CompressedText::from_bytes(&z.to_bytes()).unwrap();
                assert_eq!(back, z);
                let t = build_trie(&z).unwrap();
                // prefix closed and distinct by construction of the trie
                for v in 1..t.nodes() as u32 {
                    let p = t.parent[v as usize];
                    assert!(p < v);
                    assert_eq!(t.child(p, t.label[v as usize]), Some(v));
                }
            }
        }
    }

    #[test]
    fn container_errors() {
        let z = compress(b"abcabcabc", Scheme::Zl78);
        let b = z.to_bytes();
        assert_eq!(&b[..6], b"PMZL1N");
        assert!(matches!(CompressedText::from_bytes(b"PMZL2N"), Err(ZlError::BadMagic)));
        let mut bad = b.clone();
        bad[5] = 1;
        assert!(matches!(CompressedText::from_bytes(&bad), Err(ZlError::BadScheme(1))));
        assert!(matches!(CompressedText::from_bytes(&b[..b.len() - 1]), Err(ZlError::Truncated)));
        let mut bad = b.clone();
        bad.push(0);
        assert!(matches!(CompressedText::from_bytes(&bad), Err(ZlError::Trailing)));
    }

    fn audit(parent: &[u32], s: &SpecialSet) {
        let n = parent.len();
        // distance to nearest member along the reference path
        for v in 0..n as u32 {
            let d = s.walk(v, |w| parent[w as usize]).len() - 1;
            assert!(d < 2 * s.tau, "distance {d} with tau {}", s.tau);
        }
        assert!(s.len() <= 2 * (n - 1) / s.tau + 1);
    }

    #[test]
    fn special_sets() {
        let z = compress(b"ananasbananer", Scheme::Zl78);
        let s = select_special(&z, 8).unwrap();
        assert_eq!(s.members(), vec![0]);
        let t = build_trie(&z).unwrap();
        let s1 = select_special(&z, 1).unwrap();
        for v in 0..t.nodes() as u32 {
            assert!(s1.walk(v, |w| t.parent[w as usize]).len() <= 3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        for _ in 0..40 {
            let sig = rng.gen_range(1..4u8);
            let q: Vec<u8> = (0..rng.gen_range(0..3000)).map(|_| rng.gen_range(0..sig) + b'a').collect();
            for scheme in [Scheme::Zl78, Scheme::Zlw] {
                let z = compress(&q, scheme);
                let t = build_trie(&z).unwrap();
                for tau in [1, 2, 4, 8] {
                    let h = rng.gen_range(0..12);
                    let s = select_special_h(&z, tau, h).unwrap();
                    audit(&t.parent, &s);
                    for v in 0..t.nodes() as u32 {
                        let info = s.locate(v, |w| t.parent[w as usize]);
                        assert_eq!(info.len, t.depth[v as usize]);
                        let mut a = v;
                        while t.depth[a as usize] as usize > h {
                            a = t.parent[a as usize];
                        }
                        assert_eq!(info.anc, (t.depth[v as usize] as usize > h).then_some(a));
                    }
                }
            }
        }
    }
}
