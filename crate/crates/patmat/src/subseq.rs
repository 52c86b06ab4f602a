//! Subsequence queries over a preprocessed text.
//!
//! Positions are 1-based. The text is cut into blocks of `σ` consecutive
//! positions, where `σ` is the number of distinct symbols in the text. A
//! query first looks for the next occurrence inside the current block and
//! otherwise takes the block's long jump.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("not a subsequence index (bad magic)")]
    BadMagic,
    #[error("index is truncated")]
    Truncated,
    #[error("index is corrupt: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

const MAGIC: &[u8; 5] = b"PMSQ1";
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubseqIndex {
    n: usize,
    /// distinct symbols, sorted
    alphabet: Vec<u8>,
    /// symbol byte → rank in `alphabet`, `u16::MAX` when absent
    code: [u16; 256],
    /// `jump[b * σ + a]`: first position after block `b` holding symbol `a`
    jump: Vec<u32>,
    /// `offsets[b * (σ + 1) + a]`: start of symbol `a`'s positions in block `b`
    offsets: Vec<u32>,
    positions: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub block_searches: usize,
    pub long_jumps: usize,
}

pub fn build_index(t: &[u8]) -> SubseqIndex {
    let mut seen = [false; 256];
    for &c in t {
        seen[c as usize] = true;
    }
    let alphabet: Vec<u8> = (0..=255u8).filter(|&c| seen[c as usize]).collect();
    let mut code = [u16::MAX; 256];
    for (r, &c) in alphabet.iter().enumerate() {
        code[c as usize] = r as u16;
    }
    let sigma = alphabet.len().max(1);
    let n = t.len();
    let blocks = n.div_ceil(sigma);
    let mut offsets = Vec::with_capacity(blocks * (sigma + 1));
    let mut positions = Vec::with_capacity(n);
    for b in 0..blocks {
        let lo = b * sigma;
        let hi = (lo + sigma).min(n);
        let mut items: Vec<(u16, u32)> = (lo..hi).map(|p| (code[t[p] as usize], p as u32 + 1)).collect();
        items.sort_unstable();
        let mut k = 0;
        for a in 0..=sigma {
            offsets.push(positions.len() as u32 + k as u32);
            while k < items.len() && (items[k].0 as usize) == a {
                k += 1;
            }
        }
        positions.extend(items.iter().map(|&(_, p)| p));
    }
    // right-to-left sweep for the long jumps
    let mut jump = vec![NONE; blocks * sigma];
    let mut next = vec![NONE; sigma];
    for b in (0..blocks).rev() {
        jump[b * sigma..(b + 1) * sigma].copy_from_slice(&next);
        let lo = b * sigma;
        for p in (lo..(lo + sigma).min(n)).rev() {
            next[code[t[p] as usize] as usize] = p as u32 + 1;
        }
    }
    SubseqIndex { n, alphabet, code, jump, offsets, positions }
}

impl SubseqIndex {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sigma(&self) -> usize {
        self.alphabet.len().max(1)
    }

    pub fn blocks(&self) -> usize {
        self.n.div_ceil(self.sigma())
    }

    /// Positions of `c` inside block `b`.
    pub fn block_positions(&self, b: usize, c: u8) -> &[u32] {
        let a = self.code[c as usize];
        if a == u16::MAX {
            return &[];
        }
        let s = self.sigma() + 1;
        let lo = self.offsets[b * s + a as usize] as usize;
        let hi = self.offsets[b * s + a as usize + 1] as usize;
        &self.positions[lo..hi]
    }

    /// All positions of `c`, increasing.
    pub fn positions_of(&self, c: u8) -> Vec<u32> {
        (0..self.blocks()).flat_map(|b| self.block_positions(b, c).iter().copied()).collect()
    }

    pub fn long_jump(&self, b: usize, c: u8) -> Option<u32> {
        let a = self.code[c as usize];
        if a == u16::MAX {
            return None;
        }
        let j = self.jump[b * self.sigma() + a as usize];
        (j != NONE).then_some(j)
    }

    /// Leftmost position holding `c` after `pos`.
    fn next(&self, pos: usize, c: u8, st: &mut QueryStats) -> Option<usize> {
        if pos >= self.n {
            return None;
        }
        let b = pos / self.sigma();
        st.block_searches += 1;
        let list = self.block_positions(b, c);
        let k = list.partition_point(|&p| p as usize <= pos);
        if let Some(&p) = list.get(k) {
            return Some(p as usize);
        }
        st.long_jumps += 1;
        self.long_jump(b, c).map(|p| p as usize)
    }

    pub fn is_subsequence(&self, p: &[u8]) -> bool {
        self.query(p).0
    }

    /// Greedy leftmost embedding; also returns the embedding positions found.
    pub fn embed(&self, p: &[u8]) -> Option<Vec<usize>> {
        let mut st = QueryStats::default();
        let mut pos = 0;
        let mut out = Vec::with_capacity(p.len());
        for &c in p {
            pos = self.next(pos, c, &mut st)?;
            out.push(pos);
        }
        Some(out)
    }

    pub fn query(&self, p: &[u8]) -> (bool, QueryStats) {
        let mut st = QueryStats::default();
        let mut pos = 0;
        for &c in p {
            match self.next(pos, c, &mut st) {
                Some(q) => pos = q,
                None => return (false, st),
            }
        }
        (true, st)
    }

    /// Little-endian container: magic, n, σ, alphabet bytes, block count,
    /// jump table, offset table, positions (all u32).
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        let put = |w: &mut dyn Write, v: u32| w.write_all(&v.to_le_bytes());
        put(w, self.n as u32)?;
        put(w, self.alphabet.len() as u32)?;
        w.write_all(&self.alphabet)?;
        put(w, self.blocks() as u32)?;
        for &v in self.jump.iter().chain(&self.offsets).chain(&self.positions) {
            put(w, v)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("writing to memory");
        v
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, IndexError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, IndexError> {
        if buf.len() < 5 || &buf[..5] != MAGIC {
            return Err(IndexError::BadMagic);
        }
        let mut at = 5;
        let u32_at = |at: &mut usize| -> Result<u32, IndexError> {
            let b = buf.get(*at..*at + 4).ok_or(IndexError::Truncated)?;
            *at += 4;
            Ok(u32::from_le_bytes(b.try_into().unwrap()))
        };
        let n = u32_at(&mut at)? as usize;
        let s = u32_at(&mut at)? as usize;
        let alphabet = buf.get(at..at + s).ok_or(IndexError::Truncated)?.to_vec();
        at += s;
        if alphabet.windows(2).any(|w| w[0] >= w[1]) || (n > 0 && s == 0) {
            return Err(IndexError::Corrupt("alphabet"));
        }
        let sigma = s.max(1);
        let blocks = u32_at(&mut at)? as usize;
        if blocks != n.div_ceil(sigma) {
            return Err(IndexError::Corrupt("block count"));
        }
        let mut take = |k: usize| -> Result<Vec<u32>, IndexError> { (0..k).map(|_| u32_at(&mut at)).collect() };
        let jump = take(blocks * sigma)?;
        let offsets = take(blocks * (sigma + 1))?;
        let positions = take(n)?;
        if at != buf.len() {
            return Err(IndexError::Corrupt("trailing bytes"));
        }
        let mut code = [u16::MAX; 256];
        for (r, &c) in alphabet.iter().enumerate() {
            code[c as usize] = r as u16;
        }
        for b in 0..blocks {
            let o = &offsets[b * (sigma + 1)..(b + 1) * (sigma + 1)];
            if o.windows(2).any(|w| w[0] > w[1]) || o[sigma] as usize > n {
                return Err(IndexError::Corrupt("offsets"));
            }
        }
        if positions.iter().any(|&p| p == 0 || p as usize > n) || jump.iter().any(|&p| p != NONE && p as usize > n) {
            return Err(IndexError::Corrupt("position out of range"));
        }
        Ok(SubseqIndex { n, alphabet, code, jump, offsets, positions })
    }
}

/// Two-pointer scan.
pub fn is_subsequence_scan(p: &[u8], t: &[u8]) -> bool {
    let mut it = t.iter();
    p.iter().all(|c| it.any(|d| d == c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_cases() {
        let e = build_index(b"");
        assert!(e.is_subsequence(b""));
        assert!(!e.is_subsequence(b"a"));
        let ix = build_index(b"acb");
        assert_eq!(ix.blocks(), 1);
        assert_eq!(ix.positions_of(b'b'), vec![3]);
        assert!(ix.is_subsequence(b"ab"));
        assert!(!ix.is_subsequence(b"ba"));
        assert!(!ix.is_subsequence(b"z"));
    }

    #[test]
    fn invariants_against_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..200 {
            let sig = rng.gen_range(1..=8u8);
            let t: Vec<u8> = (0..rng.gen_range(0..=200)).map(|_| b'a' + rng.gen_range(0..sig)).collect();
            let ix = build_index(&t);
            let s = ix.sigma();
            for c in b'a'..b'a' + 8 {
                let want: Vec<u32> = (0..t.len()).filter(|&p| t[p] == c).map(|p| p as u32 + 1).collect();
                assert_eq!(ix.positions_of(c), want);
                for b in 0..ix.blocks() {
                    let end = ((b + 1) * s).min(t.len());
                    let jump = (end..t.len()).find(|&p| t[p] == c).map(|p| p as u32 + 1);
                    assert_eq!(ix.long_jump(b, c), jump);
                }
            }
        }
    }

    #[test]
    fn queries_against_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for _ in 0..2000 {
            let sig = rng.gen_range(1..=6u8);
            let t: Vec<u8> = (0..rng.gen_range(0..60)).map(|_| b'a' + rng.gen_range(0..sig)).collect();
            let p: Vec<u8> = (0..rng.gen_range(0..12)).map(|_| b'a' + rng.gen_range(0..sig + 1)).collect();
            let ix = build_index(&t);
            let (got, st) = ix.query(&p);
            assert_eq!(got, is_subsequence_scan(&p, &t));
            assert!(st.block_searches <= p.len() && st.long_jumps <= p.len());
            if let Some(e) = ix.embed(&p) {
                assert!(e.windows(2).all(|w| w[0] < w[1]));
                assert!(e.iter().zip(&p).all(|(&q, &c)| t[q - 1] == c));
            }
        }
    }

    #[test]
    fn container_round_trip() {
        let ix = build_index(b"abracadabra");
        let bytes = ix.to_bytes();
        assert_eq!(&bytes[..5], b"PMSQ1");
        assert_eq!(SubseqIndex::from_bytes(&bytes).unwrap(), ix);
        assert!(matches!(SubseqIndex::from_bytes(b"PMSQ0"), Err(IndexError::BadMagic)));
        assert!(matches!(SubseqIndex::from_bytes(&bytes[..bytes.len() - 1]), Err(IndexError::Truncated)));
        let e = build_index(b"");
        assert_eq!(SubseqIndex::from_bytes(&e.to_bytes()).unwrap(), e);
    }
}
