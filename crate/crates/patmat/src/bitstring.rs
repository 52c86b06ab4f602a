//! Fixed-length bit strings spread over `u64` words.
//!
//! Bit `i` is stored at bit `i % 64` of word `i / 64`, so shifting left moves
//! bits towards higher indices. Arithmetic treats the string as an unsigned
//! integer modulo `2^len`.

use std::fmt;

use smallvec::{smallvec, SmallVec};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: SmallVec<[u64; 8]>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString { words: smallvec![0; words_for(len)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = BitString { words: smallvec![!0; words_for(len)], len };
        b.trim();
        b
    }

    /// Builds a string of `len` bits with the given positions set.
    pub fn from_positions<I: IntoIterator<Item = usize>>(len: usize, it: I) -> Self {
        let mut b = Self::zeros(len);
        for i in it {
            b.set(i);
        }
        b
    }

    /// Parses a string of `0`/`1` written most significant bit first.
    pub fn from_binary(s: &str) -> Self {
        let len = s.len();
        let mut b = Self::zeros(len);
        for (k, c) in s.bytes().enumerate() {
            if c == b'1' {
                b.set(len - 1 - k);
            }
        }
        b
    }

    pub fn from_u64(len: usize, v: u64) -> Self {
        let mut b = Self::zeros(len);
        if !b.words.is_empty() {
            b.words[0] = v;
        }
        b.trim();
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The low 64 bits.
    pub fn low_word(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    /// The low 128 bits.
    pub fn low_u128(&self) -> u128 {
        let lo = self.words.first().copied().unwrap_or(0) as u128;
        let hi = self.words.get(1).copied().unwrap_or(0) as u128;
        lo | hi << 64
    }

    pub fn from_u128(len: usize, v: u128) -> Self {
        let mut b = Self::zeros(len);
        if let Some(w) = b.words.get_mut(0) {
            *w = v as u64;
        }
        if let Some(w) = b.words.get_mut(1) {
            *w = (v >> 64) as u64;
        }
        b.trim();
        b
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    fn trim(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(w) = self.words.last_mut() {
                *w &= (1u64 << r) - 1;
            }
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn assign(&mut self, i: usize, v: bool) {
        if v {
            self.set(i)
        } else {
            self.clear(i)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn clear_all(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    /// Iterates over set positions in increasing order.
    pub fn iter_ones(&self) -> Ones<'_> {
        Ones { words: &self.words, idx: 0, cur: self.words.first().copied().unwrap_or(0) }
    }

    pub fn shl(&self, k: usize) -> Self {
        let mut out = Self::zeros(self.len);
        let (ws, bs) = (k / 64, k % 64);
        let n = self.words.len();
        for i in (ws..n).rev() {
            let src = i - ws;
            let mut v = self.words[src] << bs;
            if bs != 0 && src > 0 {
                v |= self.words[src - 1] >> (64 - bs);
            }
            out.words[i] = v;
        }
        out.trim();
        out
    }

    pub fn shr(&self, k: usize) -> Self {
        let mut out = Self::zeros(self.len);
        let (ws, bs) = (k / 64, k % 64);
        let n = self.words.len();
        for i in 0..n.saturating_sub(ws) {
            let src = i + ws;
            let mut v = self.words[src] >> bs;
            if bs != 0 && src + 1 < n {
                v |= self.words[src + 1] << (64 - bs);
            }
            out.words[i] = v;
        }
        out
    }

    pub fn and(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.and_assign(o);
        r
    }

    pub fn or(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.or_assign(o);
        r
    }

    pub fn xor(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a ^ b)
    }

    /// `self & !o`
    pub fn andnot(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a & !b)
    }

    pub fn not(&self) -> Self {
        let mut r = BitString { words: self.words.iter().map(|w| !w).collect(), len: self.len };
        r.trim();
        r
    }

    fn zip(&self, o: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.len, o.len, "length mismatch");
        BitString {
            words: self.words.iter().zip(&o.words).map(|(&a, &b)| f(a, b)).collect(),
            len: self.len,
        }
    }

    pub fn and_assign(&mut self, o: &Self) {
        assert_eq!(self.len, o.len, "length mismatch");
        for (a, b) in self.words.iter_mut().zip(&o.words) {
            *a &= b;
        }
    }

    pub fn or_assign(&mut self, o: &Self) {
        assert_eq!(self.len, o.len, "length mismatch");
        for (a, b) in self.words.iter_mut().zip(&o.words) {
            *a |= b;
        }
    }

    /// Unsigned subtraction modulo `2^len`.
    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!(self.len, o.len, "length mismatch");
        let mut out = Self::zeros(self.len);
        let mut borrow = false;
        for i in 0..self.words.len() {
            let (d1, b1) = self.words[i].overflowing_sub(o.words[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            out.words[i] = d2;
            borrow = b1 || b2;
        }
        out.trim();
        out
    }

    /// Unsigned addition modulo `2^len`.
    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.len, o.len, "length mismatch");
        let mut out = Self::zeros(self.len);
        let mut carry = false;
        for i in 0..self.words.len() {
            let (s1, c1) = self.words[i].overflowing_add(o.words[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            out.words[i] = s2;
            carry = c1 || c2;
        }
        out.trim();
        out
    }

    /// Product with a constant, computed by shift-and-add over the set bits
    /// of `c`. Truncated to `self.len()` bits.
    pub fn mul(&self, c: &Self) -> Self {
        let mut acc = Self::zeros(self.len);
        for i in c.iter_ones() {
            acc = acc.add(&self.shl(i));
        }
        acc
    }

    /// Bits `[lo, lo + n)` as a new string of length `n`.
    pub fn extract(&self, lo: usize, n: usize) -> Self {
        let mut s = self.shr(lo);
        s.resize(n);
        s
    }

    /// Changes the length, dropping or zero-filling high bits.
    pub fn resize(&mut self, n: usize) {
        self.words.resize(words_for(n), 0);
        self.len = n;
        self.trim();
    }

    /// Copies `src` into bits `[lo, lo + src.len())`, or-ing with existing bits.
    pub fn or_at(&mut self, lo: usize, src: &Self) {
        for i in src.iter_ones() {
            self.set(lo + i);
        }
    }
}

pub struct Ones<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let t = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * 64 + t);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

/// Most significant bit first.
impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}
