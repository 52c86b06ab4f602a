pub mod approx;
pub mod bitstring;
pub mod csearch;
pub mod engines;
pub mod regex;
pub mod tree_distance;
pub mod tree_inclusion;
pub mod subseq;
pub mod tps;
pub mod trees;
pub mod zl;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/regex.md")]
    mod regex {}
    #[doc = include_str!("../../../book/src/approx.md")]
    mod approx {}
    #[doc = include_str!("../../../book/src/subseq.md")]
    mod subseq {}
    #[doc = include_str!("../../../book/src/compressed.md")]
    mod compressed {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
