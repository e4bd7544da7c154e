//! Corpus preparation for monolingual BERT models trained on Wikipedia:
//! dump extraction, sentence segmentation, language identification,
//! document filtering, subword vocabulary induction, pre-training example
//! generation and dependency-parsing evaluation analytics.

pub mod chars;
pub mod extract;
pub mod filter;
pub mod langid;
pub mod pipeline;
pub mod pretrain;
pub mod segment;
pub mod subword;
pub mod textfmt;
pub mod udeval;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/extraction.md")]
    mod extraction {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/language-id.md")]
    mod language_id {}
    #[doc = include_str!("../../../book/src/filtering.md")]
    mod filtering {}
    #[doc = include_str!("../../../book/src/vocabulary.md")]
    mod vocabulary {}
    #[doc = include_str!("../../../book/src/examples.md")]
    mod examples {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
