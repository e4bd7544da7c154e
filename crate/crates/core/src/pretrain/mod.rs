//! Pre-training instance generation and record files.

mod instances;
mod serialize;

pub use instances::{
    build_instances, masked_count, stream_seed, ExampleGenConfig, GenerationError, GenerationStats, PretrainInstance,
    TokenizedDocument,
};
pub use serialize::{
    packed_record_size, read_jsonl, read_packed, serialize_instances, InstanceManifest, InstanceWriter, RecordFormat,
    SerializeError, PACKED_HEADER_LEN, PACKED_MAGIC,
};

use crate::segment::SegmentedDocument;
use crate::subword::FullTokenizer;

/// Wordpiece ids for every sentence of a segmented document. Sentence
/// tokens are rejoined with spaces before basic tokenization.
pub fn tokenize_document(doc: &SegmentedDocument, tokenizer: &FullTokenizer) -> TokenizedDocument {
    TokenizedDocument {
        doc_id: doc.doc_id,
        sentences: doc
            .sentences
            .iter()
            .map(|s| tokenizer.tokenize(&s.join(" ")))
            .collect(),
    }
}
