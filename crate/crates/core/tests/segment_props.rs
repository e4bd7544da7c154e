mod common;

use std::fs::File;
use std::io::BufReader;

use proptest::prelude::*;
use wikiprep::segment::{split_sentences, tokenize_sentence, Abbreviations, RuleSegmenter, Segmenter};

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn abbreviations(lang: &str) -> Abbreviations {
    let path = common::data_dir().join(format!("abbreviations/{lang}.txt"));
    Abbreviations::from_reader(BufReader::new(File::open(path).unwrap())).unwrap()
}

fn check_paragraph(paragraph: &str, segmenter: &RuleSegmenter) -> Result<(), TestCaseError> {
    let sentences = split_sentences(paragraph, &segmenter.abbreviations);
    prop_assert_eq!(squeeze(&sentences.concat()), squeeze(paragraph));
    let segmented = segmenter.segment_paragraph(paragraph);
    let mut joined = String::new();
    for s in &segmented {
        prop_assert!(!s.is_empty());
        for t in s {
            prop_assert!(!t.is_empty());
            prop_assert!(!t.contains([' ', '\t', '\n']), "token {:?}", t);
            joined.push_str(t);
        }
        prop_assert!(!s.join(" ").contains("  "));
    }
    prop_assert_eq!(joined, squeeze(paragraph));
    prop_assert_eq!(&segmented, &segmenter.segment_paragraph(paragraph));
    Ok(())
}

fn paragraph() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[A-Za-zÄÖäöЖж]{1,8}",
        "[0-9]{1,3}(\\.[0-9]{1,2})?",
        Just(". ".to_string()),
        Just("! ".to_string()),
        Just("?\" ".to_string()),
        Just("... ".to_string()),
        Just("… ".to_string()),
        Just("(".to_string()),
        Just(")".to_string()),
        Just(", ".to_string()),
        Just(" ".to_string()),
        Just("  ".to_string()),
        Just("\t".to_string()),
        Just("Dr. ".to_string()),
        Just("e.g. ".to_string()),
        Just("J. R. ".to_string()),
        Just("«".to_string()),
        Just("»".to_string()),
        Just("-".to_string()),
        Just("'".to_string()),
    ];
    proptest::collection::vec(piece, 1..40).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn segmentation_is_lossless_up_to_whitespace(p in paragraph()) {
        prop_assume!(!p.trim().is_empty());
        check_paragraph(&p, &RuleSegmenter { abbreviations: abbreviations("en") })?;
    }
}

#[test]
fn bundled_corpora_segment_losslessly() {
    for lang in ["en", "de", "fi", "ru"] {
        let segmenter = RuleSegmenter { abbreviations: abbreviations(lang) };
        let mut sentences = 0;
        for p in common::corpus_lines(lang) {
            check_paragraph(&p, &segmenter).unwrap();
            sentences += split_sentences(&p, &segmenter.abbreviations).len();
        }
        assert!(sentences >= 40, "{lang}: {sentences}");
    }
}

#[test]
fn tokenizer_keeps_numbers_and_hyphens() {
    assert_eq!(tokenize_sentence("(3.5)"), ["(", "3.5", ")"]);
    assert_eq!(tokenize_sentence("state-of-the-art, isn't it?"), ["state-of-the-art", ",", "isn't", "it", "?"]);
}
