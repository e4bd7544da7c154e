//! Character classes shared by the tokenizers.

use unicode_general_category::{get_general_category, GeneralCategory};

/// Unicode general category P*.
pub fn is_unicode_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// BERT's punctuation test: every non-alphanumeric ASCII symbol plus
/// Unicode category P*. `$`, `^` and backtick count although they are
/// symbols in Unicode.
pub fn is_bert_punctuation(c: char) -> bool {
    let cp = c as u32;
    (33..=47).contains(&cp)
        || (58..=64).contains(&cp)
        || (91..=96).contains(&cp)
        || (123..=126).contains(&cp)
        || is_unicode_punctuation(c)
}

/// CJK unified ideograph blocks (the ranges BERT's basic tokenizer splits on).
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0xF900..=0xFAFF
        | 0x2F800..=0x2FA1F)
}

/// Control and format characters other than tab / newline / carriage return.
pub fn is_control(c: char) -> bool {
    if matches!(c, '\t' | '\n' | '\r') {
        return false;
    }
    use GeneralCategory::*;
    matches!(get_general_category(c), Control | Format)
}

pub fn is_nonspacing_mark(c: char) -> bool {
    get_general_category(c) == GeneralCategory::NonspacingMark
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes() {
        assert!(is_bert_punctuation('$') && !is_unicode_punctuation('$'));
        assert!(is_unicode_punctuation('«') && is_unicode_punctuation('-'));
        assert!(!is_bert_punctuation('a') && !is_bert_punctuation('é'));
        assert!(is_cjk('北') && !is_cjk('ア'));
        assert!(is_control('\u{200B}'));
        assert!(is_control('\u{0007}') && !is_control('\t'));
        assert!(is_nonspacing_mark('\u{0301}'));
    }
}
