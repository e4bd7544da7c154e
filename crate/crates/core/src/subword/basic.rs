use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::chars::{is_bert_punctuation, is_cjk, is_control, is_nonspacing_mark};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawBasicTokenConfig")]
pub struct BasicTokenConfig {
    pub lowercase: bool,
    /// Defaults to the value of `lowercase` when read from config.
    pub strip_accents: bool,
    pub split_cjk: bool,
}

impl Default for BasicTokenConfig {
    fn default() -> Self {
        BasicTokenConfig {
            lowercase: false,
            strip_accents: false,
            split_cjk: true,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBasicTokenConfig {
    #[serde(default)]
    lowercase: bool,
    strip_accents: Option<bool>,
    #[serde(default = "yes")]
    split_cjk: bool,
}

fn yes() -> bool {
    true
}

impl From<RawBasicTokenConfig> for BasicTokenConfig {
    fn from(raw: RawBasicTokenConfig) -> Self {
        BasicTokenConfig {
            lowercase: raw.lowercase,
            strip_accents: raw.strip_accents.unwrap_or(raw.lowercase),
            split_cjk: raw.split_cjk,
        }
    }
}

fn strip_accents(word: &str) -> String {
    word.nfd().filter(|&c| !is_nonspacing_mark(c)).collect()
}

/// BERT basic tokenization: cleanup, CJK isolation, whitespace split,
/// optional case folding and accent stripping, punctuation split.
pub fn basic_tokenize(text: &str, cfg: &BasicTokenConfig) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '\0' || c == '\u{FFFD}' || is_control(c) {
            continue;
        }
        if cfg.split_cjk && is_cjk(c) {
            cleaned.push(' ');
            cleaned.push(c);
            cleaned.push(' ');
        } else if c.is_whitespace() {
            cleaned.push(' ');
        } else {
            cleaned.push(c);
        }
    }

    let mut tokens = Vec::new();
    for word in cleaned.split_whitespace() {
        let mut word = if cfg.lowercase { word.to_lowercase() } else { word.to_string() };
        if cfg.strip_accents {
            word = strip_accents(&word);
        }
        let mut current = String::new();
        for c in word.chars() {
            if is_bert_punctuation(c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accent_stripping_follows_lowercase_in_config() {
        let cfg: BasicTokenConfig = toml::from_str("lowercase = true").unwrap();
        assert!(cfg.strip_accents && cfg.split_cjk);
        let cfg: BasicTokenConfig = toml::from_str("lowercase = true\nstrip_accents = false").unwrap();
        assert!(!cfg.strip_accents);
        assert_eq!(toml::from_str::<BasicTokenConfig>("").unwrap(), BasicTokenConfig::default());
    }

    #[test]
    fn cased_punctuation_split() {
        assert_eq!(
            basic_tokenize("Hello, world!", &BasicTokenConfig::default()),
            vec!["Hello", ",", "world", "!"]
        );
    }

    #[test]
    fn accents_stripped_without_lowercasing() {
        let cfg = BasicTokenConfig {
            strip_accents: true,
            ..Default::default()
        };
        assert_eq!(basic_tokenize("Héllo", &cfg), vec!["Hello"]);
    }

    #[test]
    fn cjk_split() {
        assert_eq!(
            basic_tokenize("am 北京 pm", &BasicTokenConfig::default()),
            vec!["am", "北", "京", "pm"]
        );
        assert_eq!(basic_tokenize("x北京y", &BasicTokenConfig::default()), vec!["x", "北", "京", "y"]);
        let off = BasicTokenConfig {
            split_cjk: false,
            ..Default::default()
        };
        assert_eq!(basic_tokenize("x北京y", &off), vec!["x北京y"]);
    }

    #[test]
    fn controls_and_whitespace() {
        let cfg = BasicTokenConfig {
            lowercase: true,
            strip_accents: true,
            split_cjk: true,
        };
        assert_eq!(basic_tokenize("  A\u{0007}b\t\nÜBER\u{00A0}x ", &cfg), vec!["ab", "uber", "x"]);
    }
}
