//! Vocabulary matching for free-form captions.

use std::collections::BTreeMap;

/// Default synonym table mapping surface words to object categories.
pub fn default_synonyms() -> BTreeMap<String, String> {
    [
        ("sofa", "couch"),
        ("settee", "couch"),
        ("television", "tv"),
        ("tv monitor", "tv"),
        ("fridge", "refrigerator"),
        ("plant", "potted plant"),
        ("houseplant", "potted plant"),
        ("bookcase", "bookshelf"),
        ("shelf", "bookshelf"),
        ("dining table", "table"),
        ("desk", "table"),
        ("cupboard", "cabinet"),
        ("dresser", "cabinet"),
        ("stove", "oven"),
        ("basin", "sink"),
        ("washbasin", "sink"),
        ("armchair", "chair"),
        ("stool", "chair"),
        ("toilet seat", "toilet"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

/// Matches lowercase alphabetic tokens against the vocabulary and the
/// synonym table, trying the bigram starting at each token before the
/// single token. Order of occurrence is kept and so are duplicates.
pub fn extract_nouns(text: &str, vocabulary: &[String], synonyms: &BTreeMap<String, String>) -> Vec<String> {
    let lower = text.to_lowercase();
    let tokens: Vec<&str> = lower.split(|ch: char| !ch.is_alphabetic()).filter(|t| !t.is_empty()).collect();
    let lookup = |phrase: &str| -> Option<String> {
        if vocabulary.iter().any(|v| v == phrase) {
            Some(phrase.to_string())
        } else {
            synonyms.get(phrase).cloned()
        }
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() {
            if let Some(hit) = lookup(&format!("{} {}", tokens[i], tokens[i + 1])) {
                out.push(hit);
                i += 2;
                continue;
            }
        }
        if let Some(hit) = lookup(tokens[i]) {
            out.push(hit);
        }
        i += 1;
    }
    out
}
