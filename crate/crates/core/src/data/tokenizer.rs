use std::collections::{BTreeMap, HashMap};

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::encoder::{NUM_SPECIAL, UNK_ID};
use crate::{Error, Result};

/// Compatibility decomposition, diacritics stripped, lowercased.
pub fn normalize(text: &str) -> String {
    text.nfkd().filter(|c| !is_combining_mark(*c)).flat_map(char::to_lowercase).collect()
}

/// Normalised words: maximal runs of alphanumeric characters.
pub fn words(text: &str) -> Vec<String> {
    normalize(text)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Word-to-id map. Ids `0..NUM_SPECIAL` are reserved; word `i` of
/// [`Vocabulary::words`] has id `NUM_SPECIAL + i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `vocab_size - NUM_SPECIAL` most frequent words, ties
    /// broken alphabetically.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, vocab_size: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for w in words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(vocab_size.saturating_sub(NUM_SPECIAL));
        Self::from_words(ranked.into_iter().map(|(w, _)| w).collect()).expect("unique words")
    }

    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), NUM_SPECIAL + i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Vocabulary { words, index })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Total id count, special tokens included.
    pub fn len(&self) -> usize {
        NUM_SPECIAL + self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        words(text).iter().map(|w| self.id(w)).collect()
    }
}
