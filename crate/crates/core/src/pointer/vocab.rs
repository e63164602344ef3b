//! Word and character vocabularies with padding/unknown entries and the
//! frequency table behind unknown-word replacement.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::treebank::Sentence;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

#[derive(Debug, Clone)]
pub struct Vocab {
    words: Vec<String>,
    word_freq: Vec<usize>,
    word_ids: HashMap<String, usize>,
    chars: Vec<char>,
    char_ids: HashMap<char, usize>,
}

/// Serializable payload; the lookup maps are rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabData {
    pub words: Vec<String>,
    pub word_freq: Vec<usize>,
    pub chars: Vec<char>,
}

impl Vocab {
    /// Builds vocabularies from training sentences. Ids are assigned by
    /// descending frequency (ties lexicographic), after the reserved
    /// padding and unknown entries.
    pub fn build<'a>(sentences: impl Iterator<Item = &'a Sentence>) -> Vocab {
        let mut word_counts: HashMap<String, usize> = HashMap::new();
        let mut char_counts: HashMap<char, usize> = HashMap::new();
        for sentence in sentences {
            for token in sentence.tokens() {
                *word_counts.entry(token.form().to_string()).or_insert(0) += 1;
                for c in token.form().chars() {
                    *char_counts.entry(c).or_insert(0) += 1;
                }
            }
        }
        let mut word_list: Vec<(String, usize)> = word_counts.into_iter().collect();
        word_list.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut char_list: Vec<(char, usize)> = char_counts.into_iter().collect();
        char_list.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut words = vec!["<pad>".to_string(), "<unk>".to_string()];
        let mut word_freq = vec![0usize, 0];
        for (w, c) in word_list {
            words.push(w);
            word_freq.push(c);
        }
        let mut chars = vec!['\u{0}', '\u{1}'];
        chars.extend(char_list.into_iter().map(|(c, _)| c));
        Vocab::from_parts(words, word_freq, chars)
    }

    fn from_parts(words: Vec<String>, word_freq: Vec<usize>, chars: Vec<char>) -> Vocab {
        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let char_ids = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Vocab {
            words,
            word_freq,
            word_ids,
            chars,
            char_ids,
        }
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.word_ids.get(form).copied().unwrap_or(UNK_ID)
    }

    pub fn char_ids(&self, form: &str) -> Vec<usize> {
        form.chars()
            .map(|c| self.char_ids.get(&c).copied().unwrap_or(UNK_ID))
            .collect()
    }

    /// Training-corpus frequency of the word behind `id` (0 for the
    /// reserved entries).
    pub fn freq(&self, id: usize) -> usize {
        self.word_freq.get(id).copied().unwrap_or(0)
    }

    pub fn to_data(&self) -> VocabData {
        VocabData {
            words: self.words.clone(),
            word_freq: self.word_freq.clone(),
            chars: self.chars.clone(),
        }
    }

    pub fn from_data(data: VocabData) -> Vocab {
        Vocab::from_parts(data.words, data.word_freq, data.chars)
    }
}
