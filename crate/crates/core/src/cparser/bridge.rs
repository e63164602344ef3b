//! File contracts for driving an external continuous parser: plain token
//! lines out, one bracket tree per line back in, aligned by line number.

use crate::treebank::{read_corpus, Corpus, Format, Sentence};

use super::CparserError;

/// One space-separated token line per sentence, in order.
pub fn bridge_write(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        let forms: Vec<&str> = sentence.forms().collect();
        out.push_str(&forms.join(" "));
        out.push('\n');
    }
    out
}

/// Ingests bracket trees produced by an external parser over the sentences
/// previously written with [`bridge_write`], attaching the given ids by
/// position.
pub fn bridge_read(
    text: &str,
    expected: &[(String, Sentence)],
) -> Result<Corpus, CparserError> {
    let parsed = read_corpus(text, Format::Bracket).map_err(|e| CparserError::Bridge {
        line: 0,
        msg: e.to_string(),
    })?;
    if parsed.len() != expected.len() {
        return Err(CparserError::Bridge {
            line: 0,
            msg: format!(
                "{} trees for {} sentences",
                parsed.len(),
                expected.len()
            ),
        });
    }
    let mut entries = Vec::with_capacity(expected.len());
    for (line0, ((_, tree), (id, sentence))) in
        parsed.iter().zip(expected.iter()).enumerate()
    {
        let line = line0 + 1;
        if tree.n() != sentence.n() {
            return Err(CparserError::Bridge {
                line,
                msg: format!(
                    "tree has {} terminals, sentence has {} tokens",
                    tree.n(),
                    sentence.n()
                ),
            });
        }
        if !tree.sentence().same_forms(sentence) {
            return Err(CparserError::Bridge {
                line,
                msg: "tree terminals do not match the sentence tokens".into(),
            });
        }
        entries.push((id.clone(), tree.clone()));
    }
    Corpus::new(entries).map_err(|e| CparserError::Bridge {
        line: 0,
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_emits_token_lines() {
        let s = Sentence::from_forms(&["A", "C", "B", "D"]).unwrap();
        assert_eq!(bridge_write(&[s]), "A C B D\n");
    }

    #[test]
    fn read_attaches_ids_by_position() {
        let s = Sentence::from_forms(&["A", "C", "B", "D"]).unwrap();
        let corpus =
            bridge_read("(S (VP A C) (NP B) D)\n", &[("s1".into(), s)]).unwrap();
        assert_eq!(corpus.entries()[0].0, "s1");
        let tree = &corpus.entries()[0].1;
        assert!(tree.is_continuous());
        assert_eq!(tree.n(), 4);
    }

    #[test]
    fn line_count_mismatch_rejected() {
        let s1 = Sentence::from_forms(&["a"]).unwrap();
        let s2 = Sentence::from_forms(&["b"]).unwrap();
        let s3 = Sentence::from_forms(&["c"]).unwrap();
        let expected = vec![
            ("1".to_string(), s1),
            ("2".to_string(), s2),
            ("3".to_string(), s3),
        ];
        assert!(matches!(
            bridge_read("(S a)\n(S b)\n", &expected),
            Err(CparserError::Bridge { .. })
        ));
    }

    #[test]
    fn token_count_mismatch_names_line() {
        let s1 = Sentence::from_forms(&["a"]).unwrap();
        let s2 = Sentence::from_forms(&["b", "c"]).unwrap();
        let expected = vec![("1".to_string(), s1), ("2".to_string(), s2)];
        match bridge_read("(S a)\n(S b)\n", &expected) {
            Err(CparserError::Bridge { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected bridge error, got {other:?}"),
        }
    }
}
