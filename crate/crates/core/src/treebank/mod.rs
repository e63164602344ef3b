//! Treebank IO: parse, validate, and serialize constituent trees in the
//! three interchange formats of the pipeline.
//!
//! * `export` — line-oriented records between `#BOS`/`#EOS` sentinels.
//! * `discbracket` — one s-expression per line, terminals `INDEX=FORM`.
//! * `bracket` — one s-expression per line, bare terminal forms, continuous
//!   trees only.

mod export;
mod sexpr;
mod tree;

pub use sexpr::{escape_form, unescape_form};
pub use tree::{Child, ConstTree, Node, NodeId, Sentence, Token, TreeBuilder, TreeError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("sentence {sentence_id:?}, line {line}: {msg}")]
    Parse {
        sentence_id: String,
        line: usize,
        msg: String,
    },
    #[error("sentence {sentence_id:?}: {msg}")]
    Structure { sentence_id: String, msg: String },
    #[error("sentence {sentence_id:?}: {msg}")]
    NotContinuous { sentence_id: String, msg: String },
    #[error("duplicate sentence id {0:?}")]
    DuplicateSentenceId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Export,
    Discbracket,
    Bracket,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "export" => Ok(Format::Export),
            "discbracket" => Ok(Format::Discbracket),
            "bracket" => Ok(Format::Bracket),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// Controls for the export reader.
#[derive(Debug, Clone)]
pub struct ReadOptions {
    /// Wrap each tagged terminal in a preterminal node labeled by its tag.
    /// By default tags live only on [`Token::pos`] and never enter the tree.
    pub tags_as_nodes: bool,
    /// Label of the synthesized top node that adopts all parent-0 records.
    pub virtual_root_label: String,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            tags_as_nodes: false,
            virtual_root_label: "VROOT".to_string(),
        }
    }
}

/// An ordered collection of (sentence id, tree) pairs with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    entries: Vec<(String, ConstTree)>,
}

impl Corpus {
    pub fn new(entries: Vec<(String, ConstTree)>) -> Result<Self, TreebankError> {
        let mut seen = std::collections::HashSet::new();
        for (id, _) in &entries {
            if !seen.insert(id.clone()) {
                return Err(TreebankError::DuplicateSentenceId(id.clone()));
            }
        }
        Ok(Corpus { entries })
    }

    pub fn entries(&self) -> &[(String, ConstTree)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ConstTree)> {
        self.entries.iter().map(|(id, t)| (id.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ConstTree> {
        self.entries.iter().find(|(i, _)| i == id).map(|(_, t)| t)
    }

    /// Pairwise structural equality, including sentence ids.
    pub fn same_structure(&self, other: &Corpus) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((ia, ta), (ib, tb))| ia == ib && ta.same_structure(tb))
    }

    /// Pairwise equality including all token and node annotations.
    pub fn same_with_annotations(&self, other: &Corpus) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((ia, ta), (ib, tb))| ia == ib && ta.same_with_annotations(tb))
    }
}

pub fn read_corpus(text: &str, format: Format) -> Result<Corpus, TreebankError> {
    read_corpus_with(text, format, &ReadOptions::default())
}

pub fn read_corpus_with(
    text: &str,
    format: Format,
    opts: &ReadOptions,
) -> Result<Corpus, TreebankError> {
    match format {
        Format::Export => {
            let blocks = export::split_blocks(text)?;
            let mut entries = Vec::with_capacity(blocks.len());
            for block in &blocks {
                entries.push((block.id.clone(), export::block_to_tree(block, opts)?));
            }
            Corpus::new(entries)
        }
        Format::Discbracket | Format::Bracket => {
            let style = terminal_style(format);
            let mut entries = Vec::new();
            for (lineno0, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let id = (entries.len() + 1).to_string();
                let tree = sexpr::parse_line(line, style).map_err(|e| TreebankError::Parse {
                    sentence_id: id.clone(),
                    line: lineno0 + 1,
                    msg: e.msg,
                })?;
                entries.push((id, tree));
            }
            Corpus::new(entries)
        }
    }
}

pub fn write_corpus(corpus: &Corpus, format: Format) -> Result<String, TreebankError> {
    write_corpus_with(corpus, format, &ReadOptions::default())
}

pub fn write_corpus_with(
    corpus: &Corpus,
    format: Format,
    opts: &ReadOptions,
) -> Result<String, TreebankError> {
    let mut out = String::new();
    match format {
        Format::Export => {
            for (id, tree) in corpus.iter() {
                export::write_block(id, tree, &opts.virtual_root_label, &mut out);
            }
        }
        Format::Discbracket | Format::Bracket => {
            let style = terminal_style(format);
            for (id, tree) in corpus.iter() {
                let line = sexpr::write_line(tree, style).map_err(|e| {
                    TreebankError::NotContinuous {
                        sentence_id: id.to_string(),
                        msg: e.msg,
                    }
                })?;
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn terminal_style(format: Format) -> sexpr::TerminalStyle {
    match format {
        Format::Discbracket => sexpr::TerminalStyle::Indexed,
        Format::Bracket => sexpr::TerminalStyle::Bare,
        Format::Export => unreachable!("export is not a bracketed format"),
    }
}
