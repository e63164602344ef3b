//! Continuous canonical arrangements: the permutation obtained by an
//! in-order traversal of a tree, its application to sentences and trees,
//! and the inverse that restores the original order exactly.

use thiserror::Error;

use crate::treebank::{Child, ConstTree, NodeId, Sentence, TreeError};

#[derive(Debug, Error)]
pub enum ReorderError {
    #[error("permutation of length {perm} applied to {target} tokens")]
    LengthMismatch { perm: usize, target: usize },
    #[error("map is not a bijection: value {0} appears more than once or out of range")]
    NotBijective(usize),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("sidecar line {line}: {msg}")]
    Sidecar { line: usize, msg: String },
}

/// A bijection on `{0..n-1}`; `map[i]` is the arranged position of the
/// token originally at `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self, ReorderError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &j in &map {
            if j >= n || seen[j] {
                return Err(ReorderError::NotBijective(j));
            }
            seen[j] = true;
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// The inverse bijection: `invert().map()[self.map()[i]] == i`.
    pub fn invert(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { map: inv }
    }

    /// Flags each token whose arranged position differs from its original
    /// position.
    pub fn relocated_mask(&self) -> RelocationMask {
        RelocationMask {
            relocated: self.map.iter().enumerate().map(|(i, &j)| i != j).collect(),
        }
    }
}

/// Per-token flags marking tokens involved in a discontinuity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelocationMask {
    relocated: Vec<bool>,
}

impl RelocationMask {
    pub fn new(relocated: Vec<bool>) -> Self {
        RelocationMask { relocated }
    }

    pub fn flags(&self) -> &[bool] {
        &self.relocated
    }

    pub fn count(&self) -> usize {
        self.relocated.iter().filter(|&&b| b).count()
    }
}

/// The permutation that makes `tree` continuous: tokens are ranked by the
/// order an in-order traversal emits them, where each node's children are
/// visited ascending by the minimum of their yields.
///
/// Continuous trees yield the identity.
pub fn cca_permutation(tree: &ConstTree) -> Permutation {
    let mut emitted = Vec::with_capacity(tree.n());
    emit(tree, tree.root(), &mut emitted);
    let mut map = vec![0; tree.n()];
    for (rank, &pos) in emitted.iter().enumerate() {
        map[pos] = rank;
    }
    Permutation { map }
}

fn emit(tree: &ConstTree, id: NodeId, out: &mut Vec<usize>) {
    // Children are stored in canonical min-yield order; sibling minima are
    // distinct, so this order is total.
    for child in tree.node(id).expect("valid id").children() {
        match *child {
            Child::Leaf(pos) => out.push(pos),
            Child::Node(c) => emit(tree, c, out),
        }
    }
}

/// Moves each token at `i` to position `p.map()[i]`.
pub fn permute_sentence(sentence: &Sentence, p: &Permutation) -> Result<Sentence, ReorderError> {
    if p.n() != sentence.n() {
        return Err(ReorderError::LengthMismatch {
            perm: p.n(),
            target: sentence.n(),
        });
    }
    let mut slots: Vec<Option<_>> = vec![None; sentence.n()];
    for (i, token) in sentence.tokens().iter().enumerate() {
        slots[p.map[i]] = Some(token.clone());
    }
    Ok(Sentence::new(slots.into_iter().map(|t| t.expect("bijection")).collect())?)
}

/// Replaces every terminal position `i` by `p.map()[i]` and permutes the
/// sentence to match; structure and labels are untouched.
pub fn permute_tree(tree: &ConstTree, p: &Permutation) -> Result<ConstTree, ReorderError> {
    if p.n() != tree.n() {
        return Err(ReorderError::LengthMismatch {
            perm: p.n(),
            target: tree.n(),
        });
    }
    let sentence = permute_sentence(tree.sentence(), p)?;
    Ok(tree.map_terminals(p.map(), sentence)?)
}

/// Undoes `permute_tree(_, p)`: `restore_discontinuous(permute_tree(t, p), p)`
/// reproduces `t` exactly.
pub fn restore_discontinuous(
    cont_tree: &ConstTree,
    p: &Permutation,
) -> Result<ConstTree, ReorderError> {
    permute_tree(cont_tree, &p.invert())
}

/// Sidecar serialization: one line per sentence,
/// `sentence_id TAB j_0 j_1 ... j_{n-1}` with `j_i = map[i]`.
pub fn write_sidecar(entries: &[(String, Permutation)]) -> String {
    let mut out = String::new();
    for (id, p) in entries {
        out.push_str(id);
        out.push('\t');
        let joined: Vec<String> = p.map().iter().map(|j| j.to_string()).collect();
        out.push_str(&joined.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_sidecar(text: &str) -> Result<Vec<(String, Permutation)>, ReorderError> {
    let mut out = Vec::new();
    for (lineno0, line) in text.lines().enumerate() {
        let line_err = |msg: String| ReorderError::Sidecar {
            line: lineno0 + 1,
            msg,
        };
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| line_err("expected TAB after sentence id".into()))?;
        let map = rest
            .split_whitespace()
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| line_err(format!("bad position {v:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let perm = Permutation::new(map)
            .map_err(|e| line_err(e.to_string()))?;
        out.push((id.to_string(), perm));
    }
    Ok(out)
}
