//! Treebank PCFG: maximum-likelihood rule probabilities over trees that
//! were unary-collapsed, terminal-wrapped, and right-binarized with
//! horizontal markovization of order 1.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::treebank::{Child, ConstTree, Corpus, NodeId, Sentence, TreeBuilder};

use super::CparserError;

/// Separator for collapsed unary chains (`S+VP`).
pub(super) const UNARY_SEP: char = '+';
/// Marker introduced by binarization (`S|<NP>`).
pub(super) const MARKOV_MARK: char = '|';
/// Prefix of synthesized preterminals wrapping terminal children (`@word`).
pub(super) const WRAP_PREFIX: char = '@';

#[derive(Debug, Clone)]
pub struct InduceConfig {
    /// Words seen fewer times than this are pooled into shape signatures.
    pub rare_threshold: usize,
}

impl Default for InduceConfig {
    fn default() -> Self {
        InduceConfig { rare_threshold: 2 }
    }
}

/// Shape signature for rare and unknown words: capitalization, digits,
/// and a short suffix.
pub(super) fn signature(word: &str) -> String {
    let mut sig = String::from("UNK");
    if word.chars().next().is_some_and(|c| c.is_uppercase()) {
        sig.push_str("-C");
    }
    if word.chars().any(|c| c.is_ascii_digit()) {
        sig.push_str("-D");
    }
    if word.contains('-') {
        sig.push_str("-H");
    }
    let suffix: String = word
        .chars()
        .rev()
        .take(2)
        .filter(|c| c.is_alphabetic())
        .flat_map(|c| c.to_lowercase())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if !suffix.is_empty() {
        sig.push('-');
        sig.push_str(&suffix);
    }
    sig
}

pub(super) type SymId = usize;

#[derive(Debug, Clone, Copy)]
pub(super) struct BinaryRule {
    pub lhs: SymId,
    pub left: SymId,
    pub right: SymId,
    pub logp: f64,
}

/// A binarized PCFG with lexical back-off by word-shape signature.
#[derive(Debug, Clone)]
pub struct Grammar {
    labels: Vec<String>,
    label_ids: HashMap<String, SymId>,
    binary: Vec<BinaryRule>,
    /// Binary rules indexed by their left child.
    by_left: Vec<Vec<(SymId, SymId, f64)>>, // (right, lhs, logp)
    lexical: HashMap<String, Vec<(SymId, f64)>>,
    root_dist: Vec<(SymId, f64)>,
    rare_threshold: usize,
}

impl Grammar {
    pub(super) fn label(&self, id: SymId) -> &str {
        &self.labels[id]
    }

    pub(super) fn n_symbols(&self) -> usize {
        self.labels.len()
    }

    pub(super) fn rules_with_left(&self, left: SymId) -> &[(SymId, SymId, f64)] {
        &self.by_left[left]
    }

    pub(super) fn root_dist(&self) -> &[(SymId, f64)] {
        &self.root_dist
    }

    /// The most probable root label; used for fallback trees.
    pub fn default_root_label(&self) -> &str {
        let best = self
            .root_dist
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("grammar has at least one root");
        &self.labels[best.0]
    }

    /// The effective lexical key for a word: the word itself when known,
    /// otherwise its shape signature.
    pub(super) fn effective(&self, word: &str) -> String {
        if self.lexical.contains_key(word) {
            word.to_string()
        } else {
            signature(word)
        }
    }

    pub(super) fn lexical_entries(&self, eff_word: &str) -> &[(SymId, f64)] {
        self.lexical.get(eff_word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn binary_rules(&self) -> impl Iterator<Item = (&str, &str, &str, f64)> {
        self.binary.iter().map(move |r| {
            (
                self.labels[r.lhs].as_str(),
                self.labels[r.left].as_str(),
                self.labels[r.right].as_str(),
                r.logp,
            )
        })
    }

    pub fn lexical_rules(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        let mut keys: Vec<&String> = self.lexical.keys().collect();
        keys.sort();
        keys.into_iter().flat_map(move |w| {
            self.lexical[w]
                .iter()
                .map(move |&(lhs, logp)| (self.labels[lhs].as_str(), w.as_str(), logp))
        })
    }

    pub fn root_rules(&self) -> impl Iterator<Item = (&str, f64)> {
        self.root_dist
            .iter()
            .map(move |&(s, logp)| (self.labels[s].as_str(), logp))
    }

    /// Per-LHS probability mass; each must be 1 within `tol`.
    pub fn check_normalization(&self, tol: f64) -> Result<(), CparserError> {
        let mut mass: BTreeMap<SymId, f64> = BTreeMap::new();
        for r in &self.binary {
            *mass.entry(r.lhs).or_insert(0.0) += r.logp.exp();
        }
        for entries in self.lexical.values() {
            for &(lhs, logp) in entries {
                *mass.entry(lhs).or_insert(0.0) += logp.exp();
            }
        }
        for (&lhs, &m) in &mass {
            if (m - 1.0).abs() > tol {
                return Err(CparserError::Normalization {
                    label: self.labels[lhs].clone(),
                    mass: m,
                });
            }
        }
        let root_mass: f64 = self.root_dist.iter().map(|&(_, lp)| lp.exp()).sum();
        if (root_mass - 1.0).abs() > tol {
            return Err(CparserError::Normalization {
                label: "<root>".into(),
                mass: root_mass,
            });
        }
        Ok(())
    }

    /// Builds a grammar from explicit rules; probabilities must already be
    /// normalized per left-hand side.
    pub fn from_rules(
        root: &[(&str, f64)],
        binary: &[(&str, &str, &str, f64)],
        lexical: &[(&str, &str, f64)],
        rare_threshold: usize,
    ) -> Result<Grammar, CparserError> {
        let mut g = Grammar {
            labels: Vec::new(),
            label_ids: HashMap::new(),
            binary: Vec::new(),
            by_left: Vec::new(),
            lexical: HashMap::new(),
            root_dist: Vec::new(),
            rare_threshold,
        };
        for &(label, p) in root {
            let id = g.intern(label);
            g.root_dist.push((id, p.ln()));
        }
        if g.root_dist.is_empty() {
            return Err(CparserError::EmptyCorpus);
        }
        for &(lhs, left, right, p) in binary {
            let rule = BinaryRule {
                lhs: g.intern(lhs),
                left: g.intern(left),
                right: g.intern(right),
                logp: p.ln(),
            };
            g.binary.push(rule);
        }
        for &(lhs, word, p) in lexical {
            let id = g.intern(lhs);
            g.lexical
                .entry(word.to_string())
                .or_default()
                .push((id, p.ln()));
        }
        g.rebuild_index();
        g.check_normalization(1e-9)?;
        Ok(g)
    }

    fn intern(&mut self, label: &str) -> SymId {
        if let Some(&id) = self.label_ids.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_string());
        self.label_ids.insert(label.to_string(), id);
        id
    }

    fn rebuild_index(&mut self) {
        self.by_left = vec![Vec::new(); self.labels.len()];
        for r in &self.binary {
            self.by_left[r.left].push((r.right, r.lhs, r.logp));
        }
    }

    /// Rule lines `LHS -> RHS1 [RHS2] logprob` plus `root LABEL logprob`
    /// header lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (label, logp) in self.root_rules() {
            out.push_str(&format!("root {label} {logp:.17e}\n"));
        }
        let mut rules: Vec<String> = self
            .binary_rules()
            .map(|(lhs, l, r, lp)| format!("{lhs} -> {l} {r} {lp:.17e}"))
            .collect();
        rules.sort();
        for r in &rules {
            out.push_str(r);
            out.push('\n');
        }
        for (lhs, word, lp) in self.lexical_rules() {
            out.push_str(&format!("{lhs} -> {word} {lp:.17e}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Grammar, CparserError> {
        let mut g = Grammar {
            labels: Vec::new(),
            label_ids: HashMap::new(),
            binary: Vec::new(),
            by_left: Vec::new(),
            lexical: HashMap::new(),
            root_dist: Vec::new(),
            rare_threshold: InduceConfig::default().rare_threshold,
        };
        for (lineno0, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: &str| CparserError::GrammarText {
                line: lineno0 + 1,
                msg: msg.to_string(),
            };
            match fields.as_slice() {
                ["root", label, logp] => {
                    let lp: f64 = logp.parse().map_err(|_| err("bad log-probability"))?;
                    let id = g.intern(label);
                    g.root_dist.push((id, lp));
                }
                [lhs, "->", rhs1, logp] => {
                    let lp: f64 = logp.parse().map_err(|_| err("bad log-probability"))?;
                    let id = g.intern(lhs);
                    g.lexical
                        .entry(rhs1.to_string())
                        .or_default()
                        .push((id, lp));
                }
                [lhs, "->", rhs1, rhs2, logp] => {
                    let lp: f64 = logp.parse().map_err(|_| err("bad log-probability"))?;
                    let rule = BinaryRule {
                        lhs: g.intern(lhs),
                        left: g.intern(rhs1),
                        right: g.intern(rhs2),
                        logp: lp,
                    };
                    g.binary.push(rule);
                }
                _ => return Err(err("expected `root L p`, `L -> R p`, or `L -> R1 R2 p`")),
            }
        }
        if g.root_dist.is_empty() {
            return Err(CparserError::EmptyCorpus);
        }
        g.rebuild_index();
        Ok(g)
    }
}

/// Symbol tree used between [`ConstTree`] and the binarized grammar.
#[derive(Debug, Clone, PartialEq)]
pub(super) enum STree {
    Node { label: String, children: Vec<STree> },
    Leaf { pos: usize },
}

pub(super) fn to_stree(tree: &ConstTree, id: NodeId) -> STree {
    let node = tree.node(id).expect("valid id");
    STree::Node {
        label: node.label().to_string(),
        children: node
            .children()
            .iter()
            .map(|c| match *c {
                Child::Leaf(pos) => STree::Leaf { pos },
                Child::Node(n) => to_stree(tree, n),
            })
            .collect(),
    }
}

pub(super) fn stree_to_tree(
    stree: &STree,
    sentence: Sentence,
) -> Result<ConstTree, crate::treebank::TreeError> {
    let mut builder = TreeBuilder::new();
    fn go(
        builder: &mut TreeBuilder,
        stree: &STree,
    ) -> Result<NodeId, crate::treebank::TreeError> {
        match stree {
            STree::Node { label, children } => {
                let id = builder.node(label.as_str())?;
                for child in children {
                    match child {
                        STree::Leaf { pos } => builder.child_leaf(id, *pos),
                        node => {
                            let c = go(builder, node)?;
                            builder.child_node(id, c);
                        }
                    }
                }
                Ok(id)
            }
            STree::Leaf { .. } => unreachable!("root is always a node"),
        }
    }
    let root = go(&mut builder, stree)?;
    builder.build(root, sentence)
}

/// Collapse unary chains of internal nodes into `A+B` composite labels.
pub(super) fn collapse_unaries(t: STree) -> STree {
    match t {
        STree::Node { label, children } => {
            let mut children: Vec<STree> =
                children.into_iter().map(collapse_unaries).collect();
            if children.len() == 1 {
                match children.remove(0) {
                    STree::Node { label: clabel, children: grand } => {
                        return STree::Node {
                            label: format!("{label}{UNARY_SEP}{clabel}"),
                            children: grand,
                        };
                    }
                    leaf => children.push(leaf),
                }
            }
            STree::Node { label, children }
        }
        leaf => leaf,
    }
}

/// Splits composite `A+B` labels back into unary chains.
pub(super) fn expand_unaries(t: STree) -> STree {
    match t {
        STree::Node { label, children } => {
            let children: Vec<STree> = children.into_iter().map(expand_unaries).collect();
            let mut parts = label.split(UNARY_SEP).rev();
            let innermost = parts.next().expect("split is non-empty");
            let mut node = STree::Node {
                label: innermost.to_string(),
                children,
            };
            for part in parts {
                node = STree::Node {
                    label: part.to_string(),
                    children: vec![node],
                };
            }
            node
        }
        leaf => leaf,
    }
}

/// Wraps terminal children of multi-child nodes in `@word` preterminals so
/// that binary rules range over symbols only.
pub(super) fn wrap_terminals(t: STree, eff: &dyn Fn(usize) -> String) -> STree {
    match t {
        STree::Node { label, children } => {
            let many = children.len() > 1;
            let children = children
                .into_iter()
                .map(|c| match c {
                    STree::Leaf { pos } if many => STree::Node {
                        label: format!("{WRAP_PREFIX}{}", eff(pos)),
                        children: vec![STree::Leaf { pos }],
                    },
                    other => wrap_terminals(other, eff),
                })
                .collect();
            STree::Node { label, children }
        }
        leaf => leaf,
    }
}

pub(super) fn unwrap_terminals(t: STree) -> STree {
    match t {
        STree::Node { label, children } => {
            if label.starts_with(WRAP_PREFIX) && children.len() == 1 {
                if let STree::Leaf { pos } = children[0] {
                    return STree::Leaf { pos };
                }
            }
            STree::Node {
                label,
                children: children.into_iter().map(unwrap_terminals).collect(),
            }
        }
        leaf => leaf,
    }
}

fn stree_label(t: &STree) -> &str {
    match t {
        STree::Node { label, .. } => label,
        STree::Leaf { .. } => unreachable!("leaves are wrapped before binarization"),
    }
}

/// Right-branching binarization; the intermediate symbol keeps one symbol
/// of lookahead (`A|<next>`).
pub(super) fn binarize(t: STree) -> STree {
    match t {
        STree::Node { label, children } => {
            let children: Vec<STree> = children.into_iter().map(binarize).collect();
            if children.len() <= 2 {
                return STree::Node { label, children };
            }
            binarize_tail(&label, children)
        }
        leaf => leaf,
    }
}

fn binarize_tail(base: &str, mut children: Vec<STree>) -> STree {
    if children.len() == 2 {
        return STree::Node {
            label: base.to_string(),
            children,
        };
    }
    let first = children.remove(0);
    let next_label = stree_label(&children[0]).to_string();
    let tail = binarize_tail_inner(base, &next_label, children);
    STree::Node {
        label: base.to_string(),
        children: vec![first, tail],
    }
}

fn binarize_tail_inner(base: &str, marker: &str, mut children: Vec<STree>) -> STree {
    let label = format!("{base}{MARKOV_MARK}<{marker}>");
    if children.len() == 2 {
        return STree::Node { label, children };
    }
    let first = children.remove(0);
    let next_label = stree_label(&children[0]).to_string();
    let tail = binarize_tail_inner(base, &next_label, children);
    STree::Node {
        label,
        children: vec![first, tail],
    }
}

/// Splices out binarization markers, restoring n-ary nodes.
pub(super) fn debinarize(t: STree) -> STree {
    match t {
        STree::Node { label, children } => {
            let mut flat = Vec::new();
            for child in children {
                let child = debinarize(child);
                let is_marker =
                    matches!(&child, STree::Node { label, .. } if label.contains(MARKOV_MARK));
                match child {
                    STree::Node { children, .. } if is_marker => flat.extend(children),
                    other => flat.push(other),
                }
            }
            STree::Node { label, children: flat }
        }
        leaf => leaf,
    }
}

fn label_is_reserved(label: &str) -> bool {
    label.contains(MARKOV_MARK)
        || label.contains(UNARY_SEP)
        || label.starts_with(WRAP_PREFIX)
}

/// Full tree-to-grammar transform for one tree.
pub(super) fn transform(tree: &ConstTree, eff: &dyn Fn(usize) -> String) -> STree {
    let stree = to_stree(tree, tree.root());
    let stree = collapse_unaries(stree);
    let stree = wrap_terminals(stree, eff);
    binarize(stree)
}

/// Inverse of [`transform`] applied to a parser derivation.
pub(super) fn untransform(stree: STree) -> STree {
    let stree = debinarize(stree);
    let stree = unwrap_terminals(stree);
    expand_unaries(stree)
}

/// Maximum-likelihood grammar from a corpus of continuous trees.
pub fn induce_grammar(corpus: &Corpus, cfg: &InduceConfig) -> Result<Grammar, CparserError> {
    if corpus.is_empty() {
        return Err(CparserError::EmptyCorpus);
    }
    for (id, tree) in corpus.iter() {
        if !tree.is_continuous() {
            return Err(CparserError::DiscontinuousInput {
                sentence_id: id.to_string(),
            });
        }
        for nid in tree.node_ids() {
            let label = tree.node(nid).expect("listed id").label();
            if label_is_reserved(label) {
                return Err(CparserError::ReservedLabel {
                    sentence_id: id.to_string(),
                    label: label.to_string(),
                });
            }
        }
    }

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for (_, tree) in corpus.iter() {
        for token in tree.sentence().tokens() {
            *freq.entry(token.form()).or_insert(0) += 1;
        }
    }
    let rare: HashSet<String> = freq
        .iter()
        .filter(|&(_, &c)| c < cfg.rare_threshold)
        .map(|(&w, _)| w.to_string())
        .collect();

    let mut root_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut binary_counts: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    let mut lexical_counts: BTreeMap<(String, String), usize> = BTreeMap::new();

    for (_, tree) in corpus.iter() {
        let sentence = tree.sentence().clone();
        let eff = |pos: usize| -> String {
            let w = sentence.token(pos).form();
            if rare.contains(w) {
                signature(w)
            } else {
                w.to_string()
            }
        };
        let stree = transform(tree, &eff);
        *root_counts
            .entry(stree_label(&stree).to_string())
            .or_insert(0) += 1;
        count_rules(&stree, &eff, &mut binary_counts, &mut lexical_counts);
    }

    let mut lhs_totals: BTreeMap<String, usize> = BTreeMap::new();
    for ((lhs, _, _), c) in &binary_counts {
        *lhs_totals.entry(lhs.clone()).or_insert(0) += c;
    }
    for ((lhs, _), c) in &lexical_counts {
        *lhs_totals.entry(lhs.clone()).or_insert(0) += c;
    }

    let mut g = Grammar {
        labels: Vec::new(),
        label_ids: HashMap::new(),
        binary: Vec::new(),
        by_left: Vec::new(),
        lexical: HashMap::new(),
        root_dist: Vec::new(),
        rare_threshold: cfg.rare_threshold,
    };
    let n_trees = corpus.len() as f64;
    for (label, count) in &root_counts {
        let id = g.intern(label);
        g.root_dist.push((id, (*count as f64 / n_trees).ln()));
    }
    for ((lhs, left, right), count) in &binary_counts {
        let logp = (*count as f64 / lhs_totals[lhs] as f64).ln();
        let rule = BinaryRule {
            lhs: g.intern(lhs),
            left: g.intern(left),
            right: g.intern(right),
            logp,
        };
        g.binary.push(rule);
    }
    for ((lhs, word), count) in &lexical_counts {
        let logp = (*count as f64 / lhs_totals[lhs] as f64).ln();
        let id = g.intern(lhs);
        g.lexical.entry(word.clone()).or_default().push((id, logp));
    }
    g.rebuild_index();
    g.check_normalization(1e-9)?;
    Ok(g)
}

fn count_rules(
    t: &STree,
    eff: &dyn Fn(usize) -> String,
    binary_counts: &mut BTreeMap<(String, String, String), usize>,
    lexical_counts: &mut BTreeMap<(String, String), usize>,
) {
    if let STree::Node { label, children } = t {
        match children.as_slice() {
            [STree::Leaf { pos }] => {
                *lexical_counts
                    .entry((label.clone(), eff(*pos)))
                    .or_insert(0) += 1;
            }
            [a, b] => {
                *binary_counts
                    .entry((
                        label.clone(),
                        stree_label(a).to_string(),
                        stree_label(b).to_string(),
                    ))
                    .or_insert(0) += 1;
                count_rules(a, eff, binary_counts, lexical_counts);
                count_rules(b, eff, binary_counts, lexical_counts);
            }
            _ => unreachable!("binarized trees have 1 leaf or 2 node children"),
        }
    }
}
