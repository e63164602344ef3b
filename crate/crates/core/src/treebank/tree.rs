//! Constituent trees whose terminals carry explicit sentence positions.
//!
//! Positions are 0-based indices into the underlying [`Sentence`]. A node's
//! yield is the set of positions it dominates; a tree is continuous when
//! every yield is a contiguous interval. Nothing here assumes continuity.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("sentence must contain at least one token")]
    EmptySentence,
    #[error("invalid token form {0:?}: forms are non-empty and contain no whitespace")]
    InvalidForm(String),
    #[error("invalid label {0:?}: labels are non-empty and contain no whitespace or brackets")]
    InvalidLabel(String),
    #[error("terminal position {pos} out of range for a {n}-token sentence")]
    PositionOutOfRange { pos: usize, n: usize },
    #[error("terminal position {pos} appears {count} times; every position must appear exactly once")]
    BadCoverage { pos: usize, count: usize },
    #[error("node {0:?} has no children")]
    EmptyNode(String),
    #[error("not a single tree: {0}")]
    NotATree(String),
    #[error("unknown node id")]
    UnknownNode,
}

/// A single token: surface form plus optional annotations carried through IO.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    form: String,
    pos: Option<String>,
    morph: Option<String>,
    edge: Option<String>,
}

impl Token {
    pub fn new(form: impl Into<String>) -> Result<Self, TreeError> {
        let form = form.into();
        if form.is_empty() || form.chars().any(char::is_whitespace) {
            return Err(TreeError::InvalidForm(form));
        }
        Ok(Token { form, pos: None, morph: None, edge: None })
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.pos = Some(pos.into());
        self
    }

    pub fn with_morph(mut self, morph: impl Into<String>) -> Self {
        self.morph = Some(morph.into());
        self
    }

    pub fn with_edge(mut self, edge: impl Into<String>) -> Self {
        self.edge = Some(edge.into());
        self
    }

    pub fn form(&self) -> &str {
        &self.form
    }

    pub fn pos(&self) -> Option<&str> {
        self.pos.as_deref()
    }

    pub fn morph(&self) -> Option<&str> {
        self.morph.as_deref()
    }

    pub fn edge(&self) -> Option<&str> {
        self.edge.as_deref()
    }

    /// Drops the part-of-speech tag, keeping the rest.
    pub fn without_pos(mut self) -> Self {
        self.pos = None;
        self
    }
}

/// A non-empty ordered sequence of tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self, TreeError> {
        if tokens.is_empty() {
            return Err(TreeError::EmptySentence);
        }
        Ok(Sentence { tokens })
    }

    /// Builds a sentence from bare forms, leaving all annotations empty.
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Result<Self, TreeError> {
        let tokens = forms
            .iter()
            .map(|f| Token::new(f.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Sentence::new(tokens)
    }

    pub fn n(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, pos: usize) -> &Token {
        &self.tokens[pos]
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form())
    }

    /// Forms compare equal; annotations are ignored.
    pub fn same_forms(&self, other: &Sentence) -> bool {
        self.n() == other.n()
            && self.tokens.iter().zip(&other.tokens).all(|(a, b)| a.form == b.form)
    }
}

/// Handle to a node inside one [`ConstTree`]; not meaningful across trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A child is either an internal node or a terminal sentence position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Node(NodeId),
    Leaf(usize),
}

#[derive(Debug, Clone)]
pub struct Node {
    label: String,
    children: Vec<Child>,
    morph: Option<String>,
    edge: Option<String>,
}

impl Node {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[Child] {
        &self.children
    }

    pub fn morph(&self) -> Option<&str> {
        self.morph.as_deref()
    }

    pub fn edge(&self) -> Option<&str> {
        self.edge.as_deref()
    }
}

pub(crate) fn check_label(label: &str) -> Result<(), TreeError> {
    if label.is_empty()
        || label.chars().any(|c| c.is_whitespace() || c == '(' || c == ')')
    {
        return Err(TreeError::InvalidLabel(label.to_string()));
    }
    Ok(())
}

/// Incremental construction; all structural invariants are checked in
/// [`TreeBuilder::build`].
pub struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder { nodes: Vec::new() }
    }

    pub fn node(&mut self, label: impl Into<String>) -> Result<NodeId, TreeError> {
        let label = label.into();
        check_label(&label)?;
        self.nodes.push(Node { label, children: Vec::new(), morph: None, edge: None });
        Ok(NodeId((self.nodes.len() - 1) as u32))
    }

    pub fn set_morph(&mut self, id: NodeId, morph: impl Into<String>) {
        self.nodes[id.0 as usize].morph = Some(morph.into());
    }

    pub fn set_edge(&mut self, id: NodeId, edge: impl Into<String>) {
        self.nodes[id.0 as usize].edge = Some(edge.into());
    }

    pub fn child_node(&mut self, parent: NodeId, child: NodeId) {
        self.nodes[parent.0 as usize].children.push(Child::Node(child));
    }

    pub fn child_leaf(&mut self, parent: NodeId, pos: usize) {
        self.nodes[parent.0 as usize].children.push(Child::Leaf(pos));
    }

    pub fn build(self, root: NodeId, sentence: Sentence) -> Result<ConstTree, TreeError> {
        ConstTree::from_parts(self.nodes, root, sentence)
    }
}

impl Default for TreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// A rooted n-ary constituent tree over a sentence.
///
/// Invariants enforced at construction: every sentence position appears as a
/// terminal exactly once, the node graph is a single tree, and no node is
/// childless. Children are stored in canonical order, ascending by the
/// minimum of their yields; input sibling order is not preserved.
#[derive(Debug, Clone)]
pub struct ConstTree {
    nodes: Vec<Node>,
    root: NodeId,
    sentence: Sentence,
}

impl ConstTree {
    fn from_parts(
        mut nodes: Vec<Node>,
        root: NodeId,
        sentence: Sentence,
    ) -> Result<Self, TreeError> {
        let n = sentence.n();
        if root.0 as usize >= nodes.len() {
            return Err(TreeError::UnknownNode);
        }

        // Single-parent check over the whole arena.
        let mut parent_count = vec![0usize; nodes.len()];
        let mut coverage = vec![0usize; n];
        for node in &nodes {
            if node.children.is_empty() {
                return Err(TreeError::EmptyNode(node.label.clone()));
            }
            for child in &node.children {
                match *child {
                    Child::Node(c) => {
                        if c.0 as usize >= nodes.len() {
                            return Err(TreeError::NotATree(format!(
                                "node {:?} references a nonexistent child",
                                node.label
                            )));
                        }
                        parent_count[c.0 as usize] += 1;
                    }
                    Child::Leaf(pos) => {
                        if pos >= n {
                            return Err(TreeError::PositionOutOfRange { pos, n });
                        }
                        coverage[pos] += 1;
                    }
                }
            }
        }
        for (pos, &count) in coverage.iter().enumerate() {
            if count != 1 {
                return Err(TreeError::BadCoverage { pos, count });
            }
        }
        if parent_count[root.0 as usize] != 0 {
            return Err(TreeError::NotATree("root has a parent".into()));
        }
        for (i, &count) in parent_count.iter().enumerate() {
            if i != root.0 as usize && count != 1 {
                return Err(TreeError::NotATree(format!(
                    "node {:?} has {} parents",
                    nodes[i].label, count
                )));
            }
        }

        // Reachability: with parent counts as above, reaching every node from
        // the root rules out cycles among the remaining edges.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if seen[id.0 as usize] {
                return Err(TreeError::NotATree("cycle detected".into()));
            }
            seen[id.0 as usize] = true;
            for child in &nodes[id.0 as usize].children {
                if let Child::Node(c) = child {
                    stack.push(*c);
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(TreeError::NotATree("unreachable node".into()));
        }

        // Canonical sibling order: ascending minimum yield. Sibling yields
        // are disjoint and non-empty, so the keys are distinct.
        let min_yields = min_yields(&nodes, root, n);
        for node in nodes.iter_mut() {
            node.children.sort_by_key(|c| match *c {
                Child::Leaf(pos) => pos,
                Child::Node(id) => min_yields[id.0 as usize],
            });
            debug_assert!(node
                .children
                .windows(2)
                .all(|w| key_of(&w[0], &min_yields) < key_of(&w[1], &min_yields)));
        }

        Ok(ConstTree { nodes, root, sentence })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn sentence(&self) -> &Sentence {
        &self.sentence
    }

    pub fn n(&self) -> usize {
        self.sentence.n()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TreeError> {
        self.nodes.get(id.0 as usize).ok_or(TreeError::UnknownNode)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All node ids in root-first depth-first order.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            for child in self.nodes[id.0 as usize].children.iter().rev() {
                if let Child::Node(c) = child {
                    stack.push(*c);
                }
            }
        }
        out
    }

    /// Terminal positions dominated by `id`, sorted ascending.
    pub fn node_yield(&self, id: NodeId) -> Result<Vec<usize>, TreeError> {
        self.node(id)?;
        let mut positions = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            for child in &self.nodes[cur.0 as usize].children {
                match *child {
                    Child::Leaf(pos) => positions.push(pos),
                    Child::Node(c) => stack.push(c),
                }
            }
        }
        positions.sort_unstable();
        Ok(positions)
    }

    /// Every node whose yield is not a contiguous interval, in root-first
    /// depth-first order. Empty iff the tree is continuous.
    pub fn discontinuous_nodes(&self) -> Vec<NodeId> {
        self.node_ids()
            .into_iter()
            .filter(|&id| {
                let y = self.node_yield(id).expect("id from node_ids");
                !is_interval(&y)
            })
            .collect()
    }

    pub fn is_continuous(&self) -> bool {
        self.discontinuous_nodes().is_empty()
    }

    /// Rebuilds the tree with every terminal position `i` replaced by
    /// `map[i]` and the sentence replaced by `sentence`. Structure and
    /// labels are unchanged.
    pub(crate) fn map_terminals(
        &self,
        map: &[usize],
        sentence: Sentence,
    ) -> Result<ConstTree, TreeError> {
        let mut nodes = self.nodes.clone();
        for node in nodes.iter_mut() {
            for child in node.children.iter_mut() {
                if let Child::Leaf(pos) = child {
                    *pos = map[*pos];
                }
            }
        }
        ConstTree::from_parts(nodes, self.root, sentence)
    }

    /// Structural equality: same labels, child shapes, terminal positions,
    /// and token forms. Token and node annotations are ignored.
    pub fn same_structure(&self, other: &ConstTree) -> bool {
        self.sentence.same_forms(&other.sentence)
            && eq_nodes(self, self.root, other, other.root, false)
    }

    /// [`ConstTree::same_structure`] plus token tags/morph/edge and node
    /// morph/edge annotations.
    pub fn same_with_annotations(&self, other: &ConstTree) -> bool {
        self.sentence == other.sentence
            && eq_nodes(self, self.root, other, other.root, true)
    }
}

fn key_of(child: &Child, min_yields: &[usize]) -> usize {
    match *child {
        Child::Leaf(pos) => pos,
        Child::Node(id) => min_yields[id.0 as usize],
    }
}

fn min_yields(nodes: &[Node], root: NodeId, n: usize) -> Vec<usize> {
    let mut out = vec![n; nodes.len()];
    fn go(nodes: &[Node], id: NodeId, out: &mut Vec<usize>) -> usize {
        let mut min = usize::MAX;
        for child in &nodes[id.0 as usize].children {
            let k = match *child {
                Child::Leaf(pos) => pos,
                Child::Node(c) => go(nodes, c, out),
            };
            min = min.min(k);
        }
        out[id.0 as usize] = min;
        min
    }
    go(nodes, root, &mut out);
    out
}

pub(crate) fn is_interval(sorted: &[usize]) -> bool {
    match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) => hi - lo + 1 == sorted.len(),
        _ => true,
    }
}

fn eq_nodes(a: &ConstTree, ai: NodeId, b: &ConstTree, bi: NodeId, with_meta: bool) -> bool {
    let (na, nb) = (&a.nodes[ai.0 as usize], &b.nodes[bi.0 as usize]);
    if na.label != nb.label || na.children.len() != nb.children.len() {
        return false;
    }
    if with_meta && (na.morph != nb.morph || na.edge != nb.edge) {
        return false;
    }
    na.children.iter().zip(&nb.children).all(|(ca, cb)| match (ca, cb) {
        (Child::Leaf(pa), Child::Leaf(pb)) => pa == pb,
        (Child::Node(ca), Child::Node(cb)) => eq_nodes(a, *ca, b, *cb, with_meta),
        _ => false,
    })
}
