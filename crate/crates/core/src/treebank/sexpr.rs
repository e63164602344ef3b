//! Bracketed tree formats: `discbracket` (terminals written `INDEX=FORM`,
//! able to encode discontinuity) and `bracket` (bare forms, positions given
//! by reading order, continuous trees only).

use super::tree::{ConstTree, Child, NodeId, Sentence, Token, TreeBuilder, TreeError};

#[derive(Debug)]
pub struct SexprError {
    pub msg: String,
}

impl SexprError {
    fn new(msg: impl Into<String>) -> Self {
        SexprError { msg: msg.into() }
    }
}

impl From<TreeError> for SexprError {
    fn from(e: TreeError) -> Self {
        SexprError { msg: e.to_string() }
    }
}

/// Parenthesis escaping used for terminal forms in both bracketed formats.
pub fn escape_form(form: &str) -> String {
    form.replace('(', "-LRB-").replace(')', "-RRB-")
}

pub fn unescape_form(form: &str) -> String {
    form.replace("-LRB-", "(").replace("-RRB-", ")")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStyle {
    /// `INDEX=FORM` terminals with explicit positions.
    Indexed,
    /// Bare forms; positions follow reading order.
    Bare,
}

enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok::Atom(&line[s..i]));
            }
            if c == '(' {
                out.push(Tok::Open);
            } else if c == ')' {
                out.push(Tok::Close);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok::Atom(&line[s..]));
    }
    out
}

/// Parses one tree from one line.
pub fn parse_line(line: &str, style: TerminalStyle) -> Result<ConstTree, SexprError> {
    let toks = tokenize(line);
    let mut builder = TreeBuilder::new();
    // (position, form) in reading order; positions explicit or sequential.
    let mut terminals: Vec<(usize, String)> = Vec::new();
    let mut next_pos = 0usize;

    let mut iter = toks.into_iter().peekable();
    let root = parse_node(
        &mut iter,
        &mut builder,
        &mut terminals,
        &mut next_pos,
        style,
    )?;
    if iter.next().is_some() {
        return Err(SexprError::new("trailing material after tree"));
    }

    let n = terminals.len();
    let mut forms: Vec<Option<String>> = vec![None; n];
    for (pos, form) in terminals {
        if pos >= n {
            return Err(SexprError::new(format!(
                "terminal index {pos} out of range for {n} terminals"
            )));
        }
        if forms[pos].is_some() {
            return Err(SexprError::new(format!("duplicate terminal index {pos}")));
        }
        forms[pos] = Some(form);
    }
    let tokens = forms
        .into_iter()
        .enumerate()
        .map(|(pos, f)| {
            let form = f.ok_or_else(|| {
                SexprError::new(format!("terminal index {pos} missing"))
            })?;
            Token::new(form).map_err(SexprError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sentence = Sentence::new(tokens)?;
    builder.build(root, sentence).map_err(SexprError::from)
}

fn parse_node<'a, I: Iterator<Item = Tok<'a>>>(
    iter: &mut std::iter::Peekable<I>,
    builder: &mut TreeBuilder,
    terminals: &mut Vec<(usize, String)>,
    next_pos: &mut usize,
    style: TerminalStyle,
) -> Result<NodeId, SexprError> {
    match iter.next() {
        Some(Tok::Open) => {}
        _ => return Err(SexprError::new("expected '('")),
    }
    let label = match iter.next() {
        Some(Tok::Atom(a)) => a,
        _ => return Err(SexprError::new("expected node label after '('")),
    };
    let id = builder.node(label)?;
    loop {
        match iter.peek() {
            Some(Tok::Open) => {
                let child = parse_node(iter, builder, terminals, next_pos, style)?;
                builder.child_node(id, child);
            }
            Some(Tok::Atom(_)) => {
                let atom = match iter.next() {
                    Some(Tok::Atom(a)) => a,
                    _ => unreachable!(),
                };
                let (pos, form) = match style {
                    TerminalStyle::Indexed => {
                        let (idx, form) = atom.split_once('=').ok_or_else(|| {
                            SexprError::new(format!(
                                "terminal {atom:?} is not of the form INDEX=FORM"
                            ))
                        })?;
                        let pos: usize = idx.parse().map_err(|_| {
                            SexprError::new(format!("bad terminal index in {atom:?}"))
                        })?;
                        (pos, form.to_string())
                    }
                    TerminalStyle::Bare => {
                        let pos = *next_pos;
                        *next_pos += 1;
                        (pos, atom.to_string())
                    }
                };
                if form.is_empty() {
                    return Err(SexprError::new("empty terminal form"));
                }
                builder.child_leaf(id, pos);
                terminals.push((pos, unescape_form(&form)));
            }
            Some(Tok::Close) => {
                iter.next();
                return Ok(id);
            }
            None => return Err(SexprError::new("unbalanced parentheses")),
        }
    }
}

/// Serializes one tree to one line. With [`TerminalStyle::Bare`] the tree
/// must be continuous; the error names the first offending node.
pub fn write_line(tree: &ConstTree, style: TerminalStyle) -> Result<String, SexprError> {
    if style == TerminalStyle::Bare {
        if let Some(&id) = tree.discontinuous_nodes().first() {
            let label = tree.node(id).map_err(SexprError::from)?.label().to_string();
            return Err(SexprError::new(format!(
                "tree not continuous: node {label:?} has a gapped yield"
            )));
        }
    }
    let mut out = String::new();
    write_node(tree, tree.root(), style, &mut out)?;
    Ok(out)
}

fn write_node(
    tree: &ConstTree,
    id: NodeId,
    style: TerminalStyle,
    out: &mut String,
) -> Result<(), SexprError> {
    let node = tree.node(id).map_err(SexprError::from)?;
    out.push('(');
    out.push_str(node.label());
    for child in node.children() {
        out.push(' ');
        match *child {
            Child::Node(c) => write_node(tree, c, style, out)?,
            Child::Leaf(pos) => {
                let form = escape_form(tree.sentence().token(pos).form());
                match style {
                    TerminalStyle::Indexed => {
                        out.push_str(&pos.to_string());
                        out.push('=');
                        out.push_str(&form);
                    }
                    TerminalStyle::Bare => out.push_str(&form),
                }
            }
        }
    }
    out.push(')');
    Ok(())
}
