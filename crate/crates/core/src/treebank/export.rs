//! NEGRA/TIGER-style export format, 5-column subset: form, tag, morph,
//! edge, parent. Sentences are delimited by `#BOS id` / `#EOS id`,
//! nonterminal records use ids of 500 and up, and parent 0 denotes the
//! implicit top node.

use std::collections::BTreeMap;

use super::tree::{ConstTree, Child, NodeId, Sentence, Token, TreeBuilder};
use super::{ReadOptions, TreebankError};

const MIN_NONTERMINAL_ID: u32 = 500;

fn opt_field(s: &str) -> Option<String> {
    if s == "--" {
        None
    } else {
        Some(s.to_string())
    }
}

fn field_or_dashes(s: Option<&str>) -> &str {
    s.unwrap_or("--")
}

struct TokenRecord {
    form: String,
    tag: Option<String>,
    morph: Option<String>,
    edge: Option<String>,
    parent: u32,
    line: usize,
}

struct NtRecord {
    label: String,
    morph: Option<String>,
    edge: Option<String>,
    parent: u32,
    line: usize,
}

pub(super) struct SentenceBlock {
    pub id: String,
    first_line: usize,
    tokens: Vec<TokenRecord>,
    nonterminals: BTreeMap<u32, NtRecord>,
}

/// Splits the file into `#BOS`/`#EOS` blocks, validating the framing.
pub(super) fn split_blocks(text: &str) -> Result<Vec<SentenceBlock>, TreebankError> {
    let mut blocks = Vec::new();
    let mut current: Option<SentenceBlock> = None;

    for (lineno0, raw) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = raw.trim_end();
        if current.is_none() {
            if line.is_empty() || line.starts_with("%%") {
                continue;
            }
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (fields.first().copied(), &mut current) {
            (Some("#BOS"), None) => {
                let id = fields.get(1).copied().ok_or_else(|| TreebankError::Parse {
                    sentence_id: String::new(),
                    line: lineno,
                    msg: "#BOS without a sentence id".into(),
                })?;
                current = Some(SentenceBlock {
                    id: id.to_string(),
                    first_line: lineno,
                    tokens: Vec::new(),
                    nonterminals: BTreeMap::new(),
                });
            }
            (Some("#BOS"), Some(block)) => {
                return Err(TreebankError::Parse {
                    sentence_id: block.id.clone(),
                    line: lineno,
                    msg: "#BOS inside an open sentence".into(),
                });
            }
            (Some("#EOS"), Some(block)) => {
                let id = fields.get(1).copied().unwrap_or("");
                if id != block.id {
                    return Err(TreebankError::Parse {
                        sentence_id: block.id.clone(),
                        line: lineno,
                        msg: format!("#EOS id {id:?} does not match #BOS id {:?}", block.id),
                    });
                }
                blocks.push(current.take().unwrap());
            }
            (Some("#EOS"), None) => {
                return Err(TreebankError::Parse {
                    sentence_id: String::new(),
                    line: lineno,
                    msg: "#EOS without matching #BOS".into(),
                });
            }
            (Some(first), Some(block)) => {
                parse_record(first, &fields, lineno, block)?;
            }
            (Some(_), None) => {
                return Err(TreebankError::Parse {
                    sentence_id: String::new(),
                    line: lineno,
                    msg: "record outside #BOS/#EOS".into(),
                });
            }
            (None, Some(block)) => {
                return Err(TreebankError::Parse {
                    sentence_id: block.id.clone(),
                    line: lineno,
                    msg: "blank line inside a sentence".into(),
                });
            }
            (None, None) => {}
        }
    }
    if let Some(block) = current {
        return Err(TreebankError::Parse {
            sentence_id: block.id.clone(),
            line: block.first_line,
            msg: "sentence not closed by #EOS".into(),
        });
    }
    Ok(blocks)
}

fn parse_record(
    first: &str,
    fields: &[&str],
    lineno: usize,
    block: &mut SentenceBlock,
) -> Result<(), TreebankError> {
    let parse_err = |msg: String| TreebankError::Parse {
        sentence_id: block.id.clone(),
        line: lineno,
        msg,
    };
    if fields.len() < 5 {
        return Err(parse_err(format!(
            "expected 5 fields (form tag morph edge parent), found {}",
            fields.len()
        )));
    }
    if fields.len() > 5 {
        // Secondary edges come as (label, parent) pairs after the fifth
        // field; they carry co-reference information we do not model.
        log::warn!(
            "sentence {}: line {}: ignoring {} extra field(s) (secondary edges)",
            block.id,
            lineno,
            fields.len() - 5
        );
    }
    let parent: u32 = fields[4]
        .parse()
        .map_err(|_| parse_err(format!("bad parent id {:?}", fields[4])))?;
    if parent != 0 && parent < MIN_NONTERMINAL_ID {
        return Err(parse_err(format!(
            "parent id {parent} is neither 0 nor a nonterminal id (>= {MIN_NONTERMINAL_ID})"
        )));
    }

    if let Some(digits) = first.strip_prefix('#') {
        if let Ok(id) = digits.parse::<u32>() {
            if id < MIN_NONTERMINAL_ID {
                return Err(parse_err(format!(
                    "nonterminal id {id} below {MIN_NONTERMINAL_ID}"
                )));
            }
            let record = NtRecord {
                label: fields[1].to_string(),
                morph: opt_field(fields[2]),
                edge: opt_field(fields[3]),
                parent,
                line: lineno,
            };
            if block.nonterminals.insert(id, record).is_some() {
                return Err(parse_err(format!("duplicate nonterminal id {id}")));
            }
            return Ok(());
        }
    }
    block.tokens.push(TokenRecord {
        form: first.to_string(),
        tag: opt_field(fields[1]),
        morph: opt_field(fields[2]),
        edge: opt_field(fields[3]),
        parent,
        line: lineno,
    });
    Ok(())
}

pub(super) fn block_to_tree(
    block: &SentenceBlock,
    opts: &ReadOptions,
) -> Result<ConstTree, TreebankError> {
    let structure_err = |msg: String| TreebankError::Structure {
        sentence_id: block.id.clone(),
        msg,
    };
    if block.tokens.is_empty() {
        return Err(structure_err("sentence has no tokens".into()));
    }

    let mut builder = TreeBuilder::new();
    let vroot = builder
        .node(&opts.virtual_root_label)
        .map_err(|e| structure_err(e.to_string()))?;
    let mut by_export_id: BTreeMap<u32, NodeId> = BTreeMap::new();
    for (&id, record) in &block.nonterminals {
        let node = builder
            .node(&record.label)
            .map_err(|e| structure_err(format!("line {}: {}", record.line, e)))?;
        if let Some(m) = &record.morph {
            builder.set_morph(node, m);
        }
        if let Some(e) = &record.edge {
            builder.set_edge(node, e);
        }
        by_export_id.insert(id, node);
    }

    let resolve = |parent: u32, line: usize| -> Result<NodeId, TreebankError> {
        if parent == 0 {
            Ok(vroot)
        } else {
            by_export_id.get(&parent).copied().ok_or_else(|| {
                structure_err(format!("line {line}: dangling parent id {parent}"))
            })
        }
    };

    let mut tokens = Vec::with_capacity(block.tokens.len());
    for (pos, record) in block.tokens.iter().enumerate() {
        let mut token = Token::new(&record.form)
            .map_err(|e| structure_err(format!("line {}: {}", record.line, e)))?;
        if let Some(tag) = &record.tag {
            token = token.with_pos(tag);
        }
        if let Some(m) = &record.morph {
            token = token.with_morph(m);
        }
        if let Some(e) = &record.edge {
            token = token.with_edge(e);
        }
        tokens.push(token);

        let parent = resolve(record.parent, record.line)?;
        if opts.tags_as_nodes {
            if let Some(tag) = &record.tag {
                let pre = builder
                    .node(tag)
                    .map_err(|e| structure_err(format!("line {}: {}", record.line, e)))?;
                builder.child_leaf(pre, pos);
                builder.child_node(parent, pre);
                continue;
            }
        }
        builder.child_leaf(parent, pos);
    }
    for (&id, record) in &block.nonterminals {
        let node = by_export_id[&id];
        let parent = resolve(record.parent, record.line)?;
        if parent == node {
            return Err(structure_err(format!("node {id} is its own parent")));
        }
        builder.child_node(parent, node);
    }

    let sentence = Sentence::new(tokens).map_err(|e| structure_err(e.to_string()))?;
    builder
        .build(vroot, sentence)
        .map_err(|e| structure_err(e.to_string()))
}

/// Writes one sentence block. Nonterminal ids are assigned afresh from 500
/// in a children-first traversal; if the root carries the virtual-root
/// label it stays implicit as id 0, otherwise it is written with parent 0.
pub(super) fn write_block(
    id: &str,
    tree: &ConstTree,
    virtual_root_label: &str,
    out: &mut String,
) {
    let root_is_virtual = tree
        .node(tree.root())
        .map(|n| n.label() == virtual_root_label)
        .unwrap_or(false);

    // Children-before-parents numbering.
    let mut export_ids: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut order: Vec<NodeId> = Vec::new();
    assign_ids(tree, tree.root(), root_is_virtual, &mut export_ids, &mut order);

    let mut token_parent = vec![0u32; tree.n()];
    let mut node_parent: BTreeMap<NodeId, u32> = BTreeMap::new();
    for &id in std::iter::once(&tree.root()).chain(order.iter()) {
        let this = export_ids.get(&id).copied().unwrap_or(0);
        let node = tree.node(id).expect("traversed id");
        for child in node.children() {
            match *child {
                Child::Leaf(pos) => token_parent[pos] = this,
                Child::Node(c) => {
                    node_parent.insert(c, this);
                }
            }
        }
    }

    out.push_str(&format!("#BOS {id}\n"));
    for (pos, token) in tree.sentence().tokens().iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            token.form(),
            field_or_dashes(token.pos()),
            field_or_dashes(token.morph()),
            field_or_dashes(token.edge()),
            token_parent[pos]
        ));
    }
    for &nid in &order {
        let node = tree.node(nid).expect("traversed id");
        out.push_str(&format!(
            "#{}\t{}\t{}\t{}\t{}\n",
            export_ids[&nid],
            node.label(),
            field_or_dashes(node.morph()),
            field_or_dashes(node.edge()),
            node_parent.get(&nid).copied().unwrap_or(0)
        ));
    }
    out.push_str(&format!("#EOS {id}\n"));
}

fn assign_ids(
    tree: &ConstTree,
    id: NodeId,
    skip_self: bool,
    export_ids: &mut BTreeMap<NodeId, u32>,
    order: &mut Vec<NodeId>,
) {
    for child in tree.node(id).expect("valid id").children() {
        if let Child::Node(c) = child {
            assign_ids(tree, *c, false, export_ids, order);
        }
    }
    if !skip_self {
        let next = MIN_NONTERMINAL_ID + order.len() as u32;
        export_ids.insert(id, next);
        order.push(id);
    }
}
