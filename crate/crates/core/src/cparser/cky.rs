//! Viterbi CKY over the binarized grammar, with a flat fallback tree when
//! the chart yields no parse.

use std::collections::BTreeMap;

use crate::treebank::{ConstTree, Sentence, TreeBuilder};

use super::grammar::{stree_to_tree, untransform, Grammar, STree, SymId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseStatus {
    Parsed,
    /// No derivation covered the sentence; the result is a flat tree.
    Fallback,
}

#[derive(Debug, Clone, Copy)]
enum Back {
    Lex,
    Bin { split: usize, left: SymId, right: SymId },
}

struct Chart {
    n: usize,
    cells: Vec<BTreeMap<SymId, (f64, Back)>>,
}

impl Chart {
    fn cell(&self, i: usize, k: usize) -> &BTreeMap<SymId, (f64, Back)> {
        &self.cells[i * (self.n + 1) + k]
    }

    fn cell_mut(&mut self, i: usize, k: usize) -> &mut BTreeMap<SymId, (f64, Back)> {
        &mut self.cells[i * (self.n + 1) + k]
    }
}

fn fill_chart(grammar: &Grammar, eff: &[String]) -> Chart {
    let n = eff.len();
    let mut chart = Chart {
        n,
        cells: vec![BTreeMap::new(); (n + 1) * (n + 1)],
    };
    for (i, word) in eff.iter().enumerate() {
        let cell = chart.cell_mut(i, i + 1);
        for &(lhs, logp) in grammar.lexical_entries(word) {
            match cell.get(&lhs) {
                Some(&(best, _)) if best >= logp => {}
                _ => {
                    cell.insert(lhs, (logp, Back::Lex));
                }
            }
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let k = i + len;
            let mut updates: Vec<(SymId, f64, Back)> = Vec::new();
            for j in i + 1..k {
                for (&left, &(lscore, _)) in chart.cell(i, j) {
                    for &(right, lhs, logp) in grammar.rules_with_left(left) {
                        if let Some(&(rscore, _)) = chart.cell(j, k).get(&right) {
                            updates.push((
                                lhs,
                                lscore + rscore + logp,
                                Back::Bin { split: j, left, right },
                            ));
                        }
                    }
                }
            }
            let cell = chart.cell_mut(i, k);
            for (lhs, score, back) in updates {
                match cell.get(&lhs) {
                    Some(&(best, _)) if best >= score => {}
                    _ => {
                        cell.insert(lhs, (score, back));
                    }
                }
            }
        }
    }
    chart
}

fn best_root(grammar: &Grammar, chart: &Chart) -> Option<(SymId, f64)> {
    let mut best: Option<(SymId, f64)> = None;
    for &(sym, root_logp) in grammar.root_dist() {
        if let Some(&(inside, _)) = chart.cell(0, chart.n).get(&sym) {
            let total = root_logp + inside;
            if best.map_or(true, |(_, b)| total > b) {
                best = Some((sym, total));
            }
        }
    }
    best
}

fn read_off(chart: &Chart, i: usize, k: usize, sym: SymId, grammar: &Grammar) -> STree {
    let &(_, back) = chart.cell(i, k).get(&sym).expect("backpointer exists");
    match back {
        Back::Lex => STree::Node {
            label: grammar.label(sym).to_string(),
            children: vec![STree::Leaf { pos: i }],
        },
        Back::Bin { split, left, right } => STree::Node {
            label: grammar.label(sym).to_string(),
            children: vec![
                read_off(chart, i, split, left, grammar),
                read_off(chart, split, k, right, grammar),
            ],
        },
    }
}

/// Total log-probability (root choice plus derivation) of the Viterbi
/// parse, or `None` when the sentence has no derivation.
pub fn viterbi_logprob(grammar: &Grammar, sentence: &Sentence) -> Option<f64> {
    let eff: Vec<String> = sentence
        .forms()
        .map(|w| grammar.effective(w))
        .collect();
    let chart = fill_chart(grammar, &eff);
    best_root(grammar, &chart).map(|(_, score)| score)
}

/// Viterbi parse of `sentence`. Binarization markers, terminal wrappers,
/// and collapsed unary chains are undone before returning, so the output
/// is a plain continuous tree over positions `0..n-1`. Sentences with no
/// derivation get a flat tree under the grammar's most probable root,
/// flagged as [`ParseStatus::Fallback`].
pub fn cky_parse(grammar: &Grammar, sentence: &Sentence) -> (ConstTree, ParseStatus) {
    let eff: Vec<String> = sentence
        .forms()
        .map(|w| grammar.effective(w))
        .collect();
    let chart = fill_chart(grammar, &eff);
    if let Some((sym, _)) = best_root(grammar, &chart) {
        let stree = untransform(read_off(&chart, 0, chart.n, sym, grammar));
        if let Ok(tree) = stree_to_tree(&stree, sentence.clone()) {
            return (tree, ParseStatus::Parsed);
        }
    }
    (flat_tree(grammar, sentence), ParseStatus::Fallback)
}

fn flat_tree(grammar: &Grammar, sentence: &Sentence) -> ConstTree {
    let mut builder = TreeBuilder::new();
    // Fallback roots reuse the grammar's most likely root label, stripped
    // of any collapse artifacts.
    let label = grammar
        .default_root_label()
        .split(super::grammar::UNARY_SEP)
        .next()
        .expect("non-empty label");
    let root = builder.node(label).expect("valid label");
    for pos in 0..sentence.n() {
        builder.child_leaf(root, pos);
    }
    builder
        .build(root, sentence.clone())
        .expect("flat tree is valid")
}
