//! Scoring: labeled bracketing F1 and its discontinuous-only restriction
//! over (label, yield) items, plus attachment-style scores for predicted
//! arrangements against gold ones.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::reorder::{Permutation, RelocationMask};
use crate::treebank::{ConstTree, Corpus, Sentence};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("corpora are misaligned: {0}")]
    Misaligned(String),
}

/// Evaluation conventions: which terminals and which items are ignored.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Remove punctuation terminals from every yield before matching.
    pub ignore_punctuation: bool,
    /// Punctuation by tag, for tokens that carry one.
    pub punctuation_tags: HashSet<String>,
    /// Punctuation by surface form, for tokens without a tag.
    pub punctuation_forms: HashSet<String>,
    /// Items with these labels are ignored wherever they occur, in addition
    /// to the tree root itself.
    pub ignore_root_labels: HashSet<String>,
    /// Compare labels after cutting grammatical-function suffixes
    /// (`NP-SBJ` -> `NP`). Off by default.
    pub strip_function_suffixes: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let punctuation_tags = ["$.", "$,", "$(", "$[", ".", ",", ":", ";", "``", "''",
            "-LRB-", "-RRB-", "PUNCT", "SYM"]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let punctuation_forms = [".", ",", ":", ";", "!", "?", "...", "--", "-", "``",
            "''", "\"", "'", "(", ")", "-LRB-", "-RRB-", "[", "]", "{", "}", "/"]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let ignore_root_labels = ["VROOT", "ROOT", "TOP"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        EvalConfig {
            ignore_punctuation: true,
            punctuation_tags,
            punctuation_forms,
            ignore_root_labels,
            strip_function_suffixes: false,
        }
    }
}

impl EvalConfig {
    fn is_punctuation(&self, sentence: &Sentence, pos: usize) -> bool {
        let token = sentence.token(pos);
        match token.pos() {
            Some(tag) => self.punctuation_tags.contains(tag),
            None => self.punctuation_forms.contains(token.form()),
        }
    }

    fn label_of(&self, raw: &str) -> String {
        if self.strip_function_suffixes {
            match raw.char_indices().find(|&(i, c)| i > 0 && (c == '-' || c == '=')) {
                Some((i, _)) => raw[..i].to_string(),
                None => raw.to_string(),
            }
        } else {
            raw.to_string()
        }
    }
}

/// Metric bundle; all values are percentages in `[0, 100]`. Fields not
/// touched by a given scorer stay zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scores {
    pub f1: f64,
    pub disc_f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub uas: f64,
    pub las: f64,
    pub reloc_precision: f64,
    pub reloc_recall: f64,
    pub reloc_f1: f64,
    pub pct_relocated_gold: f64,
    pub pct_relocated_pred: f64,
}

impl Scores {
    /// Bracket fields from `bracket`, arrangement fields from `reorder`.
    pub fn merged(bracket: Option<&Scores>, reorder: Option<&Scores>) -> Scores {
        let mut out = Scores::default();
        if let Some(b) = bracket {
            out.f1 = b.f1;
            out.disc_f1 = b.disc_f1;
            out.precision = b.precision;
            out.recall = b.recall;
        }
        if let Some(r) = reorder {
            out.uas = r.uas;
            out.las = r.las;
            out.reloc_precision = r.reloc_precision;
            out.reloc_recall = r.reloc_recall;
            out.reloc_f1 = r.reloc_f1;
            out.pct_relocated_gold = r.pct_relocated_gold;
            out.pct_relocated_pred = r.pct_relocated_pred;
        }
        out
    }

    /// One `key=value` line per metric, for harness consumption.
    pub fn kv_lines(&self) -> String {
        format!(
            "f1={:.2}\ndisc_f1={:.2}\nprecision={:.2}\nrecall={:.2}\nuas={:.2}\nlas={:.2}\n\
             reloc_precision={:.2}\nreloc_recall={:.2}\nreloc_f1={:.2}\n\
             pct_relocated_gold={:.2}\npct_relocated_pred={:.2}\n",
            self.f1,
            self.disc_f1,
            self.precision,
            self.recall,
            self.uas,
            self.las,
            self.reloc_precision,
            self.reloc_recall,
            self.reloc_f1,
            self.pct_relocated_gold,
            self.pct_relocated_pred
        )
    }

    /// Human-readable two-column table.
    pub fn table(&self) -> String {
        let rows = [
            ("labeled F1", self.f1),
            ("discontinuous F1", self.disc_f1),
            ("precision", self.precision),
            ("recall", self.recall),
            ("UAS", self.uas),
            ("LAS", self.las),
            ("relocated precision", self.reloc_precision),
            ("relocated recall", self.reloc_recall),
            ("relocated F1", self.reloc_f1),
            ("% relocated (gold)", self.pct_relocated_gold),
            ("% relocated (pred)", self.pct_relocated_pred),
        ];
        let mut out = String::new();
        for (name, value) in rows {
            out.push_str(&format!("{name:<22} {value:>7.2}\n"));
        }
        out
    }
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

type Item = (String, BTreeSet<usize>);

/// (label, yield) items of a tree after the configured filtering, as a
/// multiset. Punctuation positions are removed from each yield and the
/// survivors re-indexed densely, so an interior punctuation gap does not
/// turn a contiguous item into a discontinuous one.
fn items(tree: &ConstTree, punct: &BTreeSet<usize>, cfg: &EvalConfig) -> HashMap<Item, usize> {
    let mut reindex = vec![usize::MAX; tree.n()];
    let mut next = 0;
    for pos in 0..tree.n() {
        if !punct.contains(&pos) {
            reindex[pos] = next;
            next += 1;
        }
    }
    let mut out: HashMap<Item, usize> = HashMap::new();
    for id in tree.node_ids() {
        if id == tree.root() {
            continue;
        }
        let label = cfg.label_of(tree.node(id).expect("listed id").label());
        if cfg.ignore_root_labels.contains(&label) {
            continue;
        }
        let yield_set: BTreeSet<usize> = tree
            .node_yield(id)
            .expect("listed id")
            .into_iter()
            .filter(|p| !punct.contains(p))
            .map(|p| reindex[p])
            .collect();
        if yield_set.is_empty() {
            continue;
        }
        *out.entry((label, yield_set)).or_insert(0) += 1;
    }
    out
}

fn is_contiguous(set: &BTreeSet<usize>) -> bool {
    match (set.first(), set.last()) {
        (Some(&lo), Some(&hi)) => hi - lo + 1 == set.len(),
        _ => true,
    }
}

fn intersect_count(a: &HashMap<Item, usize>, b: &HashMap<Item, usize>) -> usize {
    a.iter()
        .map(|(k, &ca)| ca.min(b.get(k).copied().unwrap_or(0)))
        .sum()
}

/// Labeled bracketing scores of `pred` against `gold`. `disc_f1` is the
/// same computation restricted to items whose filtered yield is not a
/// contiguous interval. Punctuation positions are determined on the gold
/// tokens and removed from both sides, keeping the filtering aligned even
/// when predicted trees carry no tags.
pub fn bracket_scores(
    pred: &Corpus,
    gold: &Corpus,
    cfg: &EvalConfig,
) -> Result<Scores, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::Misaligned(format!(
            "pred has {} sentences, gold has {}",
            pred.len(),
            gold.len()
        )));
    }
    let (mut matched, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    let (mut d_matched, mut d_pred, mut d_gold) = (0usize, 0usize, 0usize);
    for ((pid, ptree), (gid, gtree)) in pred.iter().zip(gold.iter()) {
        if pid != gid {
            return Err(MetricsError::Misaligned(format!(
                "sentence id {pid:?} in pred vs {gid:?} in gold"
            )));
        }
        if ptree.n() != gtree.n() {
            return Err(MetricsError::Misaligned(format!(
                "sentence {gid:?}: {} tokens in pred vs {} in gold",
                ptree.n(),
                gtree.n()
            )));
        }
        let punct: BTreeSet<usize> = if cfg.ignore_punctuation {
            (0..gtree.n())
                .filter(|&p| cfg.is_punctuation(gtree.sentence(), p))
                .collect()
        } else {
            BTreeSet::new()
        };
        let p_items = items(ptree, &punct, cfg);
        let g_items = items(gtree, &punct, cfg);
        matched += intersect_count(&p_items, &g_items);
        n_pred += p_items.values().sum::<usize>();
        n_gold += g_items.values().sum::<usize>();

        let p_disc: HashMap<Item, usize> = p_items
            .iter()
            .filter(|((_, y), _)| !is_contiguous(y))
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        let g_disc: HashMap<Item, usize> = g_items
            .iter()
            .filter(|((_, y), _)| !is_contiguous(y))
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        d_matched += intersect_count(&p_disc, &g_disc);
        d_pred += p_disc.values().sum::<usize>();
        d_gold += g_disc.values().sum::<usize>();
    }
    let precision = pct(matched, n_pred);
    let recall = pct(matched, n_gold);
    let disc_p = pct(d_matched, d_pred);
    let disc_r = pct(d_matched, d_gold);
    Ok(Scores {
        f1: harmonic(precision, recall),
        disc_f1: harmonic(disc_p, disc_r),
        precision,
        recall,
        ..Default::default()
    })
}

/// Attachment scores of predicted arrangements against gold ones.
///
/// UAS counts tokens whose arranged position matches; LAS additionally
/// requires the relocation flag to match. Relocated-token precision,
/// recall, and F1 treat `relocated = true` as the positive class; empty
/// denominators score 0.
pub fn reorder_scores(
    pred: &[(Permutation, RelocationMask)],
    gold: &[(Permutation, RelocationMask)],
) -> Result<Scores, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::Misaligned(format!(
            "pred has {} sentences, gold has {}",
            pred.len(),
            gold.len()
        )));
    }
    let mut tokens = 0usize;
    let (mut uas_hits, mut las_hits) = (0usize, 0usize);
    let (mut tp, mut pred_pos, mut gold_pos) = (0usize, 0usize, 0usize);
    for (i, ((pp, pm), (gp, gm))) in pred.iter().zip(gold.iter()).enumerate() {
        if pp.n() != gp.n() || pm.flags().len() != pp.n() || gm.flags().len() != gp.n() {
            return Err(MetricsError::Misaligned(format!(
                "sentence {i}: length mismatch between pred and gold"
            )));
        }
        tokens += gp.n();
        for t in 0..gp.n() {
            let pos_ok = pp.map()[t] == gp.map()[t];
            let flag_ok = pm.flags()[t] == gm.flags()[t];
            if pos_ok {
                uas_hits += 1;
                if flag_ok {
                    las_hits += 1;
                }
            }
            match (pm.flags()[t], gm.flags()[t]) {
                (true, true) => {
                    tp += 1;
                    pred_pos += 1;
                    gold_pos += 1;
                }
                (true, false) => pred_pos += 1,
                (false, true) => gold_pos += 1,
                (false, false) => {}
            }
        }
    }
    let reloc_precision = pct(tp, pred_pos);
    let reloc_recall = pct(tp, gold_pos);
    Ok(Scores {
        uas: pct(uas_hits, tokens),
        las: pct(las_hits, tokens),
        reloc_precision,
        reloc_recall,
        reloc_f1: harmonic(reloc_precision, reloc_recall),
        pct_relocated_gold: pct(gold_pos, tokens),
        pct_relocated_pred: pct(pred_pos, tokens),
        ..Default::default()
    })
}
