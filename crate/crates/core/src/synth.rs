//! Synthetic corpora: random trees for property tests and a deterministic
//! particle-extraposition corpus used by the demo pipeline and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::treebank::{ConstTree, Corpus, NodeId, Sentence, Token, TreeBuilder};

const NODE_LABELS: &[&str] = &["NP", "VP", "PP", "AP", "X"];

const CONTENT_WORDS: &[&str] = &[
    "time", "year", "way", "day", "man", "world", "life", "hand", "part", "place",
    "week", "room",
];

const DETERMINERS: &[&str] = &["the", "a", "this"];

const PARTICLES: &[&str] = &["up", "off", "away"];

/// A random sentence of `n` tokens drawn from the content vocabulary.
pub fn random_sentence(rng: &mut impl Rng, n: usize) -> Sentence {
    let tokens = (0..n)
        .map(|_| {
            Token::new(*CONTENT_WORDS.choose(rng).expect("non-empty vocabulary"))
                .expect("valid form")
        })
        .collect();
    Sentence::new(tokens).expect("n >= 1")
}

/// A random tree over `sentence`. At every internal node the covered
/// positions are shuffled with probability `shuffle_prob` before being
/// split into child groups, which is what introduces discontinuity;
/// `shuffle_prob == 0.0` always yields a continuous tree.
pub fn random_tree(rng: &mut impl Rng, sentence: &Sentence, shuffle_prob: f64) -> ConstTree {
    let n = sentence.n();
    let mut builder = TreeBuilder::new();
    let root = builder.node("S").expect("valid label");
    let mut positions: Vec<usize> = (0..n).collect();
    grow(rng, &mut builder, root, &mut positions, shuffle_prob, 0);
    builder
        .build(root, sentence.clone())
        .expect("generated tree is valid")
}

fn grow(
    rng: &mut impl Rng,
    builder: &mut TreeBuilder,
    parent: NodeId,
    positions: &mut Vec<usize>,
    shuffle_prob: f64,
    depth: usize,
) {
    if positions.len() == 1 {
        builder.child_leaf(parent, positions[0]);
        return;
    }
    if rng.gen_bool(shuffle_prob) {
        positions.shuffle(rng);
    }
    let groups = rng.gen_range(2..=positions.len().min(4));
    let chunks = split_into(positions, groups, rng);
    for mut chunk in chunks {
        if chunk.len() == 1 && !(depth < 6 && rng.gen_bool(0.25)) {
            builder.child_leaf(parent, chunk[0]);
        } else {
            let label = *NODE_LABELS.choose(rng).expect("non-empty labels");
            let node = builder.node(label).expect("valid label");
            builder.child_node(parent, node);
            grow(rng, builder, node, &mut chunk, shuffle_prob, depth + 1);
        }
    }
}

fn split_into(positions: &[usize], groups: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    // Choose groups-1 distinct cut points.
    let mut cuts: Vec<usize> = (1..positions.len()).collect();
    cuts.shuffle(rng);
    cuts.truncate(groups - 1);
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(positions.len())) {
        out.push(positions[start..cut].to_vec());
        start = cut;
    }
    out
}

/// A corpus of random trees; roughly `disc_fraction` of the trees get a
/// shuffled (usually discontinuous) arrangement.
pub fn random_corpus(
    rng: &mut impl Rng,
    sentences: usize,
    max_len: usize,
    disc_fraction: f64,
) -> Corpus {
    let mut entries = Vec::with_capacity(sentences);
    for i in 0..sentences {
        let n = rng.gen_range(1..=max_len.max(1));
        let sentence = random_sentence(rng, n);
        let shuffle = if rng.gen_bool(disc_fraction) { 0.6 } else { 0.0 };
        let tree = random_tree(rng, &sentence, shuffle);
        entries.push(((i + 1).to_string(), tree));
    }
    Corpus::new(entries).expect("ids are unique by construction")
}

/// Configuration for [`particle_corpus`].
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of a trailing full stop attached to the top node.
    pub punct_prob: f64,
    /// Probabilities of one resp. two extraposed particles per sentence.
    pub one_particle_prob: f64,
    pub two_particle_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 500,
            min_len: 6,
            max_len: 12,
            punct_prob: 0.7,
            one_particle_prob: 0.55,
            two_particle_prob: 0.1,
        }
    }
}

/// A deterministic discontinuous corpus built from three surface-decidable
/// unit types, so that both the arrangement and the bracketing are fully
/// recoverable from the token forms:
///
/// * a bare noun, a direct child of `S`;
/// * a determiner plus a noun, bracketed as `NP`;
/// * an extraposition block `noun PRT noun noun`, where the three nouns
///   form a discontinuous `VP` around the particle. The canonical
///   arrangement moves the particle two positions right and its two right
///   neighbours one position left.
pub fn particle_corpus(cfg: &SynthConfig, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(cfg.sentences);
    for i in 0..cfg.sentences {
        let tree = particle_sentence(&mut rng, cfg);
        entries.push(((i + 1).to_string(), tree));
    }
    Corpus::new(entries).expect("ids unique")
}

enum Unit {
    Noun,
    NounPhrase,
    Extraposition,
}

fn particle_sentence(rng: &mut impl Rng, cfg: &SynthConfig) -> ConstTree {
    let target = rng.gen_range(cfg.min_len..=cfg.max_len);
    let max_particles = if rng.gen_bool(cfg.two_particle_prob) {
        2
    } else if rng.gen_bool(cfg.one_particle_prob) {
        1
    } else {
        0
    };

    let mut units = Vec::new();
    let mut len = 0;
    let mut particles = 0;
    while len < target {
        let unit = if particles < max_particles && target - len >= 4 && rng.gen_bool(0.45) {
            particles += 1;
            Unit::Extraposition
        } else if target - len >= 2 && rng.gen_bool(0.35) {
            Unit::NounPhrase
        } else {
            Unit::Noun
        };
        len += match unit {
            Unit::Noun => 1,
            Unit::NounPhrase => 2,
            Unit::Extraposition => 4,
        };
        units.push(unit);
    }

    let mut tokens: Vec<Token> = Vec::with_capacity(len + 1);
    let mut noun = |rng: &mut dyn rand::RngCore| {
        Token::new(*CONTENT_WORDS.choose(rng).unwrap())
            .unwrap()
            .with_pos("NN")
    };

    let mut builder = TreeBuilder::new();
    let vroot = builder.node("VROOT").unwrap();
    let s = builder.node("S").unwrap();
    builder.child_node(vroot, s);

    for unit in &units {
        let pos = tokens.len();
        match unit {
            Unit::Noun => {
                tokens.push(noun(rng));
                builder.child_leaf(s, pos);
            }
            Unit::NounPhrase => {
                tokens.push(
                    Token::new(*DETERMINERS.choose(rng).unwrap())
                        .unwrap()
                        .with_pos("DT"),
                );
                tokens.push(noun(rng));
                let np = builder.node("NP").unwrap();
                builder.child_leaf(np, pos);
                builder.child_leaf(np, pos + 1);
                builder.child_node(s, np);
            }
            Unit::Extraposition => {
                // (VP w_{k-1} w_{k+1} w_{k+2}) plus the particle at k under
                // S: the in-order traversal emits k-1, k+1, k+2, k.
                tokens.push(noun(rng));
                tokens.push(
                    Token::new(*PARTICLES.choose(rng).unwrap())
                        .unwrap()
                        .with_pos("PRT"),
                );
                tokens.push(noun(rng));
                tokens.push(noun(rng));
                let vp = builder.node("VP").unwrap();
                builder.child_leaf(vp, pos);
                builder.child_leaf(vp, pos + 2);
                builder.child_leaf(vp, pos + 3);
                builder.child_node(s, vp);
                builder.child_leaf(s, pos + 1);
            }
        }
    }

    let n = tokens.len();
    if rng.gen_bool(cfg.punct_prob) {
        tokens.push(Token::new(".").unwrap().with_pos("$."));
        builder.child_leaf(vroot, n);
    }
    let sentence = Sentence::new(tokens).expect("n >= 1");
    builder.build(vroot, sentence).expect("generated tree is valid")
}

/// The permutation the particle rule induces, stated independently of any
/// tree traversal; used to cross-check the generator.
pub fn particle_rule_map(forms: &[&str]) -> Vec<usize> {
    let mut map: Vec<usize> = (0..forms.len()).collect();
    let mut k = 0;
    while k < forms.len() {
        if PARTICLES.contains(&forms[k]) && k >= 1 && k + 2 < forms.len() {
            map[k] = k + 2;
            map[k + 1] = k;
            map[k + 2] = k + 1;
            k += 3;
        } else {
            k += 1;
        }
    }
    map
}
