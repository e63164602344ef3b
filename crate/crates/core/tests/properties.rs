//! Randomized invariants across the treebank, reorder, and metrics
//! modules.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uncross::metrics::{bracket_scores, EvalConfig};
use uncross::reorder::{cca_permutation, permute_tree, restore_discontinuous, Permutation};
use uncross::synth::{random_corpus, random_sentence, random_tree};
use uncross::treebank::{read_corpus, write_corpus, Child, ConstTree, Corpus, Format, NodeId};

fn canonical_export(corpus: &Corpus) -> Corpus {
    // The export writer re-roots under the virtual top node, so arbitrary
    // corpora normalize after one write/read cycle; round-trip equality is
    // asserted on that canonical form (the format's domain).
    let text = write_corpus(corpus, Format::Export).expect("writable");
    read_corpus(&text, Format::Export).expect("readable")
}

#[test]
fn export_round_trip_is_exact_on_its_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for round in 0..20 {
        let corpus = canonical_export(&random_corpus(&mut rng, 10, 10, 0.5));
        let text = write_corpus(&corpus, Format::Export).expect("writable");
        let back = read_corpus(&text, Format::Export).expect("readable");
        assert!(corpus.same_with_annotations(&back), "round {round}");
        assert_eq!(text, write_corpus(&back, Format::Export).unwrap());
    }
}

#[test]
fn discbracket_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for round in 0..20 {
        let corpus = random_corpus(&mut rng, 10, 10, 0.5);
        let text = write_corpus(&corpus, Format::Discbracket).expect("writable");
        let back = read_corpus(&text, Format::Discbracket).expect("readable");
        // Bracketed formats carry no annotations, so the comparison is
        // structural; ids are line numbers on both sides here.
        assert!(corpus.same_structure(&back), "round {round}");
        assert_eq!(text, write_corpus(&back, Format::Discbracket).unwrap());
    }
}

#[test]
fn bracket_round_trip_is_exact_for_continuous_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let corpus = random_corpus(&mut rng, 10, 10, 0.0);
        let text = write_corpus(&corpus, Format::Bracket).expect("continuous");
        let back = read_corpus(&text, Format::Bracket).expect("readable");
        assert!(corpus.same_structure(&back));
        assert_eq!(text, write_corpus(&back, Format::Bracket).unwrap());
    }
}

#[test]
fn export_discbracket_export_preserves_structure_and_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let corpus = canonical_export(&random_corpus(&mut rng, 8, 12, 0.5));
        let db = write_corpus(&corpus, Format::Discbracket).unwrap();
        let via = read_corpus(&db, Format::Discbracket).unwrap();
        let export = write_corpus(&via, Format::Export).unwrap();
        let back = read_corpus(&export, Format::Export).unwrap();
        for ((_, a), (_, b)) in corpus.iter().zip(back.iter()) {
            assert!(a.same_structure(b));
        }
    }
}

/// Independent continuity check: collect the yield by hand and test every
/// value between its extremes.
fn brute_force_discontinuous(tree: &ConstTree, id: NodeId) -> bool {
    fn collect(tree: &ConstTree, id: NodeId, out: &mut Vec<usize>) {
        for child in tree.node(id).unwrap().children() {
            match *child {
                Child::Leaf(pos) => out.push(pos),
                Child::Node(c) => collect(tree, c, out),
            }
        }
    }
    let mut positions = Vec::new();
    collect(tree, id, &mut positions);
    let lo = *positions.iter().min().unwrap();
    let hi = *positions.iter().max().unwrap();
    (lo..=hi).any(|p| !positions.contains(&p))
}

#[test]
fn discontinuous_nodes_agree_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rng.gen_range(1..=12);
        let sentence = random_sentence(&mut rng, n);
        let tree = random_tree(&mut rng, &sentence, 0.5);
        let listed: Vec<NodeId> = tree.discontinuous_nodes();
        for id in tree.node_ids() {
            let brute = brute_force_discontinuous(&tree, id);
            assert_eq!(listed.contains(&id), brute);
        }
        assert_eq!(listed.is_empty(), tree.is_continuous());
    }
}

#[test]
fn terminal_coverage_of_parsed_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let corpus = random_corpus(&mut rng, 30, 12, 0.5);
    let text = write_corpus(&corpus, Format::Discbracket).unwrap();
    let back = read_corpus(&text, Format::Discbracket).unwrap();
    for (_, tree) in back.iter() {
        let mut seen = vec![0usize; tree.n()];
        for id in tree.node_ids() {
            for child in tree.node(id).unwrap().children() {
                if let Child::Leaf(pos) = *child {
                    seen[pos] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn reversibility_for_canonical_and_arbitrary_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.gen_range(1..=14);
        let sentence = random_sentence(&mut rng, n);
        let tree = random_tree(&mut rng, &sentence, 0.5);

        let f = cca_permutation(&tree);
        let cont = permute_tree(&tree, &f).unwrap();
        assert!(restore_discontinuous(&cont, &f).unwrap().same_with_annotations(&tree));

        let mut shuffled: Vec<usize> = (0..n).collect();
        shuffled.shuffle(&mut rng);
        let arbitrary = Permutation::new(shuffled).unwrap();
        let moved = permute_tree(&tree, &arbitrary).unwrap();
        assert!(restore_discontinuous(&moved, &arbitrary)
            .unwrap()
            .same_with_annotations(&tree));
    }
}

#[test]
fn inversion_is_an_involution_and_composes_to_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let n = rng.gen_range(1..=20);
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(&mut rng);
        let p = Permutation::new(map).unwrap();
        let inv = p.invert();
        assert_eq!(inv.invert(), p);
        for i in 0..n {
            assert_eq!(inv.map()[p.map()[i]], i);
        }
    }
}

#[test]
fn identity_arrangement_iff_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..300 {
        let n = rng.gen_range(1..=12);
        let sentence = random_sentence(&mut rng, n);
        let tree = random_tree(&mut rng, &sentence, 0.4);
        let p = cca_permutation(&tree);
        assert_eq!(p.is_identity(), tree.is_continuous());
    }
}

#[test]
fn relocation_count_matches_changed_positions() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let n = rng.gen_range(1..=14);
        let sentence = random_sentence(&mut rng, n);
        let tree = random_tree(&mut rng, &sentence, 0.5);
        let p = cca_permutation(&tree);
        let moved = p.map().iter().enumerate().filter(|&(i, &j)| i != j).count();
        assert_eq!(p.relocated_mask().count(), moved);
    }
}

#[test]
fn punctuation_filter_is_a_noop_without_punctuation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let n = rng.gen_range(1..=8);
        let sentence = random_sentence(&mut rng, n);
        let gold = Corpus::new(vec![(
            "1".to_string(),
            random_tree(&mut rng, &sentence, 0.4),
        )])
        .unwrap();
        let pred = Corpus::new(vec![(
            "1".to_string(),
            random_tree(&mut rng, &sentence, 0.4),
        )])
        .unwrap();
        let mut cfg = EvalConfig::default();
        let with = bracket_scores(&pred, &gold, &cfg).unwrap();
        cfg.ignore_punctuation = false;
        let without = bracket_scores(&pred, &gold, &cfg).unwrap();
        assert_eq!(with, without);
    }
}
