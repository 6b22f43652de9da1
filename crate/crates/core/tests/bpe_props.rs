mod support;

use proptest::prelude::*;
use strokenet::bpe::{decode_bpe, learn_bpe, BpeModel, LearnOptions, END_OF_WORD};

fn corpus() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[abct]{1,6}( [abct]{1,6}){0,6}", 1..10)
}

fn learn(lines: &[String], merges: usize) -> Option<BpeModel> {
    learn_bpe(&[lines], &LearnOptions::new(merges)).ok()
}

proptest! {
    #[test]
    fn matches_oracle(lines in corpus(), merges in 1usize..30) {
        let model = learn(&lines, merges).unwrap();
        prop_assert_eq!(model.merges(), &support::oracle_learn(&lines, merges, 2)[..]);
        for l in &lines {
            for w in l.split_whitespace() {
                prop_assert_eq!(
                    strokenet::bpe::render_pieces(&model.segment_word(w)),
                    support::oracle_render(w, model.merges())
                );
            }
        }
    }

    #[test]
    fn segmentation_partitions_word(lines in corpus(), word in "[abctx]{1,10}") {
        let model = learn(&lines, 20).unwrap();
        let pieces = model.segment_word(&word);
        let joined: String = pieces.concat();
        prop_assert_eq!(joined, format!("{word}{END_OF_WORD}"));
        prop_assert!(pieces[..pieces.len() - 1].iter().all(|p| !p.contains(END_OF_WORD)));
    }

    #[test]
    fn decode_inverts_apply(lines in corpus(), probe in "[ abct]{0,30}") {
        let model = learn(&lines, 15).unwrap();
        for l in lines.iter().chain([&probe]) {
            prop_assert_eq!(decode_bpe(&model.apply_line(l)), l.clone());
        }
    }

    #[test]
    fn fewer_merges_is_a_prefix(lines in corpus(), a in 1usize..20, b in 1usize..20) {
        let (lo, hi) = (a.min(b), a.max(b));
        let small = learn(&lines, lo).unwrap();
        let big = learn(&lines, hi).unwrap();
        prop_assert_eq!(small.merges(), &big.merges()[..small.len()]);
    }

    #[test]
    fn replay_is_deterministic(lines in corpus()) {
        let model = learn(&lines, 25).unwrap();
        let reloaded = BpeModel::from_merges_str(&model.to_merges_string()).unwrap();
        prop_assert_eq!(&reloaded, &model);
        prop_assert_eq!(model.apply_lines(&lines), reloaded.apply_lines(&lines));
        prop_assert_eq!(learn(&lines, 25).unwrap(), model);
    }
}
