use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use patchprov::classify::{classify_pull_request, HunkLabel, HunkVerdict};
use patchprov::diffmodel::{parse_unified_diff, serialize_diff, HunkHeader};
use patchprov::pipeline::{classify_corpus, Settings};
use patchprov::synth::{random_diff, synthetic_corpus, CorpusSpec};

fn verdicts(labels: &[HunkLabel]) -> Vec<HunkVerdict> {
    labels
        .iter()
        .map(|l| HunkVerdict {
            label: *l,
            ..HunkVerdict::unsupported("f", HunkHeader::default())
        })
        .collect()
}

fn label() -> impl Strategy<Value = HunkLabel> {
    prop::sample::select(HunkLabel::ALL.to_vec())
}

proptest! {
    #[test]
    fn generated_diffs_round_trip(seed in any::<u64>()) {
        let diff = random_diff(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = serialize_diff(&diff);
        let parsed = parse_unified_diff(&text);
        prop_assert_eq!(&parsed.files, &diff.files);
        prop_assert_eq!(serialize_diff(&parsed), text);
    }

    #[test]
    fn arbitrary_text_never_panics(text in "(diff --git a/x b/x\n|--- a/x\n|\\+\\+\\+ b/x\n|@@ -1,2 \\+1 @@\n|[ +-][a-z]*\n|\\\\ No newline at end of file\n)*") {
        let parsed = parse_unified_diff(&text);
        let _ = parse_unified_diff(&serialize_diff(&parsed));
    }

    #[test]
    fn aggregation_ignores_hunk_order(mut labels in prop::collection::vec(label(), 0..12), merged in any::<bool>(), snippets in 0usize..3, seed in any::<u64>()) {
        let a = classify_pull_request(&verdicts(&labels), merged, snippets);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
        let b = classify_pull_request(&verdicts(&labels), merged, snippets);
        prop_assert_eq!(a.label, b.label);
        prop_assert_eq!(a.counts, b.counts);
    }
}

#[test]
fn applied_hunks_carry_evidence() {
    let corpus = synthetic_corpus(&CorpusSpec::new(5, 60, 120, 300));
    for threshold in [1, 2, 5] {
        let settings = Settings {
            match_threshold: threshold,
            ..Settings::default()
        };
        for out in classify_corpus(&corpus, &settings, 1) {
            for h in out.hunks.iter().filter(|h| h.label == HunkLabel::PA) {
                let m = h.best_match.expect("PA has a best match");
                assert!(m.matched_gram_count >= threshold);
                assert!(h.matched_snippet.is_some());
            }
        }
    }
}

#[test]
fn parallelism_does_not_change_results() {
    let corpus = synthetic_corpus(&CorpusSpec::new(17, 80, 160, 400));
    let settings = Settings::default();
    let one = classify_corpus(&corpus, &settings, 1);
    for threads in [2, 8] {
        assert_eq!(classify_corpus(&corpus, &settings, threads), one);
    }
}
