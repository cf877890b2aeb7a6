//! Classifies a synthetic corpus at n = 1..4 and prints the summaries.

use patchprov::pipeline::{classify_corpus, Settings};
use patchprov::report::summarize;
use patchprov::synth::{synthetic_corpus, CorpusSpec};

fn main() {
    let corpus = synthetic_corpus(&CorpusSpec::new(7, 285, 645, 3486));
    println!("n  PA   PN   NE   CL   hunks PA   median integration");
    for n in 1..=4 {
        let settings = Settings {
            ngram: n,
            ..Settings::default()
        };
        let outcomes = classify_corpus(&corpus, &settings, 0);
        let verdicts: Vec<_> = outcomes.iter().map(|o| o.verdict.clone()).collect();
        let s = summarize(&verdicts, n);
        let median = s.integration.map(|q| q.median.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{n}  {:<4} {:<4} {:<4} {:<4} {:<10} {median}",
            s.pr_counts.pa, s.pr_counts.pn, s.pr_counts.ne, s.pr_counts.cl, s.hunk_counts.pa
        );
    }
}
