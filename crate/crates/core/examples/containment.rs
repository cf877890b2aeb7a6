//! Containment of snippet n-grams in hunk n-grams for n = 1..4.

use patchprov::classify::unit_grams;
use patchprov::matching::{containment, match_snippet_against_hunk};
use patchprov::normalize::Registry;

fn main() {
    let registry = Registry::builtin();
    let js = registry.by_name("javascript").unwrap();
    let snippet = ["const sum = (a, b) => a + b;", "export default sum;"];
    let hunk = ["const sum = (a, b) => a + b + 0;", "module.exports = sum;"];
    for n in 1..=4 {
        let s = unit_grams(&snippet, js, n).unwrap();
        let h = unit_grams(&hunk, js, n).unwrap();
        let m = match_snippet_against_hunk(&s, &h, 1).unwrap();
        println!(
            "n={n}: {} of {} snippet grams shared, containment {}%, reverse {}%",
            m.matched_gram_count,
            m.snippet_gram_count,
            m.containment_pct,
            containment(&h, &s).unwrap()
        );
    }
}
