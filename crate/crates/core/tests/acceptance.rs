//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{copy_dir, env_with, golden, naive_containment_tenths, naive_grams, naive_shared, replay, run, Spy};
use patchprov::acquire::{HostGuard, HttpRequest, Transport, TransportError, VENDOR_HOSTS};
use patchprov::classify::{classify_pull_request, HunkLabel, HunkVerdict, PrLabel};
use patchprov::conversation::{LinkMatcher, LinkSource};
use patchprov::diffmodel::{parse_unified_diff, serialize_diff, HunkHeader};
use patchprov::matching::{build_ngrams, containment, match_snippet_against_hunk, NGramSet, Percentage, Token};
use patchprov::normalize::{normalize_lines, Registry};
use patchprov::pipeline::{classify_corpus, PrOutcome, Settings};
use patchprov::report::{cohens_kappa, evaluate, ClassificationReport, EvaluationReport};
use patchprov::synth::{random_code_line, random_diff, synthetic_corpus, CorpusSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn tokens(v: &[String]) -> Vec<Token> {
    v.iter().map(Token::new).collect()
}

fn random_tokens(rng: &mut impl Rng) -> Vec<String> {
    const ALPHABET: &[&str] = &["a", "b", "c", "x", "(", ")", ";", "=", "ret", "_k2"];
    let len = rng.random_range(0..40);
    (0..len).map(|_| ALPHABET.choose(rng).unwrap().to_string()).collect()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut compared = 0;
    for _ in 0..1000 {
        let (x, y) = (random_tokens(&mut rng), random_tokens(&mut rng));
        for n in 1..=4 {
            let (sx, sy) = (build_ngrams(&tokens(&x), n).unwrap(), build_ngrams(&tokens(&y), n).unwrap());
            let (ox, oy) = (naive_grams(&x, n), naive_grams(&y, n));
            check(sx.total_grams() == ox.len(), || format!("gram count differs on {x:?} n={n}"))?;
            let shared = naive_shared(&ox, &oy);
            check(sx.intersection_count(&sy) == shared, || format!("shared differs on {x:?} / {y:?} n={n}"))?;
            match (containment(&sx, &sy), naive_containment_tenths(&ox, &oy)) {
                (Ok(c), Some(t)) => {
                    check(c == Percentage::of(shared as u64, ox.len() as u64) && c.tenths() == t, || {
                        format!("containment {c} vs oracle {t} tenths on {x:?} / {y:?} n={n}")
                    })?;
                }
                (Err(_), None) => {}
                (a, b) => return Err(format!("definedness differs: {a:?} vs {b:?}")),
            }
            let m = match_snippet_against_hunk(&sx, &sy, 1).unwrap();
            check(m.matched == (shared >= 1), || "match flag differs".into())?;
            compared += 1;
        }
    }
    within(Duration::from_secs(10), start.elapsed())?;
    Ok(format!("{compared} comparisons in {:.2?}", start.elapsed()))
}

fn pa_set(outcomes: &[PrOutcome]) -> BTreeSet<(String, usize)> {
    outcomes
        .iter()
        .flat_map(|o| {
            o.hunks
                .iter()
                .enumerate()
                .filter(|(_, h)| h.label == HunkLabel::PA)
                .map(move |(i, _)| (o.id.to_string(), i))
        })
        .collect()
}

fn n_monotonicity() -> Outcome {
    let start = Instant::now();
    let corpus = synthetic_corpus(&CorpusSpec::new(2, 200, 450, 1200));
    let mut sets = Vec::new();
    let mut ne_hunks = Vec::new();
    let mut ne_prs = Vec::new();
    for n in 1..=4 {
        let settings = Settings {
            ngram: n,
            ..Settings::default()
        };
        let out = classify_corpus(&corpus, &settings, 1);
        sets.push(pa_set(&out));
        ne_hunks.push(out.iter().map(|o| o.verdict.counts.ne).sum::<usize>());
        ne_prs.push(out.iter().filter(|o| o.verdict.label == PrLabel::NE).count());
    }
    for n in 0..3 {
        check(sets[n + 1].is_subset(&sets[n]), || format!("PA({}) is not a subset of PA({})", n + 2, n + 1))?;
    }
    check(ne_hunks.iter().all(|c| *c == ne_hunks[0]), || format!("NE hunk counts vary: {ne_hunks:?}"))?;
    check(ne_prs.iter().all(|c| *c == ne_prs[0]), || format!("NE PR counts vary: {ne_prs:?}"))?;
    check(sets[0].len() > sets[3].len(), || "corpus does not separate n=1 from n=4".into())?;
    within(Duration::from_secs(30), start.elapsed())?;
    let sizes: Vec<usize> = sets.iter().map(BTreeSet::len).collect();
    Ok(format!("PA hunks by n {sizes:?}, NE hunks {} at every n", ne_hunks[0]))
}

fn aggregation_table() -> Outcome {
    use HunkLabel::*;
    let rows: [(&[HunkLabel], bool, usize, PrLabel); 16] = [
        (&[PA], true, 1, PrLabel::PA),
        (&[PN], true, 1, PrLabel::PN),
        (&[NE], true, 0, PrLabel::NE),
        (&[PA, PN], true, 1, PrLabel::PA),
        (&[PN, PN, NE], true, 1, PrLabel::PN),
        (&[NE, PA], true, 1, PrLabel::PA),
        (&[NE, CC], true, 0, PrLabel::NE),
        (&[CC], true, 1, PrLabel::NE),
        (&[EE], true, 1, PrLabel::NE),
        (&[CC, EE, PN], true, 1, PrLabel::PN),
        (&[EE, PA], true, 1, PrLabel::PA),
        (&[], true, 2, PrLabel::PN),
        (&[], true, 0, PrLabel::NE),
        (&[PA, PA], false, 1, PrLabel::CL),
        (&[PN, NE], false, 1, PrLabel::CL),
        (&[], false, 0, PrLabel::CL),
    ];
    for (i, (labels, merged, snippets, want)) in rows.iter().enumerate() {
        let verdicts: Vec<HunkVerdict> = labels
            .iter()
            .map(|l| HunkVerdict {
                label: *l,
                ..HunkVerdict::unsupported("f", HunkHeader::default())
            })
            .collect();
        let got = classify_pull_request(&verdicts, *merged, *snippets).label;
        check(got == *want, || format!("row {}: {labels:?} merged={merged} -> {got}, want {want}", i + 1))?;
    }
    Ok("16 rows".into())
}

fn random_set(rng: &mut impl Rng, min: usize) -> NGramSet {
    let mut s = NGramSet::empty(1);
    for _ in 0..rng.random_range(min..12) {
        s.insert(vec![Token::new(format!("g{}", rng.random_range(0..15)))]).unwrap();
    }
    s
}

fn containment_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let x = random_set(&mut rng, 1);
        let y = random_set(&mut rng, 0);
        let c = containment(&x, &y).unwrap();
        check(c >= Percentage::ZERO && c <= Percentage::HUNDRED, || format!("{c} out of range"))?;
        let subset = x.grams().iter().all(|g| y.contains(g));
        check((c == Percentage::HUNDRED) == subset, || format!("100 iff subset violated: {c}"))?;
        let mut bigger = y.clone();
        bigger.extend_from(&random_set(&mut rng, 0)).unwrap();
        check(containment(&x, &bigger).unwrap() >= c, || "not monotone in the reference".into())?;
    }
    let set = |t: &[&str]| build_ngrams(&t.iter().map(|s| Token::new(*s)).collect::<Vec<_>>(), 1).unwrap();
    let (a, ab) = (set(&["a"]), set(&["a", "b"]));
    check(containment(&a, &ab).unwrap() == Percentage::HUNDRED, || "asymmetry: {a} in {a,b}".into())?;
    check(containment(&ab, &a).unwrap() == Percentage::of(1, 2), || "asymmetry: {a,b} in {a}".into())?;
    Ok("1000 random pairs plus asymmetry fixture".into())
}

fn perturb(rng: &mut impl Rng, line: &str, comment: Option<&str>) -> String {
    let mut out = String::new();
    for ch in line.chars() {
        if rng.random_bool(0.1) {
            out.push(*[' ', '\t'].choose(rng).unwrap());
        }
        if rng.random_bool(0.05) {
            out.push('\u{e9}');
        }
        out.push(if rng.random_bool(0.3) { ch.to_ascii_uppercase() } else { ch });
    }
    if let Some(c) = comment {
        out.push_str("   ");
        out.push_str(c);
    }
    out
}

fn normalization() -> Outcome {
    let registry = Registry::builtin();
    let names = ["c", "cpp", "java", "javascript", "typescript", "go", "rust", "python", "shell", "ruby", "sql", "lua", "css"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in names {
        let p = registry.by_name(name).ok_or_else(|| format!("no profile {name}"))?;
        let comment = p
            .line_comment
            .clone()
            .map(|c| format!("{c} Note: déjà vu"))
            .or_else(|| p.block_comment.as_ref().map(|(a, b)| format!("{a} Note: déjà vu {b}")));
        for _ in 0..500 {
            let line = random_code_line(&mut rng);
            // a '#' in generated python-style lines is only a comment in some languages
            let line = if p.line_comment.as_deref() == Some("#") { line } else { line.replace('#', "") };
            let base = normalize_lines(&[line.as_str()], p).map_err(|e| e.to_string())?;
            let noisy = perturb(&mut rng, &line, comment.as_deref());
            let other = normalize_lines(&[noisy.as_str()], p).map_err(|e| e.to_string())?;
            check(base.lines == other.lines, || format!("{name}: {line:?} vs {noisy:?}: {:?} vs {:?}", base.lines, other.lines))?;
            let again = normalize_lines(&base.lines, p).map_err(|e| e.to_string())?;
            check(again.lines == base.lines, || format!("{name}: not idempotent on {line:?}"))?;
        }
    }
    Ok(format!("500 lines x {} profiles", names.len()))
}

fn diff_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..200 {
        let d = random_diff(&mut rng);
        let text = serialize_diff(&d);
        let p1 = parse_unified_diff(&text);
        let p2 = parse_unified_diff(&serialize_diff(&p1));
        check(p1.files == d.files && p2 == p1, || format!("generated diff {i} is not a fixed point"))?;
    }
    let mut golden_files = 0;
    for entry in std::fs::read_dir(golden().join("dataset")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path().join("pr.diff");
        if let Ok(text) = std::fs::read_to_string(&path) {
            let p1 = parse_unified_diff(&text);
            check(serialize_diff(&p1) == text && parse_unified_diff(&serialize_diff(&p1)) == p1, || {
                format!("{} does not round-trip", path.display())
            })?;
            golden_files += 1;
        }
    }
    let (h, _) = HunkHeader::parse("@@ -0,0 +1,31 @@").map_err(|e| e.to_string())?;
    check(h == HunkHeader::new(0, 0, 1, 31) && h.to_string() == "@@ -0,0 +1,31 @@", || format!("header parsed as {h:?}"))?;
    let body: String = (1..=31).map(|i| format!("+line {i}\n")).collect();
    let text = format!("--- /dev/null\n+++ b/new.py\n@@ -0,0 +1,31 @@\n{body}");
    let p = parse_unified_diff(&text);
    check(p.hunk_count() == 1 && p.files[0].hunks[0].added_lines().count() == 31 && serialize_diff(&p) == text, || {
        "31-line creation hunk does not round-trip".into()
    })?;
    Ok(format!("200 generated, {golden_files} golden, creation header"))
}

fn link_regex() -> Outcome {
    const PREFIX: &str = "https://chat.openai.com/share/";
    // real-world share ids
    let cited = [
        "d68981db-26e1-431c-841d-2bb31096c0c9",
        "cf97d3d8-e419-4878-9a2b-87409195340a",
        "51f3aa63-d8aa-4ff7-aca1-608fcf9ab9ee",
        "24432d24-36a7-4d6f-a5c0-d7e5142f68cd",
    ];
    let valid36 = "AbC-0123456789-xyzXYZ-abcdefghijklmn";
    assert_eq!(valid36.len(), 36);
    let cases: Vec<(String, Vec<&str>)> = vec![
        (format!("see {PREFIX}{}", cited[0]), vec![cited[0]]),
        (format!("[link]({PREFIX}{}) and {PREFIX}{}.", cited[1], cited[2]), vec![cited[1], cited[2]]),
        (format!("{PREFIX}{}\n{PREFIX}{}", cited[3], cited[3]), vec![cited[3]]),
        (format!("{PREFIX}{valid36} trailing"), vec![valid36]),
        (format!("{PREFIX}{} end", &cited[0][..35]), vec![]),
        (format!("{PREFIX}{}a end", cited[0]), vec![]),
        (format!("{PREFIX}{}_", cited[0]), vec![cited[0]]),
        (format!("https://chat.openai.com/c/{}", cited[0]), vec![]),
        (format!("https://chatgpt.com/share/{}", cited[0]), vec![]),
        (format!("http://chat.openai.com/share/{}", cited[0]), vec![]),
        (format!("{PREFIX}{}", "x".repeat(72)), vec![]),
        (String::new(), vec![]),
    ];
    let m = LinkMatcher::default();
    for (text, want) in &cases {
        let got: Vec<String> = m.extract(text, LinkSource::Description).into_iter().map(|l| l.conversation_id).collect();
        check(got == *want, || format!("{text:?}: got {got:?}, want {want:?}"))?;
    }
    let current = LinkMatcher::with_current_domain(true);
    let got = current.extract(&format!("https://chatgpt.com/share/{}", cited[0]), LinkSource::Comment);
    check(got.len() == 1, || "current-domain pattern not applied when enabled".into())?;
    let text = format!("é {PREFIX}{}", cited[0]);
    let got = m.extract(&text, LinkSource::Comment);
    check(got.len() == 1 && got[0].offset == 2, || format!("offset {:?}", got.first().map(|l| l.offset)))?;
    Ok(format!("{} fixtures", cases.len() + 2))
}

fn golden_pipeline() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = tmp.path().join("ds");
    copy_dir(&golden().join("dataset"), &ds);
    let out = tmp.path().join("out");
    let code = run(&["--dataset", ds.to_str().unwrap(), "classify", "--output", out.to_str().unwrap()], &env_with(None));
    check(code == 1, || format!("classify exit code {code}, expected 1 for the EE fixture"))?;
    for f in ["report.json", "report.csv"] {
        let got = std::fs::read(out.join(f)).map_err(|e| e.to_string())?;
        let want = std::fs::read(golden().join("expected").join(f)).map_err(|e| e.to_string())?;
        check(got == want, || format!("{f} differs from the golden copy"))?;
    }
    let eval_path = tmp.path().join("eval.json");
    let code = run(
        &[
            "evaluate",
            "--predictions",
            out.join("report.json").to_str().unwrap(),
            "--truth",
            golden().join("labels.csv").to_str().unwrap(),
            "--output",
            eval_path.to_str().unwrap(),
        ],
        &env_with(None),
    );
    check(code == 0, || format!("evaluate exit code {code}"))?;
    let eval: EvaluationReport =
        serde_json::from_str(&std::fs::read_to_string(&eval_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let o = &eval.overall;
    let all = [o.accuracy, o.precision, o.recall, o.f1, eval.agreement];
    check(all.iter().all(|v| *v == 100.0) && eval.cohens_kappa == Some(1.0), || format!("metrics {all:?}"))?;
    let per_class_ok = eval.per_class.iter().all(|c| [c.accuracy, c.precision, c.recall, c.f1].iter().all(|v| *v == 100.0));
    check(per_class_ok, || "per-class metrics below 100".into())?;
    let report = ClassificationReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for pr in &report.pull_requests {
        seen.insert(pr.label.to_string());
        seen.extend(pr.hunks.iter().map(|h| h.label.to_string()));
    }
    check(["PA", "PN", "NE", "CL", "CC", "EE"].iter().all(|l| seen.contains(*l)), || format!("labels covered: {seen:?}"))?;
    within(Duration::from_secs(5), start.elapsed())?;
    Ok(format!("byte-identical, evaluation 100% over {} PRs", eval.total))
}

fn metrics_fixtures() -> Outcome {
    use PrLabel::*;
    let near = |a: f64, b: f64| (a - b).abs() <= 0.1;
    let e = evaluate(&[PA, PN, PN, NE], &[PA, PA, PN, NE]).map_err(|e| e.to_string())?;
    check(e.confusion == [[1, 1, 0], [0, 1, 0], [0, 0, 1]], || format!("confusion {:?}", e.confusion))?;
    let pa = &e.per_class[0];
    check(near(pa.precision, 100.0) && near(pa.recall, 50.0) && near(pa.f1, 66.7), || format!("PA {pa:?}"))?;
    let pn = &e.per_class[1];
    check(near(pn.precision, 50.0) && near(pn.recall, 100.0), || format!("PN {pn:?}"))?;
    check(near(e.agreement, 75.0), || format!("agreement {}", e.agreement))?;
    // (3/4 - 5/16) / (1 - 5/16)
    let hand_kappa = (0.75 - 0.3125) / 0.6875;
    check(e.cohens_kappa.is_some_and(|k| near(k, hand_kappa)), || format!("kappa {:?}", e.cohens_kappa))?;

    let z = evaluate(&[PA, PA, PA], &[PA, PN, NE]).map_err(|e| e.to_string())?;
    check(near(z.agreement, 33.3), || format!("accuracy {}", z.agreement))?;
    check(z.cohens_kappa.is_some_and(|k| near(k, 0.0)), || format!("kappa {:?}", z.cohens_kappa))?;
    let k = cohens_kappa(&[PA, PA, PA], &[PA, PN, NE]).map_err(|e| e.to_string())?;
    check(near(k, 0.0), || format!("kappa {k}"))?;
    Ok(format!("kappa {:.3} and {:.1}, accuracy {:.1}%", e.cohens_kappa.unwrap(), k, z.agreement))
}

fn scale_smoke() -> Outcome {
    let corpus = synthetic_corpus(&CorpusSpec::new(10, 285, 645, 3486));
    let snippets: usize = corpus.iter().flat_map(|p| &p.conversations).filter_map(|c| c.snippets.as_ref().ok()).map(Vec::len).sum();
    let hunks: usize = corpus.iter().map(|p| p.diff.hunk_count()).sum();
    check(snippets == 645 && hunks == 3486, || format!("corpus has {snippets} snippets, {hunks} hunks"))?;
    let settings = Settings::default();
    let start = Instant::now();
    let single = classify_corpus(&corpus, &settings, 1);
    let elapsed = start.elapsed();
    within(Duration::from_secs(60), elapsed)?;
    let parallel = classify_corpus(&corpus, &settings, 8);
    check(parallel == single, || "parallelism 8 changed the outcome".into())?;
    let again = classify_corpus(&corpus, &settings, 8);
    check(again == single, || "repeated parallel run changed the outcome".into())?;
    Ok(format!("{snippets} snippets x {hunks} hunks in {elapsed:.2?} single-threaded, identical at 8 threads"))
}

struct Refusing;

impl Transport for Refusing {
    fn send(&self, _: &HttpRequest) -> Result<patchprov::acquire::HttpResponse, TransportError> {
        Err(TransportError::Network("unreachable".into()))
    }
}

fn network_hygiene() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds = tmp.path().join("ds");
    copy_dir(&golden().join("dataset"), &ds);
    let ds = ds.to_str().unwrap();
    let report = golden().join("expected/report.json");
    let labels = golden().join("labels.csv");
    let paths: Vec<String> = ["links.json", "reports", "summary.json", "eval.json"]
        .iter()
        .map(|f| tmp.path().join(f).to_string_lossy().into_owned())
        .collect();
    let (report, labels) = (report.to_str().unwrap(), labels.to_str().unwrap());
    let runs: Vec<(&str, Vec<&str>, Option<&str>)> = vec![
        ("mine", vec!["--dataset", ds, "mine", "--from", "2023-05-01", "--to", "2023-06-30"], Some("mine_two_pages.json")),
        ("fetch", vec!["--dataset", ds, "fetch", "acme/api#9"], Some("fetch_three_files.json")),
        ("extract-links", vec!["--dataset", ds, "--current-share-domain", "extract-links", "--output", &paths[0]], None),
        ("classify", vec!["--dataset", ds, "classify", "--output", &paths[1]], None),
        ("report", vec!["report", "--input", report, "--output", &paths[2]], None),
        ("evaluate", vec!["evaluate", "--predictions", report, "--truth", labels, "--output", &paths[3]], None),
    ];
    let mut total = 0;
    for (name, args, fixture) in runs {
        let spy = Spy::new(fixture.map(replay));
        run(&args, &env_with(Some(spy.clone())));
        let hosts = spy.hosts();
        total += hosts.len();
        let vendor: Vec<&String> = hosts.iter().filter(|h| VENDOR_HOSTS.iter().any(|v| h.ends_with(v))).collect();
        check(vendor.is_empty(), || format!("{name} contacted {vendor:?}"))?;
        check(hosts.iter().all(|h| h == "api.github.com"), || format!("{name} contacted {hosts:?}"))?;
    }
    let guard = HostGuard::new(Refusing, ["api.github.com".to_string(), "chat.openai.com".to_string()]);
    for host in VENDOR_HOSTS {
        let r = guard.send(&HttpRequest::get(format!("https://{host}/share/x"), "*/*"));
        check(matches!(r, Err(TransportError::Forbidden(_))), || format!("{host} not refused"))?;
    }
    Ok(format!("6 subcommands, {total} requests, none to the vendor"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("n-monotonicity", n_monotonicity),
        ("aggregation truth table", aggregation_table),
        ("containment properties", containment_properties),
        ("normalization", normalization),
        ("diff round trip", diff_round_trip),
        ("link regex", link_regex),
        ("golden pipeline", golden_pipeline),
        ("metrics fixtures", metrics_fixtures),
        ("scale smoke", scale_smoke),
        ("network hygiene", network_hygiene),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {:>2} {name}: panicked", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
