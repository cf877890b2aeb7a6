mod common;

use std::sync::Arc;

use common::{copy_dir, env_with, golden, replay, run, Spy};
use patchprov::acquire::VENDOR_HOSTS;

fn is_vendor(host: &str) -> bool {
    VENDOR_HOSTS.iter().any(|v| host == *v || host.ends_with(&format!(".{v}")))
}

/// Runs one subcommand against a spy and returns the hosts it was asked for.
fn hosts_for(args: &[&str], fixture: Option<&str>) -> Vec<String> {
    let spy = Spy::new(fixture.map(replay));
    run(args, &env_with(Some(spy.clone())));
    spy.hosts()
}

#[test]
fn no_subcommand_contacts_the_vendor() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    copy_dir(&golden().join("dataset"), &ds);
    let ds = ds.to_str().unwrap();
    let report = golden().join("expected/report.json");
    let report = report.to_str().unwrap();
    let labels = golden().join("labels.csv");
    let labels = labels.to_str().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let runs: Vec<(Vec<&str>, Option<&str>, bool)> = vec![
        (vec!["--dataset", ds, "mine", "--from", "2023-05-01", "--to", "2023-06-30"], Some("mine_two_pages.json"), true),
        (vec!["--dataset", ds, "fetch", "acme/api#9", "carol/lib#3"], Some("fetch_three_files.json"), true),
        (vec!["--dataset", ds, "--current-share-domain", "extract-links", "--output", out], None, false),
        (vec!["--dataset", ds, "classify", "--output", out], None, false),
        (vec!["report", "--input", report, "--output", out], None, false),
        (vec!["evaluate", "--predictions", report, "--truth", labels, "--output", out], None, false),
    ];
    for (args, fixture, networked) in runs {
        let hosts = hosts_for(&args, fixture);
        assert!(hosts.iter().all(|h| !is_vendor(h)), "{args:?} contacted {hosts:?}");
        assert!(hosts.iter().all(|h| h == "api.github.com"), "{args:?} contacted {hosts:?}");
        assert_eq!(!hosts.is_empty(), networked, "{args:?}");
    }
}

#[test]
fn vendor_api_base_is_refused_before_the_transport() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "api_base = \"https://chat.openai.com\"\n").unwrap();
    let ds = tmp.path().join("ds");
    let spy = Spy::new(None);
    let code = run(
        &["--config", cfg.to_str().unwrap(), "--dataset", ds.to_str().unwrap(), "fetch", "o/r#1"],
        &env_with(Some(spy.clone() as Arc<dyn patchprov::acquire::Transport>)),
    );
    assert_ne!(code, 0);
    assert_eq!(spy.count(), 0);
}

#[test]
fn share_links_in_fetched_records_are_not_followed() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let spy = Spy::new(Some(replay("fetch_three_files.json")));
    run(&["--dataset", ds.to_str().unwrap(), "fetch", "acme/api#9"], &env_with(Some(spy.clone())));
    let seen = spy.seen.lock().unwrap();
    assert_eq!(seen.len(), 4);
    assert!(seen.iter().all(|r| !r.url.contains("/share/")));
}
