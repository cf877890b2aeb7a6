//! Runs a search and a fetch against canned responses instead of the network.

use std::sync::Arc;

use patchprov::acquire::{
    FetchPolicy, GitHubClient, HostGuard, HttpRequest, HttpResponse, Interaction, ReplayTransport, DEFAULT_API_BASE,
};
use patchprov::conversation::LinkMatcher;
use patchprov::pipeline::PrId;

fn canned(url: &str, accept: &str, body: &str) -> Interaction {
    Interaction {
        request: HttpRequest::get(url, accept),
        response: HttpResponse::new(200, body),
    }
}

fn main() {
    let share = "https://chat.openai.com/share/d68981db-26e1-431c-841d-2bb31096c0c9";
    let json = "application/vnd.github+json";
    let repo = format!("{DEFAULT_API_BASE}/repos/octo/demo");
    let search = format!(
        "{DEFAULT_API_BASE}/search/issues?q=%22chat.openai.com%2Fshare%22+is%3Apr&per_page=100"
    );
    let hits = r#"{"items":[{"number":1,"repository_url":"https://api.github.com/repos/octo/demo","pull_request":{}}]}"#;
    let pr = format!(r#"{{"state":"closed","merged_at":"2023-06-01T00:00:00Z","title":"Loader","body":"from {share}"}}"#);
    let transport = ReplayTransport::new([
        canned(&search, json, hits),
        canned(&format!("{repo}/pulls/1"), json, &pr),
        canned(&format!("{repo}/pulls/1"), "application/vnd.github.diff", "diff --git a/a.py b/a.py\n"),
        canned(&format!("{repo}/issues/1/comments?per_page=100"), json, "[]"),
        canned(&format!("{repo}/pulls/1/comments?per_page=100"), json, "[]"),
    ]);
    let guarded = HostGuard::new(transport, ["api.github.com".to_string()]);
    let client = GitHubClient::new(Arc::new(guarded), FetchPolicy::offline(), LinkMatcher::default());

    match client.search_candidate_prs("chat.openai.com/share", None) {
        Ok(found) => println!("search: {:?} partial={}", found.hits.iter().map(ToString::to_string).collect::<Vec<_>>(), found.partial),
        Err(e) => println!("search failed: {e}"),
    }
    match client.fetch_pull_request(&PrId::new("octo", "demo", 1)) {
        Ok(f) => println!("{} merged={} links={:?}", f.record.id(), f.record.merged(), f.record.share_links.iter().map(|l| &l.conversation_id).collect::<Vec<_>>()),
        Err(e) => println!("fetch failed: {e}"),
    }
}
