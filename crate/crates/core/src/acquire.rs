//! Pull-request acquisition from the code host's REST API.
//!
//! All HTTP goes through [`Transport`]. [`ReplayTransport`] serves recorded
//! interactions so the whole pipeline can run offline, and every client
//! wraps its transport in a [`HostGuard`] that refuses anything but the
//! configured API host. Conversation share pages are never fetched.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use url::Url;

use crate::conversation::{dedup_links, LinkMatcher, LinkSource, ShareLink};
use crate::pipeline::PrId;

pub const DEFAULT_API_BASE: &str = "https://api.github.com";
const JSON_MEDIA: &str = "application/vnd.github+json";
const DIFF_MEDIA: &str = "application/vnd.github.diff";

/// Hosts that are refused regardless of configuration.
pub const VENDOR_HOSTS: &[&str] = &["chat.openai.com", "chatgpt.com", "openai.com"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("network failure: {0}")]
    Network(String),
    #[error("request to {0} refused by host policy")]
    Forbidden(String),
    #[error("no recorded response for {0}")]
    NoFixture(String),
}

#[derive(Debug, Error)]
pub enum AcquireError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rate limited after {attempts} attempts: {url}")]
    RateLimited { url: String, attempts: u32 },
    #[error("request budget of {0} exhausted")]
    BudgetExhausted(u32),
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("unexpected response from {url}: {message}")]
    Decode { url: String, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub accept: String,
    /// Sent but never recorded.
    #[serde(skip)]
    pub authorization: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>, accept: &str) -> Self {
        HttpRequest {
            method: "GET".into(),
            url: url.into(),
            accept: accept.into(),
            authorization: None,
        }
    }

    fn key(&self) -> String {
        format!("{} {} [{}]", self.method, self.url, self.accept)
    }

    pub fn host(&self) -> Option<String> {
        Url::parse(&self.url).ok()?.host_str().map(str::to_ascii_lowercase)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    /// Lowercased header names.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body: String,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        HttpResponse {
            status,
            headers: BTreeMap::new(),
            body: body.into(),
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.insert(name.to_ascii_lowercase(), value.to_string());
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    fn is_rate_limited(&self) -> bool {
        self.status == 429
            || (self.status == 403
                && (self.header("x-ratelimit-remaining") == Some("0")
                    || self.body.to_ascii_lowercase().contains("rate limit")))
    }

    /// Target of a `Link: <...>; rel="next"` header.
    fn next_link(&self) -> Option<String> {
        self.header("link")?.split(',').find_map(|part| {
            let (url, rel) = part.split_once(';')?;
            rel.contains("rel=\"next\"")
                .then(|| url.trim().trim_start_matches('<').trim_end_matches('>').to_string())
        })
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub request: HttpRequest,
    pub response: HttpResponse,
}

/// Serves recorded responses. Repeated requests consume the recorded
/// responses for that request in order, so retry sequences can be scripted.
#[derive(Debug, Default)]
pub struct ReplayTransport {
    queues: Mutex<HashMap<String, VecDeque<HttpResponse>>>,
}

impl ReplayTransport {
    pub fn new(interactions: impl IntoIterator<Item = Interaction>) -> Self {
        let mut queues: HashMap<String, VecDeque<HttpResponse>> = HashMap::new();
        for i in interactions {
            queues.entry(i.request.key()).or_default().push_back(i.response);
        }
        ReplayTransport {
            queues: Mutex::new(queues),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(ReplayTransport::new(serde_json::from_str::<Vec<Interaction>>(text)?))
    }

    pub fn load(path: &Path) -> Result<Self, AcquireError> {
        let text = std::fs::read_to_string(path)?;
        ReplayTransport::from_json(&text).map_err(|e| AcquireError::Decode {
            url: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

impl Transport for ReplayTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let key = request.key();
        self.queues
            .lock()
            .expect("replay lock")
            .get_mut(&key)
            .and_then(VecDeque::pop_front)
            .ok_or(TransportError::NoFixture(key))
    }
}

/// Records every exchange with the wrapped transport.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<Interaction>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn interactions(&self) -> Vec<Interaction> {
        self.log.lock().expect("record lock").clone()
    }

    pub fn save(&self, path: &Path) -> Result<(), AcquireError> {
        let text = serde_json::to_string_pretty(&self.interactions()).map_err(|e| AcquireError::Decode {
            url: path.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(request)?;
        let mut recorded = request.clone();
        recorded.authorization = None;
        self.log.lock().expect("record lock").push(Interaction {
            request: recorded,
            response: response.clone(),
        });
        Ok(response)
    }
}

/// Blocking HTTPS transport.
pub struct LiveTransport {
    agent: ureq::Agent,
}

impl Default for LiveTransport {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .user_agent(concat!("patchprov/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        LiveTransport { agent }
    }
}

impl Transport for LiveTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut req = self
            .agent
            .get(&request.url)
            .header("Accept", &request.accept)
            .header("X-GitHub-Api-Version", "2022-11-28");
        if let Some(auth) = &request.authorization {
            req = req.header("Authorization", auth);
        }
        let mut resp = req.call().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpResponse { status, headers, body })
    }
}

/// Refuses requests to hosts outside the allowlist, and always to the
/// AI vendor's domains.
pub struct HostGuard<T> {
    inner: T,
    allowed: Vec<String>,
}

impl<T: Transport> HostGuard<T> {
    pub fn new(inner: T, allowed: impl IntoIterator<Item = String>) -> Self {
        HostGuard {
            inner,
            allowed: allowed.into_iter().map(|h| h.to_ascii_lowercase()).collect(),
        }
    }

    pub fn permits(&self, host: &str) -> bool {
        let vendor = VENDOR_HOSTS
            .iter()
            .any(|v| host == *v || host.ends_with(&format!(".{v}")));
        !vendor && self.allowed.iter().any(|a| a == host)
    }
}

impl<T: Transport> Transport for HostGuard<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        match request.host() {
            Some(host) if self.permits(&host) => self.inner.send(request),
            host => Err(TransportError::Forbidden(host.unwrap_or_else(|| request.url.clone()))),
        }
    }
}

/// Shared request counter over a fixed accounting window.
#[derive(Debug)]
pub struct RateBudget {
    limit: u32,
    window: Duration,
    state: Mutex<BudgetState>,
}

#[derive(Debug)]
struct BudgetState {
    window_start: Instant,
    used: u32,
    issued_total: u64,
}

impl RateBudget {
    pub fn new(limit: u32, window: Duration) -> Self {
        RateBudget {
            limit,
            window,
            state: Mutex::new(BudgetState {
                window_start: Instant::now(),
                used: 0,
                issued_total: 0,
            }),
        }
    }

    pub fn per_hour(limit: u32) -> Self {
        RateBudget::new(limit, Duration::from_secs(3600))
    }

    /// Takes one request slot, or fails if the window is used up.
    pub fn acquire(&self) -> Result<(), AcquireError> {
        let mut s = self.state.lock().expect("budget lock");
        if s.window_start.elapsed() >= self.window {
            s.window_start = Instant::now();
            s.used = 0;
        }
        if s.used >= self.limit {
            return Err(AcquireError::BudgetExhausted(self.limit));
        }
        s.used += 1;
        s.issued_total += 1;
        Ok(())
    }

    pub fn issued(&self) -> u64 {
        self.state.lock().expect("budget lock").issued_total
    }
}

/// Token that never shows up in debug output.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Secret(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone)]
pub struct FetchPolicy {
    pub auth_token: Option<Secret>,
    /// Requests per hour.
    pub rate_limit_budget: u32,
    pub max_attempts: u32,
    /// Delay before retry `i` is `backoff[min(i, len - 1)]`.
    pub backoff: Vec<Duration>,
    pub prefer_full_diff: bool,
    pub scan_commits: bool,
    pub api_base: String,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            auth_token: None,
            rate_limit_budget: 5000,
            max_attempts: 3,
            backoff: vec![Duration::from_secs(5), Duration::from_secs(30), Duration::from_secs(120)],
            prefer_full_diff: true,
            scan_commits: false,
            api_base: DEFAULT_API_BASE.into(),
        }
    }
}

impl FetchPolicy {
    /// Policy for recorded fixtures: no waiting between retries.
    pub fn offline() -> Self {
        FetchPolicy {
            backoff: vec![Duration::ZERO],
            ..FetchPolicy::default()
        }
    }

    fn delay(&self, retry: usize) -> Duration {
        self.backoff
            .get(retry.min(self.backoff.len().saturating_sub(1)))
            .copied()
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrState {
    Merged,
    Closed,
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequestRecord {
    pub owner: String,
    pub repo: String,
    pub number: u64,
    pub state: PrState,
    pub merged_at: Option<String>,
    pub title: String,
    pub body: String,
    pub comment_texts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub commit_messages: Vec<String>,
    pub diff_path: String,
    /// Only a partial diff could be obtained.
    #[serde(default)]
    pub truncated: bool,
    pub share_links: Vec<ShareLink>,
}

impl PullRequestRecord {
    pub fn id(&self) -> PrId {
        PrId::new(&self.owner, &self.repo, self.number)
    }

    pub fn merged(&self) -> bool {
        self.state == PrState::Merged
    }
}

/// Share links in a record's title, body, comments and commit messages,
/// first occurrence of each id kept.
pub fn extract_links_from_record(record: &PullRequestRecord, matcher: &LinkMatcher) -> Vec<ShareLink> {
    let mut links = matcher.extract(&record.title, LinkSource::Description);
    links.extend(matcher.extract(&record.body, LinkSource::Description));
    for c in &record.comment_texts {
        links.extend(matcher.extract(c, LinkSource::Comment));
    }
    for m in &record.commit_messages {
        links.extend(matcher.extract(m, LinkSource::CommitMessage));
    }
    dedup_links(links)
}

/// A fetched pull request: the record plus the raw diff text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedPullRequest {
    pub record: PullRequestRecord,
    pub diff_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub hits: Vec<PrId>,
    /// The request budget ran out before the last page.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateRange {
    pub from: String,
    pub to: String,
}

pub struct GitHubClient {
    transport: HostGuard<Arc<dyn Transport>>,
    policy: FetchPolicy,
    budget: Arc<RateBudget>,
    matcher: LinkMatcher,
}

impl GitHubClient {
    pub fn new(transport: Arc<dyn Transport>, policy: FetchPolicy, matcher: LinkMatcher) -> Self {
        let budget = Arc::new(RateBudget::per_hour(policy.rate_limit_budget));
        GitHubClient::with_budget(transport, policy, matcher, budget)
    }

    pub fn with_budget(
        transport: Arc<dyn Transport>,
        policy: FetchPolicy,
        matcher: LinkMatcher,
        budget: Arc<RateBudget>,
    ) -> Self {
        let host = Url::parse(&policy.api_base)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .unwrap_or_default();
        GitHubClient {
            transport: HostGuard::new(transport, [host]),
            policy,
            budget,
            matcher,
        }
    }

    pub fn budget(&self) -> &RateBudget {
        &self.budget
    }

    fn request(&self, url: String, accept: &str) -> HttpRequest {
        let mut req = HttpRequest::get(url, accept);
        req.authorization = self
            .policy
            .auth_token
            .as_ref()
            .map(|t| format!("Bearer {}", t.expose()));
        req
    }

    /// Sends with retries on rate limiting and transport failures.
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, AcquireError> {
        let attempts = self.policy.max_attempts.max(1);
        let mut last_err = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.policy.delay(attempt as usize - 1));
            }
            self.budget.acquire()?;
            match self.transport.send(req) {
                Ok(resp) if resp.is_rate_limited() => {
                    log::warn!("rate limited on {} (attempt {})", req.url, attempt + 1);
                    last_err = Some(AcquireError::RateLimited {
                        url: req.url.clone(),
                        attempts: attempt + 1,
                    });
                }
                Ok(resp) if resp.status >= 500 => {
                    last_err = Some(AcquireError::Http {
                        status: resp.status,
                        url: req.url.clone(),
                    });
                }
                Ok(resp) if resp.status == 404 => return Err(AcquireError::NotFound(req.url.clone())),
                Ok(resp) if !(200..300).contains(&resp.status) => {
                    return Err(AcquireError::Http {
                        status: resp.status,
                        url: req.url.clone(),
                    })
                }
                Ok(resp) => return Ok(resp),
                Err(e @ TransportError::Network(_)) => last_err = Some(e.into()),
                Err(e) => return Err(e.into()),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    fn json(&self, url: String) -> Result<(Value, HttpResponse), AcquireError> {
        let resp = self.send(&self.request(url.clone(), JSON_MEDIA))?;
        let v = serde_json::from_str(&resp.body).map_err(|e| AcquireError::Decode {
            url,
            message: e.to_string(),
        })?;
        Ok((v, resp))
    }

    /// Follows `Link: rel="next"` until exhausted, collecting array items.
    fn paged(&self, first: String) -> Result<Vec<Value>, AcquireError> {
        let mut items = Vec::new();
        let mut next = Some(first);
        while let Some(url) = next {
            let (v, resp) = self.json(url.clone())?;
            match v {
                Value::Array(a) => items.extend(a),
                _ => {
                    return Err(AcquireError::Decode {
                        url,
                        message: "expected an array".into(),
                    })
                }
            }
            next = resp.next_link();
        }
        Ok(items)
    }

    fn repo_url(&self, id: &PrId) -> String {
        format!("{}/repos/{}/{}", self.policy.api_base, id.owner, id.repo)
    }

    /// Searches pull requests mentioning `keyword` created within `range`.
    pub fn search_candidate_prs(&self, keyword: &str, range: Option<&DateRange>) -> Result<SearchOutcome, AcquireError> {
        let mut q = format!("\"{keyword}\" is:pr");
        if let Some(r) = range {
            q.push_str(&format!(" created:{}..{}", r.from, r.to));
        }
        let mut url = Url::parse(&format!("{}/search/issues", self.policy.api_base)).map_err(|e| AcquireError::Decode {
            url: self.policy.api_base.clone(),
            message: e.to_string(),
        })?;
        url.query_pairs_mut().append_pair("q", &q).append_pair("per_page", "100");

        let mut hits: Vec<PrId> = Vec::new();
        let mut next = Some(url.to_string());
        while let Some(page) = next {
            let (v, resp) = match self.json(page) {
                Ok(x) => x,
                Err(AcquireError::BudgetExhausted(_)) => return Ok(SearchOutcome { hits, partial: true }),
                Err(e) => return Err(e),
            };
            for item in v["items"].as_array().into_iter().flatten() {
                if item.get("pull_request").is_none() {
                    continue;
                }
                let repo_url = item["repository_url"].as_str().unwrap_or_default();
                let mut parts = repo_url.rsplit('/');
                let (Some(repo), Some(owner), Some(number)) = (parts.next(), parts.next(), item["number"].as_u64()) else {
                    continue;
                };
                let id = PrId::new(owner, repo, number);
                if !hits.contains(&id) {
                    hits.push(id);
                }
            }
            next = resp.next_link();
        }
        Ok(SearchOutcome { hits, partial: false })
    }

    /// Fetches metadata, discussion and diff of one pull request.
    pub fn fetch_pull_request(&self, id: &PrId) -> Result<FetchedPullRequest, AcquireError> {
        let pr_url = format!("{}/pulls/{}", self.repo_url(id), id.number);
        let (meta, _) = self.json(pr_url.clone())?;
        let text = |k: &str| meta[k].as_str().unwrap_or_default().to_string();
        let merged_at = meta["merged_at"].as_str().map(str::to_string);
        let state = match (merged_at.is_some(), meta["state"].as_str()) {
            (true, _) => PrState::Merged,
            (false, Some("closed")) => PrState::Closed,
            _ => PrState::Open,
        };

        let (diff_text, truncated) = self.fetch_diff(id, &pr_url)?;

        let mut comment_texts = Vec::new();
        for endpoint in [
            format!("{}/issues/{}/comments?per_page=100", self.repo_url(id), id.number),
            format!("{}/pulls/{}/comments?per_page=100", self.repo_url(id), id.number),
        ] {
            for c in self.paged(endpoint)? {
                comment_texts.push(c["body"].as_str().unwrap_or_default().to_string());
            }
        }
        let mut commit_messages = Vec::new();
        if self.policy.scan_commits {
            for c in self.paged(format!("{pr_url}/commits?per_page=100"))? {
                commit_messages.push(c["commit"]["message"].as_str().unwrap_or_default().to_string());
            }
        }

        let mut record = PullRequestRecord {
            owner: id.owner.clone(),
            repo: id.repo.clone(),
            number: id.number,
            state,
            merged_at,
            title: text("title"),
            body: text("body"),
            comment_texts,
            commit_messages,
            diff_path: crate::dataset::DIFF_FILE.into(),
            truncated,
            share_links: vec![],
        };
        record.share_links = extract_links_from_record(&record, &self.matcher);
        Ok(FetchedPullRequest { record, diff_text })
    }

    /// Raw diff media type first; the per-file listing, whose patches the
    /// host truncates for large files, as the fallback.
    fn fetch_diff(&self, id: &PrId, pr_url: &str) -> Result<(String, bool), AcquireError> {
        if self.policy.prefer_full_diff {
            match self.send(&self.request(pr_url.to_string(), DIFF_MEDIA)) {
                Ok(resp) => return Ok((resp.body, false)),
                Err(AcquireError::Http { status: 406 | 422, .. }) => {
                    log::warn!("{id}: full diff unavailable, falling back to file patches");
                }
                Err(e) => return Err(e),
            }
        }
        let files = self.paged(format!("{pr_url}/files?per_page=100"))?;
        let mut text = String::new();
        let mut missing = !self.policy.prefer_full_diff && files.is_empty();
        for f in &files {
            let name = f["filename"].as_str().unwrap_or_default();
            let old = f["previous_filename"].as_str().unwrap_or(name);
            let status = f["status"].as_str().unwrap_or_default();
            text.push_str(&format!("diff --git a/{old} b/{name}\n"));
            let Some(patch) = f["patch"].as_str() else {
                missing = true;
                continue;
            };
            let old_side = if status == "added" { "/dev/null".to_string() } else { format!("a/{old}") };
            let new_side = if status == "removed" { "/dev/null".to_string() } else { format!("b/{name}") };
            text.push_str(&format!("--- {old_side}\n+++ {new_side}\n{patch}\n"));
        }
        Ok((text, self.policy.prefer_full_diff || missing))
    }
}
