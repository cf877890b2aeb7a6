//! Command-line front end.
//!
//! Settings resolve in order: flags, then `PATCHPROV_*` environment
//! variables, then the TOML file given by `--config` (or
//! `PATCHPROV_CONFIG`), then defaults. Exit status is 0 on success, 1 when
//! some pull requests failed, and 2 on fatal errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquire::{
    extract_links_from_record, AcquireError, DateRange, FetchPolicy, GitHubClient, LiveTransport, RecordingTransport,
    ReplayTransport, Secret, Transport, DEFAULT_API_BASE,
};
use crate::classify::{PrLabel, UnknownLabel};
use crate::conversation::{LinkMatcher, LinkSource, ShareLink};
use crate::dataset::{Dataset, DatasetError};
use crate::normalize::{NormalizeError, Registry, REGISTRY_VERSION};
use crate::pipeline::{classify_corpus, PrId, PrOutcome, Settings};
use crate::report::{emit_report, evaluate, ClassificationReport, Format, ReportError, ReportSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

const DEFAULT_KEYWORD: &str = "chat.openai.com/share";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Registry(#[from] NormalizeError),
    #[error(transparent)]
    Acquire(#[from] AcquireError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {message}")]
    Labels { path: PathBuf, message: String },
    #[error("{path}: {label}")]
    UnknownLabel { path: PathBuf, label: UnknownLabel },
    #[error("predictions and reference labels do not cover the same pull requests: {0}")]
    Alignment(String),
    #[error("not a pull request reference: {0}")]
    BadPrRef(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "patchprov", version, about = "Detect AI-conversation code applied in pull requests")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset root directory.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Gram size for matching.
    #[arg(long, global = true)]
    pub ngram: Option<usize>,
    /// Shared grams needed for a hunk to count as applied.
    #[arg(long, global = true)]
    pub match_threshold: Option<usize>,
    /// Worker threads for classification.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// TOML file of file-type profiles layered over the built-in ones.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Also recognize share links on the newer chat domain.
    #[arg(long, global = true)]
    pub current_share_domain: bool,
    /// Serve API requests from a recorded interaction file instead of the network.
    #[arg(long, global = true, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Record live API interactions to this file.
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search the code host for pull requests mentioning share links and store them.
    Mine {
        #[arg(long, default_value = DEFAULT_KEYWORD)]
        keyword: String,
        /// Earliest creation date, YYYY-MM-DD.
        #[arg(long, requires = "to")]
        from: Option<String>,
        /// Latest creation date, YYYY-MM-DD.
        #[arg(long, requires = "from")]
        to: Option<String>,
        /// Stop after this many candidates.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Fetch specific pull requests (`owner/repo#N` or a pull request URL).
    Fetch {
        #[arg(required = true)]
        prs: Vec<String>,
    },
    /// Re-extract share links from stored records, or from a text file.
    ExtractLinks {
        /// Scan this file instead of the dataset.
        #[arg(long)]
        text: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        output: PathBuf,
    },
    /// Classify every pull request in the dataset.
    Classify {
        /// Directory for report.json and report.csv. Defaults to `<dataset>/reports`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render corpus statistics from a classification report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
        #[arg(long, default_value = "-")]
        output: PathBuf,
        /// Render the per-PR table instead of the summary.
        #[arg(long)]
        per_pr: bool,
    },
    /// Compare predicted labels with reference labels.
    Evaluate {
        /// Classification report (.json) or label CSV.
        #[arg(long)]
        predictions: PathBuf,
        /// Label CSV with `owner,repo,number,label` or `pr,label` columns.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
        #[arg(long, default_value = "-")]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
        }
    }
}

/// Contents of the `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset_root: Option<PathBuf>,
    pub ngram: Option<usize>,
    pub match_threshold: Option<usize>,
    pub parallelism: Option<usize>,
    pub filetype_registry: Option<PathBuf>,
    pub current_share_domain: Option<bool>,
    pub rate_limit_budget: Option<u32>,
    pub scan_commits: Option<bool>,
    pub api_base: Option<String>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub ngram: usize,
    pub match_threshold: usize,
    pub parallelism: usize,
    pub filetype_registry: Option<PathBuf>,
    pub current_share_domain: bool,
    pub auth_token: Option<Secret>,
    pub rate_limit_budget: u32,
    pub scan_commits: bool,
    pub api_base: String,
}

/// Process surroundings, injectable for tests.
#[derive(Clone, Default)]
pub struct Environment {
    pub vars: BTreeMap<String, String>,
    /// Replaces every network transport when set.
    pub transport: Option<Arc<dyn Transport>>,
}

impl Environment {
    pub fn from_process() -> Self {
        Environment {
            vars: std::env::vars().collect(),
            transport: None,
        }
    }

    fn var(&self, key: &str) -> Option<&str> {
        self.vars.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.var(key)
            .map(|v| v.parse().map_err(|_| CliError::Config(format!("{key}={v} is not valid"))))
            .transpose()
    }
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs, env: &Environment) -> Result<Self, CliError> {
        let file = match args.config.clone().or_else(|| env.var("PATCHPROV_CONFIG").map(PathBuf::from)) {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let ngram = args.ngram.or(env.parsed("PATCHPROV_NGRAM")?).or(file.ngram).unwrap_or(1);
        let match_threshold = args
            .match_threshold
            .or(env.parsed("PATCHPROV_MATCH_THRESHOLD")?)
            .or(file.match_threshold)
            .unwrap_or(1);
        let parallelism = args
            .parallelism
            .or(env.parsed("PATCHPROV_PARALLELISM")?)
            .or(file.parallelism)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if ngram == 0 || match_threshold == 0 || parallelism == 0 {
            return Err(CliError::Config("ngram, match threshold and parallelism must be positive".into()));
        }
        Ok(RunConfig {
            dataset_root: args
                .dataset
                .clone()
                .or_else(|| env.var("PATCHPROV_DATASET").map(PathBuf::from))
                .or(file.dataset_root)
                .unwrap_or_else(|| PathBuf::from("dataset")),
            ngram,
            match_threshold,
            parallelism,
            filetype_registry: args
                .registry
                .clone()
                .or_else(|| env.var("PATCHPROV_REGISTRY").map(PathBuf::from))
                .or(file.filetype_registry),
            current_share_domain: args.current_share_domain
                || env.parsed("PATCHPROV_CURRENT_SHARE_DOMAIN")?.or(file.current_share_domain).unwrap_or(false),
            auth_token: env.var("AUTH_TOKEN").map(Secret::new),
            rate_limit_budget: env
                .parsed("PATCHPROV_RATE_LIMIT_BUDGET")?
                .or(file.rate_limit_budget)
                .unwrap_or(5000),
            scan_commits: file.scan_commits.unwrap_or(false),
            api_base: file.api_base.unwrap_or_else(|| DEFAULT_API_BASE.into()),
        })
    }

    pub fn registry(&self) -> Result<Registry, CliError> {
        Ok(match &self.filetype_registry {
            Some(p) => Registry::load_overrides(p)?,
            None => Registry::builtin(),
        })
    }

    pub fn matcher(&self) -> LinkMatcher {
        LinkMatcher::with_current_domain(self.current_share_domain)
    }

    fn fetch_policy(&self, offline: bool) -> FetchPolicy {
        let base = if offline { FetchPolicy::offline() } else { FetchPolicy::default() };
        FetchPolicy {
            auth_token: self.auth_token.clone(),
            rate_limit_budget: self.rate_limit_budget,
            scan_commits: self.scan_commits,
            api_base: self.api_base.clone(),
            ..base
        }
    }
}

/// Parses `owner/repo#N`, `owner/repo/N` or `https://github.com/owner/repo/pull/N`.
pub fn parse_pr_ref(s: &str) -> Result<PrId, CliError> {
    let bad = || CliError::BadPrRef(s.to_string());
    let trimmed = s
        .trim()
        .trim_start_matches("https://")
        .trim_start_matches("http://")
        .trim_start_matches("github.com/")
        .trim_end_matches('/');
    let (path, number) = trimmed
        .rsplit_once('#')
        .or_else(|| trimmed.rsplit_once('/'))
        .ok_or_else(bad)?;
    let number: u64 = number.parse().map_err(|_| bad())?;
    let path = path.strip_suffix("/pull").or(path.strip_suffix("/pulls")).unwrap_or(path);
    match path.split('/').collect::<Vec<_>>()[..] {
        [owner, repo] if !owner.is_empty() && !repo.is_empty() => Ok(PrId::new(owner, repo, number)),
        _ => Err(bad()),
    }
}

/// Runs the tool with the process arguments and environment.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &Environment::from_process())
}

/// Runs the tool with explicit arguments and environment.
pub fn run_with<I, T>(args: I, env: &Environment) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    match execute(cli, env) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FATAL
        }
    }
}

fn execute(cli: Cli, env: &Environment) -> Result<i32, CliError> {
    let config = RunConfig::resolve(&cli.global, env)?;
    match cli.command {
        Command::Mine {
            keyword,
            from,
            to,
            limit,
        } => {
            let range = from.zip(to).map(|(from, to)| DateRange { from, to });
            with_client(&cli.global, &config, env, |client| cmd_mine(client, &config, &keyword, range.as_ref(), limit))
        }
        Command::Fetch { prs } => {
            let ids = prs.iter().map(|s| parse_pr_ref(s)).collect::<Result<Vec<_>, _>>()?;
            with_client(&cli.global, &config, env, |client| cmd_fetch(client, &config, &ids))
        }
        Command::ExtractLinks { text, output } => cmd_extract_links(&config, text.as_deref(), &output),
        Command::Classify { output } => cmd_classify(&config, output),
        Command::Report {
            input,
            format,
            output,
            per_pr,
        } => {
            let report = ClassificationReport::from_json(&std::fs::read_to_string(&input)?)?;
            if per_pr {
                emit_report(&report, format.into(), &output)?;
            } else {
                emit_report(&report.summary, format.into(), &output)?;
            }
            Ok(EXIT_OK)
        }
        Command::Evaluate {
            predictions,
            truth,
            format,
            output,
        } => cmd_evaluate(&predictions, &truth, format.into(), &output),
    }
}

fn with_client(
    global: &GlobalArgs,
    config: &RunConfig,
    env: &Environment,
    f: impl FnOnce(&GitHubClient) -> Result<i32, CliError>,
) -> Result<i32, CliError> {
    let matcher = config.matcher();
    if let Some(t) = &env.transport {
        return f(&GitHubClient::new(t.clone(), config.fetch_policy(true), matcher));
    }
    if let Some(path) = &global.replay {
        let replay: Arc<dyn Transport> = Arc::new(ReplayTransport::load(path)?);
        return f(&GitHubClient::new(replay, config.fetch_policy(true), matcher));
    }
    if let Some(path) = &global.record {
        let recorder = Arc::new(RecordingTransport::new(LiveTransport::default()));
        let code = f(&GitHubClient::new(recorder.clone(), config.fetch_policy(false), matcher));
        recorder.save(path)?;
        return code;
    }
    f(&GitHubClient::new(Arc::new(LiveTransport::default()), config.fetch_policy(false), matcher))
}

fn fetch_into(client: &GitHubClient, dataset: &Dataset, ids: &[PrId], require_links: bool) -> Result<usize, CliError> {
    let mut failures = 0;
    for id in ids {
        match client.fetch_pull_request(id) {
            Ok(pr) if require_links && pr.record.share_links.is_empty() => {
                log::info!("{id}: no share links, skipped");
            }
            Ok(pr) => {
                if pr.record.truncated {
                    log::warn!("{id}: diff is truncated");
                }
                dataset.save_pull_request(&pr.record, &pr.diff_text)?;
                log::info!("{id}: stored with {} share link(s)", pr.record.share_links.len());
            }
            Err(AcquireError::BudgetExhausted(n)) => {
                log::error!("request budget of {n} exhausted; stopping");
                return Ok(failures + ids.len());
            }
            Err(e) => {
                log::error!("{id}: {e}");
                failures += 1;
            }
        }
    }
    Ok(failures)
}

fn cmd_mine(
    client: &GitHubClient,
    config: &RunConfig,
    keyword: &str,
    range: Option<&DateRange>,
    limit: Option<usize>,
) -> Result<i32, CliError> {
    let dataset = Dataset::create(&config.dataset_root)?;
    dataset.save_manifest(&dataset.manifest()?)?;
    let outcome = client.search_candidate_prs(keyword, range)?;
    if outcome.partial {
        log::warn!("search stopped early; {} candidates so far", outcome.hits.len());
    }
    let mut hits = outcome.hits;
    if let Some(l) = limit {
        hits.truncate(l);
    }
    eprintln!("{} candidate pull request(s)", hits.len());
    let failures = fetch_into(client, &dataset, &hits, true)?;
    Ok(if failures > 0 || outcome.partial { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_fetch(client: &GitHubClient, config: &RunConfig, ids: &[PrId]) -> Result<i32, CliError> {
    let dataset = Dataset::create(&config.dataset_root)?;
    let failures = fetch_into(client, &dataset, ids, false)?;
    Ok(if failures > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct LinkListing {
    pr: Option<String>,
    links: Vec<ShareLink>,
}

fn write_output(output: &Path, text: &str) -> Result<(), CliError> {
    if output.as_os_str() == "-" {
        print!("{text}");
    } else {
        std::fs::write(output, text)?;
    }
    Ok(())
}

fn cmd_extract_links(config: &RunConfig, text: Option<&Path>, output: &Path) -> Result<i32, CliError> {
    let matcher = config.matcher();
    let mut listings = Vec::new();
    if let Some(path) = text {
        let body = std::fs::read_to_string(path)?;
        listings.push(LinkListing {
            pr: None,
            links: matcher.extract(&body, LinkSource::Description),
        });
    } else {
        let dataset = Dataset::open(&config.dataset_root)?;
        for id in dataset.pr_ids()? {
            let mut record = dataset.load_record(&id)?;
            record.share_links = extract_links_from_record(&record, &matcher);
            let diff = std::fs::read_to_string(dataset.pr_dir(&id).join(&record.diff_path)).unwrap_or_default();
            dataset.save_pull_request(&record, &diff)?;
            listings.push(LinkListing {
                pr: Some(id.to_string()),
                links: record.share_links,
            });
        }
    }
    let json = serde_json::to_string_pretty(&listings).map_err(ReportError::from)?;
    write_output(output, &(json + "\n"))?;
    Ok(EXIT_OK)
}

fn cmd_classify(config: &RunConfig, output: Option<PathBuf>) -> Result<i32, CliError> {
    let dataset = Dataset::open(&config.dataset_root)?;
    let settings = Settings {
        ngram: config.ngram,
        match_threshold: config.match_threshold,
        registry: config.registry()?,
    };
    let mut inputs = Vec::new();
    let mut load_failures = Vec::new();
    for id in dataset.pr_ids()? {
        match dataset.load_input(&id) {
            Ok(input) => inputs.push(input),
            Err(e) => {
                log::error!("{id}: {e}");
                load_failures.push(PrOutcome::failed(id, e.to_string()));
            }
        }
    }
    let mut outcomes = classify_corpus(&inputs, &settings, config.parallelism);
    outcomes.extend(load_failures);
    outcomes.sort_by(|a, b| a.id.cmp(&b.id));

    let report = ClassificationReport::new(
        &outcomes,
        ReportSettings {
            ngram: config.ngram,
            match_threshold: config.match_threshold,
            registry_version: REGISTRY_VERSION.into(),
        },
    );
    let dir = output.unwrap_or_else(|| config.dataset_root.join("reports"));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    std::fs::write(dir.join("report.csv"), report.to_csv()?)?;

    let s = &report.summary;
    eprintln!(
        "{} pull requests: PA {} PN {} NE {} CL {}; {} hunk(s) failed",
        s.pr_total, s.pr_counts.pa, s.pr_counts.pn, s.pr_counts.ne, s.pr_counts.cl, s.hunk_counts.ee
    );
    Ok(if report.has_failures() { EXIT_PARTIAL } else { EXIT_OK })
}

/// Reads `id -> label` from a classification report or a label CSV.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, PrLabel>, CliError> {
    let labels_err = |message: String| CliError::Labels {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let report = ClassificationReport::from_json(&text).map_err(|e| labels_err(e.to_string()))?;
        for pr in report.pull_requests {
            out.insert(pr.id().to_string(), pr.label);
        }
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| labels_err(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let label_col = col("label").ok_or_else(|| labels_err("no label column".into()))?;
    let id_cols = match (col("owner"), col("repo"), col("number"), col("pr").or(col("id"))) {
        (Some(o), Some(r), Some(n), _) => Ok((o, r, n)),
        (_, _, _, Some(p)) => Err(p),
        _ => return Err(labels_err("need owner,repo,number or pr columns".into())),
    };
    for row in reader.records() {
        let row = row.map_err(|e| labels_err(e.to_string()))?;
        let id = match id_cols {
            Ok((o, r, n)) => {
                let number: u64 = row[n].parse().map_err(|_| labels_err(format!("bad number {:?}", &row[n])))?;
                PrId::new(&row[o], &row[r], number).to_string()
            }
            Err(p) => parse_pr_ref(&row[p])?.to_string(),
        };
        let label: PrLabel = row[label_col].parse().map_err(|label| CliError::UnknownLabel {
            path: path.to_path_buf(),
            label,
        })?;
        if out.insert(id.clone(), label).is_some() {
            return Err(labels_err(format!("{id} listed twice")));
        }
    }
    Ok(out)
}

fn cmd_evaluate(predictions: &Path, truth: &Path, format: Format, output: &Path) -> Result<i32, CliError> {
    // Closed PRs are outside the PA/PN/NE scheme and take no part.
    let keep = |m: BTreeMap<String, PrLabel>| -> BTreeMap<String, PrLabel> {
        m.into_iter().filter(|(_, l)| *l != PrLabel::CL).collect()
    };
    let predicted = keep(read_labels(predictions)?);
    let reference = keep(read_labels(truth)?);
    let missing: Vec<&String> = reference.keys().filter(|k| !predicted.contains_key(*k)).collect();
    let extra: Vec<&String> = predicted.keys().filter(|k| !reference.contains_key(*k)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let show = |v: &[&String]| v.iter().take(5).map(|s| s.as_str()).collect::<Vec<_>>().join(", ");
        return Err(CliError::Alignment(format!(
            "{} without prediction [{}], {} without reference [{}]",
            missing.len(),
            show(&missing),
            extra.len(),
            show(&extra)
        )));
    }
    let p: Vec<PrLabel> = predicted.values().copied().collect();
    let t: Vec<PrLabel> = reference.values().copied().collect();
    emit_report(&evaluate(&p, &t)?, format, output)?;
    Ok(EXIT_OK)
}
