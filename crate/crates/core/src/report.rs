//! Reports, corpus statistics and evaluation against reference labels.
//!
//! Overall evaluation metrics are macro averages over the classes that
//! occur in either label sequence. Quartiles interpolate linearly between
//! order statistics.

use std::io::Write;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{HunkCounts, HunkLabel, HunkVerdict, PrLabel, PullRequestVerdict, SnippetRef};
use crate::diffmodel::HunkHeader;
use crate::matching::Percentage;
use crate::pipeline::{PrId, PrOutcome};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("label sequences differ in length: {predicted} predicted vs {truth} truth")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("label {0} is outside PA/PN/NE")]
    UnsupportedLabel(PrLabel),
    #[error("agreement expected by chance is 1; kappa is undefined")]
    DegenerateKappa,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrCounts {
    pub pa: usize,
    pub pn: usize,
    pub ne: usize,
    pub cl: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrPercentages {
    /// PA, PN and NE are shares of merged pull requests.
    pub pa: Percentage,
    pub pn: Percentage,
    pub ne: Percentage,
    /// CL is a share of all pull requests.
    pub cl: Percentage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: Percentage,
    pub median: Percentage,
    pub q3: Percentage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub ngram: usize,
    pub pr_total: usize,
    pub merged_total: usize,
    pub pr_counts: PrCounts,
    pub pr_percentages: PrPercentages,
    pub hunk_counts: HunkCounts,
    /// Over PA pull requests; absent when there are none.
    pub integration: Option<Quartiles>,
    pub snippet_total: usize,
    pub patch_total: usize,
}

fn share(part: usize, whole: usize) -> Percentage {
    if whole == 0 {
        Percentage::ZERO
    } else {
        Percentage::of(part as u64, whole as u64).rounded()
    }
}

/// Linear-interpolation quantile of sorted values, `p = k/4`.
fn quantile(sorted: &[Ratio<u64>], quarters: u64) -> Ratio<u64> {
    let h = Ratio::new((sorted.len() as u64 - 1) * quarters, 4);
    let lo = h.to_integer() as usize;
    let frac = h.fract();
    match sorted.get(lo + 1) {
        Some(hi) if frac > Ratio::from_integer(0) => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Quartiles of a set of percentages, or `None` when empty.
pub fn quartiles(values: &[Percentage]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<Ratio<u64>> = values.iter().map(Percentage::ratio).collect();
    sorted.sort();
    let q = |k| Percentage::from_ratio(quantile(&sorted, k)).rounded();
    Some(Quartiles {
        q1: q(1),
        median: q(2),
        q3: q(3),
    })
}

pub fn summarize(verdicts: &[PullRequestVerdict], ngram: usize) -> CorpusSummary {
    let mut pr_counts = PrCounts::default();
    let mut hunk_counts = HunkCounts::default();
    let mut integration = Vec::new();
    let mut snippet_total = 0;
    for v in verdicts {
        match v.label {
            PrLabel::PA => pr_counts.pa += 1,
            PrLabel::PN => pr_counts.pn += 1,
            PrLabel::NE => pr_counts.ne += 1,
            PrLabel::CL => pr_counts.cl += 1,
        }
        hunk_counts.add(&v.counts);
        snippet_total += v.snippet_count;
        if v.label == PrLabel::PA {
            integration.extend(v.integration_pct);
        }
    }
    let merged_total = pr_counts.pa + pr_counts.pn + pr_counts.ne;
    CorpusSummary {
        ngram,
        pr_total: verdicts.len(),
        merged_total,
        pr_counts,
        pr_percentages: PrPercentages {
            pa: share(pr_counts.pa, merged_total),
            pn: share(pr_counts.pn, merged_total),
            ne: share(pr_counts.ne, merged_total),
            cl: share(pr_counts.cl, verdicts.len()),
        },
        hunk_counts,
        integration: quartiles(&integration),
        snippet_total,
        patch_total: hunk_counts.total(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkRow {
    pub file: String,
    pub header: HunkHeader,
    pub label: HunkLabel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matched_gram_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub snippet_gram_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub containment_pct: Option<Percentage>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matched_snippet: Option<SnippetRef>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_note: Option<String>,
}

impl From<&HunkVerdict> for HunkRow {
    fn from(v: &HunkVerdict) -> Self {
        HunkRow {
            file: v.file.clone(),
            header: v.header,
            label: v.label,
            matched_gram_count: v.best_match.map(|m| m.matched_gram_count),
            snippet_gram_count: v.best_match.map(|m| m.snippet_gram_count),
            containment_pct: v.best_match.map(|m| m.containment_pct.rounded()),
            matched_snippet: v.matched_snippet.clone(),
            failure_note: v.failure_note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrRow {
    pub owner: String,
    pub repo: String,
    pub number: u64,
    pub label: PrLabel,
    pub merged: bool,
    pub truncated: bool,
    pub snippet_count: usize,
    pub counts: HunkCounts,
    pub integration_pct: Option<Percentage>,
    pub hunks: Vec<HunkRow>,
}

impl From<&PrOutcome> for PrRow {
    fn from(o: &PrOutcome) -> Self {
        PrRow {
            owner: o.id.owner.clone(),
            repo: o.id.repo.clone(),
            number: o.id.number,
            label: o.verdict.label,
            merged: o.verdict.merged,
            truncated: o.truncated,
            snippet_count: o.verdict.snippet_count,
            counts: o.verdict.counts,
            integration_pct: o.verdict.integration_pct.map(|p| p.rounded()),
            hunks: o.hunks.iter().map(HunkRow::from).collect(),
        }
    }
}

impl PrRow {
    pub fn id(&self) -> PrId {
        PrId::new(&self.owner, &self.repo, self.number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub ngram: usize,
    pub match_threshold: usize,
    pub registry_version: String,
}

/// The full classification report written by `classify`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub schema_version: u32,
    pub settings: ReportSettings,
    pub summary: CorpusSummary,
    /// Identifiers whose truncated diffs may have hidden matches.
    pub truncated: Vec<String>,
    pub pull_requests: Vec<PrRow>,
}

impl ClassificationReport {
    pub fn new(outcomes: &[PrOutcome], settings: ReportSettings) -> Self {
        let verdicts: Vec<PullRequestVerdict> = outcomes.iter().map(|o| o.verdict.clone()).collect();
        let summary = summarize(&verdicts, settings.ngram);
        ClassificationReport {
            schema_version: SCHEMA_VERSION,
            settings,
            summary,
            truncated: outcomes.iter().filter(|o| o.truncated).map(|o| o.id.to_string()).collect(),
            pull_requests: outcomes.iter().map(PrRow::from).collect(),
        }
    }

    pub fn has_failures(&self) -> bool {
        self.summary.hunk_counts.ee > 0
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per pull request.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "owner", "repo", "number", "label", "pa", "pn", "ne", "cc", "ee", "integration_pct", "n",
        ])?;
        for pr in &self.pull_requests {
            let c = &pr.counts;
            w.write_record([
                pr.owner.clone(),
                pr.repo.clone(),
                pr.number.to_string(),
                pr.label.to_string(),
                c.pa.to_string(),
                c.pn.to_string(),
                c.ne.to_string(),
                c.cc.to_string(),
                c.ee.to_string(),
                pr.integration_pct.map(|p| p.to_string()).unwrap_or_default(),
                self.settings.ngram.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Serialized forms accepted by [`emit_report`].
pub trait Emit {
    fn render(&self, format: Format) -> Result<String, ReportError>;
}

impl Emit for ClassificationReport {
    fn render(&self, format: Format) -> Result<String, ReportError> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

impl Emit for CorpusSummary {
    fn render(&self, format: Format) -> Result<String, ReportError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&serde_json::json!({
                    "schema_version": SCHEMA_VERSION,
                    "summary": self,
                }))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["metric", "value"])?;
                let mut row = |k: &str, v: String| w.write_record([k, v.as_str()]);
                row("n", self.ngram.to_string())?;
                row("pr_total", self.pr_total.to_string())?;
                row("merged_total", self.merged_total.to_string())?;
                let (c, p) = (&self.pr_counts, &self.pr_percentages);
                for (name, count, pct) in [("pa", c.pa, p.pa), ("pn", c.pn, p.pn), ("ne", c.ne, p.ne), ("cl", c.cl, p.cl)] {
                    row(&format!("pr_{name}"), count.to_string())?;
                    row(&format!("pr_{name}_pct"), pct.to_string())?;
                }
                for l in HunkLabel::ALL {
                    row(&format!("hunk_{}", l.as_str().to_lowercase()), self.hunk_counts.get(l).to_string())?;
                }
                let q = |f: fn(&Quartiles) -> Percentage| self.integration.as_ref().map(|x| f(x).to_string()).unwrap_or_default();
                row("integration_q1", q(|x| x.q1))?;
                row("integration_median", q(|x| x.median))?;
                row("integration_q3", q(|x| x.q3))?;
                row("snippet_total", self.snippet_total.to_string())?;
                row("patch_total", self.patch_total.to_string())?;
                let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
                Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
            }
        }
    }
}

impl Emit for EvaluationReport {
    fn render(&self, format: Format) -> Result<String, ReportError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self)?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["class", "support", "accuracy", "precision", "recall", "f1"])?;
                let fmt = |x: f64| format!("{x:.1}");
                for c in &self.per_class {
                    w.write_record([c.label.to_string(), c.support.to_string(), fmt(c.accuracy), fmt(c.precision), fmt(c.recall), fmt(c.f1)])?;
                }
                let o = &self.overall;
                w.write_record(["overall".to_string(), self.total.to_string(), fmt(o.accuracy), fmt(o.precision), fmt(o.recall), fmt(o.f1)])?;
                let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
                Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
            }
        }
    }
}

/// Writes a rendered report to `destination`, or standard output for `-`.
pub fn emit_report(item: &impl Emit, format: Format, destination: &Path) -> Result<(), ReportError> {
    let text = item.render(format)?;
    if destination.as_os_str() == "-" {
        std::io::stdout().lock().write_all(text.as_bytes())?;
    } else {
        if let Some(parent) = destination.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(destination, text)?;
    }
    Ok(())
}

pub const EVAL_LABELS: [PrLabel; 3] = [PrLabel::PA, PrLabel::PN, PrLabel::NE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: PrLabel,
    pub support: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub averaging: String,
    pub total: usize,
    /// Rows are reference labels, columns predictions, both in PA, PN, NE order.
    pub confusion: [[usize; 3]; 3],
    pub per_class: Vec<ClassMetrics>,
    pub overall: OverallMetrics,
    /// Share of exact agreements, in percent.
    pub agreement: f64,
    /// `None` when agreement by chance is certain.
    pub cohens_kappa: Option<f64>,
}

fn eval_index(label: PrLabel) -> Result<usize, ReportError> {
    EVAL_LABELS
        .iter()
        .position(|l| *l == label)
        .ok_or(ReportError::UnsupportedLabel(label))
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn confusion(predicted: &[PrLabel], truth: &[PrLabel]) -> Result<[[usize; 3]; 3], ReportError> {
    if predicted.len() != truth.len() {
        return Err(ReportError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    let mut m = [[0usize; 3]; 3];
    for (p, t) in predicted.iter().zip(truth) {
        m[eval_index(*t)?][eval_index(*p)?] += 1;
    }
    Ok(m)
}

fn kappa_from(m: &[[usize; 3]; 3]) -> Result<f64, ReportError> {
    let n: usize = m.iter().flatten().sum();
    let agree: usize = (0..3).map(|i| m[i][i]).sum();
    let chance: usize = (0..3)
        .map(|i| m[i].iter().sum::<usize>() * (0..3).map(|r| m[r][i]).sum::<usize>())
        .sum();
    // (p_o - p_e) / (1 - p_e), scaled by n² to stay in integers
    let denom = (n * n) as f64 - chance as f64;
    if denom == 0.0 {
        return Err(ReportError::DegenerateKappa);
    }
    Ok(((n * agree) as f64 - chance as f64) / denom)
}

/// Cohen's kappa between two label sequences.
pub fn cohens_kappa(a: &[PrLabel], b: &[PrLabel]) -> Result<f64, ReportError> {
    kappa_from(&confusion(a, b)?)
}

/// Per-class one-vs-rest metrics, macro averages and kappa.
pub fn evaluate(predicted: &[PrLabel], truth: &[PrLabel]) -> Result<EvaluationReport, ReportError> {
    let m = confusion(predicted, truth)?;
    let total = predicted.len();
    let mut per_class = Vec::new();
    for (i, label) in EVAL_LABELS.iter().enumerate() {
        let tp = m[i][i];
        let support: usize = m[i].iter().sum();
        let predicted_n: usize = (0..3).map(|r| m[r][i]).sum();
        if support == 0 && predicted_n == 0 {
            continue;
        }
        let fp = predicted_n - tp;
        let fn_ = support - tp;
        let tn = total - tp - fp - fn_;
        let precision = pct(tp, predicted_n);
        let recall = pct(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            label: *label,
            support,
            accuracy: pct(tp + tn, total),
            precision,
            recall,
            f1,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    let overall = OverallMetrics {
        accuracy: mean(|c| c.accuracy),
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
    };
    Ok(EvaluationReport {
        schema_version: SCHEMA_VERSION,
        averaging: "macro".into(),
        total,
        confusion: m,
        per_class,
        overall,
        agreement: pct((0..3).map(|i| m[i][i]).sum(), total),
        cohens_kappa: kappa_from(&m).ok(),
    })
}
