//! GitHub REST v3 client for repository summaries and interaction streams.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::Fetcher;
use super::{
    age_in_days, CommitPayload, IngestError, InteractionEvent, InteractionKind, InteractionSet, RepoSlug,
    RepoSummary, Visibility,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GithubConfig {
    pub api_base: String,
    pub per_page: u32,
    /// One extra request per commit; without it commit payloads carry no paths.
    pub fetch_commit_files: bool,
    pub concurrency: usize,
    pub token_env: String,
}

impl Default for GithubConfig {
    fn default() -> Self {
        GithubConfig {
            api_base: "https://api.github.com".into(),
            per_page: 100,
            fetch_commit_files: true,
            concurrency: 4,
            token_env: "GITHUB_TOKEN".into(),
        }
    }
}

pub struct GithubClient {
    fetcher: Fetcher,
    config: GithubConfig,
}

struct Paged {
    items: Vec<Value>,
    error: Option<String>,
}

impl GithubClient {
    pub fn new(fetcher: Fetcher, config: GithubConfig) -> Self {
        GithubClient { fetcher, config }
    }

    fn repo_url(&self, slug: &RepoSlug, tail: &str) -> String {
        format!("{}/repos/{}/{}{}", self.config.api_base.trim_end_matches('/'), slug.owner(), slug.name(), tail)
    }

    fn get_json(&self, url: &str) -> Result<Value, IngestError> {
        let resp = self.fetcher.get(url)?;
        if resp.status != 200 {
            return Err(IngestError::Status { status: resp.status, url: url.to_string() });
        }
        serde_json::from_str(&resp.body).map_err(|e| IngestError::Malformed { url: url.to_string(), message: e.to_string() })
    }

    /// Follows `Link: rel="next"` to the end. A failure part-way keeps the
    /// items read so far and reports the error instead of dropping them.
    fn get_all_pages(&self, first: String) -> Paged {
        let mut items = Vec::new();
        let mut next = Some(first);
        while let Some(url) = next.take() {
            let resp = match self.fetcher.get(&url) {
                Ok(r) => r,
                Err(e) => return Paged { items, error: Some(e.to_string()) },
            };
            if resp.status == 409 {
                // empty repository
                break;
            }
            if resp.status != 200 {
                return Paged { items, error: Some(format!("HTTP {} from {url}", resp.status)) };
            }
            match serde_json::from_str::<Value>(&resp.body) {
                Ok(Value::Array(page)) => items.extend(page),
                Ok(_) => return Paged { items, error: Some(format!("non-array page from {url}")) },
                Err(e) => return Paged { items, error: Some(format!("{url}: {e}")) },
            }
            next = resp.next_link();
        }
        Paged { items, error: None }
    }

    pub fn fetch_repo_summary(&self, slug: &RepoSlug, reference: DateTime<Utc>) -> Result<RepoSummary, IngestError> {
        let url = self.repo_url(slug, "");
        let resp = self.fetcher.get(&url)?;
        match resp.status {
            200 => {}
            404 | 410 => return Ok(RepoSummary::unavailable(slug.clone(), Visibility::Missing)),
            401 | 403 | 451 => return Ok(RepoSummary::unavailable(slug.clone(), Visibility::Private)),
            status => return Err(IngestError::Status { status, url }),
        }
        let repo: Value = serde_json::from_str(&resp.body)
            .map_err(|e| IngestError::Malformed { url: url.clone(), message: e.to_string() })?;
        let malformed = |what: &str| IngestError::Malformed { url: url.clone(), message: format!("missing {what}") };

        let private = repo.get("private").and_then(Value::as_bool).unwrap_or(false)
            || repo.get("visibility").and_then(Value::as_str).is_some_and(|v| v != "public");
        let created_at = repo.get("created_at").and_then(Value::as_str).and_then(parse_time).ok_or_else(|| malformed("created_at"))?;
        let default_branch = repo.get("default_branch").and_then(Value::as_str).ok_or_else(|| malformed("default_branch"))?.to_string();
        let license_id = repo.pointer("/license/spdx_id").and_then(Value::as_str).map(str::to_string);
        let is_fork = repo.get("fork").and_then(Value::as_bool).unwrap_or(false);

        let languages = match self.get_json(&self.repo_url(slug, "/languages"))? {
            Value::Object(map) => {
                let mut langs: Vec<(String, u64)> = map.into_iter().map(|(k, v)| (k, v.as_u64().unwrap_or(0))).collect();
                langs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                langs.into_iter().map(|(k, _)| k).collect()
            }
            _ => Vec::new(),
        };

        let commits = self.get_all_pages(self.repo_url(
            slug,
            &format!("/commits?sha={}&per_page={}", default_branch, self.config.per_page),
        ));
        if let Some(err) = commits.error {
            return Err(IngestError::Retryable { url: self.repo_url(slug, "/commits"), message: err });
        }
        let committers: BTreeSet<String> = commits.items.iter().map(commit_identity).collect();

        Ok(RepoSummary {
            slug: slug.clone(),
            visibility: if private { Visibility::Private } else { Visibility::Public },
            unique_committers: committers.len() as u64,
            license_id,
            languages,
            is_fork,
            created_at,
            age_days: age_in_days(created_at, reference),
            default_branch,
        })
    }

    /// Every interaction of the six tracked kinds. Endpoint failures mark the
    /// set incomplete rather than truncating it silently.
    pub fn fetch_interactions(&self, slug: &RepoSlug, default_branch: Option<&str>) -> InteractionSet {
        let mut events = Vec::new();
        let mut problems = Vec::new();

        let branch = default_branch.map(|b| format!("sha={b}&")).unwrap_or_default();
        let commits = self.get_all_pages(self.repo_url(slug, &format!("/commits?{branch}per_page={}", self.config.per_page)));
        if let Some(e) = &commits.error {
            problems.push(format!("commits: {e}"));
        }
        for item in &commits.items {
            let Some(sha) = item.get("sha").and_then(Value::as_str) else {
                log::warn!("{slug}: commit without sha skipped");
                continue;
            };
            let Some(timestamp) = item
                .pointer("/commit/author/date")
                .or_else(|| item.pointer("/commit/committer/date"))
                .and_then(Value::as_str)
                .and_then(parse_time)
            else {
                log::warn!("{slug}: commit {sha} without a date skipped");
                continue;
            };
            let message = item.pointer("/commit/message").and_then(Value::as_str).unwrap_or("").to_string();
            let files = if self.config.fetch_commit_files {
                match self.get_json(&self.repo_url(slug, &format!("/commits/{sha}"))) {
                    Ok(detail) => detail
                        .get("files")
                        .and_then(Value::as_array)
                        .map(|fs| fs.iter().filter_map(|f| f.get("filename").and_then(Value::as_str).map(str::to_string)).collect())
                        .unwrap_or_default(),
                    Err(e) => {
                        problems.push(format!("commit {sha}: {e}"));
                        Vec::new()
                    }
                }
            } else {
                Vec::new()
            };
            events.push(InteractionEvent {
                repo: slug.clone(),
                actor: commit_identity(item),
                kind: InteractionKind::CommitCreated,
                timestamp,
                subject_id: sha.to_string(),
                payload: Some(CommitPayload::new(message, files)),
            });
        }

        let issue_events = self.get_all_pages(self.repo_url(slug, &format!("/issues/events?per_page={}", self.config.per_page)));
        if let Some(e) = &issue_events.error {
            problems.push(format!("issue events: {e}"));
        }
        let timeline = Timeline::from_events(&issue_events.items);

        let issues = self.get_all_pages(self.repo_url(slug, &format!("/issues?state=all&per_page={}", self.config.per_page)));
        if let Some(e) = &issues.error {
            problems.push(format!("issues: {e}"));
        }
        for issue in &issues.items {
            // the issues endpoint also lists pull requests
            if issue.get("pull_request").is_some_and(|v| !v.is_null()) {
                continue;
            }
            let (Some(number), Some(created_at)) = (
                issue.get("number").and_then(Value::as_u64),
                issue.get("created_at").and_then(Value::as_str).and_then(parse_time),
            ) else {
                log::warn!("{slug}: malformed issue skipped");
                continue;
            };
            let subject = number.to_string();
            events.push(InteractionEvent {
                repo: slug.clone(),
                actor: login_of(issue.get("user")),
                kind: InteractionKind::IssueCreated,
                timestamp: created_at,
                subject_id: subject.clone(),
                payload: None,
            });
            if let Some(closed_at) = issue.get("closed_at").and_then(Value::as_str).and_then(parse_time) {
                let closer = timeline
                    .closed
                    .get(&number)
                    .map(|(_, who)| who.clone())
                    .or_else(|| issue.get("closed_by").filter(|v| !v.is_null()).map(|v| login_of(Some(v))));
                match closer {
                    Some(actor) => events.push(InteractionEvent {
                        repo: slug.clone(),
                        actor,
                        kind: InteractionKind::IssueClosed,
                        timestamp: closed_at,
                        subject_id: subject.clone(),
                        payload: None,
                    }),
                    None => log::warn!("{slug}: closer of issue #{number} unknown; closure skipped"),
                }
            }
            let mut assigned = BTreeSet::new();
            let assignees = issue.get("assignees").and_then(Value::as_array).cloned().unwrap_or_default();
            let single = issue.get("assignee").filter(|v| !v.is_null()).cloned();
            for who in assignees.iter().chain(single.iter()) {
                let login = login_of(Some(who));
                if !assigned.insert(login.clone()) {
                    continue;
                }
                let at = timeline.assigned.get(&(number, login.clone())).copied().unwrap_or(created_at);
                events.push(InteractionEvent {
                    repo: slug.clone(),
                    actor: login,
                    kind: InteractionKind::IssueAssigned,
                    timestamp: at,
                    subject_id: subject.clone(),
                    payload: None,
                });
            }
        }

        let pulls = self.get_all_pages(self.repo_url(slug, &format!("/pulls?state=all&per_page={}", self.config.per_page)));
        if let Some(e) = &pulls.error {
            problems.push(format!("pulls: {e}"));
        }
        for pr in &pulls.items {
            let (Some(number), Some(created_at)) = (
                pr.get("number").and_then(Value::as_u64),
                pr.get("created_at").and_then(Value::as_str).and_then(parse_time),
            ) else {
                log::warn!("{slug}: malformed pull request skipped");
                continue;
            };
            let subject = number.to_string();
            events.push(InteractionEvent {
                repo: slug.clone(),
                actor: login_of(pr.get("user")),
                kind: InteractionKind::PRCreated,
                timestamp: created_at,
                subject_id: subject.clone(),
                payload: None,
            });
            let merged_at = pr.get("merged_at").and_then(Value::as_str).and_then(parse_time);
            let closed_at = pr.get("closed_at").and_then(Value::as_str).and_then(parse_time);
            let Some(when) = merged_at.or(closed_at) else { continue };
            let closer = timeline
                .merged
                .get(&number)
                .cloned()
                .or_else(|| pr.get("merged_by").filter(|v| !v.is_null()).map(|v| login_of(Some(v))))
                .or_else(|| timeline.closed.get(&number).map(|(_, who)| who.clone()));
            match closer {
                Some(actor) => events.push(InteractionEvent {
                    repo: slug.clone(),
                    actor,
                    kind: InteractionKind::PRClosed,
                    timestamp: when,
                    subject_id: subject,
                    payload: None,
                }),
                None => log::warn!("{slug}: closer of pull request #{number} unknown; closure skipped"),
            }
        }

        InteractionSet {
            repo: slug.clone(),
            events,
            fetched_at: Utc::now(),
            incomplete: (!problems.is_empty()).then(|| problems.join("; ")),
        }
    }
}

/// Closure, merge and assignment facts from the repository issue-event feed.
#[derive(Default)]
struct Timeline {
    /// Latest `closed` event per issue/PR number.
    closed: BTreeMap<u64, (DateTime<Utc>, String)>,
    merged: BTreeMap<u64, String>,
    /// Earliest `assigned` event per (number, assignee).
    assigned: BTreeMap<(u64, String), DateTime<Utc>>,
}

impl Timeline {
    fn from_events(items: &[Value]) -> Self {
        let mut t = Timeline::default();
        for ev in items {
            let (Some(kind), Some(number), Some(at)) = (
                ev.get("event").and_then(Value::as_str),
                ev.pointer("/issue/number").and_then(Value::as_u64),
                ev.get("created_at").and_then(Value::as_str).and_then(parse_time),
            ) else {
                continue;
            };
            let actor = login_of(ev.get("actor"));
            match kind {
                "closed" => {
                    let entry = t.closed.entry(number).or_insert((at, actor.clone()));
                    if at >= entry.0 {
                        *entry = (at, actor);
                    }
                }
                "merged" => {
                    t.merged.insert(number, actor);
                }
                "assigned" => {
                    let who = login_of(ev.get("assignee"));
                    let slot = t.assigned.entry((number, who)).or_insert(at);
                    if at < *slot {
                        *slot = at;
                    }
                }
                _ => {}
            }
        }
        t
    }
}

fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.with_timezone(&Utc))
}

fn login_of(user: Option<&Value>) -> String {
    user.and_then(|u| u.get("login"))
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .unwrap_or("ghost")
        .to_string()
}

/// Platform login when the API resolved one; otherwise the login encoded
/// in a GitHub noreply address; otherwise `email:<lower-cased email>`.
pub fn commit_identity(item: &Value) -> String {
    if let Some(login) = item.pointer("/author/login").and_then(Value::as_str).filter(|s| !s.is_empty()) {
        return login.to_string();
    }
    let email = item.pointer("/commit/author/email").and_then(Value::as_str).unwrap_or("").trim().to_lowercase();
    if let Some(local) = email.strip_suffix("@users.noreply.github.com") {
        let login = local.split_once('+').map(|(_, l)| l).unwrap_or(local);
        if !login.is_empty() {
            return login.to_string();
        }
    }
    if !email.is_empty() {
        return format!("email:{email}");
    }
    let name = item.pointer("/commit/author/name").and_then(Value::as_str).unwrap_or("").trim().to_lowercase();
    if name.is_empty() {
        "email:unknown".to_string()
    } else {
        format!("email:{name}")
    }
}

/// Runs `job` over `items` on up to `workers` threads; results keep input order.
pub fn fetch_concurrently<T, R, F>(items: &[T], workers: usize, job: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = job(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}
