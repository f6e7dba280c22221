//! Repository discovery and interaction mining.
//!
//! Records come from Zenodo, repository metadata and interaction streams
//! from the GitHub REST API. Everything downstream works from archives
//! written by [`archive::save_archive`], so network access is only needed
//! once.

pub mod archive;
pub mod github;
pub mod http;
pub mod zenodo;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use archive::{load_archive, save_archive, Archive, ARCHIVE_FORMAT, ARCHIVE_VERSION};
pub use github::{GithubClient, GithubConfig};
pub use http::{FixtureTransport, HttpResponse, RateBudget, Transport, UreqTransport};
pub use zenodo::{extract_github_slug, query_zenodo_software_records, ZenodoQuery};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("transient failure fetching {url}: {message}")]
    Retryable { url: String, message: String },
    #[error("API rate budget exhausted; resets at {reset_at}")]
    BudgetExhausted { reset_at: DateTime<Utc> },
    #[error("unexpected HTTP {status} from {url}")]
    Status { status: u16, url: String },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
    #[error("invalid repository slug {0:?}")]
    InvalidSlug(String),
    #[error("interaction set for {expected} contains an event for {found}")]
    MixedRepos { expected: RepoSlug, found: RepoSlug },
    #[error("archive format error: {0}")]
    ArchiveFormat(String),
    #[error("archive line {line}: {message}")]
    ArchiveLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub fn is_network(&self) -> bool {
        matches!(
            self,
            IngestError::Retryable { .. } | IngestError::BudgetExhausted { .. } | IngestError::Status { .. }
        )
    }
}

/// A Zenodo record reduced to the fields the repository search needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZenodoRecord {
    pub record_id: String,
    pub resource_type: String,
    pub access_right: String,
    pub related_urls: Vec<String>,
}

/// `owner/name` of a GitHub repository, case preserved.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSlug")]
pub struct RepoSlug {
    owner: String,
    name: String,
}

#[derive(Deserialize)]
struct RawSlug {
    owner: String,
    name: String,
}

impl TryFrom<RawSlug> for RepoSlug {
    type Error = IngestError;

    fn try_from(raw: RawSlug) -> Result<Self, Self::Error> {
        RepoSlug::new(raw.owner, raw.name)
    }
}

impl RepoSlug {
    pub fn new(owner: impl Into<String>, name: impl Into<String>) -> Result<Self, IngestError> {
        let owner = owner.into();
        let name = name.into();
        let ok = |s: &str| !s.is_empty() && !s.contains('/') && !s.chars().any(char::is_whitespace);
        if ok(&owner) && ok(&name) {
            Ok(RepoSlug { owner, name })
        } else {
            Err(IngestError::InvalidSlug(format!("{owner}/{name}")))
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for RepoSlug {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)
    }
}

impl FromStr for RepoSlug {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((owner, name)) => RepoSlug::new(owner, name),
            None => Err(IngestError::InvalidSlug(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoSummary {
    pub slug: RepoSlug,
    pub visibility: Visibility,
    pub unique_committers: u64,
    pub license_id: Option<String>,
    pub languages: Vec<String>,
    pub is_fork: bool,
    pub created_at: DateTime<Utc>,
    pub age_days: i64,
    pub default_branch: String,
}

impl RepoSummary {
    /// Summary for a repository that no longer resolves (or is hidden).
    pub fn unavailable(slug: RepoSlug, visibility: Visibility) -> Self {
        RepoSummary {
            slug,
            visibility,
            unique_committers: 0,
            license_id: None,
            languages: Vec::new(),
            is_fork: false,
            created_at: DateTime::<Utc>::UNIX_EPOCH,
            age_days: 0,
            default_branch: String::new(),
        }
    }
}

/// Whole days between `created_at` and `reference`, floored at zero.
pub fn age_in_days(created_at: DateTime<Utc>, reference: DateTime<Utc>) -> i64 {
    (reference - created_at).num_days().max(0)
}

/// The six interaction types, in clustering-feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InteractionKind {
    CommitCreated,
    IssueCreated,
    IssueClosed,
    IssueAssigned,
    PRCreated,
    PRClosed,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 6] = [
        InteractionKind::CommitCreated,
        InteractionKind::IssueCreated,
        InteractionKind::IssueClosed,
        InteractionKind::IssueAssigned,
        InteractionKind::PRCreated,
        InteractionKind::PRClosed,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::CommitCreated => "CommitCreated",
            InteractionKind::IssueCreated => "IssueCreated",
            InteractionKind::IssueClosed => "IssueClosed",
            InteractionKind::IssueAssigned => "IssueAssigned",
            InteractionKind::PRCreated => "PRCreated",
            InteractionKind::PRClosed => "PRClosed",
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Commit message and touched paths. Paths are kept unique in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPayload")]
pub struct CommitPayload {
    pub message: String,
    changed_files: Vec<String>,
}

#[derive(Deserialize)]
struct RawPayload {
    message: String,
    changed_files: Vec<String>,
}

impl TryFrom<RawPayload> for CommitPayload {
    type Error = String;

    fn try_from(raw: RawPayload) -> Result<Self, Self::Error> {
        let mut seen = std::collections::BTreeSet::new();
        for path in &raw.changed_files {
            if !seen.insert(path.as_str()) {
                return Err(format!("duplicate changed path {path:?}"));
            }
        }
        Ok(CommitPayload { message: raw.message, changed_files: raw.changed_files })
    }
}

impl CommitPayload {
    pub fn new(message: impl Into<String>, paths: impl IntoIterator<Item = String>) -> Self {
        let mut seen = std::collections::BTreeSet::new();
        let changed_files = paths.into_iter().filter(|p| seen.insert(p.clone())).collect();
        CommitPayload { message: message.into(), changed_files }
    }

    pub fn changed_files(&self) -> &[String] {
        &self.changed_files
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawEvent")]
pub struct InteractionEvent {
    pub repo: RepoSlug,
    pub actor: String,
    pub kind: InteractionKind,
    pub timestamp: DateTime<Utc>,
    pub subject_id: String,
    pub payload: Option<CommitPayload>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    repo: RepoSlug,
    actor: String,
    kind: InteractionKind,
    timestamp: DateTime<Utc>,
    subject_id: String,
    #[serde(default)]
    payload: Option<CommitPayload>,
}

impl TryFrom<RawEvent> for InteractionEvent {
    type Error = String;

    fn try_from(raw: RawEvent) -> Result<Self, Self::Error> {
        if raw.subject_id.is_empty() {
            return Err("empty subject_id".into());
        }
        if raw.actor.is_empty() {
            return Err("empty actor".into());
        }
        Ok(InteractionEvent {
            repo: raw.repo,
            actor: raw.actor,
            kind: raw.kind,
            timestamp: raw.timestamp,
            subject_id: raw.subject_id,
            payload: raw.payload,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSet {
    pub repo: RepoSlug,
    pub events: Vec<InteractionEvent>,
    pub fetched_at: DateTime<Utc>,
    /// Set when some endpoint could not be read to the end.
    #[serde(default)]
    pub incomplete: Option<String>,
}

impl InteractionSet {
    pub fn new(
        repo: RepoSlug,
        events: Vec<InteractionEvent>,
        fetched_at: DateTime<Utc>,
    ) -> Result<Self, IngestError> {
        if let Some(ev) = events.iter().find(|e| e.repo != repo) {
            return Err(IngestError::MixedRepos { expected: repo, found: ev.repo.clone() });
        }
        Ok(InteractionSet { repo, events, fetched_at, incomplete: None })
    }

    pub fn is_incomplete(&self) -> bool {
        self.incomplete.is_some()
    }
}

/// Logins GitHub reserves for apps end in `[bot]`; the deny-list covers the rest.
pub fn is_bot_login(login: &str, deny_list: &[String]) -> bool {
    login.ends_with("[bot]") || deny_list.iter().any(|d| d.eq_ignore_ascii_case(login))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slug_rejects_slashes_and_empties() {
        assert!(RepoSlug::new("a", "b").is_ok());
        assert!(RepoSlug::new("", "b").is_err());
        assert!(RepoSlug::new("a/x", "b").is_err());
        assert!(RepoSlug::new("a", "").is_err());
        let s: RepoSlug = "Owner/Repo".parse().unwrap();
        assert_eq!(s.owner(), "Owner");
        assert_eq!(s.to_string(), "Owner/Repo");
    }

    #[test]
    fn payload_dedups_paths() {
        let p = CommitPayload::new("m", vec!["a".into(), "b".into(), "a".into()]);
        assert_eq!(p.changed_files(), &["a".to_string(), "b".to_string()]);
        let bad = r#"{"message":"m","changed_files":["a","a"]}"#;
        assert!(serde_json::from_str::<CommitPayload>(bad).is_err());
    }

    #[test]
    fn set_rejects_foreign_events() {
        let r1 = RepoSlug::new("o", "r1").unwrap();
        let r2 = RepoSlug::new("o", "r2").unwrap();
        let ev = InteractionEvent {
            repo: r2,
            actor: "ada".into(),
            kind: InteractionKind::CommitCreated,
            timestamp: Utc::now(),
            subject_id: "abc".into(),
            payload: None,
        };
        assert!(InteractionSet::new(r1, vec![ev], Utc::now()).is_err());
    }

    #[test]
    fn bot_detection() {
        assert!(is_bot_login("dependabot[bot]", &[]));
        assert!(is_bot_login("CI-Runner", &["ci-runner".into()]));
        assert!(!is_bot_login("ada", &[]));
    }

    #[test]
    fn kind_order_matches_feature_order() {
        for (i, k) in InteractionKind::ALL.iter().enumerate() {
            assert_eq!(k.index(), i);
        }
    }
}
