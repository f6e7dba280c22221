//! Commit classification: development type from the message, size class
//! from the number of touched files, activity type from file paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::ingest::{InteractionEvent, InteractionKind, InteractionSet, RepoSlug};

const DEFAULT_KEYWORDS: &str = include_str!("../data/keywords.toml");
const DEFAULT_ACTIVITY_RULES: &str = include_str!("../data/activity_rules.toml");

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("classification table: {0}")]
    Config(String),
    #[error("invalid pattern {pattern:?} for activity {activity}: {source}")]
    Pattern { activity: String, pattern: String, source: regex::Error },
    #[error("a commit with a file list must touch at least one file")]
    NoFiles,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DevelopmentType {
    ForwardEngineering,
    Reengineering,
    CorrectiveEngineering,
    Management,
    Unclassified,
}

impl DevelopmentType {
    pub fn as_str(self) -> &'static str {
        match self {
            DevelopmentType::ForwardEngineering => "ForwardEngineering",
            DevelopmentType::Reengineering => "Reengineering",
            DevelopmentType::CorrectiveEngineering => "CorrectiveEngineering",
            DevelopmentType::Management => "Management",
            DevelopmentType::Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for DevelopmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered verb stems per development type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    entries: Vec<(DevelopmentType, Vec<String>)>,
    /// Match any word of the message rather than only the first.
    pub match_anywhere: bool,
}

#[derive(Deserialize)]
struct KeywordFile {
    #[serde(default)]
    match_anywhere: bool,
    #[serde(rename = "type")]
    types: Vec<KeywordEntry>,
}

#[derive(Deserialize)]
struct KeywordEntry {
    name: DevelopmentType,
    stems: Vec<String>,
}

impl KeywordTable {
    pub fn new(entries: Vec<(DevelopmentType, Vec<String>)>, match_anywhere: bool) -> Result<Self, ClassifyError> {
        let mut owner: BTreeMap<String, DevelopmentType> = BTreeMap::new();
        let mut normalized = Vec::with_capacity(entries.len());
        for (ty, stems) in entries {
            if ty == DevelopmentType::Unclassified {
                return Err(ClassifyError::Config("Unclassified cannot carry stems".into()));
            }
            let mut out = Vec::with_capacity(stems.len());
            for stem in stems {
                let stem = stem.trim().to_lowercase();
                if stem.is_empty() {
                    return Err(ClassifyError::Config(format!("empty stem under {ty}")));
                }
                if let Some(prev) = owner.insert(stem.clone(), ty) {
                    if prev != ty {
                        return Err(ClassifyError::Config(format!("stem {stem:?} listed under both {prev} and {ty}")));
                    }
                    continue;
                }
                out.push(stem);
            }
            normalized.push((ty, out));
        }
        Ok(KeywordTable { entries: normalized, match_anywhere })
    }

    pub fn from_toml(text: &str) -> Result<Self, ClassifyError> {
        let file: KeywordFile = toml::from_str(text).map_err(|e| ClassifyError::Config(e.to_string()))?;
        KeywordTable::new(file.types.into_iter().map(|e| (e.name, e.stems)).collect(), file.match_anywhere)
    }

    pub fn entries(&self) -> &[(DevelopmentType, Vec<String>)] {
        &self.entries
    }

    fn type_of_word(&self, word: &str) -> Option<DevelopmentType> {
        self.entries
            .iter()
            .find(|(_, stems)| stems.iter().any(|s| word.starts_with(s.as_str())))
            .map(|(ty, _)| *ty)
    }
}

impl Default for KeywordTable {
    fn default() -> Self {
        KeywordTable::from_toml(DEFAULT_KEYWORDS).expect("bundled keyword table is valid")
    }
}

fn words(message: &str) -> impl Iterator<Item = &str> {
    message
        .split_whitespace()
        .map(|w| w.trim_start_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
}

pub fn classify_message(message: &str, table: &KeywordTable) -> DevelopmentType {
    let lower = message.to_lowercase();
    let found = if table.match_anywhere {
        words(&lower).find_map(|w| table.type_of_word(w))
    } else {
        words(&lower).next().and_then(|w| table.type_of_word(w))
    };
    found.unwrap_or(DevelopmentType::Unclassified)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    Tiny,
    Small,
    Medium,
    Large,
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeClass::Tiny => "Tiny",
            SizeClass::Small => "Small",
            SizeClass::Medium => "Medium",
            SizeClass::Large => "Large",
        })
    }
}

/// Inclusive upper file counts for the three smaller classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SizeThresholds {
    pub tiny_max: usize,
    pub small_max: usize,
    pub medium_max: usize,
}

impl Default for SizeThresholds {
    fn default() -> Self {
        SizeThresholds { tiny_max: 5, small_max: 25, medium_max: 125 }
    }
}

impl SizeThresholds {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.tiny_max >= 1 && self.tiny_max < self.small_max && self.small_max < self.medium_max {
            Ok(())
        } else {
            Err(ClassifyError::Config(format!("size thresholds must increase strictly from 1: {self:?}")))
        }
    }
}

pub fn classify_size(n_files: usize, thresholds: &SizeThresholds) -> Result<SizeClass, ClassifyError> {
    match n_files {
        0 => Err(ClassifyError::NoFiles),
        n if n <= thresholds.tiny_max => Ok(SizeClass::Tiny),
        n if n <= thresholds.small_max => Ok(SizeClass::Small),
        n if n <= thresholds.medium_max => Ok(SizeClass::Medium),
        _ => Ok(SizeClass::Large),
    }
}

/// Activity category names come from the rule table; `unknown` is the fallback.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActivityType(pub String);

impl ActivityType {
    pub fn unknown() -> Self {
        ActivityType("unknown".into())
    }

    pub fn is_unknown(&self) -> bool {
        self.0 == "unknown"
    }
}

impl fmt::Display for ActivityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone)]
pub struct ActivityRule {
    pub activity: ActivityType,
    patterns: Vec<Regex>,
}

impl ActivityRule {
    pub fn new(activity: &str, patterns: &[&str]) -> Result<Self, ClassifyError> {
        let compiled = patterns
            .iter()
            .map(|p| {
                RegexBuilder::new(p).case_insensitive(true).build().map_err(|source| ClassifyError::Pattern {
                    activity: activity.to_string(),
                    pattern: p.to_string(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ActivityRule { activity: ActivityType(activity.to_string()), patterns: compiled })
    }

    fn matches(&self, path: &str) -> bool {
        self.patterns.iter().any(|re| re.is_match(path))
    }
}

/// Rules applied in declaration order.
#[derive(Debug, Clone)]
pub struct ActivityRules {
    pub rules: Vec<ActivityRule>,
}

#[derive(Deserialize)]
struct RuleFile {
    rule: Vec<RuleEntry>,
}

#[derive(Deserialize)]
struct RuleEntry {
    activity: String,
    patterns: Vec<String>,
}

impl ActivityRules {
    pub fn from_toml(text: &str) -> Result<Self, ClassifyError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| ClassifyError::Config(e.to_string()))?;
        let mut seen = BTreeSet::new();
        let mut rules = Vec::with_capacity(file.rule.len());
        for entry in file.rule {
            if entry.activity == "unknown" || !seen.insert(entry.activity.clone()) {
                return Err(ClassifyError::Config(format!("activity {:?} reserved or declared twice", entry.activity)));
            }
            let pats: Vec<&str> = entry.patterns.iter().map(String::as_str).collect();
            rules.push(ActivityRule::new(&entry.activity, &pats)?);
        }
        Ok(ActivityRules { rules })
    }

    pub fn activities(&self) -> Vec<ActivityType> {
        self.rules.iter().map(|r| r.activity.clone()).chain([ActivityType::unknown()]).collect()
    }
}

impl Default for ActivityRules {
    fn default() -> Self {
        ActivityRules::from_toml(DEFAULT_ACTIVITY_RULES).expect("bundled activity rules are valid")
    }
}

pub fn classify_files<S: AsRef<str>>(paths: &[S], rules: &ActivityRules) -> ActivityType {
    rules
        .rules
        .iter()
        .find(|rule| paths.iter().any(|p| rule.matches(p.as_ref())))
        .map(|rule| rule.activity.clone())
        .unwrap_or_else(ActivityType::unknown)
}

#[derive(Debug, Clone, Default)]
pub struct ClassificationTables {
    pub keywords: KeywordTable,
    pub size: SizeThresholds,
    pub activity: ActivityRules,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitClassification {
    pub sha: String,
    pub repo: RepoSlug,
    pub dev_type: DevelopmentType,
    /// `None` when the commit carries no file list.
    pub size_class: Option<SizeClass>,
    pub activity_type: ActivityType,
}

pub fn classify_commit(event: &InteractionEvent, tables: &ClassificationTables) -> CommitClassification {
    let (message, files): (&str, &[String]) = match &event.payload {
        Some(p) => (&p.message, p.changed_files()),
        None => ("", &[]),
    };
    let size_class = classify_size(files.len(), &tables.size).ok();
    CommitClassification {
        sha: event.subject_id.clone(),
        repo: event.repo.clone(),
        dev_type: classify_message(message, &tables.keywords),
        size_class,
        activity_type: classify_files(files, &tables.activity),
    }
}

pub fn classify_set(set: &InteractionSet, tables: &ClassificationTables) -> Vec<CommitClassification> {
    set.events
        .iter()
        .filter(|e| e.kind == InteractionKind::CommitCreated)
        .map(|e| classify_commit(e, tables))
        .collect()
}

/// Per-repository tallies. File-based fractions use only commits with a file list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationSummary {
    pub repo: String,
    pub commits: usize,
    pub payload_absent: usize,
    pub dev_types: BTreeMap<DevelopmentType, usize>,
    pub size_classes: BTreeMap<SizeClass, usize>,
    pub activity_types: BTreeMap<ActivityType, usize>,
    pub unclassified_fraction: f64,
    pub unknown_activity_fraction: f64,
}

pub fn summarize(classified: &[CommitClassification]) -> Vec<ClassificationSummary> {
    let mut by_repo: BTreeMap<String, Vec<&CommitClassification>> = BTreeMap::new();
    for c in classified {
        by_repo.entry(c.repo.to_string()).or_default().push(c);
    }
    by_repo
        .into_iter()
        .map(|(repo, cs)| {
            let mut dev_types = BTreeMap::new();
            let mut size_classes = BTreeMap::new();
            let mut activity_types = BTreeMap::new();
            let mut payload_absent = 0;
            let mut unknown_with_files = 0;
            for c in &cs {
                *dev_types.entry(c.dev_type).or_insert(0) += 1;
                match c.size_class {
                    Some(s) => {
                        *size_classes.entry(s).or_insert(0) += 1;
                        *activity_types.entry(c.activity_type.clone()).or_insert(0) += 1;
                        if c.activity_type.is_unknown() {
                            unknown_with_files += 1;
                        }
                    }
                    None => payload_absent += 1,
                }
            }
            let with_files = cs.len() - payload_absent;
            let unclassified = dev_types.get(&DevelopmentType::Unclassified).copied().unwrap_or(0);
            ClassificationSummary {
                commits: cs.len(),
                payload_absent,
                unclassified_fraction: unclassified as f64 / cs.len() as f64,
                unknown_activity_fraction: if with_files == 0 { 0.0 } else { unknown_with_files as f64 / with_files as f64 },
                dev_types,
                size_classes,
                activity_types,
                repo,
            }
        })
        .collect()
}

pub fn write_classification_csv<W: Write>(rows: &[CommitClassification], out: W) -> Result<(), ClassifyError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sha", "repo", "dev_type", "size_class", "activity_type"])?;
    for r in rows {
        w.write_record([
            r.sha.clone(),
            r.repo.to_string(),
            r.dev_type.to_string(),
            r.size_class.map(|s| s.to_string()).unwrap_or_else(|| "payload-absent".into()),
            r.activity_type.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
