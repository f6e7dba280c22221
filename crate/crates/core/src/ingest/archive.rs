//! JSON Lines archive of mined interaction data.
//!
//! ```text
//! {"format":"persona-miner-archive","version":1}
//! {"summary":{...RepoSummary...}}              (zero or more)
//! {"set":{"repo":{..},"fetched_at":..,"incomplete":null,"event_count":N}}
//! {...InteractionEvent...}                     (N lines)
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{IngestError, InteractionEvent, InteractionSet, RepoSlug, RepoSummary};

pub const ARCHIVE_FORMAT: &str = "persona-miner-archive";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct SetHeader {
    repo: RepoSlug,
    fetched_at: DateTime<Utc>,
    incomplete: Option<String>,
    event_count: usize,
}

#[derive(Serialize)]
struct SetLine<'a> {
    set: &'a SetHeader,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    summary: &'a RepoSummary,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Set { set: SetHeader },
    Summary { summary: RepoSummary },
    Event(InteractionEvent),
}

/// Repository summaries plus the interaction sets mined for (a sample of) them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Archive {
    pub summaries: Vec<RepoSummary>,
    pub sets: Vec<InteractionSet>,
}

impl Archive {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), IngestError> {
        let header = Header { format: ARCHIVE_FORMAT.to_string(), version: ARCHIVE_VERSION };
        writeln!(out, "{}", to_json(&header)?)?;
        for summary in &self.summaries {
            writeln!(out, "{}", to_json(&SummaryLine { summary })?)?;
        }
        for set in &self.sets {
            let header = SetHeader {
                repo: set.repo.clone(),
                fetched_at: set.fetched_at,
                incomplete: set.incomplete.clone(),
                event_count: set.events.len(),
            };
            writeln!(out, "{}", to_json(&SetLine { set: &header })?)?;
            for ev in &set.events {
                writeln!(out, "{}", to_json(ev)?)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, IngestError> {
        let mut lines = input.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| IngestError::ArchiveFormat("empty file, missing header".into()))?;
        let header: Header = serde_json::from_str(&first?)
            .map_err(|e| IngestError::ArchiveFormat(format!("unreadable header: {e}")))?;
        if header.format != ARCHIVE_FORMAT {
            return Err(IngestError::ArchiveFormat(format!(
                "expected format {ARCHIVE_FORMAT:?}, found {:?}",
                header.format
            )));
        }
        if header.version != ARCHIVE_VERSION {
            return Err(IngestError::ArchiveFormat(format!(
                "unsupported archive version {} (this build reads version {ARCHIVE_VERSION})",
                header.version
            )));
        }

        let mut archive = Archive::default();
        let mut open: Option<(SetHeader, Vec<InteractionEvent>)> = None;
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| IngestError::ArchiveLine { line: lineno, message: e.to_string() })?;
            match parsed {
                Line::Summary { summary } => {
                    if open.is_some() {
                        return Err(IngestError::ArchiveLine {
                            line: lineno,
                            message: "summary line inside an interaction set".into(),
                        });
                    }
                    archive.summaries.push(summary);
                }
                Line::Set { set } => {
                    if let Some(prev) = open.take() {
                        archive.sets.push(close_set(prev, lineno)?);
                    }
                    open = Some((set, Vec::new()));
                }
                Line::Event(ev) => match open.as_mut() {
                    Some((hdr, events)) => {
                        if ev.repo != hdr.repo {
                            return Err(IngestError::ArchiveLine {
                                line: lineno,
                                message: format!("event for {} inside set for {}", ev.repo, hdr.repo),
                            });
                        }
                        events.push(ev);
                    }
                    None => {
                        return Err(IngestError::ArchiveLine {
                            line: lineno,
                            message: "event before any set header".into(),
                        })
                    }
                },
            }
        }
        if let Some(prev) = open.take() {
            archive.sets.push(close_set(prev, usize::MAX)?);
        }
        Ok(archive)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IngestError> {
        let file = File::create(path)?;
        self.write_to(BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let file = File::open(path)?;
        Archive::read_from(BufReader::new(file))
    }

    pub fn summary_for(&self, slug: &RepoSlug) -> Option<&RepoSummary> {
        self.summaries.iter().find(|s| &s.slug == slug)
    }
}

fn close_set(
    (hdr, events): (SetHeader, Vec<InteractionEvent>),
    lineno: usize,
) -> Result<InteractionSet, IngestError> {
    if events.len() != hdr.event_count {
        let at = if lineno == usize::MAX { "end of file".to_string() } else { format!("line {lineno}") };
        return Err(IngestError::ArchiveFormat(format!(
            "set {} declares {} events but {} were read before {at}",
            hdr.repo,
            hdr.event_count,
            events.len()
        )));
    }
    let mut set = InteractionSet::new(hdr.repo, events, hdr.fetched_at)?;
    set.incomplete = hdr.incomplete;
    Ok(set)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, IngestError> {
    serde_json::to_string(value).map_err(|e| IngestError::ArchiveFormat(e.to_string()))
}

pub fn save_archive(sets: &[InteractionSet], path: impl AsRef<Path>) -> Result<(), IngestError> {
    Archive { summaries: Vec::new(), sets: sets.to_vec() }.save(path)
}

pub fn load_archive(path: impl AsRef<Path>) -> Result<Vec<InteractionSet>, IngestError> {
    Archive::load(path).map(|a| a.sets)
}
