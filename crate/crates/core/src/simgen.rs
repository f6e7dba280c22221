//! Synthetic repo-individuals drawn around persona archetypes, and synthetic
//! event streams for end-to-end runs.

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::{CommitPayload, InteractionEvent, InteractionKind, InteractionSet, RepoSlug};
use crate::metrics::MetricVector;
use crate::personas::PersonaTable;

/// Study-wide share of each interaction kind, in metric order. Used to turn
/// six RC values into a consistent share of all interactions.
pub const STUDY_KIND_SHARES: [f64; 6] = [55.22, 8.97, 7.18, 4.92, 11.99, 11.72];

const MAX_REDRAWS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub persona: String,
    pub centroid: [f64; 6],
    pub noise_sd: f64,
    pub count: usize,
}

impl ArchetypeSpec {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SimError::Spec(format!("{}: noise_sd must be nonnegative", self.persona)));
        }
        if self.centroid.iter().any(|v| !(0.0..=100.0).contains(v)) {
            return Err(SimError::Spec(format!("{}: centroid outside [0, 100]", self.persona)));
        }
        if self.noise_sd == 0.0 && self.count > 0 && self.centroid.iter().all(|&v| v == 0.0) {
            return Err(SimError::Spec(format!("{}: an all-zero centroid without noise yields no interactions", self.persona)));
        }
        Ok(())
    }
}

/// One spec per persona in `table`, all with the same size and noise.
pub fn specs_from_table(table: &PersonaTable, count: usize, noise_sd: f64) -> Vec<ArchetypeSpec> {
    table
        .profiles()
        .iter()
        .map(|p| ArchetypeSpec { persona: p.name.clone(), centroid: p.centroid, noise_sd, count })
        .collect()
}

#[derive(Deserialize)]
struct SpecFile {
    archetype: Vec<SpecEntry>,
}

#[derive(Deserialize)]
struct SpecEntry {
    persona: String,
    centroid: Option<[f64; 6]>,
    noise_sd: f64,
    count: usize,
}

/// Reads `[[archetype]]` entries; a missing centroid is taken from `table`.
pub fn load_specs(text: &str, table: &PersonaTable) -> Result<Vec<ArchetypeSpec>, SimError> {
    let file: SpecFile = toml::from_str(text).map_err(|e| SimError::Spec(e.to_string()))?;
    file.archetype
        .into_iter()
        .map(|e| {
            let centroid = match e.centroid {
                Some(c) => c,
                None => table.get(&e.persona).map(|p| p.centroid).ok_or_else(|| SimError::Spec(format!("unknown persona {:?}", e.persona)))?,
            };
            let spec = ArchetypeSpec { persona: e.persona, centroid, noise_sd: e.noise_sd, count: e.count };
            spec.validate()?;
            Ok(spec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub vectors: Vec<MetricVector>,
    /// Generating persona of each vector.
    pub labels: Vec<String>,
}

/// Derives a full metric vector from six RC values.
pub fn vector_from_rcs(repo: RepoSlug, login: String, rcs: [f64; 6]) -> MetricVector {
    let share = rcs.iter().zip(STUDY_KIND_SHARES).map(|(r, w)| r * w).sum::<f64>() / 100.0;
    let share = share.clamp(0.0, 100.0);
    let uit = rcs.iter().filter(|&&r| r > 0.0).count() as u8;
    MetricVector::from_rcs(repo, login, rcs, share, share, uit)
}

fn slug_part(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect()
}

/// Draws `count` individuals per spec: centroid plus Gaussian noise,
/// clamped to [0, 100]. Draws with no interactions at all are redrawn.
pub fn generate(specs: &[ArchetypeSpec], seed: u64) -> Result<Simulated, SimError> {
    if specs.is_empty() {
        return Err(SimError::Spec("no archetypes given".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for spec in specs {
        let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| SimError::Spec(e.to_string()))?;
        for i in 0..spec.count {
            let mut rcs = [0.0; 6];
            for attempt in 0.. {
                for (r, c) in rcs.iter_mut().zip(spec.centroid) {
                    *r = if spec.noise_sd == 0.0 { c } else { (c + noise.sample(&mut rng)).clamp(0.0, 100.0) };
                }
                if rcs.iter().any(|&r| r > 0.0) {
                    break;
                }
                if attempt >= MAX_REDRAWS {
                    return Err(SimError::Spec(format!("{}: noise keeps producing empty individuals", spec.persona)));
                }
            }
            let idx = vectors.len();
            let repo = RepoSlug::new("simulated", format!("r{idx}")).expect("valid slug");
            vectors.push(vector_from_rcs(repo, format!("{}-{i}", slug_part(&spec.persona)), rcs));
            labels.push(spec.persona.clone());
        }
    }
    Ok(Simulated { vectors, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMember {
    pub login: String,
    /// Event count per kind, in metric order.
    pub counts: [u64; 6],
}

/// Splits per-kind repository totals among members in proportion to
/// `weights` (largest remainder, ties to the earlier member).
pub fn apportion(weights: &[[f64; 6]], totals: [u64; 6]) -> Vec<[u64; 6]> {
    let mut out = vec![[0u64; 6]; weights.len()];
    for k in 0..6 {
        let sum: f64 = weights.iter().map(|w| w[k].max(0.0)).sum();
        if sum == 0.0 || totals[k] == 0 {
            continue;
        }
        let mut given = 0;
        let mut rema: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
        for (i, w) in weights.iter().enumerate() {
            let exact = w[k].max(0.0) / sum * totals[k] as f64;
            let floor = exact.floor() as u64;
            out[i][k] = floor;
            given += floor;
            rema.push((exact - floor as f64, i));
        }
        rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in rema.iter().take((totals[k] - given) as usize) {
            out[i][k] += 1;
        }
    }
    out
}

const COMMIT_MESSAGES: [&str; 12] = [
    "add solver option for tolerance",
    "fix off-by-one in mesh indexing",
    "update documentation for install",
    "refactor io module",
    "merge pull request from fork",
    "implement parallel reader",
    "remove unused helper",
    "bug in unit conversion",
    "release 1.2.0",
    "tidy up",
    "initial import of analysis scripts",
    "improve plotting defaults",
];

const PATHS: [&str; 14] = [
    "src/solver.py",
    "src/mesh.c",
    "src/io/reader.py",
    "tests/test_solver.py",
    "docs/index.rst",
    "README.md",
    "setup.py",
    "CMakeLists.txt",
    "data/sample.csv",
    "figures/fig1.png",
    "config/defaults.yaml",
    "LICENSE",
    "locale/fr.po",
    "notes.zzz",
];

/// Timestamped events for the given members within `[start, end)`.
/// Issue and pull request subjects are numbered per repository.
pub fn synthesize_events(
    repo: &RepoSlug,
    members: &[SyntheticMember],
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    fetched_at: DateTime<Utc>,
    seed: u64,
) -> Result<InteractionSet, SimError> {
    let span = (end - start).num_seconds();
    if span <= 0 {
        return Err(SimError::Spec("event window must have positive length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut next_number = [1u64, 1, 1, 1, 1, 1];
    for m in members {
        for kind in InteractionKind::ALL {
            for _ in 0..m.counts[kind.index()] {
                let timestamp = start + Duration::seconds(rng.random_range(0..span));
                let n = next_number[kind.index()];
                next_number[kind.index()] += 1;
                let (subject_id, payload) = match kind {
                    InteractionKind::CommitCreated => {
                        let sha: String = (0..40).map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap()).collect();
                        let msg = COMMIT_MESSAGES[rng.random_range(0..COMMIT_MESSAGES.len())];
                        let n_files = if rng.random_range(0..20) == 0 { 0 } else { rng.random_range(1..=4) };
                        let files = (0..n_files).map(|_| PATHS[rng.random_range(0..PATHS.len())].to_string());
                        (sha, Some(CommitPayload::new(msg, files)))
                    }
                    InteractionKind::IssueCreated | InteractionKind::IssueClosed | InteractionKind::IssueAssigned => {
                        (format!("issue-{n}"), None)
                    }
                    InteractionKind::PRCreated | InteractionKind::PRClosed => (format!("pr-{n}"), None),
                };
                events.push(InteractionEvent { repo: repo.clone(), actor: m.login.clone(), kind, timestamp, subject_id, payload });
            }
        }
    }
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.kind.index().cmp(&b.kind.index())).then(a.actor.cmp(&b.actor)));
    InteractionSet::new(repo.clone(), events, fetched_at).map_err(|e| SimError::Spec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn zero_noise_reproduces_centroids() {
        let specs = specs_from_table(&PersonaTable::default(), 3, 0.0);
        let sim = generate(&specs, 1).unwrap();
        assert_eq!(sim.vectors.len(), 21);
        for (v, l) in sim.vectors.iter().zip(&sim.labels) {
            assert_eq!(v.rcs(), PersonaTable::default().get(l).unwrap().centroid);
            v.validate().unwrap();
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let specs = specs_from_table(&PersonaTable::default(), 50, 10.0);
        let a = generate(&specs, 9).unwrap();
        assert_eq!(a, generate(&specs, 9).unwrap());
        assert_ne!(a, generate(&specs, 10).unwrap());
        for v in &a.vectors {
            v.validate().unwrap();
        }
    }

    #[test]
    fn bad_specs() {
        assert!(generate(&[], 1).is_err());
        let s = ArchetypeSpec { persona: "x".into(), centroid: [0.0; 6], noise_sd: -1.0, count: 1 };
        assert!(generate(&[s], 1).is_err());
    }

    #[test]
    fn spec_file() {
        let text = "[[archetype]]\npersona = \"Active Contributor\"\nnoise_sd = 2.0\ncount = 5\n\n[[archetype]]\npersona = \"custom\"\ncentroid = [1, 2, 3, 4, 5, 6]\nnoise_sd = 0.0\ncount = 1\n";
        let specs = load_specs(text, &PersonaTable::default()).unwrap();
        assert_eq!(specs[0].centroid[0], 83.19);
        assert_eq!(specs[1].centroid, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(load_specs("[[archetype]]\npersona = \"nobody\"\nnoise_sd = 1.0\ncount = 1\n", &PersonaTable::default()).is_err());
    }

    #[test]
    fn apportion_hits_totals() {
        let w = [[1.0, 0.0, 1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 1.0, 0.0, 0.0, 0.0]];
        let out = apportion(&w, [10, 5, 3, 0, 0, 0]);
        assert_eq!(out[0][0] + out[1][0], 10);
        assert_eq!(out[0][1] + out[1][1], 0);
        assert_eq!((out[0][2], out[1][2]), (2, 1));
    }

    #[test]
    fn events_match_counts() {
        let repo = RepoSlug::new("lab", "tool").unwrap();
        let members = vec![
            SyntheticMember { login: "a".into(), counts: [3, 1, 0, 0, 2, 0] },
            SyntheticMember { login: "b".into(), counts: [0, 0, 1, 1, 0, 2] },
        ];
        let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        let t1 = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
        let set = synthesize_events(&repo, &members, t0, t1, t1, 4).unwrap();
        assert_eq!(set.events.len(), 10);
        assert!(set.events.iter().all(|e| e.timestamp >= t0 && e.timestamp < t1));
        assert_eq!(set, synthesize_events(&repo, &members, t0, t1, t1, 4).unwrap());
    }
}
