//! Regenerates `fixtures/three_repos.jsonl`, the small archive the
//! end-to-end tests run on.
//!
//! cargo run -p persona-miner-cli --example make_fixture

use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use persona_miner::ingest::{Archive, RepoSlug, RepoSummary, Visibility};
use persona_miner::personas::PersonaTable;
use persona_miner::simgen::{apportion, synthesize_events, SyntheticMember};

struct Repo {
    name: &'static str,
    language: &'static str,
    totals: [u64; 6],
    // persona name, how many members
    mix: &'static [(&'static str, usize)],
}

const REPOS: [Repo; 3] = [
    Repo {
        name: "solver",
        language: "Python",
        totals: [320, 64, 48, 22, 70, 66],
        mix: &[("Active Contributor", 1), ("Moderate Contributor", 2), ("Occasional Contributor", 4), ("Ephemeral Contributor", 6)],
    },
    Repo {
        name: "meshkit",
        language: "C++",
        totals: [410, 90, 72, 35, 96, 90],
        mix: &[("Low-Process Closer", 1), ("Project Organiser", 2), ("Occasional Contributor", 5), ("Ephemeral Contributor", 8)],
    },
    Repo {
        name: "plotlab",
        language: "R",
        totals: [260, 80, 61, 40, 58, 55],
        mix: &[("Low-Coding Closer", 1), ("Moderate Contributor", 1), ("Occasional Contributor", 3), ("Ephemeral Contributor", 7)],
    },
];

fn main() {
    let table = PersonaTable::default();
    let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(2024, 12, 31, 0, 0, 0).unwrap();
    let fetched = Utc.with_ymd_and_hms(2025, 3, 15, 12, 0, 0).unwrap();
    let mut archive = Archive::default();
    for (r, repo) in REPOS.iter().enumerate() {
        let slug = RepoSlug::new("fixture-lab", repo.name).unwrap();
        let mut logins = Vec::new();
        let mut weights = Vec::new();
        for (persona, count) in repo.mix {
            let centroid = table.get(persona).unwrap().centroid;
            for i in 0..*count {
                logins.push(format!("{}-{}", persona.split(' ').next().unwrap().to_lowercase(), i));
                // every member opens at least one issue
                let mut w = centroid;
                w[1] = w[1].max(0.6);
                weights.push(w);
            }
        }
        let counts = apportion(&weights, repo.totals);
        let mut members: Vec<SyntheticMember> =
            logins.into_iter().zip(counts).map(|(login, counts)| SyntheticMember { login, counts }).collect();
        members.push(SyntheticMember { login: "dependabot[bot]".into(), counts: [12, 0, 0, 0, 12, 0] });
        let set = synthesize_events(&slug, &members, start, end, fetched, 100 + r as u64).unwrap();
        archive.summaries.push(RepoSummary {
            slug: slug.clone(),
            visibility: Visibility::Public,
            unique_committers: members.iter().filter(|m| m.counts[0] > 0).count().max(10) as u64,
            license_id: Some("MIT".into()),
            languages: vec![repo.language.into()],
            is_fork: false,
            created_at: Utc.with_ymd_and_hms(2018, 6, 1, 0, 0, 0).unwrap(),
            age_days: 0,
            default_branch: "main".into(),
        });
        archive.sets.push(set);
    }
    // a candidate that fails the screen and was never mined
    archive.summaries.push(RepoSummary {
        slug: RepoSlug::new("fixture-lab", "tiny-fork").unwrap(),
        visibility: Visibility::Public,
        unique_committers: 2,
        license_id: Some("GPL-3.0".into()),
        languages: vec!["Fortran".into()],
        is_fork: true,
        created_at: Utc.with_ymd_and_hms(2024, 11, 1, 0, 0, 0).unwrap(),
        age_days: 0,
        default_branch: "main".into(),
    });
    let out = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/three_repos.jsonl");
    archive.save(&out).unwrap();
    println!("wrote {}", out.display());
}
