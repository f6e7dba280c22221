//! Persona profiles and nearest-centroid labelling.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterLabels, Subclustering};
use crate::metrics::MetricVector;

const DEFAULT_PERSONAS: &str = include_str!("../data/personas.toml");

pub const UNMATCHED_PERSONA: &str = "Unmatched persona";
pub const DEFAULT_MATCH_THRESHOLD: f64 = 25.0;

#[derive(Debug, thiserror::Error)]
pub enum PersonaError {
    #[error("persona table: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("personas file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Interactivity {
    Low,
    Moderate,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaProfile {
    pub name: String,
    pub interactivity: Interactivity,
    /// Reference RC means in metric order.
    pub centroid: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersonaTable {
    profiles: Vec<PersonaProfile>,
}

#[derive(Deserialize)]
struct PersonaFile {
    persona: Vec<PersonaProfile>,
}

impl PersonaTable {
    pub fn new(profiles: Vec<PersonaProfile>) -> Result<Self, PersonaError> {
        if profiles.is_empty() {
            return Err(PersonaError::Config("no personas defined".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for p in &profiles {
            if !names.insert(p.name.as_str()) || p.name == UNMATCHED_PERSONA {
                return Err(PersonaError::Config(format!("persona name {:?} reserved or repeated", p.name)));
            }
            if p.centroid.iter().any(|v| !(0.0..=100.0).contains(v)) {
                return Err(PersonaError::Config(format!("{} centroid outside [0, 100]", p.name)));
            }
        }
        Ok(PersonaTable { profiles })
    }

    pub fn from_toml(text: &str) -> Result<Self, PersonaError> {
        let file: PersonaFile = toml::from_str(text).map_err(|e| PersonaError::Config(e.to_string()))?;
        PersonaTable::new(file.persona)
    }

    pub fn profiles(&self) -> &[PersonaProfile] {
        &self.profiles
    }

    pub fn get(&self, name: &str) -> Option<&PersonaProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    /// Nearest profile by Euclidean distance; earlier declarations win ties.
    pub fn nearest(&self, rcs: &[f64; 6]) -> (&PersonaProfile, f64) {
        let mut best = (&self.profiles[0], distance(rcs, &self.profiles[0].centroid));
        for p in &self.profiles[1..] {
            let d = distance(rcs, &p.centroid);
            if d < best.1 {
                best = (p, d);
            }
        }
        best
    }
}

impl Default for PersonaTable {
    fn default() -> Self {
        PersonaTable::from_toml(DEFAULT_PERSONAS).expect("bundled persona table is valid")
    }
}

pub fn distance(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMrc {
    pub cluster: usize,
    pub mean_mrc: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractivityOrder {
    Standard(BTreeMap<usize, Interactivity>),
    /// Not three clusters: rank 0 is the least interactive.
    NonstandardK(BTreeMap<usize, usize>),
}

/// Ranks clusters by ascending mean MRC; equal means put the larger cluster first.
pub fn order_clusters_by_interactivity(clusters: &[ClusterMrc]) -> InteractivityOrder {
    let mut sorted = clusters.to_vec();
    sorted.sort_by(|a, b| a.mean_mrc.total_cmp(&b.mean_mrc).then(b.size.cmp(&a.size)).then(a.cluster.cmp(&b.cluster)));
    if sorted.len() == 3 {
        let levels = [Interactivity::Low, Interactivity::Moderate, Interactivity::High];
        InteractivityOrder::Standard(sorted.iter().zip(levels).map(|(c, l)| (c.cluster, l)).collect())
    } else {
        InteractivityOrder::NonstandardK(sorted.iter().enumerate().map(|(r, c)| (c.cluster, r)).collect())
    }
}

pub fn label_subcluster(centroid: &[f64; 6], table: &PersonaTable) -> (String, f64) {
    let (p, d) = table.nearest(centroid);
    (p.name.clone(), d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaAssignment {
    pub repo: String,
    pub login: String,
    pub persona: String,
    pub distance: f64,
    pub cluster: Option<usize>,
    pub subcluster: Option<usize>,
}

/// Direct mode: the individual's own six RCs against every profile.
pub fn assign_persona(v: &MetricVector, table: &PersonaTable) -> PersonaAssignment {
    let (p, d) = table.nearest(&v.rcs());
    PersonaAssignment {
        repo: v.repo.to_string(),
        login: v.login.clone(),
        persona: p.name.clone(),
        distance: d,
        cluster: None,
        subcluster: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubclusterPersona {
    pub cluster: usize,
    pub subcluster: usize,
    pub size: usize,
    pub centroid: [f64; 6],
    pub mean_mrc: f64,
    /// Label used for members: the nearest profile, or the unmatched marker.
    pub persona: String,
    pub nearest: String,
    pub distance: f64,
}

fn rc_mean(vectors: &[MetricVector], members: &[usize]) -> ([f64; 6], f64) {
    let mut c = [0.0; 6];
    let mut mrc = 0.0;
    for &i in members {
        for (acc, v) in c.iter_mut().zip(vectors[i].rcs()) {
            *acc += v;
        }
        mrc += vectors[i].mrc;
    }
    let n = members.len() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    (c, mrc / n)
}

/// Pipeline mode: label each discovered sub-cluster by its centroid, then
/// give every member that label. Distances on the assignments are measured
/// from the member to the labelled (or nearest, when unmatched) profile.
pub fn label_pipeline(
    vectors: &[MetricVector],
    initial: &ClusterLabels,
    subclusters: &[Subclustering],
    table: &PersonaTable,
    threshold: f64,
) -> Result<(Vec<SubclusterPersona>, Vec<PersonaAssignment>), PersonaError> {
    if initial.labels.len() != vectors.len() {
        return Err(PersonaError::Domain(format!("{} labels for {} vectors", initial.labels.len(), vectors.len())));
    }
    if subclusters.len() != initial.k {
        return Err(PersonaError::Domain(format!("{} sub-clusterings for {} clusters", subclusters.len(), initial.k)));
    }
    let mut sub_of: Vec<Option<usize>> = vec![None; vectors.len()];
    for (cluster, sub) in subclusters.iter().enumerate() {
        for (&m, l) in sub.members().iter().zip(sub.local_labels()) {
            if initial.labels[m] != cluster {
                return Err(PersonaError::Domain(format!("row {m} is not a member of cluster {cluster}")));
            }
            sub_of[m] = Some(l);
        }
    }
    let sub_of = sub_of
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| PersonaError::Domain(format!("row {i} is in no sub-cluster"))))
        .collect::<Result<Vec<_>, _>>()?;
    label_nested(vectors, &initial.labels, &sub_of, table, threshold)
}

/// Same labelling from flat (cluster, sub-cluster) pairs, one per vector,
/// as read back from a labels file.
pub fn label_nested(
    vectors: &[MetricVector],
    cluster_of: &[usize],
    sub_of: &[usize],
    table: &PersonaTable,
    threshold: f64,
) -> Result<(Vec<SubclusterPersona>, Vec<PersonaAssignment>), PersonaError> {
    if cluster_of.len() != vectors.len() || sub_of.len() != vectors.len() {
        return Err(PersonaError::Domain(format!(
            "{} cluster and {} sub-cluster labels for {} vectors",
            cluster_of.len(),
            sub_of.len(),
            vectors.len()
        )));
    }
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, (&c, &s)) in cluster_of.iter().zip(sub_of).enumerate() {
        groups.entry((c, s)).or_default().push(i);
    }
    let mut personas = Vec::with_capacity(groups.len());
    let mut assignments: Vec<Option<PersonaAssignment>> = vec![None; vectors.len()];
    for ((cluster, s), group) in groups {
        let (centroid, mean_mrc) = rc_mean(vectors, &group);
        let (nearest, dist) = table.nearest(&centroid);
        let persona = if dist > threshold { UNMATCHED_PERSONA.to_string() } else { nearest.name.clone() };
        for &i in &group {
            assignments[i] = Some(PersonaAssignment {
                repo: vectors[i].repo.to_string(),
                login: vectors[i].login.clone(),
                persona: persona.clone(),
                distance: distance(&vectors[i].rcs(), &nearest.centroid),
                cluster: Some(cluster),
                subcluster: Some(s),
            });
        }
        personas.push(SubclusterPersona {
            cluster,
            subcluster: s,
            size: group.len(),
            centroid,
            mean_mrc,
            persona,
            nearest: nearest.name.clone(),
            distance: dist,
        });
    }
    let assignments = assignments.into_iter().map(|a| a.expect("every row grouped")).collect();
    Ok((personas, assignments))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityCheck {
    pub checked_repos: usize,
    /// Repositories with more than one high-interactivity holder whose six RCs all exceed 50.
    pub violations: Vec<String>,
}

impl SanityCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn dominant_holder_check(vectors: &[MetricVector], assignments: &[PersonaAssignment], table: &PersonaTable) -> SanityCheck {
    let mut per_repo: BTreeMap<&str, usize> = BTreeMap::new();
    for (v, a) in vectors.iter().zip(assignments) {
        per_repo.entry(a.repo.as_str()).or_insert(0);
        let high = table.get(&a.persona).is_some_and(|p| p.interactivity == Interactivity::High);
        if high && v.rcs().iter().all(|&r| r > 50.0) {
            *per_repo.get_mut(a.repo.as_str()).unwrap() += 1;
        }
    }
    SanityCheck {
        checked_repos: per_repo.len(),
        violations: per_repo.into_iter().filter(|(_, n)| *n > 1).map(|(r, _)| r.to_string()).collect(),
    }
}

pub const PERSONAS_HEADER: [&str; 6] = ["repo", "login", "persona", "distance", "cluster", "subcluster"];

pub fn write_personas_csv<W: Write>(rows: &[PersonaAssignment], out: W) -> Result<(), PersonaError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PERSONAS_HEADER)?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.repo.clone(),
            r.login.clone(),
            r.persona.clone(),
            format!("{}", r.distance),
            opt(r.cluster),
            opt(r.subcluster),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_personas_csv<R: Read>(input: R) -> Result<Vec<PersonaAssignment>, PersonaError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(PERSONAS_HEADER) {
        return Err(PersonaError::Format(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let opt = |s: &str| -> Result<Option<usize>, PersonaError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| PersonaError::Format(format!("bad cluster id {s:?}: {e}")))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let distance: f64 = rec[3].parse().map_err(|e| PersonaError::Format(format!("bad distance {:?}: {e}", &rec[3])))?;
        if !(distance.is_finite() && distance >= 0.0) {
            return Err(PersonaError::Format(format!("distance {distance} must be nonnegative")));
        }
        out.push(PersonaAssignment {
            repo: rec[0].to_string(),
            login: rec[1].to_string(),
            persona: rec[2].to_string(),
            distance,
            cluster: opt(&rec[4])?,
            subcluster: opt(&rec[5])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RepoSlug;

    fn vector(rcs: [f64; 6], mrc_noise: bool) -> MetricVector {
        let mut v = MetricVector::from_rcs(RepoSlug::new("o", "r").unwrap(), "x".into(), rcs, 10.0, 10.0, 6);
        if mrc_noise {
            v.mrc = 99.0;
        }
        v
    }

    #[test]
    fn centroids_label_themselves() {
        let t = PersonaTable::default();
        assert_eq!(t.profiles().len(), 7);
        for p in t.profiles() {
            let (name, d) = label_subcluster(&p.centroid, &t);
            assert_eq!((name.as_str(), d), (p.name.as_str(), 0.0));
        }
    }

    #[test]
    fn extremes() {
        let t = PersonaTable::default();
        assert_eq!(label_subcluster(&[0.0; 6], &t).0, "Ephemeral Contributor");
        assert_eq!(assign_persona(&vector([100.0; 6], false), &t).persona, "Active Contributor");
        let occ = t.get("Occasional Contributor").unwrap().centroid;
        let a = assign_persona(&vector(occ, true), &t);
        assert_eq!((a.persona.as_str(), a.distance), ("Occasional Contributor", 0.0));
    }

    #[test]
    fn interactivity_order() {
        let c = |cluster, mean_mrc, size| ClusterMrc { cluster, mean_mrc, size };
        let o = order_clusters_by_interactivity(&[c(2, 0.34, 10), c(0, 18.88, 10), c(1, 54.89, 10)]);
        let want: BTreeMap<_, _> = [(2, Interactivity::Low), (0, Interactivity::Moderate), (1, Interactivity::High)].into();
        assert_eq!(o, InteractivityOrder::Standard(want));
        let o = order_clusters_by_interactivity(&[c(1, 5.0, 3), c(0, 5.0, 8), c(2, 50.0, 1)]);
        let want: BTreeMap<_, _> = [(0, Interactivity::Low), (1, Interactivity::Moderate), (2, Interactivity::High)].into();
        assert_eq!(o, InteractivityOrder::Standard(want));
        assert!(matches!(order_clusters_by_interactivity(&[c(0, 1.0, 1), c(1, 2.0, 1)]), InteractivityOrder::NonstandardK(_)));
    }

    #[test]
    fn table_validation() {
        let p = |name: &str, v: f64| PersonaProfile { name: name.into(), interactivity: Interactivity::Low, centroid: [v; 6] };
        assert!(PersonaTable::new(vec![p("a", 1.0), p("a", 2.0)]).is_err());
        assert!(PersonaTable::new(vec![p("a", 101.0)]).is_err());
        assert!(PersonaTable::new(vec![]).is_err());
    }

    #[test]
    fn personas_csv_roundtrip() {
        let rows = vec![PersonaAssignment {
            repo: "o/r".into(),
            login: "x".into(),
            persona: "Active Contributor".into(),
            distance: 0.1 + 0.2,
            cluster: Some(1),
            subcluster: None,
        }];
        let mut buf = Vec::new();
        write_personas_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_personas_csv(&buf[..]).unwrap(), rows);
    }
}
