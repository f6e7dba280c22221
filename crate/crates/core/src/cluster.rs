//! Ward agglomerative clustering, dendrogram cutting and Calinski-Harabasz
//! model selection.
//!
//! Dissimilarities are kept as squared Euclidean distances and updated with
//! the Lance-Williams recurrence for Ward linkage. Reported merge heights are
//! the square roots of those values, so two singletons merge at their
//! Euclidean distance.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub const DENDROGRAM_FORMAT: &str = "persona-miner-dendrogram";
pub const DENDROGRAM_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("no input rows")]
    Empty,
    #[error("row {row} has {found} features, expected {expected}")]
    Dimension { row: usize, expected: usize, found: usize },
    #[error("row {row} feature {feature} is not finite")]
    NonFinite { row: usize, feature: usize },
    #[error("k = {k} is outside [{min}, {max}]")]
    KOutOfRange { k: usize, min: usize, max: usize },
    #[error("{0}")]
    Domain(String),
    #[error("{n} rows need {needed} bytes of dissimilarities, over the {budget} byte budget; sub-sample the input")]
    MemoryBudget { n: usize, needed: u64, budget: u64 },
    #[error("dendrogram file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller of the two node ids joined.
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>) -> Result<Self, ClusterError> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(ClusterError::Domain("cluster labels must cover 0..k without gaps".into()));
        }
        Ok(ClusterLabels { labels, k })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == cluster).map(|(i, _)| i).collect()
    }
}

fn validate_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<usize, ClusterError> {
    let first = rows.first().ok_or(ClusterError::Empty)?;
    let dim = first.as_ref().len();
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(ClusterError::Dimension { row: i, expected: dim, found: r.len() });
        }
        if let Some(f) = r.iter().position(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite { row: i, feature: f });
        }
    }
    Ok(dim)
}

/// Bytes held by the condensed dissimilarity matrix for `n` rows.
pub fn dissimilarity_bytes(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2 * std::mem::size_of::<f64>() as u64
}

pub fn check_memory_budget(n: usize, budget_bytes: u64) -> Result<(), ClusterError> {
    let needed = dissimilarity_bytes(n);
    if needed > budget_bytes {
        Err(ClusterError::MemoryBudget { n, needed, budget: budget_bytes })
    } else {
        Ok(())
    }
}

#[inline]
fn condensed(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn distance_matrix<R: AsRef<[f64]> + Sync>(rows: &[R]) -> Vec<f64> {
    let n = rows.len();
    let mut d = vec![0.0; n * n.saturating_sub(1) / 2];
    let fill = |start: usize, chunk: &mut [f64]| {
        // `start` is the first row whose entries live in `chunk`
        let mut off = 0;
        let mut i = start;
        while off < chunk.len() {
            for j in i + 1..n {
                chunk[off] = squared_distance(rows[i].as_ref(), rows[j].as_ref());
                off += 1;
            }
            i += 1;
        }
    };
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(8);
    if n < 2048 || workers < 2 {
        fill(0, &mut d);
        return d;
    }
    // split rows into blocks of roughly equal entry counts
    let per_block = d.len() / workers + 1;
    let mut blocks = Vec::new();
    let mut rest: &mut [f64] = &mut d;
    let mut row = 0;
    while row < n - 1 {
        let start = row;
        let mut len = 0;
        while row < n - 1 && len < per_block {
            len += n - row - 1;
            row += 1;
        }
        let (head, tail) = rest.split_at_mut(len);
        blocks.push((start, head));
        rest = tail;
    }
    std::thread::scope(|s| {
        for (start, chunk) in blocks {
            let fill = &fill;
            s.spawn(move || fill(start, chunk));
        }
    });
    d
}

/// Ward update of d(k, i ∪ j) from squared dissimilarities.
#[inline]
pub(crate) fn ward_update(d_ki: f64, d_kj: f64, d_ij: f64, n_i: f64, n_j: f64, n_k: f64) -> f64 {
    ((n_i + n_k) * d_ki + (n_j + n_k) * d_kj - n_k * d_ij) / (n_i + n_j + n_k)
}

/// Binary min-heap over row ids keyed by (value, row), with position lookup.
struct IndexedHeap {
    heap: Vec<usize>,
    pos: Vec<usize>,
    key: Vec<f64>,
}

const ABSENT: usize = usize::MAX;

impl IndexedHeap {
    fn new(n: usize) -> Self {
        IndexedHeap { heap: Vec::with_capacity(n), pos: vec![ABSENT; n], key: vec![f64::INFINITY; n] }
    }

    #[inline]
    fn less(&self, a: usize, b: usize) -> bool {
        let (ka, kb) = (self.key[a], self.key[b]);
        ka < kb || (ka == kb && a < b)
    }

    fn top(&self) -> Option<usize> {
        self.heap.first().copied()
    }

    fn set(&mut self, row: usize, key: f64) {
        let old = self.key[row];
        self.key[row] = key;
        if self.pos[row] == ABSENT {
            self.pos[row] = self.heap.len();
            self.heap.push(row);
            self.sift_up(self.pos[row]);
        } else if key < old {
            self.sift_up(self.pos[row]);
        } else {
            self.sift_down(self.pos[row]);
        }
    }

    fn remove(&mut self, row: usize) {
        let p = self.pos[row];
        if p == ABSENT {
            return;
        }
        let last = self.heap.pop().unwrap();
        self.pos[row] = ABSENT;
        if last != row {
            self.heap[p] = last;
            self.pos[last] = p;
            self.sift_up(p);
            self.sift_down(self.pos[last]);
        }
    }

    fn sift_up(&mut self, mut p: usize) {
        while p > 0 {
            let parent = (p - 1) / 2;
            if self.less(self.heap[p], self.heap[parent]) {
                self.swap(p, parent);
                p = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut p: usize) {
        loop {
            let (l, r) = (2 * p + 1, 2 * p + 2);
            let mut best = p;
            if l < self.heap.len() && self.less(self.heap[l], self.heap[best]) {
                best = l;
            }
            if r < self.heap.len() && self.less(self.heap[r], self.heap[best]) {
                best = r;
            }
            if best == p {
                break;
            }
            self.swap(p, best);
            p = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a]] = a;
        self.pos[self.heap[b]] = b;
    }
}

/// Ward agglomeration. Among equal dissimilarities the pair with the lowest
/// (i, j) cluster slots merges first; a merged cluster keeps the lower slot.
pub fn agglomerate<R: AsRef<[f64]> + Sync>(rows: &[R]) -> Result<Dendrogram, ClusterError> {
    validate_rows(rows)?;
    let n = rows.len();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    if n == 1 {
        return Ok(Dendrogram { n_leaves: 1, merges });
    }
    let mut d = distance_matrix(rows);
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut node = (0..n).collect::<Vec<_>>();
    // next active slot after each slot, for scanning rows
    let mut next = (1..=n).collect::<Vec<_>>();
    let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
    let mut nn = vec![0usize; n];
    let mut dirty = vec![false; n];
    let mut heap = IndexedHeap::new(n);

    let scan = |d: &[f64], next: &[usize], i: usize| -> (f64, usize) {
        let mut best = (f64::INFINITY, ABSENT);
        let mut j = next[i];
        while j < n {
            let v = d[condensed(n, i, j)];
            if v < best.0 || best.1 == ABSENT {
                best = (v, j);
            }
            j = next[j];
        }
        best
    };

    for i in 0..n - 1 {
        let (v, j) = scan(&d, &next, i);
        nn[i] = j;
        heap.set(i, v);
    }

    for step in 0..n - 1 {
        let (a, b) = loop {
            let i = heap.top().expect("heap holds a row while merges remain");
            if dirty[i] {
                dirty[i] = false;
                let (v, j) = scan(&d, &next, i);
                if j == ABSENT {
                    heap.remove(i);
                } else {
                    nn[i] = j;
                    heap.set(i, v);
                }
                continue;
            }
            break (i, nn[i]);
        };
        let d_ab = d[condensed(n, a, b)];
        let (na, nb) = (size[a] as f64, size[b] as f64);
        let new_size = size[a] + size[b];
        let (lo, hi) = if node[a] < node[b] { (node[a], node[b]) } else { (node[b], node[a]) };
        merges.push(Merge { a: lo, b: hi, height: d_ab.max(0.0).sqrt(), size: new_size });

        // unlink b
        active[b] = false;
        heap.remove(b);
        let (pb, nxb) = (prev[b], next[b]);
        if pb != ABSENT {
            next[pb] = nxb;
        }
        if nxb < n {
            prev[nxb] = pb;
        }

        let mut k = 0;
        while k < n {
            if !active[k] || k == a {
                k = if active[k] { next[k] } else { k + 1 };
                continue;
            }
            let nk = size[k] as f64;
            let d_ka = d[if k < a { condensed(n, k, a) } else { condensed(n, a, k) }];
            let d_kb = d[if k < b { condensed(n, k, b) } else { condensed(n, b, k) }];
            let v = ward_update(d_ka, d_kb, d_ab, na, nb, nk);
            if k < a {
                d[condensed(n, k, a)] = v;
                if nn[k] == a || nn[k] == b {
                    dirty[k] = true;
                    if v < heap.key[k] {
                        heap.set(k, v);
                    }
                } else if v < heap.key[k] || (v == heap.key[k] && a < nn[k]) {
                    nn[k] = a;
                    heap.set(k, v);
                }
            } else {
                d[condensed(n, a, k)] = v;
                if k < b && nn[k] == b {
                    dirty[k] = true;
                }
            }
            k = next[k];
        }
        size[a] = new_size;
        node[a] = n + step;
        let (v, j) = scan(&d, &next, a);
        dirty[a] = false;
        if j == ABSENT {
            heap.remove(a);
        } else {
            nn[a] = j;
            heap.set(a, v);
        }
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

impl Dendrogram {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let n = self.n_leaves;
        if n == 0 && self.merges.is_empty() {
            return Ok(());
        }
        if n == 0 || self.merges.len() != n - 1 {
            return Err(ClusterError::Format(format!("{} leaves need {} merges, found {}", n, n.saturating_sub(1), self.merges.len())));
        }
        let mut sizes = vec![1usize; n];
        let mut used = vec![false; 2 * n - 1];
        for (s, m) in self.merges.iter().enumerate() {
            let id = n + s;
            if m.a >= m.b || m.b >= id || used[m.a] || used[m.b] {
                return Err(ClusterError::Format(format!("merge {s} joins invalid nodes {} and {}", m.a, m.b)));
            }
            if !(m.height.is_finite() && m.height >= 0.0) {
                return Err(ClusterError::Format(format!("merge {s} has invalid height")));
            }
            if sizes[m.a] + sizes[m.b] != m.size {
                return Err(ClusterError::Format(format!("merge {s} size {} does not add up", m.size)));
            }
            used[m.a] = true;
            used[m.b] = true;
            sizes.push(m.size);
        }
        Ok(())
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Partition into `k` clusters by undoing the last `k - 1` merges.
    pub fn cut(&self, k: usize) -> Result<ClusterLabels, ClusterError> {
        let n = self.n_leaves;
        if k < 1 || k > n {
            return Err(ClusterError::KOutOfRange { k, min: 1, max: n });
        }
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        for (s, m) in self.merges.iter().take(n - k).enumerate() {
            parent[m.a] = n + s;
            parent[m.b] = n + s;
        }
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            while parent[x] != r {
                let up = parent[x];
                parent[x] = r;
                x = up;
            }
            r
        }
        let mut label_of_root = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(n);
        for leaf in 0..n {
            let r = root(&mut parent, leaf);
            let next = label_of_root.len();
            labels.push(*label_of_root.entry(r).or_insert(next));
        }
        Ok(ClusterLabels { labels, k })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), ClusterError> {
        #[derive(Serialize)]
        struct File<'a> {
            format: &'a str,
            version: u32,
            n_leaves: usize,
            merges: &'a [Merge],
        }
        serde_json::to_writer_pretty(
            out,
            &File { format: DENDROGRAM_FORMAT, version: DENDROGRAM_VERSION, n_leaves: self.n_leaves, merges: &self.merges },
        )?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, ClusterError> {
        #[derive(Deserialize)]
        struct File {
            format: String,
            version: u32,
            n_leaves: usize,
            merges: Vec<Merge>,
        }
        let f: File = serde_json::from_reader(input)?;
        if f.format != DENDROGRAM_FORMAT || f.version != DENDROGRAM_VERSION {
            return Err(ClusterError::Format(format!("unsupported {} version {}", f.format, f.version)));
        }
        let d = Dendrogram { n_leaves: f.n_leaves, merges: f.merges };
        d.validate()?;
        Ok(d)
    }
}

pub fn cut(d: &Dendrogram, k: usize) -> Result<ClusterLabels, ClusterError> {
    d.cut(k)
}

/// Calinski-Harabasz score. A zero within-cluster dispersion yields
/// `f64::INFINITY`, which ranks above every finite score.
pub fn ch_index<R: AsRef<[f64]>>(rows: &[R], labels: &ClusterLabels) -> Result<f64, ClusterError> {
    let dim = validate_rows(rows)?;
    let n = rows.len();
    let k = labels.k;
    if labels.labels.len() != n {
        return Err(ClusterError::Domain(format!("{} labels for {} rows", labels.labels.len(), n)));
    }
    if k < 2 || n <= k {
        return Err(ClusterError::Domain(format!("CH index needs 2 <= k < n, got k={k}, n={n}")));
    }
    let mut overall = vec![0.0; dim];
    let mut means = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(&labels.labels) {
        counts[l] += 1;
        for (f, v) in r.as_ref().iter().enumerate() {
            overall[f] += v;
            means[l][f] += v;
        }
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(ClusterError::Domain("empty cluster".into()));
    }
    overall.iter_mut().for_each(|v| *v /= n as f64);
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c as f64);
    }
    let between: f64 = means.iter().zip(&counts).map(|(m, &c)| c as f64 * squared_distance(m, &overall)).sum();
    let within: f64 = rows.iter().zip(&labels.labels).map(|(r, &l)| squared_distance(r.as_ref(), &means[l])).sum();
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    #[serde(with = "crate::real")]
    pub ch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k_best: usize,
    /// Every k tried, ascending.
    pub scores: Vec<KScore>,
}

impl KSelection {
    pub fn best_score(&self) -> f64 {
        self.scores.iter().find(|s| s.k == self.k_best).map_or(f64::NAN, |s| s.ch)
    }
}

/// Scores every cut of `d` with k in `[k_min, k_max]` (upper end clamped to
/// n - 1) and returns the best; equal scores go to the smaller k.
pub fn select_k_on<R: AsRef<[f64]>>(
    rows: &[R],
    d: &Dendrogram,
    k_min: usize,
    k_max: usize,
) -> Result<KSelection, ClusterError> {
    let n = rows.len();
    if n < 3 {
        return Err(ClusterError::Domain(format!("model selection needs at least 3 rows, got {n}")));
    }
    if d.n_leaves != n {
        return Err(ClusterError::Domain(format!("dendrogram has {} leaves for {} rows", d.n_leaves, n)));
    }
    let k_min = k_min.max(2);
    let hi = k_max.min(n - 1);
    if k_min > hi {
        return Err(ClusterError::KOutOfRange { k: k_min, min: 2, max: hi });
    }
    let mut scores = Vec::with_capacity(hi - k_min + 1);
    let mut best = (k_min, f64::NEG_INFINITY);
    for k in k_min..=hi {
        let s = ch_index(rows, &d.cut(k)?)?;
        if s > best.1 {
            best = (k, s);
        }
        scores.push(KScore { k, ch: s });
    }
    Ok(KSelection { k_best: best.0, scores })
}

pub fn select_k<R: AsRef<[f64]> + Sync>(rows: &[R], k_min: usize, k_max: usize) -> Result<(KSelection, Dendrogram), ClusterError> {
    let d = agglomerate(rows)?;
    let sel = select_k_on(rows, &d, k_min, k_max)?;
    Ok((sel, d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Subclustering {
    Split {
        /// Row indices of the parent's members, ascending.
        members: Vec<usize>,
        labels: ClusterLabels,
        selection: KSelection,
    },
    Unsplittable {
        members: Vec<usize>,
        reason: String,
    },
}

impl Subclustering {
    pub fn members(&self) -> &[usize] {
        match self {
            Subclustering::Split { members, .. } | Subclustering::Unsplittable { members, .. } => members,
        }
    }

    /// Local sub-label for each member; all zero when unsplittable.
    pub fn local_labels(&self) -> Vec<usize> {
        match self {
            Subclustering::Split { labels, .. } => labels.labels.clone(),
            Subclustering::Unsplittable { members, .. } => vec![0; members.len()],
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Subclustering::Split { labels, .. } => labels.k,
            Subclustering::Unsplittable { .. } => 1,
        }
    }
}

/// Re-clusters the rows of one parent cluster on their own.
pub fn subcluster<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    parent: &ClusterLabels,
    parent_id: usize,
    k_min: usize,
    k_max: usize,
) -> Result<Subclustering, ClusterError> {
    if parent.labels.len() != rows.len() {
        return Err(ClusterError::Domain(format!("{} labels for {} rows", parent.labels.len(), rows.len())));
    }
    if parent_id >= parent.k {
        return Err(ClusterError::KOutOfRange { k: parent_id, min: 0, max: parent.k.saturating_sub(1) });
    }
    let members = parent.members(parent_id);
    if members.len() < 3 {
        let reason = format!("cluster {parent_id} has {} members, at least 3 are needed", members.len());
        return Ok(Subclustering::Unsplittable { members, reason });
    }
    let subset: Vec<&[f64]> = members.iter().map(|&i| rows[i].as_ref()).collect();
    let (selection, d) = select_k(&subset, k_min, k_max)?;
    let labels = d.cut(selection.k_best)?;
    Ok(Subclustering::Split { members, labels, selection })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub repo: String,
    pub login: String,
    pub cluster: usize,
    pub subcluster: Option<usize>,
}

pub const LABELS_HEADER: [&str; 4] = ["repo", "login", "cluster", "subcluster"];

pub fn write_labels_csv<W: Write>(rows: &[LabelRow], out: W) -> Result<(), ClusterError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LABELS_HEADER)?;
    for r in rows {
        w.write_record([
            r.repo.clone(),
            r.login.clone(),
            r.cluster.to_string(),
            r.subcluster.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(input: R) -> Result<Vec<LabelRow>, ClusterError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(LABELS_HEADER) {
        return Err(ClusterError::Format(format!("unexpected labels header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |s: &str| s.parse::<usize>().map_err(|e| ClusterError::Format(format!("bad label {s:?}: {e}")));
        out.push(LabelRow {
            repo: rec[0].to_string(),
            login: rec[1].to_string(),
            cluster: num(&rec[2])?,
            subcluster: if rec[3].is_empty() { None } else { Some(num(&rec[3])?) },
        });
    }
    Ok(out)
}
