//! Zenodo record search.

use serde_json::Value;

use super::http::Fetcher;
use super::{IngestError, RepoSlug, ZenodoRecord};

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ZenodoQuery {
    pub base_url: String,
    pub query: String,
    pub resource_type: String,
    pub access_right: String,
    pub related_url_contains: String,
    pub page_size: u32,
}

impl Default for ZenodoQuery {
    fn default() -> Self {
        ZenodoQuery {
            base_url: "https://zenodo.org/api".into(),
            query: "github.com".into(),
            resource_type: "software".into(),
            access_right: "open".into(),
            related_url_contains: "github.com".into(),
            page_size: 100,
        }
    }
}

impl ZenodoQuery {
    pub fn page_url(&self, page: u32) -> String {
        format!(
            "{}/records?q={}&type={}&access_right={}&size={}&page={}",
            self.base_url.trim_end_matches('/'),
            encode_query_value(&self.query),
            encode_query_value(&self.resource_type),
            encode_query_value(&self.access_right),
            self.page_size,
            page
        )
    }

    fn accepts(&self, rec: &ZenodoRecord) -> bool {
        rec.resource_type == self.resource_type
            && rec.access_right == self.access_right
            && rec.related_urls.iter().any(|u| u.contains(&self.related_url_contains))
    }
}

fn encode_query_value(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            b' ' => out.push('+'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// Walks result pages 1..=`page_limit`, stopping early at an empty page or
/// when the response has no `next` link. Records that do not parse are
/// logged and skipped.
pub fn query_zenodo_software_records(
    fetcher: &Fetcher,
    query: &ZenodoQuery,
    page_limit: u32,
) -> Result<Vec<ZenodoRecord>, IngestError> {
    let mut records = Vec::new();
    for page in 1..=page_limit {
        let url = query.page_url(page);
        let resp = fetcher.get(&url)?;
        if resp.status != 200 {
            return Err(IngestError::Status { status: resp.status, url });
        }
        let body: Value = serde_json::from_str(&resp.body)
            .map_err(|e| IngestError::Malformed { url: url.clone(), message: e.to_string() })?;
        let hits = body
            .pointer("/hits/hits")
            .and_then(Value::as_array)
            .ok_or_else(|| IngestError::Malformed { url: url.clone(), message: "missing hits.hits".into() })?;
        if hits.is_empty() {
            break;
        }
        for hit in hits {
            match parse_record(hit) {
                Some(rec) if query.accepts(&rec) => records.push(rec),
                Some(_) => {}
                None => log::warn!("skipping malformed Zenodo record on page {page}: {hit}"),
            }
        }
        if body.pointer("/links/next").and_then(Value::as_str).is_none() {
            break;
        }
    }
    Ok(records)
}

fn parse_record(hit: &Value) -> Option<ZenodoRecord> {
    let record_id = match hit.get("id")? {
        Value::Number(n) => n.to_string(),
        Value::String(s) if !s.is_empty() => s.clone(),
        _ => return None,
    };
    let meta = hit.get("metadata")?;
    let resource_type = meta.pointer("/resource_type/type")?.as_str()?.to_string();
    let access_right = meta.get("access_right")?.as_str()?.to_string();
    let related_urls = match meta.get("related_identifiers") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|i| i.get("identifier").and_then(Value::as_str).map(str::to_string))
            .collect(),
        Some(_) => return None,
    };
    Some(ZenodoRecord { record_id, resource_type, access_right, related_urls })
}

/// First related URL of the form `github.com/<owner>/<name>[/...]`.
pub fn extract_github_slug(record: &ZenodoRecord) -> Option<RepoSlug> {
    record.related_urls.iter().find_map(|u| parse_github_url(u))
}

pub fn parse_github_url(url: &str) -> Option<RepoSlug> {
    let rest = url.trim();
    let rest = rest
        .strip_prefix("https://")
        .or_else(|| rest.strip_prefix("http://"))
        .unwrap_or(rest);
    let rest = rest.split(['?', '#']).next()?;
    let mut parts = rest.split('/');
    let host = parts.next()?.to_ascii_lowercase();
    if host != "github.com" && host != "www.github.com" {
        return None;
    }
    let owner = parts.next()?;
    let name = parts.next()?;
    let name = name.strip_suffix(".git").unwrap_or(name);
    RepoSlug::new(owner, name).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::http::{FixtureTransport, HttpResponse, RateBudget, RetryPolicy};
    use std::sync::Arc;

    fn rec(urls: &[&str]) -> ZenodoRecord {
        ZenodoRecord {
            record_id: "1".into(),
            resource_type: "software".into(),
            access_right: "open".into(),
            related_urls: urls.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn slug_extraction() {
        let s = extract_github_slug(&rec(&["https://github.com/owner/repo"])).unwrap();
        assert_eq!((s.owner(), s.name()), ("owner", "repo"));
        let s = extract_github_slug(&rec(&["https://github.com/owner/repo/tree/v1.0"])).unwrap();
        assert_eq!((s.owner(), s.name()), ("owner", "repo"));
        assert_eq!(extract_github_slug(&rec(&["https://gitlab.example.com/x/y"])), None);
        assert_eq!(extract_github_slug(&rec(&[])), None);
        assert_eq!(extract_github_slug(&rec(&["https://github.com/owner"])), None);
        let s = extract_github_slug(&rec(&["https://doi.org/10/x", "http://www.github.com/A/B.git?x=1"])).unwrap();
        assert_eq!(s.to_string(), "A/B");
    }

    fn fetcher(t: Arc<FixtureTransport>) -> Fetcher {
        Fetcher::new(t, Arc::new(RateBudget::unlimited()), RetryPolicy::immediate(0))
    }

    fn hit(id: u64, ty: &str, url: &str) -> String {
        format!(
            r#"{{"id":{id},"metadata":{{"resource_type":{{"type":"{ty}"}},"access_right":"open","related_identifiers":[{{"identifier":"{url}","relation":"isSupplementTo"}}]}}}}"#
        )
    }

    #[test]
    fn empty_page_gives_nothing() {
        let q = ZenodoQuery::default();
        let t = Arc::new(FixtureTransport::new());
        t.route(&q.page_url(1), HttpResponse::ok(r#"{"hits":{"hits":[],"total":0},"links":{}}"#));
        assert!(query_zenodo_software_records(&fetcher(t), &q, 5).unwrap().is_empty());
    }

    #[test]
    fn pages_are_followed_and_bad_records_skipped() {
        let q = ZenodoQuery::default();
        let t = Arc::new(FixtureTransport::new());
        let p1 = format!(
            r#"{{"hits":{{"hits":[{},{},{{"id":null}}]}},"links":{{"next":"x"}}}}"#,
            hit(1, "software", "https://github.com/a/one"),
            hit(2, "software", "https://github.com/a/two/tree/main"),
        );
        let p2 = format!(
            r#"{{"hits":{{"hits":[{},{}]}},"links":{{}}}}"#,
            hit(3, "software", "https://github.com/b/three"),
            hit(4, "dataset", "https://github.com/b/four"),
        );
        t.route(&q.page_url(1), HttpResponse::ok(p1));
        t.route(&q.page_url(2), HttpResponse::ok(p2));
        let recs = query_zenodo_software_records(&fetcher(t.clone()), &q, 10).unwrap();
        let ids: Vec<_> = recs.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["1", "2", "3"]);
        assert_eq!(t.calls(), 2);
    }

    #[test]
    fn page_limit_is_respected() {
        let q = ZenodoQuery::default();
        let t = Arc::new(FixtureTransport::new());
        for p in 1..=3 {
            let body = format!(r#"{{"hits":{{"hits":[{}]}},"links":{{"next":"x"}}}}"#, hit(p, "software", "https://github.com/a/b"));
            t.route(&q.page_url(p as u32), HttpResponse::ok(body));
        }
        assert_eq!(query_zenodo_software_records(&fetcher(t), &q, 2).unwrap().len(), 2);
    }

    #[test]
    fn query_values_are_encoded() {
        assert_eq!(encode_query_value("a b/c"), "a+b%2Fc");
    }
}
