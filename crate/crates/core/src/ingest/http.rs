//! Minimal HTTP plumbing: a transport trait, a shared token-bucket budget,
//! and retry with exponential backoff for transient and secondary-limit
//! responses.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-cased header names.
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        HttpResponse { status, headers: BTreeMap::new(), body: body.into() }
    }

    pub fn ok(body: impl Into<String>) -> Self {
        HttpResponse::new(200, body)
    }

    pub fn with_header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.insert(name.to_ascii_lowercase(), value.into());
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }

    /// Target of the `rel="next"` entry of a `Link` header.
    pub fn next_link(&self) -> Option<String> {
        let link = self.header("link")?;
        link.split(',').find_map(|part| {
            let (url, rest) = part.split_once(';')?;
            if rest.split(';').any(|p| p.trim() == "rel=\"next\"") {
                Some(url.trim().trim_start_matches('<').trim_end_matches('>').to_string())
            } else {
                None
            }
        })
    }
}

/// A failed exchange that never produced a status line.
pub type TransportError = String;

pub trait Transport: Send + Sync {
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpResponse, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent("persona-miner/0.1")
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport::new(Duration::from_secs(60))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str, headers: &[(String, String)]) -> Result<HttpResponse, TransportError> {
        let mut req = self.agent.get(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req.call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, headers, body })
    }
}

/// Canned responses keyed by exact URL. A URL registered with several
/// responses serves them in order and then repeats the last one; unknown
/// URLs answer 404.
#[derive(Default)]
pub struct FixtureTransport {
    routes: Mutex<BTreeMap<String, VecDeque<Result<HttpResponse, TransportError>>>>,
    calls: AtomicUsize,
}

impl FixtureTransport {
    pub fn new() -> Self {
        FixtureTransport::default()
    }

    pub fn route(&self, url: &str, response: HttpResponse) -> &Self {
        self.push(url, Ok(response))
    }

    /// Drops anything queued for `url` before routing `response`.
    pub fn replace(&self, url: &str, response: HttpResponse) -> &Self {
        self.routes.lock().unwrap().remove(url);
        self.route(url, response)
    }

    pub fn fail(&self, url: &str, message: &str) -> &Self {
        self.push(url, Err(message.to_string()))
    }

    fn push(&self, url: &str, r: Result<HttpResponse, TransportError>) -> &Self {
        self.routes.lock().unwrap().entry(url.to_string()).or_default().push_back(r);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str, _headers: &[(String, String)]) -> Result<HttpResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut routes = self.routes.lock().unwrap();
        match routes.get_mut(url) {
            Some(queue) if queue.len() > 1 => queue.pop_front().unwrap(),
            Some(queue) => queue.front().cloned().unwrap_or_else(|| Ok(HttpResponse::new(404, ""))),
            None => Ok(HttpResponse::new(404, r#"{"message":"Not Found"}"#)),
        }
    }
}

/// Token bucket shared by every fetch worker.
pub struct RateBudget {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateBudget {
    pub fn new(capacity: u32, refill_per_sec: f64) -> Self {
        RateBudget {
            capacity: capacity as f64,
            refill_per_sec,
            state: Mutex::new((capacity as f64, Instant::now())),
        }
    }

    /// Effectively unlimited; for fixtures and tests.
    pub fn unlimited() -> Self {
        RateBudget::new(u32::MAX, f64::INFINITY)
    }

    /// GitHub's authenticated primary limit (5000/h).
    pub fn github_authenticated() -> Self {
        RateBudget::new(100, 5000.0 / 3600.0)
    }

    pub fn github_anonymous() -> Self {
        RateBudget::new(10, 60.0 / 3600.0)
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        if self.refill_per_sec.is_infinite() {
            return;
        }
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let elapsed = now.duration_since(st.1).as_secs_f64();
                st.0 = (st.0 + elapsed * self.refill_per_sec).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.refill_per_sec
            };
            thread::sleep(Duration::from_secs_f64(wait.min(60.0)));
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 5, base_delay: Duration::from_secs(2), max_delay: Duration::from_secs(120) }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy { max_retries, base_delay: Duration::ZERO, max_delay: Duration::ZERO }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Transport + budget + retry policy; what API clients call through.
#[derive(Clone)]
pub struct Fetcher {
    transport: Arc<dyn Transport>,
    budget: Arc<RateBudget>,
    retry: RetryPolicy,
    headers: Vec<(String, String)>,
}

impl Fetcher {
    pub fn new(transport: Arc<dyn Transport>, budget: Arc<RateBudget>, retry: RetryPolicy) -> Self {
        Fetcher { transport, budget, retry, headers: Vec::new() }
    }

    pub fn with_header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    /// Issues a GET, retrying transport failures, 5xx answers and secondary
    /// rate limits. Primary-limit exhaustion is returned immediately with
    /// the server's reset time. Other statuses are handed back unchanged.
    pub fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        let mut attempt = 0;
        loop {
            self.budget.acquire();
            let outcome = self.transport.get(url, &self.headers);
            let failure = match outcome {
                Err(message) => message,
                Ok(resp) => {
                    if let Some(reset_at) = primary_limit_reset(&resp) {
                        return Err(IngestError::BudgetExhausted { reset_at });
                    }
                    if is_secondary_limit(&resp) {
                        if attempt >= self.retry.max_retries {
                            return Err(IngestError::Retryable {
                                url: url.to_string(),
                                message: "secondary rate limit persisted".into(),
                            });
                        }
                        let wait = resp
                            .header("retry-after")
                            .and_then(|v| v.parse::<u64>().ok())
                            .map(Duration::from_secs)
                            .unwrap_or_else(|| self.retry.delay(attempt))
                            .min(self.retry.max_delay);
                        log::warn!("secondary rate limit on {url}; backing off {wait:?}");
                        thread::sleep(wait);
                        attempt += 1;
                        continue;
                    }
                    if resp.status >= 500 {
                        format!("HTTP {}", resp.status)
                    } else {
                        return Ok(resp);
                    }
                }
            };
            if attempt >= self.retry.max_retries {
                return Err(IngestError::Retryable { url: url.to_string(), message: failure });
            }
            log::debug!("retrying {url} after failure: {failure}");
            thread::sleep(self.retry.delay(attempt));
            attempt += 1;
        }
    }
}

fn primary_limit_reset(resp: &HttpResponse) -> Option<DateTime<Utc>> {
    if !(resp.status == 403 || resp.status == 429) {
        return None;
    }
    if resp.header("x-ratelimit-remaining") != Some("0") {
        return None;
    }
    let reset = resp.header("x-ratelimit-reset").and_then(|v| v.parse::<i64>().ok()).unwrap_or(0);
    Utc.timestamp_opt(reset, 0).single()
}

fn is_secondary_limit(resp: &HttpResponse) -> bool {
    (resp.status == 403 || resp.status == 429)
        && (resp.header("retry-after").is_some() || resp.body.to_ascii_lowercase().contains("secondary rate limit"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fetcher(t: Arc<FixtureTransport>, retries: u32) -> Fetcher {
        Fetcher::new(t, Arc::new(RateBudget::unlimited()), RetryPolicy::immediate(retries))
    }

    #[test]
    fn parses_next_link() {
        let r = HttpResponse::ok("").with_header(
            "Link",
            r#"<https://api.github.com/x?page=2>; rel="next", <https://api.github.com/x?page=5>; rel="last""#,
        );
        assert_eq!(r.next_link().as_deref(), Some("https://api.github.com/x?page=2"));
        let last = HttpResponse::ok("").with_header("link", r#"<https://a/x?page=1>; rel="prev""#);
        assert_eq!(last.next_link(), None);
    }

    #[test]
    fn retries_transient_failures() {
        let t = Arc::new(FixtureTransport::new());
        t.fail("u", "connection reset");
        t.route("u", HttpResponse::new(502, ""));
        t.route("u", HttpResponse::ok("fine"));
        let resp = fetcher(t.clone(), 3).get("u").unwrap();
        assert_eq!(resp.body, "fine");
        assert_eq!(t.calls(), 3);
    }

    #[test]
    fn gives_up_as_retryable() {
        let t = Arc::new(FixtureTransport::new());
        t.fail("u", "dns");
        let err = fetcher(t.clone(), 2).get("u").unwrap_err();
        assert!(matches!(err, IngestError::Retryable { .. }));
        assert_eq!(t.calls(), 3);
    }

    #[test]
    fn primary_limit_carries_reset_time() {
        let t = Arc::new(FixtureTransport::new());
        t.route(
            "u",
            HttpResponse::new(403, "{}").with_header("x-ratelimit-remaining", "0").with_header("x-ratelimit-reset", "1700000000"),
        );
        match fetcher(t, 3).get("u") {
            Err(IngestError::BudgetExhausted { reset_at }) => assert_eq!(reset_at.timestamp(), 1_700_000_000),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn secondary_limit_backs_off_then_succeeds() {
        let t = Arc::new(FixtureTransport::new());
        t.route("u", HttpResponse::new(403, "You have exceeded a secondary rate limit"));
        t.route("u", HttpResponse::ok("ok"));
        assert_eq!(fetcher(t, 3).get("u").unwrap().body, "ok");
    }

    #[test]
    fn plain_404_is_returned() {
        let t = Arc::new(FixtureTransport::new());
        assert_eq!(fetcher(t, 3).get("nowhere").unwrap().status, 404);
    }

    #[test]
    fn bucket_hands_out_capacity_without_waiting() {
        let b = RateBudget::new(5, 0.001);
        let start = Instant::now();
        for _ in 0..5 {
            b.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(100));
    }
}
