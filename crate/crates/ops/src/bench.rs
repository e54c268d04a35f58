//! Load generator against a running gateway.
//!
//! The summary is a tab-separated file with one `metric<TAB>value` record per
//! line, in the order of [`Summary::to_tsv`].

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::api::{Api, ApiError};

/// Students of the demo fixture the workload acts as.
pub const STUDENTS: [(&str, &str); 5] =
    [("S1001", "s1001-pw"), ("S1002", "s1002-pw"), ("S1003", "s1003-pw"), ("S1004", "s1004-pw"), ("S1005", "s1005-pw")];
/// Units without prerequisites, offered on the bench campus.
pub const UNITS: [&str; 3] = ["CS111", "MA111", "BU111"];
pub const CAMPUS: &str = "Bench";
pub const CAPACITY: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mix {
    Read,
    Write,
    Mixed,
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mix::Read => "read",
            Mix::Write => "write",
            Mix::Mixed => "mixed",
        })
    }
}

impl FromStr for Mix {
    type Err = String;
    fn from_str(s: &str) -> Result<Mix, String> {
        match s {
            "read" => Ok(Mix::Read),
            "write" => Ok(Mix::Write),
            "mixed" => Ok(Mix::Mixed),
            other => Err(format!("mix `{other}` is not read, write or mixed")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub requests: usize,
    pub concurrency: usize,
    pub mix: Mix,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("gateway at {0} is not healthy")]
    TargetUnhealthy(String),
    #[error("preparing the workload: {0}")]
    Setup(#[from] ApiError),
    #[error("requests and concurrency must be positive")]
    BadOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mode: String,
    pub mix: Mix,
    pub requests: usize,
    pub concurrency: usize,
    pub succeeded: usize,
    /// Answered with a 4xx error.
    pub rejected: usize,
    /// Transport errors and 5xx answers.
    pub failed: usize,
    pub elapsed: Duration,
    pub p50: Duration,
    pub p95: Duration,
    pub p99: Duration,
    pub audit_violations: Option<usize>,
}

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1000.0)
}

impl Summary {
    pub fn throughput(&self) -> f64 {
        self.requests as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }

    pub fn to_tsv(&self) -> String {
        let audit = self.audit_violations.map_or("-".to_string(), |n| n.to_string());
        let rows = [
            ("mode", self.mode.clone()),
            ("mix", self.mix.to_string()),
            ("requests", self.requests.to_string()),
            ("concurrency", self.concurrency.to_string()),
            ("succeeded", self.succeeded.to_string()),
            ("rejected", self.rejected.to_string()),
            ("failed", self.failed.to_string()),
            ("elapsed_s", format!("{:.3}", self.elapsed.as_secs_f64())),
            ("throughput_rps", format!("{:.1}", self.throughput())),
            ("latency_p50_ms", ms(self.p50)),
            ("latency_p95_ms", ms(self.p95)),
            ("latency_p99_ms", ms(self.p99)),
            ("audit_violations", audit),
        ];
        rows.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect()
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[Duration], p: f64) -> Duration {
    if sorted.is_empty() {
        return Duration::ZERO;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn offering(unit: &str, term: &str) -> Json {
    json!({"unit": unit, "campus": CAMPUS, "term": term})
}

/// Logs the bench students in and activates the bench offerings. Needs the
/// demo fixture loaded.
pub async fn prepare(api: &Api) -> Result<(Vec<String>, String), BenchError> {
    if !api.healthy().await {
        return Err(BenchError::TargetUnhealthy(api.base().to_string()));
    }
    let term = api.expect("GET", "/api/config", None, None).await?["current_term"].as_str().unwrap_or_default().to_string();
    let hod = api.login("HOD1", "hod-pw").await?;
    for unit in UNITS {
        let req = json!({"unit": unit, "campus": CAMPUS, "term": term, "capacity": CAPACITY, "teacher": null, "timetable": []});
        let r = api.send("POST", "/api/offerings", Some(&hod), Some(&req)).await?;
        if !r.is_ok() && r.code() != Some("duplicate-offering") {
            return Err(ApiError::Status { method: "POST".into(), path: "/api/offerings".into(), status: r.status, body: r.body }.into());
        }
    }
    let mut tokens = Vec::new();
    for (id, pw) in STUDENTS {
        tokens.push(api.login(id, pw).await?);
    }
    Ok((tokens, term))
}

fn request(rng: &mut ChaCha8Rng, mix: Mix, term: &str) -> (usize, &'static str, String, Option<Json>) {
    let s = rng.gen_range(0..STUDENTS.len());
    let id = STUDENTS[s].0;
    let write = match mix {
        Mix::Read => false,
        Mix::Write => true,
        Mix::Mixed => rng.gen_bool(0.5),
    };
    if write {
        let unit = UNITS[rng.gen_range(0..UNITS.len())];
        let method = if rng.gen_bool(0.6) { "POST" } else { "DELETE" };
        return (s, method, "/api/enrollments".into(), Some(json!({"student": id, "offering": offering(unit, term)})));
    }
    let path = match rng.gen_range(0..5) {
        0 => format!("/api/offerings?term={term}"),
        1 => format!("/api/students/{id}/history"),
        2 => format!("/api/students/{id}/timetable?term={term}"),
        3 => "/api/programs".to_string(),
        _ => "/api/invoices".to_string(),
    };
    (s, "GET", path, None)
}

/// Fires `requests` calls from `concurrency` workers. Request `i` is drawn
/// from an RNG seeded by `(seed, i)`, so the request sequence is fixed.
pub async fn run(api: &Api, mode: &str, opts: BenchOptions) -> Result<Summary, BenchError> {
    if opts.requests == 0 || opts.concurrency == 0 {
        return Err(BenchError::BadOptions);
    }
    let (tokens, term) = prepare(api).await?;
    let next = Arc::new(AtomicUsize::new(0));
    let samples = Arc::new(Mutex::new(Vec::with_capacity(opts.requests)));
    let started = Instant::now();
    let mut workers = Vec::new();
    for _ in 0..opts.concurrency {
        let (api, next, samples, tokens, term) = (api.clone(), next.clone(), samples.clone(), tokens.clone(), term.clone());
        workers.push(tokio::spawn(async move {
            loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= opts.requests {
                    break;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i as u64);
                let (s, method, path, body) = request(&mut rng, opts.mix, &term);
                let t = Instant::now();
                let status = api.send(method, &path, Some(&tokens[s]), body.as_ref()).await.map(|r| r.status).ok();
                samples.lock().await.push((t.elapsed(), status));
            }
        }));
    }
    for w in workers {
        let _ = w.await;
    }
    let elapsed = started.elapsed();
    let samples = std::mem::take(&mut *samples.lock().await);
    let mut lat: Vec<Duration> = samples.iter().map(|(d, _)| *d).collect();
    lat.sort_unstable();
    let count = |f: fn(Option<u16>) -> bool| samples.iter().filter(|(_, s)| f(*s)).count();
    Ok(Summary {
        mode: mode.to_string(),
        mix: opts.mix,
        requests: opts.requests,
        concurrency: opts.concurrency,
        succeeded: count(|s| matches!(s, Some(200..=299))),
        rejected: count(|s| matches!(s, Some(400..=499))),
        failed: count(|s| !matches!(s, Some(200..=499))),
        elapsed,
        p50: percentile(&lat, 50.0),
        p95: percentile(&lat, 95.0),
        p99: percentile(&lat, 99.0),
        audit_violations: None,
    })
}
