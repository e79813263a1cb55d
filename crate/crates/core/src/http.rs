//! Blocking JSON-over-HTTP with exponential backoff, shared by the embedding
//! and language-model clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base, 2·base, 4·base, ...
    pub fn delay(&self, attempt: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << attempt.min(16))
    }
}

pub(crate) fn agent(timeout_ms: u64) -> ureq::Agent {
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .http_status_as_error(false)
        .build();
    ureq::Agent::new_with_config(config)
}

/// Reads a bearer token from the environment variable named `var`.
pub(crate) fn bearer_token(var: Option<&str>) -> Result<Option<String>> {
    match var {
        None | Some("") => Ok(None),
        Some(name) => std::env::var(name)
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("environment variable {name} is not set"))),
    }
}

enum Attempt<T> {
    Done(T),
    Retry(String),
}

/// POSTs `body` and decodes the response. 5xx and transport failures are
/// retried; 4xx is returned immediately.
pub(crate) fn post_json<B, T>(
    agent: &ureq::Agent,
    url: &str,
    token: Option<&str>,
    body: &B,
    policy: &RetryPolicy,
) -> Result<T>
where
    B: Serialize,
    T: DeserializeOwned,
{
    let attempts = policy.max_retries + 1;
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(policy.delay(attempt - 1));
        }
        match try_once(agent, url, token, body)? {
            Attempt::Done(v) => return Ok(v),
            Attempt::Retry(msg) => {
                log::warn!("request to {url} failed (attempt {}): {msg}", attempt + 1);
                last = msg;
            }
        }
    }
    Err(Error::RemoteUnavailable {
        attempts,
        message: last,
    })
}

fn try_once<B, T>(agent: &ureq::Agent, url: &str, token: Option<&str>, body: &B) -> Result<Attempt<T>>
where
    B: Serialize,
    T: DeserializeOwned,
{
    let mut req = agent.post(url);
    if let Some(t) = token {
        req = req.header("Authorization", &format!("Bearer {t}"));
    }
    let resp = match req.send_json(body) {
        Ok(r) => r,
        Err(ureq::Error::StatusCode(code)) if code < 500 => {
            return Err(Error::RemoteRejected {
                status: code,
                message: String::new(),
            })
        }
        Err(e) => return Ok(Attempt::Retry(e.to_string())),
    };
    let status = resp.status().as_u16();
    let mut body = resp.into_body();
    if status >= 500 {
        return Ok(Attempt::Retry(format!("HTTP {status}")));
    }
    if status >= 400 {
        let message = body.read_to_string().unwrap_or_default();
        return Err(Error::RemoteRejected { status, message });
    }
    match body.read_json::<T>() {
        Ok(v) => Ok(Attempt::Done(v)),
        Err(ureq::Error::Json(e)) => Err(Error::MalformedResponse(e.to_string())),
        Err(e) => Ok(Attempt::Retry(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
        };
        let delays: Vec<u64> = (0..3).map(|a| p.delay(a).as_secs()).collect();
        assert_eq!(delays, vec![1, 2, 4]);
    }
}
