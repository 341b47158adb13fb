use std::sync::Mutex;
use std::time::{Duration, Instant};

use conceptbench_core::learners::{parse_answer, Prediction};
use thiserror::Error;

use crate::config::EndpointConfig;
use crate::transport::{ChatRequest, ChatTransport, HttpTransport, TransportError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("endpoint rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("endpoint failed after {attempts} attempt(s): {source}")]
    Endpoint { attempts: u32, source: TransportError },
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
}

/// A prediction together with how many requests it took.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoteOutcome {
    pub prediction: Prediction,
    pub attempts: u32,
}

/// Spaces request start times to honour a requests-per-second cap.
#[derive(Debug)]
struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(rps: Option<f64>) -> Self {
        Self {
            interval: rps.map(|r| Duration::from_secs_f64(1.0 / r)),
            next: Mutex::new(None),
        }
    }

    fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Chat-completions learner with retries and rate limiting.
pub struct RemoteClient {
    config: EndpointConfig,
    transport: Box<dyn ChatTransport>,
    limiter: RateLimiter,
}

impl std::fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClient").field("config", &self.config).finish_non_exhaustive()
    }
}

impl RemoteClient {
    /// Client over HTTP, reading the token from the environment.
    pub fn http(config: EndpointConfig) -> Result<Self, ClientError> {
        let transport = HttpTransport::new(&config)?;
        Self::with_transport(config, Box::new(transport))
    }

    pub fn with_transport(config: EndpointConfig, transport: Box<dyn ChatTransport>) -> Result<Self, ClientError> {
        config.validate()?;
        let limiter = RateLimiter::new(config.requests_per_second);
        Ok(Self {
            config,
            transport,
            limiter,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Sends `rendered_text` as a single user message and parses the reply.
    pub fn predict(&self, rendered_text: &str) -> Result<RemoteOutcome, ClientError> {
        let request = ChatRequest::single_user(&self.config, rendered_text);
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.limiter.acquire();
            match self.transport.send(&request) {
                Ok(text) => {
                    return Ok(RemoteOutcome {
                        prediction: parse_answer(&text),
                        attempts,
                    })
                }
                Err(TransportError::Status { status, .. }) if status == 401 || status == 403 => {
                    return Err(ClientError::Auth { status })
                }
                Err(e) if e.is_transient() && attempts < self.config.max_attempts => {
                    std::thread::sleep(self.config.backoff(attempts));
                }
                Err(source) => return Err(ClientError::Endpoint { attempts, source }),
            }
        }
    }
}

/// One-off prediction over HTTP.
pub fn remote_predict(rendered_text: &str, config: &EndpointConfig) -> Result<Prediction, ClientError> {
    RemoteClient::http(config.clone())?
        .predict(rendered_text)
        .map(|o| o.prediction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use conceptbench_core::learners::Answer;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Scripted {
        calls: AtomicU32,
        script: Vec<Result<String, TransportError>>,
    }

    impl ChatTransport for Scripted {
        fn send(&self, _: &ChatRequest) -> Result<String, TransportError> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            self.script[i.min(self.script.len() - 1)].clone()
        }
    }

    fn client(script: Vec<Result<String, TransportError>>) -> RemoteClient {
        let mut cfg = EndpointConfig::new("http://unused", "m");
        cfg.backoff_ms = 0;
        let transport = Scripted {
            calls: AtomicU32::new(0),
            script,
        };
        RemoteClient::with_transport(cfg, Box::new(transport)).unwrap()
    }

    fn status(status: u16) -> Result<String, TransportError> {
        Err(TransportError::Status {
            status,
            body: String::new(),
        })
    }

    #[test]
    fn success_first_try() {
        let out = client(vec![Ok("Yes".into())]).predict("p").unwrap();
        assert_eq!(out.prediction.answer, Answer::Yes);
        assert_eq!(out.attempts, 1);
    }

    #[test]
    fn retries_then_succeeds() {
        let out = client(vec![status(500), status(502), Ok("No.".into())]).predict("p").unwrap();
        assert_eq!(out.prediction.answer, Answer::No);
        assert_eq!(out.attempts, 3);
    }

    #[test]
    fn exhausts_retries() {
        let err = client(vec![status(500)]).predict("p").unwrap_err();
        assert!(matches!(err, ClientError::Endpoint { attempts: 3, .. }));
    }

    #[test]
    fn auth_is_not_retried() {
        assert_eq!(client(vec![status(401)]).predict("p").unwrap_err(), ClientError::Auth { status: 401 });
        assert_eq!(client(vec![status(403)]).predict("p").unwrap_err(), ClientError::Auth { status: 403 });
    }

    #[test]
    fn client_errors_are_not_retried() {
        let err = client(vec![status(400), Ok("Yes".into())]).predict("p").unwrap_err();
        assert!(matches!(err, ClientError::Endpoint { attempts: 1, .. }));
    }

    #[test]
    fn garbage_abstains() {
        let out = client(vec![Ok("bnik!".into())]).predict("p").unwrap();
        assert_eq!(out.prediction.answer, Answer::Abstain);
        assert_eq!(out.prediction.raw_text.as_deref(), Some("bnik!"));
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let limiter = RateLimiter::new(Some(50.0));
        let start = Instant::now();
        for _ in 0..4 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(55));
    }
}
