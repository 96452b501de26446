use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{wire, GuidanceError, GuidanceProvider, GuidanceRequest, GuidanceResult};

const CONTENT_TYPE: &str = "application/msgpack";

/// Connection settings for a remote guidance service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{endpoint}/gradient` and `{endpoint}/health`.
    pub endpoint: String,
    pub timeout_secs: f64,
    /// Total attempts per call, including the first.
    pub attempts: u32,
    /// Delay before the first retry; doubles after each failure.
    pub backoff_ms: u64,
    /// Classifier-free guidance scale the service is expected to run with.
    pub guidance_scale: f64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000".into(),
            timeout_secs: 120.0,
            attempts: 3,
            backoff_ms: 500,
            guidance_scale: 50.0,
        }
    }
}

/// The service's `/health` answer.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HealthInfo {
    #[serde(default)]
    pub model_id: Option<String>,
    pub resolution: [usize; 2],
    #[serde(default, alias = "s")]
    pub guidance_scale: Option<f64>,
    #[serde(default)]
    pub stub: bool,
    /// Anything else the service reports.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Client for the MessagePack-over-HTTP guidance protocol.
pub struct RemoteGuidance {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    health: HealthInfo,
    /// Metadata of the latest response.
    pub last_meta: serde_json::Map<String, serde_json::Value>,
}

enum Attempt<T> {
    Done(T),
    Retry(String),
    Fail(GuidanceError),
}

impl RemoteGuidance {
    /// Connects and checks `/health`; fails before any optimisation work if
    /// the service is unreachable.
    pub fn connect(config: RemoteConfig) -> Result<Self, GuidanceError> {
        if config.attempts == 0 {
            return Err(GuidanceError::Protocol("attempts must be >= 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs.max(0.001)))
            .build()
            .map_err(|e| GuidanceError::Protocol(e.to_string()))?;
        let mut this = Self { config, client, health: HealthInfo::default(), last_meta: Default::default() };
        this.health = this.fetch_health()?;
        if let Some(s) = this.health.guidance_scale {
            if s != this.config.guidance_scale {
                log::warn!("service guidance scale {s} differs from configured {}", this.config.guidance_scale);
            }
        }
        Ok(this)
    }

    pub fn health(&self) -> &HealthInfo {
        &self.health
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{route}", self.config.endpoint.trim_end_matches('/'))
    }

    pub fn fetch_health(&self) -> Result<HealthInfo, GuidanceError> {
        let url = self.url("health");
        self.with_retries(|| match self.client.get(&url).send() {
            Err(e) => Attempt::Retry(e.to_string()),
            Ok(resp) => match classify(resp) {
                Ok(body) => match serde_json::from_slice::<HealthInfo>(&body) {
                    Ok(h) => Attempt::Done(h),
                    Err(e) => Attempt::Fail(GuidanceError::Protocol(format!("health: {e}"))),
                },
                Err(a) => a,
            },
        })
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Attempt<T>) -> Result<T, GuidanceError> {
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = String::new();
        for attempt in 1..=self.config.attempts {
            match call() {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(msg) => {
                    log::warn!("guidance attempt {attempt}/{} failed: {msg}", self.config.attempts);
                    last = msg;
                }
            }
            if attempt < self.config.attempts {
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(GuidanceError::Unreachable { attempts: self.config.attempts, message: last })
    }
}

/// Connection errors, timeouts, 429 and 5xx other than 507 are transient.
fn classify<T>(resp: reqwest::blocking::Response) -> Result<Vec<u8>, Attempt<T>> {
    let status = resp.status();
    let body = resp.bytes().map_err(|e| Attempt::Retry(e.to_string()))?.to_vec();
    if status.is_success() {
        return Ok(body);
    }
    let message = String::from_utf8_lossy(&body).chars().take(500).collect::<String>();
    let code = status.as_u16();
    if code == 429 || (status.is_server_error() && code != 507) {
        Err(Attempt::Retry(format!("HTTP {code}: {message}")))
    } else {
        Err(Attempt::Fail(GuidanceError::Service { status: code, message }))
    }
}

impl GuidanceProvider for RemoteGuidance {
    fn guidance(&mut self, request: &GuidanceRequest) -> Result<GuidanceResult, GuidanceError> {
        request.validate()?;
        let body = wire::encode_request(request)?;
        let url = self.url("gradient");
        let (result, meta) = self.with_retries(|| {
            let sent = self.client.post(&url).header(reqwest::header::CONTENT_TYPE, CONTENT_TYPE).body(body.clone()).send();
            match sent {
                Err(e) => Attempt::Retry(e.to_string()),
                Ok(resp) => match classify(resp) {
                    Ok(bytes) => match wire::decode_response(&bytes, &request.frames) {
                        Ok(v) => Attempt::Done(v),
                        Err(e) => Attempt::Fail(e),
                    },
                    Err(a) => a,
                },
            }
        })?;
        self.last_meta = meta;
        Ok(result)
    }

    fn resolution(&self) -> Option<(usize, usize)> {
        let [w, h] = self.health.resolution;
        (w > 0 && h > 0).then_some((w, h))
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "provider": "remote",
            "endpoint": self.config.endpoint,
            "guidance_scale": self.config.guidance_scale,
            "health": self.health,
        })
    }
}
