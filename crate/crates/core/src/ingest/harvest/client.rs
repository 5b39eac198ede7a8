use std::io::Read;
use std::time::Duration;

/// Status and body of one HTTP GET.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: String,
}

/// Transport used by the harvesters. `Err` means the request never produced
/// an HTTP status (connection refused, timeout, ...).
pub trait ApiClient: Send + Sync {
    fn get(&self, url: &str) -> Result<ApiResponse, String>;
}

/// Blocking HTTP client sending `Authorization: OAuth <token>`-style bearer
/// credentials.
pub struct HttpClient {
    agent: ureq::Agent,
    token: String,
}

pub const TOKEN_ENV: &str = "MAPILLARY_TOKEN";

impl HttpClient {
    pub fn new(token: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
        Self { agent, token: token.into() }
    }

    /// Reads the token from `MAPILLARY_TOKEN`.
    pub fn from_env() -> Result<Self, super::HarvestError> {
        match std::env::var(TOKEN_ENV) {
            Ok(t) if !t.trim().is_empty() => Ok(Self::new(t.trim())),
            _ => Err(super::HarvestError::Auth(format!(
                "no API token: set {TOKEN_ENV} to a Mapillary client access token"
            ))),
        }
    }
}

impl ApiClient for HttpClient {
    fn get(&self, url: &str) -> Result<ApiResponse, String> {
        let req = self.agent.get(url).set("Authorization", &format!("Bearer {}", self.token));
        let resp = match req.call() {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(e.to_string()),
        };
        let status = resp.status();
        let mut body = String::new();
        resp.into_reader().take(256 * 1024 * 1024).read_to_string(&mut body).map_err(|e| e.to_string())?;
        Ok(ApiResponse { status, body })
    }
}
