//! Minimal blocking JSON-over-HTTP helper shared by the embedding and chat clients.

use std::time::Duration;

use serde_json::Value;

use crate::error::{CarolError, Result};

pub(crate) fn post_json(
    endpoint: &str,
    token: Option<&str>,
    body: &Value,
    timeout: Duration,
) -> Result<Value> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();

    let mut request = agent
        .post(endpoint)
        .header("Content-Type", "application/json");
    if let Some(token) = token {
        request = request.header("Authorization", &format!("Bearer {token}"));
    }

    let mut response = request.send_json(body).map_err(|e| CarolError::Provider {
        status: None,
        message: format!("request to {endpoint} failed: {e}"),
    })?;

    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| CarolError::Provider {
            status: Some(status),
            message: format!("could not read response body: {e}"),
        })?;

    if !(200..300).contains(&status) {
        let snippet: String = text.chars().take(512).collect();
        return Err(CarolError::Provider {
            status: Some(status),
            message: snippet,
        });
    }

    serde_json::from_str(&text).map_err(|e| CarolError::Provider {
        status: Some(status),
        message: format!("response is not valid JSON: {e}"),
    })
}
