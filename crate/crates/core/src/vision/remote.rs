//! HTTP client for detection and captioning services.
//!
//! Wire protocol (JSON bodies, `POST`):
//!
//! - `{base}/detect` with `{"image_ref", "object_name", "region"}` answers
//!   `{"detections": [{"label", "box": [x0, y0, x1, y1], "score"}]}`.
//! - `{base}/caption` with `{"image_ref", "region"}` answers `{"caption"}`.
//!
//! `region` is `null` for the full image, else absolute `[x0, y0, x1, y1]`.
//! Detections are in absolute coordinates; the client keeps those inside the
//! handle's region and translates them. `query` captions the view and asks
//! the configured LLM a caption-plus-question prompt.

use std::sync::Arc;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ApiError, BoundingBox, ImageHandle, VisionProvider};
use crate::http::{build_client, post_json, HttpFailure, RetryPolicy};
use crate::llm::{Gateway, LlmRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteVisionConfig {
    pub base_url: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub answer_max_tokens: u32,
}

impl Default for RemoteVisionConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8100".into(),
            timeout_secs: 30,
            retry: RetryPolicy::default(),
            answer_max_tokens: 16,
        }
    }
}

pub struct RemoteVisionProvider {
    config: RemoteVisionConfig,
    client: Client,
    answerer: Arc<Gateway>,
}

#[derive(Deserialize)]
struct DetectReply {
    detections: Vec<Detection>,
}

#[derive(Deserialize)]
struct Detection {
    label: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    #[serde(default = "one")]
    score: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct CaptionReply {
    caption: String,
}

/// Prompt used by `query` to answer from a caption.
pub fn caption_answer_prompt(caption: &str, question: &str) -> String {
    format!("Image description: {caption}\nAnswer the question in a few words.\nQuestion: {question}\nAnswer:")
}

impl RemoteVisionProvider {
    pub fn new(config: RemoteVisionConfig, answerer: Arc<Gateway>) -> Result<Self, ApiError> {
        let client = build_client(Duration::from_secs(config.timeout_secs)).map_err(ApiError::Transport)?;
        Ok(Self { config, client, answerer })
    }

    fn post<T: for<'de> Deserialize<'de>>(&self, path: &str, body: serde_json::Value) -> Result<T, ApiError> {
        let url = format!("{}/{path}", self.config.base_url.trim_end_matches('/'));
        let text = post_json(&self.client, &url, None, &body, &self.config.retry).map_err(|f| match f {
            HttpFailure::Timeout => ApiError::Transport(format!("{url}: timed out")),
            HttpFailure::Transport(msg) => ApiError::Transport(msg),
            HttpFailure::Status { code: 404, .. } => ApiError::UnknownImage(body["image_ref"].to_string()),
            HttpFailure::Status { code, body } => ApiError::Protocol(format!("{url}: HTTP {code}: {body}")),
        })?;
        serde_json::from_str(&text).map_err(|e| ApiError::Protocol(format!("{url}: {e}")))
    }

    fn caption(&self, image: &ImageHandle) -> Result<String, ApiError> {
        let reply: CaptionReply = self.post(
            "caption",
            json!({"image_ref": image.base(), "region": image.region().map(|r| r.as_array())}),
        )?;
        Ok(reply.caption)
    }
}

impl VisionProvider for RemoteVisionProvider {
    fn get_object_boxes(&self, image: &ImageHandle, object_name: &str) -> Result<Vec<BoundingBox>, ApiError> {
        let reply: DetectReply = self.post(
            "detect",
            json!({
                "image_ref": image.base(),
                "object_name": object_name,
                "region": image.region().map(|r| r.as_array()),
            }),
        )?;
        let boxes = reply
            .detections
            .into_iter()
            .map(|d| BoundingBox::new(d.bbox, d.label, d.score))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ApiError::Protocol(e.to_string()))?;
        Ok(image.localize(boxes))
    }

    fn query(&self, image: &ImageHandle, question: &str) -> Result<String, ApiError> {
        let caption = self.caption(image)?;
        let request = LlmRequest::new(caption_answer_prompt(&caption, question))
            .max_tokens(self.config.answer_max_tokens)
            .stop(vec!["\n".into()]);
        let response = self.answerer.complete(&request).map_err(|e| ApiError::Transport(e.to_string()))?;
        Ok(response.completions.into_iter().next().unwrap_or_default().trim().to_string())
    }
}
