//! HTTP client for the captioning service and two-prompt manifest building.
//!
//! Contract: `POST {endpoint}/v1/caption` with
//! `{"image_id": str, "image_b64": str?, "prompt": str}`; a 200 response
//! carries `{"caption": str}`. 5xx responses and transport failures are
//! retried with exponential backoff.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use rsvl_core::dataset::{resize_center_crop_plan, ManifestRecord, PromptId, CAPTION_INPUT_SIZE};
use serde::{Deserialize, Serialize};

use crate::manifest::CaptionFailure;

pub const CAPTION_PATH: &str = "/v1/caption";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaptionError {
    #[error("endpoint unavailable after {attempts} attempts: {last}")]
    EndpointDown { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff: Duration,
    pub timeout: Duration,
    /// Maximum requests in flight during [`build_manifest`].
    pub concurrency: usize,
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            max_retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
            concurrency: 8,
        }
    }
}

/// An image to caption. Pixels are optional: the service may resolve
/// `image_id` itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    pub source_dataset: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_b64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_b64: Option<String>,
    pub prompt: String,
}

#[derive(Debug, Deserialize)]
struct CaptionResponse {
    caption: String,
}

enum Attempt {
    Done(Result<String, CaptionError>),
    Retry(String),
}

pub struct CaptionClient {
    agent: ureq::Agent,
    url: String,
    cfg: ClientConfig,
}

impl CaptionClient {
    pub fn new(cfg: ClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        let url = format!("{}{}", cfg.endpoint.trim_end_matches('/'), CAPTION_PATH);
        Self { agent, url, cfg }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    /// Requests one caption with the canonical text of `prompt` and returns
    /// it verbatim.
    pub fn caption_image(
        &self,
        image: &ImageRef,
        prompt: PromptId,
    ) -> Result<String, CaptionError> {
        let body = CaptionRequest {
            image_id: image.image_id.clone(),
            image_b64: image.image_b64.clone(),
            prompt: prompt.text().to_string(),
        };
        let attempts = self.cfg.max_retries + 1;
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            match self.attempt(&body) {
                Attempt::Done(result) => return result,
                Attempt::Retry(reason) => last = reason,
            }
        }
        Err(CaptionError::EndpointDown { attempts, last })
    }

    fn attempt(&self, body: &CaptionRequest) -> Attempt {
        let mut response = match self.agent.post(&self.url).send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) if status >= 500 => return Attempt::Retry(format!("status {status}: {e}")),
            Err(e) => return Attempt::Done(Err(CaptionError::MalformedResponse(e.to_string()))),
        };
        match status {
            200 => Attempt::Done(
                serde_json::from_str::<CaptionResponse>(&text)
                    .map(|r| r.caption)
                    .map_err(|e| CaptionError::MalformedResponse(e.to_string())),
            ),
            500..=599 => Attempt::Retry(format!("status {status}")),
            _ => Attempt::Done(Err(CaptionError::Rejected { status, body: text })),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestOutcome {
    pub records: Vec<ManifestRecord>,
    pub failures: Vec<CaptionFailure>,
}

/// Captions every image with both prompts.
///
/// Requests run on up to `concurrency` threads, but records come out in
/// `(input index, prompt)` order whatever the completion order. An image
/// contributes both records or none; failed images are listed in
/// `failures` in input order.
pub fn build_manifest(images: &[ImageRef], client: &CaptionClient) -> ManifestOutcome {
    let plans: Vec<_> = images
        .iter()
        .map(|im| resize_center_crop_plan(im.width, im.height, CAPTION_INPUT_SIZE))
        .collect();
    let jobs: Vec<(usize, PromptId)> = (0..images.len())
        .filter(|&i| plans[i].is_ok())
        .flat_map(|i| PromptId::ALL.map(|p| (i, p)))
        .collect();
    let slots: Vec<OnceLock<Result<String, CaptionError>>> =
        (0..images.len() * 2).map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    let workers = client.cfg.concurrency.max(1).min(jobs.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                while let Some(&(i, prompt)) = jobs.get(next.fetch_add(1, Ordering::Relaxed)) {
                    let result = client.caption_image(&images[i], prompt);
                    let _ = slots[2 * i + prompt_slot(prompt)].set(result);
                }
            });
        }
    });

    let mut records = Vec::with_capacity(jobs.len());
    let mut failures = Vec::new();
    for (i, image) in images.iter().enumerate() {
        let fail = |prompt_id, error: String| CaptionFailure {
            image_id: image.image_id.clone(),
            source_dataset: image.source_dataset.clone(),
            prompt_id,
            error,
        };
        let plan = match &plans[i] {
            Ok(plan) => plan,
            Err(e) => {
                failures.push(fail(
                    None,
                    CaptionError::InvalidImage(e.to_string()).to_string(),
                ));
                continue;
            }
        };
        let pair: Result<Vec<ManifestRecord>, CaptionFailure> = PromptId::ALL
            .iter()
            .map(|&prompt| {
                let caption = slots[2 * i + prompt_slot(prompt)]
                    .get()
                    .expect("every planned job ran")
                    .clone()
                    .map_err(|e| fail(Some(prompt), e.to_string()))?;
                ManifestRecord::new(
                    &image.image_id,
                    &image.source_dataset,
                    plan.crop,
                    prompt,
                    caption,
                )
                .map_err(|e| {
                    fail(
                        Some(prompt),
                        CaptionError::MalformedResponse(e.to_string()).to_string(),
                    )
                })
            })
            .collect();
        match pair {
            Ok(pair) => records.extend(pair),
            Err(f) => failures.push(f),
        }
    }
    ManifestOutcome { records, failures }
}

fn prompt_slot(prompt: PromptId) -> usize {
    match prompt {
        PromptId::Short => 0,
        PromptId::Detail => 1,
    }
}
