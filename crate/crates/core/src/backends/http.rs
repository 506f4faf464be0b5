//! Client for an external model server speaking the JSON wire protocol.

use super::wire::{
    GenerateBody, ImageBody, ImagePayload, PosePayload, PromptBody, SegmentBody, TextBody,
    VectorBody,
};
use super::{
    BackendError, BackendErrorKind, Captioner, Embedder, GenerationRequest, ImageGenerator,
    Inpainter, PoseDetector, PromptRefiner, Route, Segmenter, Slot,
};
use crate::consistency::EmbeddingVector;
use crate::media::{ImageBuffer, MaskMap, PoseFrame};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Read;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// Largest request or response body the client will handle.
pub const MAX_REQUEST_BYTES: usize = 32 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://127.0.0.1:8000`.
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts for idempotent slots after a transport error or 5xx.
    pub retries: u32,
    /// Concurrent in-flight requests allowed per slot.
    pub max_in_flight: usize,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(300),
            retries: 2,
            max_in_flight: 2,
        }
    }
}

/// Counting semaphore per slot.
struct Gates {
    limit: usize,
    in_flight: Mutex<HashMap<Slot, usize>>,
    freed: Condvar,
}

impl Gates {
    fn acquire(&self, slot: Slot) -> GateGuard<'_> {
        let mut map = self.in_flight.lock().expect("gate lock");
        while map.get(&slot).copied().unwrap_or(0) >= self.limit {
            map = self.freed.wait(map).expect("gate lock");
        }
        *map.entry(slot).or_default() += 1;
        GateGuard { gates: self, slot }
    }
}

struct GateGuard<'a> {
    gates: &'a Gates,
    slot: Slot,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut map = self.gates.in_flight.lock().expect("gate lock");
        if let Some(n) = map.get_mut(&self.slot) {
            *n -= 1;
        }
        self.gates.freed.notify_all();
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    gates: Gates,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("config", &self.config).finish()
    }
}

enum Attempt {
    Retryable(BackendErrorKind),
    Fatal(BackendErrorKind),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gates = Gates {
            limit: config.max_in_flight.max(1),
            in_flight: Mutex::new(HashMap::new()),
            freed: Condvar::new(),
        };
        HttpBackend {
            config,
            agent,
            gates,
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// Posts `body` to `route` and decodes the JSON reply.
    pub fn call<B: Serialize, R: DeserializeOwned>(
        &self,
        route: Route,
        body: &B,
    ) -> Result<R, BackendError> {
        let err = |kind| BackendError::new(route, kind);
        let payload = serde_json::to_vec(body)
            .map_err(|e| err(BackendErrorKind::InvalidRequest(e.to_string())))?;
        if payload.len() > MAX_REQUEST_BYTES {
            return Err(err(BackendErrorKind::PayloadTooLarge {
                size: payload.len(),
                limit: MAX_REQUEST_BYTES,
            }));
        }
        let url = format!("{}{}", self.config.endpoint.trim_end_matches('/'), route.path());
        let attempts = if route.slot().is_idempotent() {
            1 + self.config.retries
        } else {
            1
        };
        let _gate = self.gates.acquire(route.slot());
        let mut last = BackendErrorKind::Transport("no attempt made".into());
        for attempt in 0..attempts {
            match self.post_once(&url, &payload) {
                Ok(text) => {
                    return serde_json::from_str(&text)
                        .map_err(|e| err(BackendErrorKind::Schema(e.to_string())))
                }
                Err(Attempt::Fatal(kind)) => return Err(err(kind)),
                Err(Attempt::Retryable(kind)) => {
                    log::warn!("{} {} attempt {} failed: {kind}", route.slot(), route.path(), attempt + 1);
                    last = kind;
                }
            }
        }
        Err(err(last))
    }

    fn post_once(&self, url: &str, payload: &[u8]) -> Result<String, Attempt> {
        let mut resp = self
            .agent
            .post(url)
            .header("content-type", "application/json")
            .send(payload)
            .map_err(|e| Attempt::Retryable(BackendErrorKind::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        let mut text = String::new();
        resp.body_mut()
            .with_config()
            .limit(MAX_REQUEST_BYTES as u64 + 1)
            .reader()
            .take(MAX_REQUEST_BYTES as u64 + 1)
            .read_to_string(&mut text)
            .map_err(|e| Attempt::Retryable(BackendErrorKind::Transport(e.to_string())))?;
        if text.len() > MAX_REQUEST_BYTES {
            return Err(Attempt::Fatal(BackendErrorKind::PayloadTooLarge {
                size: text.len(),
                limit: MAX_REQUEST_BYTES,
            }));
        }
        match status {
            200 => Ok(text),
            500..=599 => Err(Attempt::Retryable(BackendErrorKind::Status { status, body: text })),
            _ => Err(Attempt::Fatal(BackendErrorKind::Status { status, body: text })),
        }
    }

    fn generate_body(route: Route, req: &GenerationRequest) -> Result<GenerateBody, BackendError> {
        req.validate().map_err(|m| BackendError::invalid(route, m))?;
        Ok(GenerateBody::from_request(req))
    }

    fn image_reply(route: Route, reply: ImagePayload) -> Result<ImageBuffer, BackendError> {
        reply
            .decode()
            .map_err(|m| BackendError::new(route, BackendErrorKind::Schema(m)))
    }

    fn vector_reply(route: Route, reply: VectorBody) -> Result<EmbeddingVector, BackendError> {
        EmbeddingVector::new(reply.vector)
            .map_err(|e| BackendError::new(route, BackendErrorKind::Schema(e.to_string())))
    }

    fn generated(&self, route: Route, req: &GenerationRequest) -> Result<ImageBuffer, BackendError> {
        let body = Self::generate_body(route, req)?;
        let img = Self::image_reply(route, self.call(route, &body)?)?;
        if (img.width(), img.height()) != (req.width, req.height) {
            return Err(BackendError::new(
                route,
                BackendErrorKind::Schema(format!(
                    "image {}x{} but {}x{} was requested",
                    img.width(),
                    img.height(),
                    req.width,
                    req.height
                )),
            ));
        }
        Ok(img)
    }
}

impl ImageGenerator for HttpBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<ImageBuffer, BackendError> {
        self.generated(Route::Generate, req)
    }
}

impl Inpainter for HttpBackend {
    fn inpaint(&self, req: &GenerationRequest) -> Result<ImageBuffer, BackendError> {
        if !req.is_inpaint() {
            return Err(BackendError::invalid(Route::Inpaint, "inpaint needs init_image and mask"));
        }
        self.generated(Route::Inpaint, req)
    }
}

impl Segmenter for HttpBackend {
    fn segment(
        &self,
        frame: &ImageBuffer,
        background_hint: Option<&ImageBuffer>,
    ) -> Result<MaskMap, BackendError> {
        let route = Route::Segment;
        let body = SegmentBody {
            image: ImagePayload::encode(frame),
            background_hint: background_hint.map(ImagePayload::encode),
        };
        let reply: ImagePayload = self.call(route, &body)?;
        let mask = reply
            .decode_mask()
            .map_err(|m| BackendError::new(route, BackendErrorKind::Schema(m)))?;
        if mask.dims() != (frame.width(), frame.height()) {
            return Err(BackendError::new(
                route,
                BackendErrorKind::Schema(format!("mask {:?} for frame {}x{}", mask.dims(), frame.width(), frame.height())),
            ));
        }
        Ok(mask)
    }
}

impl PoseDetector for HttpBackend {
    fn detect(&self, frame: &ImageBuffer) -> Result<PoseFrame, BackendError> {
        let route = Route::Pose;
        let reply: PosePayload = self.call(route, &ImageBody { image: ImagePayload::encode(frame) })?;
        reply
            .decode()
            .map_err(|m| BackendError::new(route, BackendErrorKind::Schema(m)))
    }
}

impl Embedder for HttpBackend {
    fn embed_image(&self, image: &ImageBuffer) -> Result<EmbeddingVector, BackendError> {
        let route = Route::EmbedImage;
        let reply = self.call(route, &ImageBody { image: ImagePayload::encode(image) })?;
        Self::vector_reply(route, reply)
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        let route = Route::EmbedText;
        let reply = self.call(route, &TextBody { text: text.to_string() })?;
        Self::vector_reply(route, reply)
    }
}

impl Captioner for HttpBackend {
    fn caption(&self, image: &ImageBuffer) -> Result<String, BackendError> {
        let reply: TextBody = self.call(Route::Caption, &ImageBody { image: ImagePayload::encode(image) })?;
        Ok(reply.text)
    }
}

impl PromptRefiner for HttpBackend {
    fn refine(&self, prompt: &str) -> Result<String, BackendError> {
        let reply: TextBody = self.call(Route::RefinePrompt, &PromptBody { prompt: prompt.to_string() })?;
        Ok(reply.text)
    }
}
