//! Async client for the maskfx HTTP service.
//!
//! ```no_run
//! # async fn demo() -> Result<(), maskfx_client::ClientError> {
//! use maskfx_client::Client;
//! use maskfx_core::api::RenderRequest;
//!
//! let client = Client::new("http://127.0.0.1:8080")?;
//! let session = client.create_session(std::fs::read("street.ppm").unwrap()).await?;
//! client.put_manifest(&session.session_id, std::fs::read_to_string("street.json").unwrap()).await?;
//! let out = client
//!     .render(&session.session_id, &RenderRequest::new("detail-enhancement", "gray"))
//!     .await?;
//! std::fs::write("street-fx.png", &out.png).unwrap();
//! # Ok(())
//! # }
//! ```

use maskfx_core::api::{
    ClassList, ErrorBody, FilterList, ManifestReplaced, RenderRequest, SessionCreated,
    CLASS_HEADER, CLASS_ID_HEADER, MASK_AREA_HEADER, NOTICE_HEADER,
};
use maskfx_core::filters::FilterSchema;
use maskfx_core::selection::ClassSummary;
use reqwest::header::HeaderMap;
use reqwest::{Response, StatusCode, Url};
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid service URL {url:?}: {reason}")]
    Url { url: String, reason: String },
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    /// Error reported by the service.
    #[error("service returned {status}: {message}")]
    Api { status: StatusCode, message: String },
}

/// Rendered PNG plus the metadata sent alongside it.
#[derive(Debug, Clone)]
pub struct RenderedImage {
    pub png: Vec<u8>,
    pub class_name: Option<String>,
    pub class_id: Option<u32>,
    pub mask_area: usize,
    pub notice: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: Url,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        Self::with_http(reqwest::Client::new(), base_url)
    }

    pub fn with_http(http: reqwest::Client, base_url: &str) -> Result<Self, ClientError> {
        let bad = |reason: String| ClientError::Url {
            url: base_url.to_string(),
            reason,
        };
        let mut base = Url::parse(base_url).map_err(|e| bad(e.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(bad("not a base URL".into()));
        }
        if !base.path().ends_with('/') {
            let path = format!("{}/", base.path());
            base.set_path(&path);
        }
        Ok(Self { http, base })
    }

    fn url(&self, path: &str) -> Url {
        self.base.join(path).expect("relative API paths always join")
    }

    /// Uploads PPM or PNG bytes.
    pub async fn create_session(&self, image: Vec<u8>) -> Result<SessionCreated, ClientError> {
        let res = self.http.post(self.url("api/sessions")).body(image).send().await?;
        json(res).await
    }

    pub async fn put_manifest(&self, session: &str, manifest_json: String) -> Result<usize, ClientError> {
        let res = self
            .http
            .put(self.url(&format!("api/sessions/{session}/manifest")))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(manifest_json)
            .send()
            .await?;
        Ok(json::<ManifestReplaced>(res).await?.instances)
    }

    /// Ranked classes, highest priority first.
    pub async fn classes(
        &self,
        session: &str,
        score_threshold: Option<f64>,
    ) -> Result<Vec<ClassSummary>, ClientError> {
        let mut req = self.http.get(self.url(&format!("api/sessions/{session}/classes")));
        if let Some(t) = score_threshold {
            req = req.query(&[("score_threshold", t)]);
        }
        Ok(json::<ClassList>(req.send().await?).await?.classes)
    }

    pub async fn filters(&self) -> Result<Vec<FilterSchema>, ClientError> {
        let res = self.http.get(self.url("api/filters")).send().await?;
        Ok(json::<FilterList>(res).await?.filters)
    }

    pub async fn render(&self, session: &str, request: &RenderRequest) -> Result<RenderedImage, ClientError> {
        let res = self
            .http
            .post(self.url(&format!("api/sessions/{session}/render")))
            .json(request)
            .send()
            .await?;
        let res = check(res).await?;
        let headers = res.headers().clone();
        let png = res.bytes().await?.to_vec();
        Ok(RenderedImage {
            png,
            class_name: header(&headers, CLASS_HEADER),
            class_id: header(&headers, CLASS_ID_HEADER).and_then(|v| v.parse().ok()),
            mask_area: header(&headers, MASK_AREA_HEADER)
                .and_then(|v| v.parse().ok())
                .unwrap_or(0),
            notice: header(&headers, NOTICE_HEADER),
        })
    }

    pub async fn delete_session(&self, session: &str) -> Result<(), ClientError> {
        let res = self
            .http
            .delete(self.url(&format!("api/sessions/{session}")))
            .send()
            .await?;
        check(res).await.map(drop)
    }
}

fn header(headers: &HeaderMap, name: &str) -> Option<String> {
    headers.get(name)?.to_str().ok().map(str::to_string)
}

async fn check(res: Response) -> Result<Response, ClientError> {
    let status = res.status();
    if status.is_success() {
        return Ok(res);
    }
    let text = res.text().await.unwrap_or_default();
    let message = serde_json::from_str::<ErrorBody>(&text)
        .map(|b| b.error)
        .unwrap_or(text);
    Err(ClientError::Api { status, message })
}

async fn json<T: DeserializeOwned>(res: Response) -> Result<T, ClientError> {
    Ok(check(res).await?.json().await?)
}
