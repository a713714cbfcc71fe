//! Prefill profiling against a live endpoint.

use infermeter_core::deadline::{DeadlineError, PrefillTarget};
use infermeter_core::model::{RequestSpec, TokenTimeline};
use tokio::runtime::Runtime;
use tokio::time::Instant;

use crate::client::{http_client, stream_request, ClientError, EndpointConfig};

/// Measures TTFT of single one-token requests, one at a time.
///
/// Owns a small runtime so it can serve the synchronous profiling loop; do
/// not call it from inside another runtime.
pub struct EndpointTarget {
    ep: EndpointConfig,
    client: reqwest::Client,
    rt: Runtime,
    next_id: u64,
}

impl EndpointTarget {
    pub fn new(ep: EndpointConfig) -> Result<Self, ClientError> {
        ep.validate()?;
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .map_err(|e| ClientError::InvalidConfig(e.to_string()))?;
        let client = rt.block_on(async { http_client() })?;
        Ok(Self {
            ep,
            client,
            rt,
            next_id: 0,
        })
    }
}

impl PrefillTarget for EndpointTarget {
    fn measure_ttft(&mut self, prompt_tokens: u64) -> Result<f64, DeadlineError> {
        let spec = RequestSpec::new(self.next_id, 0.0, prompt_tokens, 1);
        self.next_id += 1;
        let (client, ep) = (&self.client, &self.ep);
        self.rt.block_on(async {
            let t0 = Instant::now();
            let mut t = TokenTimeline::new(spec.id, 0.0);
            let timeout = std::time::Duration::from_secs_f64(ep.request_timeout_s);
            match tokio::time::timeout(timeout, stream_request(client, ep, &spec, t0, &mut t)).await
            {
                Ok(Ok(())) => Ok(t
                    .first_token_time()
                    .expect("finished timelines have tokens")),
                Ok(Err(e)) => Err(DeadlineError::Measurement(e.to_string())),
                Err(_) => Err(DeadlineError::Measurement(format!(
                    "request {} timed out",
                    spec.id
                ))),
            }
        })
    }
}
