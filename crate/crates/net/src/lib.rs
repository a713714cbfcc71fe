//! Network side of the harness: an open-loop streaming client for
//! OpenAI-compatible chat endpoints and a simulator-backed mock endpoint.

pub mod client;
pub mod mock;
pub mod profile;
pub mod protocol;
pub mod sse;

pub use client::{run_load, ClientError, EndpointConfig, LoadOutcome};
pub use mock::{serve_mock, MockHandle, MockOptions};
