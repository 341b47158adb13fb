//! Remote learner for OpenAI-compatible chat-completions endpoints.
//!
//! [`RemoteClient`] sends one rendered prompt per request and maps the reply
//! through [`conceptbench_core::learners::parse_answer`]. [`run_batch`]
//! evaluates a list of prompts with bounded concurrency while keeping the
//! output in prompt order.

mod batch;
mod client;
mod config;
pub mod mock;
mod transport;

pub use batch::run_batch;
pub use client::{remote_predict, ClientError, RemoteClient, RemoteOutcome};
pub use config::{EndpointConfig, Token, CHAT_FRAMING};
pub use transport::{ChatMessage, ChatRequest, ChatTransport, HttpTransport, TransportError};
