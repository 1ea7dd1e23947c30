//! Instrumented in-process endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use uniex::infer::{EndpointError, GenerationRequest, TextGenerator};

#[derive(Default)]
pub struct Instrumented {
    pub calls: AtomicUsize,
    in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    /// Per-request sleep in milliseconds, looked up by numeric id; empty means none.
    pub delays_ms: Vec<u64>,
}

impl Instrumented {
    pub fn with_delays(delays_ms: Vec<u64>) -> Self {
        Self { delays_ms, ..Self::default() }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl TextGenerator for Instrumented {
    async fn generate(&self, model: &str, request: &GenerationRequest) -> Result<String, EndpointError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        let delay = request.id.parse::<usize>().ok().and_then(|i| self.delays_ms.get(i)).copied().unwrap_or(0);
        tokio::time::sleep(Duration::from_millis(delay)).await;
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        Ok(format!("{model} answers {}", request.prompt))
    }
}
