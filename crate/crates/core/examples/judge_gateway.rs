//! The judge gateway with an offline transport: retries on malformed
//! replies, the response cache, and bounded fan-out.
//!
//! cargo run --example judge_gateway

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rubric_rewards::gateway::{
    BackendKind, JudgeCall, MockScripted, ResponseCache, Transport, TransportError,
};
use rubric_rewards::templates::{bindings, TemplateId};
use rubric_rewards::{Gateway, JudgeBackend, JudgeRequest};

/// Slow transport that tracks how many calls overlap.
struct Slow {
    live: AtomicUsize,
    peak: AtomicUsize,
}

impl Transport for Slow {
    fn complete(&self, call: &JudgeCall<'_>) -> Result<String, TransportError> {
        let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(20));
        self.live.fetch_sub(1, Ordering::SeqCst);
        let rating = 1 + call.bindings["response"].len() % 10;
        Ok(format!("```json\n{{\"rating\": {rating}}}\n```"))
    }
}

fn likert(response: &str) -> JudgeRequest {
    JudgeRequest::new(
        TemplateId::SimpleLikert,
        bindings([
            ("prompt", "How do I treat a minor burn?"),
            ("response", response),
        ]),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two bad replies, then a good one: the gateway re-asks until it parses.
    let flaky = Gateway::new(
        JudgeBackend::mock("flaky", BackendKind::MockScripted),
        Arc::new(MockScripted::new(vec![
            "Looks decent to me.".into(),
            "{\"rating\": 14}".into(),
            "{\"rating\": 8}".into(),
        ])),
    )
    .with_backoff(Duration::from_millis(1));
    let r = flaky.judge(&likert("Cool it under running water."))?;
    println!("rating {:?} after {} attempts", r.rating, r.attempts_used);

    // Same request again is a cache hit.
    let again = flaky.judge(&likert("Cool it under running water."))?;
    assert_eq!(again, r);
    println!(
        "repeat request served from cache; backend calls so far {}",
        flaky.backend_calls()
    );

    // Forty distinct requests through at most four concurrent calls.
    let slow = Arc::new(Slow {
        live: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    });
    let dir = std::env::temp_dir().join("rar-gateway-example");
    let gateway = Gateway::new(
        JudgeBackend::mock("slow", BackendKind::MockScripted),
        slow.clone(),
    )
    .with_max_in_flight(4)
    .with_cache(ResponseCache::on_disk(&dir)?);
    let requests: Vec<JudgeRequest> = (0..40).map(|i| likert(&"x".repeat(i))).collect();
    let t = Instant::now();
    let results = gateway.batch_judge(&requests, 16);
    println!(
        "40 requests in {:.0?}, peak concurrency {}, {} ok",
        t.elapsed(),
        slow.peak.load(Ordering::SeqCst),
        results.iter().filter(|r| r.is_ok()).count()
    );
    println!(
        "cache at {} holds {} entries (rerun this example to see zero slow calls)",
        dir.display(),
        gateway.cache().len()
    );
    println!("backend calls this run: {}", gateway.backend_calls());
    Ok(())
}
