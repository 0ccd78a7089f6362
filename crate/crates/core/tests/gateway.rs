mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use rubric_rewards::gateway::{
    BackendKind, JudgeCall, RemoteChat, ResponseCache, Transport, TransportError,
};
use rubric_rewards::templates::{bindings, TemplateId};
use rubric_rewards::{Gateway, JudgeBackend, JudgeError, JudgeRequest};

/// Sleeps per call and records peak concurrency.
#[derive(Default)]
struct Instrumented {
    calls: AtomicUsize,
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl Transport for Instrumented {
    fn complete(&self, call: &JudgeCall<'_>) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        thread::sleep(Duration::from_millis(15));
        self.current.fetch_sub(1, Ordering::SeqCst);
        let n = call.bindings["response"].len() % 10 + 1;
        Ok(format!("{{\"rating\": {n}}}"))
    }
}

fn likert(response: &str) -> JudgeRequest {
    JudgeRequest::new(
        TemplateId::SimpleLikert,
        bindings([("prompt", "p"), ("response", response)]),
    )
}

fn gateway(t: Arc<Instrumented>) -> Gateway {
    Gateway::new(JudgeBackend::mock("inst", BackendKind::MockScripted), t)
}

#[test]
fn batch_respects_max_in_flight_and_order() {
    let t = Arc::new(Instrumented::default());
    let g = gateway(t.clone()).with_max_in_flight(4);
    let reqs: Vec<JudgeRequest> = (0..40).map(|i| likert(&"x".repeat(i))).collect();
    let out = g.batch_judge(&reqs, 16);
    assert!(t.peak.load(Ordering::SeqCst) <= 4);
    assert!(t.peak.load(Ordering::SeqCst) >= 2);
    for (i, r) in out.iter().enumerate() {
        assert_eq!(r.as_ref().unwrap().rating, Some((i % 10 + 1) as i64));
    }
}

#[test]
fn identical_concurrent_requests_share_one_call() {
    let t = Arc::new(Instrumented::default());
    let g = gateway(t.clone());
    let req = likert("same");
    let results: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = (0..16)
            .map(|_| s.spawn(|| g.judge(&req).unwrap()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    assert!(results.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn disk_cache_survives_a_new_gateway() {
    let dir = tempfile::tempdir().unwrap();
    let first = Arc::new(Instrumented::default());
    let a = gateway(first.clone()).with_cache(ResponseCache::on_disk(dir.path()).unwrap());
    let reqs: Vec<JudgeRequest> = (0..3).map(|i| likert(&format!("r{i}"))).collect();
    let before: Vec<_> = reqs.iter().map(|r| a.judge(r).unwrap()).collect();
    assert_eq!(first.calls.load(Ordering::SeqCst), 3);

    let second = Arc::new(Instrumented::default());
    let b = gateway(second.clone()).with_cache(ResponseCache::on_disk(dir.path()).unwrap());
    let after: Vec<_> = reqs.iter().map(|r| b.judge(r).unwrap()).collect();
    assert_eq!(second.calls.load(Ordering::SeqCst), 0);
    assert_eq!(before, after);
}

#[test]
fn cache_key_depends_on_model_and_temperature() {
    let req = likert("r");
    let base = JudgeBackend::remote("r", "http://x", "m1");
    let k = req.cache_key(&base);
    assert_eq!(k.len(), 64);
    assert_eq!(k, req.cache_key(&base.clone()));
    assert_ne!(
        k,
        req.cache_key(&JudgeBackend::remote("r", "http://x", "m2"))
    );
    assert_ne!(k, req.cache_key(&base.clone().with_temperature(0.7)));
    assert_ne!(k, likert("s").cache_key(&base));
}

struct Captured {
    request_line: String,
    headers: Vec<String>,
    body: String,
}

/// Serves one canned `(status, body)` per connection, recording requests.
fn serve(
    replies: Vec<(u16, String)>,
) -> (String, Arc<Mutex<Vec<Captured>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let handle = thread::spawn(move || {
        for (status, body) in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured {
                request_line: request_line.trim_end().to_string(),
                headers,
                body: String::from_utf8(buf).unwrap(),
            });
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (url, seen, handle)
}

fn chat(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
        .to_string()
}

fn remote(url: &str) -> Gateway {
    let backend = JudgeBackend::remote("remote", url, "judge-model");
    let transport = RemoteChat::new(url, "judge-model", 0.0, "sk-test", Duration::from_secs(5));
    Gateway::new(backend, Arc::new(transport)).with_backoff(Duration::from_millis(1))
}

#[test]
fn remote_round_trip() {
    let (url, seen, h) = serve(vec![(200, chat("```json\n{\"rating\": 9}\n```"))]);
    let r = remote(&url).judge(&likert("resp")).unwrap();
    h.join().unwrap();
    assert_eq!(r.rating, Some(9));
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].request_line, "POST /chat/completions HTTP/1.1");
    assert!(seen[0]
        .headers
        .iter()
        .any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk-test")));
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["model"], "judge-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["role"], "user");
    assert!(body["messages"][1]["content"]
        .as_str()
        .unwrap()
        .contains("<response>\nresp\n</response>"));
}

#[test]
fn remote_retries_rate_limits_and_bad_replies() {
    let (url, seen, h) = serve(vec![
        (429, "{}".into()),
        (503, "{}".into()),
        (200, chat("I'd say about a seven.")),
    ]);
    let g = remote(&url).with_max_in_flight(1);
    let err = g.judge(&likert("resp")).unwrap_err();
    h.join().unwrap();
    assert_eq!(seen.lock().unwrap().len(), 3);
    match err {
        JudgeError::Exhausted { attempts, raw, .. } => {
            assert_eq!(attempts, 3);
            assert_eq!(raw.as_deref(), Some("I'd say about a seven."));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn remote_auth_failure_is_not_retried() {
    let (url, seen, h) = serve(vec![(401, "{\"error\": \"bad key\"}".into())]);
    let err = remote(&url).judge(&likert("resp")).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, JudgeError::Transport(_)), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}
