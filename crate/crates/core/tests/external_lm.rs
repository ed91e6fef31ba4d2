use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use charsurp::lm::{ExternalLm, ExternalLmConfig, LmError, TokenLm};
use serde_json::{json, Value};

/// Serves one connection; `reply` maps a request to the response lines.
fn serve(reply: impl Fn(&Value) -> Vec<String> + Send + 'static) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { return };
            let mut writer = stream.try_clone().unwrap();
            for line in BufReader::new(stream).lines() {
                let Ok(line) = line else { break };
                let req: Value = serde_json::from_str(&line).unwrap();
                for out in reply(&req) {
                    writer.write_all(out.as_bytes()).unwrap();
                    writer.write_all(b"\n").unwrap();
                }
            }
        }
    });
    addr
}

fn config(addr: String) -> ExternalLmConfig {
    ExternalLmConfig { timeout: Duration::from_millis(300), retries: 0, ..ExternalLmConfig::new(addr) }
}

fn uniform(req: &Value, v: usize) -> String {
    let lp = -((v + 1) as f64).ln();
    json!({"id": req["id"], "logprobs": vec![lp; v], "eos_logprob": lp}).to_string()
}

#[test]
fn uniform_server() {
    let addr = serve(|req| vec![uniform(req, 4)]);
    let lm = ExternalLm::new(config(addr), 4);
    let d = lm.next_distribution(&[1, 2]).unwrap();
    for t in 0..4 {
        assert!((d.logprob(t) + 5f64.ln()).abs() < 1e-12);
    }
    assert!((d.eos_logprob() + 5f64.ln()).abs() < 1e-12);
}

#[test]
fn out_of_order_responses_are_matched_by_id() {
    // answers with a stale id first, then the real one
    let addr = serve(|req| {
        let mut stale = serde_json::from_str::<Value>(&uniform(req, 2)).unwrap();
        stale["id"] = json!("other");
        stale["eos_logprob"] = json!(0.0);
        vec![stale.to_string(), uniform(req, 2)]
    });
    let lm = ExternalLm::new(config(addr), 2);
    let d = lm.next_distribution(&[]).unwrap();
    assert!((d.eos_logprob() + 3f64.ln()).abs() < 1e-12);
}

#[test]
fn missing_eos_is_malformed() {
    let addr = serve(|req| vec![json!({"id": req["id"], "logprobs": [-0.7, -0.7]}).to_string()]);
    let lm = ExternalLm::new(config(addr), 2);
    assert!(matches!(lm.next_distribution(&[]), Err(LmError::Malformed(_))));
}

#[test]
fn garbage_is_malformed() {
    let addr = serve(|_| vec!["not json".into()]);
    let lm = ExternalLm::new(config(addr), 2);
    assert!(matches!(lm.next_distribution(&[]), Err(LmError::Malformed(_))));
}

#[test]
fn unnormalized_is_rejected() {
    let addr = serve(|req| {
        let p = (0.8f64 / 3.0).ln();
        vec![json!({"id": req["id"], "logprobs": [p, p], "eos_logprob": p}).to_string()]
    });
    let lm = ExternalLm::new(config(addr), 2);
    assert!(matches!(lm.next_distribution(&[]), Err(LmError::Normalization { .. })));
}

#[test]
fn wrong_length_is_vocab_mismatch() {
    let addr = serve(|req| vec![uniform(req, 3)]);
    let lm = ExternalLm::new(config(addr), 2);
    assert!(matches!(lm.next_distribution(&[]), Err(LmError::VocabMismatch { expected: 2, got: 3 })));
}

#[test]
fn silent_server_times_out() {
    let addr = serve(|_| Vec::new());
    let lm = ExternalLm::new(config(addr), 2);
    assert!(matches!(lm.next_distribution(&[]), Err(LmError::Timeout(_))));
}

#[test]
fn responses_are_cached() {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = Arc::clone(&calls);
    let addr = serve(move |req| {
        seen.fetch_add(1, Ordering::SeqCst);
        vec![uniform(req, 2)]
    });
    let lm = ExternalLm::new(config(addr), 2);
    for _ in 0..3 {
        lm.next_distribution(&[0, 1]).unwrap();
    }
    lm.next_distribution(&[1]).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 2);
    assert!(matches!(lm.next_distribution(&[7]), Err(LmError::UnknownToken { id: 7, .. })));
}
