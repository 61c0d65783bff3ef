//! The HTTP client against a local one-shot server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use coevo::backend::{generate, BackendError, GenerationRequest, HttpBackend, RetryPolicy};
use coevo::core::prompts::Message;

struct Captured {
    head: String,
    body: serde_json::Value,
}

/// Serve the given `(status, body)` replies in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let _ = tx.send(Captured {
                head,
                body: serde_json::from_slice(&buf).unwrap_or(serde_json::Value::Null),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn completion_body(texts: &[&str]) -> String {
    let choices: Vec<_> = texts
        .iter()
        .map(|t| serde_json::json!({ "message": { "role": "assistant", "content": t } }))
        .collect();
    serde_json::json!({ "choices": choices }).to_string()
}

fn request(n: usize) -> GenerationRequest {
    GenerationRequest {
        messages: vec![Message::system("sys"), Message::user("2+2=?")],
        temperature: 1.0,
        top_p: 0.99,
        max_tokens: 64,
        n_samples: n,
    }
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 3,
        initial_backoff: Duration::from_millis(5),
    }
}

#[test]
fn sends_the_wire_fields_and_bearer_token() {
    let (url, rx) = serve(vec![(200, completion_body(&["\\boxed{4}", "\\boxed{5}"]))]);
    let backend = HttpBackend::new(url, "test-model", Some("sekret".into())).unwrap();
    let out = generate(&backend, &request(2)).unwrap();
    assert_eq!(out, ["\\boxed{4}", "\\boxed{5}"]);
    let got = rx.recv().unwrap();
    assert!(
        got.head
            .to_ascii_lowercase()
            .contains("authorization: bearer sekret"),
        "{}",
        got.head
    );
    assert!(got.head.starts_with("POST /v1/chat/completions"));
    let b = &got.body;
    assert_eq!(b["model"], "test-model");
    assert_eq!(b["n"], 2);
    assert_eq!(b["max_tokens"], 64);
    assert_eq!(b["temperature"], 1.0);
    assert_eq!(b["top_p"], 0.99);
    assert_eq!(b["messages"][0]["role"], "system");
    assert_eq!(b["messages"][1]["content"], "2+2=?");
}

#[test]
fn no_token_means_no_auth_header() {
    let (url, rx) = serve(vec![(200, completion_body(&["x"]))]);
    let backend = HttpBackend::new(url, "m", None).unwrap();
    generate(&backend, &request(1)).unwrap();
    assert!(!rx
        .recv()
        .unwrap()
        .head
        .to_ascii_lowercase()
        .contains("authorization"));
}

#[test]
fn retries_server_errors() {
    let (url, rx) = serve(vec![
        (503, "busy".into()),
        (500, "oops".into()),
        (200, completion_body(&["ok"])),
    ]);
    let backend = HttpBackend::new(url, "m", None)
        .unwrap()
        .with_retry(fast_retry());
    assert_eq!(generate(&backend, &request(1)).unwrap(), ["ok"]);
    assert_eq!(rx.try_iter().count(), 3);
}

#[test]
fn gives_up_after_the_attempt_budget() {
    let (url, _rx) = serve(vec![
        (500, "a".into()),
        (500, "b".into()),
        (500, "final body".into()),
    ]);
    let backend = HttpBackend::new(url, "m", None)
        .unwrap()
        .with_retry(fast_retry());
    match generate(&backend, &request(1)) {
        Err(BackendError::Status {
            status,
            body_excerpt,
        }) => {
            assert_eq!(status, 500);
            assert_eq!(body_excerpt, "final body");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let (url, rx) = serve(vec![
        (401, "{\"error\":\"bad key\"}".into()),
        (200, completion_body(&["x"])),
    ]);
    let backend = HttpBackend::new(url, "m", None)
        .unwrap()
        .with_retry(fast_retry());
    let err = generate(&backend, &request(1)).unwrap_err();
    assert!(
        matches!(err, BackendError::Status { status: 401, ref body_excerpt } if body_excerpt.contains("bad key"))
    );
    assert_eq!(rx.try_iter().count(), 1);
}

#[test]
fn transport_failure_reports_attempts() {
    // Bind then drop, so nothing listens on the port.
    let addr = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let backend = HttpBackend::new(format!("http://{addr}/x"), "m", None)
        .unwrap()
        .with_retry(fast_retry());
    match generate(&backend, &request(1)) {
        Err(BackendError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn tops_up_when_the_server_ignores_n() {
    let (url, rx) = serve(vec![
        (200, completion_body(&["a"])),
        (200, completion_body(&["b", "c"])),
    ]);
    let backend = HttpBackend::new(url, "m", None).unwrap();
    assert_eq!(generate(&backend, &request(3)).unwrap(), ["a", "b", "c"]);
    let calls: Vec<_> = rx.try_iter().collect();
    assert_eq!(calls[0].body["n"], 3);
    assert_eq!(calls[1].body["n"], 2);
}

#[test]
fn malformed_json_is_a_decode_error() {
    let (url, _rx) = serve(vec![(200, "not json".into())]);
    let backend = HttpBackend::new(url, "m", None).unwrap();
    assert!(matches!(
        generate(&backend, &request(1)),
        Err(BackendError::Decode(_))
    ));
}
