//! The remote embedder against an in-process stand-in for the service.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use collusion_core::comments::embed::{provider_from_spec, REMOTE_BATCH_LIMIT};
use collusion_core::comments::{EmbeddingProvider, RemoteEmbedder};
use collusion_core::Error;
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Behaviour {
    Good,
    ShortBatch,
    WrongDim,
    ServerError,
}

/// Serve forever on an ephemeral port; returns the base URL and the batch
/// sizes seen by `/embed`.
fn serve(behaviour: Behaviour) -> (String, Arc<Mutex<Vec<usize>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let batches = Arc::new(Mutex::new(Vec::new()));
    let seen = batches.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0usize;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0u8; length];
            reader.read_exact(&mut body).unwrap();
            let (status, payload) = respond(&request_line, &body, behaviour, &seen);
            let text = payload.to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    (url, batches)
}

fn respond(line: &str, body: &[u8], behaviour: Behaviour, seen: &Mutex<Vec<usize>>) -> (&'static str, Value) {
    if line.starts_with("GET /healthz") {
        return ("200 OK", json!({"status": "ok", "model_id": "stub-3", "dim": 3}));
    }
    if !line.starts_with("POST /embed") {
        return ("404 Not Found", json!({"error": "no route"}));
    }
    if let Behaviour::ServerError = behaviour {
        return ("500 Internal Server Error", json!({"error": "boom"}));
    }
    let req: Value = serde_json::from_slice(body).unwrap();
    let texts: Vec<String> = req["texts"].as_array().unwrap().iter().map(|t| t.as_str().unwrap().to_string()).collect();
    seen.lock().unwrap().push(texts.len());
    let mut vectors: Vec<Vec<f64>> = texts.iter().map(|t| vec![t.len() as f64, 1.0, 0.0]).collect();
    let mut dim = 3;
    match behaviour {
        Behaviour::ShortBatch => {
            vectors.pop();
        }
        Behaviour::WrongDim => {
            vectors.iter_mut().for_each(|v| v.push(0.0));
            dim = 4;
        }
        _ => {}
    }
    ("200 OK", json!({"vectors": vectors, "model_id": "stub-3", "dim": dim}))
}

#[test]
fn health_then_batched_embeddings() {
    let (url, batches) = serve(Behaviour::Good);
    let e = RemoteEmbedder::connect(&format!("{url}/")).unwrap();
    assert_eq!(e.dim(), 3);
    assert_eq!(e.provider_id(), "remote:stub-3");

    let texts: Vec<String> = (0..REMOTE_BATCH_LIMIT + 44).map(|i| "x".repeat(1 + i % 7)).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let out = e.embed(&refs).unwrap();
    assert_eq!(out.len(), refs.len());
    assert_eq!(*batches.lock().unwrap(), vec![REMOTE_BATCH_LIMIT, 44]);
    for (t, v) in refs.iter().zip(&out) {
        let n = t.len() as f64;
        let norm = (n * n + 1.0).sqrt();
        assert!((v[0] - n / norm).abs() < 1e-12 && (v[1] - 1.0 / norm).abs() < 1e-12 && v[2] == 0.0);
    }
}

#[test]
fn spec_string_reaches_the_service() {
    let (url, _) = serve(Behaviour::Good);
    let p = provider_from_spec(&format!("remote:{url}"), 0).unwrap();
    assert_eq!(p.dim(), 3);
    assert_eq!(p.embed(&["ab"]).unwrap().len(), 1);
}

fn provider_error(behaviour: Behaviour) -> Error {
    let (url, _) = serve(behaviour);
    let e = RemoteEmbedder::connect(&url).unwrap();
    e.embed(&["a", "bb"]).unwrap_err()
}

#[test]
fn malformed_responses_are_provider_errors() {
    for b in [Behaviour::ShortBatch, Behaviour::WrongDim, Behaviour::ServerError] {
        match provider_error(b) {
            Error::Provider { batch_len, .. } => assert_eq!(batch_len, 2),
            other => panic!("expected provider error, got {other:?}"),
        }
    }
}

#[test]
fn unreachable_service_fails_to_connect() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    assert!(matches!(RemoteEmbedder::connect(&format!("http://127.0.0.1:{port}")), Err(Error::Provider { .. })));
}
