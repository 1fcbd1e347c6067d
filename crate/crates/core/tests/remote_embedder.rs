//! The remote client against a throwaway HTTP server on localhost.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use funnel_core::embed::{EmbedError, Embedder, RemoteEmbedder};

#[derive(Clone, Copy)]
enum Mode {
    /// Vector `[n, 1, 0, ...]` for text `"n"`.
    Echo,
    DropLast,
    Status500,
    Hang,
}

fn read_request(stream: &mut TcpStream) -> Option<serde_json::Value> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let msg =
        format!("HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len());
    let _ = stream.write_all(msg.as_bytes());
}

fn serve(mode: Mode) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            thread::spawn(move || {
                let Some(req) = read_request(&mut stream) else { return };
                let texts: Vec<String> = req["texts"].as_array().unwrap().iter().map(|t| t.as_str().unwrap().to_string()).collect();
                let mut vectors: Vec<Vec<f32>> = texts
                    .iter()
                    .map(|t| {
                        let mut v = vec![0.0f32; 8];
                        v[0] = t.parse().unwrap_or(0.0);
                        v[1] = 1.0;
                        v
                    })
                    .collect();
                match mode {
                    Mode::Echo => {}
                    Mode::DropLast => {
                        vectors.pop();
                    }
                    Mode::Status500 => return respond(&mut stream, "500 Internal Server Error", "{}"),
                    Mode::Hang => thread::sleep(Duration::from_secs(3)),
                }
                respond(&mut stream, "200 OK", &serde_json::json!({ "vectors": vectors }).to_string());
            });
        }
    });
    format!("http://{addr}/embed")
}

fn ratio(v: &[f32]) -> f32 {
    v[0] / v[1]
}

#[test]
fn order_is_preserved_across_batches() {
    let endpoint = serve(Mode::Echo);
    let embedder = RemoteEmbedder::new(endpoint, 8, Duration::from_secs(5)).unwrap().with_parallelism(2, 2);
    let texts: Vec<String> = (1..=7).map(|i| i.to_string()).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let out = embedder.embed_batch(&refs).unwrap();
    assert_eq!(out.len(), 7);
    for (i, v) in out.iter().enumerate() {
        assert!((ratio(v.values()) - (i + 1) as f32).abs() < 1e-4);
        assert!((v.norm() - 1.0).abs() < 1e-6);
    }
    assert!(embedder.embed_batch(&[]).unwrap().is_empty());
}

#[test]
fn three_texts_single_request() {
    let endpoint = serve(Mode::Echo);
    let embedder = RemoteEmbedder::new(endpoint, 8, Duration::from_secs(5)).unwrap();
    let out = embedder.embed_batch(&["3", "1", "2"]).unwrap();
    let got: Vec<f32> = out.iter().map(|v| ratio(v.values()).round()).collect();
    assert_eq!(got, [3.0, 1.0, 2.0]);
}

#[test]
fn short_response_is_bad() {
    let embedder = RemoteEmbedder::new(serve(Mode::DropLast), 8, Duration::from_secs(5)).unwrap();
    assert!(matches!(embedder.embed_batch(&["1", "2", "3"]), Err(EmbedError::BadResponse(_))));
}

#[test]
fn wrong_dimension_is_bad() {
    let embedder = RemoteEmbedder::new(serve(Mode::Echo), 16, Duration::from_secs(5)).unwrap();
    assert!(matches!(embedder.embed("1"), Err(EmbedError::BadResponse(_))));
}

#[test]
fn server_error_is_bad() {
    let embedder = RemoteEmbedder::new(serve(Mode::Status500), 8, Duration::from_secs(5)).unwrap();
    assert!(matches!(embedder.embed("1"), Err(EmbedError::BadResponse(_))));
}

#[test]
fn slow_server_times_out() {
    let embedder = RemoteEmbedder::new(serve(Mode::Hang), 8, Duration::from_millis(300)).unwrap();
    assert!(matches!(embedder.embed("1"), Err(EmbedError::Timeout(_))));
}

#[test]
fn unreachable_server_is_transport_error() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let embedder = RemoteEmbedder::new(format!("http://127.0.0.1:{port}/embed"), 8, Duration::from_secs(2)).unwrap();
    assert!(matches!(embedder.embed("1"), Err(EmbedError::Transport(_))));
}
