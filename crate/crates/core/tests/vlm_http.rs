use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use handover_core::vlm::{ChatMessage, LiveClient, VlmClient, VlmConfig, VlmError};
use serde_json::Value;

/// Serves `replies` (status, body) to consecutive connections and returns the
/// request bodies it saw.
fn fake_server(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<Value>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut len = 0;
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            assert!(request_line.starts_with("POST /v1/chat/completions "), "{request_line}");
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            seen.push(serde_json::from_slice(&buf).unwrap());
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        seen
    });
    (url, handle)
}

fn config(url: String, key_env: &str) -> VlmConfig {
    VlmConfig {
        base_url: url,
        api_key_env: key_env.into(),
        backoff_base_secs: 0.0,
        timeout_secs: 5.0,
        ..VlmConfig::default()
    }
}

#[test]
fn rate_limits_are_retried_until_success() {
    std::env::set_var("HANDOVER_TEST_KEY_RETRY", "secret");
    let ok = r#"{"choices":[{"message":{"role":"assistant","content":"human:[1], robot:[2]"}}]}"#;
    let (url, server) = fake_server(vec![(429, "{}".into()), (429, "{}".into()), (200, ok.into())]);
    let mut client = LiveClient::new(config(url, "HANDOVER_TEST_KEY_RETRY")).unwrap();
    let msgs = [ChatMessage::user("find the regions").with_image()];
    let reply = client.complete(&msgs, b"\x89PNG fake").unwrap();
    assert_eq!(reply, "human:[1], robot:[2]");
    assert_eq!(client.last_attempts(), 3);
    let bodies = server.join().unwrap();
    assert_eq!(bodies.len(), 3);
    assert!(bodies.windows(2).all(|w| w[0] == w[1]), "retries must resend the same request");
    assert_wire_shape(&bodies[0]);
}

fn assert_wire_shape(body: &Value) {
    assert_eq!(body["model"], VlmConfig::default().model);
    assert_eq!(body["temperature"], 0.0);
    let msgs = body["messages"].as_array().unwrap();
    assert_eq!(msgs.len(), 1);
    assert_eq!(msgs[0]["role"], "user");
    let content = msgs[0]["content"].as_array().unwrap();
    assert_eq!(content[0]["type"], "text");
    assert_eq!(content[0]["text"], "find the regions");
    assert_eq!(content[1]["type"], "image_url");
    let url = content[1]["image_url"]["url"].as_str().unwrap();
    use base64::Engine;
    let png = base64::engine::general_purpose::STANDARD
        .decode(url.strip_prefix("data:image/png;base64,").unwrap())
        .unwrap();
    assert_eq!(png, b"\x89PNG fake");
}

#[test]
fn client_errors_are_not_retried() {
    std::env::set_var("HANDOVER_TEST_KEY_400", "secret");
    let (url, server) = fake_server(vec![(400, r#"{"error":"bad"}"#.into())]);
    let mut client = LiveClient::new(config(url, "HANDOVER_TEST_KEY_400")).unwrap();
    let err = client.complete(&[ChatMessage::user("x")], b"").unwrap_err();
    assert!(matches!(err, VlmError::HttpStatus { status: 400, .. }), "{err:?}");
    assert_eq!(client.last_attempts(), 1);
    server.join().unwrap();
}

#[test]
fn missing_key_fails_before_any_request() {
    let mut client = LiveClient::new(config("http://127.0.0.1:9".into(), "HANDOVER_TEST_KEY_UNSET")).unwrap();
    let err = client.complete(&[ChatMessage::user("x")], b"").unwrap_err();
    assert_eq!(err.name(), "MissingApiKey");
    assert_eq!(client.last_attempts(), 0);
}
