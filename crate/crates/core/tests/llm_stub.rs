use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use split_forge::llm_client::{suggest_pairs, LlmEndpointConfig};
use split_forge::Error;

/// Answers each request with the next scripted `(status, body)` and records
/// the request bodies.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in script {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
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
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock()
                .unwrap()
                .push(serde_json::from_slice(&buf).unwrap_or(Value::Null));
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}"), seen)
}

fn chat(content: &str) -> String {
    json!({"choices": [{"message": {"content": content}}]}).to_string()
}

fn config(base_url: String) -> LlmEndpointConfig {
    LlmEndpointConfig {
        base_url,
        backoff_initial_ms: 1,
        request_timeout_secs: 10.0,
        ..Default::default()
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

#[test]
fn cup_mug_reply_becomes_one_pair() {
    let (url, seen) = serve(vec![(200, chat("cup,mug"))]);
    let out = suggest_pairs(&names(&["cup", "mug", "zebra"]), &config(url)).unwrap();
    assert_eq!(out.pairs.pairs, vec![("cup".to_string(), "mug".to_string())]);
    let req = &seen.lock().unwrap()[0];
    assert_eq!(req["model"], "gpt-4o");
    assert_eq!(req["temperature"], 0.0);
}

#[test]
fn unknown_names_dropped_and_counted() {
    let (url, _) = serve(vec![(200, chat("cup,mug\ncup,teapot\nnot a pair"))]);
    let out = suggest_pairs(&names(&["cup", "mug"]), &config(url)).unwrap();
    assert_eq!(out.pairs.pairs.len(), 1);
    assert_eq!(out.dropped_unknown, 1);
    assert_eq!(out.malformed_lines, 1);
}

#[test]
fn empty_reply_gives_empty_list() {
    let (url, _) = serve(vec![(200, chat(""))]);
    let out = suggest_pairs(&names(&["cup", "mug"]), &config(url)).unwrap();
    assert!(out.pairs.pairs.is_empty());
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = serve(vec![(500, "{}".into()), (429, "{}".into()), (200, chat("mug,cup"))]);
    let out = suggest_pairs(&names(&["cup", "mug"]), &config(url)).unwrap();
    assert_eq!(out.pairs.pairs.len(), 1);
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn retries_are_bounded() {
    let (url, _) = serve(vec![(503, "{}".into()), (503, "{}".into())]);
    let cfg = LlmEndpointConfig {
        max_attempts: 2,
        ..config(url)
    };
    let err = suggest_pairs(&names(&["cup", "mug"]), &cfg).unwrap_err();
    assert!(matches!(err, Error::Llm(ref m) if m.contains("2 attempts")), "{err}");
}

#[test]
fn auth_failure_is_fatal() {
    let (url, seen) = serve(vec![(401, "{}".into()), (200, chat("cup,mug"))]);
    let err = suggest_pairs(&names(&["cup", "mug"]), &config(url)).unwrap_err();
    assert!(matches!(err, Error::Llm(ref m) if m.contains("401")));
    assert_eq!(seen.lock().unwrap().len(), 1);
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn unparseable_response_is_an_error() {
    let (url, _) = serve(vec![(200, "not json".into())]);
    let err = suggest_pairs(&names(&["cup", "mug"]), &config(url)).unwrap_err();
    assert!(err.to_string().contains("not json"));
}

#[test]
fn batches_are_merged_in_order() {
    let (url, seen) = serve(vec![(200, chat("a,b")), (200, chat("c,d\nb,a"))]);
    let cfg = LlmEndpointConfig {
        max_concepts_per_request: 2,
        ..config(url)
    };
    let out = suggest_pairs(&names(&["a", "b", "c", "d"]), &cfg).unwrap();
    assert_eq!(
        out.pairs.pairs,
        vec![("a".to_string(), "b".to_string()), ("c".to_string(), "d".to_string())]
    );
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn custom_payload_and_pointer() {
    let (url, seen) = serve(vec![(200, json!({"output": {"text": "cup,mug"}}).to_string())]);
    let cfg = LlmEndpointConfig {
        payload_template: Some(json!({"prompt": "{{prompt}}", "model_id": "{{model}}"})),
        response_pointer: "/output/text".into(),
        model_name: "local-model".into(),
        ..config(url)
    };
    let out = suggest_pairs(&names(&["cup", "mug"]), &cfg).unwrap();
    assert_eq!(out.pairs.pairs.len(), 1);
    assert_eq!(seen.lock().unwrap()[0]["model_id"], "local-model");
}
