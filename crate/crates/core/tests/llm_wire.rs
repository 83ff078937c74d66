//! Wire-format checks against a local HTTP stub; no outside network.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use reqlens_core::corpus::{Level, Requirement};
use reqlens_core::llm_bridge::{assess_with_llm, transport_for, LlmError, LlmProfile, PromptConfig};
use serde_json::{json, Value};

struct Captured {
    request_line: String,
    headers: Vec<(String, String)>,
    body: Value,
}

impl Captured {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// Serves `responses` in order, one per connection, reporting each request.
fn stub(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                headers.push((k.trim().to_string(), v.trim().to_string()));
            }
            let len: usize = headers.iter().find(|(k, _)| k.eq_ignore_ascii_case("content-length")).map_or(0, |(_, v)| v.parse().unwrap());
            let mut raw = vec![0; len];
            reader.read_exact(&mut raw).unwrap();
            let _ = tx.send(Captured { request_line: request_line.trim_end().to_string(), headers, body: serde_json::from_slice(&raw).unwrap() });
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), rx)
}

fn answer(id: &str) -> String {
    let per: serde_json::Map<String, Value> = ["Essential", "Independent", "Unambiguous", "Complete", "Singular", "Feasible", "Verifiable"]
        .iter()
        .map(|c| (c.to_string(), json!({"verdict": "Pass", "justification": "fine"})))
        .collect();
    json!({"requirement_id": id, "per_criterion": per, "fnf": {"label": "Functional", "rationale": "behaviour"}}).to_string()
}

fn profile(kind: &str, base_url: &str, key_var: &str) -> LlmProfile {
    serde_json::from_value(json!({
        "rater_id": "remote", "endpoint_kind": kind, "model_name": "test-model",
        "base_url": base_url, "api_key_env_var": key_var, "max_output_tokens": 512, "timeout_ms": 5000
    }))
    .unwrap()
}

fn req() -> Requirement {
    Requirement::new("SR-01", Level::System, "The reader shall report each tag read within 2 seconds.")
}

#[test]
fn openai_compatible_round_trip() {
    std::env::set_var("REQLENS_WIRE_TEST_OPENAI", "sk-test");
    let envelope = json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": answer("SR-01")}}]});
    let (url, rx) = stub(vec![(200, envelope.to_string())]);
    let p = profile("OpenAiCompatibleChat", &url, "REQLENS_WIRE_TEST_OPENAI");
    let t = transport_for(&p).unwrap();
    let got = assess_with_llm(t.as_ref(), &p, &req(), &PromptConfig::default()).unwrap();
    assert_eq!(got.value.per_criterion.len(), 7);

    let c = rx.recv().unwrap();
    assert_eq!(c.request_line, "POST /v1/chat/completions HTTP/1.1");
    assert_eq!(c.header("authorization"), Some("Bearer sk-test"));
    assert_eq!(c.body["model"], "test-model");
    assert_eq!(c.body["temperature"], 0.0);
    assert_eq!(c.body["max_tokens"], 512);
    assert_eq!(c.body["response_format"]["type"], "json_object");
    let msgs = c.body["messages"].as_array().unwrap();
    assert_eq!(msgs[0]["role"], "system");
    assert_eq!(msgs[1]["role"], "user");
    assert!(msgs[1]["content"].as_str().unwrap().contains("within 2 seconds"));
}

#[test]
fn anthropic_compatible_round_trip_with_repair() {
    std::env::set_var("REQLENS_WIRE_TEST_ANTHROPIC", "ak-test");
    let bad = json!({"content": [{"type": "text", "text": "not json"}]});
    let good = json!({"content": [{"type": "text", "text": answer("SR-01")}], "stop_reason": "end_turn"});
    let (url, rx) = stub(vec![(200, bad.to_string()), (200, good.to_string())]);
    let p = profile("AnthropicCompatibleMessages", &url, "REQLENS_WIRE_TEST_ANTHROPIC");
    let t = transport_for(&p).unwrap();
    let got = assess_with_llm(t.as_ref(), &p, &req(), &PromptConfig::default()).unwrap();
    assert_eq!(got.retry_count, 1);

    let first = rx.recv().unwrap();
    assert_eq!(first.request_line, "POST /v1/messages HTTP/1.1");
    assert_eq!(first.header("x-api-key"), Some("ak-test"));
    assert_eq!(first.header("anthropic-version"), Some("2023-06-01"));
    assert!(first.body["system"].as_str().unwrap().contains("criteria.v1"));
    assert_eq!(first.body["messages"].as_array().unwrap().len(), 1);
    let second = rx.recv().unwrap();
    let roles: Vec<&str> = second.body["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["user", "assistant", "user"]);
}

#[test]
fn rejected_key_is_auth_error_and_5xx_is_transport() {
    std::env::set_var("REQLENS_WIRE_TEST_REJECT", "bad");
    let (url, _rx) = stub(vec![(401, "{\"error\":\"nope\"}".into()), (503, "{\"error\":\"busy\"}".into())]);
    let p = profile("OpenAiCompatibleChat", &url, "REQLENS_WIRE_TEST_REJECT");
    let t = transport_for(&p).unwrap();
    assert!(matches!(assess_with_llm(t.as_ref(), &p, &req(), &PromptConfig::default()), Err(LlmError::Auth(_))));
    assert!(matches!(assess_with_llm(t.as_ref(), &p, &req(), &PromptConfig::default()), Err(LlmError::Transport(m)) if m.contains("503")));
}
