//! HTTP backend and remote vision provider against a loopback stub.

mod common;

use std::sync::Arc;
use std::time::Duration;

use common::stub::{Reply, Stub};
use pvqa_core::http::RetryPolicy;
use pvqa_core::llm::{ApiStyle, FnBackend, Gateway, HttpBackend, HttpBackendConfig, LlmError, LlmRequest, LlmResponse};
use pvqa_core::vision::{ApiError, BoundingBox, ImageHandle, RemoteVisionConfig, RemoteVisionProvider, VisionProvider};

fn fast_retry(max_retries: u32) -> RetryPolicy {
    RetryPolicy { max_retries, base_delay_ms: 1, max_delay_ms: 2 }
}

fn backend(stub: &Stub, style: ApiStyle, key: Option<&str>) -> HttpBackend {
    let endpoint = match style {
        ApiStyle::Completions => format!("{}/v1/completions", stub.url),
        ApiStyle::Chat => format!("{}/v1/chat/completions", stub.url),
    };
    let config = HttpBackendConfig {
        endpoint,
        model: "stub-model".into(),
        api_style: style,
        timeout_secs: 5,
        retry: fast_retry(2),
        ..HttpBackendConfig::default()
    };
    HttpBackend::new(config, key.map(str::to_string)).unwrap()
}

const TWO: &str = r#"{"choices":[{"index":1,"text":"b"},{"index":0,"text":"a"}]}"#;

#[test]
fn completions_request_shape_and_auth() {
    let stub = Stub::start(vec![Reply::ok(TWO)]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Completions, Some("sekrit")));
    let req = LlmRequest::new("Question?").samples(2).temperature(0.7).max_tokens(33).stop(vec!["\n\n".into()]);
    assert_eq!(gw.complete(&req).unwrap().completions, ["a", "b"]);
    let seen = stub.recorded();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].path, "/v1/completions");
    assert_eq!(seen[0].headers["authorization"], "Bearer sekrit");
    let body = &seen[0].body;
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["prompt"], "Question?");
    assert_eq!(body["n"], 2);
    assert_eq!(body["max_tokens"], 33);
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["stop"][0], "\n\n");
}

#[test]
fn chat_style() {
    let stub = Stub::start(vec![Reply::ok(r#"{"choices":[{"message":{"role":"assistant","content":"red"}}]}"#)]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Chat, None));
    assert_eq!(gw.complete(&LlmRequest::new("color?")).unwrap().completions, ["red"]);
    let seen = stub.recorded();
    assert_eq!(seen[0].body["messages"][0]["content"], "color?");
    assert!(!seen[0].headers.contains_key("authorization"));
}

#[test]
fn transient_failures_are_retried() {
    let stub = Stub::start(vec![Reply::status(503, "busy"), Reply::status(429, "slow down"), Reply::ok(TWO)]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Completions, None));
    assert_eq!(gw.complete(&LlmRequest::new("p").samples(2)).unwrap().completions, ["a", "b"]);
    assert_eq!(stub.count(), 3);
}

#[test]
fn retries_are_bounded() {
    let stub = Stub::start(vec![Reply::status(500, "down")]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Completions, None));
    assert!(matches!(gw.complete(&LlmRequest::new("p")), Err(LlmError::Transport(_))));
    assert_eq!(stub.count(), 3);
}

#[test]
fn auth_and_client_errors_are_not_retried() {
    let stub = Stub::start(vec![Reply::status(401, "no key")]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Completions, None));
    assert!(matches!(gw.complete(&LlmRequest::new("p")), Err(LlmError::AuthFailure(_))));
    assert_eq!(stub.count(), 1);

    let stub = Stub::start(vec![Reply::status(400, "bad request")]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Completions, None));
    assert!(matches!(gw.complete(&LlmRequest::new("p")), Err(LlmError::BackendRefusal(_))));
    assert_eq!(stub.count(), 1);
}

#[test]
fn malformed_and_short_replies_are_refusals() {
    let stub = Stub::start(vec![Reply::ok("not json")]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Completions, None));
    assert!(matches!(gw.complete(&LlmRequest::new("p")), Err(LlmError::BackendRefusal(_))));

    let stub = Stub::start(vec![Reply::ok(r#"{"choices":[{"text":"only one"}]}"#)]);
    let gw = Gateway::new(backend(&stub, ApiStyle::Completions, None));
    assert!(matches!(gw.complete(&LlmRequest::new("p").samples(3)), Err(LlmError::BackendRefusal(_))));
}

#[test]
fn samples_fan_out_when_n_is_unsupported() {
    let stub = Stub::route(|_, n| Reply::ok(format!(r#"{{"choices":[{{"text":"s{n}"}}]}}"#)));
    let config =
        HttpBackendConfig { supports_n: false, endpoint: format!("{}/v1/completions", stub.url), ..HttpBackendConfig::default() };
    let gw = Gateway::new(HttpBackend::new(config, None).unwrap());
    let r = gw.complete(&LlmRequest::new("p").samples(3)).unwrap();
    assert_eq!(r.completions.len(), 3);
    assert_eq!(stub.count(), 3);
    assert!(stub.recorded().iter().all(|r| r.body["n"] == 1));
    assert_eq!(gw.stats().backend_calls, 3);
}

#[test]
fn timeouts_surface_as_timeout() {
    let stub = Stub::start(vec![Reply::ok(TWO).slow(Duration::from_millis(1500))]);
    let config = HttpBackendConfig {
        endpoint: format!("{}/v1/completions", stub.url),
        timeout_secs: 1,
        retry: fast_retry(0),
        ..HttpBackendConfig::default()
    };
    let gw = Gateway::new(HttpBackend::new(config, None).unwrap());
    assert_eq!(gw.complete(&LlmRequest::new("p").samples(2)), Err(LlmError::Timeout));
}

#[test]
fn refused_connection_is_transport() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let config = HttpBackendConfig {
        endpoint: format!("http://127.0.0.1:{port}/v1/completions"),
        retry: fast_retry(1),
        ..HttpBackendConfig::default()
    };
    let gw = Gateway::new(HttpBackend::new(config, None).unwrap());
    assert!(matches!(gw.complete(&LlmRequest::new("p")), Err(LlmError::Transport(_))));
}

fn vision(stub: &Stub, answer: &'static str) -> (RemoteVisionProvider, Arc<Gateway>) {
    let answerer = Arc::new(Gateway::new(FnBackend::new("answerer", move |_: &LlmRequest| {
        Ok(LlmResponse { completions: vec![answer.into()], usage: None })
    })));
    let config = RemoteVisionConfig { base_url: format!("{}/", stub.url), retry: fast_retry(1), ..Default::default() };
    (RemoteVisionProvider::new(config, answerer.clone()).unwrap(), answerer)
}

#[test]
fn remote_detection_and_crop_translation() {
    let stub = Stub::route(|req, _| {
        assert_eq!(req.path, "/detect");
        Reply::ok(
            r#"{"detections":[
                {"label":"dog","box":[10,10,50,50],"score":0.9},
                {"label":"dog","box":[120,20,160,60]}
            ]}"#,
        )
    });
    let (p, _) = vision(&stub, "");
    let img = ImageHandle::new("img-1");
    let boxes = p.get_object_boxes(&img, "dog").unwrap();
    assert_eq!(boxes.len(), 2);
    assert_eq!(p.count(&img, "dog").unwrap(), 2);

    let view = p.crop(&img, &BoundingBox::new([100.0, 0.0, 200.0, 100.0], "r", 1.0).unwrap()).unwrap();
    let inside = p.get_object_boxes(&view, "dog").unwrap();
    assert_eq!(inside.len(), 1);
    assert_eq!(inside[0].coords(), [20.0, 20.0, 60.0, 60.0]);

    let seen = stub.recorded();
    assert_eq!(seen[0].body["image_ref"], "img-1");
    assert_eq!(seen[0].body["object_name"], "dog");
    assert!(seen[0].body["region"].is_null());
    assert_eq!(seen.last().unwrap().body["region"], serde_json::json!([100.0, 0.0, 200.0, 100.0]));
}

#[test]
fn remote_query_captions_then_asks_the_llm() {
    let stub = Stub::route(|req, _| {
        assert_eq!(req.path, "/caption");
        Reply::ok(r#"{"caption":"a red bus on a road"}"#)
    });
    let (p, answerer) = vision(&stub, "  red\n");
    assert_eq!(p.query(&ImageHandle::new("bus"), "What color is the bus?").unwrap(), "red");
    assert_eq!(answerer.stats().backend_calls, 1);
}

#[test]
fn remote_errors() {
    let stub = Stub::start(vec![Reply::status(404, "no such image")]);
    let (p, _) = vision(&stub, "");
    assert!(matches!(p.get_object_boxes(&ImageHandle::new("x"), "dog"), Err(ApiError::UnknownImage(_))));

    let stub = Stub::start(vec![Reply::ok(r#"{"detections":[{"label":"dog","box":[50,50,10,10]}]}"#)]);
    let (p, _) = vision(&stub, "");
    assert!(matches!(p.get_object_boxes(&ImageHandle::new("x"), "dog"), Err(ApiError::Protocol(_))));

    let stub = Stub::start(vec![Reply::ok(r#"{"unexpected":true}"#)]);
    let (p, _) = vision(&stub, "");
    assert!(matches!(p.query(&ImageHandle::new("x"), "q"), Err(ApiError::Protocol(_))));
}
