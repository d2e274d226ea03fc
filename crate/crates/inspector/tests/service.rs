use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures_util::{SinkExt, StreamExt};
use minicart_core::GameId;
use minicart_inspector::{bind, router, AppState, ServiceConfig};
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

fn config() -> ServiceConfig {
    let mut c = ServiceConfig::new(GameId::Paddle, 0, 0);
    c.findings_frames = 200;
    c
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body.to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn rest_set_ram_moves_ball_box() {
    let app = router(AppState::new(config()));
    let (status, st) = call(&app, "POST", "/api/command", r#"{"type":"set_ram","addr":0,"value":80}"#).await;
    assert_eq!(status, StatusCode::OK);
    let ball = st["objects_rem"].as_array().unwrap().iter().find(|o| o["category"] == "Ball").unwrap();
    assert_eq!(ball["x"], 80);
    let (_, again) = call(&app, "GET", "/api/state", "").await;
    assert_eq!(again["ram"][0], 80);
    assert!(again["findings"].as_array().is_some_and(|f| !f.is_empty()));
}

#[tokio::test]
async fn rest_errors_name_field_and_session_survives() {
    let app = router(AppState::new(config()));
    let (status, err) = call(&app, "POST", "/api/command", r#"{"type":"step","n":"two"}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["type"], "error");
    assert_eq!(err["field"], "n");
    let (status, st) = call(&app, "POST", "/api/command", r#"{"type":"step","n":2}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(st["frame_index"], 2);
}

#[tokio::test]
async fn rest_pause_then_zero_steps_are_identical() {
    let app = router(AppState::new(config()));
    call(&app, "POST", "/api/command", r#"{"type":"pause"}"#).await;
    let (_, a) = call(&app, "POST", "/api/command", r#"{"type":"step","n":0}"#).await;
    let (_, b) = call(&app, "POST", "/api/command", r#"{"type":"step","n":0}"#).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn rest_probe_unused_byte() {
    let app = router(AppState::new(config()));
    let (_, st) = call(&app, "POST", "/api/command", r#"{"type":"probe","addr":99}"#).await;
    let diffs = st["probe"]["diffs"].as_array().unwrap();
    assert_eq!(diffs.len(), 5);
    assert!(diffs.iter().all(|d| d["pixels"] == 0));
}

#[tokio::test]
async fn placeholder_page_served() {
    let app = router(AppState::new(config()));
    let req = Request::builder().uri("/").body(Body::empty()).unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
}

#[test]
fn token_generated_beyond_loopback() {
    let mut c = config();
    assert_eq!(c.ensure_token(), None);
    c.host = [0, 0, 0, 0].into();
    assert_eq!(c.ensure_token().map(str::len), Some(32));
}

async fn next_json(ws: &mut (impl StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin)) -> Value {
    loop {
        match ws.next().await.unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            _ => continue,
        }
    }
}

#[tokio::test]
async fn websocket_commands_and_streaming() {
    let (addr, server) = bind(config()).await.unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    let hello = next_json(&mut ws).await;
    assert_eq!(hello["frame_index"], 0);
    assert_eq!(hello["ram"].as_array().unwrap().len(), 128);

    ws.send(Message::text(r#"{"type":"set_ram","addr":0,"value":80}"#)).await.unwrap();
    let st = next_json(&mut ws).await;
    let ball = st["objects_rem"].as_array().unwrap().iter().find(|o| o["category"] == "Ball").unwrap();
    assert_eq!(ball["x"], 80);

    ws.send(Message::text(r#"{"type":"bogus"}"#)).await.unwrap();
    assert_eq!(next_json(&mut ws).await["field"], "type");

    ws.send(Message::text(r#"{"type":"run","ticks_per_second":200}"#)).await.unwrap();
    let ack = next_json(&mut ws).await;
    assert_eq!(ack["run"]["mode"], "running");
    let mut last = ack["frame_index"].as_u64().unwrap();
    for _ in 0..5 {
        let st = next_json(&mut ws).await;
        // Streamed snapshots are consistent: REM boxes follow the RAM in the same message.
        let ram = st["ram"].as_array().unwrap();
        let ball = st["objects_rem"].as_array().unwrap().iter().find(|o| o["category"] == "Ball");
        if let Some(b) = ball {
            assert_eq!(b["x"], ram[0]);
        }
        let idx = st["frame_index"].as_u64().unwrap();
        assert!(idx > last);
        last = idx;
    }
    ws.send(Message::text(r#"{"type":"pause"}"#)).await.unwrap();
    loop {
        let st = next_json(&mut ws).await;
        if st["run"]["mode"] == "paused" {
            break;
        }
    }
    ws.close(None).await.unwrap();
    server.abort();
}

#[tokio::test]
async fn websocket_sessions_are_independent() {
    let (addr, server) = bind(config()).await.unwrap();
    let (mut a, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    let (mut b, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    next_json(&mut a).await;
    next_json(&mut b).await;
    a.send(Message::text(r#"{"type":"step","n":10}"#)).await.unwrap();
    assert_eq!(next_json(&mut a).await["frame_index"], 10);
    b.send(Message::text(r#"{"type":"step","n":0}"#)).await.unwrap();
    assert_eq!(next_json(&mut b).await["frame_index"], 0);
    server.abort();
}
