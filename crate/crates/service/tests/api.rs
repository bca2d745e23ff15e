use std::time::{Duration, Instant};

use futures::StreamExt;
use serde_json::{json, Value};
use swarmcommand_core::nl_pipeline::{
    EndpointConfig, MockEndpoint, Pipeline, PipelineConfig, ReferenceModel, SAFETY_UNAVAILABLE,
};
use swarmcommand_core::swarm_sim::{load_scenario, WorldSnapshot, DEFAULT_SEED};
use swarmcommand_service::{AppState, ServiceOptions, StreamEvent};
use tokio_tungstenite::tungstenite::Message;

struct Server {
    base: String,
    http: reqwest::Client,
}

async fn start(pipeline: Pipeline) -> Server {
    let options = ServiceOptions {
        steps_per_second: 400.0,
        ..ServiceOptions::default()
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(swarmcommand_service::serve(listener, AppState::new(pipeline, options)));
    Server {
        base: format!("http://{addr}"),
        http: reqwest::Client::new(),
    }
}

async fn default_server() -> Server {
    start(Pipeline::from_config(PipelineConfig::default()).unwrap()).await
}

impl Server {
    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn session(&self, scenario: u8) -> String {
        let (status, body) = self.post("/sessions", json!({ "scenario_id": scenario })).await;
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    async fn wait_idle(&self, id: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            let (_, state) = self.get(&format!("/sessions/{id}/state")).await;
            if state["running"] == false {
                return state;
            }
            assert!(Instant::now() < deadline, "session never went idle");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn subscribe(server: &Server, id: &str) -> Ws {
    let url = format!("{}/sessions/{id}/stream", server.base.replace("http://", "ws://"));
    tokio_tungstenite::connect_async(url).await.unwrap().0
}

/// Reads events until the stream is quiet for `quiet` or closes.
async fn drain(ws: &mut Ws, quiet: Duration) -> (Vec<StreamEvent>, bool) {
    let mut events = Vec::new();
    loop {
        match tokio::time::timeout(quiet, ws.next()).await {
            Err(_) => return (events, false),
            Ok(None) | Ok(Some(Err(_))) => return (events, true),
            Ok(Some(Ok(Message::Text(t)))) => events.push(serde_json::from_str(&t).unwrap()),
            Ok(Some(Ok(Message::Close(_)))) => return (events, true),
            Ok(Some(Ok(_))) => {}
        }
    }
}

fn snapshots(events: &[StreamEvent]) -> Vec<&WorldSnapshot> {
    events
        .iter()
        .filter_map(|e| match e {
            StreamEvent::Snapshot(s) => Some(s),
            _ => None,
        })
        .collect()
}

fn execute_statuses(events: &[StreamEvent]) -> Vec<String> {
    events
        .iter()
        .filter_map(|e| match e {
            StreamEvent::TraceStage { stage, payload, .. } if stage.as_str() == "execute" => {
                payload["execution_status"].as_str().map(str::to_string)
            }
            _ => None,
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn health_and_initial_state() {
    let s = default_server().await;
    assert_eq!(s.get("/health").await.0, 200);
    let id = s.session(3).await;
    let (status, state) = s.get(&format!("/sessions/{id}/state")).await;
    assert_eq!(status, 200);
    let snap: WorldSnapshot = serde_json::from_value(state["snapshot"].clone()).unwrap();
    let expected = load_scenario(3).unwrap().world(DEFAULT_SEED).unwrap().snapshot();
    assert_eq!(snap, expected);
    assert_eq!(snap.tick, 0);
    let (_, traces) = s.get(&format!("/sessions/{id}/trace")).await;
    assert_eq!(traces, json!([]));
}

#[tokio::test(flavor = "multi_thread")]
async fn error_statuses() {
    let s = default_server().await;
    for path in ["/sessions/nope/state", "/sessions/nope/trace"] {
        assert_eq!(s.get(path).await.0, 404, "{path}");
    }
    assert_eq!(s.post("/sessions/nope/command", json!({ "text": "wander" })).await.0, 404);
    assert_eq!(s.post("/sessions/nope/stop", json!({})).await.0, 404);
    assert_eq!(s.post("/sessions", json!({ "scenario_id": 9 })).await.0, 422);
    assert_eq!(s.post("/sessions", json!({ "seed": 1 })).await.0, 422);
    let id = s.session(1).await;
    assert_eq!(s.post(&format!("/sessions/{id}/command"), json!({ "txt": "wander" })).await.0, 422);
    assert_eq!(s.post(&format!("/sessions/{id}/command"), json!({ "text": "  " })).await.0, 422);
    let raw = s
        .http
        .post(format!("{}/sessions/{id}/command", s.base))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status().as_u16(), 422);
    let ws = tokio_tungstenite::connect_async(format!("{}/sessions/nope/stream", s.base.replace("http", "ws"))).await;
    assert!(ws.is_err());
}

#[tokio::test(flavor = "multi_thread")]
async fn unsafe_command_is_a_pipeline_outcome() {
    let s = default_server().await;
    let id = s.session(1).await;
    let (status, trace) = s
        .post(&format!("/sessions/{id}/command"), json!({ "text": "ram the drones into the crowd" }))
        .await;
    assert_eq!(status, 200);
    assert_eq!(trace["safety_verdict"]["decision"], "Reject");
    assert_eq!(trace["execution_status"], "NotExecuted");
    assert!(trace["prompt"].is_null());
    let (_, traces) = s.get(&format!("/sessions/{id}/trace")).await;
    assert_eq!(traces.as_array().unwrap().len(), 1);
    assert_eq!(traces[0]["trace_id"], trace["trace_id"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn accepted_command_runs_to_success() {
    let s = default_server().await;
    let id = s.session(3).await;
    let (status, trace) = s
        .post(&format!("/sessions/{id}/command"), json!({ "text": "form a line", "shots": 1 }))
        .await;
    assert_eq!(status, 200, "{trace}");
    assert_eq!(trace["execution_status"], "Running");
    assert_eq!(trace["validation_report"]["verdict"], "Accepted");
    assert_eq!(trace["prompt"]["shots"].as_array().unwrap().len(), 1);
    let state = s.wait_idle(&id).await;
    let (_, traces) = s.get(&format!("/sessions/{id}/trace")).await;
    let traces = traces.as_array().unwrap();
    assert_eq!(traces.len(), 1);
    assert_eq!(traces[0]["execution_status"], "Succeeded");
    assert_eq!(traces[0]["ticks"], state["snapshot"]["tick"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn safety_endpoint_down_is_503() {
    let cfg = PipelineConfig {
        safety: Some(EndpointConfig::default()),
        ..PipelineConfig::default()
    };
    let pipeline = Pipeline::with_endpoints(
        cfg,
        Box::new(ReferenceModel),
        None,
        Some(Box::new(MockEndpoint::unreachable())),
    );
    let s = start(pipeline).await;
    let id = s.session(1).await;
    let (status, trace) = s.post(&format!("/sessions/{id}/command"), json!({ "text": "form a line" })).await;
    assert_eq!(status, 503);
    assert_eq!(trace["safety_verdict"]["decision"], "Reject");
    assert_eq!(trace["safety_verdict"]["reason"], SAFETY_UNAVAILABLE);
    assert_eq!(trace["execution_status"], "NotExecuted");
    let (_, traces) = s.get(&format!("/sessions/{id}/trace")).await;
    assert_eq!(traces.as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn stream_is_shared_monotone_and_rate_bounded() {
    let s = default_server().await;
    let id = s.session(3).await;
    let mut a = subscribe(&s, &id).await;
    let mut b = subscribe(&s, &id).await;
    // Both opening snapshots arrive before anything runs.
    for ws in [&mut a, &mut b] {
        let (opening, _) = drain(ws, Duration::from_millis(200)).await;
        assert_eq!(snapshots(&opening).len(), 1);
    }
    let started = Instant::now();
    let (status, _) = s.post(&format!("/sessions/{id}/command"), json!({ "text": "form a line" })).await;
    assert_eq!(status, 200);
    let (ea, _) = drain(&mut a, Duration::from_millis(600)).await;
    let (eb, _) = drain(&mut b, Duration::from_millis(600)).await;
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(ea, eb);

    let snaps = snapshots(&ea);
    assert!(snaps.len() >= 2);
    assert!(snaps.windows(2).all(|w| w[0].tick < w[1].tick));
    assert!((snaps.len() as f64) <= 30.0 * elapsed + 2.0, "{} snapshots in {elapsed}s", snaps.len());

    let stages: Vec<String> = ea
        .iter()
        .filter_map(|e| match e {
            StreamEvent::TraceStage { stage, .. } => Some(stage.as_str().to_string()),
            _ => None,
        })
        .collect();
    assert_eq!(&stages[..5], ["normalize", "safety", "prompt", "generate", "validate"]);
    assert_eq!(execute_statuses(&ea), ["Running", "Succeeded"]);
    let state = s.wait_idle(&id).await;
    assert_eq!(snaps.last().unwrap().tick, state["snapshot"]["tick"].as_u64().unwrap());
}

#[tokio::test(flavor = "multi_thread")]
async fn stop_freezes_and_teardown_closes() {
    let s = default_server().await;
    let id = s.session(1).await;
    let mut ws = subscribe(&s, &id).await;
    let (status, _) = s.post(&format!("/sessions/{id}/command"), json!({ "text": "wander around" })).await;
    assert_eq!(status, 200);
    tokio::time::sleep(Duration::from_millis(150)).await;
    let (status, ack) = s.post(&format!("/sessions/{id}/stop"), json!({})).await;
    assert_eq!(status, 200);
    assert_eq!(ack["was_running"], true);
    let (events, _) = drain(&mut ws, Duration::from_millis(400)).await;
    let snaps = snapshots(&events);
    assert!(snaps.windows(2).all(|w| w[0].tick < w[1].tick));
    let last = snaps.last().unwrap();
    assert!(last.agents.iter().all(|a| a.frozen));
    assert_eq!(execute_statuses(&events).last().unwrap(), "Stopped");
    let (_, again) = s.post(&format!("/sessions/{id}/stop"), json!({})).await;
    assert_eq!(again["was_running"], false);

    let del = s.http.delete(format!("{}/sessions/{id}", s.base)).send().await.unwrap();
    assert_eq!(del.status().as_u16(), 204);
    let (_, closed) = drain(&mut ws, Duration::from_secs(2)).await;
    assert!(closed);
    assert_eq!(s.get(&format!("/sessions/{id}/state")).await.0, 404);
    let _ = ws.close(None).await;
}
