use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pragmachat::config::BackendKind;
use pragmachat::{App, AppConfig};
use pragmachat_core::gateway::{Backend, MockBackend};
use pragmachat_core::speechact::RuleClassifier;
use serde_json::{json, Value};
use tower::ServiceExt;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");

fn app_with(dir: &std::path::Path, backend: Arc<dyn Backend>) -> Arc<App> {
    let config = AppConfig {
        backend: BackendKind::Mock,
        data_dir: dir.to_path_buf(),
        ..AppConfig::default()
    };
    let app = App::with_parts(config, backend, Arc::new(RuleClassifier::default())).unwrap();
    app.start_worker();
    app
}

fn mock_app(dir: &std::path::Path) -> Arc<App> {
    app_with(dir, Arc::new(MockBackend::new().with_model("mock-2")))
}

async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(router, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn upload(router: &Router, title: &str, text: &str) -> String {
    let (status, doc) = call_json(
        router,
        "POST",
        "/documents",
        Some(json!({ "title": title, "format": "txt", "text": text })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{doc}");
    doc["id"].as_str().unwrap().to_string()
}

async fn new_session(router: &Router, doc: &str) -> String {
    let (status, s) = call_json(
        router,
        "POST",
        "/sessions",
        Some(json!({ "model": "mock", "doc_id": doc })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{s}");
    s["id"].as_str().unwrap().to_string()
}

async fn wait_done(router: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let (_, job) = call_json(router, "GET", &format!("/experiments/{id}"), None).await;
        if job["status"] == "done" || job["status"] == "failed" {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("experiment {id} did not finish");
}

#[tokio::test]
async fn models_and_documents() {
    let dir = tempfile::tempdir().unwrap();
    let router = pragmachat::http::router(mock_app(dir.path()));
    let (status, models) = call_json(&router, "GET", "/models", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> = models.as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"mock") && names.contains(&"mock-2"));

    upload(&router, "Child Health", "Children grow fast.").await;
    let pdf = std::fs::read(format!("{FIXTURES}/poverty.pdf")).unwrap();
    let resp = router
        .clone()
        .oneshot(
            Request::post("/documents?title=Poverty%20in%20a%20rising%20Africa&format=pdf")
                .body(Body::from(pdf))
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let (_, docs) = call_json(&router, "GET", "/documents", None).await;
    let titles: Vec<&str> = docs.as_array().unwrap().iter().map(|d| d["title"].as_str().unwrap()).collect();
    assert_eq!(titles, ["Child Health", "Poverty in a rising Africa"]);

    let (status, _) = call_json(
        &router,
        "POST",
        "/documents",
        Some(json!({ "title": "x", "format": "txt", "text": "" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(
        &router,
        "POST",
        "/documents",
        Some(json!({ "title": "x", "format": "docx", "text": "hi" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn chat_with_speech_act_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let router = pragmachat::http::router(mock_app(dir.path()));
    let doc = upload(&router, "001", &std::fs::read_to_string(format!("{FIXTURES}/child_health.txt")).unwrap()).await;
    let sid = new_session(&router, &doc).await;

    let (status, reply) = call_json(
        &router,
        "POST",
        &format!("/sessions/{sid}/chat"),
        Some(json!({ "message": "That’s great, thanks for helping.", "include_illocutionary_force": true })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{reply}");
    assert_eq!(reply["speech_act"], "expressive");
    assert!(reply["assistant_text"].as_str().unwrap().starts_with("MOCK(mock|"));
    let metrics = reply["metrics"].as_object().unwrap();
    for key in [
        "bert_p", "bert_r", "bert_f1", "qa_ref", "qa_cand", "rouge1", "rouge2", "rouge_l", "meteor",
        "perplexity",
    ] {
        assert!(metrics[key].as_f64().unwrap().is_finite(), "{key}");
    }

    let (_, reply) = call_json(
        &router,
        "POST",
        &format!("/sessions/{sid}/chat"),
        Some(json!({ "message": "What about sleep?", "include_illocutionary_force": false })),
    )
    .await;
    assert!(reply.get("speech_act").is_none(), "{reply}");

    let (status, transcript) = call_json(&router, "GET", &format!("/sessions/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let turns = transcript["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 4);
    assert_eq!(turns[0]["role"], "user");
    assert_eq!(turns[0]["speech_act"]["category"], "expressive");
    assert_eq!(turns[0]["include_illocutionary_force"], true);
    assert_eq!(turns[2]["include_illocutionary_force"], false);
    assert!(turns[1]["metrics"].is_object() && turns[1]["scores"].is_object());
    assert!(turns[0].get("metrics").is_none());
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let router = pragmachat::http::router(mock_app(dir.path()));
    let doc = upload(&router, "d", "Some text.").await;
    let sid = new_session(&router, &doc).await;

    let chat = |id: String, body: Value| {
        let router = router.clone();
        async move { call_json(&router, "POST", &format!("/sessions/{id}/chat"), Some(body)).await.0 }
    };
    assert_eq!(chat("nope".into(), json!({ "message": "hi" })).await, StatusCode::NOT_FOUND);
    assert_eq!(chat(sid.clone(), json!({ "message": "  " })).await, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(chat(sid.clone(), json!({ "msg": "hi" })).await, StatusCode::BAD_REQUEST);
    assert_eq!(call(&router, "GET", "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&router, "GET", "/experiments/nope", None).await.0, StatusCode::NOT_FOUND);

    let (status, _) = call_json(&router, "POST", "/sessions", Some(json!({ "model": "mock", "doc_id": "missing" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call_json(&router, "POST", "/sessions", Some(json!({ "model": "gpt", "doc_id": doc }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&router, "POST", "/experiments", Some(json!({ "config": { "documents": [], "models": ["mock"] } }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unreachable_backend_is_502() {
    let dir = tempfile::tempdir().unwrap();
    let router = pragmachat::http::router(app_with(dir.path(), Arc::new(MockBackend::unreachable())));
    let doc = upload(&router, "d", "Some text.").await;
    assert_eq!(call(&router, "GET", "/models", None).await.0, StatusCode::BAD_GATEWAY);
    let (status, _) = call_json(&router, "POST", "/sessions", Some(json!({ "model": "mock", "doc_id": doc }))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
}

fn experiment_body(doc1: &str, doc2: &str) -> Value {
    json!({ "config": {
        "documents": [
            { "doc_id": doc1, "queries": ["What can I expect from my young child’s development?", "That’s great, thanks for helping."] },
            { "doc_id": doc2, "queries": ["What do you think can be done to solve it?", "Brilliant, that sounds amazing."] }
        ],
        "models": ["mock", "mock-2"]
    }})
}

#[tokio::test]
async fn background_experiment_produces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let router = pragmachat::http::router(mock_app(dir.path()));
    upload(&router, "001", "Children develop quickly. Sleep matters.").await;
    upload(&router, "002", "Poverty has declined slowly. Growth helps.").await;

    let (status, accepted) = call_json(&router, "POST", "/experiments", Some(experiment_body("001", "002"))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = accepted["id"].as_str().unwrap().to_string();
    let job = wait_done(&router, &id).await;
    assert_eq!(job["status"], "done", "{job}");
    assert_eq!(job["results"].as_array().unwrap().len(), 16);

    let (status, csv) = call(&router, "GET", &format!("/experiments/{id}/results.csv"), None).await;
    assert_eq!(status, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("sn,document,model,turn,arm,response_time_s,"));
    let (status, md) = call(&router, "GET", &format!("/experiments/{id}/comparison.md"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(md).unwrap().contains("### Document 001, First response"));
    assert_eq!(call(&router, "GET", &format!("/experiments/{id}/secrets.txt"), None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn fixture_job_matches_cli_analyzer() {
    let dir = tempfile::tempdir().unwrap();
    let router = pragmachat::http::router(mock_app(dir.path()));
    let read = |name: &str| std::fs::read_to_string(format!("{FIXTURES}/{name}")).unwrap();
    let (_, accepted) = call_json(
        &router,
        "POST",
        "/experiments",
        Some(json!({ "fixture": { "without_csv": read("table1_without.csv"), "with_csv": read("table2_with.csv") } })),
    )
    .await;
    let id = accepted["id"].as_str().unwrap().to_string();
    assert_eq!(wait_done(&router, &id).await["status"], "done");
    let (_, api_md) = call(&router, "GET", &format!("/experiments/{id}/comparison.md"), None).await;

    let cli = std::process::Command::new(env!("CARGO_BIN_EXE_pragmachat"))
        .args(["experiment", "analyze"])
        .arg(format!("{FIXTURES}/table1_without.csv"))
        .arg(format!("{FIXTURES}/table2_with.csv"))
        .output()
        .unwrap();
    assert!(cli.status.success());
    assert_eq!(api_md, cli.stdout);
    assert!(String::from_utf8(api_md).unwrap().lines().any(|l| l == "llama2:13b 5 4"));
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (sid, job_id, transcript, docs, csv) = {
        let router = pragmachat::http::router(mock_app(dir.path()));
        upload(&router, "001", "Children develop quickly. Sleep matters.").await;
        upload(&router, "002", "Poverty has declined slowly.").await;
        let sid = new_session(&router, "001").await;
        call_json(&router, "POST", &format!("/sessions/{sid}/chat"), Some(json!({ "message": "How fast?", "include_illocutionary_force": true }))).await;
        let (_, accepted) = call_json(&router, "POST", "/experiments", Some(experiment_body("001", "002"))).await;
        let job_id = accepted["id"].as_str().unwrap().to_string();
        wait_done(&router, &job_id).await;
        let (_, transcript) = call_json(&router, "GET", &format!("/sessions/{sid}"), None).await;
        let (_, docs) = call_json(&router, "GET", "/documents", None).await;
        let (_, csv) = call(&router, "GET", &format!("/experiments/{job_id}/results.csv"), None).await;
        (sid, job_id, transcript, docs, csv)
    };

    let router = pragmachat::http::router(mock_app(dir.path()));
    assert_eq!(call_json(&router, "GET", &format!("/sessions/{sid}"), None).await.1, transcript);
    assert_eq!(call_json(&router, "GET", "/documents", None).await.1, docs);
    assert_eq!(call(&router, "GET", &format!("/experiments/{job_id}/results.csv"), None).await.1, csv);
    assert_eq!(call_json(&router, "GET", &format!("/experiments/{job_id}"), None).await.1["status"], "done");

    // the restored conversation keeps accumulating context
    let (status, _) = call_json(&router, "POST", &format!("/sessions/{sid}/chat"), Some(json!({ "message": "And sleep?" }))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, after) = call_json(&router, "GET", &format!("/sessions/{sid}"), None).await;
    assert_eq!(after["turns"].as_array().unwrap().len(), 4);
    assert_eq!(after["turns"][2]["include_illocutionary_force"], true);
}

#[tokio::test]
async fn concurrent_chats_on_one_session_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let router = pragmachat::http::router(mock_app(dir.path()));
    let doc = upload(&router, "d", "Some text about growth.").await;
    let sid = new_session(&router, &doc).await;
    let mut handles = Vec::new();
    for i in 0..8 {
        let router = router.clone();
        let uri = format!("/sessions/{sid}/chat");
        handles.push(tokio::spawn(async move {
            call_json(&router, "POST", &uri, Some(json!({ "message": format!("question {i}?") }))).await.0
        }));
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let (_, t) = call_json(&router, "GET", &format!("/sessions/{sid}"), None).await;
    let roles: Vec<&str> = t["turns"].as_array().unwrap().iter().map(|x| x["role"].as_str().unwrap()).collect();
    assert_eq!(roles.len(), 16);
    assert!(roles.chunks(2).all(|p| p == ["user", "assistant"]));
}
