use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use signforge::kinematics::forward;
use signforge::KinematicChain;
use signforge_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

fn demo_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo_lexicon")
}

/// Router over a scratch copy of the demo lexicon.
fn app() -> (axum::Router, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(demo_dir()).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    (router(AppState::new(ServiceConfig::pepper(dir.path()))), dir)
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value: Value = serde_json::from_slice(&bytes).unwrap();
    assert!(value["request_id"].is_string());
    assert_ne!(value.get("payload").is_some(), value.get("error").is_some(), "envelope: {value}");
    (status, value)
}

fn demo_text(gloss: &str) -> String {
    std::fs::read_to_string(demo_dir().join(format!("{gloss}.sign.json"))).unwrap()
}

#[tokio::test]
async fn model_describes_the_chain() {
    let (app, _dir) = app();
    let (status, v) = call(&app, Method::GET, "/model", None).await;
    assert_eq!(status, StatusCode::OK);
    let joints = v["payload"]["joints"].as_array().unwrap();
    let names: Vec<&str> = joints.iter().map(|j| j["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["RShoulderPitch", "RShoulderRoll", "RElbowYaw", "RElbowRoll", "RWristYaw"]);
    assert_eq!(v["payload"]["base"], "torso");
}

#[tokio::test]
async fn ik_round_trip_converges() {
    let (app, _dir) = app();
    let chain = KinematicChain::pepper_right_arm();
    let q = [0.3, -0.4, 1.0, 0.8, 0.2];
    let target = forward(&chain, &q).unwrap();
    let body = json!({"target": target, "weights": [0.1, 0.1, 0.1, 1, 1, 1], "seed": 4});
    let (status, v) = call(&app, Method::POST, "/ik", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["payload"]["status"], "Converged");
    assert!(v["payload"]["position_error"].as_f64().unwrap() <= 1e-3);
}

#[tokio::test]
async fn ik_rejects_bad_goal() {
    let (app, _dir) = app();
    let body = json!({"target": {"position": [0, 0], "orientation": [1, 0, 0, 0]}});
    let (status, v) = call(&app, Method::POST, "/ik", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "schema_violation");
}

#[tokio::test]
async fn compile_then_export_matches_cli_path() {
    let (app, _dir) = app();
    let (status, v) = call(&app, Method::POST, "/compile", Some(demo_text("AMARE"))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["payload"]["report"]["status"], "Automated");
    let animation = v["payload"]["animation"].clone();
    let (status, exported) = call(&app, Method::POST, "/export", Some(animation.to_string())).await;
    assert_eq!(status, StatusCode::OK);

    let sign = signforge::parse_sign(&demo_text("AMARE")).unwrap();
    let (anim, _) = signforge::compile_sign(
        &sign,
        &KinematicChain::pepper_right_arm(),
        &signforge::MirrorMap::pepper_default(),
        &Default::default(),
    )
    .unwrap();
    assert_eq!(exported["payload"]["qanim"].as_str().unwrap(), signforge::emit_qanim(&anim).unwrap());
}

#[tokio::test]
async fn unreachable_compile_is_422_with_report() {
    let (app, _dir) = app();
    let mut doc: Value = serde_json::from_str(&demo_text("IO")).unwrap();
    doc["waypoints"][1]["position"] = json!([1.5, -0.8, 0.5]);
    let (status, v) = call(&app, Method::POST, "/compile", Some(doc.to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "compile_failed");
    assert_eq!(v["error"]["details"]["status"], "Failed");
}

#[tokio::test]
async fn compile_schema_violation_is_400() {
    let (app, _dir) = app();
    let (status, v) = call(&app, Method::POST, "/compile", Some(r#"{"gloss": "lower", "waypoints": []}"#.into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
}

#[tokio::test]
async fn sample_reports_values_and_tip() {
    let (app, _dir) = app();
    let (_, compiled) = call(&app, Method::POST, "/compile", Some(demo_text("IO"))).await;
    let animation = compiled["payload"]["animation"].clone();
    let last = animation["curves"][0]["keys"].as_array().unwrap().last().unwrap()["frame"].as_u64().unwrap();
    let body = json!({"animation": animation, "fps": 25});
    let (status, v) = call(&app, Method::POST, "/sample", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    let frames = v["payload"]["frames"].as_array().unwrap();
    assert_eq!(frames.len() as u64, last + 1);
    assert!(frames[0]["tip"]["position"].is_array());
    assert!(frames[0]["values"]["RHand"].is_number());
}

#[tokio::test]
async fn lexicon_persistence() {
    let (app, dir) = app();
    let (status, v) = call(&app, Method::GET, "/lexicon", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["payload"]["glosses"].as_array().unwrap().len(), 10);

    let (status, _) = call(&app, Method::GET, "/lexicon/NOPE", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::DELETE, "/lexicon/NOPE", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let text = demo_text("AMARE");
    let (status, v) = call(&app, Method::PUT, "/lexicon/AMARE", Some(text.clone())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["payload"]["created"], false);
    let (_, v) = call(&app, Method::GET, "/lexicon/AMARE", None).await;
    assert_eq!(v["payload"], serde_json::from_str::<Value>(&text).unwrap());
    assert_eq!(std::fs::read_to_string(dir.path().join("AMARE.sign.json")).unwrap(), text);

    let copy = text.replace("\"AMARE\"", "\"AMARE2\"");
    let (status, v) = call(&app, Method::PUT, "/lexicon/AMARE2", Some(copy)).await;
    assert_eq!((status, &v["payload"]["created"]), (StatusCode::OK, &json!(true)));
    let (status, _) = call(&app, Method::DELETE, "/lexicon/AMARE2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!dir.path().join("AMARE2.sign.json").exists());
}

#[tokio::test]
async fn put_rejects_bad_documents() {
    let (app, _dir) = app();
    let (status, _) = call(&app, Method::PUT, "/lexicon/AMARE", Some(demo_text("IO"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::PUT, "/lexicon/AMARE", Some("{".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::GET, "/lexicon/..%2Fsecret", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sentence_composes_demo_glosses() {
    let (app, _dir) = app();
    let body = json!({"glosses": ["MELA", "MANGIARE", "FATTO"]});
    let (status, v) = call(&app, Method::POST, "/sentence", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert!(v["payload"]["animation"]["curves"].as_array().unwrap().len() >= 6);
    let (status, _) = call(&app, Method::POST, "/sentence", Some(json!({"glosses": ["NOPE"]}).to_string())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_match_serial() {
    let (app, _dir) = app();
    let glosses = ["IO", "MELA", "CASA", "AMARE", "ANDARE", "IDEA"];
    let mut serial = Vec::new();
    for g in glosses {
        let (_, v) = call(&app, Method::POST, "/compile", Some(demo_text(g))).await;
        serial.push(v["payload"].clone());
    }
    let handles: Vec<_> = glosses
        .iter()
        .map(|g| {
            let app = app.clone();
            let text = demo_text(g);
            tokio::spawn(async move { call(&app, Method::POST, "/compile", Some(text)).await.1["payload"].clone() })
        })
        .collect();
    for (h, expected) in handles.into_iter().zip(serial) {
        assert_eq!(h.await.unwrap(), expected);
    }
}

#[tokio::test]
async fn serves_ui_bundle_when_present() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>ui</html>").unwrap();
    let mut config = ServiceConfig::pepper(demo_dir());
    config.ui_dir = Some(ui.path().to_path_buf());
    let app = router(AppState::new(config));
    let resp = app.oneshot(Request::builder().uri("/").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<html>ui</html>");
}
