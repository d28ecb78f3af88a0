use axum::body::Body;
use axum::http::{Request, StatusCode};
use csuv::engine::{build_bundle, run_csuv, BundleOptions, CsuvConfig};
use csuv::simgen::{generate, ModelSpec};
use csuv_cli::exit_code;
use csuv_cli::serve::router;
use http_body_util::BodyExt;
use tower::ServiceExt;

fn bundle_bytes() -> Vec<u8> {
    let data = generate(&ModelSpec::model1(40, 1.0), 0, 2).unwrap();
    let config = CsuvConfig {
        repetitions: 8,
        seed: 1,
        ..CsuvConfig::default()
    };
    let run = run_csuv(&data.design, &config).unwrap();
    let bundle = build_bundle(&run.collection, &run.result, &config, 40, &BundleOptions::default()).unwrap();
    // compact, so the bytes differ from a re-serialization by `to_json`
    serde_json::to_vec(&bundle).unwrap()
}

async fn get(app: axum::Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = app
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

#[tokio::test]
async fn bundle_is_served_byte_for_byte() {
    let bytes = bundle_bytes();
    let (status, body) = get(router(bytes.clone(), None).unwrap(), "/api/bundle").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, bytes);
}

#[tokio::test]
async fn health_reports_version() {
    let (status, body) = get(router(bundle_bytes(), None).unwrap(), "/api/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, br#"{"status":"ok","bundle_version":"csuv-bundle/1"}"#);
}

#[tokio::test]
async fn unknown_paths_are_404() {
    let app = router(bundle_bytes(), None).unwrap();
    for uri in ["/api/nonexistent", "/api/bundle/extra", "/nope.js"] {
        assert_eq!(get(app.clone(), uri).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
}

#[tokio::test]
async fn placeholder_page_without_assets() {
    let (status, body) = get(router(bundle_bytes(), None).unwrap(), "/").await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("/api/bundle"));
}

#[tokio::test]
async fn assets_directory_is_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>plot</p>").unwrap();
    std::fs::write(dir.path().join("app.js"), "let x = 1;").unwrap();
    let app = router(bundle_bytes(), Some(dir.path().to_path_buf())).unwrap();
    assert_eq!(get(app.clone(), "/").await, (StatusCode::OK, b"<p>plot</p>".to_vec()));
    assert_eq!(get(app.clone(), "/app.js").await, (StatusCode::OK, b"let x = 1;".to_vec()));
    assert_eq!(get(app.clone(), "/missing.css").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(app.clone(), "/api/other").await.0, StatusCode::NOT_FOUND);
    let (status, body) = get(app, "/api/bundle").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, bundle_bytes());
}

#[test]
fn invalid_bundle_is_refused() {
    let mut value: serde_json::Value = serde_json::from_slice(&bundle_bytes()).unwrap();
    value["version"] = "csuv-bundle/0".into();
    let err = router(serde_json::to_vec(&value).unwrap(), None).unwrap_err();
    assert_eq!(exit_code(&err), 2);
    assert!(router(b"not json".to_vec(), None).is_err());
}
