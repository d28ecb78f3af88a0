//! `csuv serve`: read-only local HTTP for the plot.
//!
//! * `GET /api/bundle` returns the bundle file byte for byte,
//! * `GET /api/health` returns `{"status":"ok","bundle_version":"csuv-bundle/1"}`,
//! * everything else comes from the assets directory, or a placeholder page
//!   at `/` when there is none. Unknown paths give 404.
//!
//! No CORS headers are sent, so browsers only allow same-origin reads.

use std::path::PathBuf;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use csuv::engine::{UncertaintyBundle, BUNDLE_VERSION};
use serde::Serialize;
use tower_http::services::ServeDir;

use crate::args::ServeArgs;
use crate::fit::classify;
use crate::input_error;

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>csuv</title></head>\n\
<body><p>No plot assets were given (<code>--assets</code>). The bundle is at \
<a href=\"/api/bundle\">/api/bundle</a>.</p></body></html>\n";

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Health {
    pub status: &'static str,
    pub bundle_version: &'static str,
}

/// Checks `bytes` as a bundle and builds the router serving it.
pub fn router(bytes: Vec<u8>, assets: Option<PathBuf>) -> Result<Router> {
    let text = std::str::from_utf8(&bytes).map_err(|e| input_error(format!("bundle is not UTF-8: {e}")))?;
    UncertaintyBundle::from_json(text).map_err(classify)?;
    let bytes = Bytes::from(bytes);
    let api = Router::new()
        .route(
            "/api/bundle",
            get(move || {
                let bytes = bytes.clone();
                async move { ([(header::CONTENT_TYPE, "application/json")], bytes) }
            }),
        )
        .route(
            "/api/health",
            get(|| async {
                Json(Health {
                    status: "ok",
                    bundle_version: BUNDLE_VERSION,
                })
            }),
        )
        .route("/api/{*rest}", get(not_found));
    Ok(match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })).fallback(not_found),
    })
}

async fn not_found() -> Response {
    (StatusCode::NOT_FOUND, "not found\n").into_response()
}

pub fn cmd_serve(args: &ServeArgs) -> Result<()> {
    let bytes = std::fs::read(&args.bundle)
        .map_err(|e| input_error(format!("cannot read {}: {e}", args.bundle.display())))?;
    if let Some(dir) = &args.assets {
        if !dir.is_dir() {
            return Err(input_error(format!("{} is not a directory", dir.display())));
        }
    }
    let app = router(bytes, args.assets.clone())?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| input_error(format!("cannot listen on {addr}: {e}")))?;
        println!("serving http://{}", listener.local_addr()?);
        axum::serve(listener, app).await.context("server stopped")
    })
}
