use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use seedgrow_core::io::{encode_mask_pgm, encode_pgm};
use seedgrow_core::*;
use seedgrow_server::{app, rle_decode, GrowResponse, PALETTE};

async fn send(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (
        status,
        res.into_body().collect().await.unwrap().to_bytes().to_vec(),
    )
}

fn phantom() -> (ScalarGrid, LabelMap) {
    generate_phantom(&PhantomSpec::new(
        PhantomKind::BridgedDisks,
        GridDims::new_2d(64, 64).unwrap(),
    ))
    .unwrap()
}

async fn upload(app: &Router, grid: &ScalarGrid) -> String {
    let (status, body) = send(app, "POST", "/sessions", encode_pgm(grid).unwrap()).await;
    assert_eq!(status, StatusCode::CREATED);
    let v: Value = serde_json::from_slice(&body).unwrap();
    v["id"].as_str().unwrap().to_string()
}

async fn grow(app: &Router, id: &str, req: Value) -> (StatusCode, Value) {
    let (status, body) = send(
        app,
        "POST",
        &format!("/sessions/{id}/runs"),
        req.to_string().into_bytes(),
    )
    .await;
    (status, serde_json::from_slice(&body).unwrap())
}

#[tokio::test]
async fn upload_reports_dims_and_ids_differ() {
    let app = app();
    let (g, _) = phantom();
    let (status, body) = send(&app, "POST", "/sessions", encode_pgm(&g).unwrap()).await;
    assert_eq!(status, StatusCode::CREATED);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(
        (v["width"].as_u64(), v["height"].as_u64()),
        (Some(64), Some(64))
    );
    assert_eq!(
        (v["min"].as_f64(), v["max"].as_f64()),
        (Some(20.0), Some(200.0))
    );
    let other = upload(&app, &g).await;
    assert_ne!(v["id"].as_str().unwrap(), other);
}

#[tokio::test]
async fn truncated_upload_is_rejected() {
    let app = app();
    let (g, _) = phantom();
    let mut bytes = encode_pgm(&g).unwrap();
    bytes.truncate(bytes.len() - 10);
    let (status, body) = send(&app, "POST", "/sessions", bytes).await;
    assert!(status.is_client_error());
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["field"], "body");
    assert!(v["error"].as_str().unwrap().contains("truncated"), "{v}");
}

#[tokio::test]
async fn gradient_run_contains_disk_a() {
    let app = app();
    let (g, truth) = phantom();
    let id = upload(&app, &g).await;
    let req = json!({"seeds": [{"x": 32, "y": 20}], "engine": "stack", "criterion": "gn:k=0.25"});
    let (status, v) = grow(&app, &id, req.clone()).await;
    assert_eq!(status, StatusCode::OK);
    let res: GrowResponse = serde_json::from_value(v.clone()).unwrap();
    let labels = rle_decode(&res.mask);
    let disk_a: Vec<u32> = truth.labels().iter().map(|&l| u32::from(l == 1)).collect();
    assert_eq!(labels, disk_a);
    assert_eq!(
        res.report.sites_accepted,
        truth.stats(1).unwrap().size() as u64
    );

    // same answer as the library, and as the first run
    let seeds = SeedSet::new(vec![Site::xy(32, 20)]).unwrap();
    let cfg: CriterionConfig = "gn:k=0.25".parse().unwrap();
    let (lib, report) =
        grow_stack(&g, &compute_gradient(&g), &seeds, Neighborhood::N4, &cfg).unwrap();
    assert_eq!(labels, lib.labels());
    assert_eq!(res.report, report);
    let (_, again) = grow(&app, &id, req).await;
    assert_eq!(again["mask"], v["mask"]);
    assert_eq!(again["run_id"], 1);

    let (_, mask) = send(&app, "GET", &format!("/sessions/{id}/runs/0/mask"), vec![]).await;
    assert_eq!(mask, encode_mask_pgm(&lib).unwrap());
}

#[tokio::test]
async fn intensity_run_leaks_and_history_records_both() {
    let app = app();
    let (g, truth) = phantom();
    let id = upload(&app, &g).await;
    grow(
        &app,
        &id,
        json!({"seeds": [{"x": 32, "y": 20}], "engine": "stack", "criterion": "gn:k=0.25"}),
    )
    .await;
    let (status, v) = grow(
        &app,
        &id,
        json!({"seeds": [{"x": 32, "y": 20}], "engine": "stack", "criterion": "int:t=90"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let res: GrowResponse = serde_json::from_value(v).unwrap();
    let labels = rle_decode(&res.mask);
    for (i, &t) in truth.labels().iter().enumerate() {
        if t != 0 {
            assert_eq!(labels[i], 1);
        }
    }
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/history"), vec![]).await;
    let h: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(h.as_array().unwrap().len(), 2);
    assert_eq!(h[0]["criterion"], "gn:k=0.25");
    assert_eq!(h[1]["criterion"], "int:t=90");
    assert_eq!(h[1]["seeds"][0]["x"], 32);
}

#[tokio::test]
async fn field_level_errors() {
    let app = app();
    let (g, _) = phantom();
    let id = upload(&app, &g).await;
    let cases = [
        (
            json!({"seeds": [{"x": -1, "y": 0}], "engine": "stack", "criterion": "gn"}),
            "seeds[0]",
        ),
        (
            json!({"seeds": [{"x": 0, "y": 0}, {"x": 64, "y": 0}], "engine": "stack", "criterion": "gn"}),
            "seeds[1]",
        ),
        (
            json!({"seeds": [], "engine": "stack", "criterion": "gn"}),
            "seeds",
        ),
        (
            json!({"seeds": [{"x": 1, "y": 1}], "engine": "stack", "criterion": "gn:k="}),
            "criterion",
        ),
        (
            json!({"seeds": [{"x": 1, "y": 1}], "engine": "stack"}),
            "criterion",
        ),
        (
            json!({"seeds": [{"x": 1, "y": 1}], "engine": "classic", "criterion": "gn"}),
            "criterion",
        ),
        (
            json!({"seeds": [{"x": 1, "y": 1}], "engine": "fast"}),
            "engine",
        ),
        (
            json!({"seeds": [{"x": 1, "y": 1}], "engine": "classic", "neighborhood": "n6"}),
            "neighborhood",
        ),
    ];
    for (req, field) in cases {
        let (status, v) = grow(&app, &id, req.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{req}");
        assert_eq!(v["field"], field, "{req} -> {v}");
    }
    let (status, _) = send(&app, "POST", &format!("/sessions/{id}/runs"), b"{".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, body) = send(&app, "GET", &format!("/sessions/{id}/history"), vec![]).await;
    assert_eq!(body, b"[]");
}

#[tokio::test]
async fn unknown_session_and_run() {
    let app = app();
    let (status, _) = send(
        &app,
        "GET",
        "/sessions/00000000-0000-0000-0000-000000000000/history",
        vec![],
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, "GET", "/sessions/nope/gradient", vec![]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (g, _) = phantom();
    let id = upload(&app, &g).await;
    let (status, _) = send(
        &app,
        "GET",
        &format!("/sessions/{id}/runs/0/overlay"),
        vec![],
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, "DELETE", &format!("/sessions/{id}"), vec![]).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = send(&app, "GET", &format!("/sessions/{id}"), vec![]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let (g, _) = phantom();
    let a = upload(&app, &g).await;
    let b = upload(&app, &g).await;
    grow(
        &app,
        &a,
        json!({"seeds": [{"x": 5, "y": 5}], "engine": "classic"}),
    )
    .await;
    let (_, body) = send(&app, "GET", &format!("/sessions/{b}/history"), vec![]).await;
    assert_eq!(body, b"[]");
    let (status, _) = send(
        &app,
        "GET",
        &format!("/sessions/{b}/runs/0/overlay"),
        vec![],
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

fn pixels(ppm: &[u8]) -> &[u8] {
    // header is three newline-terminated lines
    let mut nl = 0;
    let start = ppm
        .iter()
        .position(|&b| {
            nl += usize::from(b == b'\n');
            nl == 3
        })
        .unwrap()
        + 1;
    &ppm[start..]
}

#[tokio::test]
async fn overlays() {
    let app = app();
    let (g, _) = phantom();
    let id = upload(&app, &g).await;
    // a seed inside the gradient ridge cannot grow: only the seed is colored
    grow(
        &app,
        &id,
        json!({"seeds": [{"x": 32, "y": 29}], "engine": "stack", "criterion": "gn:k=0.01"}),
    )
    .await;
    let (status, ppm) = send(
        &app,
        "GET",
        &format!("/sessions/{id}/runs/0/overlay"),
        vec![],
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(ppm.starts_with(b"P6\n64 64\n255\n"));
    let (_, again) = send(
        &app,
        "GET",
        &format!("/sessions/{id}/runs/0/overlay"),
        vec![],
    )
    .await;
    assert_eq!(ppm, again);
    let px = pixels(&ppm);
    let colored: Vec<usize> = (0..64 * 64)
        .filter(|&i| px[3 * i..3 * i + 3] == PALETTE[0])
        .collect();
    assert_eq!(colored, vec![32 + 29 * 64]);

    let seeds = json!([{"x": 32, "y": 20}, {"x": 32, "y": 44}, {"x": 2, "y": 2}]);
    grow(
        &app,
        &id,
        json!({"seeds": seeds, "engine": "stack", "criterion": "gn:k=0.25"}),
    )
    .await;
    let (_, ppm) = send(
        &app,
        "GET",
        &format!("/sessions/{id}/runs/1/overlay"),
        vec![],
    )
    .await;
    let px = pixels(&ppm);
    for (r, (x, y)) in [(32, 20), (32, 44), (2, 2)].into_iter().enumerate() {
        let i = 3 * (x + 64 * y);
        assert_eq!(px[i..i + 3], PALETTE[r]);
    }
}

#[tokio::test]
async fn gradient_preview_matches_library() {
    let app = app();
    let (g, _) = phantom();
    let id = upload(&app, &g).await;
    let (status, body) = send(&app, "GET", &format!("/sessions/{id}/gradient"), vec![]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        encode_pgm(&compute_gradient(&g).normalized(255)).unwrap()
    );
}
