mod common;

use axum::http::StatusCode;
use common::{raw_draft, settings, TestApp, TOKEN};
use eod_core::{LocationSpec, ReviewFlag};

async fn submitted_id(app: &TestApp, name: &str) -> String {
    let reply = app
        .submit(&raw_draft(
            name,
            &format!("https://data.example.org/{}", name.len()),
        ))
        .await;
    assert_eq!(reply.status, StatusCode::ACCEPTED, "{}", reply.text());
    let body = reply.json();
    assert_eq!(body["status"], "pending");
    body["id"].as_str().unwrap().to_string()
}

fn slug_of(app: &TestApp, id: &str) -> String {
    app.store.get(&id.into()).unwrap().slug
}

#[tokio::test]
async fn healthz() {
    let app = TestApp::new();
    let reply = app.get("/healthz").await;
    assert_eq!(reply.status, StatusCode::OK);
    assert_eq!(reply.text(), "ok");
}

#[tokio::test]
async fn submission_is_hidden_until_approved() {
    let app = TestApp::new();
    let id = submitted_id(&app, "Gated Dataset").await;
    let slug = slug_of(&app, &id);

    assert_eq!(app.get("/api/datasets").await.json()["total"], 0);
    assert_eq!(
        app.get(&format!("/api/datasets/{slug}")).await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        app.get(&format!("/api/teasers/{id}")).await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        app.get("/api/markers").await.json()["markers"],
        serde_json::json!([])
    );

    let path = format!("/api/admin/datasets/{id}/approve");
    assert_eq!(
        app.admin("POST", &path, None, "").await.status,
        StatusCode::UNAUTHORIZED
    );
    assert_eq!(
        app.admin("POST", &path, Some("moderator-secreT"), "")
            .await
            .status,
        StatusCode::UNAUTHORIZED
    );
    let approved = app.approve(&id).await;
    assert_eq!(approved.status, StatusCode::OK);
    assert_eq!(approved.json()["status"], "approved");
    assert_eq!(app.approve(&id).await.status, StatusCode::CONFLICT);

    let list = app.get("/api/datasets").await.json();
    assert_eq!(list["total"], 1);
    assert_eq!(list["page"], 1);
    assert_eq!(list["items"][0]["id"], id.as_str());
    assert_eq!(list["items"][0]["teaser_url"], format!("/api/teasers/{id}"));
    assert_eq!(list["items"][0]["size"], "1.5 GB");

    let teaser = app.get(&format!("/api/teasers/{id}")).await;
    assert_eq!(teaser.status, StatusCode::OK);
    assert_eq!(teaser.headers["content-type"], "image/png");
    assert_eq!(teaser.body, common::PNG);
    assert_eq!(
        app.get("/api/markers").await.json()["markers"][0]["record_id"],
        id.as_str()
    );
}

#[tokio::test]
async fn rejected_records_stay_hidden() {
    let app = TestApp::new();
    let id = submitted_id(&app, "Rejected Dataset").await;
    let reply = app
        .admin(
            "POST",
            &format!("/api/admin/datasets/{id}/reject"),
            Some(TOKEN),
            r#"{"reason": "link is dead"}"#,
        )
        .await;
    assert_eq!(reply.json()["status"], "rejected");
    assert_eq!(
        app.get(&format!("/api/datasets/{}", slug_of(&app, &id)))
            .await
            .status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        app.store.read(|c| c.events()[0].reason.clone()).as_deref(),
        Some("link is dead")
    );

    let bad_body = app
        .admin(
            "POST",
            "/api/admin/datasets/x/reject",
            Some(TOKEN),
            "{not json",
        )
        .await;
    assert_eq!(bad_body.status, StatusCode::BAD_REQUEST);
    let unknown = app
        .admin("POST", "/api/admin/datasets/x/reject", Some(TOKEN), "")
        .await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn detail_counts_each_request() {
    let app = TestApp::new();
    let id = submitted_id(&app, "Counted Dataset").await;
    app.approve(&id).await;
    let slug = slug_of(&app, &id);

    let first = app.get(&format!("/api/datasets/{slug}")).await.json();
    let second = app.get(&format!("/api/datasets/{slug}")).await.json();
    assert_eq!(
        second["view_count"].as_u64().unwrap(),
        first["view_count"].as_u64().unwrap() + 1
    );
    assert_eq!(app.store.get(&id.as_str().into()).unwrap().view_count, 2);
    assert_eq!(
        app.get("/api/datasets/popular").await.json()["items"][0]["view_count"],
        2
    );
}

#[tokio::test]
async fn compare_endpoint() {
    let app = TestApp::new();
    let a = submitted_id(&app, "Compare A").await;
    let b = submitted_id(&app, "Compare BB").await;
    let pending = submitted_id(&app, "Compare CCC").await;
    app.approve(&a).await;
    app.approve(&b).await;

    let one = app.get(&format!("/api/compare?ids={a}")).await;
    assert_eq!(one.status, StatusCode::BAD_REQUEST);
    assert_eq!(one.json()["error"], "TooFewIds");

    let table = app.get(&format!("/api/compare?ids={b},{a}")).await;
    assert_eq!(table.status, StatusCode::OK);
    let table = table.json();
    assert_eq!(table["columns"], serde_json::json!([b, a]));
    assert_eq!(table["rows"][0]["label"], "location");
    assert_eq!(table["rows"][1]["values"][0], "Optical, SAR");

    let repeated = app.get(&format!("/api/compare?ids={a}&ids={b}")).await;
    assert_eq!(repeated.status, StatusCode::OK);
    let dup = app.get(&format!("/api/compare?ids={a},{a}")).await;
    assert_eq!(dup.status, StatusCode::BAD_REQUEST);

    let hidden = app.get(&format!("/api/compare?ids={a},{pending}")).await;
    let missing = app.get(&format!("/api/compare?ids={a},nope")).await;
    assert_eq!(hidden.status, StatusCode::NOT_FOUND);
    assert_eq!(
        hidden.body, missing.body,
        "pending and missing look the same"
    );
}

#[tokio::test]
async fn validation_errors_list_every_field() {
    let app = TestApp::new();
    let mut raw = raw_draft("Broken", "not a url");
    raw.remove("submitter_email").remove("tasks");
    raw.remove("published_on")
        .text("published_on", "31/31/2020");
    let reply = app.submit(&raw).await;
    assert_eq!(reply.status, StatusCode::BAD_REQUEST);
    let body = reply.json();
    assert_eq!(body["error"], "ValidationFailed");
    let mut fields: Vec<&str> = body["fields"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["field"].as_str().unwrap())
        .collect();
    fields.sort();
    assert_eq!(
        fields,
        ["download_url", "published_on", "submitter_email", "tasks"]
    );
    assert!(app.store.read(|c| c.is_empty()));

    let not_multipart = app
        .send(
            axum::http::Request::post("/api/datasets")
                .header("content-type", "application/json")
                .body(axum::body::Body::from("{}"))
                .unwrap(),
        )
        .await;
    assert_eq!(not_multipart.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversize_uploads() {
    let app = TestApp::with(eod::api::Settings {
        max_upload_bytes: 64 * 1024,
        ..settings()
    });
    let mut raw = raw_draft("Huge", "https://data.example.org/huge");
    raw.remove("teaser");
    let mut big = common::PNG.to_vec();
    big.resize(200 * 1024, 0);
    raw.file("teaser", "image/png", big);
    let reply = app.submit(&raw).await;
    assert_eq!(
        reply.status,
        StatusCode::PAYLOAD_TOO_LARGE,
        "{}",
        reply.text()
    );
    assert_eq!(reply.json()["error"], "PayloadTooLarge");

    // Within the body limit but over the teaser limit: a field error instead.
    let roomy = TestApp::new();
    let mut raw = raw_draft("Big Teaser", "https://data.example.org/big");
    raw.remove("teaser");
    let mut big = common::PNG.to_vec();
    big.resize(eod_core::validate::MAX_TEASER_BYTES + 1, 0);
    raw.file("teaser", "image/png", big);
    let reply = roomy.submit(&raw).await;
    assert_eq!(reply.status, StatusCode::BAD_REQUEST);
    assert_eq!(reply.json()["fields"][0]["code"], "OversizeTeaser");
}

#[tokio::test]
async fn submissions_are_rate_limited_per_source() {
    let app = TestApp::with(eod::api::Settings {
        submissions_per_hour: 3,
        ..settings()
    });
    let a = "192.0.2.10".parse().unwrap();
    let b = "192.0.2.11".parse().unwrap();
    let raw = raw_draft("Limited", "https://data.example.org/limited");
    for _ in 0..3 {
        assert_eq!(
            app.submit_from(&raw, Some(a)).await.status,
            StatusCode::ACCEPTED
        );
    }
    let limited = app.submit_from(&raw, Some(a)).await;
    assert_eq!(limited.status, StatusCode::TOO_MANY_REQUESTS);
    assert!(limited.headers.contains_key("retry-after"));
    assert_eq!(
        app.submit_from(&raw, Some(b)).await.status,
        StatusCode::ACCEPTED
    );

    app.clock.advance(chrono::Duration::minutes(61));
    assert_eq!(
        app.submit_from(&raw, Some(a)).await.status,
        StatusCode::ACCEPTED
    );
}

#[tokio::test]
async fn addresses_are_geocoded_on_submission() {
    let app = TestApp::new();
    let mut raw = raw_draft("Geocoded", "https://data.example.org/geo");
    raw.remove("lat")
        .remove("lon")
        .remove("address")
        .text("address", "Paris, France");
    let id = app.submit(&raw).await.json()["id"]
        .as_str()
        .unwrap()
        .to_string();
    let record = app.store.get(&id.as_str().into()).unwrap();
    assert_eq!(record.location.point().unwrap().lat(), 48.8566);

    let mut raw = raw_draft("Unmapped", "https://data.example.org/unmapped");
    raw.remove("lat")
        .remove("lon")
        .remove("address")
        .text("address", "Somewhere Unlisted");
    let reply = app.submit(&raw).await;
    assert_eq!(reply.status, StatusCode::ACCEPTED);
    let id = reply.json()["id"].as_str().unwrap().to_string();
    let record = app.store.get(&id.as_str().into()).unwrap();
    assert!(matches!(record.location, LocationSpec::Unresolved { .. }));
    assert!(record
        .private
        .review_flags
        .contains(&ReviewFlag::NeedsGeocoding));

    // Approved but unresolved: listed, never a marker.
    app.approve(&id).await;
    assert_eq!(app.get("/api/datasets").await.json()["total"], 1);
    assert_eq!(
        app.get("/api/markers").await.json()["markers"],
        serde_json::json!([])
    );
}

#[tokio::test]
async fn query_errors_and_markers() {
    let app = TestApp::new();
    let id = submitted_id(&app, "Berlin Thing").await;
    app.approve(&id).await;

    let bad = app.get("/api/datasets?near=91,0,10").await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad.json()["error"], "BadParam");
    assert_eq!(bad.json()["params"][0]["param"], "near");

    let conflict = app
        .get("/api/datasets?location=berlin&multi_location=true")
        .await;
    assert_eq!(conflict.status, StatusCode::BAD_REQUEST);

    let hit = app
        .get("/api/datasets?sensors=SAR,optical&sensors_mode=and&tasks=semantic_segmentation&location=berlin")
        .await;
    assert_eq!(hit.json()["total"], 1);
    assert_eq!(
        app.get("/api/datasets?near=52.5,13.4,5").await.json()["total"],
        1
    );
    assert_eq!(
        app.get("/api/datasets?near=48.85,2.35,5").await.json()["total"],
        0
    );

    let inside = app.get("/api/markers?bbox=50,10,55,15").await.json();
    assert_eq!(inside["markers"].as_array().unwrap().len(), 1);
    let outside = app.get("/api/markers?bbox=-10,170,10,-170").await.json();
    assert_eq!(outside["markers"].as_array().unwrap().len(), 0);
    assert_eq!(
        app.get("/api/markers?bbox=1,2,3").await.status,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        app.get("/api/markers?bbox=10,0,-10,5").await.status,
        StatusCode::BAD_REQUEST
    );

    let near = app.get("/api/markers/at?lat=52.6&lon=13.3").await.json();
    assert_eq!(near["items"][0]["id"], id.as_str());
    assert_eq!(near["radius_km"], 25.0);
    let far = app.get("/api/markers/at?lat=53.5&lon=13.4").await.json();
    assert_eq!(far["items"], serde_json::json!([]));
    let missing = app.get("/api/markers/at?lat=x").await;
    assert_eq!(missing.status, StatusCode::BAD_REQUEST);
    assert_eq!(missing.json()["params"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn rankings_clamp_n() {
    let app = TestApp::new();
    for i in 0..7 {
        let id = submitted_id(&app, &format!("Ranked {i}")).await;
        app.approve(&id).await;
    }
    let items = |v: serde_json::Value| v["items"].as_array().unwrap().len();
    assert_eq!(items(app.get("/api/datasets/recent").await.json()), 5);
    assert_eq!(items(app.get("/api/datasets/recent?n=0").await.json()), 1);
    assert_eq!(items(app.get("/api/datasets/recent?n=500").await.json()), 7);
    assert_eq!(items(app.get("/api/datasets/popular?n=-3").await.json()), 1);
    assert_eq!(
        app.get("/api/datasets/recent?n=abc").await.status,
        StatusCode::BAD_REQUEST
    );
    let newest = app.get("/api/datasets/recent?n=1").await.json();
    assert_eq!(newest["items"][0]["name"], "Ranked 6");
}

#[tokio::test]
async fn admin_queue() {
    let app = TestApp::new();
    let a = submitted_id(&app, "Queue A").await;
    submitted_id(&app, "Queue B").await;
    app.approve(&a).await;

    assert_eq!(
        app.admin("GET", "/api/admin/datasets", None, "")
            .await
            .status,
        StatusCode::UNAUTHORIZED
    );
    let pending = app
        .admin("GET", "/api/admin/datasets", Some(TOKEN), "")
        .await
        .json();
    assert_eq!(pending["items"].as_array().unwrap().len(), 1);
    assert_eq!(pending["items"][0]["name"], "Queue B");
    assert_eq!(
        pending["items"][0]["private"]["submitter_email"],
        "grace@example.org"
    );
    let all = app
        .admin("GET", "/api/admin/datasets?status=all", Some(TOKEN), "")
        .await
        .json();
    assert_eq!(all["items"].as_array().unwrap().len(), 2);
    let bad = app
        .admin("GET", "/api/admin/datasets?status=weird", Some(TOKEN), "")
        .await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn cors_for_configured_origins() {
    let app = TestApp::with(eod::api::Settings {
        cors_origins: vec!["https://catalogue.example.org".into()],
        ..settings()
    });
    let reply = app
        .send(
            axum::http::Request::get("/api/datasets")
                .header("origin", "https://catalogue.example.org")
                .body(axum::body::Body::empty())
                .unwrap(),
        )
        .await;
    assert_eq!(
        reply.headers["access-control-allow-origin"],
        "https://catalogue.example.org"
    );
    let other = app
        .send(
            axum::http::Request::get("/api/datasets")
                .header("origin", "https://evil.example.net")
                .body(axum::body::Body::empty())
                .unwrap(),
        )
        .await;
    assert!(!other.headers.contains_key("access-control-allow-origin"));
}

#[tokio::test]
async fn error_mapping_table() {
    use axum::response::IntoResponse;
    for (error, status) in common::error_status_table() {
        let name = error.to_string();
        assert_eq!(error.status().as_u16(), status, "{name}");
        let response = error.into_response();
        assert_eq!(response.status().as_u16(), status, "{name}");
    }
}
