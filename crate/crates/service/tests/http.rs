use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use diagraph_core::detectsim::NoiseConfig;
use diagraph_core::formats::{write_detections, CoordinateSpace};
use diagraph_core::model::{AnnotationSet, DiagramKind, ObjectClass};
use diagraph_core::synthesizer::{synthesize_dataset, SynthesisConfig};
use diagraph_service::api::{AutoAnnotate, AutoSource, DiagramView, ExportRequest, PutAnnotations};
use diagraph_service::store::{DiagramSummary, Page};
use diagraph_service::{router, AnnotationRevision, AppState, Store};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

struct Fixture {
    app: Router,
    dataset: tempfile::TempDir,
    _store: tempfile::TempDir,
    ids: Vec<String>,
}

fn fixture(kind: DiagramKind, count: usize) -> Fixture {
    let dataset = tempfile::tempdir().unwrap();
    let m = synthesize_dataset(kind, &SynthesisConfig::default(), count, 0, dataset.path()).unwrap();
    let store_dir = tempfile::tempdir().unwrap();
    let store = Store::open(store_dir.path()).unwrap();
    assert_eq!(store.import_dataset(dataset.path()).unwrap(), count);
    assert_eq!(store.import_dataset(dataset.path()).unwrap(), 0);
    Fixture {
        app: router(AppState::new(store)),
        dataset,
        _store: store_dir,
        ids: m.entries.into_iter().map(|e| e.diagram_id).collect(),
    }
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, Option<String>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, ctype)
}

async fn json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b, _) = send(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn put_body(set: &AnnotationSet, expected: u64) -> Value {
    serde_json::to_value(PutAnnotations {
        set: set.clone(),
        expected_version: expected,
        author: Some("alice".into()),
        acknowledge_violations: false,
    })
    .unwrap()
}

fn simulate(noise: NoiseConfig, seed: u64) -> Value {
    serde_json::to_value(AutoAnnotate {
        source: AutoSource::Simulate { noise, seed },
        expected_version: None,
    })
    .unwrap()
}

fn untar(bytes: &[u8]) -> BTreeMap<String, Vec<u8>> {
    let mut ar = tar::Archive::new(bytes);
    let mut out = BTreeMap::new();
    for e in ar.entries().unwrap() {
        let mut e = e.unwrap();
        let mut buf = Vec::new();
        e.read_to_end(&mut buf).unwrap();
        out.insert(e.path().unwrap().to_string_lossy().into_owned(), buf);
    }
    out
}

fn reference(dataset: &Path, id: &str) -> AnnotationSet {
    diagraph_core::formats::load_dota(&dataset.join("dota").join(format!("{id}.txt"))).unwrap()
}

#[tokio::test]
async fn browse_diagrams() {
    let f = fixture(DiagramKind::Ownership, 5);
    let (s, v) = json(&f.app, Method::GET, "/diagrams?offset=1&limit=2", None).await;
    assert_eq!(s, StatusCode::OK);
    let page: Page<DiagramSummary> = serde_json::from_value(v).unwrap();
    assert_eq!((page.total, page.items.len()), (5, 2));
    assert_eq!(page.items[0].diagram_id, f.ids[1]);
    assert_eq!((page.items[0].latest_version, page.items[0].correction_count), (0, 0));

    let id = &f.ids[0];
    let (s, v) = json(&f.app, Method::GET, &format!("/diagrams/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let view: DiagramView = serde_json::from_value(v).unwrap();
    assert!(view.revision.is_none());
    assert_eq!(view.diagram.kind, DiagramKind::Ownership);
    let svg = fs::read_to_string(f.dataset.path().join("svg").join(format!("{id}.svg"))).unwrap();
    assert_eq!(view.svg, svg);

    let (s, body, ctype) = send(&f.app, Method::GET, &format!("/diagrams/{id}/svg"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("image/svg+xml"));
    assert_eq!(body, svg.as_bytes());

    let (s, _) = json(&f.app, Method::GET, &format!("/diagrams/{id}/annotations"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let f = fixture(DiagramKind::Organization, 1);
    let set = reference(f.dataset.path(), &f.ids[0]);
    for (m, uri, body) in [
        (Method::GET, "/diagrams/nope", None),
        (Method::GET, "/diagrams/nope/svg", None),
        (Method::GET, "/diagrams/nope/annotations", None),
        (Method::PUT, "/diagrams/nope/annotations", Some(put_body(&set, 0))),
        (
            Method::POST,
            "/diagrams/nope/auto-annotate",
            Some(simulate(NoiseConfig::default(), 0)),
        ),
        (
            Method::POST,
            "/export",
            Some(serde_json::json!({"ids": ["nope"], "format": "dota"})),
        ),
    ] {
        let (s, v) = json(&f.app, m, uri, body).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(v["error"], "not-found");
    }
    let (s, _) = json(&f.app, Method::GET, "/diagrams/..%2Fetc", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn optimistic_versioning() {
    let f = fixture(DiagramKind::Organization, 2);
    let id = &f.ids[0];
    let uri = format!("/diagrams/{id}/annotations");
    let mut set = reference(f.dataset.path(), id);

    let (s, v) = json(&f.app, Method::PUT, &uri, Some(put_body(&set, 0))).await;
    assert_eq!(s, StatusCode::OK);
    let r1: AnnotationRevision = serde_json::from_value(v).unwrap();
    assert_eq!((r1.version, r1.parent_version, r1.author.as_str()), (1, None, "alice"));

    set.objects.retain(|o| o.class != ObjectClass::Bus);
    let (s, v) = json(&f.app, Method::PUT, &uri, Some(put_body(&set, 1))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["version"], 2);

    let (s, v) = json(&f.app, Method::PUT, &uri, Some(put_body(&set, 1))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["current_version"], 2);

    let (_, v) = json(&f.app, Method::GET, &uri, None).await;
    let latest: AnnotationRevision = serde_json::from_value(v).unwrap();
    assert_eq!(latest.version, 2);
    assert_eq!(latest.set, set);
    let (_, v) = json(&f.app, Method::GET, &format!("{uri}?version=1"), None).await;
    assert_eq!(serde_json::from_value::<AnnotationRevision>(v).unwrap(), r1);
    let (_, v) = json(&f.app, Method::GET, &format!("/diagrams/{id}/revisions"), None).await;
    assert_eq!(v.as_array().unwrap().len(), 2);

    let (_, v) = json(&f.app, Method::GET, "/diagrams", None).await;
    assert_eq!(v["items"][0]["latest_version"], 2);
    assert_eq!(v["items"][0]["correction_count"], 2);

    let other = reference(f.dataset.path(), &f.ids[1]);
    let (s, _) = json(&f.app, Method::PUT, &uri, Some(put_body(&other, 2))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn invalid_sets_are_unprocessable_unless_acknowledged() {
    let f = fixture(DiagramKind::Ownership, 1);
    let id = &f.ids[0];
    let uri = format!("/diagrams/{id}/annotations");
    let mut set = reference(f.dataset.path(), id);
    let dup = set.objects[0].clone();
    set.objects.push(dup);
    let (s, v) = json(&f.app, Method::PUT, &uri, Some(put_body(&set, 0))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["violations"][0]["rule"], "duplicate-id");
    let (_, v) = json(&f.app, Method::GET, "/diagrams", None).await;
    assert_eq!(v["items"][0]["latest_version"], 0);

    let mut body = put_body(&set, 0);
    body["acknowledge_violations"] = Value::Bool(true);
    let (s, v) = json(&f.app, Method::PUT, &uri, Some(body)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["acknowledged_violations"].as_array().unwrap().len(), 1);

    let (s, _) = json(
        &f.app,
        Method::PUT,
        &uri,
        Some(serde_json::json!({"expected_version": 1})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_puts_have_one_winner() {
    let f = fixture(DiagramKind::Ownership, 1);
    let id = f.ids[0].clone();
    let set = reference(f.dataset.path(), &id);
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let app = f.app.clone();
            let body = put_body(&set, 0);
            let uri = format!("/diagrams/{id}/annotations");
            tokio::spawn(async move { json(&app, Method::PUT, &uri, Some(body)).await.0 })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1);
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 15);
    let (_, v) = json(&f.app, Method::GET, &format!("/diagrams/{id}/revisions"), None).await;
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn zero_noise_auto_annotation_exports_ground_truth_bytes() {
    let f = fixture(DiagramKind::Ownership, 4);
    for (i, id) in f.ids.iter().enumerate() {
        let (s, v) = json(
            &f.app,
            Method::POST,
            &format!("/diagrams/{id}/auto-annotate"),
            Some(simulate(NoiseConfig::default(), i as u64)),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(
            (v["version"].as_u64(), v["author"].as_str()),
            (Some(1), Some("auto-annotate"))
        );
    }
    let req = serde_json::to_value(ExportRequest {
        ids: f.ids.iter().rev().cloned().collect(),
        format: "dota".into(),
        versions: BTreeMap::new(),
    })
    .unwrap();
    let (s, bytes, ctype) = send(&f.app, Method::POST, "/export", Some(req.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("application/x-tar"));
    let files = untar(&bytes);
    assert_eq!(files.len(), 2 * f.ids.len());
    for id in &f.ids {
        let gt = fs::read(f.dataset.path().join("dota").join(format!("{id}.txt"))).unwrap();
        assert_eq!(files[&format!("{id}.txt")], gt, "{id}");
    }
    let (_, again, _) = send(&f.app, Method::POST, "/export", Some(req)).await;
    assert_eq!(bytes, again);

    let (_, v) = json(&f.app, Method::GET, "/diagrams", None).await;
    assert_eq!(v["items"][0]["correction_count"], 0);
}

#[tokio::test]
async fn pinned_exports_are_immutable() {
    let f = fixture(DiagramKind::Organization, 2);
    let id = f.ids[0].clone();
    let noisy = NoiseConfig {
        jitter_sigma: 2.0,
        ..NoiseConfig::lines_dropped(0.2)
    };
    let (s, _) = json(
        &f.app,
        Method::POST,
        &format!("/diagrams/{id}/auto-annotate"),
        Some(simulate(noisy, 3)),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let pinned = serde_json::json!({"ids": [id], "format": "coco", "versions": {id.clone(): 1}});
    let (s, first, _) = send(&f.app, Method::POST, "/export", Some(pinned.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let files = untar(&first);
    let doc: Value = serde_json::from_slice(&files["annotations.json"]).unwrap();
    assert_eq!(doc["images"].as_array().unwrap().len(), 1);

    let corrected = reference(f.dataset.path(), &id);
    let (s, v) = json(
        &f.app,
        Method::PUT,
        &format!("/diagrams/{id}/annotations"),
        Some(put_body(&corrected, 1)),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["parent_version"], 1);
    let (_, second, _) = send(&f.app, Method::POST, "/export", Some(pinned)).await;
    assert_eq!(first, second);

    let (s, v) = json(
        &f.app,
        Method::POST,
        "/export",
        Some(serde_json::json!({"ids": [id], "format": "shapefile"})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["message"].as_str().unwrap().contains("dota"));
    let unannotated = &f.ids[1];
    let (s, _) = json(
        &f.app,
        Method::POST,
        "/export",
        Some(serde_json::json!({"ids": [unannotated], "format": "dota"})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn detection_files_become_revisions() {
    let f = fixture(DiagramKind::Ownership, 1);
    let id = &f.ids[0];
    let gt = reference(f.dataset.path(), id);
    let file = write_detections(id, &gt.objects, gt.width, gt.height, CoordinateSpace::Scaled1024);
    let body = serde_json::to_value(AutoAnnotate {
        source: AutoSource::Detections { file: file.clone() },
        expected_version: Some(0),
    })
    .unwrap();
    let (s, v) = json(
        &f.app,
        Method::POST,
        &format!("/diagrams/{id}/auto-annotate"),
        Some(body.clone()),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let rev: AnnotationRevision = serde_json::from_value(v).unwrap();
    assert_eq!(rev.set.texts, gt.texts);
    for (a, b) in rev.set.objects.iter().zip(&gt.objects) {
        assert!(a.bbox.approx_eq(&b.bbox, 1e-6));
    }
    let (s, _) = json(
        &f.app,
        Method::POST,
        &format!("/diagrams/{id}/auto-annotate"),
        Some(body),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);

    let mut wrong = file;
    wrong.diagram_id = "other".into();
    let body = serde_json::json!({"source": {"type": "detections", "file": wrong}});
    let (s, _) = json(
        &f.app,
        Method::POST,
        &format!("/diagrams/{id}/auto-annotate"),
        Some(body),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let body = serde_json::json!({"source": {"type": "simulate", "noise": {"drop_rate": {"line": 2.0}}}});
    let (s, _) = json(
        &f.app,
        Method::POST,
        &format!("/diagrams/{id}/auto-annotate"),
        Some(body),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}
