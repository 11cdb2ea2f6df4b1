use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use idtrace_service::{router, ServiceConfig, ServiceState, SessionView};
use serde_json::{json, Value};
use tower::ServiceExt;

const PEOPLE: &str = "object_id,color,size,shape\n\
a,red,s,round\n\
b,red,m,square\n\
c,blue,s,square\n\
d,blue,m,round\n\
e,green,s,round\n\
f,green,l,?\n";

struct Harness {
    dir: tempfile::TempDir,
    state: Arc<ServiceState>,
    app: Router,
}

impl Harness {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        Self::open(dir)
    }

    fn open(dir: tempfile::TempDir) -> Self {
        let (state, _) = ServiceState::open(&ServiceConfig::new(dir.path())).unwrap();
        let state = Arc::new(state);
        let app = router(state.clone(), None);
        Harness { dir, state, app }
    }

    fn reopen(self) -> Self {
        Self::open(self.dir)
    }

    async fn send(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let builder = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(v) => builder
                .header("content-type", "application/json")
                .body(Body::from(v.to_string())),
            None => builder.body(Body::empty()),
        }
        .unwrap();
        read(self.app.clone().oneshot(req).await.unwrap()).await
    }

    async fn upload(&self, csv: &str) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(Method::POST)
            .uri("/v1/datasets?name=people")
            .header("content-type", "text/csv")
            .body(Body::from(csv.to_string()))
            .unwrap();
        read(self.app.clone().oneshot(req).await.unwrap()).await
    }

    async fn session(&self, known: Value) -> Value {
        let (_, ds) = self.upload(PEOPLE).await;
        let (status, s) = self
            .send(
                Method::POST,
                "/v1/sessions",
                Some(json!({"dataset_id": ds["dataset_id"], "known": known})),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{s}");
        s
    }

    async fn observe(
        &self,
        id: &str,
        attribute: &str,
        value: &str,
        rev: u64,
    ) -> (StatusCode, Value) {
        self.send(
            Method::POST,
            &format!("/v1/sessions/{id}/observations"),
            Some(json!({"attribute": attribute, "value": value, "expected_revision": rev})),
        )
        .await
    }
}

async fn read(resp: axum::response::Response) -> (StatusCode, Value) {
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn sid(s: &Value) -> String {
    s["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_reports_ok() {
    let h = Harness::new();
    let (status, body) = h.send(Method::GET, "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn upload_is_idempotent_and_listed() {
    let h = Harness::new();
    let (status, ds) = h.upload(PEOPLE).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(ds["n_objects"], 6);
    assert_eq!(ds["n_attributes"], 3);
    assert!(ds["dataset_id"].as_str().unwrap().starts_with("ds-"));
    assert_eq!(ds["attributes"][0]["name"], "color");

    let (again, ds2) = h.upload(PEOPLE).await;
    assert_eq!(again, StatusCode::OK);
    assert_eq!(ds2["dataset_id"], ds["dataset_id"]);

    let (_, list) = h.send(Method::GET, "/v1/datasets", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    let id = ds["dataset_id"].as_str().unwrap();
    let (status, got) = h
        .send(Method::GET, &format!("/v1/datasets/{id}"), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got["digest"], ds["digest"]);
}

#[tokio::test]
async fn bad_inputs_carry_error_codes() {
    let h = Harness::new();
    let (status, body) = h.upload("object_id,a\nx,1\nx,2\n").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "invalid_csv");

    let (status, body) = h.send(Method::GET, "/v1/datasets/ds-nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "dataset_not_found");

    let (status, body) = h
        .send(Method::POST, "/v1/sessions", Some(json!({"known": []})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "bad_request");

    let (status, body) = h.send(Method::GET, "/v1/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "not_found");

    let s = h.session(json!([])).await;
    let (status, body) = h.observe(&sid(&s), "color", "purple", 0).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "invalid_observation");
}

#[tokio::test]
async fn session_carries_counts_and_entropy() {
    let h = Harness::new();
    let s = h.session(json!(["color=red"])).await;
    assert_eq!(s["candidate_count"], 2);
    assert_eq!(s["entropy"]["bits"], 1.0);
    assert_eq!(s["revision"], 0);
    assert_eq!(s["status"], "active");
    assert_eq!(s["known"][0], json!({"attribute": "color", "value": "red"}));
    assert_eq!(s["survivors"].as_array().unwrap().len(), 2);

    let s = h
        .session(json!([{"attribute": "shape", "value": "round"}]))
        .await;
    assert_eq!(s["candidate_count"], 3);
}

#[tokio::test]
async fn two_observations_give_path_two_and_history_three() {
    let h = Harness::new();
    let s = h.session(json!([])).await;
    let id = sid(&s);
    let (status, after) = h.observe(&id, "size", "s", 0).await;
    assert_eq!(status, StatusCode::OK, "{after}");
    assert_eq!(after["revision"], 1);
    assert_eq!(after["candidate_count"], 3);
    let (_, after) = h.observe(&id, "color", "blue", 1).await;
    assert_eq!(after["status"], "identified");
    assert_eq!(after["identified"]["object_id"], "c");

    let (_, got) = h
        .send(Method::GET, &format!("/v1/sessions/{id}"), None)
        .await;
    assert_eq!(got["path"].as_array().unwrap().len(), 2);
    assert_eq!(got["entropy_history"].as_array().unwrap().len(), 3);
    assert_eq!(got["path"][1]["entropy_after"]["bits"], 0.0);
    assert_eq!(got["entropy"]["raw"], "0000000000000000");
}

#[tokio::test]
async fn stale_revision_and_duplicates_are_rejected() {
    let h = Harness::new();
    let id = sid(&h.session(json!([])).await);
    assert_eq!(h.observe(&id, "size", "s", 0).await.0, StatusCode::OK);
    let (status, body) = h.observe(&id, "shape", "round", 0).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "revision_conflict");
    let (status, body) = h.observe(&id, "size", "s", 1).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "duplicate_attribute");
}

#[tokio::test]
async fn concurrent_writers_on_one_revision_exactly_one_wins() {
    let h = Harness::new();
    for _ in 0..20 {
        let id = sid(&h.session(json!([])).await);
        let (a, b) = tokio::join!(
            h.observe(&id, "size", "s", 0),
            h.observe(&id, "shape", "round", 0)
        );
        let mut codes = [a.0, b.0];
        codes.sort();
        assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
        let (_, got) = h
            .send(Method::GET, &format!("/v1/sessions/{id}"), None)
            .await;
        assert_eq!(got["revision"], 1);
        assert_eq!(got["path"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn threads_racing_on_one_revision_exactly_one_wins() {
    let h = Harness::new();
    let ds = h.state.upload_dataset(None, PEOPLE.as_bytes()).unwrap().0;
    let view = h
        .state
        .create_session(serde_json::from_value(json!({"dataset_id": ds.dataset_id})).unwrap())
        .unwrap();
    let wins: usize = std::thread::scope(|scope| {
        let handles: Vec<_> = ["color", "size", "shape", "color"]
            .into_iter()
            .zip(["red", "s", "round", "blue"])
            .map(|(a, v)| {
                let state = &h.state;
                let id = view.session_id.clone();
                scope.spawn(move || {
                    let req = serde_json::from_value(
                        json!({"attribute": a, "value": v, "expected_revision": 0}),
                    );
                    state.observe(&id, req.unwrap()).is_ok() as usize
                })
            })
            .collect();
        handles.into_iter().map(|t| t.join().unwrap()).sum()
    });
    assert_eq!(wins, 1);
}

#[tokio::test]
async fn whatif_counts_cover_the_candidates() {
    let h = Harness::new();
    let id = sid(&h.session(json!([])).await);
    let (status, w) = h
        .send(
            Method::GET,
            &format!("/v1/sessions/{id}/whatif/shape"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    let outcomes = w["outcomes"].as_array().unwrap();
    let total: u64 = outcomes.iter().map(|o| o["count"].as_u64().unwrap()).sum();
    assert_eq!(total + w["missing"].as_u64().unwrap(), 6);
    assert_eq!(w["missing"], 1);
    let expected = w["expected_candidates"].as_f64().unwrap();
    assert!((expected - (9.0 + 4.0) / 5.0).abs() < 1e-12);

    let (status, body) = h
        .send(
            Method::GET,
            &format!("/v1/sessions/{id}/whatif/weight"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
}

#[tokio::test]
async fn recommendations_are_ranked_and_truncated() {
    let h = Harness::new();
    let id = sid(&h.session(json!([])).await);
    let (status, r) = h
        .send(
            Method::GET,
            &format!("/v1/sessions/{id}/recommendations?top=2"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{r}");
    assert_eq!(r["total"], 3);
    let ranking = r["ranking"].as_array().unwrap();
    assert_eq!(ranking.len(), 2);
    assert_eq!(ranking[0]["rank"], 1);
    assert!(ranking[0]["bits"]["bits"].as_f64() >= ranking[1]["bits"]["bits"].as_f64());
    assert_eq!(ranking[0]["attribute"], ranking[0]["whatif"]["attribute"]);

    let (_, r) = h
        .send(
            Method::GET,
            &format!("/v1/sessions/{id}/recommendations"),
            None,
        )
        .await;
    assert_eq!(r["ranking"].as_array().unwrap().len(), 3);

    let (status, _) = h
        .send(
            Method::GET,
            &format!("/v1/sessions/{id}/recommendations?top=x"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn terminal_sessions_refuse_further_work() {
    let h = Harness::new();
    let id = sid(&h.session(json!(["color=red", "size=m"])).await);
    let (status, body) = h
        .send(
            Method::GET,
            &format!("/v1/sessions/{id}/recommendations"),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "session_not_active");
    let (status, _) = h.observe(&id, "shape", "square", 0).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn unavailable_attributes_are_recorded() {
    let h = Harness::new();
    let id = sid(&h.session(json!([])).await);
    let (status, s) = h
        .send(
            Method::POST,
            &format!("/v1/sessions/{id}/unavailable"),
            Some(json!({"attribute": "color", "expected_revision": 0})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{s}");
    assert_eq!(s["revision"], 1);
    assert_eq!(s["unavailable"], json!(["color"]));
    let (_, r) = h
        .send(
            Method::GET,
            &format!("/v1/sessions/{id}/recommendations"),
            None,
        )
        .await;
    assert!(r["ranking"]
        .as_array()
        .unwrap()
        .iter()
        .all(|x| x["attribute"] != "color"));
}

#[tokio::test]
async fn delete_then_get_is_not_found() {
    let h = Harness::new();
    let id = sid(&h.session(json!([])).await);
    let (status, _) = h
        .send(Method::DELETE, &format!("/v1/sessions/{id}"), None)
        .await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = h
        .send(Method::GET, &format!("/v1/sessions/{id}"), None)
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "session_not_found");
    let (status, _) = h
        .send(Method::DELETE, &format!("/v1/sessions/{id}"), None)
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let h = h.reopen();
    let (status, _) = h
        .send(Method::GET, &format!("/v1/sessions/{id}"), None)
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_filter_by_dataset() {
    let h = Harness::new();
    let first = h.session(json!([])).await;
    let (_, other) = h.upload("object_id,x\np,1\nq,2\n").await;
    h.send(
        Method::POST,
        "/v1/sessions",
        Some(json!({"dataset_id": other["dataset_id"]})),
    )
    .await;

    let (_, all) = h.send(Method::GET, "/v1/sessions", None).await;
    assert_eq!(all.as_array().unwrap().len(), 2);
    let ds = first["dataset_id"].as_str().unwrap();
    let (_, some) = h
        .send(Method::GET, &format!("/v1/sessions?dataset_id={ds}"), None)
        .await;
    let some = some.as_array().unwrap();
    assert_eq!(some.len(), 1);
    assert_eq!(some[0]["session_id"], first["session_id"]);
}

#[tokio::test]
async fn reopening_replays_every_session_exactly() {
    let h = Harness::new();
    let mut before = Vec::new();
    for known in [json!([]), json!(["shape=round"]), json!(["color=green"])] {
        let id = sid(&h.session(known).await);
        h.observe(&id, "size", "s", 0).await;
        let (_, v) = h
            .send(Method::GET, &format!("/v1/sessions/{id}"), None)
            .await;
        before.push(v);
    }
    let h = h.reopen();
    for v in before {
        let (status, after) = h
            .send(Method::GET, &format!("/v1/sessions/{}", sid(&v)), None)
            .await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(after, v);
    }
    let (_, list) = h.send(Method::GET, "/v1/datasets", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[test]
fn snapshots_are_written_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let csv: String = std::iter::once(
        "object_id,".to_string()
            + &(0..20)
                .map(|i| format!("a{i}"))
                .collect::<Vec<_>>()
                .join(","),
    )
    .chain((0..40).map(|r| {
        format!("o{r},")
            + &(0..20)
                .map(|i| ((r >> (i % 6)) & 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
    }))
    .collect::<Vec<_>>()
    .join("\n");
    let (state, _) = ServiceState::open(&ServiceConfig::new(dir.path())).unwrap();
    let ds = state.upload_dataset(None, csv.as_bytes()).unwrap().0;
    let view = state
        .create_session(
            serde_json::from_value(json!({"dataset_id": ds.dataset_id, "literal": true})).unwrap(),
        )
        .unwrap();
    let id = view.session_id;
    let mut last: Option<SessionView> = None;
    for (rev, i) in (0..17).zip(0..) {
        let req = json!({"attribute": format!("a{i}"), "expected_revision": rev});
        last = Some(
            state
                .mark_unavailable(&id, serde_json::from_value(req).unwrap())
                .unwrap(),
        );
    }
    let snapshot = dir
        .path()
        .join("sessions")
        .join(format!("{id}.snapshot.json"));
    assert!(snapshot.exists());
    assert_eq!(state.replay_from_log(&id).unwrap(), last.unwrap());
    drop(state);

    let text = std::fs::read_to_string(&snapshot).unwrap();
    let mut tampered: Value = serde_json::from_str(&text).unwrap();
    tampered["candidate_count"] = json!(1);
    std::fs::write(&snapshot, tampered.to_string()).unwrap();
    let (state, report) = ServiceState::open(&ServiceConfig::new(dir.path())).unwrap();
    assert_eq!(report.sessions, 0);
    assert_eq!(report.skipped.len(), 1);
    assert!(state.session(&id).is_err());
}

#[tokio::test]
async fn static_files_are_served_beside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    let web = tempfile::tempdir().unwrap();
    std::fs::write(
        web.path().join("index.html"),
        "<!doctype html><title>console</title>",
    )
    .unwrap();
    std::fs::write(web.path().join("app.js"), "console.log(1)").unwrap();
    let (state, _) = ServiceState::open(&ServiceConfig::new(dir.path())).unwrap();
    let app = router(Arc::new(state), Some(web.path().to_path_buf()));

    for (uri, needle) in [
        ("/", "console"),
        ("/app.js", "console.log"),
        ("/sessions/abc", "<title>"),
    ] {
        let resp = app
            .clone()
            .oneshot(Request::get(uri).body(Body::empty()).unwrap())
            .await
            .unwrap();
        assert_eq!(resp.status(), StatusCode::OK, "{uri}");
        let body = resp.into_body().collect().await.unwrap().to_bytes();
        assert!(String::from_utf8_lossy(&body).contains(needle), "{uri}");
    }
    let resp = app
        .oneshot(Request::get("/v1/health").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
}
