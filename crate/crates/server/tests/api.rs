use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use rlgame::{apply_move, BoardState, Color, Coord, GameConfig, Move};
use rlgame_server::{router, BoardView, MoveResponse, Phase, Registry, SessionReport};

struct Api {
    app: Router,
    registry: Arc<Registry>,
    _dir: Option<tempfile::TempDir>,
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut api = Api::open(dir.path());
        api._dir = Some(dir);
        api
    }

    fn open(path: &std::path::Path) -> Self {
        let registry = Arc::new(Registry::open(path).unwrap());
        Api {
            app: router(registry.clone()),
            registry,
            _dir: None,
        }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    async fn create(&self, body: Value) -> BoardView {
        let (status, v) = self.call(Method::POST, "/api/v1/sessions", Some(body)).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        serde_json::from_value(v).unwrap()
    }

    async fn view(&self, id: &str) -> BoardView {
        let (status, v) = self.call(Method::GET, &format!("/api/v1/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        serde_json::from_value(v).unwrap()
    }

    async fn play(&self, id: &str, mv: Move) -> (StatusCode, Value) {
        self.call(
            Method::POST,
            &format!("/api/v1/sessions/{id}/moves"),
            Some(serde_json::to_value(mv).unwrap()),
        )
        .await
    }

    /// Plays the first listed legal move.
    async fn play_first(&self, id: &str) -> MoveResponse {
        let view = self.view(id).await;
        let (status, v) = self.play(id, view.legal_moves[0]).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        serde_json::from_value(v).unwrap()
    }
}

fn small_session(games: u32) -> Value {
    json!({ "games": games, "seed": 11, "config": { "n": 5, "a": 1, "beta": 3, "max_plies": 200 } })
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn default_session_starts_with_four_exits_for_white() {
    let api = Api::new();
    let view = api.create(json!({})).await;
    assert_eq!(view.human, Color::White);
    assert_eq!(view.phase, Phase::HumanTurn);
    assert_eq!(view.progress.games_planned, 40);
    assert_eq!(view.progress.game, 1);
    assert_eq!((view.progress.completed, view.progress.white_wins), (0, 0));
    assert_eq!(view.config, GameConfig::default());
    assert_eq!((view.base.white, view.base.black), (10, 10));
    assert_eq!(view.legal_moves.len(), 4);
    assert!(view.legal_moves.iter().all(|m| matches!(m, Move::Exit { .. })));
    assert_eq!(view.rows.len(), 8);
    assert_eq!(&view.rows[0], "##......");
    assert_eq!(&view.rows[7], "......##");
}

#[tokio::test]
async fn moves_use_col_row_coordinates() {
    let api = Api::new();
    let view = api.create(json!({ "seed": 1 })).await;
    let (status, v) = api
        .play(&view.session_id, Move::Exit { to: Coord::new(2, 0) })
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["human_move"], json!({ "kind": "exit", "to": { "col": 2, "row": 0 } }));
    let reply: MoveResponse = serde_json::from_value(v).unwrap();
    assert_eq!(reply.computer_moves.len(), 1);
    assert_eq!(reply.view.ply, 2);
    assert_eq!(reply.view.last_move, Some(reply.computer_moves[0]));
    assert_eq!((reply.view.moves.white, reply.view.moves.black), (1, 1));
    assert!(reply.view.pawns.iter().any(|p| (p.col, p.row, p.color) == (2, 0, Color::White)));
}

#[tokio::test]
async fn illegal_move_is_rejected_with_rule_code_and_board_unchanged() {
    let api = Api::new();
    let id = api.create(json!({ "seed": 3 })).await.session_id;
    api.play(&id, Move::Exit { to: Coord::new(2, 1) }).await;
    let before = api.view(&id).await;
    // (2,1) is one step from white's base; (1,1) is inside it.
    let (status, v) = api
        .play(&id, Move::Step { from: Coord::new(2, 1), to: Coord::new(1, 1) })
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&v), "distance_decrease");
    assert_eq!(api.view(&id).await, before);

    let (status, v) = api
        .play(&id, Move::Step { from: Coord::new(5, 5), to: Coord::new(5, 6) })
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&v), "no_pawn");
    assert_eq!(api.view(&id).await, before);
}

#[tokio::test]
async fn two_game_session_checkpoints_each_game_and_completes() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::open(dir.path());
    let id = api.create(small_session(2)).await.session_id;
    let session_dir = dir.path().join("sessions").join(&id);
    assert!(session_dir.join("game-000-white.model").exists());

    let mut finished = 0;
    while api.view(&id).await.phase != Phase::Complete {
        let reply = api.play_first(&id).await;
        if !reply.completed_games.is_empty() {
            finished += 1;
            for color in ["white", "black"] {
                assert!(session_dir.join(format!("game-{finished:03}-{color}.model")).exists());
            }
        }
    }
    assert_eq!(finished, 2);

    let view = api.view(&id).await;
    assert_eq!(view.records.len(), 2);
    assert!(view.legal_moves.is_empty());
    assert_eq!(view.progress.completed, 2);
    assert!(view.status != rlgame::GameStatus::Ongoing);

    let (status, v) = api.play(&id, Move::Exit { to: Coord::new(1, 0) }).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "session_complete");

    let (status, v) = api.call(Method::GET, &format!("/api/v1/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    let report: SessionReport = serde_json::from_value(v).unwrap();
    assert!(report.complete);
    assert_eq!(report.white_wins + report.black_wins + report.draws, 2);
    assert_ne!(report.initial_models, report.current_models);

    // The finished session is in the experiment store with its models.
    let run = api.registry.store().get_run(&format!("hc-{id}")).unwrap();
    assert_eq!(run.stage, "hc");
    assert_eq!(run.output_models, report.current_models.to_vec());
    assert!(api.registry.store().dangling_models().unwrap().is_empty());
    assert_eq!(api.registry.store().game_rows(&run.run_id).unwrap().len(), 2);
}

#[tokio::test]
async fn transcripts_on_disk_replay_to_recorded_games() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::open(dir.path());
    let id = api.create(small_session(2)).await.session_id;
    while api.view(&id).await.phase != Phase::Complete {
        api.play_first(&id).await;
    }
    let text = std::fs::read_to_string(dir.path().join("sessions").join(&id).join("session.json")).unwrap();
    let file: Value = serde_json::from_str(&text).unwrap();
    let transcripts: Vec<Vec<Move>> = serde_json::from_value(file["checkpoint"]["transcripts"].clone()).unwrap();
    let view = api.view(&id).await;
    assert_eq!(transcripts.len(), 2);
    for (moves, record) in transcripts.iter().zip(&view.records) {
        let mut s = BoardState::initial(view.config).unwrap();
        for &m in moves {
            s = apply_move(&s, m).unwrap().0;
        }
        assert!(s.is_terminal());
        assert_eq!(s.ply, record.plies);
    }
}

#[tokio::test]
async fn restart_resumes_at_last_completed_game() {
    let dir = tempfile::tempdir().unwrap();
    let id;
    let reference;
    {
        let api = Api::open(dir.path());
        id = api.create(small_session(3)).await.session_id;
        while api.view(&id).await.progress.completed == 0 {
            api.play_first(&id).await;
        }
        reference = api.view(&id).await;
        // Moves into the second game are lost by the crash.
        api.play_first(&id).await;
        assert_ne!(api.view(&id).await, reference);
    }
    let api = Api::open(dir.path());
    let recovered = api.view(&id).await;
    assert_eq!(recovered, reference);
    while api.view(&id).await.phase != Phase::Complete {
        api.play_first(&id).await;
    }
    assert_eq!(api.view(&id).await.records.len(), 3);
}

#[tokio::test]
async fn abort_restarts_the_game_without_a_record() {
    let api = Api::new();
    let id = api.create(small_session(2)).await.session_id;
    api.play_first(&id).await;
    api.play_first(&id).await;
    let (status, v) = api.call(Method::POST, &format!("/api/v1/sessions/{id}/abort"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let view: BoardView = serde_json::from_value(v).unwrap();
    assert_eq!(view.ply, 0);
    assert_eq!(view.progress.aborted, 1);
    assert_eq!(view.progress.completed, 0);
    assert!(view.records.is_empty());
}

#[tokio::test]
async fn human_black_sees_the_computer_open() {
    let api = Api::new();
    let view = api.create(json!({ "human": "black", "games": 1, "seed": 5 })).await;
    assert_eq!(view.human, Color::Black);
    assert_eq!(view.ply, 1);
    assert_eq!(view.to_move, Color::Black);
    assert_eq!(view.phase, Phase::HumanTurn);
    assert!(matches!(view.last_move, Some(Move::Exit { .. })));
}

#[tokio::test]
async fn concurrent_writer_gets_conflict() {
    let api = Api::new();
    let id = api.create(json!({ "seed": 2 })).await.session_id;
    let slot = api.registry.get(&id).unwrap();
    let held = slot.claim().unwrap();
    let (status, v) = api.play(&id, Move::Exit { to: Coord::new(2, 0) }).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&v), "session_busy");
    // Reads never wait on the writer.
    assert_eq!(api.view(&id).await.ply, 0);
    drop(held);
    let (status, _) = api.play(&id, Move::Exit { to: Coord::new(2, 0) }).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn sessions_are_independent_and_listed() {
    let api = Api::new();
    let (a, b) = tokio::join!(api.create(json!({})), api.create(json!({})));
    assert_ne!(a.session_id, b.session_id);
    assert_eq!(a.session_id.len(), 32);
    api.play(&a.session_id, Move::Exit { to: Coord::new(2, 0) }).await;
    assert_eq!(api.view(&b.session_id).await.ply, 0);
    let (status, v) = api.call(Method::GET, "/api/v1/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn closed_sessions_disappear_and_stay_closed() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let api = Api::open(dir.path());
        let id = api.create(json!({})).await.session_id;
        let (status, _) = api.call(Method::DELETE, &format!("/api/v1/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::NO_CONTENT);
        let (status, v) = api.call(Method::GET, &format!("/api/v1/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(error_code(&v), "unknown_session");
        id
    };
    let api = Api::open(dir.path());
    let (status, _) = api.call(Method::GET, &format!("/api/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn request_errors_are_structured() {
    let api = Api::new();
    let (status, v) = api.call(Method::POST, "/api/v1/sessions", Some(json!({ "white_model": "m-0000000000000000" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v), "unknown_model");

    let (status, v) = api.call(Method::POST, "/api/v1/sessions", Some(json!({ "games": 0 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&v), "bad_request");

    let id = api.create(json!({})).await.session_id;
    let (status, v) = api
        .call(Method::POST, &format!("/api/v1/sessions/{id}/moves"), Some(json!({ "kind": "jump" })))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&v), "bad_request");
}

#[tokio::test]
async fn stored_models_seed_new_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::open(dir.path());
    let id = api.create(small_session(1)).await.session_id;
    while api.view(&id).await.phase != Phase::Complete {
        api.play_first(&id).await;
    }
    let report: SessionReport =
        serde_json::from_value(api.call(Method::GET, &format!("/api/v1/sessions/{id}/report"), None).await.1).unwrap();
    let [white, black] = report.current_models.clone();
    let mut body = small_session(1);
    body["white_model"] = json!(white);
    body["black_model"] = json!(black);
    let next = api.create(body).await.session_id;
    let (_, v) = api.call(Method::GET, &format!("/api/v1/sessions/{next}/report"), None).await;
    assert_eq!(v["initial_models"], json!([white, black]));

    // A white network cannot play black.
    let mut swapped = small_session(1);
    swapped["black_model"] = json!(report.current_models[0]);
    let (status, _) = api.call(Method::POST, "/api/v1/sessions", Some(swapped)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn rule_codes_cover_every_error() {
    let api = Api::new();
    let (status, v) = api.call(Method::GET, "/api/v1/rules", None).await;
    assert_eq!(status, StatusCode::OK);
    let codes: Vec<&str> = v.as_array().unwrap().iter().map(|c| c["code"].as_str().unwrap()).collect();
    for rule in rlgame::IllegalMove::ALL {
        assert!(codes.contains(&rule.code()));
    }
    for code in ["unknown_session", "unknown_model", "not_human_turn", "session_complete", "session_busy", "bad_request"] {
        assert!(codes.contains(&code), "{code}");
    }
}
