use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::{json, Value};

use rlgame::agents::{AgentKind, AgentSpec};
use rlgame::seed::{derive_seed, label_key};
use rlgame::store::{
    game_rows, json_hash, load_model, save_model, ExperimentRecord, ExperimentStore, GameRow, Lineage, LoadedModel,
    ModelFile, QueryFilter, Recorded, SessionAggregate, StoreError,
};
use rlgame::tournament::{
    compare_players, render_csv, render_table, run_memoryless_elimination, run_round_robin, run_synthesis_elimination,
    summarize, MatchResult, MatchSettings, PlayerEntry, TournamentError, TournamentMode, TournamentSpec,
};
use rlgame::{
    init_network, run_cc_session, Color, GameConfig, NetworkPair, RunError, SessionSpec, SessionStats, TdParams,
};

use crate::args::{self, Board, Format, LearnSides, Learning, Output};
use crate::CliError;

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicateRun(_) | StoreError::NonReproducible(_) => CliError::Failed(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Numeric(_) => CliError::Numeric(e.to_string()),
            RunError::InvalidSpec(_) | RunError::Config(_) | RunError::Dimension(_) => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<TournamentError> for CliError {
    fn from(e: TournamentError) -> Self {
        match e {
            TournamentError::Session { ref source, .. } if matches!(source.error, RunError::Numeric(_)) => {
                CliError::Numeric(e.to_string())
            }
            TournamentError::Run(inner) => inner.into(),
            TournamentError::Incompatible(..)
            | TournamentError::MixedBoards(_)
            | TournamentError::DuplicateId(_)
            | TournamentError::NoEntrants => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    write_text(path, &text)
}

fn td_params(l: &Learning) -> TdParams {
    TdParams {
        alpha: l.alpha,
        lambda: l.lambda,
        ..TdParams::default()
    }
}

fn board_config(b: &Board, max_plies: u32) -> Result<GameConfig, CliError> {
    GameConfig::with_max_plies(b.n, b.a, b.beta, max_plies).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_agent(s: &str, exploit_prob: f64) -> Result<AgentSpec, CliError> {
    let spec = match s {
        "learner" => AgentSpec::learner(exploit_prob),
        "random" => AgentSpec::random(),
        other => match other.strip_prefix("minimax:").map(str::parse::<u32>) {
            Some(Ok(k)) => AgentSpec::minimax(k),
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown agent `{other}`; expected learner, random or minimax:<odd lookahead>"
                )))
            }
        },
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

/// A run directory plus the experiment store next to it.
struct Run {
    id: String,
    dir: PathBuf,
    store: ExperimentStore,
    stage: &'static str,
    spec: Value,
    started: DateTime<Utc>,
}

impl Run {
    fn open(output: &Output, stage: &'static str, spec: Value) -> Result<Run, CliError> {
        let id = match &output.run_id {
            Some(id) => id.clone(),
            None => format!("{stage}-{}", &json_hash(&spec)[..12]),
        };
        if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
            return Err(CliError::Usage(format!("run id `{id}` is not a plain directory name")));
        }
        let dir = output.runs_dir.join(&id);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let store = ExperimentStore::open(output.runs_dir.join("store"))?;
        Ok(Run {
            id,
            dir,
            store,
            stage,
            spec,
            started: Utc::now(),
        })
    }

    /// Writes `<dir>/<name>` and stores the file under its id.
    fn save(&self, name: &str, net: &rlgame::ValueNetwork, parents: Vec<String>) -> Result<ModelFile, CliError> {
        let lineage = Lineage {
            parents,
            sessions: vec![self.id.clone()],
        };
        let file = save_model(&self.dir.join(name), net, lineage)?;
        self.store.put_model(&file)?;
        Ok(file)
    }

    fn record(
        &self,
        aggregates: Vec<SessionAggregate>,
        rows: Vec<GameRow>,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Result<(), CliError> {
        let record = ExperimentRecord::new(&self.id, self.stage, self.spec.clone(), aggregates, self.started)
            .with_models(inputs, outputs);
        if self.store.record_experiment(&record, &rows)? == Recorded::AlreadyPresent {
            eprintln!("run {} was already recorded with identical results", self.id);
        }
        write_json(&self.dir.join("run.json"), &record)
    }
}

/// Loads a model from a file path or, failing that, from the store by id.
fn load_input(arg: &str, store: &ExperimentStore) -> Result<LoadedModel, CliError> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(load_model(path)?);
    }
    if arg.starts_with("m-") && !arg.contains(['/', '\\', '.']) {
        return Ok(store.get_model(arg)?);
    }
    Err(CliError::Io(format!("{arg}: no such model file or stored model id")))
}

fn open_store(runs_dir: &Path) -> Result<ExperimentStore, CliError> {
    Ok(ExperimentStore::open(runs_dir.join("store"))?)
}

fn fresh_net(config: GameConfig, color: Color, seed: u64) -> rlgame::ValueNetwork {
    let seed = derive_seed(seed, &[label_key("init"), color.index() as u64]);
    init_network(config, color, seed, TdParams::default().init_weight_scale)
}

/// Networks for a session: loaded where given, fresh otherwise.
fn session_nets(
    white: Option<&str>,
    black: Option<&str>,
    board: &Board,
    max_plies: u32,
    seed: u64,
    store: &ExperimentStore,
) -> Result<(NetworkPair, [ModelFile; 2]), CliError> {
    let loaded = [white, black]
        .map(|arg| arg.map(|a| load_input(a, store)).transpose());
    let [white, black] = loaded;
    let (white, black) = (white?, black?);
    let config = match white.as_ref().or(black.as_ref()) {
        Some(m) => GameConfig {
            max_plies,
            ..m.net.config
        },
        None => board_config(board, max_plies)?,
    };
    let mut files = Vec::new();
    let mut nets = Vec::new();
    for (color, model) in [(Color::White, white), (Color::Black, black)] {
        let (net, file) = match model {
            Some(m) => {
                if m.net.color != color {
                    return Err(CliError::Usage(format!("model {} is a {} network, not {color}", m.file.id, m.net.color)));
                }
                if !m.net.config.same_board(&config) {
                    return Err(CliError::Usage("white and black models were built for different boards".into()));
                }
                (m.net, m.file)
            }
            None => {
                let net = fresh_net(config, color, seed);
                let file = ModelFile::from_network(&net, Lineage::default());
                store.put_model(&file)?;
                (net, file)
            }
        };
        nets.push(net);
        files.push(file);
    }
    let black_net = nets.pop().expect("two nets");
    let white_net = nets.pop().expect("two nets");
    let black_file = files.pop().expect("two files");
    let white_file = files.pop().expect("two files");
    Ok((NetworkPair::new(white_net, black_net), [white_file, black_file]))
}

pub fn session_table(stats: &SessionStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>7} {:>7}  {:>9} {:>9}  {:>5}  {:>5}", "Won W", "Won B", "AvgMv W", "AvgMv B", "Draws", "Games");
    let _ = writeln!(
        out,
        "{:>7} {:>7}  {:>9.1} {:>9.1}  {:>5}  {:>5}",
        stats.white_wins,
        stats.black_wins,
        stats.avg_moves(Color::White),
        stats.avg_moves(Color::Black),
        stats.draws,
        stats.games
    );
    out
}

pub fn init_model(a: &args::InitModel) -> Result<(), CliError> {
    let config = board_config(&a.board, rlgame::game::DEFAULT_MAX_PLIES)?;
    if !(a.scale >= 0.0 && a.scale.is_finite()) {
        return Err(CliError::Usage(format!("--scale must be non-negative, got {}", a.scale)));
    }
    let spec = json!({ "config": config, "seed": a.seed, "scale": a.scale });
    let run = Run::open(&a.output, "init-model", spec)?;
    let mut outputs = Vec::new();
    for color in Color::BOTH {
        let net = init_network(config, color, derive_seed(a.seed, &[label_key("init"), color.index() as u64]), a.scale);
        let file = run.save(&format!("{color}.model"), &net, Vec::new())?;
        println!("{color}: {} ({})", run.dir.join(format!("{color}.model")).display(), file.id);
        outputs.push(file.id);
    }
    run.record(Vec::new(), Vec::new(), Vec::new(), outputs)
}

fn run_session(
    stage: &'static str,
    spec: SessionSpec,
    nets: NetworkPair,
    inputs: [ModelFile; 2],
    output: &Output,
    extra: Value,
) -> Result<(), CliError> {
    let mut spec_json = json!({
        "session": spec,
        "input_models": [inputs[0].id, inputs[1].id],
    });
    if let (Value::Object(map), Value::Object(more)) = (&mut spec_json, extra) {
        map.extend(more);
    }
    let run = Run::open(output, stage, spec_json)?;
    let mut nets = nets;
    let outcome = run_cc_session(&spec, &mut nets).map_err(|f| CliError::from(f.error))?;
    let mut outputs = Vec::new();
    for color in Color::BOTH {
        let parent = inputs[color.index()].id.clone();
        let file = run.save(&format!("{color}.model"), nets.get(color), vec![parent])?;
        outputs.push(file.id);
    }
    let table = session_table(&outcome.stats);
    write_text(&run.dir.join("report.txt"), &table)?;
    print!("{table}");
    println!("run {} -> {}", run.id, run.dir.display());
    run.record(
        vec![SessionAggregate {
            session: stage.to_string(),
            stats: outcome.stats,
        }],
        game_rows(&run.id, stage, &outcome.records),
        inputs.iter().map(|f| f.id.clone()).collect(),
        outputs,
    )
}

pub fn selfplay(a: &args::Selfplay) -> Result<(), CliError> {
    let store = open_store(&a.output.runs_dir)?;
    let (nets, inputs) = session_nets(
        a.white.as_deref(),
        a.black.as_deref(),
        &a.board,
        a.learning.max_plies,
        a.seed,
        &store,
    )?;
    let (learn_white, learn_black) = match a.learn {
        LearnSides::Both => (true, true),
        LearnSides::White => (true, false),
        LearnSides::Black => (false, true),
        LearnSides::None => (false, false),
    };
    let spec = SessionSpec {
        config: nets.white.config,
        white_agent: parse_agent(&a.white_agent, a.learning.exploit_prob)?,
        black_agent: parse_agent(&a.black_agent, a.learning.exploit_prob)?,
        games: a.games,
        learn_white,
        learn_black,
        td: td_params(&a.learning),
        run_seed: a.seed,
        ..SessionSpec::self_play(nets.white.config, a.games, a.seed)
    };
    spec.validate()?;
    run_session("selfplay", spec, nets, inputs, &a.output, json!({}))
}

pub fn tutor(a: &args::Tutor) -> Result<(), CliError> {
    if a.lookahead.is_multiple_of(2) {
        return Err(CliError::Usage(format!("--lookahead must be odd, got {}", a.lookahead)));
    }
    let store = open_store(&a.output.runs_dir)?;
    let (nets, inputs) = session_nets(
        a.white.as_deref(),
        a.black.as_deref(),
        &a.board,
        a.learning.max_plies,
        a.seed,
        &store,
    )?;
    // Both networks learn: the tutor's moves train white passively.
    let spec = SessionSpec {
        white_agent: AgentSpec::minimax(a.lookahead),
        black_agent: AgentSpec::learner(a.learning.exploit_prob),
        td: td_params(&a.learning),
        ..SessionSpec::self_play(nets.white.config, a.games, a.seed)
    };
    spec.validate()?;
    debug_assert_eq!(spec.white_agent.kind, AgentKind::Minimax);
    run_session("tutor", spec, nets, inputs, &a.output, json!({ "lookahead": a.lookahead }))
}

/// Entry files of a player directory, loaded and verified.
struct PlayerDir {
    entry: PlayerEntry,
    files: [ModelFile; 2],
    paths: [PathBuf; 2],
}

fn load_player(dir: &Path) -> Result<PlayerDir, CliError> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Usage(format!("{}: not a player directory", dir.display())))?
        .to_string();
    let paths = [dir.join("white.model"), dir.join("black.model")];
    let white = load_model(&paths[0])?;
    let black = load_model(&paths[1])?;
    if white.net.color != Color::White || black.net.color != Color::Black {
        return Err(CliError::Usage(format!("{}: white.model/black.model hold the wrong colours", dir.display())));
    }
    Ok(PlayerDir {
        entry: PlayerEntry::new(id, NetworkPair::new(white.net, black.net)),
        files: [white.file, black.file],
        paths,
    })
}

fn settings(games: u32, l: &Learning) -> Result<MatchSettings, CliError> {
    let s = MatchSettings {
        games_per_session: games,
        exploit_prob: l.exploit_prob,
        td: td_params(l),
        max_plies: l.max_plies,
    };
    if games < 1 {
        return Err(CliError::Usage("--games must be at least 1".into()));
    }
    s.td.validate().map_err(CliError::Usage)?;
    if !(0.0..=1.0).contains(&s.exploit_prob) {
        return Err(CliError::Usage(format!("--exploit-prob must lie in [0, 1], got {}", s.exploit_prob)));
    }
    Ok(s)
}

fn match_aggregates(run_id: &str, matches: &[MatchResult]) -> (Vec<SessionAggregate>, Vec<GameRow>) {
    let mut aggregates = Vec::new();
    let mut rows = Vec::new();
    for m in matches {
        for s in &m.sessions {
            let label = s.label();
            rows.extend(game_rows(run_id, &label, &s.records));
            aggregates.push(SessionAggregate {
                session: label,
                stats: s.stats.clone(),
            });
        }
    }
    (aggregates, rows)
}

fn write_match_reports(run: &Run, matches: &[MatchResult], threshold: f64) -> Result<String, CliError> {
    let rows = summarize(matches, threshold);
    write_text(&run.dir.join("report.csv"), &render_csv(&rows))?;
    let table = render_table(&rows);
    write_text(&run.dir.join("report.txt"), &table)?;
    Ok(table)
}

fn input_ids(players: &[PlayerDir]) -> Vec<String> {
    players.iter().flat_map(|p| p.files.iter().map(|f| f.id.clone())).collect()
}

pub fn compare(a: &args::Compare) -> Result<(), CliError> {
    let settings = settings(a.games, &a.learning)?;
    let x = load_player(&a.x)?;
    let y = load_player(&a.y)?;
    if x.entry.id == y.entry.id {
        return Err(CliError::Usage(format!("both players are named {}", x.entry.id)));
    }
    let players = [x, y];
    let spec = json!({
        "players": players.iter().map(|p| json!({ "id": p.entry.id, "models": [p.files[0].id, p.files[1].id] })).collect::<Vec<_>>(),
        "settings": settings,
        "seed": a.seed,
    });
    let run = Run::open(&a.output, "compare", spec)?;
    for p in &players {
        run.store.put_model(&p.files[0])?;
        run.store.put_model(&p.files[1])?;
    }
    let outcome = compare_players(&players[0].entry, &players[1].entry, &settings, a.seed)?;
    let matches = [outcome.result];
    let table = write_match_reports(&run, &matches, a.threshold)?;
    write_json(&run.dir.join("match.json"), &matches[0])?;
    print!("{table}");
    println!("run {} -> {}", run.id, run.dir.display());
    let (aggregates, rows) = match_aggregates(&run.id, &matches);
    run.record(aggregates, rows, input_ids(&players), Vec::new())
}

fn entrant_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

#[derive(Serialize)]
struct BracketOut<'a> {
    mode: TournamentMode,
    shape: rlgame::tournament::BracketShape,
    rounds: &'a [rlgame::tournament::BracketRound],
    champion: &'a str,
    champion_matches: &'a [String],
    champion_models: [String; 2],
}

pub fn tournament(a: &args::Tournament) -> Result<(), CliError> {
    let settings = settings(a.games, &a.learning)?;
    let players = entrant_dirs(&a.entrants)?
        .iter()
        .map(|d| load_player(d))
        .collect::<Result<Vec<_>, _>>()?;
    if players.len() < 2 {
        return Err(CliError::Usage(format!(
            "{}: a tournament needs at least 2 entrants, found {}",
            a.entrants.display(),
            players.len()
        )));
    }
    let spec_json = json!({
        "mode": a.mode,
        "players": players.iter().map(|p| json!({ "id": p.entry.id, "models": [p.files[0].id, p.files[1].id] })).collect::<Vec<_>>(),
        "settings": settings,
        "seed": a.seed,
    });
    let run = Run::open(&a.output, "tournament", spec_json)?;
    for p in &players {
        run.store.put_model(&p.files[0])?;
        run.store.put_model(&p.files[1])?;
    }
    let spec = TournamentSpec {
        mode: a.mode,
        entrants: players.iter().map(|p| p.entry.clone()).collect(),
        settings,
        seed: a.seed,
        parallel: a.parallel.max(1),
    };

    let (matches, outputs) = match a.mode {
        TournamentMode::Roundrobin => {
            let rr = run_round_robin(&spec)?;
            write_json(&run.dir.join("standings.json"), &rr)?;
            println!("{:<16} {:>5} {:>5} {:>5} {:>10}", "player", "won", "tied", "lost", "collective");
            for s in &rr.standings {
                println!(
                    "{:<16} {:>5} {:>5} {:>5} {:>10}",
                    s.id, s.match_wins, s.match_ties, s.match_losses, s.collective_wins
                );
            }
            (rr.matches, Vec::new())
        }
        TournamentMode::Memoryless | TournamentMode::Synthesis => {
            let bracket = if a.mode == TournamentMode::Memoryless {
                run_memoryless_elimination(&spec)?
            } else {
                run_synthesis_elimination(&spec)?
            };
            let champ = players
                .iter()
                .find(|p| p.entry.id == bracket.champion.id)
                .expect("champion is an entrant");
            let champ_dir = run.dir.join("champion");
            fs::create_dir_all(&champ_dir).map_err(|e| io_err(&champ_dir, e))?;
            let mut ids = Vec::new();
            for color in Color::BOTH {
                let target = champ_dir.join(format!("{color}.model"));
                if a.mode == TournamentMode::Memoryless {
                    // The champion plays with its entry networks: copy the files byte for byte.
                    let src = &champ.paths[color.index()];
                    fs::copy(src, &target).map_err(|e| io_err(src, e))?;
                    ids.push(champ.files[color.index()].id.clone());
                } else {
                    let lineage = Lineage {
                        parents: vec![champ.files[color.index()].id.clone()],
                        sessions: vec![run.id.clone()],
                    };
                    let file = save_model(&target, bracket.champion.nets.get(color), lineage)?;
                    run.store.put_model(&file)?;
                    ids.push(file.id);
                }
            }
            let out = BracketOut {
                mode: bracket.mode,
                shape: bracket.shape,
                rounds: &bracket.rounds,
                champion: &bracket.champion.id,
                champion_matches: &bracket.champion_matches,
                champion_models: [ids[0].clone(), ids[1].clone()],
            };
            write_json(&run.dir.join("bracket.json"), &out)?;
            println!("champion: {} -> {}", bracket.champion.id, champ_dir.display());
            let matches = bracket.rounds.iter().flat_map(|r| r.matches.iter().cloned()).collect();
            (matches, ids)
        }
    };
    let table = write_match_reports(&run, &matches, a.threshold)?;
    print!("{table}");
    println!("run {} -> {}", run.id, run.dir.display());
    let (aggregates, rows) = match_aggregates(&run.id, &matches);
    run.record(aggregates, rows, input_ids(&players), outputs)
}

pub fn report(a: &args::Report) -> Result<(), CliError> {
    let store = open_store(&a.runs_dir)?;
    let Some(run_id) = &a.run else {
        let runs = store.query(&QueryFilter {
            model_id: a.model.clone(),
            stage: a.stage.clone(),
            ..QueryFilter::default()
        })?;
        match a.format {
            Format::Json => println!("{}", serde_json::to_string_pretty(&runs).expect("runs serialize")),
            Format::Csv => {
                println!("run_id,stage,finished_at,sessions,games");
                for r in &runs {
                    let games: u32 = r.aggregates.iter().map(|g| g.stats.games).sum();
                    println!("{},{},{},{},{}", r.run_id, r.stage, r.finished_at.to_rfc3339(), r.aggregates.len(), games);
                }
            }
            Format::Table => {
                for r in &runs {
                    let games: u32 = r.aggregates.iter().map(|g| g.stats.games).sum();
                    println!("{:<32} {:<12} {:>7} games  {}", r.run_id, r.stage, games, r.finished_at.format("%Y-%m-%d %H:%M:%S"));
                }
            }
        }
        return Ok(());
    };
    let record = store.get_run(run_id)?;
    let recomputed = store.reaggregate(run_id)?;
    let rows_present = !store.game_rows(run_id)?.is_empty();
    if rows_present && recomputed != record.aggregates {
        return Err(CliError::Failed(format!("run {run_id}: stored aggregates disagree with its per-game rows")));
    }
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&record).expect("record serializes")),
        Format::Csv => {
            println!("session,games,white_wins,black_wins,white_avg_moves,black_avg_moves,draws");
            for g in &record.aggregates {
                let s = &g.stats;
                println!(
                    "{},{},{},{},{:.1},{:.1},{}",
                    g.session,
                    s.games,
                    s.white_wins,
                    s.black_wins,
                    s.avg_moves(Color::White),
                    s.avg_moves(Color::Black),
                    s.draws
                );
            }
        }
        Format::Table => {
            println!("run {} ({})", record.run_id, record.stage);
            for g in &record.aggregates {
                println!("{}", g.session);
                print!("{}", session_table(&g.stats));
            }
            println!("inputs:  {}", record.input_models.join(" "));
            println!("outputs: {}", record.output_models.join(" "));
        }
    }
    Ok(())
}

pub fn serve(a: &args::Serve) -> Result<(), CliError> {
    let _ = tracing_subscriber::fmt().try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    runtime
        .block_on(rlgame_server::serve(rlgame_server::ServeOptions {
            addr: a.addr,
            data_dir: a.data_dir.clone(),
            static_dir: a.static_dir.clone(),
        }))
        .map_err(|e| CliError::Failed(e.to_string()))
}
