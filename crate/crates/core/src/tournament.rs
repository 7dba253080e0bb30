//! Player comparison and tournaments.
//!
//! A player is a pair of networks. Comparing X with Y runs two CC sessions,
//! `W_X vs. B_Y` then `W_Y vs. B_X`, and scores each player by the games its
//! two components won. Brackets are single elimination with first-round byes
//! for the leading entrants; memory-less brackets advance winners with their
//! entry networks, synthesis brackets with the networks as evolved in the
//! match.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentSpec, DEFAULT_EXPLOIT_PROB};
use crate::game::{Color, GameConfig};
use crate::runner::{run_cc_session, GameRecord, NetworkPair, RunError, SessionFailure, SessionSpec, SessionStats};
use crate::search::LeafEval;
use crate::seed::{derive_seed, label_key};
use crate::td::TdParams;

pub const DEFAULT_GAMES_PER_SESSION: u32 = 1000;
pub const DEFAULT_COMPREHENSIVE_THRESHOLD: f64 = 0.65;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerEntry {
    pub id: String,
    pub nets: NetworkPair,
}

impl PlayerEntry {
    pub fn new(id: impl Into<String>, nets: NetworkPair) -> Self {
        PlayerEntry { id: id.into(), nets }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TournamentError {
    #[error("players {0} and {1} were trained on different boards")]
    Incompatible(String, String),
    #[error("player {0} has networks for different boards")]
    MixedBoards(String),
    #[error("duplicate player id {0}")]
    DuplicateId(String),
    #[error("a tournament needs at least one entrant")]
    NoEntrants,
    #[error("session {white} vs {black} failed: {source}")]
    Session {
        white: String,
        black: String,
        #[source]
        source: SessionFailure,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Settings shared by every session of a match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchSettings {
    pub games_per_session: u32,
    pub exploit_prob: f64,
    pub td: TdParams,
    pub max_plies: u32,
}

impl Default for MatchSettings {
    fn default() -> Self {
        MatchSettings {
            games_per_session: DEFAULT_GAMES_PER_SESSION,
            exploit_prob: DEFAULT_EXPLOIT_PROB,
            td: TdParams::default(),
            max_plies: crate::game::DEFAULT_MAX_PLIES,
        }
    }
}

/// One CC session of a match, in table-row form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub white_player: String,
    pub black_player: String,
    pub stats: SessionStats,
    /// Per-game rows behind `stats`; empty for externally supplied tables.
    #[serde(skip)]
    pub records: Vec<GameRecord>,
}

impl PairingResult {
    pub fn label(&self) -> String {
        format!("W_{} vs. B_{}", self.white_player, self.black_player)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub x: String,
    pub y: String,
    /// `[W_X vs. B_Y, W_Y vs. B_X]`.
    pub sessions: [PairingResult; 2],
    pub x_collective: u32,
    pub y_collective: u32,
    /// `None` for a tie.
    pub winner: Option<String>,
    pub games_per_session: u32,
}

impl MatchResult {
    fn from_sessions(x: &str, y: &str, sessions: [PairingResult; 2], games_per_session: u32) -> Self {
        let [xy, yx] = &sessions;
        let x_collective = xy.stats.white_wins + yx.stats.black_wins;
        let y_collective = xy.stats.black_wins + yx.stats.white_wins;
        let x_moves = xy.stats.white_win_moves + yx.stats.black_win_moves;
        let y_moves = xy.stats.black_win_moves + yx.stats.white_win_moves;
        let avg = |moves: u64, wins: u32| moves as f64 / f64::from(wins);
        let winner = match x_collective.cmp(&y_collective) {
            std::cmp::Ordering::Greater => Some(x.to_string()),
            std::cmp::Ordering::Less => Some(y.to_string()),
            std::cmp::Ordering::Equal if x_collective == 0 => None,
            std::cmp::Ordering::Equal => {
                let (ax, ay) = (avg(x_moves, x_collective), avg(y_moves, y_collective));
                if ax < ay {
                    Some(x.to_string())
                } else if ay < ax {
                    Some(y.to_string())
                } else {
                    None
                }
            }
        };
        MatchResult {
            x: x.to_string(),
            y: y.to_string(),
            sessions,
            x_collective,
            y_collective,
            winner,
            games_per_session,
        }
    }

    /// Builds a result from finished session tables; used for reporting
    /// externally produced numbers.
    pub fn from_tables(x: &str, y: &str, xy: SessionStats, yx: SessionStats) -> Self {
        let games = xy.games;
        let sessions = [
            PairingResult {
                white_player: x.to_string(),
                black_player: y.to_string(),
                stats: xy,
                records: Vec::new(),
            },
            PairingResult {
                white_player: y.to_string(),
                black_player: x.to_string(),
                stats: yx,
                records: Vec::new(),
            },
        ];
        MatchResult::from_sessions(x, y, sessions, games)
    }

    pub fn collective(&self, id: &str) -> u32 {
        if id == self.x {
            self.x_collective
        } else if id == self.y {
            self.y_collective
        } else {
            0
        }
    }

    /// Winner's share of all match games; `None` for a tie.
    pub fn winner_share(&self) -> Option<f64> {
        let w = self.winner.as_deref()?;
        Some(f64::from(self.collective(w)) / f64::from(2 * self.games_per_session))
    }
}

#[derive(Clone, Debug)]
pub struct MatchOutcome {
    pub result: MatchResult,
    /// X and Y with their networks as evolved by the match.
    pub evolved: (PlayerEntry, PlayerEntry),
}

fn check_entry(p: &PlayerEntry) -> Result<GameConfig, TournamentError> {
    if !p.nets.white.config.same_board(&p.nets.black.config) {
        return Err(TournamentError::MixedBoards(p.id.clone()));
    }
    Ok(p.nets.white.config)
}

fn session_seed(seed: u64, white: &str, black: &str) -> u64 {
    derive_seed(seed, &[label_key(white), label_key(black)])
}

fn run_pairing(
    white: (&str, &mut crate::network::ValueNetwork),
    black: (&str, &mut crate::network::ValueNetwork),
    config: GameConfig,
    settings: &MatchSettings,
    seed: u64,
) -> Result<PairingResult, TournamentError> {
    let spec = SessionSpec {
        config: GameConfig {
            max_plies: settings.max_plies,
            ..config
        },
        white_agent: AgentSpec::learner(settings.exploit_prob),
        black_agent: AgentSpec::learner(settings.exploit_prob),
        games: settings.games_per_session,
        learn_white: true,
        learn_black: true,
        td: settings.td,
        leaf_eval: LeafEval::default(),
        run_seed: session_seed(seed, white.0, black.0),
    };
    let mut nets = NetworkPair::new(white.1.clone(), black.1.clone());
    let outcome = run_cc_session(&spec, &mut nets).map_err(|source| TournamentError::Session {
        white: white.0.to_string(),
        black: black.0.to_string(),
        source,
    })?;
    *white.1 = nets.white;
    *black.1 = nets.black;
    Ok(PairingResult {
        white_player: white.0.to_string(),
        black_player: black.0.to_string(),
        stats: outcome.stats,
        records: outcome.records,
    })
}

/// Runs `W_X vs. B_Y` then `W_Y vs. B_X`. Session seeds depend on the
/// pairing's player ids, so swapping X and Y reproduces the same sessions.
pub fn compare_players(
    x: &PlayerEntry,
    y: &PlayerEntry,
    settings: &MatchSettings,
    seed: u64,
) -> Result<MatchOutcome, TournamentError> {
    let config = check_entry(x)?;
    if !config.same_board(&check_entry(y)?) {
        return Err(TournamentError::Incompatible(x.id.clone(), y.id.clone()));
    }
    let mut ex = x.clone();
    let mut ey = y.clone();
    let first = run_pairing(
        (&x.id, &mut ex.nets.white),
        (&y.id, &mut ey.nets.black),
        config,
        settings,
        seed,
    )?;
    let second = run_pairing(
        (&y.id, &mut ey.nets.white),
        (&x.id, &mut ex.nets.black),
        config,
        settings,
        seed,
    )?;
    Ok(MatchOutcome {
        result: MatchResult::from_sessions(&x.id, &y.id, [first, second], settings.games_per_session),
        evolved: (ex, ey),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TournamentMode {
    Memoryless,
    Synthesis,
    Roundrobin,
}

impl std::str::FromStr for TournamentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "memoryless" => Ok(TournamentMode::Memoryless),
            "synthesis" => Ok(TournamentMode::Synthesis),
            "roundrobin" => Ok(TournamentMode::Roundrobin),
            other => Err(format!("unknown tournament mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TournamentSpec {
    pub mode: TournamentMode,
    pub entrants: Vec<PlayerEntry>,
    pub settings: MatchSettings,
    pub seed: u64,
    /// Upper bound on concurrently running matches.
    pub parallel: usize,
}

/// Slot and round arithmetic for a single-elimination field.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketShape {
    pub entrants: usize,
    pub slots: usize,
    pub byes: usize,
    pub rounds: usize,
}

impl BracketShape {
    pub fn for_field(entrants: usize) -> Self {
        let slots = entrants.max(1).next_power_of_two();
        BracketShape {
            entrants,
            slots,
            byes: slots - entrants.max(1),
            rounds: slots.trailing_zeros() as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketRound {
    pub byes: Vec<String>,
    pub matches: Vec<MatchResult>,
    /// Advancing ids in the order they enter the next round.
    pub advancing: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Bracket {
    pub mode: TournamentMode,
    pub shape: BracketShape,
    pub rounds: Vec<BracketRound>,
    pub champion: PlayerEntry,
    /// Opponents the champion beat, in round order.
    pub champion_matches: Vec<String>,
}

fn pool(parallel: usize) -> Result<rayon::ThreadPool, TournamentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| TournamentError::Pool(e.to_string()))
}

fn validate_field(entrants: &[PlayerEntry]) -> Result<(), TournamentError> {
    let first = entrants.first().ok_or(TournamentError::NoEntrants)?;
    let config = check_entry(first)?;
    let mut seen = std::collections::HashSet::new();
    for e in entrants {
        if !seen.insert(e.id.as_str()) {
            return Err(TournamentError::DuplicateId(e.id.clone()));
        }
        if !check_entry(e)?.same_board(&config) {
            return Err(TournamentError::Incompatible(first.id.clone(), e.id.clone()));
        }
    }
    Ok(())
}

fn match_seed(seed: u64, round: usize, index: usize) -> u64 {
    derive_seed(seed, &[round as u64, index as u64])
}

/// Single elimination. The first `byes` entrants in listing order skip round
/// one; a tied match advances the earlier-listed player.
pub fn run_elimination(spec: &TournamentSpec, evolve: bool) -> Result<Bracket, TournamentError> {
    validate_field(&spec.entrants)?;
    let shape = BracketShape::for_field(spec.entrants.len());
    let pool = pool(spec.parallel)?;
    let mode = if evolve {
        TournamentMode::Synthesis
    } else {
        TournamentMode::Memoryless
    };

    let mut rounds = Vec::new();
    let mut byes: Vec<PlayerEntry> = spec.entrants[..shape.byes].to_vec();
    let mut field: Vec<PlayerEntry> = spec.entrants[shape.byes..].to_vec();
    while field.len() + byes.len() > 1 {
        let round = rounds.len();
        let pairs: Vec<(&PlayerEntry, &PlayerEntry)> = field.chunks_exact(2).map(|p| (&p[0], &p[1])).collect();
        let outcomes: Vec<Result<MatchOutcome, TournamentError>> = pool.install(|| {
            pairs
                .par_iter()
                .enumerate()
                .map(|(i, (x, y))| compare_players(x, y, &spec.settings, match_seed(spec.seed, round, i)))
                .collect()
        });
        let mut winners = Vec::with_capacity(pairs.len());
        let mut matches = Vec::with_capacity(pairs.len());
        for ((x, y), outcome) in pairs.iter().zip(outcomes) {
            let outcome = outcome?;
            let x_wins = outcome.result.winner.as_deref() != Some(y.id.as_str());
            let advancing = match (evolve, x_wins) {
                (false, true) => (*x).clone(),
                (false, false) => (*y).clone(),
                (true, true) => outcome.evolved.0,
                (true, false) => outcome.evolved.1,
            };
            winners.push(advancing);
            matches.push(outcome.result);
        }
        let bye_ids: Vec<String> = byes.iter().map(|b| b.id.clone()).collect();
        let mut next = std::mem::take(&mut byes);
        next.extend(winners);
        rounds.push(BracketRound {
            byes: bye_ids,
            matches,
            advancing: next.iter().map(|p| p.id.clone()).collect(),
        });
        field = next;
    }
    let champion = field.pop().or_else(|| byes.pop()).ok_or(TournamentError::NoEntrants)?;
    let champion_matches = rounds
        .iter()
        .flat_map(|r| r.matches.iter())
        .filter(|m| m.x == champion.id || m.y == champion.id)
        .map(|m| if m.x == champion.id { m.y.clone() } else { m.x.clone() })
        .collect();
    Ok(Bracket {
        mode,
        shape,
        rounds,
        champion,
        champion_matches,
    })
}

pub fn run_memoryless_elimination(spec: &TournamentSpec) -> Result<Bracket, TournamentError> {
    run_elimination(spec, false)
}

pub fn run_synthesis_elimination(spec: &TournamentSpec) -> Result<Bracket, TournamentError> {
    run_elimination(spec, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standing {
    pub id: String,
    pub match_wins: u32,
    pub match_ties: u32,
    pub match_losses: u32,
    pub collective_wins: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRobin {
    pub matches: Vec<MatchResult>,
    pub standings: Vec<Standing>,
}

/// Every unordered pair plays one memory-less match.
pub fn run_round_robin(spec: &TournamentSpec) -> Result<RoundRobin, TournamentError> {
    validate_field(&spec.entrants)?;
    let pool = pool(spec.parallel)?;
    let e = &spec.entrants;
    let pairs: Vec<(usize, usize)> = (0..e.len()).flat_map(|i| (i + 1..e.len()).map(move |j| (i, j))).collect();
    let outcomes: Vec<Result<MatchOutcome, TournamentError>> = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(k, &(i, j))| compare_players(&e[i], &e[j], &spec.settings, match_seed(spec.seed, 0, k)))
            .collect()
    });
    let mut standings: Vec<Standing> = e
        .iter()
        .map(|p| Standing {
            id: p.id.clone(),
            match_wins: 0,
            match_ties: 0,
            match_losses: 0,
            collective_wins: 0,
        })
        .collect();
    let mut matches = Vec::with_capacity(pairs.len());
    for (&(i, j), outcome) in pairs.iter().zip(outcomes) {
        let r = outcome?.result;
        standings[i].collective_wins += r.x_collective;
        standings[j].collective_wins += r.y_collective;
        match r.winner.as_deref() {
            None => {
                standings[i].match_ties += 1;
                standings[j].match_ties += 1;
            }
            Some(w) if w == e[i].id => {
                standings[i].match_wins += 1;
                standings[j].match_losses += 1;
            }
            Some(_) => {
                standings[j].match_wins += 1;
                standings[i].match_losses += 1;
            }
        }
        matches.push(r);
    }
    // Stable sort keeps listing order for full ties.
    standings.sort_by(|a, b| {
        b.match_wins
            .cmp(&a.match_wins)
            .then(b.collective_wins.cmp(&a.collective_wins))
    });
    Ok(RoundRobin { matches, standings })
}

/// One table row: a single session of a match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub match_label: String,
    pub pairing: String,
    pub white_wins: u32,
    pub black_wins: u32,
    pub white_avg_moves: f64,
    pub black_avg_moves: f64,
    pub draws: u32,
    /// Session winner took at least the threshold share of the session.
    pub session_comprehensive: bool,
    pub match_winner: Option<String>,
    pub match_comprehensive: bool,
}

pub fn summarize(results: &[MatchResult], threshold: f64) -> Vec<ReportRow> {
    let mut rows = Vec::with_capacity(results.len() * 2);
    for r in results {
        let match_label = format!("{} vs {}", r.x, r.y);
        let match_comprehensive = r.winner_share().is_some_and(|s| s >= threshold);
        for s in &r.sessions {
            let games = f64::from(s.stats.games.max(1));
            let top = s.stats.white_wins.max(s.stats.black_wins);
            rows.push(ReportRow {
                match_label: match_label.clone(),
                pairing: s.label(),
                white_wins: s.stats.white_wins,
                black_wins: s.stats.black_wins,
                white_avg_moves: s.stats.avg_moves(Color::White),
                black_avg_moves: s.stats.avg_moves(Color::Black),
                draws: s.stats.draws,
                session_comprehensive: f64::from(top) / games >= threshold,
                match_winner: r.winner.clone(),
                match_comprehensive,
            });
        }
    }
    rows
}

pub const CSV_HEADER: &str =
    "match,pairing,white_wins,black_wins,white_avg_moves,black_avg_moves,draws,session_comprehensive,match_winner,match_comprehensive";

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.1},{:.1},{},{},{},{}",
            r.match_label,
            r.pairing,
            r.white_wins,
            r.black_wins,
            r.white_avg_moves,
            r.black_avg_moves,
            r.draws,
            r.session_comprehensive,
            r.match_winner.as_deref().unwrap_or("tie"),
            r.match_comprehensive
        );
    }
    out
}

/// Aligned text table with the games-won / average-moves layout.
pub fn render_table(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.pairing.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for r in rows {
        if current != Some(r.match_label.as_str()) {
            if current.is_some() {
                out.push('\n');
            }
            current = Some(&r.match_label);
            let verdict = match &r.match_winner {
                Some(w) if r.match_comprehensive => format!("winner {w} (comprehensive)"),
                Some(w) => format!("winner {w}"),
                None => "tie".to_string(),
            };
            let _ = writeln!(out, "{} -- {}", r.match_label, verdict);
            let _ = writeln!(
                out,
                "{:width$}  {:>7} {:>7}  {:>9} {:>9}  {:>5}",
                "",
                "Won W",
                "Won B",
                "AvgMv W",
                "AvgMv B",
                "Draws"
            );
        }
        let _ = writeln!(
            out,
            "{:width$}  {:>7} {:>7}  {:>9.1} {:>9.1}  {:>5}{}",
            r.pairing,
            r.white_wins,
            r.black_wins,
            r.white_avg_moves,
            r.black_avg_moves,
            r.draws,
            if r.session_comprehensive { "  *" } else { "" }
        );
    }
    out
}
