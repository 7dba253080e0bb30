mod common;

use rlgame::network::init_network;
use rlgame::store::{Lineage, ModelFile};
use rlgame::tournament::{
    compare_players, render_csv, run_memoryless_elimination, run_round_robin, run_synthesis_elimination, summarize,
    MatchSettings, PlayerEntry, TournamentMode, TournamentSpec, CSV_HEADER, DEFAULT_COMPREHENSIVE_THRESHOLD,
};
use rlgame::{Color, GameConfig, NetworkPair};

fn entrant(id: &str, seed: u64) -> PlayerEntry {
    let cfg = common::small();
    PlayerEntry::new(
        id,
        NetworkPair::new(
            init_network(cfg, Color::White, seed, 0.2),
            init_network(cfg, Color::Black, seed + 1000, 0.2),
        ),
    )
}

fn settings(games: u32) -> MatchSettings {
    MatchSettings {
        games_per_session: games,
        ..MatchSettings::default()
    }
}

fn files(p: &PlayerEntry) -> [String; 2] {
    [
        ModelFile::from_network(&p.nets.white, Lineage::default()).to_text(),
        ModelFile::from_network(&p.nets.black, Lineage::default()).to_text(),
    ]
}

fn spec(mode: TournamentMode, n: usize, games: u32) -> TournamentSpec {
    TournamentSpec {
        mode,
        entrants: (0..n).map(|i| entrant(&format!("p{i}"), i as u64 * 7 + 1)).collect(),
        settings: settings(games),
        seed: 42,
        parallel: 2,
    }
}

#[test]
fn sessions_fill_the_table_schema() {
    let out = compare_players(&entrant("x", 1), &entrant("y", 2), &settings(30), 5).unwrap();
    let r = &out.result;
    assert_eq!(r.sessions[0].label(), "W_x vs. B_y");
    assert_eq!(r.sessions[1].label(), "W_y vs. B_x");
    for s in &r.sessions {
        assert_eq!(s.stats.white_wins + s.stats.black_wins + s.stats.draws, 30);
    }
    assert_eq!(r.x_collective, r.sessions[0].stats.white_wins + r.sessions[1].stats.black_wins);
    let rows = summarize(std::slice::from_ref(r), DEFAULT_COMPREHENSIVE_THRESHOLD);
    assert_eq!(rows.len(), 2);
    let csv = render_csv(&rows);
    assert!(csv.starts_with(CSV_HEADER));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn swapping_labels_reproduces_sessions() {
    let x = entrant("x", 1);
    let y = entrant("y", 2);
    let a = compare_players(&x, &y, &settings(20), 9).unwrap().result;
    let b = compare_players(&y, &x, &settings(20), 9).unwrap().result;
    assert_eq!(a.sessions[0], b.sessions[1]);
    assert_eq!(a.sessions[1], b.sessions[0]);
    assert_eq!(a.winner, b.winner);
}

#[test]
fn memoryless_champion_keeps_entry_networks() {
    let spec = spec(TournamentMode::Memoryless, 4, 20);
    let bracket = run_memoryless_elimination(&spec).unwrap();
    let entry = spec.entrants.iter().find(|e| e.id == bracket.champion.id).unwrap();
    assert_eq!(files(&bracket.champion), files(entry));
    assert_eq!(bracket.rounds.len(), 2);
    assert_eq!(bracket.rounds[0].matches.len(), 2);
}

#[test]
fn synthesis_champion_carries_evolved_networks() {
    let spec = spec(TournamentMode::Synthesis, 4, 20);
    let bracket = run_synthesis_elimination(&spec).unwrap();
    let entry = spec.entrants.iter().find(|e| e.id == bracket.champion.id).unwrap();
    let [w, b] = files(&bracket.champion);
    let [ew, eb] = files(entry);
    assert_ne!(w, ew);
    assert_ne!(b, eb);
    assert_eq!(bracket.champion.nets.white.games_trained, 2 * 2 * 20 / 2);
}

#[test]
fn odd_fields_get_byes() {
    let spec = spec(TournamentMode::Memoryless, 3, 10);
    let bracket = run_memoryless_elimination(&spec).unwrap();
    assert_eq!(bracket.shape.byes, 1);
    assert_eq!(bracket.rounds[0].byes, vec!["p0".to_string()]);
    assert_eq!(bracket.rounds[0].matches.len(), 1);
    assert_eq!(bracket.rounds[1].matches.len(), 1);
    assert_eq!(bracket.rounds[1].matches[0].x, "p0");
}

#[test]
fn round_robin_plays_every_pair() {
    let spec = spec(TournamentMode::Roundrobin, 3, 10);
    let rr = run_round_robin(&spec).unwrap();
    assert_eq!(rr.matches.len(), 3);
    assert_eq!(rr.standings.len(), 3);
    let total: u32 = rr.standings.iter().map(|s| s.match_wins + s.match_ties + s.match_losses).sum();
    assert_eq!(total, 6);
}

#[test]
fn tournaments_are_deterministic_across_thread_counts() {
    let mut a = spec(TournamentMode::Memoryless, 4, 15);
    let mut b = a.clone();
    a.parallel = 1;
    b.parallel = 4;
    let ra = run_memoryless_elimination(&a).unwrap();
    let rb = run_memoryless_elimination(&b).unwrap();
    assert_eq!(ra.rounds, rb.rounds);
    assert_eq!(ra.champion.id, rb.champion.id);
}

#[test]
fn mismatched_boards_are_rejected() {
    let mut s = spec(TournamentMode::Memoryless, 2, 5);
    let cfg = GameConfig::default();
    s.entrants.push(PlayerEntry::new(
        "big",
        NetworkPair::new(init_network(cfg, Color::White, 1, 0.01), init_network(cfg, Color::Black, 2, 0.01)),
    ));
    assert!(run_memoryless_elimination(&s).is_err());
}
