use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rlgame::tournament::TournamentMode;

#[derive(Parser, Debug)]
#[command(name = "rlgame", version, about = "Train, tutor and compare RLGame players")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file supplying flag values; flags given on the command line win.
    /// Keys of a `[<command>]` table map to that command's long flags, and a
    /// top-level `seed` applies to every command.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create a fresh pair of networks.
    InitModel(InitModel),
    /// Computer-vs-computer session; learner vs learner by default.
    Selfplay(Selfplay),
    /// Minimax tutor as white against a learning black.
    Tutor(Tutor),
    /// Match two players over two mirrored sessions.
    Compare(Compare),
    /// Elimination or round-robin tournament over a directory of players.
    Tournament(Tournament),
    /// Show stored runs and their aggregate tables.
    Report(Report),
    /// Host human teaching sessions over HTTP.
    Serve(Serve),
    /// Execute every stage of a run manifest in dependency order.
    Manifest(Manifest),
}

#[derive(Args, Debug, Clone)]
pub struct Board {
    /// Board side length (boards of loaded networks take precedence).
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Base side length.
    #[arg(long, default_value_t = 2)]
    pub a: usize,
    /// Pawns per side.
    #[arg(long, default_value_t = 10)]
    pub beta: usize,
}

#[derive(Args, Debug, Clone)]
pub struct Learning {
    /// Probability that a learner takes its best-valued move (the rest of
    /// the time it picks uniformly among all legal moves).
    #[arg(long, default_value_t = 0.9)]
    pub exploit_prob: f64,
    /// TD learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Eligibility-trace decay.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Plies after which a game is declared drawn.
    #[arg(long, default_value_t = 1000)]
    pub max_plies: u32,
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    /// Directory holding per-run output directories and the experiment store.
    #[arg(long, default_value = "runs")]
    pub runs_dir: PathBuf,
    /// Name of the run directory; derived from the command's settings when
    /// omitted, so identical invocations share a run.
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct InitModel {
    #[command(flatten)]
    pub board: Board,
    /// Seed for the initial weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial weights are drawn uniformly from [-scale, scale].
    #[arg(long, default_value_t = 0.01)]
    pub scale: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct Selfplay {
    /// Number of games.
    #[arg(long, default_value_t = 1000)]
    pub games: u32,
    /// White network: a model file or a stored model id. Fresh when omitted.
    #[arg(long)]
    pub white: Option<String>,
    /// Black network: a model file or a stored model id. Fresh when omitted.
    #[arg(long)]
    pub black: Option<String>,
    /// Policy for white: learner, random or minimax:<odd lookahead>.
    #[arg(long, default_value = "learner")]
    pub white_agent: String,
    /// Policy for black: learner, random or minimax:<odd lookahead>.
    #[arg(long, default_value = "learner")]
    pub black_agent: String,
    /// Which networks receive TD updates.
    #[arg(long, value_enum, default_value_t = LearnSides::Both)]
    pub learn: LearnSides,
    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub board: Board,
    #[command(flatten)]
    pub learning: Learning,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum LearnSides {
    Both,
    White,
    Black,
    None,
}

#[derive(Args, Debug)]
pub struct Tutor {
    /// Minimax look-ahead in plies; must be odd.
    #[arg(long, default_value_t = 1)]
    pub lookahead: u32,
    /// Number of games.
    #[arg(long, default_value_t = 1000)]
    pub games: u32,
    /// White network, trained passively on the tutor's moves. Fresh when omitted.
    #[arg(long)]
    pub white: Option<String>,
    /// Black (learning) network. Fresh when omitted.
    #[arg(long)]
    pub black: Option<String>,
    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub board: Board,
    #[command(flatten)]
    pub learning: Learning,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct Compare {
    /// Player X: a directory with white.model and black.model.
    #[arg(long)]
    pub x: PathBuf,
    /// Player Y: a directory with white.model and black.model.
    #[arg(long)]
    pub y: PathBuf,
    /// Games per session; a match plays two sessions.
    #[arg(long, default_value_t = 1000)]
    pub games: u32,
    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of games a winner needs for a comprehensive win.
    #[arg(long, default_value_t = 0.65)]
    pub threshold: f64,
    #[command(flatten)]
    pub learning: Learning,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct Tournament {
    /// memoryless: players keep their entry networks between rounds;
    /// synthesis: winners advance with their evolved networks;
    /// roundrobin: every pair plays one memoryless match.
    #[arg(long, value_parser = parse_mode, default_value = "memoryless")]
    pub mode: TournamentMode,
    /// Directory with one sub-directory per player, each holding
    /// white.model and black.model; players are listed in name order.
    #[arg(long)]
    pub entrants: PathBuf,
    /// Games per session; each match plays two sessions.
    #[arg(long, default_value_t = 1000)]
    pub games: u32,
    /// Matches run concurrently (independent matches only).
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of games a winner needs for a comprehensive win.
    #[arg(long, default_value_t = 0.65)]
    pub threshold: f64,
    #[command(flatten)]
    pub learning: Learning,
    #[command(flatten)]
    pub output: Output,
}

fn parse_mode(s: &str) -> Result<TournamentMode, String> {
    s.parse()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct Report {
    /// Run to show; lists all runs when omitted.
    #[arg(long)]
    pub run: Option<String>,
    /// List only runs that read or wrote this model id.
    #[arg(long)]
    pub model: Option<String>,
    /// List only runs of this stage (command).
    #[arg(long)]
    pub stage: Option<String>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Directory holding the experiment store.
    #[arg(long, default_value = "runs")]
    pub runs_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct Serve {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Session checkpoints and the service's experiment store.
    #[arg(long, default_value = "runs/service")]
    pub data_dir: PathBuf,
    /// Built browser client served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Manifest {
    /// Manifest file (TOML with one `[[stage]]` table per stage).
    pub file: PathBuf,
    /// Base seed; stages without their own seed derive one from it and
    /// their name. Overrides the manifest's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory holding per-run output directories and the experiment store.
    #[arg(long, default_value = "runs")]
    pub runs_dir: PathBuf,
}
