//! RLGame rules: board geometry, legal-move generation and move application.
//!
//! The board is `n × n` with two `a × a` bases in opposite corners. White's
//! base is the lower-left region (`col < a`, `row < a`), black's the
//! upper-right one (`col >= n - a`, `row >= n - a`). Pawns inside a base are
//! tracked as a count; only pawns that left their base occupy cells.
//!
//! All operations are pure: [`apply_move`] returns a fresh [`BoardState`].

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_PLIES: u32 = 1000;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub const BOTH: [Color; 2] = [Color::White, Color::Black];

    pub fn opponent(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Color::White => 0,
            Color::Black => 1,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Color::White => f.write_str("white"),
            Color::Black => f.write_str("black"),
        }
    }
}

impl std::str::FromStr for Color {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "white" | "w" => Ok(Color::White),
            "black" | "b" => Ok(Color::Black),
            other => Err(format!("unknown color `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("base side must be at least 1 (got a = {0})")]
    BaseTooSmall(usize),
    #[error("board side {n} too small for bases of side {a}: need n >= 2a + 1")]
    BoardTooSmall { n: usize, a: usize },
    #[error("each player needs at least one pawn")]
    NoPawns,
    #[error("max_plies must be at least 1")]
    NoPlies,
}

/// Board geometry and game-length cap.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    pub a: usize,
    pub beta: usize,
    #[serde(default = "default_max_plies")]
    pub max_plies: u32,
}

fn default_max_plies() -> u32 {
    DEFAULT_MAX_PLIES
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            n: 8,
            a: 2,
            beta: 10,
            max_plies: DEFAULT_MAX_PLIES,
        }
    }
}

impl GameConfig {
    pub fn new(n: usize, a: usize, beta: usize) -> Result<Self, ConfigError> {
        Self::with_max_plies(n, a, beta, DEFAULT_MAX_PLIES)
    }

    pub fn with_max_plies(n: usize, a: usize, beta: usize, max_plies: u32) -> Result<Self, ConfigError> {
        let config = GameConfig { n, a, beta, max_plies };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.a < 1 {
            return Err(ConfigError::BaseTooSmall(self.a));
        }
        if self.n < 2 * self.a + 1 {
            return Err(ConfigError::BoardTooSmall { n: self.n, a: self.a });
        }
        if self.beta < 1 {
            return Err(ConfigError::NoPawns);
        }
        if self.max_plies < 1 {
            return Err(ConfigError::NoPlies);
        }
        Ok(())
    }

    /// Same board and pawn count; the ply cap may differ.
    pub fn same_board(&self, other: &GameConfig) -> bool {
        self.n == other.n && self.a == other.a && self.beta == other.beta
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    /// Number of cells outside both bases: `n² − 2a²`.
    pub fn open_cell_count(&self) -> usize {
        self.n * self.n - 2 * self.a * self.a
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.col < self.n && c.row < self.n
    }

    pub fn index(&self, c: Coord) -> usize {
        c.row * self.n + c.col
    }

    pub fn coord(&self, index: usize) -> Coord {
        Coord::new(index % self.n, index / self.n)
    }

    pub fn in_base(&self, color: Color, c: Coord) -> bool {
        match color {
            Color::White => c.col < self.a && c.row < self.a,
            Color::Black => c.col >= self.n - self.a && c.row >= self.n - self.a,
        }
    }

    pub fn is_base_cell(&self, c: Coord) -> bool {
        self.in_base(Color::White, c) || self.in_base(Color::Black, c)
    }

    /// Chebyshev distance from `color`'s base region (0 inside the base).
    pub fn distance_from_base(&self, color: Color, c: Coord) -> usize {
        let (col, row) = match color {
            Color::White => (c.col, c.row),
            Color::Black => (self.n - 1 - c.col, self.n - 1 - c.row),
        };
        let dx = col.saturating_sub(self.a - 1);
        let dy = row.saturating_sub(self.a - 1);
        dx.max(dy)
    }

    /// Non-base cells orthogonally adjacent to `color`'s base, row-major.
    pub fn exit_cells(&self, color: Color) -> Vec<Coord> {
        let a = self.a;
        let mut cells: Vec<Coord> = match color {
            Color::White => (0..a)
                .map(|r| Coord::new(a, r))
                .chain((0..a).map(|c| Coord::new(c, a)))
                .collect(),
            Color::Black => {
                let edge = self.n - a;
                (edge..self.n)
                    .map(|r| Coord::new(edge - 1, r))
                    .chain((edge..self.n).map(|c| Coord::new(c, edge - 1)))
                    .collect()
            }
        };
        cells.sort();
        cells
    }

    fn is_exit_cell(&self, color: Color, c: Coord) -> bool {
        !self.is_base_cell(c) && self.neighbors(c).any(|nb| self.in_base(color, nb))
    }

    /// Orthogonal neighbours in row-major order.
    pub fn neighbors(&self, c: Coord) -> impl Iterator<Item = Coord> {
        let n = self.n;
        let mut out = [None; 4];
        if c.row > 0 {
            out[0] = Some(Coord::new(c.col, c.row - 1));
        }
        if c.col > 0 {
            out[1] = Some(Coord::new(c.col - 1, c.row));
        }
        if c.col + 1 < n {
            out[2] = Some(Coord::new(c.col + 1, c.row));
        }
        if c.row + 1 < n {
            out[3] = Some(Coord::new(c.col, c.row + 1));
        }
        out.into_iter().flatten()
    }
}

/// Board coordinate. Ordered row-major (row first, then column).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub col: usize,
    pub row: usize,
}

impl Coord {
    pub const fn new(col: usize, row: usize) -> Self {
        Coord { col, row }
    }

    pub fn is_orthogonal_neighbor(&self, other: Coord) -> bool {
        self.col.abs_diff(other.col) + self.row.abs_diff(other.row) == 1
    }
}

impl Ord for Coord {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for Coord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

/// A single move. The derived order (exits first, then steps by row-major
/// origin and destination) is the canonical move ordering used by search
/// tie-breaking and replay.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    /// A pawn leaves the home base.
    Exit { to: Coord },
    /// A pawn on the board moves to an orthogonal neighbour.
    Step { from: Coord, to: Coord },
}

impl Move {
    pub fn to(&self) -> Coord {
        match *self {
            Move::Exit { to } | Move::Step { to, .. } => to,
        }
    }

    pub fn from(&self) -> Option<Coord> {
        match *self {
            Move::Exit { .. } => None,
            Move::Step { from, .. } => Some(from),
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Exit { to } => write!(f, "base->{to}"),
            Move::Step { from, to } => write!(f, "{from}->{to}"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameStatus {
    Ongoing,
    WhiteWon,
    BlackWon,
    /// The ply cap was reached.
    Draw,
}

impl GameStatus {
    pub fn is_terminal(self) -> bool {
        self != GameStatus::Ongoing
    }

    pub fn winner(self) -> Option<Color> {
        match self {
            GameStatus::WhiteWon => Some(Color::White),
            GameStatus::BlackWon => Some(Color::Black),
            _ => None,
        }
    }

    pub fn won_by(color: Color) -> GameStatus {
        match color {
            Color::White => GameStatus::WhiteWon,
            Color::Black => GameStatus::BlackWon,
        }
    }
}

/// Side effects of one applied move.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveEvents {
    pub white_pawns_lost: usize,
    pub black_pawns_lost: usize,
    pub entered_enemy_base: bool,
}

impl MoveEvents {
    pub fn lost(&self, color: Color) -> usize {
        match color {
            Color::White => self.white_pawns_lost,
            Color::Black => self.black_pawns_lost,
        }
    }

    fn add_lost(&mut self, color: Color, count: usize) {
        match color {
            Color::White => self.white_pawns_lost += count,
            Color::Black => self.black_pawns_lost += count,
        }
    }
}

/// The rule a rejected move violates.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IllegalMove {
    #[error("destination is occupied")]
    OccupiedDestination,
    #[error("move would decrease the pawn's distance from its base")]
    DistanceDecrease,
    #[error("destination is not adjacent")]
    NotAdjacent,
    #[error("pawn belongs to the player not on move")]
    WrongTurn,
    #[error("the game is over")]
    GameOver,
    #[error("no pawn on the origin square")]
    NoPawn,
    #[error("no pawns left in the home base")]
    BaseEmpty,
    #[error("coordinate is off the board")]
    OffBoard,
}

impl IllegalMove {
    /// Stable machine-readable rule code.
    pub fn code(self) -> &'static str {
        match self {
            IllegalMove::OccupiedDestination => "occupied_destination",
            IllegalMove::DistanceDecrease => "distance_decrease",
            IllegalMove::NotAdjacent => "not_adjacent",
            IllegalMove::WrongTurn => "wrong_turn",
            IllegalMove::GameOver => "game_over",
            IllegalMove::NoPawn => "no_pawn",
            IllegalMove::BaseEmpty => "base_empty",
            IllegalMove::OffBoard => "off_board",
        }
    }

    pub const ALL: [IllegalMove; 8] = [
        IllegalMove::OccupiedDestination,
        IllegalMove::DistanceDecrease,
        IllegalMove::NotAdjacent,
        IllegalMove::WrongTurn,
        IllegalMove::GameOver,
        IllegalMove::NoPawn,
        IllegalMove::BaseEmpty,
        IllegalMove::OffBoard,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoardState {
    pub config: GameConfig,
    /// Row-major occupancy over the full grid; base cells are always `None`.
    cells: Vec<Option<Color>>,
    base: [usize; 2],
    on_board: [usize; 2],
    pub to_move: Color,
    pub ply: u32,
    pub status: GameStatus,
    /// Set when a pawn has entered the enemy base.
    pub breach: Option<Color>,
}

impl BoardState {
    pub fn initial(config: GameConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(BoardState {
            config,
            cells: vec![None; config.cell_count()],
            base: [config.beta; 2],
            on_board: [0; 2],
            to_move: Color::White,
            ply: 0,
            status: GameStatus::Ongoing,
            breach: None,
        })
    }

    /// Builds an arbitrary ongoing position, mainly for fixtures.
    ///
    /// Pawns on base cells are rejected, as are pawn counts above β.
    pub fn from_parts(
        config: GameConfig,
        pawns: &[(Coord, Color)],
        white_base: usize,
        black_base: usize,
        to_move: Color,
    ) -> Result<Self, PositionError> {
        config.validate()?;
        let mut state = BoardState {
            config,
            cells: vec![None; config.cell_count()],
            base: [white_base, black_base],
            on_board: [0; 2],
            to_move,
            ply: 0,
            status: GameStatus::Ongoing,
            breach: None,
        };
        for &(c, color) in pawns {
            if !config.contains(c) {
                return Err(PositionError::OffBoard(c));
            }
            if config.is_base_cell(c) {
                return Err(PositionError::PawnOnBase(c));
            }
            let idx = config.index(c);
            if state.cells[idx].is_some() {
                return Err(PositionError::DoubleOccupancy(c));
            }
            state.cells[idx] = Some(color);
            state.on_board[color.index()] += 1;
        }
        for color in Color::BOTH {
            if state.pawns(color) > config.beta {
                return Err(PositionError::TooManyPawns(color));
            }
        }
        Ok(state)
    }

    pub fn at(&self, c: Coord) -> Option<Color> {
        if self.config.contains(c) {
            self.cells[self.config.index(c)]
        } else {
            None
        }
    }

    pub fn base_count(&self, color: Color) -> usize {
        self.base[color.index()]
    }

    pub fn on_board(&self, color: Color) -> usize {
        self.on_board[color.index()]
    }

    /// Pawns still in play, including one that entered the enemy base.
    pub fn pawns(&self, color: Color) -> usize {
        self.base[color.index()] + self.on_board[color.index()] + usize::from(self.breach == Some(color))
    }

    pub fn is_terminal(&self) -> bool {
        self.status.is_terminal()
    }

    /// Occupied cells in row-major order.
    pub fn pawn_cells(&self) -> impl Iterator<Item = (Coord, Color)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, cell)| cell.map(|color| (self.config.coord(i), color)))
    }

    fn is_free(&self, c: Coord) -> bool {
        !self.config.is_base_cell(c) && self.cells[self.config.index(c)].is_none()
    }

    fn step_allowed(&self, color: Color, from: Coord, to: Coord) -> bool {
        let cfg = &self.config;
        if cfg.in_base(color.opponent(), to) {
            return true;
        }
        self.is_free(to) && cfg.distance_from_base(color, to) >= cfg.distance_from_base(color, from)
    }

    fn pawn_can_move(&self, color: Color, from: Coord) -> bool {
        self.config.neighbors(from).any(|to| self.step_allowed(color, from, to))
    }

    fn base_sealed(&self, color: Color) -> bool {
        self.config.exit_cells(color).into_iter().all(|c| !self.is_free(c))
    }

    /// Point reflection through the board centre with colours swapped.
    pub fn mirrored(&self) -> BoardState {
        let cfg = self.config;
        let mut cells = vec![None; cfg.cell_count()];
        for (c, color) in self.pawn_cells() {
            let m = Coord::new(cfg.n - 1 - c.col, cfg.n - 1 - c.row);
            cells[cfg.index(m)] = Some(color.opponent());
        }
        BoardState {
            config: cfg,
            cells,
            base: [self.base[1], self.base[0]],
            on_board: [self.on_board[1], self.on_board[0]],
            to_move: self.to_move.opponent(),
            ply: self.ply,
            status: match self.status {
                GameStatus::WhiteWon => GameStatus::BlackWon,
                GameStatus::BlackWon => GameStatus::WhiteWon,
                s => s,
            },
            breach: self.breach.map(Color::opponent),
        }
    }

    /// Runs only the trapped-pawn sweep and reports what it would remove.
    pub fn trapped_pawns(&self) -> Vec<Coord> {
        self.pawn_cells()
            .filter(|&(c, color)| !self.pawn_can_move(color, c))
            .map(|(c, _)| c)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PositionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("coordinate {0} is off the board")]
    OffBoard(Coord),
    #[error("pawn placed on base cell {0}")]
    PawnOnBase(Coord),
    #[error("two pawns on {0}")]
    DoubleOccupancy(Coord),
    #[error("{0} has more pawns than the configuration allows")]
    TooManyPawns(Color),
}

pub fn initial_state(config: GameConfig) -> Result<BoardState, ConfigError> {
    BoardState::initial(config)
}

pub fn distance_from_base(config: &GameConfig, color: Color, cell: Coord) -> usize {
    config.distance_from_base(color, cell)
}

/// All legal moves for the side to move, in canonical order.
pub fn legal_moves(state: &BoardState) -> Vec<Move> {
    let mut moves = Vec::new();
    if state.is_terminal() {
        return moves;
    }
    let color = state.to_move;
    let cfg = &state.config;
    if state.base_count(color) > 0 {
        moves.extend(
            cfg.exit_cells(color)
                .into_iter()
                .filter(|&c| state.is_free(c))
                .map(|to| Move::Exit { to }),
        );
    }
    for (from, owner) in state.pawn_cells() {
        if owner != color {
            continue;
        }
        for to in cfg.neighbors(from) {
            if state.step_allowed(color, from, to) {
                moves.push(Move::Step { from, to });
            }
        }
    }
    moves
}

fn validate(state: &BoardState, mv: Move) -> Result<bool, IllegalMove> {
    if state.is_terminal() {
        return Err(IllegalMove::GameOver);
    }
    let cfg = &state.config;
    let color = state.to_move;
    match mv {
        Move::Exit { to } => {
            if !cfg.contains(to) {
                return Err(IllegalMove::OffBoard);
            }
            if state.base_count(color) == 0 {
                return Err(IllegalMove::BaseEmpty);
            }
            if !cfg.is_exit_cell(color, to) {
                return Err(IllegalMove::NotAdjacent);
            }
            if !state.is_free(to) {
                return Err(IllegalMove::OccupiedDestination);
            }
            Ok(false)
        }
        Move::Step { from, to } => {
            if !cfg.contains(from) || !cfg.contains(to) {
                return Err(IllegalMove::OffBoard);
            }
            match state.at(from) {
                None => return Err(IllegalMove::NoPawn),
                Some(owner) if owner != color => return Err(IllegalMove::WrongTurn),
                Some(_) => {}
            }
            if !from.is_orthogonal_neighbor(to) {
                return Err(IllegalMove::NotAdjacent);
            }
            if cfg.in_base(color.opponent(), to) {
                return Ok(true);
            }
            if cfg.in_base(color, to) {
                return Err(IllegalMove::DistanceDecrease);
            }
            if !state.is_free(to) {
                return Err(IllegalMove::OccupiedDestination);
            }
            if cfg.distance_from_base(color, to) < cfg.distance_from_base(color, from) {
                return Err(IllegalMove::DistanceDecrease);
            }
            Ok(false)
        }
    }
}

/// Applies `mv` for the side to move and runs post-move cleanup.
///
/// Cleanup order: simultaneous removal of every trapped on-board pawn (both
/// colours), then the base-seal rule, then win/loss/draw evaluation. If both
/// sides run out of pawns on the same move, the mover wins.
pub fn apply_move(state: &BoardState, mv: Move) -> Result<(BoardState, MoveEvents), IllegalMove> {
    let wins = validate(state, mv)?;
    let cfg = state.config;
    let mover = state.to_move;
    let mut next = state.clone();
    let mut events = MoveEvents::default();
    next.ply += 1;
    next.to_move = mover.opponent();

    match mv {
        Move::Exit { to } => {
            next.base[mover.index()] -= 1;
            next.cells[cfg.index(to)] = Some(mover);
            next.on_board[mover.index()] += 1;
        }
        Move::Step { from, to } => {
            next.cells[cfg.index(from)] = None;
            if wins {
                next.on_board[mover.index()] -= 1;
                next.breach = Some(mover);
                next.status = GameStatus::won_by(mover);
                events.entered_enemy_base = true;
                return Ok((next, events));
            }
            next.cells[cfg.index(to)] = Some(mover);
        }
    }

    for c in next.trapped_pawns() {
        let idx = cfg.index(c);
        if let Some(color) = next.cells[idx].take() {
            next.on_board[color.index()] -= 1;
            events.add_lost(color, 1);
        }
    }
    for color in Color::BOTH {
        let in_base = next.base[color.index()];
        if in_base > 0 && next.base_sealed(color) {
            next.base[color.index()] = 0;
            events.add_lost(color, in_base);
        }
    }

    let mover_out = next.pawns(mover) == 0;
    let other_out = next.pawns(mover.opponent()) == 0;
    next.status = if other_out {
        GameStatus::won_by(mover)
    } else if mover_out {
        GameStatus::won_by(mover.opponent())
    } else if next.ply >= cfg.max_plies {
        GameStatus::Draw
    } else {
        GameStatus::Ongoing
    };
    Ok((next, events))
}
