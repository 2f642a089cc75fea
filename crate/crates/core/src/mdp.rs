//! Deterministic 8-connected grid-world MDP.
//!
//! Coordinates are `(x, y)` with `x` growing rightward and `y` growing
//! downward, so `N` is `(0, -1)`. Diagonal moves may not cut corners: a
//! diagonal is unavailable if either adjacent cardinal cell is blocked.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Largest number of candidate goals a map may carry (digits `0`-`9`).
pub const MAX_GOALS: usize = 10;

/// Largest accepted width or height.
pub const MAX_DIM: usize = 1024;

/// Default terminal reward for entering a goal cell.
pub const DEFAULT_GOAL_REWARD: f64 = 10_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("map has zero width or height")]
    EmptyMap,
    #[error("map dimensions {width}x{height} exceed the {MAX_DIM} cell limit")]
    TooLarge { width: usize, height: usize },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: unexpected character {ch:?}")]
    BadChar { line: usize, column: usize, ch: char },
    #[error("map has no start cell")]
    MissingStart,
    #[error("map has more than one start cell")]
    DuplicateStart,
    #[error("goal digit {0} appears more than once")]
    DuplicateGoal(usize),
    #[error("goal digits are not contiguous from 0: digit {0} is missing")]
    GoalGap(usize),
    #[error("map needs at least 2 goals, found {0}")]
    TooFewGoals(usize),
    #[error("map supports at most {MAX_GOALS} goals, found {0}")]
    TooManyGoals(usize),
    #[error("cell {0} is outside the map")]
    OutOfBounds(Cell),
    #[error("cell {0} is blocked")]
    BlockedCell(Cell),
    #[error("goal {0} coincides with the start or another goal")]
    OverlappingGoal(Cell),
    #[error("state {0} has no available actions")]
    IsolatedState(Cell),
    #[error("action {action} is not available at {state}")]
    InvalidAction { state: Cell, action: Action },
    #[error("trace breaks at pair {index}: expected state {expected}, found {found}")]
    BrokenTrace { index: usize, expected: Cell, found: Cell },
    #[error("invalid reward function: {0}")]
    InvalidReward(&'static str),
    #[error("true reward index {index} out of range for {count} reward functions")]
    BadTrueIndex { index: usize, count: usize },
    #[error("discount factor {0} not in (0, 1]")]
    BadGamma(f64),
    #[error("reward function {index} targets {found}, but map goal {index} is {expected}")]
    RewardGoalMismatch { index: usize, expected: Cell, found: Cell },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    /// Shortest 8-connected distance on an empty grid (cardinal 1, diagonal √2).
    pub fn octile_distance(self, other: Cell) -> f64 {
        let dx = self.x.abs_diff(other.x) as f64;
        let dy = self.y.abs_diff(other.y) as f64;
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        hi - lo + lo * std::f64::consts::SQRT_2
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<(usize, usize)> for Cell {
    fn from((x, y): (usize, usize)) -> Self {
        Cell { x, y }
    }
}

/// The eight compass moves, in the canonical order used for every tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::N,
        Action::NE,
        Action::E,
        Action::SE,
        Action::S,
        Action::SW,
        Action::W,
        Action::NW,
    ];

    /// Position in the canonical order.
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn displacement(self) -> (isize, isize) {
        match self {
            Action::N => (0, -1),
            Action::NE => (1, -1),
            Action::E => (1, 0),
            Action::SE => (1, 1),
            Action::S => (0, 1),
            Action::SW => (-1, 1),
            Action::W => (-1, 0),
            Action::NW => (-1, -1),
        }
    }

    pub const fn is_diagonal(self) -> bool {
        matches!(self, Action::NE | Action::SE | Action::SW | Action::NW)
    }

    pub fn cost(self) -> f64 {
        if self.is_diagonal() {
            std::f64::consts::SQRT_2
        } else {
            1.0
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Action::N => "N",
            Action::NE => "NE",
            Action::E => "E",
            Action::SE => "SE",
            Action::S => "S",
            Action::SW => "SW",
            Action::W => "W",
            Action::NW => "NW",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown action name {0:?}")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAction(s.to_string()))
    }
}

/// Occupancy grid with a start cell and an ordered list of candidate goals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    start: Cell,
    goals: Vec<Cell>,
}

impl GridMap {
    pub fn new(
        width: usize,
        height: usize,
        blocked: impl IntoIterator<Item = Cell>,
        start: Cell,
        goals: Vec<Cell>,
    ) -> Result<Self, MdpError> {
        if width == 0 || height == 0 {
            return Err(MdpError::EmptyMap);
        }
        if width > MAX_DIM || height > MAX_DIM {
            return Err(MdpError::TooLarge { width, height });
        }
        let mut grid = vec![false; width * height];
        for c in blocked {
            if c.x >= width || c.y >= height {
                return Err(MdpError::OutOfBounds(c));
            }
            grid[c.y * width + c.x] = true;
        }
        Self::from_grid(width, height, grid, start, goals)
    }

    fn from_grid(
        width: usize,
        height: usize,
        blocked: Vec<bool>,
        start: Cell,
        goals: Vec<Cell>,
    ) -> Result<Self, MdpError> {
        let map = GridMap { width, height, blocked, start, goals };
        if map.goals.len() < 2 {
            return Err(MdpError::TooFewGoals(map.goals.len()));
        }
        if map.goals.len() > MAX_GOALS {
            return Err(MdpError::TooManyGoals(map.goals.len()));
        }
        for &c in std::iter::once(&map.start).chain(&map.goals) {
            if !map.in_bounds(c) {
                return Err(MdpError::OutOfBounds(c));
            }
            if map.is_blocked(c) {
                return Err(MdpError::BlockedCell(c));
            }
        }
        let mut seen = BTreeSet::from([map.start]);
        for &g in &map.goals {
            if !seen.insert(g) {
                return Err(MdpError::OverlappingGoal(g));
            }
        }
        Ok(map)
    }

    /// Parses the text format: `#` blocked, `.` free, `S` start, `0`-`9` goals.
    ///
    /// Trailing blank lines and `\r` line endings are tolerated.
    pub fn parse(text: &str) -> Result<Self, MdpError> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .collect();
        let end = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
        let lines = &lines[..end];
        let height = lines.len();
        let width = lines.first().map_or(0, |l| l.chars().count());
        if width == 0 || height == 0 {
            return Err(MdpError::EmptyMap);
        }
        if width > MAX_DIM || height > MAX_DIM {
            return Err(MdpError::TooLarge { width, height });
        }

        let mut blocked = vec![false; width * height];
        let mut start = None;
        let mut digits: [Option<Cell>; MAX_GOALS] = [None; MAX_GOALS];
        for (y, line) in lines.iter().enumerate() {
            let mut found = 0;
            for (x, ch) in line.chars().enumerate() {
                found += 1;
                if x >= width {
                    continue;
                }
                let cell = Cell::new(x, y);
                match ch {
                    '#' => blocked[y * width + x] = true,
                    '.' => {}
                    'S' => {
                        if start.replace(cell).is_some() {
                            return Err(MdpError::DuplicateStart);
                        }
                    }
                    '0'..='9' => {
                        let d = ch as usize - '0' as usize;
                        if digits[d].replace(cell).is_some() {
                            return Err(MdpError::DuplicateGoal(d));
                        }
                    }
                    _ => return Err(MdpError::BadChar { line: y + 1, column: x + 1, ch }),
                }
            }
            if found != width {
                return Err(MdpError::RaggedRow { line: y + 1, expected: width, found });
            }
        }

        let start = start.ok_or(MdpError::MissingStart)?;
        let count = digits.iter().rposition(Option::is_some).map_or(0, |i| i + 1);
        let mut goals = Vec::with_capacity(count);
        for (d, g) in digits[..count].iter().enumerate() {
            goals.push(g.ok_or(MdpError::GoalGap(d))?);
        }
        Self::from_grid(width, height, blocked, start, goals)
    }

    /// Renders back into the text format accepted by [`GridMap::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                let ch = if c == self.start {
                    'S'
                } else if let Some(i) = self.goal_index(c) {
                    char::from(b'0' + i as u8)
                } else if self.is_blocked(c) {
                    '#'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical text rendering, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goals(&self) -> &[Cell] {
        &self.goals
    }

    pub fn goal_index(&self, c: Cell) -> Option<usize> {
        self.goals.iter().position(|&g| g == c)
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.blocked[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_blocked(c)
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count())
            .filter(|&i| !self.blocked[i])
            .map(|i| self.cell_at(i))
    }

    fn offset(&self, c: Cell, dx: isize, dy: isize) -> Option<Cell> {
        let x = c.x.checked_add_signed(dx)?;
        let y = c.y.checked_add_signed(dy)?;
        let n = Cell::new(x, y);
        self.is_free(n).then_some(n)
    }

    /// Successor of `s` under `a`, or `None` when the move is unavailable.
    pub fn transition(&self, s: Cell, a: Action) -> Option<Cell> {
        if self.is_blocked(s) {
            return None;
        }
        let (dx, dy) = a.displacement();
        if a.is_diagonal() && (self.offset(s, dx, 0).is_none() || self.offset(s, 0, dy).is_none()) {
            return None;
        }
        self.offset(s, dx, dy)
    }

    /// Available actions at `s` in canonical order.
    pub fn available_actions(&self, s: Cell) -> Result<Vec<Action>, MdpError> {
        if self.is_blocked(s) {
            return Err(if self.in_bounds(s) {
                MdpError::BlockedCell(s)
            } else {
                MdpError::OutOfBounds(s)
            });
        }
        let actions: Vec<Action> = Action::ALL
            .into_iter()
            .filter(|&a| self.transition(s, a).is_some())
            .collect();
        if actions.is_empty() {
            return Err(MdpError::IsolatedState(s));
        }
        Ok(actions)
    }

    /// Free cells reachable from `from`, as a row-major membership mask.
    pub fn reachable_from(&self, from: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.cell_count()];
        if self.is_blocked(from) {
            return seen;
        }
        let mut stack = vec![from];
        seen[self.index(from)] = true;
        while let Some(c) = stack.pop() {
            for a in Action::ALL {
                if let Some(n) = self.transition(c, a) {
                    let i = self.index(n);
                    if !seen[i] {
                        seen[i] = true;
                        stack.push(n);
                    }
                }
            }
        }
        seen
    }
}

/// One candidate reward function: a terminal reward at `goal` plus per-action step costs.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction {
    goal: Cell,
    goal_reward: f64,
    step_costs: [f64; 8],
}

impl RewardFunction {
    /// Reward 10000 at `goal`, step cost −1 cardinal and −√2 diagonal.
    pub fn new(goal: Cell) -> Self {
        RewardFunction {
            goal,
            goal_reward: DEFAULT_GOAL_REWARD,
            step_costs: Action::ALL.map(|a| -a.cost()),
        }
    }

    pub fn with_goal_reward(mut self, goal_reward: f64) -> Result<Self, MdpError> {
        if !(goal_reward.is_finite() && goal_reward > 0.0) {
            return Err(MdpError::InvalidReward("goal reward must be positive and finite"));
        }
        self.goal_reward = goal_reward;
        Ok(self)
    }

    pub fn with_step_costs(mut self, step_costs: [f64; 8]) -> Result<Self, MdpError> {
        if step_costs.iter().any(|c| !(c.is_finite() && *c < 0.0)) {
            return Err(MdpError::InvalidReward("step costs must be negative and finite"));
        }
        self.step_costs = step_costs;
        Ok(self)
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn goal_reward(&self) -> f64 {
        self.goal_reward
    }

    pub fn step_cost(&self, a: Action) -> f64 {
        self.step_costs[a.index()]
    }

    /// Reward for the transition `s --a--> s_next`.
    pub fn reward(&self, _s: Cell, a: Action, s_next: Cell) -> f64 {
        let terminal = if s_next == self.goal { self.goal_reward } else { 0.0 };
        self.step_cost(a) + terminal
    }
}

/// The map, the candidate reward set, which of them is real, and the discount.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    map: GridMap,
    rewards: Vec<RewardFunction>,
    true_index: usize,
    gamma: f64,
}

impl Mdp {
    /// Default reward functions, one per map goal.
    pub fn new(map: GridMap, true_index: usize, gamma: f64) -> Result<Self, MdpError> {
        let rewards = map.goals().iter().map(|&g| RewardFunction::new(g)).collect();
        Self::with_rewards(map, rewards, true_index, gamma)
    }

    pub fn with_rewards(
        map: GridMap,
        rewards: Vec<RewardFunction>,
        true_index: usize,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(MdpError::BadGamma(gamma));
        }
        if rewards.len() != map.goals().len() {
            return Err(MdpError::InvalidReward("need exactly one reward function per goal"));
        }
        for (index, (rf, &g)) in rewards.iter().zip(map.goals()).enumerate() {
            if rf.goal() != g {
                return Err(MdpError::RewardGoalMismatch { index, expected: g, found: rf.goal() });
            }
        }
        if true_index >= rewards.len() {
            return Err(MdpError::BadTrueIndex { index: true_index, count: rewards.len() });
        }
        Ok(Mdp { map, rewards, true_index, gamma })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn rewards(&self) -> &[RewardFunction] {
        &self.rewards
    }

    pub fn true_index(&self) -> usize {
        self.true_index
    }

    pub fn true_reward(&self) -> &RewardFunction {
        &self.rewards[self.true_index]
    }

    pub fn true_goal(&self) -> Cell {
        self.rewards[self.true_index].goal()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Same map and rewards with a different real reward function.
    pub fn with_true_index(&self, true_index: usize) -> Result<Self, MdpError> {
        Self::with_rewards(self.map.clone(), self.rewards.clone(), true_index, self.gamma)
    }
}

/// Ordered `(state, action)` pairs, transition-consistent by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservationSequence {
    pairs: Vec<(Cell, Action)>,
    end: Option<Cell>,
}

impl ObservationSequence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates and collects `pairs` against `map`.
    pub fn from_pairs(
        map: &GridMap,
        pairs: impl IntoIterator<Item = (Cell, Action)>,
    ) -> Result<Self, MdpError> {
        let mut obs = Self::new();
        for (s, a) in pairs {
            obs.push(map, s, a)?;
        }
        Ok(obs)
    }

    /// Appends `(s, a)`; `s` must be where the trace currently ends.
    pub fn push(&mut self, map: &GridMap, s: Cell, a: Action) -> Result<Cell, MdpError> {
        if let Some(expected) = self.end {
            if expected != s {
                return Err(MdpError::BrokenTrace { index: self.pairs.len(), expected, found: s });
            }
        }
        let next = map
            .transition(s, a)
            .ok_or(MdpError::InvalidAction { state: s, action: a })?;
        self.pairs.push((s, a));
        self.end = Some(next);
        Ok(next)
    }

    /// Copy of `self` extended by one pair.
    pub fn extended(&self, map: &GridMap, s: Cell, a: Action) -> Result<Self, MdpError> {
        let mut next = self.clone();
        next.push(map, s, a)?;
        Ok(next)
    }

    pub fn pairs(&self) -> &[(Cell, Action)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn first(&self) -> Option<(Cell, Action)> {
        self.pairs.first().copied()
    }

    pub fn last(&self) -> Option<(Cell, Action)> {
        self.pairs.last().copied()
    }

    /// State reached after the last action.
    pub fn end_state(&self) -> Option<Cell> {
        self.end
    }

    /// The first `len` pairs.
    pub fn prefix(&self, map: &GridMap, len: usize) -> Self {
        let pairs = self.pairs[..len.min(self.pairs.len())].to_vec();
        let end = pairs.last().and_then(|&(s, a)| map.transition(s, a));
        ObservationSequence { pairs, end }
    }

    /// Visited cells: the first state followed by every successor.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = self.pairs.iter().map(|&(s, _)| s).collect();
        out.extend(self.end);
        out
    }

    /// Sum of move costs (1 cardinal, √2 diagonal).
    pub fn path_cost(&self) -> f64 {
        self.pairs.iter().map(|&(_, a)| a.cost()).sum()
    }
}
