//! Procedural map families.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kv::KeyValues;
use super::{HarnessError, Result};
use crate::mdp::{Cell, GridMap, MAX_DIM, MAX_GOALS};

const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutFamily {
    Empty,
    LargeObstacles,
    RandomDense,
    Archipelago,
    RoomsCorridors,
}

impl LayoutFamily {
    pub const ALL: [LayoutFamily; 5] = [
        LayoutFamily::Empty,
        LayoutFamily::LargeObstacles,
        LayoutFamily::RandomDense,
        LayoutFamily::Archipelago,
        LayoutFamily::RoomsCorridors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayoutFamily::Empty => "empty",
            LayoutFamily::LargeObstacles => "large-obstacles",
            LayoutFamily::RandomDense => "random-dense",
            LayoutFamily::Archipelago => "archipelago",
            LayoutFamily::RoomsCorridors => "rooms-corridors",
        }
    }
}

impl fmt::Display for LayoutFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayoutFamily {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        LayoutFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| HarnessError::bad_value("family", format!("unknown layout family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutSpec {
    pub family: LayoutFamily,
    pub width: usize,
    pub height: usize,
    /// Target blocked fraction before connectivity repair; ignored by `empty`
    /// and `rooms-corridors`.
    pub obstacle_density: f64,
    pub n_goals: usize,
    pub seed: u64,
}

impl LayoutSpec {
    pub fn new(family: LayoutFamily, width: usize, height: usize, n_goals: usize, seed: u64) -> Self {
        let obstacle_density = match family {
            LayoutFamily::Empty | LayoutFamily::RoomsCorridors => 0.0,
            LayoutFamily::LargeObstacles => 0.2,
            LayoutFamily::RandomDense => 0.3,
            LayoutFamily::Archipelago => 0.15,
        };
        LayoutSpec { family, width, height, obstacle_density, n_goals, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 5 || self.height < 5 || self.width > MAX_DIM || self.height > MAX_DIM {
            return Err(HarnessError::bad_value("width", format!("layout must be between 5 and {MAX_DIM} cells per side")));
        }
        if !(0.0..1.0).contains(&self.obstacle_density) {
            return Err(HarnessError::bad_value("density", "must lie in [0, 1)"));
        }
        if !(2..=MAX_GOALS).contains(&self.n_goals) {
            return Err(HarnessError::bad_value("goals", format!("must be between 2 and {MAX_GOALS}")));
        }
        Ok(())
    }

    /// Reads `family`, `width`, `height`, `goals`, and optional `density`, `seed`.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(&["family", "width", "height", "density", "goals", "seed"])?;
        let family: LayoutFamily = kv.require("family")?.parse()?;
        let width = kv.parsed("width")?.ok_or(HarnessError::MissingKey("width"))?;
        let height = kv.parsed("height")?.ok_or(HarnessError::MissingKey("height"))?;
        let n_goals = kv.parsed("goals")?.ok_or(HarnessError::MissingKey("goals"))?;
        let mut spec = LayoutSpec::new(family, width, height, n_goals, kv.parsed_or("seed", 0)?);
        if let Some(d) = kv.parsed("density")? {
            spec.obstacle_density = d;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn label(&self) -> String {
        format!("{}-{}x{}-s{}", self.family, self.width, self.height, self.seed)
    }
}

/// A generated map plus bookkeeping from the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedLayout {
    pub map: GridMap,
    /// Blocked fraction of all cells before unreachable pockets were filled.
    pub raw_blocked_fraction: f64,
    pub attempts: usize,
}

pub fn generate_layout(spec: &LayoutSpec) -> Result<GridMap> {
    generate_layout_detailed(spec).map(|g| g.map)
}

/// Generates a connected map: obstacles per family, pockets outside the
/// largest free region filled in, goals spread apart, and the start placed
/// far from the goals' centroid.
pub fn generate_layout_detailed(spec: &LayoutSpec) -> Result<GeneratedLayout> {
    spec.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(attempt as u64);
        let mut grid = Grid::new(spec.width, spec.height);
        match spec.family {
            LayoutFamily::Empty => {}
            LayoutFamily::LargeObstacles => large_obstacles(&mut grid, spec.obstacle_density, &mut rng),
            LayoutFamily::RandomDense => random_dense(&mut grid, spec.obstacle_density, &mut rng),
            LayoutFamily::Archipelago => archipelago(&mut grid, spec.obstacle_density, &mut rng),
            LayoutFamily::RoomsCorridors => rooms_corridors(&mut grid, &mut rng),
        }
        let raw_blocked_fraction = grid.blocked_count() as f64 / (spec.width * spec.height) as f64;
        let free = grid.keep_largest_region();
        if free.len() < 4 * (spec.n_goals + 1) {
            continue;
        }
        if let Some(map) = place_endpoints(&grid, &free, spec.n_goals, &mut rng) {
            return Ok(GeneratedLayout { map, raw_blocked_fraction, attempts: attempt + 1 });
        }
    }
    Err(HarnessError::LayoutFailed { seed: spec.seed, attempts: MAX_ATTEMPTS })
}

struct Grid {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl Grid {
    fn new(width: usize, height: usize) -> Self {
        Grid { width, height, blocked: vec![false; width * height] }
    }

    fn block(&mut self, x: usize, y: usize) {
        if x < self.width && y < self.height {
            self.blocked[y * self.width + x] = true;
        }
    }

    fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    fn free(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && !self.blocked[y as usize * self.width + x as usize]
    }

    /// Labels 8-connected free regions (no corner cutting), blocks all but the
    /// largest and returns its cells in row-major order.
    fn keep_largest_region(&mut self) -> Vec<Cell> {
        let n = self.width * self.height;
        let mut label = vec![usize::MAX; n];
        let mut best: (usize, usize) = (0, usize::MAX);
        let mut next_label = 0;
        for start in 0..n {
            if self.blocked[start] || label[start] != usize::MAX {
                continue;
            }
            let mut size = 0;
            let mut stack = vec![start];
            label[start] = next_label;
            while let Some(i) = stack.pop() {
                size += 1;
                let (x, y) = ((i % self.width) as isize, (i / self.width) as isize);
                for (dx, dy) in crate::mdp::Action::ALL.map(|a| a.displacement()) {
                    let (nx, ny) = (x + dx, y + dy);
                    if !self.free(nx, ny) {
                        continue;
                    }
                    if dx != 0 && dy != 0 && !(self.free(x + dx, y) && self.free(x, y + dy)) {
                        continue;
                    }
                    let j = ny as usize * self.width + nx as usize;
                    if label[j] == usize::MAX {
                        label[j] = next_label;
                        stack.push(j);
                    }
                }
            }
            if size > best.0 {
                best = (size, next_label);
            }
            next_label += 1;
        }
        let mut cells = Vec::with_capacity(best.0);
        for i in 0..n {
            if self.blocked[i] {
                continue;
            }
            if label[i] == best.1 {
                cells.push(Cell::new(i % self.width, i / self.width));
            } else {
                self.blocked[i] = true;
            }
        }
        cells
    }
}

fn target_cells(grid: &Grid, density: f64) -> usize {
    (density * (grid.width * grid.height) as f64).round() as usize
}

fn random_dense(grid: &mut Grid, density: f64, rng: &mut ChaCha8Rng) {
    let mut order: Vec<usize> = (0..grid.blocked.len()).collect();
    order.shuffle(rng);
    for &i in &order[..target_cells(grid, density)] {
        grid.blocked[i] = true;
    }
}

fn large_obstacles(grid: &mut Grid, density: f64, rng: &mut ChaCha8Rng) {
    let target = target_cells(grid, density);
    let (w, h) = (grid.width, grid.height);
    let mut guard = 0;
    while grid.blocked_count() < target && guard < 1000 {
        guard += 1;
        let rw = rng.gen_range((w / 8).max(2)..=(w / 3).max(3));
        let rh = rng.gen_range((h / 8).max(2)..=(h / 3).max(3));
        let x0 = rng.gen_range(0..w.saturating_sub(rw).max(1));
        let y0 = rng.gen_range(0..h.saturating_sub(rh).max(1));
        for y in y0..(y0 + rh).min(h) {
            for x in x0..(x0 + rw).min(w) {
                grid.block(x, y);
            }
        }
    }
}

fn archipelago(grid: &mut Grid, density: f64, rng: &mut ChaCha8Rng) {
    let target = target_cells(grid, density);
    let islands = rng.gen_range(3..=5);
    let per_island = target / islands;
    let (w, h) = (grid.width as isize, grid.height as isize);
    for _ in 0..islands {
        // grow a blob by random frontier expansion
        let seed = (rng.gen_range(0..w), rng.gen_range(0..h));
        let mut frontier = vec![seed];
        let mut grown = 0;
        while grown < per_island && !frontier.is_empty() {
            let k = rng.gen_range(0..frontier.len());
            let (x, y) = frontier.swap_remove(k);
            if !grid.free(x, y) {
                continue;
            }
            grid.block(x as usize, y as usize);
            grown += 1;
            for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
                if grid.free(x + dx, y + dy) {
                    frontier.push((x + dx, y + dy));
                }
            }
        }
    }
}

fn rooms_corridors(grid: &mut Grid, rng: &mut ChaCha8Rng) {
    let (w, h) = (grid.width, grid.height);
    let room = rng.gen_range(5..=8).min(w / 2).min(h / 2).max(3);
    // interior walls every `room` cells, each wall segment with one doorway
    let walls_x: Vec<usize> = (room..w - 1).step_by(room).collect();
    let walls_y: Vec<usize> = (room..h - 1).step_by(room).collect();
    for &x in &walls_x {
        for y in 0..h {
            grid.block(x, y);
        }
    }
    for &y in &walls_y {
        for x in 0..w {
            grid.block(x, y);
        }
    }
    let mut bounds_y = vec![0];
    bounds_y.extend(walls_y.iter().map(|y| y + 1));
    let mut ends_y: Vec<usize> = walls_y.clone();
    ends_y.push(h);
    let mut bounds_x = vec![0];
    bounds_x.extend(walls_x.iter().map(|x| x + 1));
    let mut ends_x: Vec<usize> = walls_x.clone();
    ends_x.push(w);

    let open = |grid: &mut Grid, x: usize, y: usize| grid.blocked[y * w + x] = false;
    for &x in &walls_x {
        for (&lo, &hi) in bounds_y.iter().zip(&ends_y) {
            if hi > lo {
                let door = rng.gen_range(lo..hi);
                open(grid, x, door);
                if hi - lo > 3 && rng.gen_bool(0.5) {
                    open(grid, x, (door + 1).min(hi - 1));
                }
            }
        }
    }
    for &y in &walls_y {
        for (&lo, &hi) in bounds_x.iter().zip(&ends_x) {
            if hi > lo {
                let door = rng.gen_range(lo..hi);
                open(grid, door, y);
                if hi - lo > 3 && rng.gen_bool(0.5) {
                    open(grid, (door + 1).min(hi - 1), y);
                }
            }
        }
    }
}

/// Picks well-separated goals and a start far from their centroid.
fn place_endpoints(grid: &Grid, free: &[Cell], n_goals: usize, rng: &mut ChaCha8Rng) -> Option<GridMap> {
    let span = grid.width.max(grid.height) as f64;
    let mut separation = span / 3.0;
    let mut goals: Vec<Cell> = Vec::new();
    while separation >= 1.0 {
        goals.clear();
        let mut order = free.to_vec();
        order.shuffle(rng);
        for c in order {
            if goals.iter().all(|g| g.octile_distance(c) >= separation) {
                goals.push(c);
                if goals.len() == n_goals {
                    break;
                }
            }
        }
        if goals.len() == n_goals {
            break;
        }
        separation *= 0.75;
    }
    if goals.len() != n_goals {
        return None;
    }

    let cx = goals.iter().map(|g| g.x as f64).sum::<f64>() / n_goals as f64;
    let cy = goals.iter().map(|g| g.y as f64).sum::<f64>() / n_goals as f64;
    let dist = |c: &Cell| {
        let (dx, dy) = ((c.x as f64 - cx).abs(), (c.y as f64 - cy).abs());
        dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
    };
    let nearest_goal = |c: &Cell| goals.iter().map(|g| g.octile_distance(*c)).fold(f64::INFINITY, f64::min);
    let candidates: Vec<&Cell> = free.iter().filter(|c| !goals.contains(c) && nearest_goal(c) >= 2.0).collect();
    let far = candidates.iter().map(|c| dist(c)).fold(0.0, f64::max);
    let pool: Vec<Cell> = candidates.into_iter().filter(|c| dist(c) >= 0.9 * far).copied().collect();
    let start = *pool.choose(rng)?;

    let free_set: std::collections::HashSet<Cell> = free.iter().copied().collect();
    let blocked = (0..grid.width * grid.height)
        .map(|i| Cell::new(i % grid.width, i / grid.width))
        .filter(|c| !free_set.contains(c));
    GridMap::new(grid.width, grid.height, blocked, start, goals).ok()
}
