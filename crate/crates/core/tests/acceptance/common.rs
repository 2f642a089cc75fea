#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use deceptive_mdp::harness::{generate_layout, LayoutFamily, LayoutSpec};
use deceptive_mdp::solver::train_all;
use deceptive_mdp::{Cell, GridMap, Mdp, QTable, SolverConfig};

/// Shortest 8-connected path cost to `goal` from every cell, computed from
/// the map's text alone. Diagonals need both adjacent cardinals open.
/// Unreachable or blocked cells get `None`.
pub fn octile_dijkstra(map: &GridMap, goal: Cell) -> Vec<Option<f64>> {
    let rows: Vec<Vec<bool>> = map.to_text().lines().map(|l| l.chars().map(|c| c != '#').collect()).collect();
    let (h, w) = (rows.len() as i64, rows[0].len() as i64);
    let open = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && rows[y as usize][x as usize];
    let mut dist = vec![None; (w * h) as usize];

    #[derive(PartialEq)]
    struct Item(f64, i64, i64);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0)
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Item(0.0, goal.x as i64, goal.y as i64));
    while let Some(Item(d, x, y)) = heap.pop() {
        let i = (y * w + x) as usize;
        if dist[i].is_some() {
            continue;
        }
        dist[i] = Some(d);
        // moves are symmetric, so expanding backwards from the goal is fine
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if (dx, dy) == (0, 0) || !open(x + dx, y + dy) {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal && !(open(x + dx, y) && open(x, y + dy)) {
                    continue;
                }
                let step = if diagonal { 2f64.sqrt() } else { 1.0 };
                heap.push(Item(d + step, x + dx, y + dy));
            }
        }
    }
    dist
}

/// Twenty generated maps no larger than 20x20, four per family.
pub fn oracle_maps() -> Vec<(String, GridMap)> {
    let mut out = Vec::new();
    for (f, family) in LayoutFamily::ALL.into_iter().enumerate() {
        for k in 0..4u64 {
            let w = 10 + ((f as usize * 3 + k as usize * 5) % 11);
            let h = 10 + ((f as usize * 7 + k as usize * 3) % 11);
            let spec = LayoutSpec::new(family, w, h, 2 + (k as usize % 3), 100 + k);
            out.push((spec.label(), generate_layout(&spec).unwrap()));
        }
    }
    out
}

pub fn trained(map: &GridMap, true_index: usize) -> (Mdp, Vec<QTable>) {
    let mdp = Mdp::new(map.clone(), true_index, 1.0).unwrap();
    let qs = train_all(&mdp, &SolverConfig::default()).unwrap();
    (mdp, qs)
}

pub fn small_map(family: usize, width: usize, height: usize, goals: usize, seed: u64) -> GridMap {
    let spec = LayoutSpec::new(LayoutFamily::ALL[family % 5], width, height, goals, seed);
    generate_layout(&spec).unwrap()
}

/// The ten-map, three-goal desk sweep used by the acceptance target.
pub const DESK_SWEEP: &str = "\
generate = empty, large-obstacles, random-dense, archipelago, rooms-corridors
instances = 2
width = 25
height = 25
goals = 3
seed = 1
agents = honest, ambiguity, irrationality:0.3, irrationality:0.5
true_goals = all
";
