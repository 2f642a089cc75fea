use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_deceptive-mdp");

fn cli(dir: &Path, cache: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("DECEPTIVE_MDP_CACHE", cache)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const MAP_A: &str = "S.........\n..........\n...##.....\n...##...1.\n..........\n.0........\n..........\n";
const MAP_B: &str = "....S....\n.........\n.#######.\n.........\n0.......1\n";

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), MAP_A).unwrap();
    std::fs::write(dir.path().join("b.txt"), MAP_B).unwrap();
    std::fs::write(dir.path().join("amb.scn"), "map = a.txt\ntrue_goal = 1\nagent = ambiguity\n").unwrap();
    std::fs::write(dir.path().join("honest.scn"), "map = b.txt\ntrue_goal = 0\nagent = honest\nseed = 3\n").unwrap();
    dir
}

#[test]
fn run_is_repeatable_and_render_reproduces_its_svg() {
    let dir = workspace();
    let d = dir.path();
    let cache = d.join("cache");
    let first = cli(d, &cache, &["run", "amb.scn", "--svg", "one.svg", "--trace", "one.csv"]);
    ok(&first);
    let second = cli(d, &cache, &["run", "amb.scn", "--svg", "two.svg", "--trace", "two.csv"]);
    ok(&second);
    assert_eq!(first.stdout, second.stdout);
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("one.svg"), read("two.svg"));
    assert_eq!(read("one.csv"), read("two.csv"));

    let stdout = String::from_utf8(first.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), deceptive_mdp::harness::csv_header());
    assert!(lines.next().unwrap().starts_with("amb,a.txt,ambiguity,"));

    ok(&cli(d, &cache, &["render", "a.txt", "one.csv", "-o", "rendered.svg"]));
    assert_eq!(read("rendered.svg"), read("one.svg"));
}

#[test]
fn honest_run_has_unit_cost_ratio() {
    let dir = workspace();
    let out = cli(dir.path(), &dir.path().join("cache"), &["run", "honest.scn"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[7], "false");
    assert_eq!(row[10], "1");
    assert_eq!(row[6], "3");
}

#[test]
fn train_writes_identical_cache_files_under_the_env_dir() {
    let dir = workspace();
    let d = dir.path();
    let (c1, c2) = (d.join("c1"), d.join("c2"));
    ok(&cli(d, &c1, &["train", "amb.scn"]));
    ok(&cli(d, &c2, &["train", "amb.scn"]));
    let mut names: Vec<_> = std::fs::read_dir(&c1).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2);
    for n in &names {
        assert_eq!(std::fs::read(c1.join(n)).unwrap(), std::fs::read(c2.join(n)).unwrap());
    }
    // runs reuse the cache and give the same row as a cold run
    let warm = cli(d, &c1, &["run", "amb.scn"]);
    let cold = cli(d, &d.join("empty"), &["run", "amb.scn"]);
    ok(&warm);
    assert_eq!(warm.stdout, cold.stdout);
}

#[test]
fn batch_cardinality_and_worker_independence() {
    let dir = workspace();
    let d = dir.path();
    std::fs::write(d.join("sweep.txt"), "map = a.txt\nmap = b.txt\ntrue_goals = 0\n").unwrap();
    let cache = d.join("cache");
    ok(&cli(d, &cache, &["batch", "sweep.txt", "-o", "r1.csv", "--workers", "1"]));
    ok(&cli(d, &cache, &["batch", "sweep.txt", "-o", "r3.csv", "--workers", "3"]));
    let r1 = std::fs::read_to_string(d.join("r1.csv")).unwrap();
    assert_eq!(r1, std::fs::read_to_string(d.join("r3.csv")).unwrap());

    let lines: Vec<&str> = r1.lines().collect();
    assert_eq!(lines[0], deceptive_mdp::harness::csv_header());
    let data: Vec<&str> = lines[1..].iter().copied().filter(|l| !l.starts_with("summary:")).collect();
    let summary: Vec<&str> = lines[1..].iter().copied().filter(|l| l.starts_with("summary:")).collect();
    assert_eq!(data.len(), 8);
    assert_eq!(summary.len(), 4);
    let honest = summary.iter().find(|l| l.starts_with("summary:honest,")).unwrap();
    let sim_mean: f64 = honest.split(',').nth(11).unwrap().split(';').next().unwrap().parse().unwrap();
    assert!(sim_mean <= 0.0);
}

#[test]
fn gen_map_is_repeatable() {
    let dir = workspace();
    let d = dir.path();
    std::fs::write(d.join("layout.txt"), "family = archipelago\nwidth = 30\nheight = 20\ngoals = 4\nseed = 11\n").unwrap();
    ok(&cli(d, &d.join("cache"), &["gen-map", "layout.txt", "-o", "m1.txt"]));
    ok(&cli(d, &d.join("cache"), &["gen-map", "layout.txt", "-o", "m2.txt"]));
    let m1 = std::fs::read_to_string(d.join("m1.txt")).unwrap();
    assert_eq!(m1, std::fs::read_to_string(d.join("m2.txt")).unwrap());
    let map = deceptive_mdp::GridMap::parse(&m1).unwrap();
    assert_eq!((map.width(), map.height(), map.goals().len()), (30, 20, 4));
}

#[test]
fn exit_codes() {
    let dir = workspace();
    let d = dir.path();
    let cache = d.join("cache");
    assert_eq!(cli(d, &cache, &[]).status.code(), Some(2));
    assert_eq!(cli(d, &cache, &["run"]).status.code(), Some(2));
    assert_eq!(cli(d, &cache, &["fly", "x"]).status.code(), Some(2));
    assert_eq!(cli(d, &cache, &["run", "missing.scn"]).status.code(), Some(1));
    std::fs::write(d.join("bad.scn"), "map = a.txt\ntrue_goal = 7\nagent = honest\n").unwrap();
    let bad = cli(d, &cache, &["run", "bad.scn"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("true_goal"));
}
