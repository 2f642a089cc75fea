//! Acceptance criteria. Each `criterion_*` test writes one `PASS`/`FAIL` line
//! to stderr (uncaptured) before asserting, so `cargo test` output doubles as
//! the acceptance report.

mod cli;
mod common;

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{octile_dijkstra, oracle_maps, trained, DESK_SWEEP};
use deceptive_mdp::harness::{run_batch, BatchOutput, CsvRow, SweepSpec};
use deceptive_mdp::metrics::{deceptive_step, last_deceptive_point, non_deceptive_fraction, simulation_value};
use deceptive_mdp::observer::divergence;
use deceptive_mdp::policy::{irrationality_action, irrationality_measure, q_gain, run_episode, Episode};
use deceptive_mdp::{
    BoltzmannObserver, Mdp, ObservationSequence, PolicyConfig, PolicyState, PriorDistribution, QTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, title: &str, checks: &[(String, bool)]) {
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(what, ok)| format!("{what} [{}]", if *ok { "ok" } else { "FAIL" }))
        .collect();
    let line = format!(
        "acceptance {criterion} {title}: {} | {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

struct Desk {
    output: BatchOutput,
    elapsed: Duration,
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let spec = SweepSpec::parse(DESK_SWEEP, Path::new(".")).unwrap();
        let start = Instant::now();
        let output = run_batch(&spec, None, None).unwrap();
        Desk { output, elapsed: start.elapsed() }
    })
}

fn rows(agent: &str) -> Vec<&'static CsvRow> {
    desk().output.rows.iter().filter(|r| r.agent == agent).collect()
}

fn mean(agent: &str, f: impl Fn(&CsvRow) -> f64) -> f64 {
    let rs = rows(agent);
    rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64
}

fn sim(r: &CsvRow) -> f64 {
    r.result.as_ref().unwrap().metrics.simulation_value
}

fn cost_ratio(r: &CsvRow) -> f64 {
    r.result.as_ref().unwrap().metrics.cost_ratio
}

const AGENTS: [&str; 4] = ["honest", "ambiguity", "irrationality-0.3", "irrationality-0.5"];

#[test]
fn criterion_1_solver_oracle() {
    let start = Instant::now();
    let maps = oracle_maps();
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    let mut mismatched_reachability = 0usize;
    for (_, map) in &maps {
        let (_, qs) = trained(map, 0);
        for q in &qs {
            let dist = octile_dijkstra(map, q.goal());
            for s in map.free_cells() {
                match (dist[map.index(s)], q.max_value(s)) {
                    (Some(d), Some(v)) => {
                        let expected = if s == q.goal() { 0.0 } else { 10000.0 - d };
                        worst = worst.max((v - expected).abs());
                        cells += 1;
                    }
                    (None, None) => {}
                    _ => mismatched_reachability += 1,
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let families: std::collections::BTreeSet<&str> =
        maps.iter().map(|(label, _)| label.split('-').next().unwrap()).collect();
    let largest = maps.iter().map(|(_, m)| m.width().max(m.height())).max().unwrap();
    report(
        1,
        "solver oracle",
        &[
            (format!("{} maps, largest side {largest}, {} families", maps.len(), families.len()), maps.len() == 20 && largest <= 20),
            (format!("max |V - (10000 - dijkstra)| = {worst:.2e} over {cells} cells"), worst <= 1e-6 && cells > 0),
            (format!("{mismatched_reachability} reachability mismatches"), mismatched_reachability == 0),
            (format!("runtime {:.2}s", elapsed.as_secs_f64()), elapsed < Duration::from_secs(10)),
        ],
    );
}

#[test]
fn criterion_2_honest_non_positivity() {
    let honest = rows("honest");
    let errors = desk().output.error_count();
    let worst = honest.iter().map(|r| sim(r)).fold(f64::NEG_INFINITY, f64::max);
    report(
        2,
        "honest simulation <= 0",
        &[
            (format!("{} honest episodes, {errors} error rows", honest.len()), honest.len() == 30 && errors == 0),
            (format!("max honest simulation = {worst:.3e}"), worst <= 1e-9),
        ],
    );
}

#[test]
fn criterion_3_deception_ordering() {
    let [h, a, ir3, ir5] = AGENTS.map(|agent| mean(agent, sim));
    let elapsed = desk().elapsed;
    report(
        3,
        "deception ordering",
        &[
            (format!("honest {h:.4} < ambiguity {a:.4}"), h < a),
            (format!("honest {h:.4} < irrationality-0.3 {ir3:.4}"), h < ir3),
            (format!("irrationality-0.5 {ir5:.4} >= ambiguity - 0.02 = {:.4}", a - 0.02), ir5 >= a - 0.02),
            (format!("batch runtime {:.2}s", elapsed.as_secs_f64()), elapsed < Duration::from_secs(300)),
        ],
    );
}

#[test]
fn criterion_4_cost_ordering() {
    let worst_honest = rows("honest").iter().map(|r| (cost_ratio(r) - 1.0).abs()).fold(0.0, f64::max);
    let amb = mean("ambiguity", cost_ratio);
    let ir5 = mean("irrationality-0.5", cost_ratio);
    report(
        4,
        "cost ordering",
        &[
            (format!("max |honest cost ratio - 1| = {worst_honest:.1e}"), worst_honest <= 1e-9),
            (format!("mean ambiguity cost ratio {amb:.4} >= 1"), amb >= 1.0),
            (format!("irrationality-0.5 {ir5:.4} >= ambiguity {amb:.4}"), ir5 >= amb),
        ],
    );
}

#[test]
fn criterion_5_identifiability_trend() {
    let at = |agent: &str, k: usize| mean(agent, |r| r.result.as_ref().unwrap().deciles[k]);
    let (first, last) = (at("honest", 0), at("honest", 8));
    let mut checks = vec![(format!("honest cp_90 {last:.4} > cp_10 {first:.4}"), last > first)];
    for agent in &AGENTS[1..] {
        let excess = (0..9).map(|k| at(agent, k) - at("honest", k)).fold(f64::NEG_INFINITY, f64::max);
        checks.push((format!("{agent} max excess over honest {excess:.4} <= 0.05"), excess <= 0.05));
    }
    report(5, "identifiability trend", &checks);
}

fn episode(mdp: &Mdp, qs: &[QTable], prior: &PriorDistribution, cfg: &PolicyConfig) -> Episode {
    run_episode(mdp, qs, prior, &BoltzmannObserver::default(), cfg).unwrap()
}

#[test]
fn criterion_6_policy_properties() {
    let observer = BoltzmannObserver::default();
    let (mut a, mut b, mut c, mut d, mut e) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let (mut a_bad, mut b_bad, mut c_bad, mut d_bad, mut e_bad) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for (_, map) in oracle_maps() {
        for t in 0..map.goals().len() {
            let (mdp, qs) = trained(&map, t);
            let prior = PriorDistribution::uniform(qs.len());
            let honest = episode(&mdp, &qs, &prior, &PolicyConfig::honest());

            // (a) alpha = 0 reproduces the honest trace, and the honest choice at every visited state
            a += 1;
            let ir0 = episode(&mdp, &qs, &prior, &PolicyConfig::irrationality(0.0));
            if ir0.obs != honest.obs {
                a_bad += 1;
            }

            // (b) kappa does not change the ambiguity trace
            let amb = episode(&mdp, &qs, &prior, &PolicyConfig::ambiguity());
            for kappa in [0.5, 2.0] {
                b += 1;
                if episode(&mdp, &qs, &prior, &PolicyConfig { kappa, ..PolicyConfig::ambiguity() }).obs != amb.obs {
                    b_bad += 1;
                }
            }

            // (c) retention, floor and candidate soundness, under several pruning settings
            for (delta, min_active) in [(0.0, 1), (0.0, 2), (f64::NEG_INFINITY, 1), (1.0, 1)] {
                let cfg = PolicyConfig { delta, min_active, ..PolicyConfig::ambiguity() };
                let ep = episode(&mdp, &qs, &prior, &cfg);
                let mut obs = ObservationSequence::new();
                for dec in &ep.decisions {
                    c += 1;
                    let gain = |a| q_gain(&qs[t], &obs, dec.state, a).unwrap();
                    let floor = dec.active_set.len() >= min_active.min(qs.len());
                    let sound = if dec.fallback {
                        map.available_actions(dec.state).unwrap().iter().all(|&a| gain(a) < 0.0 && gain(a) <= gain(dec.action))
                    } else {
                        gain(dec.action) >= 0.0
                    };
                    if !(dec.active_set.contains(&t) && floor && sound) {
                        c_bad += 1;
                    }
                    obs.push(&map, dec.state, dec.action).unwrap();
                }
                for dec in &amb.decisions {
                    let mut st = PolicyState::new(qs.len());
                    let choice = irrationality_action(&mdp, &qs, &mut st, dec.state, &PolicyConfig::irrationality(0.0)).unwrap();
                    a += 1;
                    if choice.action != qs[t].greedy_action(dec.state).unwrap() {
                        a_bad += 1;
                    }
                }
            }

            // (d) IM bounds on every evaluated prefix; zero along greedy prefixes
            let ir = episode(&mdp, &qs, &prior, &PolicyConfig::irrationality(0.5));
            for trace in [&ir.obs, &amb.obs, &honest.obs] {
                for j in 0..=trace.len() {
                    d += 1;
                    let im = irrationality_measure(&qs, &trace.prefix(&map, j)).unwrap();
                    if !(0.0..1.0).contains(&im) {
                        d_bad += 1;
                    }
                }
            }
            for j in 0..=honest.obs.len() {
                d += 1;
                let prefix = honest.obs.prefix(&map, j);
                if divergence(&qs[t], &prefix).unwrap().abs() > 1e-9 || irrationality_measure(&qs, &prefix).unwrap() > 1e-9 {
                    d_bad += 1;
                }
            }

            // (e) normalization and the prior on the empty trace
            let skewed = PriorDistribution::new((1..=qs.len()).map(|k| k as f64 / (qs.len() * (qs.len() + 1) / 2) as f64).collect()).unwrap();
            for p in [&prior, &skewed] {
                e += 1;
                if observer.posterior(&qs, p, &ObservationSequence::new()).unwrap().probabilities != p.weights() {
                    e_bad += 1;
                }
                for trace in [&ir.obs, &amb.obs] {
                    for snap in observer.posterior_stream(&qs, p, trace).unwrap() {
                        e += 1;
                        if (snap.probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                            e_bad += 1;
                        }
                    }
                }
            }
        }
    }
    report(
        6,
        "policy property suite",
        &[
            (format!("(a) alpha=0 equals honest: {a_bad}/{a} violations"), a_bad == 0),
            (format!("(b) kappa invariance: {b_bad}/{b}"), b_bad == 0),
            (format!("(c) retention/floor/candidates: {c_bad}/{c}"), c_bad == 0),
            (format!("(d) IM bounds: {d_bad}/{d}"), d_bad == 0),
            (format!("(e) normalization and prior identity: {e_bad}/{e}"), e_bad == 0),
        ],
    );
}

#[test]
fn criterion_7_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let observer = BoltzmannObserver::default();
    let mut worst = 0.0f64;
    let mut mismatches = 0usize;
    let mut episodes = 0usize;
    let mut steps = 0usize;
    while episodes < 100 {
        let map = common::small_map(rng.gen_range(0..5), rng.gen_range(6..=14), rng.gen_range(6..=14), rng.gen_range(2..=4), rng.gen());
        let t = rng.gen_range(0..map.goals().len());
        let (mdp, qs) = trained(&map, t);
        let raw: Vec<f64> = (0..qs.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let prior = PriorDistribution::new(raw.iter().map(|w| w / total).collect()).unwrap();
        let cfg = match rng.gen_range(0..3) {
            0 => PolicyConfig::honest(),
            1 => PolicyConfig::ambiguity(),
            _ => PolicyConfig::irrationality(rng.gen_range(0.0..=1.0)),
        };
        let ep = episode(&mdp, &qs, &prior, &cfg);
        let snaps = observer.posterior_stream(&qs, &prior, &ep.obs).unwrap();
        episodes += 1;
        steps += snaps.len();

        // brute force straight from the probability vectors
        let mut flags = Vec::new();
        let mut total_margin = 0.0;
        for s in &snaps {
            let p = &s.probabilities;
            let mut bogus = f64::NEG_INFINITY;
            for (i, &pi) in p.iter().enumerate() {
                if i != t && pi > bogus {
                    bogus = pi;
                }
            }
            total_margin += bogus - p[t];
            flags.push(bogus >= p[t]);
        }
        let expected_sim = total_margin / snaps.len() as f64;
        let mut expected_ldp = 0;
        for (j, &f) in flags.iter().enumerate() {
            if f {
                expected_ldp = j + 1;
            }
        }
        let expected_ndf = flags.iter().filter(|f| !**f).count() as f64 / flags.len() as f64;

        let diff_sim = (simulation_value(&snaps, t).unwrap() - expected_sim).abs();
        let diff_ndf = (non_deceptive_fraction(&snaps, t).unwrap() - expected_ndf).abs();
        worst = worst.max(diff_sim).max(diff_ndf);
        if last_deceptive_point(&snaps, t).unwrap() != expected_ldp {
            mismatches += 1;
        }
        mismatches += snaps.iter().zip(&flags).filter(|(s, &f)| deceptive_step(s, t) != f).count();
    }
    report(
        7,
        "metric oracles",
        &[
            (format!("{episodes} episodes, {steps} snapshots"), episodes == 100),
            (format!("max |difference| = {worst:.1e}"), worst <= 1e-12),
            (format!("{mismatches} deceptive-step/ldp mismatches"), mismatches == 0),
        ],
    );
}

#[test]
fn criterion_8_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_deceptive-mdp");
    let work = tempfile::tempdir().unwrap();
    let d = work.path();
    std::fs::write(d.join("layout.txt"), "family = rooms-corridors\nwidth = 18\nheight = 14\ngoals = 3\nseed = 5\n").unwrap();
    std::fs::write(d.join("sc.txt"), "map = map.txt\ntrue_goal = 2\nagent = ambiguity\n").unwrap();
    std::fs::write(d.join("sweep.txt"), "map = map.txt\ngenerate = archipelago\nwidth = 12\nheight = 12\ngoals = 2\nseed = 9\n").unwrap();

    let run = |round: &str| -> Vec<(String, Vec<u8>)> {
        let out = d.join(round);
        std::fs::create_dir_all(&out).unwrap();
        let cache = out.join("cache");
        let call = |args: &[&str]| {
            let o = Command::new(bin).args(args).current_dir(d).env("DECEPTIVE_MDP_CACHE", &cache).output().unwrap();
            assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
            o.stdout
        };
        let p = |name: &str| out.join(name).to_string_lossy().into_owned();
        call(&["gen-map", "layout.txt", "-o", &p("map.txt")]);
        std::fs::copy(out.join("map.txt"), d.join("map.txt")).unwrap();
        call(&["train", "sc.txt"]);
        let row = call(&["run", "sc.txt", "--svg", &p("run.svg"), "--trace", &p("trace.csv")]);
        call(&["batch", "sweep.txt", "-o", &p("batch.csv")]);
        call(&["render", "map.txt", &p("trace.csv"), "-o", &p("render.svg")]);

        let mut files = vec![("run stdout".to_string(), row)];
        for name in ["map.txt", "run.svg", "trace.csv", "batch.csv", "render.svg"] {
            files.push((name.to_string(), std::fs::read(out.join(name)).unwrap()));
        }
        let mut cached: Vec<_> = std::fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
        cached.sort();
        for path in cached {
            files.push((path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(path).unwrap()));
        }
        files
    };
    let first = run("first");
    let second = run("second");
    let differing: Vec<&str> = first.iter().zip(&second).filter(|(a, b)| a != b).map(|(a, _)| a.0.as_str()).collect();
    report(
        8,
        "CLI determinism",
        &[
            (format!("{} outputs compared", first.len()), first.len() == second.len() && first.len() >= 9),
            (format!("differing: {differing:?}"), differing.is_empty()),
        ],
    );
}
