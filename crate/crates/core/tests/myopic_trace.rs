//! The myopic policy on a one-Head toy against a brute-force replay of the
//! same episode.

use mvalloc::config::RunConfig;
use mvalloc::decision::beta_levels;
use mvalloc::env::{EnvConfig, HeadSpec};
use mvalloc::harness::{eval_seed, run, Command};
use mvalloc::immersion::immersion;
use mvalloc::scaling::demand;
use mvalloc::{AllocationDecision, Env, RoomKind};

#[derive(Debug, PartialEq)]
struct Expect {
    steps: u64,
    posted: u64,
    executed: u64,
    fulfilled: u64,
    cost: f64,
}

fn oracle(cfg: &EnvConfig, seed: u64) -> Expect {
    let env = Env::new(cfg.clone(), seed).unwrap();
    let p = env.profile(0).clone();
    let g = &cfg.global;
    let clients = env.heads()[0].clients;
    let mut best: Option<(f64, f64)> = None;
    for b in p.bitrate_min..=p.bitrate_max {
        for f in p.framerate_min..=p.framerate_max {
            for beta in beta_levels(&p, g.beta_grid_step) {
                let d = AllocationDecision::new(b, f, beta);
                let i = immersion(&d, p.default_eps(), &p, g).unwrap().immersion;
                let c = demand(&d, clients, &p, g).unwrap().total_cost;
                if i >= cfg.reward.threshold && best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, i));
                }
            }
        }
    }
    let (cost, imm) = best.unwrap();
    let floor = demand(&AllocationDecision::minimum(&p), clients, &p, g).unwrap().total_cost;
    let mut budget = env.msps()[0].budget;
    let (mut t, mut stuck, mut done_count) = (0usize, 0u32, 0u32);
    let mut e = Expect { steps: 0, posted: 0, executed: 0, fulfilled: 0, cost: 0.0 };
    loop {
        if done_count < cfg.quota {
            e.posted += 1;
            if cost <= budget {
                budget -= cost;
                done_count += 1;
                e.executed += 1;
                e.fulfilled += (imm >= cfg.reward.threshold) as u64;
                e.cost += cost;
            }
        }
        t += 1;
        e.steps += 1;
        let can_act = done_count < cfg.quota && floor <= budget;
        stuck = if can_act { 0 } else { stuck + 1 };
        if t >= cfg.horizon || stuck >= cfg.stuck_cutoff {
            return e;
        }
    }
}

fn check(room: RoomKind, clients: u32, budget: f64, quota: u32, horizon: usize) {
    let mut env = EnvConfig::noncoop(1, horizon);
    env.heads = vec![HeadSpec { room, msp: 0, eps: None, clients: Some(clients), dt_count: 1 }];
    env.budget = budget;
    env.quota = quota;
    let mut cfg = RunConfig::with_env(env.clone());
    cfg.policy = "myopic".into();
    cfg.episodes = 2;
    cfg.seed = 3;
    let out = run(Command::Eval, &cfg, None).unwrap();
    let mut rows = csv::Reader::from_reader(out.metrics.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let col = |r: &csv::StringRecord, name: &str| -> f64 {
        r[headers.iter().position(|h| h == name).unwrap()].parse().unwrap()
    };
    for (i, r) in rows.records().enumerate() {
        let r = r.unwrap();
        let want = oracle(&env, eval_seed(cfg.seed, i));
        let got = Expect {
            steps: col(&r, "steps") as u64,
            posted: col(&r, "posted") as u64,
            executed: col(&r, "executed") as u64,
            fulfilled: col(&r, "fulfilled") as u64,
            cost: col(&r, "total_cost"),
        };
        assert_eq!((got.steps, got.posted, got.executed, got.fulfilled), (want.steps, want.posted, want.executed, want.fulfilled), "{room}");
        assert!((got.cost - want.cost).abs() < 1e-9 * want.cost.max(1.0), "{room}: {} vs {}", got.cost, want.cost);
    }
}

#[test]
fn budget_runs_out_before_quota() {
    check(RoomKind::Arena, 20, 60.0, 50, 30);
}

#[test]
fn quota_met_then_stuck() {
    check(RoomKind::Library, 4, 60.0, 12, 50);
}

#[test]
fn horizon_cuts_episode() {
    check(RoomKind::Gallery, 8, 500.0, 50, 20);
}
