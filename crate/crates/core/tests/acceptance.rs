//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvalloc::env::{phi, EnvConfig, Mode};
use mvalloc::immersion::{dt_accuracy, immersion_with_tau, qope, ssim, temporal_accuracy, vmaf};
use mvalloc::metrics::{gini, range, Tally};
use mvalloc::policy::{build, run_episode, Drl, HeadSolver, PolicyName};
use mvalloc::ppo::{Agent, AgentConfig, Sample, Trainer};
use mvalloc::scaling::{demand, scale};
use mvalloc::{AllocationDecision, Env, GlobalParams, RoomKind, VRoomProfile};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

fn three(lo: f64, hi: f64) -> [f64; 3] {
    [lo, 0.5 * (lo + hi), hi]
}

fn rooms() -> [VRoomProfile; 3] {
    RoomKind::ALL.map(VRoomProfile::builtin)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let g = GlobalParams::default();
    let [e0, e1, e2, e3, e4] = g.ssim_coeffs;
    let [j1, j2, j3, j4] = g.vmaf_coeffs;
    let mut worst = 0.0f64;
    let mut checks = 0usize;
    let mut track = |got: f64, want: f64| {
        worst = worst.max(rel_err(got, want));
        checks += 1;
    };
    for p in rooms() {
        let w = p.omega;
        let ssim_o = |b: f64| (1.0 - (e1 + e2 * w) * b.powf(-(e3 + e4 * w))).max(e0);
        let vmaf_o = |b: f64| (j1 + j2 * w + j3 * b + j4 * w * b).min(100.0);
        let q_o = |b: f64| p.w_sigma * ssim_o(b) + p.w_eta * vmaf_o(b) / 100.0;
        let (b_lo, b_hi) = (p.bitrate_min as f64, p.bitrate_max as f64);
        for b in three(b_lo, b_hi) {
            track(ssim(b, w, &g).unwrap(), ssim_o(b));
            track(vmaf(b, w, &g).unwrap(), vmaf_o(b));
            let (q, qn) = qope(b, &p, &g).unwrap();
            track(q, q_o(b));
            let span = q_o(b_hi) - q_o(b_lo);
            let want = if span == 0.0 { 1.0 } else { ((q_o(b) - q_o(b_lo)) / span).clamp(0.0, 1.0) };
            track(qn, want);
        }
        for eps in three(p.eps_min, p.eps_max) {
            for beta in three(p.beta_min, p.beta_max) {
                for tau in [0.25, 0.6, 1.0] {
                    track(dt_accuracy(eps, beta, tau).unwrap(), 3.0 / (1.0 / eps + 1.0 / beta + 1.0 / tau));
                }
            }
        }
        for lambda in [0.1, 0.5, 2.0] {
            for f in [0.5, p.update_freq, 10.0] {
                for n in 1..=3usize {
                    let freqs: Vec<f64> = (0..n).map(|i| f * (1.0 + i as f64)).collect();
                    let want = freqs.iter().map(|x| 1.0 - (-lambda * x).exp()).sum::<f64>() / n as f64;
                    track(temporal_accuracy(&freqs, lambda).unwrap(), want);
                }
            }
        }
        let cap = p.capacity as f64;
        let f_min = p.framerate_min as f64;
        let scale_o = |base: f64, f: f64, c: f64, kappa: f64, theta: f64| {
            base * (f / f_min).powf(kappa) * c.powf(theta)
                * (1.0 - p.iota * (1.0 - (c / cap).powf(p.lambda_density)))
        };
        let comp_ve = p.polygons / g.p_max + p.objects / g.o_max + p.interaction_points / g.a_max;
        let comp_dt = p.sensors / g.n_max + p.state_vars / g.sv_max + p.update_freq / g.u_max;
        let betas = [p.beta_min, 0.75f64.clamp(p.beta_min, p.beta_max), p.beta_max];
        for f in [p.framerate_min, (p.framerate_min + p.framerate_max) / 2, p.framerate_max] {
            for c in [1, p.capacity.div_ceil(2), p.capacity] {
                for beta in betas {
                    let (ff, cc) = (f as f64, c as f64);
                    track(scale(comp_ve, ff, c, &p, p.kappa_comp, p.theta_comp).unwrap(), scale_o(comp_ve, ff, cc, p.kappa_comp, p.theta_comp));
                    let d = AllocationDecision::new(p.bitrate_max, f, beta);
                    let got = demand(&d, c, &p, &g).unwrap();
                    let cve = scale_o(comp_ve, ff, cc, p.kappa_comp, p.theta_comp);
                    let cdt = scale_o(comp_dt, ff, cc, p.kappa_comp, p.theta_comp);
                    let nve = scale_o(b_hi, ff, cc, p.kappa_net, p.theta_net);
                    let ndt = scale_o(g.phi_dt * b_lo * beta, ff, cc, p.kappa_net, p.theta_net);
                    track(got.comp_ve, cve);
                    track(got.comp_dt, cdt);
                    track(got.net_ve, nve);
                    track(got.net_dt, ndt);
                    track(got.total_cost, g.k_comp * (cve + cdt) + g.k_net * (nve + ndt));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 1.0,
        format!("{checks} checks, worst relative error {worst:.2e}, {secs:.3} s"),
    )
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut seen = Vec::new();
    for thr in [0.3, 0.6, 0.67, 0.8] {
        let eps = 1e-9;
        let vals = [
            phi(thr, thr),
            phi(1.1 * thr, thr),
            phi(1.1 * thr + eps, thr),
            phi(1.5 * thr, thr),
            phi(thr - eps, thr),
        ];
        ok &= vals[0] == 1.5 && vals[1] == 1.5 && vals[2] < 0.5 && vals[3] == 0.2 && vals[4] == -1.0;
        if thr == 0.6 {
            seen = vals.to_vec();
        }
    }
    outcome(ok, format!("threshold 0.6 gives {seen:?}"))
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn criterion_3() -> Outcome {
    let cfg = EnvConfig::coop(3, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut steps, mut drift, mut pool_ok, mut episode) = (0usize, 0.0f64, true, 0u64);
    while steps < 1000 {
        let mut env = Env::new(cfg.clone(), episode).unwrap();
        let initial: f64 = env.msps().iter().map(|m| m.initial_budget).sum();
        while !env.is_done() && steps < 1000 {
            let action = env.decode_action(&random_unit(&mut rng, env.action_len())).unwrap();
            env.step(&action).unwrap();
            let held: f64 = env.msps().iter().map(|m| m.budget).sum();
            let pool = env.ledger().pool;
            drift = drift.max((initial - (held + pool + env.settled_cost())).abs());
            pool_ok &= pool >= 0.0 && pool <= initial;
            steps += 1;
        }
        episode += 1;
    }
    outcome(
        drift <= 1e-6 && pool_ok,
        format!("{steps} steps over {episode} episodes, max drift {drift:.2e}, pool within bounds: {pool_ok}"),
    )
}

fn criterion_4() -> Outcome {
    let coop = EnvConfig::coop(3, 100);
    let noncoop = EnvConfig {
        mode: Mode::Noncoop,
        ..coop.clone()
    };
    let name: PolicyName = "random".parse().unwrap();
    let mut identical = 0;
    for seed in 0..100u64 {
        let a = run_episode(&coop, build(name, seed, None).unwrap().as_mut(), seed).unwrap();
        let b = run_episode(&noncoop, build(name, seed, None).unwrap().as_mut(), seed).unwrap();
        if a == b {
            identical += 1;
        }
    }
    outcome(identical == 100, format!("{identical}/100 episodes identical"))
}

fn beta_levels_o(p: &VRoomProfile, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let b = p.beta_min + k as f64 * step;
        if b > p.beta_max + 1e-9 {
            break;
        }
        out.push(b.min(p.beta_max));
        k += 1;
    }
    if (out.last().unwrap() - p.beta_max).abs() > 1e-9 {
        out.push(p.beta_max);
    }
    out
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let g = GlobalParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut agree, mut total) = (0, 0);
    for p in rooms() {
        let betas = beta_levels_o(&p, g.beta_grid_step);
        for _ in 0..100 {
            let clients = rng.random_range(0..=p.capacity);
            let eps = rng.random_range(p.eps_min..=p.eps_max);
            let thr = rng.random_range(0.05..=0.95);
            let solver = HeadSolver::new(&p, &g, eps, 1.0).unwrap();
            let pick = solver.solve(clients, thr).unwrap();
            let mut best: Option<(f64, u32, u32, f64)> = None;
            for b in p.bitrate_min..=p.bitrate_max {
                for f in p.framerate_min..=p.framerate_max {
                    for &beta in &betas {
                        let d = AllocationDecision::new(b, f, beta);
                        let i = immersion_with_tau(&d, eps, 1.0, &p, &g).unwrap().immersion;
                        if i < thr {
                            continue;
                        }
                        let cost = demand(&d, clients, &p, &g).unwrap().total_cost;
                        if best.is_none_or(|(c, ..)| cost < c) {
                            best = Some((cost, b, f, beta));
                        }
                    }
                }
            }
            total += 1;
            if let Some((_, b, f, beta)) = best {
                let d = pick.decision;
                if pick.meets_threshold && d.bitrate == b && d.framerate == f && (d.beta - beta).abs() < 1e-9 {
                    agree += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(agree == total && secs < 30.0, format!("{agree}/{total} states agree, {secs:.2} s"))
}

fn criterion_6() -> Outcome {
    let basics = gini(&[7.0; 5]) == 0.0 && gini(&[0.0, 100.0]) == 0.5 && range(&[42.0, 0.0, 42.0]) == 42.0;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let k = rng.random_range(0.01..50.0);
        let scaled: Vec<f64> = xs.iter().map(|x| k * x).collect();
        let mut perm = xs.clone();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let g0 = gini(&xs);
        worst = worst
            .max((gini(&scaled) - g0).abs())
            .max((gini(&perm) - g0).abs())
            .max((range(&perm) - range(&xs)).abs())
            .max((range(&scaled) - k * range(&xs)).abs() / k.max(1.0));
    }
    outcome(basics && worst <= 1e-9, format!("fixed cases hold: {basics}, worst invariance gap {worst:.2e}"))
}

fn tally(cfg: &EnvConfig, name: &str, seeds: std::ops::Range<u64>, agent: Option<&Agent>) -> Tally {
    let name: PolicyName = name.parse().unwrap();
    let mut t = Tally::default();
    for seed in seeds {
        let mut p = build(name, seed, agent.cloned()).unwrap();
        t.merge(&Tally::from_trace(&run_episode(cfg, p.as_mut(), seed).unwrap()));
    }
    t
}

fn criterion_7() -> Outcome {
    let cfg = EnvConfig::coop(3, 100);
    let seeds = 7..12;
    let [s, a, m] = ["saving", "average", "max"].map(|n| tally(&cfg, n, seeds.clone(), None));
    let mg = tally(&cfg, "max-gcp", seeds, None);
    let cost = s.total_cost < a.total_cost && a.total_cost < m.total_cost;
    let imm = s.mean_immersion() < a.mean_immersion() && a.mean_immersion() < m.mean_immersion();
    let gcp = m.completion_pct() != mg.completion_pct();
    outcome(
        cost && imm && gcp,
        format!(
            "cost {:.2} < {:.2} < {:.2}: {cost}; immersion {:.4} < {:.4} < {:.4}: {imm}; completion max {:.2}% vs max-gcp {:.2}%",
            s.total_cost, a.total_cost, m.total_cost,
            s.mean_immersion(), a.mean_immersion(), m.mean_immersion(),
            m.completion_pct(), mg.completion_pct()
        ),
    )
}

fn trained(cfg: &EnvConfig, donations: bool, seed: u64) -> Agent {
    let mut t = Trainer::new(cfg.clone(), AgentConfig::default(), seed, donations).unwrap();
    t.train(500).unwrap();
    t.into_agent()
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut single = EnvConfig::noncoop(1, 50);
    single.quota = 20;
    single.reward.threshold = 0.6;
    assert_eq!(single.resolved_heads()[0].room, RoomKind::Library);
    let agent = trained(&single, false, 7);
    let held_out = 1_000_000..1_000_020;
    let drl = {
        let mut t = Tally::default();
        for seed in held_out.clone() {
            let mut p = Drl::new(agent.clone(), false);
            t.merge(&Tally::from_trace(&run_episode(&single, &mut p, seed).unwrap()));
        }
        t
    };
    let avg = tally(&single, "average", held_out, None);
    let learned = drl.fulfillment_pct() >= avg.fulfillment_pct();

    let coop = EnvConfig::coop(3, 100);
    let agent = trained(&coop, true, 7);
    let dg = tally(&coop, "drl-gcp", 7..12, Some(&agent));
    let rg = tally(&coop, "random-gcp", 7..12, None);
    let ordered = dg.completion_pct() >= rg.completion_pct();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        learned && ordered,
        format!(
            "fulfillment drl {:.2}% vs average {:.2}% (completion {:.2}% vs {:.2}%); completion drl-gcp {:.2}% vs random-gcp {:.2}%; {secs:.1} s",
            drl.fulfillment_pct(), avg.fulfillment_pct(), drl.completion_pct(), avg.completion_pct(),
            dg.completion_pct(), rg.completion_pct()
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = AgentConfig {
        hidden: vec![4],
        entropy_coeff: 0.01,
        ..AgentConfig::default()
    };
    let mut agent = Agent::new(2, 2, &cfg, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let batch: Vec<Sample> = (0..16)
        .map(|i| {
            let obs = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let out = agent.act(&obs, &mut rng).unwrap();
            Sample {
                obs,
                raw: out.raw,
                // keep ratios well inside the clip interval
                log_prob: out.log_prob + 0.05 * ((i % 5) as f64 - 2.0) / 2.0,
                advantage: rng.random_range(-1.0..1.0),
                ret: rng.random_range(-2.0..2.0),
            }
        })
        .collect();
    let params = agent.params_flat();
    let (_, grad) = agent.loss_and_grad(&batch, &cfg).unwrap();
    let h = 1e-6;
    let mut fd = vec![0.0; params.len()];
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += h;
        agent.set_params_flat(&p).unwrap();
        let up = agent.loss_and_grad(&batch, &cfg).unwrap().0.total;
        p[i] -= 2.0 * h;
        agent.set_params_flat(&p).unwrap();
        let down = agent.loss_and_grad(&batch, &cfg).unwrap().0.total;
        fd[i] = (up - down) / (2.0 * h);
    }
    let diff: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|b| b * b).sum::<f64>().sqrt());
    let rel = diff / norm;
    let n = params.len();
    outcome(n <= 100 && rel <= 1e-4, format!("{n} parameters, relative error {rel:.2e}"))
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_mvalloc"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_10() -> Outcome {
    let small = [
        "--set", "train_episodes=3",
        "--set", "agent.rollout_length=64",
        "--set", "agent.batch_size=32",
        "--set", "agent.hidden=[8]",
        "--set", "sweep.msps=[1,2]",
        "--set", "sweep.horizons=[10,20]",
        "--set", "adapt.switch_episode=2",
        "--episodes", "2",
        "--seed", "7",
    ];
    let runs: [(&str, &[&str]); 6] = [
        ("eval", &["--policy", "saving", "--msps", "3", "--horizon", "100"]),
        ("train", &["--horizon", "30"]),
        ("sweep", &[]),
        ("tolerance", &["--policy", "myopic"]),
        ("adapt", &["--horizon", "30"]),
        ("capsweep", &["--policy", "average"]),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut same = Vec::new();
    for (cmd, extra) in runs {
        let mut args = vec![cmd];
        args.extend_from_slice(extra);
        args.extend_from_slice(&small);
        let (a, b) = (root.path().join(format!("{cmd}-a")), root.path().join(format!("{cmd}-b")));
        let ran = run_cli(&a, &args) && run_cli(&b, &args);
        let equal = ran
            && ["trace.ndjson", "metrics.csv", "curve.csv", "report.txt"].iter().all(|f| {
                let (x, y) = (std::fs::read(a.join(f)).ok(), std::fs::read(b.join(f)).ok());
                x == y && (x.is_some() || *f == "curve.csv")
            });
        same.push((cmd, equal));
    }
    let pass = same.iter().all(|(_, e)| *e);
    let list: Vec<String> = same.iter().map(|(c, e)| format!("{c}={e}")).collect();
    outcome(pass, format!("byte-identical reruns: {}", list.join(" ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("formula oracles", criterion_1),
        ("reward branches", criterion_2),
        ("credit conservation", criterion_3),
        ("zero-donation degeneracy", criterion_4),
        ("myopic vs brute force", criterion_5),
        ("fairness metrics", criterion_6),
        ("policy ordering", criterion_7),
        ("ppo learning", criterion_8),
        ("gradient check", criterion_9),
        ("cli determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(&format!(" {f}")) || name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        println!("{} {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
