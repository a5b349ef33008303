//! Experiment orchestration behind the `mvalloc` binary: evaluation,
//! training, sweeps and the three stress suites. Every run renders its
//! outputs in memory so that identical configurations give identical bytes.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::env::{ClientDynamics, Env, EnvConfig, Mode, RequestMode, StepOutcome};
use crate::error::{Error, Result};
use crate::metrics::Tally;
use crate::policy::{build, run_episode, BaseKind, PolicyName};
use crate::ppo::{Agent, EpisodeStats, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eval,
    Train,
    Sweep,
    Tolerance,
    Adapt,
    CapSweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Train => "train",
            Command::Sweep => "sweep",
            Command::Tolerance => "tolerance",
            Command::Adapt => "adapt",
            Command::CapSweep => "capsweep",
        }
    }

    /// Environment preset used when the configuration does not pick one.
    pub fn default_mode(self) -> Mode {
        match self {
            Command::CapSweep => Mode::Coop,
            _ => Mode::Noncoop,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rendered output files of one run.
#[derive(Debug)]
pub struct Outputs {
    pub trace: String,
    pub metrics: String,
    pub curve: Option<String>,
    pub report: String,
    /// The trained agent, for `train`.
    pub agent: Option<Agent>,
}

impl Outputs {
    /// Writes `trace.ndjson`, `metrics.csv`, `curve.csv` and `report.txt`
    /// into `dir`, plus the checkpoint of a trained agent.
    pub fn write(&self, dir: &Path, checkpoint: Option<&Path>) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            ("trace.ndjson", self.trace.as_str()),
            ("metrics.csv", self.metrics.as_str()),
        ];
        if let Some(curve) = &self.curve {
            files.push(("curve.csv", curve));
        }
        files.push(("report.txt", &self.report));
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        if let Some(agent) = &self.agent {
            let path = checkpoint.map_or_else(|| dir.join("agent.ckpt"), Path::to_path_buf);
            agent.save(&path)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// One metrics row: a single evaluation episode.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub label: String,
    pub policy: String,
    pub msps: usize,
    pub horizon: usize,
    pub seed: u64,
    pub episode: usize,
    pub steps: u64,
    pub posted: u64,
    pub executed: u64,
    pub fulfilled: u64,
    pub completion: f64,
    pub fulfillment: f64,
    pub msp_fulfillment: f64,
    pub served_clients: u64,
    pub failed_clients: u64,
    pub total_cost: f64,
    pub mean_immersion: f64,
    pub total_reward: f64,
    pub range: f64,
    pub gini: f64,
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    label: &'a str,
    policy: &'a str,
    seed: u64,
    episode: usize,
    #[serde(flatten)]
    step: &'a StepOutcome,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    label: &'a str,
    #[serde(flatten)]
    stats: &'a EpisodeStats,
}

struct Summary {
    label: String,
    policy: String,
    msps: usize,
    horizon: usize,
    episodes: usize,
    tally: Tally,
}

#[derive(Default)]
struct Sink {
    trace: String,
    rows: Vec<MetricsRow>,
    summaries: Vec<Summary>,
    curves: Vec<(String, Vec<EpisodeStats>)>,
    notes: Vec<String>,
}

/// Seed of evaluation episode `i`. Disjoint in practice from the training
/// episode seeds.
pub fn eval_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

impl Sink {
    fn evaluate(
        &mut self,
        label: &str,
        name: PolicyName,
        env: &EnvConfig,
        agent: Option<&Agent>,
        cfg: &RunConfig,
    ) -> Result<Tally> {
        let policy = name.to_string();
        let mut total = Tally::default();
        for ep in 0..cfg.episodes {
            let seed = eval_seed(cfg.seed, ep);
            let mut p = build(name, seed, agent.cloned())?;
            let records = run_episode(env, p.as_mut(), seed)?;
            for step in &records {
                let rec = TraceRecord {
                    label,
                    policy: &policy,
                    seed,
                    episode: ep,
                    step,
                };
                self.trace.push_str(&serde_json::to_string(&rec)?);
                self.trace.push('\n');
            }
            let t = Tally::from_trace(&records);
            self.rows.push(MetricsRow {
                label: label.to_string(),
                policy: policy.clone(),
                msps: env.msps,
                horizon: env.horizon,
                seed,
                episode: ep,
                steps: t.steps,
                posted: t.posted,
                executed: t.executed,
                fulfilled: t.fulfilled,
                completion: t.completion_pct(),
                fulfillment: t.fulfillment_pct(),
                msp_fulfillment: t.msp_fulfillment_pct(),
                served_clients: t.served_clients,
                failed_clients: t.failed_clients,
                total_cost: t.total_cost,
                mean_immersion: t.mean_immersion(),
                total_reward: t.total_reward,
                range: t.range(),
                gini: t.gini(),
            });
            total.merge(&t);
        }
        self.summaries.push(Summary {
            label: label.to_string(),
            policy,
            msps: env.msps,
            horizon: env.horizon,
            episodes: cfg.episodes,
            tally: total.clone(),
        });
        Ok(total)
    }

    /// Loads the checkpoint when one is given and fits `env`, otherwise
    /// trains a fresh agent on `env`.
    fn agent(
        &mut self,
        label: &str,
        name: PolicyName,
        env: &EnvConfig,
        checkpoint: Option<&Path>,
        cfg: &RunConfig,
    ) -> Result<Agent> {
        let probe = Env::new(env.clone(), cfg.seed)?;
        if let Some(path) = checkpoint {
            let agent = Agent::load(path)?;
            if agent.obs_len() == probe.observation_len() && agent.act_len() == probe.action_len() {
                return Ok(agent);
            }
            self.notes.push(format!(
                "{label}: checkpoint does not fit this environment; trained a fresh agent"
            ));
        }
        let mut trainer = Trainer::new(env.clone(), cfg.agent.clone(), cfg.seed, uses_donations(name, env))?;
        trainer.train(cfg.train_episodes)?;
        self.curves.push((label.to_string(), trainer.curve().to_vec()));
        Ok(trainer.into_agent())
    }

    fn metrics_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            return Ok(String::new());
        }
        let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    fn curve_csv(&self, labelled: bool) -> Result<Option<String>> {
        if self.curves.is_empty() {
            return Ok(None);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for (label, curve) in &self.curves {
            for stats in curve {
                if labelled {
                    w.serialize(CurveRow { label, stats })?;
                } else {
                    w.serialize(stats)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
        Ok(Some(String::from_utf8(bytes).expect("csv output is UTF-8")))
    }

    fn report(&self, cmd: Command, cfg: &RunConfig) -> Result<String> {
        let mut r = String::new();
        writeln!(r, "mvalloc {cmd}").unwrap();
        writeln!(r, "seed: {}", cfg.seed).unwrap();
        writeln!(r, "\n# resolved configuration\n").unwrap();
        r.push_str(&cfg.to_toml()?);
        writeln!(r, "\n# results\n").unwrap();
        writeln!(
            r,
            "{:<14} {:<12} {:>4} {:>7} {:>4} {:>10} {:>11} {:>9} {:>8} {:>8} {:>10} {:>9} {:>7} {:>6}",
            "label", "policy", "msps", "horizon", "eps", "completion", "fulfillment", "msp_fulf",
            "served", "failed", "cost", "immersion", "range", "gini"
        )
        .unwrap();
        for s in &self.summaries {
            let t = &s.tally;
            let n = s.episodes as f64;
            writeln!(
                r,
                "{:<14} {:<12} {:>4} {:>7} {:>4} {:>10.2} {:>11.2} {:>9.2} {:>8.1} {:>8.1} {:>10.3} {:>9.4} {:>7.2} {:>6.4}",
                s.label,
                s.policy,
                s.msps,
                s.horizon,
                s.episodes,
                t.completion_pct(),
                t.fulfillment_pct(),
                t.msp_fulfillment_pct(),
                t.served_clients as f64 / n,
                t.failed_clients as f64 / n,
                t.total_cost / n,
                t.mean_immersion(),
                t.range() / n,
                t.gini(),
            )
            .unwrap();
        }
        if !self.curves.is_empty() {
            writeln!(r, "\n# training\n").unwrap();
            for (label, curve) in &self.curves {
                let tail = &curve[curve.len().saturating_sub(10)..];
                let mean = |f: fn(&EpisodeStats) -> f64| tail.iter().map(f).sum::<f64>() / tail.len().max(1) as f64;
                writeln!(
                    r,
                    "{label}: {} episodes, last {} mean reward {:.3}, completion {:.2}, fulfillment {:.2}, cost {:.3}",
                    curve.len(),
                    tail.len(),
                    mean(|s| s.reward),
                    mean(|s| s.completion),
                    mean(|s| s.fulfillment),
                    mean(|s| s.cost),
                )
                .unwrap();
            }
        }
        if !self.notes.is_empty() {
            writeln!(r, "\n# notes\n").unwrap();
            for n in &self.notes {
                writeln!(r, "{n}").unwrap();
            }
        }
        Ok(r)
    }
}

fn uses_donations(name: PolicyName, env: &EnvConfig) -> bool {
    name.gcp && env.mode == Mode::Coop
}

fn policy_name(cfg: &RunConfig) -> Result<PolicyName> {
    cfg.policy.parse()
}

/// Runs `cmd` under `cfg`. `checkpoint` is the agent to evaluate for
/// learned policies; without one, commands other than `eval` train an agent
/// first.
pub fn run(cmd: Command, cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Outputs> {
    cfg.validate()?;
    let mut sink = Sink::default();
    let mut trained = None;
    let mut labelled_curve = true;
    match cmd {
        Command::Eval => {
            let name = policy_name(cfg)?;
            let agent = if name.is_learned() {
                let path = checkpoint.ok_or_else(|| {
                    Error::Checkpoint(format!("policy `{name}` needs a checkpoint"))
                })?;
                let agent = Agent::load(path)?;
                let probe = Env::new(cfg.env.clone(), cfg.seed)?;
                if agent.obs_len() != probe.observation_len() {
                    return Err(Error::Dimension {
                        what: "checkpoint observation size",
                        expected: probe.observation_len(),
                        got: agent.obs_len(),
                    });
                }
                if agent.act_len() != probe.action_len() {
                    return Err(Error::Dimension {
                        what: "checkpoint action size",
                        expected: probe.action_len(),
                        got: agent.act_len(),
                    });
                }
                Some(agent)
            } else {
                None
            };
            sink.evaluate("eval", name, &cfg.env, agent.as_ref(), cfg)?;
        }
        Command::Train => {
            labelled_curve = false;
            let name = learned_name(cfg);
            let agent = sink.agent("train", name, &cfg.env, None, cfg)?;
            sink.evaluate("trained", name, &cfg.env, Some(&agent), cfg)?;
            trained = Some(agent);
        }
        Command::Sweep => {
            for &m in &cfg.sweep.msps {
                for &h in &cfg.sweep.horizons {
                    let env = cfg.env.reshape(m, h)?;
                    let label = format!("m{m}-h{h}");
                    for p in &cfg.sweep.policies {
                        let name: PolicyName = p.parse()?;
                        let agent = if name.is_learned() {
                            Some(sink.agent(&format!("{label}-{name}"), name, &env, checkpoint, cfg)?)
                        } else {
                            None
                        };
                        sink.evaluate(&label, name, &env, agent.as_ref(), cfg)?;
                    }
                }
            }
        }
        Command::Tolerance => {
            let name = policy_name(cfg)?;
            let agent = if name.is_learned() {
                Some(sink.agent("base", name, &cfg.env, checkpoint, cfg)?)
            } else {
                None
            };
            let t = &cfg.tolerance;
            for k in 0..=t.quota_trials {
                let scale = 1.0 + k as f64 * t.quota_step;
                let env = scale_requests(&cfg.env, scale)?;
                let label = format!("requests+{:.0}%", 100.0 * (scale - 1.0));
                sink.evaluate(&label, name, &env, agent.as_ref(), cfg)?;
            }
            for k in 1..=t.budget_trials {
                let cut = k as f64 * t.budget_step;
                let mut env = cfg.env.clone();
                env.budget *= 1.0 - cut;
                let label = format!("budget-{:.0}%", 100.0 * cut);
                sink.evaluate(&label, name, &env, agent.as_ref(), cfg)?;
            }
        }
        Command::Adapt => {
            labelled_curve = false;
            let name = learned_name(cfg);
            let a = &cfg.adapt;
            let switch = a.switch_episode.min(cfg.train_episodes);
            let after = shifted(&cfg.env, a.threshold_after, a.arrival_rate_after)?;
            let mut trainer =
                Trainer::new(cfg.env.clone(), cfg.agent.clone(), cfg.seed, uses_donations(name, &cfg.env))?;
            trainer.train(switch)?;
            trainer.set_env_config(after.clone())?;
            trainer.train(cfg.train_episodes - switch)?;
            sink.notes.push(format!(
                "environment changed before episode {switch}: threshold {} -> {}, arrival rate -> {}",
                cfg.env.reward.threshold, a.threshold_after, a.arrival_rate_after
            ));
            sink.curves.push(("adapt".into(), trainer.curve().to_vec()));
            let agent = trainer.into_agent();
            sink.evaluate("after-shift", name, &after, Some(&agent), cfg)?;
        }
        Command::CapSweep => {
            if cfg.env.mode != Mode::Coop {
                return Err(Error::config("capsweep needs env.mode = \"coop\""));
            }
            let mut name = policy_name(cfg)?;
            name.gcp = true;
            let agent = if name.is_learned() {
                Some(sink.agent("base", name, &cfg.env, checkpoint, cfg)?)
            } else {
                None
            };
            for &ratio in &cfg.capsweep.ratios {
                let mut env = cfg.env.clone();
                env.withdraw_cap = ratio.is_finite().then_some(ratio);
                sink.evaluate(&format!("cap={ratio}"), name, &env, agent.as_ref(), cfg)?;
            }
        }
    }
    Ok(Outputs {
        trace: sink.trace.clone(),
        metrics: sink.metrics_csv()?,
        curve: sink.curve_csv(labelled_curve)?,
        report: sink.report(cmd, cfg)?,
        agent: trained,
    })
}

/// The learned policy to train: the configured one when it is learned,
/// otherwise `drl-gcp` in cooperative mode and `drl` elsewhere.
fn learned_name(cfg: &RunConfig) -> PolicyName {
    match cfg.policy.parse::<PolicyName>() {
        Ok(n) if n.is_learned() => n,
        _ => PolicyName {
            base: BaseKind::Drl,
            gcp: cfg.env.mode == Mode::Coop,
        },
    }
}

/// Scales the request volume: the quota under quota-driven requests,
/// otherwise the horizon.
fn scale_requests(env: &EnvConfig, scale: f64) -> Result<EnvConfig> {
    let mut e = env.clone();
    match e.requests {
        RequestMode::UntilQuota => e.quota = (env.quota as f64 * scale).round() as u32,
        RequestMode::EveryStep => {
            e.horizon = (env.horizon as f64 * scale).round() as usize;
            e.quota = e.horizon as u32;
        }
    }
    e.validate()?;
    Ok(e)
}

fn shifted(env: &EnvConfig, threshold: f64, arrival: f64) -> Result<EnvConfig> {
    let mut e = env.clone();
    e.reward.threshold = threshold;
    e.clients = ClientDynamics::DoublePoisson;
    for room in [&mut e.rooms.library, &mut e.rooms.arena, &mut e.rooms.gallery] {
        room.arrival_rate = arrival;
    }
    e.validate()?;
    Ok(e)
}
