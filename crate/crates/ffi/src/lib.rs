//! C interface to the mvalloc simulator.
//!
//! Environments and agents are opaque handles created by `mv_*_new`/`load`
//! functions and released with the matching `free`. Every fallible call
//! returns an [`MvStatus`]; on failure [`mv_last_error`] describes what went
//! wrong on the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mvalloc::config::RunConfig;
use mvalloc::env::Mode;
use mvalloc::ppo::Agent;
use mvalloc::{Env, EnvConfig, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvStatus {
    Ok = 0,
    NullPointer = 1,
    /// A buffer length or argument value was wrong.
    InvalidArgument = 2,
    Config = 3,
    Domain = 4,
    EpisodeDone = 5,
    Checkpoint = 6,
    Internal = 7,
    Panic = 8,
}

/// Simulation environment handle.
pub struct MvEnv {
    env: Env,
}

/// Trained agent handle.
pub struct MvAgent {
    agent: Agent,
}

/// Summary of one environment step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MvStepResult {
    pub reward: f64,
    pub pool: f64,
    /// Requests posted this step.
    pub posted: u32,
    /// Requests served this step.
    pub executed: u32,
    /// Served requests that met the immersion threshold.
    pub satisfied: u32,
    pub cost: f64,
    pub done: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> MvStatus {
    match err {
        Error::Domain(_) => MvStatus::Domain,
        Error::Config(_) | Error::UnknownPolicy(_) => MvStatus::Config,
        Error::Dimension { .. } => MvStatus::InvalidArgument,
        Error::Checkpoint(_) | Error::Io { .. } => MvStatus::Checkpoint,
        _ => MvStatus::Internal,
    }
}

/// Runs `f`, recording errors and turning panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (MvStatus, String)>) -> MvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MvStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MvStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (MvStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MvStatus, String) {
    (MvStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MvStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn boxed_env(cfg: EnvConfig, seed: u64, out: *mut *mut MvEnv) -> Result<(), (MvStatus, String)> {
    let env = Env::new(cfg, seed).map_err(lib_err)?;
    unsafe { *out = Box::into_raw(Box::new(MvEnv { env })) };
    Ok(())
}

/// Message describing the last failed call on this thread; empty after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an environment from the built-in preset: cooperative when `coop`
/// is true, otherwise independent MSPs.
///
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn mv_env_new_default(
    coop: bool,
    msps: usize,
    horizon: usize,
    seed: u64,
    out: *mut *mut MvEnv,
) -> MvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = if coop {
            EnvConfig::coop(msps, horizon)
        } else {
            EnvConfig::noncoop(msps, horizon)
        };
        boxed_env(cfg, seed, out)
    })
}

/// Creates an environment from a run configuration in TOML; only its `env`
/// table is used and unset keys take preset defaults.
///
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mv_env_from_toml(toml: *const c_char, seed: u64, out: *mut *mut MvEnv) -> MvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let cfg = RunConfig::resolve(Some(text), &[], Mode::Noncoop).map_err(lib_err)?;
        boxed_env(cfg.env, seed, out)
    })
}

/// Releases an environment. Null is ignored.
///
/// `env` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mv_env_free(env: *mut MvEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Starts a new episode.
///
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mv_env_reset(env: *mut MvEnv, seed: u64) -> MvStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        env.env.reset(seed).map_err(lib_err)?;
        Ok(())
    })
}

/// Observation vector length; 0 for a null handle.
///
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mv_env_observation_len(env: *const MvEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.observation_len())
}

/// Action vector length; 0 for a null handle.
///
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mv_env_action_len(env: *const MvEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.action_len())
}

/// Whether the current episode has ended; false for a null handle.
///
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mv_env_is_done(env: *const MvEnv) -> bool {
    env.as_ref().is_some_and(|e| e.env.is_done())
}

/// Writes the current observation into `out`, which must hold exactly
/// `mv_env_observation_len` values.
///
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mv_env_observe(env: *const MvEnv, out: *mut f64, len: usize) -> MvStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let obs = env.env.observation();
        if len != obs.len() {
            return Err((
                MvStatus::InvalidArgument,
                format!("observation buffer holds {len} values, need {}", obs.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&obs);
        Ok(())
    })
}

/// Advances one step. `action` holds `mv_env_action_len` values in [0, 1]:
/// bitrate, frame rate and behavioral accuracy per Head, then one donation
/// fraction per MSP in cooperative mode. `result` may be null.
///
/// `action` must point to `len` readable doubles; `result`, when not null,
/// to a writable struct.
#[no_mangle]
pub unsafe extern "C" fn mv_env_step(
    env: *mut MvEnv,
    action: *const f64,
    len: usize,
    result: *mut MvStepResult,
) -> MvStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        if action.is_null() {
            return Err(null("action"));
        }
        if env.env.is_done() {
            return Err((MvStatus::EpisodeDone, "episode is over; call mv_env_reset".into()));
        }
        let unit = std::slice::from_raw_parts(action, len);
        let decoded = env.env.decode_action(unit).map_err(lib_err)?;
        let step = env.env.step(&decoded).map_err(lib_err)?;
        if let Some(r) = result.as_mut() {
            let count = |f: fn(&mvalloc::env::HeadOutcome) -> bool| step.heads.iter().filter(|h| f(h)).count() as u32;
            *r = MvStepResult {
                reward: step.reward,
                pool: step.pool,
                posted: count(|h| h.active),
                executed: count(|h| h.executed),
                satisfied: count(|h| h.executed && h.satisfied),
                cost: step.msps.iter().map(|m| m.cost).sum(),
                done: step.done,
            };
        }
        Ok(())
    })
}

/// Loads a checkpoint written by `mvalloc train`.
///
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mv_agent_load(path: *const c_char, out: *mut *mut MvAgent) -> MvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let agent = Agent::load(Path::new(path)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MvAgent { agent }));
        Ok(())
    })
}

/// Releases an agent. Null is ignored.
///
/// `agent` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mv_agent_free(agent: *mut MvAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Deterministic action for `obs`, written to `action` as values in [0, 1]
/// ready for `mv_env_step`.
///
/// `obs` must point to `obs_len` readable and `action` to `action_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mv_agent_act(
    agent: *const MvAgent,
    obs: *const f64,
    obs_len: usize,
    action: *mut f64,
    action_len: usize,
) -> MvStatus {
    guard(|| {
        let agent = agent.as_ref().ok_or_else(|| null("agent"))?;
        if obs.is_null() || action.is_null() {
            return Err(null("buffer"));
        }
        let obs = std::slice::from_raw_parts(obs, obs_len);
        let out = agent.agent.act_deterministic(obs).map_err(lib_err)?;
        if action_len != out.action.len() {
            return Err((
                MvStatus::InvalidArgument,
                format!("action buffer holds {action_len} values, need {}", out.action.len()),
            ));
        }
        std::slice::from_raw_parts_mut(action, action_len).copy_from_slice(&out.action);
        Ok(())
    })
}

/// Gini coefficient of `len` values; 0 for a null or empty input.
///
/// `xs` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn mv_gini(xs: *const f64, len: usize) -> f64 {
    if xs.is_null() || len == 0 {
        return 0.0;
    }
    mvalloc::metrics::gini(std::slice::from_raw_parts(xs, len))
}
