//! Top-level dispatch: divisibility, the degree deficit `c`, the exhaustive
//! path for small or far-from-threshold inputs, and the extremal/non-extremal
//! split decided by sparse-set peeling.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::absorbing::{self, AbsorbingConfig};
use crate::certificate::{Certificate, Evidence, Trace, Verdict};
use crate::extremal::{self, DetectorConfig, Thresholds};
use crate::graph::{is_factor, Graph, Tiling};
use crate::matching::{perfect_matching_or_certificate, PerfectOutcome, TutteSet};
use crate::oracle::{max_independent_set_with_budget, oracle_kr_factor_with_budget, DEFAULT_BUDGET};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Auto,
    Oracle,
    Extremal,
    NonExtremal,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Mode::Auto),
            "oracle" => Ok(Mode::Oracle),
            "extremal" => Ok(Mode::Extremal),
            "nonextremal" => Ok(Mode::NonExtremal),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Auto => "auto",
            Mode::Oracle => "oracle",
            Mode::Extremal => "extremal",
            Mode::NonExtremal => "nonextremal",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Replaces the computed degree deficit.
    pub c_override: Option<i64>,
    /// Inputs with at most this many vertices go straight to the oracle.
    pub oracle_cutoff: usize,
    /// Route to the oracle when `c^(r^(r+1)) > n`.
    pub brute_guard: bool,
    pub oracle_budget: u64,
    pub thresholds: Thresholds,
    pub detector: DetectorConfig,
    pub absorbing: AbsorbingConfig,
    /// Largest `r * m` handed to colour coding; bigger patterns use exact search.
    pub cc_max_k: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Auto,
            seed: 0,
            c_override: None,
            oracle_cutoff: 15,
            brute_guard: true,
            oracle_budget: DEFAULT_BUDGET,
            thresholds: Thresholds::default(),
            detector: DetectorConfig::default(),
            absorbing: AbsorbingConfig::default(),
            cc_max_k: 9,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("clique order r must be at least 1")]
    ZeroOrder,
}

/// What a pipeline stage hands back to the dispatcher.
#[derive(Debug, Clone)]
pub enum PipelineOutcome {
    Factor(Tiling),
    NoFactor(Evidence),
    /// Assembly met an odd-component obstruction in `G[vertices]`.
    Parity { vertices: Vec<usize>, tutte: TutteSet },
    Failed { stage: String, reason: String },
}

/// `c = ceil((1 - 1/r) n) - delta(G)`.
pub fn degree_deficit(g: &Graph, r: usize) -> i64 {
    let n = g.n();
    let need = ((r - 1) * n).div_ceil(r) as i64;
    need - g.min_degree() as i64
}

/// `c^(r^(r+1)) > n`, evaluated without overflow.
pub fn brute_cutoff_exceeded(c: i64, r: usize, n: usize) -> bool {
    if c <= 1 {
        return c == 1 && n == 0;
    }
    let exp = (r as u32).checked_pow(r as u32 + 1);
    match exp {
        // the power dwarfs any vertex count once the exponent passes 64
        Some(e) if e < 64 => BigInt::from(c).pow(e) > BigInt::from(n),
        _ => true,
    }
}

pub fn solve_auto(g: &Graph, r: usize) -> Result<Certificate, SolveError> {
    solve(g, r, &SolverConfig::default())
}

pub fn solve(g: &Graph, r: usize, cfg: &SolverConfig) -> Result<Certificate, SolveError> {
    let start = Instant::now();
    let mut cert = dispatch(g, r, cfg)?;
    cert.timing_ms = start.elapsed().as_millis() as u64;
    Ok(cert)
}

fn dispatch(g: &Graph, r: usize, cfg: &SolverConfig) -> Result<Certificate, SolveError> {
    if r == 0 {
        return Err(SolveError::ZeroOrder);
    }
    let n = g.n();
    let c = cfg.c_override.unwrap_or_else(|| degree_deficit(g, r));
    let mut trace = Trace {
        c,
        seed: cfg.seed,
        ..Trace::default()
    };
    if !n.is_multiple_of(r) {
        trace.path = "divisibility".into();
        return Ok(no_factor(r, n, Evidence::Divisibility { n, r }, trace));
    }
    if r == 1 {
        trace.path = "singletons".into();
        let t = Tiling::new((0..n).map(|v| vec![v]).collect());
        return Ok(factor_found(r, n, t, trace));
    }
    if r == 2 {
        trace.path = "matching".into();
        return Ok(match perfect_matching_or_certificate(g) {
            PerfectOutcome::Perfect(m) => {
                let t = Tiling::new(m.edges.iter().map(|&(u, v)| vec![u, v]).collect());
                factor_found(r, n, t, trace)
            }
            PerfectOutcome::Tutte(tutte) => {
                let ev = Evidence::TutteParity {
                    vertices: (0..n).collect(),
                    tutte,
                };
                finish_no_factor(g, r, ev, trace, cfg)
            }
        });
    }
    let to_oracle = match cfg.mode {
        Mode::Oracle => true,
        Mode::Extremal | Mode::NonExtremal => false,
        Mode::Auto => n <= cfg.oracle_cutoff || (cfg.brute_guard && brute_cutoff_exceeded(c, r, n)),
    };
    if to_oracle {
        trace.path = "oracle".into();
        return Ok(oracle_certificate(g, r, cfg, trace));
    }
    let c_pipe = c.max(0);
    let peeled = match extremal::peel_sparse_sets(g, r, &cfg.detector) {
        Ok(p) => p,
        Err(e) => {
            trace.path = "oracle".into();
            trace.fallback("peel", e.to_string());
            return Ok(oracle_certificate(g, r, cfg, trace));
        }
    };
    let extremal_path = match cfg.mode {
        Mode::Extremal => true,
        Mode::NonExtremal => false,
        _ => peeled.s >= 1,
    };
    if extremal_path {
        if peeled.s == 0 {
            trace.path = "oracle".into();
            trace.fallback("peel", "extremal mode requested but no sparse set was found");
            return Ok(oracle_certificate(g, r, cfg, trace));
        }
        trace.path = "extremal".into();
        let out = extremal::run_extremal(g, r, c_pipe, &peeled, cfg, &mut trace);
        Ok(settle(g, r, out, trace, cfg))
    } else {
        trace.path = "nonextremal".into();
        let out = absorbing::run_nonextremal(g, r, cfg, &mut trace);
        Ok(settle(g, r, out, trace, cfg))
    }
}

/// Turn a pipeline outcome into a certificate, re-checking factors and routing
/// failures to the oracle.
pub(crate) fn settle(g: &Graph, r: usize, out: PipelineOutcome, mut trace: Trace, cfg: &SolverConfig) -> Certificate {
    let n = g.n();
    match out {
        PipelineOutcome::Factor(t) => {
            if is_factor(g, &t, r) {
                factor_found(r, n, t, trace)
            } else {
                trace.fallback("final-check", "assembled tiling is not a factor");
                oracle_certificate(g, r, cfg, trace)
            }
        }
        PipelineOutcome::NoFactor(ev) => {
            trace.pipeline_evidence = Some(ev.kind().to_string());
            finish_no_factor(g, r, ev, trace, cfg)
        }
        PipelineOutcome::Parity { vertices, tutte } => {
            trace.pipeline_evidence = Some("TutteParity".into());
            match oracle_kr_factor_with_budget(g, r, cfg.oracle_budget) {
                Ok(None) => finish_no_factor(g, r, Evidence::TutteParity { vertices, tutte }, trace, cfg),
                Ok(Some(t)) => {
                    trace.fallback("assemble", "parity obstruction not confirmed; oracle found a factor");
                    factor_found(r, n, t, trace)
                }
                Err(e) => {
                    trace.fallback("assemble", format!("parity confirmation failed: {e}"));
                    inconclusive(r, n, trace)
                }
            }
        }
        PipelineOutcome::Failed { stage, reason } => {
            trace.fallback(&stage, reason);
            oracle_certificate(g, r, cfg, trace)
        }
    }
}

pub(crate) fn oracle_certificate(g: &Graph, r: usize, cfg: &SolverConfig, trace: Trace) -> Certificate {
    let n = g.n();
    match oracle_kr_factor_with_budget(g, r, cfg.oracle_budget) {
        Ok(Some(t)) => factor_found(r, n, t, trace),
        Ok(None) => finish_no_factor(g, r, Evidence::OracleExhausted, trace, cfg),
        Err(e) => {
            let mut trace = trace;
            trace.note(format!("oracle: {e}"));
            inconclusive(r, n, trace)
        }
    }
}

/// Prefer an oversized independent set as evidence: it is the cheapest to check.
fn finish_no_factor(g: &Graph, r: usize, ev: Evidence, mut trace: Trace, cfg: &SolverConfig) -> Certificate {
    let n = g.n();
    if matches!(ev, Evidence::Divisibility { .. }) {
        return no_factor(r, n, ev, trace);
    }
    match max_independent_set_with_budget(g, cfg.oracle_budget) {
        Ok(set) if r >= 2 && set.len() * r > n => {
            if trace.pipeline_evidence.is_none() {
                trace.pipeline_evidence = Some(ev.kind().to_string());
            }
            no_factor(r, n, Evidence::IndependentSetTooLarge { set }, trace)
        }
        _ => no_factor(r, n, ev, trace),
    }
}

fn factor_found(r: usize, n: usize, t: Tiling, trace: Trace) -> Certificate {
    Certificate {
        verdict: Verdict::FactorFound,
        r,
        n,
        factor: Some(t.canonical()),
        evidence: None,
        trace,
        timing_ms: 0,
    }
}

fn no_factor(r: usize, n: usize, ev: Evidence, trace: Trace) -> Certificate {
    Certificate {
        verdict: Verdict::NoFactor,
        r,
        n,
        factor: None,
        evidence: Some(ev),
        trace,
        timing_ms: 0,
    }
}

fn inconclusive(r: usize, n: usize, trace: Trace) -> Certificate {
    Certificate {
        verdict: Verdict::Inconclusive,
        r,
        n,
        factor: None,
        evidence: None,
        trace,
        timing_ms: 0,
    }
}
