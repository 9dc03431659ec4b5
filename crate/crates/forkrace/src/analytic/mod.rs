//! Stationary analysis of basic selfish mining.

mod chain;
mod closed;

pub use chain::{
    engine_chain, engine_report, m_attacker_chain, m_attacker_chain_report, n2_chain,
    n2_chain_report, MarkovChain,
};
pub use closed::{
    m_attacker, m_attacker_homogeneous, single_attacker, two_attacker_n2,
    two_attacker_n2_stationary, two_attacker_n2_symmetric, two_attacker_n4, N2_STATES,
};

use std::fmt;
use std::str::FromStr;

use crate::config::MinerConfig;
use crate::error::{Error, Result};
use crate::report::{RevenueReport, ThresholdResult};

/// State cap for enumerated engine chains.
pub const ENGINE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    N2,
    N4,
    /// one private block per attacker, any m
    M,
    /// the race engine's BSM chain enumerated exactly (N ≤ 4)
    Engine,
    /// one attacker with an unbounded private chain
    Single,
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n2" => Model::N2,
            "n4" => Model::N4,
            "m" => Model::M,
            "engine" => Model::Engine,
            "single" => Model::Single,
            _ => return Err(Error::Config(format!("unknown model '{s}'"))),
        })
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::N2 => "n2",
            Model::N4 => "n4",
            Model::M => "m",
            Model::Engine => "engine",
            Model::Single => "single",
        })
    }
}

pub fn revenue(model: Model, cfg: &MinerConfig) -> Result<RevenueReport> {
    let rep = match model {
        Model::N2 => two_attacker_n2(cfg)?,
        Model::N4 => two_attacker_n4(cfg)?,
        Model::M => m_attacker(cfg)?,
        Model::Engine => engine_report(cfg, ENGINE_LIMIT)?,
        Model::Single => {
            if cfg.m() != 1 {
                return Err(Error::ModelMismatch("the single model takes one attacker".into()));
            }
            single_attacker(cfg.alpha[0], cfg.gamma[0])?
        }
    };
    rep.check()?;
    Ok(rep)
}

/// The model used when none is named: the closed form that fits `cfg`, or
/// the enumerated engine chain.
pub fn default_model(cfg: &MinerConfig) -> Model {
    match (cfg.m(), cfg.n_max) {
        (2, 2) => Model::N2,
        (2, 4) => Model::N4,
        (_, 2) => Model::M,
        _ => Model::Engine,
    }
}

pub const THRESHOLD_TOL: f64 = 1e-5;

/// Bisection for the symmetric hash power at which an attacker's relative
/// revenue equals its power. γ, θ, m and N come from `template`.
pub fn find_threshold_symmetric(model: Model, template: &MinerConfig) -> Result<ThresholdResult> {
    let m = template.m();
    let excess = |a: f64| -> Result<(f64, f64)> {
        let cfg = template.with_symmetric_alpha(a);
        let rep = revenue(model, &cfg)?;
        Ok((rep.r_hat[0] - a, rep.r_hat[0]))
    };
    bisect_threshold(excess, 1e-4, (0.4999f64).min(1.0 / m as f64 - 1e-4), THRESHOLD_TOL)
}

/// Shared bisection: `excess(α)` returns (R̂ − α, R̂).
pub fn bisect_threshold(
    mut excess: impl FnMut(f64) -> Result<(f64, f64)>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<ThresholdResult> {
    let (mut lo, mut hi) = (lo, hi);
    let (f_lo, _) = excess(lo)?;
    let (f_hi, _) = excess(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoCrossing { lo, hi });
    }
    let rising = f_hi > f_lo;
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (f, _) = excess(mid)?;
        iterations += 1;
        if (f > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let threshold = 0.5 * (lo + hi);
    let (_, achieved_revenue) = excess(threshold)?;
    Ok(ThresholdResult {
        threshold,
        achieved_revenue,
        iterations,
    })
}
