use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{MdpAction, MdpModel, MdpState};
use crate::error::{Error, Result};

/// Span tolerance for relative value iteration.
pub const SPAN_TOL: f64 = 1e-8;
const MAX_ITER: usize = 2_000_000;
/// Self-loop weight of the aperiodicity transform P' = τI + (1-τ)P.
const TAU: f64 = 0.5;

/// Per-state relative values and greedy action indices at one ρ.
#[derive(Debug, Clone)]
pub struct Solution {
    pub rho: f64,
    /// mean of (1-ρ) r1 - ρ (r2 + rh) per step
    pub gain: f64,
    pub h: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
}

#[inline]
fn w(rho: f64, r: &[u32; 3]) -> f64 {
    (1.0 - rho) * r[0] as f64 - rho * (r[1] + r[2]) as f64
}

/// Relative value iteration on the ρ-weighted reward. `warm` seeds the
/// relative values (e.g. from the previous ρ during the search).
pub fn value_iterate(model: &MdpModel, rho: f64, tol: f64, warm: Option<&[f64]>) -> Result<Solution> {
    let n = model.len();
    let mut h = warm.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    for it in 1..=MAX_ITER {
        let next: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .map(|s| {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (k, outs) in model.edges[s].iter().enumerate() {
                    let q: f64 = outs.iter().map(|e| e.p * (w(rho, &e.r) + h[e.next])).sum();
                    if q > best + 1e-12 {
                        best = q;
                        arg = k;
                    }
                }
                (TAU * h[s] + (1.0 - TAU) * best, arg)
            })
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (s, &(q, _)) in next.iter().enumerate() {
            let d = q - h[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let base = next[0].0;
        h = next.iter().map(|&(q, _)| q - base).collect();
        if hi - lo < tol {
            return Ok(Solution {
                rho,
                gain: (hi + lo) / 2.0 / (1.0 - TAU),
                h,
                policy: next.into_iter().map(|(_, a)| a).collect(),
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITER })
}

/// Long-run blocks credited per step to (Alice, Bob, Henry) under a fixed
/// policy given as action indices.
pub fn policy_gain(model: &MdpModel, policy: &[usize]) -> Result<[f64; 3]> {
    let n = model.len();
    let mut h = vec![[0.0f64; 3]; n];
    for _ in 0..MAX_ITER {
        let next: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|s| {
                let mut q = [0.0; 3];
                for e in &model.edges[s][policy[s]] {
                    for c in 0..3 {
                        q[c] += e.p * (e.r[c] as f64 + h[e.next][c]);
                    }
                }
                let mut out = [0.0; 3];
                for c in 0..3 {
                    out[c] = TAU * h[s][c] + (1.0 - TAU) * q[c];
                }
                out
            })
            .collect();
        let mut done = true;
        let mut g = [0.0; 3];
        for c in 0..3 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for s in 0..n {
                let d = next[s][c] - h[s][c];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            g[c] = (hi + lo) / 2.0 / (1.0 - TAU);
            done &= hi - lo < 1e-13;
        }
        let base = next[0];
        h = next
            .into_iter()
            .map(|v| [v[0] - base[0], v[1] - base[1], v[2] - base[2]])
            .collect();
        if done {
            return Ok(g);
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITER })
}

/// Rates and the number of states where `f` had to fall back to adopt.
pub fn evaluate(model: &MdpModel, f: impl Fn(&MdpState) -> MdpAction) -> Result<([f64; 3], usize)> {
    let (idx, misses) = model.indices_for(f);
    Ok((policy_gain(model, &idx)?, misses))
}

/// A deterministic stationary policy over tuples.
#[derive(Debug, Clone, Serialize)]
pub struct Policy {
    pub states: Vec<MdpState>,
    pub actions: Vec<MdpAction>,
}

impl Policy {
    pub fn from_solution(model: &MdpModel, sol: &Solution) -> Self {
        Policy {
            states: model.states.clone(),
            actions: sol
                .policy
                .iter()
                .enumerate()
                .map(|(s, &k)| model.actions[s][k])
                .collect(),
        }
    }

    pub fn lookup(&self) -> HashMap<MdpState, MdpAction> {
        self.states.iter().copied().zip(self.actions.iter().copied()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},action\n", MdpState::csv_header());
        for (s, a) in self.states.iter().zip(&self.actions) {
            let _ = writeln!(out, "{s},{a}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut p = Policy {
            states: Vec::new(),
            actions: Vec::new(),
        };
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(Error::Config(format!("bad policy row '{line}'")));
            }
            let num = |i: usize| -> Result<usize> {
                f[i].trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number '{}'", f[i])))
            };
            p.states.push(MdpState {
                loc: num(0)? as u8,
                fork: f[1].trim().parse()?,
                l1: num(2)?,
                l2: num(3)?,
                h1: num(4)?,
                h2: num(5)?,
                h3: num(6)?,
                mu1: num(7)?,
                mu2: num(8)?,
                mu3: num(9)?,
            });
            p.actions.push(f[10].trim().parse()?);
        }
        Ok(p)
    }
}

/// Bracket history of the search on ρ.
#[derive(Debug, Clone, Serialize)]
pub struct RhoSearch {
    pub lo: f64,
    pub hi: f64,
    pub epsilon: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    /// Alice's optimal relative revenue
    pub rho: f64,
    pub policy: Policy,
    pub search: RhoSearch,
    /// solution at the last ρ with non-negative gain
    pub solution: Solution,
}

/// Bisection on ρ for the zero of the optimal ρ-weighted gain.
pub fn solve_opt(model: &MdpModel, epsilon: f64) -> Result<OptResult> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut warm: Option<Vec<f64>> = None;
    let mut at_lo: Option<Solution> = None;
    let mut iterations = 0;
    while hi - lo > epsilon {
        let rho = 0.5 * (lo + hi);
        let sol = value_iterate(model, rho, SPAN_TOL, warm.as_deref())?;
        iterations += 1;
        warm = Some(sol.h.clone());
        if sol.gain > 0.0 {
            lo = rho;
            at_lo = Some(sol);
        } else {
            hi = rho;
        }
    }
    let rho = 0.5 * (lo + hi);
    let solution = match at_lo {
        Some(s) => s,
        None => value_iterate(model, lo, SPAN_TOL, warm.as_deref())?,
    };
    Ok(OptResult {
        rho,
        policy: Policy::from_solution(model, &solution),
        search: RhoSearch {
            lo,
            hi,
            epsilon,
            iterations,
        },
        solution,
    })
}
