//! Strategic mining when Alice only sees part of the state: her own chain,
//! the public height and the fork type. Bob's private chain and the
//! interleaving on his side are hidden and tracked by an exact Bayes filter.

mod search;
mod solve;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::config::MinerConfig;
use crate::error::{Error, Result};
use crate::mdp::{Fork, MdpAction, MdpModel, MdpState};

pub use search::{aems2, Budget, SearchModel, SearchOutcome};
pub use solve::{
    blind_values, qmdp_values, solve_pomdp, BeliefGraph, Planner, PomdpOptions, PomdpResult,
    UpperInit, DEFAULT_DISCOUNT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Observation {
    pub fork: Fork,
    pub l1: usize,
    pub h1: usize,
    pub h3: usize,
    pub mu1: usize,
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{}", self.fork, self.l1, self.h1, self.h3, self.mu1)
    }
}

pub fn observe(s: &MdpState) -> Observation {
    Observation {
        fork: s.fork,
        l1: s.l1,
        h1: s.h1,
        h3: s.h3,
        mu1: s.mu1,
    }
}

/// Grid used to round belief probabilities.
pub const QUANTUM: f64 = 1e-6;

/// Distribution over state ids of one model, sorted by id. Probabilities
/// are multiples of `QUANTUM` up to normalization; a state with positive
/// mass keeps at least one quantum so the support never collapses.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub support: Vec<(usize, f64)>,
}

pub(crate) type BeliefKey = Vec<(u32, u64)>;

impl Belief {
    pub fn point(id: usize) -> Self {
        Belief {
            support: vec![(id, 1.0)],
        }
    }

    pub fn mass(&self) -> f64 {
        self.support.iter().map(|x| x.1).sum()
    }

    pub fn get(&self, id: usize) -> f64 {
        self.support
            .binary_search_by_key(&id, |x| x.0)
            .map_or(0.0, |k| self.support[k].1)
    }

    /// Builds a canonical belief from unnormalized weights.
    pub(crate) fn quantized(weights: HashMap<usize, f64>) -> (Self, BeliefKey) {
        let total: f64 = weights.values().sum();
        let mut key: BeliefKey = weights
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(s, w)| (s as u32, ((w / total / QUANTUM).round() as u64).max(1)))
            .collect();
        key.sort_unstable();
        let units: u64 = key.iter().map(|x| x.1).sum();
        let support = key
            .iter()
            .map(|&(s, u)| (s as usize, u as f64 / units as f64))
            .collect();
        (Belief { support }, key)
    }

    pub(crate) fn key(&self) -> BeliefKey {
        Self::quantized(self.support.iter().copied().collect()).1
    }

    /// Σ b(s) v(s)
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.support.iter().map(|&(s, p)| p * v[s]).sum()
    }
}

/// The slotted decision problem seen through observations.
#[derive(Debug, Clone)]
pub struct PomdpModel {
    pub mdp: MdpModel,
    obs: Vec<Observation>,
}

impl PomdpModel {
    pub fn build(cfg: &MinerConfig, h3_max: usize, p: f64) -> Result<Self> {
        let mdp = MdpModel::build_with(cfg, h3_max, p, crate::mdp::DEFAULT_LIMIT)?;
        Self::from_mdp(mdp)
    }

    /// Wraps a model after checking that legal actions are a function of
    /// the observation.
    pub fn from_mdp(mdp: MdpModel) -> Result<Self> {
        let obs: Vec<Observation> = mdp.states.iter().map(observe).collect();
        let mut seen: HashMap<Observation, usize> = HashMap::new();
        for (i, o) in obs.iter().enumerate() {
            let j = *seen.entry(*o).or_insert(i);
            if mdp.actions[i] != mdp.actions[j] {
                return Err(Error::ModelMismatch(format!(
                    "actions at {} and {} differ under observation {o}",
                    mdp.states[i], mdp.states[j]
                )));
            }
        }
        Ok(PomdpModel { mdp, obs })
    }

    pub fn observation(&self, id: usize) -> Observation {
        self.obs[id]
    }

    pub fn start(&self) -> Belief {
        Belief::point(0)
    }

    pub fn actions(&self, b: &Belief) -> &[MdpAction] {
        &self.mdp.actions[b.support[0].0]
    }

    /// Expected (Alice, Bob, Henry) credit of taking action index `a`.
    pub fn expected_reward(&self, b: &Belief, a: usize) -> [f64; 3] {
        let mut r = [0.0; 3];
        for &(s, p) in &b.support {
            for e in &self.mdp.edges[s][a] {
                for c in 0..3 {
                    r[c] += p * e.p * e.r[c] as f64;
                }
            }
        }
        r
    }

    /// Posterior for every observation that can follow action index `a`,
    /// with its probability, in observation order.
    pub fn successors(&self, b: &Belief, a: usize) -> Vec<(Observation, f64, Belief, BeliefKey)> {
        let mut by_obs: HashMap<Observation, HashMap<usize, f64>> = HashMap::new();
        for &(s, p) in &b.support {
            for e in &self.mdp.edges[s][a] {
                *by_obs
                    .entry(self.obs[e.next])
                    .or_default()
                    .entry(e.next)
                    .or_insert(0.0) += p * e.p;
            }
        }
        let mut out: Vec<_> = by_obs
            .into_iter()
            .map(|(o, w)| {
                let pr: f64 = w.values().sum();
                let (nb, key) = Belief::quantized(w);
                (o, pr, nb, key)
            })
            .collect();
        out.sort_by(|x, y| x.0.cmp(&y.0));
        out
    }

    /// Bayes update after taking `a` and seeing `o`.
    pub fn belief_update(&self, b: &Belief, a: MdpAction, o: &Observation) -> Result<Belief> {
        let k = self
            .actions(b)
            .iter()
            .position(|&x| x == a)
            .ok_or_else(|| Error::IllegalAction {
                state: self.mdp.states[b.support[0].0].to_string(),
                action: a.to_string(),
            })?;
        self.successors(b, k)
            .into_iter()
            .find(|x| x.0 == *o && x.1 > 0.0)
            .map(|x| x.2)
            .ok_or(Error::ImpossibleObservation)
    }
}
