//! Search on ρ driven by simulated episodes. In each episode the planner
//! acts on beliefs while the hidden race runs on the full state; the
//! realized revenue tightens the lower end of the bracket.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use super::search::{aems2, Budget, SearchModel};
use super::{Belief, BeliefKey, Observation, PomdpModel};
use crate::config::MinerConfig;
use crate::error::{range, Error, Result};
use crate::mdp::{bsm_action, evaluate, honest_action, solve_opt, MdpAction, MdpModel, MdpState};
use crate::rng::RngStream;

/// Discount of the surrogate problem the planner solves at each decision.
pub const DEFAULT_DISCOUNT: f64 = 0.99;
const VALUE_TOL: f64 = 1e-10;
/// Batches used for the standard error of an episode's revenue.
const BATCHES: u64 = 20;

#[inline]
fn w(rho: f64, r: [f64; 3]) -> f64 {
    (1.0 - rho) * r[0] - rho * (r[1] + r[2])
}

/// Discounted optimal values of the fully observed model (the QMDP bound).
pub fn qmdp_values(mdp: &MdpModel, rho: f64, lambda: f64) -> Vec<f64> {
    discounted(mdp, rho, lambda, None)
}

/// Discounted values of a fixed rule; illegal choices become adopt.
pub fn blind_values(mdp: &MdpModel, rho: f64, lambda: f64, f: impl Fn(&MdpState) -> MdpAction) -> Vec<f64> {
    let (idx, _) = mdp.indices_for(f);
    discounted(mdp, rho, lambda, Some(&idx))
}

fn discounted(mdp: &MdpModel, rho: f64, lambda: f64, fixed: Option<&[usize]>) -> Vec<f64> {
    let n = mdp.len();
    let mut v = vec![0.0; n];
    loop {
        let mut delta = 0.0f64;
        let next: Vec<f64> = (0..n)
            .map(|s| {
                let q = |k: usize| -> f64 {
                    mdp.edges[s][k]
                        .iter()
                        .map(|e| {
                            let r = [e.r[0] as f64, e.r[1] as f64, e.r[2] as f64];
                            e.p * (w(rho, r) + lambda * v[e.next])
                        })
                        .sum()
                };
                match fixed {
                    Some(idx) => q(idx[s]),
                    None => (0..mdp.edges[s].len()).map(q).fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect();
        for s in 0..n {
            delta = delta.max((next[s] - v[s]).abs());
        }
        v = next;
        if delta * lambda / (1.0 - lambda) < VALUE_TOL {
            return v;
        }
    }
}

type Step = ([f64; 3], Vec<(Observation, f64, usize)>);

/// Interned beliefs and their successors. Independent of ρ, so it is kept
/// across the whole search.
pub struct BeliefGraph<'m> {
    pub model: &'m PomdpModel,
    beliefs: Vec<Belief>,
    index: HashMap<BeliefKey, usize>,
    steps: HashMap<(usize, usize), Step>,
}

impl<'m> BeliefGraph<'m> {
    pub fn new(model: &'m PomdpModel) -> Self {
        let start = model.start();
        BeliefGraph {
            model,
            index: HashMap::from([(start.key(), 0)]),
            beliefs: vec![start],
            steps: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn belief(&self, id: usize) -> &Belief {
        &self.beliefs[id]
    }

    fn intern(&mut self, b: Belief, key: BeliefKey) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.beliefs.push(b);
        self.index.insert(key, self.beliefs.len() - 1);
        self.beliefs.len() - 1
    }

    pub fn step(&mut self, b: usize, a: usize) -> &Step {
        if !self.steps.contains_key(&(b, a)) {
            let belief = self.beliefs[b].clone();
            let reward = self.model.expected_reward(&belief, a);
            let succ = self
                .model
                .successors(&belief, a)
                .into_iter()
                .map(|(o, p, nb, key)| (o, p, self.intern(nb, key)))
                .collect();
            self.steps.insert((b, a), (reward, succ));
        }
        &self.steps[&(b, a)]
    }
}

/// Planner state for one ρ.
pub struct Planner<'g, 'm> {
    pub graph: &'g mut BeliefGraph<'m>,
    pub rho: f64,
    pub lambda: f64,
    upper: Vec<f64>,
    lower: Vec<Vec<f64>>,
    bounds: HashMap<usize, (f64, f64)>,
}

impl<'g, 'm> Planner<'g, 'm> {
    pub fn new(graph: &'g mut BeliefGraph<'m>, rho: f64, lambda: f64) -> Self {
        let mdp = &graph.model.mdp;
        let n_max = mdp.cfg.n_max;
        let upper = qmdp_values(mdp, rho, lambda);
        let lower = vec![
            blind_values(mdp, rho, lambda, |s| bsm_action(s, n_max)),
            blind_values(mdp, rho, lambda, honest_action),
        ];
        Planner {
            graph,
            rho,
            lambda,
            upper,
            lower,
            bounds: HashMap::new(),
        }
    }

    pub fn choose(&mut self, b: usize, budget: Budget) -> Result<usize> {
        Ok(aems2(self, b, budget)?.action)
    }
}

impl SearchModel for Planner<'_, '_> {
    fn discount(&self) -> f64 {
        self.lambda
    }

    fn num_actions(&mut self, b: usize) -> usize {
        self.graph.model.actions(self.graph.belief(b)).len()
    }

    fn expand(&mut self, b: usize, a: usize) -> Result<(f64, Vec<(f64, usize)>)> {
        let rho = self.rho;
        let (r, succ) = self.graph.step(b, a);
        Ok((w(rho, *r), succ.iter().map(|&(_, p, c)| (p, c)).collect()))
    }

    fn bounds(&mut self, b: usize) -> (f64, f64) {
        if let Some(&x) = self.bounds.get(&b) {
            return x;
        }
        let belief = self.graph.belief(b);
        let up = belief.dot(&self.upper);
        let lo = self.lower.iter().map(|v| belief.dot(v)).fold(f64::NEG_INFINITY, f64::max);
        self.bounds.insert(b, (lo, up));
        (lo, up)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpperInit {
    /// start the bracket at the fully observed optimum
    Qmdp,
    One,
}

#[derive(Debug, Clone, Copy)]
pub struct PomdpOptions {
    pub h3_max: Option<usize>,
    pub p: f64,
    pub epsilon: f64,
    /// steps per episode
    pub xi: u64,
    pub seed: u64,
    pub budget: Budget,
    pub discount: f64,
    pub upper_init: UpperInit,
}

impl Default for PomdpOptions {
    fn default() -> Self {
        PomdpOptions {
            h3_max: None,
            p: 0.9,
            epsilon: 1e-5,
            xi: 1_000_000,
            seed: 0,
            budget: Budget::default(),
            discount: DEFAULT_DISCOUNT,
            upper_init: UpperInit::Qmdp,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PomdpResult {
    /// lower end of the final bracket
    pub rho: f64,
    pub upper: f64,
    /// Alice's relative revenue measured in the closing episode at `rho`
    pub revenue: f64,
    pub se: f64,
    pub iterations: usize,
    /// ρ* of the fully observed slotted model
    pub mdp_rho: f64,
    /// blind rules evaluated exactly on the slotted model
    pub honest: f64,
    pub bsm: f64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub beliefs: usize,
    /// times the measured revenue exceeded the upper end and was clamped
    pub clamped: usize,
}

#[derive(Debug, Clone, Copy)]
struct Episode {
    v: f64,
    revenue: f64,
    se: f64,
    hits: u64,
    misses: u64,
}

fn episode<R: Rng>(planner: &mut Planner, xi: u64, budget: Budget, rng: &mut R) -> Result<Episode> {
    let mut cache: HashMap<usize, usize> = HashMap::new();
    let (mut hits, mut misses) = (0, 0);
    let mut state = 0usize;
    let mut belief = 0usize;
    let mut total = [0u64; 3];
    let mut batch = vec![[0u64; 3]; BATCHES as usize];
    let per_batch = xi.div_ceil(BATCHES).max(1);
    for t in 0..xi {
        let a = match cache.get(&belief) {
            Some(&a) => {
                hits += 1;
                a
            }
            None => {
                misses += 1;
                let a = planner.choose(belief, budget)?;
                cache.insert(belief, a);
                a
            }
        };
        let edges = &planner.graph.model.mdp.edges[state][a];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = edges.len() - 1;
        for (k, e) in edges.iter().enumerate() {
            acc += e.p;
            if u < acc {
                pick = k;
                break;
            }
        }
        let e = edges[pick];
        let bi = (t / per_batch) as usize;
        for c in 0..3 {
            total[c] += e.r[c] as u64;
            batch[bi][c] += e.r[c] as u64;
        }
        let o = planner.graph.model.observation(e.next);
        let (_, succ) = planner.graph.step(belief, a);
        belief = succ
            .iter()
            .find(|x| x.0 == o)
            .map(|x| x.2)
            .ok_or(Error::ImpossibleObservation)?;
        state = e.next;
    }
    let n = xi as f64;
    let tf = [total[0] as f64, total[1] as f64, total[2] as f64];
    let all = tf[0] + tf[1] + tf[2];
    let revenue = if all > 0.0 { tf[0] / all } else { 0.0 };
    let nb = batch.iter().filter(|b| b.iter().sum::<u64>() > 0).count().max(2) as f64;
    let mean_v = all / nb;
    let ss: f64 = batch
        .iter()
        .map(|b| {
            let v = (b[0] + b[1] + b[2]) as f64;
            (b[0] as f64 - revenue * v).powi(2)
        })
        .sum();
    let se = if mean_v > 0.0 {
        (ss / (nb * (nb - 1.0))).sqrt() / mean_v
    } else {
        0.0
    };
    Ok(Episode {
        v: w(planner.rho, tf) / n,
        revenue,
        se,
        hits,
        misses,
    })
}

/// Bisection on ρ with planner-driven episodes; see the module notes.
pub fn solve_pomdp(cfg: &MinerConfig, opts: &PomdpOptions) -> Result<PomdpResult> {
    if !(opts.epsilon > 0.0) {
        return Err(range("epsilon", opts.epsilon));
    }
    if opts.xi == 0 {
        return Err(range("xi", 0.0));
    }
    if !(opts.discount > 0.0 && opts.discount < 1.0) {
        return Err(range("discount", opts.discount));
    }
    let h3_max = opts.h3_max.unwrap_or(cfg.n_max + 1);
    let model = PomdpModel::build(cfg, h3_max, opts.p)?;
    solve_on(&model, opts)
}

pub(crate) fn solve_on(model: &PomdpModel, opts: &PomdpOptions) -> Result<PomdpResult> {
    let mdp = &model.mdp;
    let n_max = mdp.cfg.n_max;
    let share = |g: [f64; 3]| {
        let s = g[0] + g[1] + g[2];
        if s > 0.0 { g[0] / s } else { 0.0 }
    };
    let honest = share(evaluate(mdp, honest_action)?.0);
    let bsm = share(evaluate(mdp, |s| bsm_action(s, n_max))?.0);
    let mdp_rho = solve_opt(mdp, opts.epsilon.min(1e-6))?.rho;

    let mut graph = BeliefGraph::new(model);
    let (mut lo, mut hi) = match opts.upper_init {
        UpperInit::Qmdp => (0.0, mdp_rho),
        UpperInit::One => (0.0, 1.0),
    };
    let (mut hits, mut misses, mut clamped) = (0, 0, 0);
    let mut iterations = 0;
    while hi - lo > opts.epsilon {
        let rho = 0.5 * (lo + hi);
        let mut rng = RngStream::new(opts.seed, iterations as u64).rng();
        iterations += 1;
        let mut planner = Planner::new(&mut graph, rho, opts.discount);
        let ep = episode(&mut planner, opts.xi, opts.budget, &mut rng)?;
        hits += ep.hits;
        misses += ep.misses;
        if ep.v > 0.0 {
            let next = rho.max(ep.revenue);
            if next > hi {
                clamped += 1;
            }
            lo = next.min(hi);
        } else {
            hi = rho;
        }
    }
    let mut rng = RngStream::new(opts.seed, u64::from(u32::MAX)).rng();
    let mut planner = Planner::new(&mut graph, lo, opts.discount);
    let last = episode(&mut planner, opts.xi, opts.budget, &mut rng)?;
    Ok(PomdpResult {
        rho: lo,
        upper: hi,
        revenue: last.revenue,
        se: last.se,
        iterations,
        mdp_rho,
        honest,
        bsm,
        cache_hits: hits + last.hits,
        cache_misses: misses + last.misses,
        beliefs: graph.len(),
        clamped,
    })
}
