use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::Serialize;

use super::{MdpAction, MdpState};
use crate::config::MinerConfig;
use crate::error::{range, Error, Result};
use crate::race::{Race, Strategy, World};

/// A concrete race position plus the "last event changed the public tips" flag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Structural {
    pub world: World,
    pub released: bool,
}

impl Structural {
    pub fn start() -> Self {
        Structural {
            world: World::start(2),
            released: false,
        }
    }

    pub fn encode(&self) -> MdpState {
        MdpState::encode(&self.world, self.released)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionEntry {
    pub prob: f64,
    pub next: MdpState,
    /// blocks credited to (Alice, Bob, Henry)
    pub reward: [u32; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Edge {
    pub p: f64,
    pub next: usize,
    pub r: [u32; 3],
}

/// Enumerated decision problem. With `slot_p < 1` every step is a time slot
/// in which a block appears with probability `slot_p`; an empty slot leaves
/// the position alone but ends the chance to race a fresh release.
#[derive(Debug, Clone)]
pub struct MdpModel {
    pub cfg: MinerConfig,
    pub h3_max: usize,
    pub slot_p: f64,
    pub states: Vec<MdpState>,
    pub index: HashMap<MdpState, usize>,
    pub reps: Vec<Structural>,
    pub actions: Vec<Vec<MdpAction>>,
    pub(crate) edges: Vec<Vec<Vec<Edge>>>,
    pub race: Race,
}

pub const DEFAULT_LIMIT: usize = 2_000_000;

fn check(cfg: &MinerConfig, h3_max: usize, slot_p: f64) -> Result<Race> {
    if cfg.m() != 2 {
        return Err(Error::ModelMismatch(format!(
            "the strategic model needs two attackers, got {}",
            cfg.m()
        )));
    }
    if h3_max < cfg.n_max + 1 {
        return Err(range("h3_max", h3_max as f64));
    }
    if !(slot_p > 0.0 && slot_p <= 1.0) {
        return Err(range("p", slot_p));
    }
    Ok(Race::new(cfg.clone(), vec![Strategy::Controlled, Strategy::Bsm]))
}

fn step(race: &Race, slot_p: f64, s: &Structural, a: MdpAction) -> Vec<(f64, Structural, [u32; 3])> {
    let mut w = s.world.clone();
    race.apply(&mut w, 0, a);
    let mut out = Vec::new();
    if slot_p < 1.0 {
        let mut idle = w.clone();
        let mut credit = [0u64; 3];
        idle.settle(&mut credit);
        out.push((1.0 - slot_p, Structural { world: idle, released: false }, to_r(credit)));
    }
    for (pr, mut nw, ev) in race.outcomes(&w) {
        let mut credit = [0u64; 3];
        nw.settle(&mut credit);
        out.push((slot_p * pr, Structural { world: nw, released: ev.released }, to_r(credit)));
    }
    out
}

fn to_r(c: [u64; 3]) -> [u32; 3] {
    [c[0] as u32, c[1] as u32, c[2] as u32]
}

fn merge(raw: Vec<(f64, usize, [u32; 3])>) -> Vec<Edge> {
    let mut acc: BTreeMap<(usize, [u32; 3]), f64> = BTreeMap::new();
    for (p, j, r) in raw {
        *acc.entry((j, r)).or_insert(0.0) += p;
    }
    acc.into_iter().map(|((next, r), p)| Edge { p, next, r }).collect()
}

impl MdpModel {
    pub fn build(cfg: &MinerConfig, h3_max: usize) -> Result<Self> {
        Self::build_with(cfg, h3_max, 1.0, DEFAULT_LIMIT)
    }

    pub fn build_with(cfg: &MinerConfig, h3_max: usize, slot_p: f64, limit: usize) -> Result<Self> {
        let race = check(cfg, h3_max, slot_p)?;
        let mut model = MdpModel {
            cfg: cfg.clone(),
            h3_max,
            slot_p,
            states: vec![MdpState::start()],
            index: HashMap::from([(MdpState::start(), 0)]),
            reps: vec![Structural::start()],
            actions: Vec::new(),
            edges: Vec::new(),
            race,
        };
        let mut i = 0;
        while i < model.states.len() {
            let rep = model.reps[i].clone();
            let acts = model.race.legal(&rep.world, rep.released, 0, h3_max);
            let mut per_action = Vec::with_capacity(acts.len());
            for &a in &acts {
                let mut raw = Vec::new();
                for (p, ns, r) in step(&model.race, slot_p, &rep, a) {
                    let t = ns.encode();
                    let j = match model.index.get(&t) {
                        Some(&j) => j,
                        None => {
                            if model.states.len() >= limit {
                                return Err(Error::Capacity { limit });
                            }
                            model.index.insert(t, model.states.len());
                            model.states.push(t);
                            model.reps.push(ns);
                            model.states.len() - 1
                        }
                    };
                    raw.push((p, j, r));
                }
                per_action.push(merge(raw));
            }
            model.actions.push(acts);
            model.edges.push(per_action);
            i += 1;
        }
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn id(&self, s: &MdpState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn action_index(&self, s: usize, a: MdpAction) -> Option<usize> {
        self.actions[s].iter().position(|&x| x == a)
    }

    pub fn transitions(&self, s: &MdpState, a: MdpAction) -> Result<Vec<TransitionEntry>> {
        let illegal = || Error::IllegalAction {
            state: s.to_string(),
            action: a.to_string(),
        };
        let i = self.id(s).ok_or_else(illegal)?;
        let k = self.action_index(i, a).ok_or_else(illegal)?;
        Ok(self.edges[i][k]
            .iter()
            .map(|e| TransitionEntry {
                prob: e.p,
                next: self.states[e.next],
                reward: e.r,
            })
            .collect())
    }

    /// Maps a policy over tuples to action indices, falling back to adopt
    /// (or the first legal action) where the policy's choice is illegal.
    /// Returns the indices and the number of fallbacks.
    pub fn indices_for(&self, f: impl Fn(&MdpState) -> MdpAction) -> (Vec<usize>, usize) {
        let mut misses = 0;
        let idx = (0..self.len())
            .map(|s| {
                let a = f(&self.states[s]);
                self.action_index(s, a).unwrap_or_else(|| {
                    misses += 1;
                    self.action_index(s, MdpAction::Adopt).unwrap_or(0)
                })
            })
            .collect();
        (idx, misses)
    }
}

/// All reachable tuples from the round start.
pub fn enumerate_states(cfg: &MinerConfig, h3_max: usize, limit: usize) -> Result<Vec<MdpState>> {
    Ok(MdpModel::build_with(cfg, h3_max, 1.0, limit)?.states)
}

/// Outgoing structure of one concrete position: legal actions and, per
/// action, the successor distribution as (prob, successor id, reward).
pub type StructuralEdges = Vec<(MdpAction, Vec<(f64, usize, [u32; 3])>)>;

/// Breadth-first search over concrete positions instead of tuples. Used to
/// confirm that positions sharing a tuple behave identically.
pub fn structural_space(
    cfg: &MinerConfig,
    h3_max: usize,
    slot_p: f64,
    limit: usize,
) -> Result<(Vec<Structural>, Vec<StructuralEdges>)> {
    let race = check(cfg, h3_max, slot_p)?;
    let mut nodes = vec![Structural::start()];
    let mut index = HashMap::from([(Structural::start(), 0usize)]);
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let s = nodes[i].clone();
        let mut per = Vec::new();
        for a in race.legal(&s.world, s.released, 0, h3_max) {
            let mut outs = Vec::new();
            for (p, ns, r) in step(&race, slot_p, &s, a) {
                let j = match index.get(&ns) {
                    Some(&j) => j,
                    None => {
                        if nodes.len() >= limit {
                            return Err(Error::Capacity { limit });
                        }
                        index.insert(ns.clone(), nodes.len());
                        nodes.push(ns);
                        queue.push_back(nodes.len() - 1);
                        nodes.len() - 1
                    }
                };
                outs.push((p, j, r));
            }
            per.push((a, outs));
        }
        while edges.len() <= i {
            edges.push(Vec::new());
        }
        edges[i] = per;
    }
    Ok((nodes, edges))
}
