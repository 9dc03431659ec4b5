//! Chains assembled as explicit transition matrices and solved numerically.
//! These check the closed forms.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::config::MinerConfig;
use crate::error::{Error, Result};
use crate::race::{Race, World};
use crate::report::{RevenueReport, StationaryDistribution};

/// Largest chain solved with a dense LU factorization; bigger ones iterate.
const DENSE_LIMIT: usize = 2500;

#[derive(Debug, Clone)]
pub struct MarkovChain {
    pub states: Vec<String>,
    /// sparse rows: (successor, probability)
    pub rows: Vec<Vec<(usize, f64)>>,
    /// expected blocks credited to each miner when leaving a state
    pub reward: Vec<Vec<f64>>,
    pub start: usize,
}

impl MarkovChain {
    fn with_states(states: Vec<String>, miners: usize) -> Self {
        let n = states.len();
        MarkovChain {
            states,
            rows: vec![Vec::new(); n],
            reward: vec![vec![0.0; miners]; n],
            start: 0,
        }
    }

    fn add(&mut self, from: usize, to: usize, p: f64, credit: &[(usize, f64)]) {
        if p <= 0.0 {
            return;
        }
        self.rows[from].push((to, p));
        for &(i, x) in credit {
            self.reward[from][i] += p * x;
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Solves π P = π, Σπ = 1.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n <= DENSE_LIMIT {
            let mut a = DMatrix::<f64>::zeros(n, n);
            for (s, row) in self.rows.iter().enumerate() {
                for &(t, p) in row {
                    a[(t, s)] += p;
                }
            }
            for i in 0..n {
                a[(i, i)] -= 1.0;
            }
            for j in 0..n {
                a[(0, j)] = 1.0;
            }
            let mut b = DVector::<f64>::zeros(n);
            b[0] = 1.0;
            let x = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::DegenerateModel("singular transition matrix".into()))?;
            Ok(x.iter().copied().collect())
        } else {
            self.stationary_iterative()
        }
    }

    fn stationary_iterative(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..1_000_000 {
            let mut next = vec![0.0; n];
            for (s, row) in self.rows.iter().enumerate() {
                next[s] += 0.5 * pi[s];
                for &(t, p) in row {
                    next[t] += 0.5 * p * pi[s];
                }
            }
            let z: f64 = next.iter().sum();
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a / z - b).abs()).sum();
            pi = next.into_iter().map(|x| x / z).collect();
            if diff < 1e-15 {
                return Ok(pi);
            }
        }
        Err(Error::NonConvergence { iterations: 1_000_000 })
    }

    /// max_s |π_s − Σ_s' π_s' P_s's|
    pub fn balance_residual(&self, pi: &[f64]) -> f64 {
        let mut inflow = vec![0.0; self.len()];
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, p) in row {
                inflow[t] += pi[s] * p;
            }
        }
        inflow.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn row_sums_ok(&self) -> bool {
        self.rows
            .iter()
            .all(|r| (r.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12)
    }

    pub fn report(&self, mined: &[f64]) -> Result<(RevenueReport, StationaryDistribution)> {
        let pi = self.stationary()?;
        let miners = mined.len();
        let mut r = vec![0.0; miners];
        for (s, p) in pi.iter().enumerate() {
            for i in 0..miners {
                r[i] += p * self.reward[s][i];
            }
        }
        let rep = RevenueReport::from_rates(r, mined, 1.0 / pi[self.start]);
        Ok((
            rep,
            StationaryDistribution {
                states: self.states.clone(),
                pi,
            },
        ))
    }
}

fn mined(cfg: &MinerConfig) -> Vec<f64> {
    let mut v = cfg.alpha.clone();
    v.push(cfg.alpha_h);
    v
}

/// The seven-state two-attacker chain with its per-transition credits.
pub fn n2_chain(cfg: &MinerConfig) -> Result<MarkovChain> {
    if cfg.m() != 2 {
        return Err(Error::ModelMismatch("needs two attackers".into()));
    }
    let (a1, a2, ah) = (cfg.alpha[0], cfg.alpha[1], cfg.alpha_h);
    let (g1, g2) = (cfg.gamma[0], cfg.gamma[1]);
    let (t1, t2) = (cfg.theta[0], cfg.theta[1]);
    let names = super::N2_STATES.iter().map(|s| s.to_string()).collect();
    let mut c = MarkovChain::with_states(names, 3);
    let (s000, s100, s010, s110, s101, s011, s111) = (0, 1, 2, 3, 4, 5, 6);
    const A: usize = 0;
    const B: usize = 1;
    const H: usize = 2;
    c.add(s000, s100, a1, &[]);
    c.add(s000, s010, a2, &[]);
    c.add(s000, s000, ah, &[(H, 1.0)]);

    c.add(s100, s000, a1, &[(A, 2.0)]);
    c.add(s100, s110, a2, &[]);
    c.add(s100, s101, ah, &[]);
    c.add(s010, s000, a2, &[(B, 2.0)]);
    c.add(s010, s110, a1, &[]);
    c.add(s010, s011, ah, &[]);

    c.add(s110, s000, a1, &[(A, 2.0)]);
    c.add(s110, s000, a2, &[(B, 2.0)]);
    c.add(s110, s111, ah, &[]);

    // Alice vs Henry
    c.add(s101, s000, a1, &[(A, 2.0)]);
    c.add(s101, s000, a2 * g1, &[(A, 1.0), (B, 1.0)]);
    c.add(s101, s000, a2 * (1.0 - g1), &[(H, 1.0), (B, 1.0)]);
    c.add(s101, s000, ah * g1, &[(A, 1.0), (H, 1.0)]);
    c.add(s101, s000, ah * (1.0 - g1), &[(H, 2.0)]);
    // Bob vs Henry
    c.add(s011, s000, a2, &[(B, 2.0)]);
    c.add(s011, s000, a1 * g2, &[(B, 1.0), (A, 1.0)]);
    c.add(s011, s000, a1 * (1.0 - g2), &[(H, 1.0), (A, 1.0)]);
    c.add(s011, s000, ah * g2, &[(B, 1.0), (H, 1.0)]);
    c.add(s011, s000, ah * (1.0 - g2), &[(H, 2.0)]);
    // three-way
    c.add(s111, s000, a1, &[(A, 2.0)]);
    c.add(s111, s000, a2, &[(B, 2.0)]);
    c.add(s111, s000, ah * t1, &[(A, 1.0), (H, 1.0)]);
    c.add(s111, s000, ah * t2, &[(B, 1.0), (H, 1.0)]);
    c.add(s111, s000, ah * (1.0 - t1 - t2), &[(H, 2.0)]);
    Ok(c)
}

/// One-block-per-attacker chain for m attackers: holder sets plus the tie
/// each set turns into when the honest miner finds a block.
pub fn m_attacker_chain(cfg: &MinerConfig) -> Result<MarkovChain> {
    let m = cfg.m();
    if m == 0 || m > 16 {
        return Err(Error::ModelMismatch(format!("m = {m}")));
    }
    let full = 1usize << m;
    let mut names: Vec<String> = (0..full).map(|mask| bits(mask, m)).collect();
    names.extend((1..full).map(|mask| format!("tie:{}", bits(mask, m))));
    let mut c = MarkovChain::with_states(names, m + 1);
    let tie = |mask: usize| full + mask - 1;
    let h = m;
    for mask in 0..full {
        if mask == 0 {
            c.add(0, 0, cfg.alpha_h, &[(h, 1.0)]);
        } else {
            c.add(mask, tie(mask), cfg.alpha_h, &[]);
        }
        for i in 0..m {
            if mask >> i & 1 == 1 {
                c.add(mask, 0, cfg.alpha[i], &[(i, 2.0)]);
            } else {
                c.add(mask, mask | 1 << i, cfg.alpha[i], &[]);
            }
        }
    }
    for mask in 1..full {
        let s = tie(mask);
        let owners: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).chain([h]).collect();
        let share = 1.0 / owners.len() as f64;
        for x in 0..=m {
            let px = cfg.power(x);
            if x < m && mask >> x & 1 == 1 {
                c.add(s, 0, px, &[(x, 2.0)]);
            } else {
                for &o in &owners {
                    c.add(s, 0, px * share, &[(x, 1.0), (o, 1.0)]);
                }
            }
        }
    }
    Ok(c)
}

fn bits(mask: usize, m: usize) -> String {
    (0..m).map(|j| if mask >> j & 1 == 1 { '1' } else { '0' }).collect()
}

/// Chain of settled race positions under the engine's BSM rules. Finite for
/// N ≤ 4; larger caps hit `limit`.
pub fn engine_chain(race: &Race, limit: usize) -> Result<MarkovChain> {
    let miners = race.m() + 1;
    let mut worlds = vec![race.start()];
    let mut index: HashMap<World, usize> = HashMap::from([(race.start(), 0)]);
    let mut rows = Vec::new();
    let mut reward = Vec::new();
    let mut i = 0;
    while i < worlds.len() {
        let w = worlds[i].clone();
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut rew = vec![0.0; miners];
        for (p, mut nw, _) in race.outcomes(&w) {
            let mut credit = vec![0u64; miners];
            nw.settle(&mut credit);
            for k in 0..miners {
                rew[k] += p * credit[k] as f64;
            }
            let j = match index.get(&nw) {
                Some(&j) => j,
                None => {
                    if worlds.len() >= limit {
                        return Err(Error::Capacity { limit });
                    }
                    index.insert(nw.clone(), worlds.len());
                    worlds.push(nw);
                    worlds.len() - 1
                }
            };
            match row.iter_mut().find(|(t, _)| *t == j) {
                Some(e) => e.1 += p,
                None => row.push((j, p)),
            }
        }
        rows.push(row);
        reward.push(rew);
        i += 1;
    }
    Ok(MarkovChain {
        states: worlds.iter().map(world_label).collect(),
        rows,
        reward,
        start: 0,
    })
}

fn world_label(w: &World) -> String {
    let chain = |c: &[u8]| c.iter().map(|o| o.to_string()).collect::<String>();
    let public: Vec<String> = w.public.iter().map(|c| chain(c)).collect();
    let private: Vec<String> = w
        .private
        .iter()
        .map(|p| match p {
            Some(p) => format!("{}+{}", chain(&p.chain[..p.base()]), p.hidden),
            None => "-".into(),
        })
        .collect();
    format!("[{}] [{}]", public.join(" "), private.join(" "))
}

/// Revenues of the BSM race computed from the enumerated engine chain.
pub fn engine_report(cfg: &MinerConfig, limit: usize) -> Result<RevenueReport> {
    let chain = engine_chain(&Race::bsm(cfg.clone()), limit)?;
    Ok(chain.report(&mined(cfg))?.0)
}

pub fn n2_chain_report(cfg: &MinerConfig) -> Result<RevenueReport> {
    Ok(n2_chain(cfg)?.report(&mined(cfg))?.0)
}

pub fn m_attacker_chain_report(cfg: &MinerConfig) -> Result<RevenueReport> {
    Ok(m_attacker_chain(cfg)?.report(&mined(cfg))?.0)
}
