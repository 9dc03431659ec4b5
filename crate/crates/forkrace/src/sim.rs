//! Monte Carlo race: whole mining rounds, one block event at a time.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::bisect_threshold;
use crate::config::MinerConfig;
use crate::error::{range, Error, Result};
use crate::mdp::{MdpAction, MdpState};
use crate::race::{Mined, Race, Strategy, World};
use crate::report::{RevenueReport, ThresholdResult};
use crate::rng::RngStream;

/// Replication streams per run. Fixed so results do not depend on the
/// number of threads.
pub const STREAMS: u64 = 16;

/// Decision rule for a controlled attacker (attacker 0 of two).
#[derive(Clone)]
pub struct Driver {
    pub decide: Arc<dyn Fn(&MdpState) -> Option<MdpAction> + Send + Sync>,
    /// public-height cap used to check legality
    pub h3_max: usize,
}

impl Driver {
    pub fn new(h3_max: usize, f: impl Fn(&MdpState) -> Option<MdpAction> + Send + Sync + 'static) -> Self {
        Driver {
            decide: Arc::new(f),
            h3_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundOutcome {
    pub valid: Vec<u64>,
    pub orphaned: Vec<u64>,
    /// blocks mined this round
    pub events: u64,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    rounds: u64,
    valid: Vec<u64>,
    mined: Vec<u64>,
    /// Σ v_i², Σ v_i V, Σ V² over rounds (V = valid blocks in the round)
    sq: Vec<f64>,
    cross: Vec<f64>,
    v_sq: f64,
    events_sq: f64,
    max_cascade: usize,
    max_hidden: usize,
    fallbacks: u64,
}

impl Acc {
    fn new(miners: usize) -> Self {
        Acc {
            valid: vec![0; miners],
            mined: vec![0; miners],
            sq: vec![0.0; miners],
            cross: vec![0.0; miners],
            ..Default::default()
        }
    }

    fn add_round(&mut self, valid: &[u64], mined: &[u64]) {
        let v: u64 = valid.iter().sum();
        let e: u64 = mined.iter().sum();
        self.rounds += 1;
        for i in 0..valid.len() {
            self.valid[i] += valid[i];
            self.mined[i] += mined[i];
            self.sq[i] += (valid[i] * valid[i]) as f64;
            self.cross[i] += (valid[i] * v) as f64;
        }
        self.v_sq += (v * v) as f64;
        self.events_sq += (e * e) as f64;
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.rounds += o.rounds;
        for i in 0..self.valid.len() {
            self.valid[i] += o.valid[i];
            self.mined[i] += o.mined[i];
            self.sq[i] += o.sq[i];
            self.cross[i] += o.cross[i];
        }
        self.v_sq += o.v_sq;
        self.events_sq += o.events_sq;
        self.max_cascade = self.max_cascade.max(o.max_cascade);
        self.max_hidden = self.max_hidden.max(o.max_hidden);
        self.fallbacks += o.fallbacks;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimStats {
    pub rounds: u64,
    /// relative revenue per miner (attackers, then honest)
    pub r_hat: Vec<f64>,
    /// standard error of each `r_hat`
    pub se: Vec<f64>,
    /// orphaned / mined per miner
    pub orphan_ratio: Vec<f64>,
    /// mean valid and total blocks per round
    pub r_vld: f64,
    pub r_tot: f64,
    pub valid: Vec<u64>,
    pub mined: Vec<u64>,
    /// deepest chain reaction seen (publication rounds after one block)
    pub max_cascade: usize,
    /// longest private lead held by a BSM attacker between events
    pub max_hidden: usize,
    /// controlled decisions that were illegal or unknown and fell back to adopt
    pub fallbacks: u64,
}

impl SimStats {
    fn from_acc(a: Acc) -> Self {
        let n = a.rounds as f64;
        let total_v: u64 = a.valid.iter().sum();
        let total_e: u64 = a.mined.iter().sum();
        let mean_v = total_v as f64 / n;
        let miners = a.valid.len();
        let mut r_hat = vec![0.0; miners];
        let mut se = vec![0.0; miners];
        for i in 0..miners {
            let r = if total_v > 0 { a.valid[i] as f64 / total_v as f64 } else { 0.0 };
            r_hat[i] = r;
            // delta method for a ratio of means
            let ss = (a.sq[i] - 2.0 * r * a.cross[i] + r * r * a.v_sq) / n;
            se[i] = if mean_v > 0.0 { (ss.max(0.0) / n).sqrt() / mean_v } else { 0.0 };
        }
        let orphan_ratio = (0..miners)
            .map(|i| {
                if a.mined[i] > 0 {
                    (a.mined[i] - a.valid[i]) as f64 / a.mined[i] as f64
                } else {
                    0.0
                }
            })
            .collect();
        SimStats {
            rounds: a.rounds,
            r_hat,
            se,
            orphan_ratio,
            r_vld: mean_v,
            r_tot: total_e as f64 / n,
            valid: a.valid,
            mined: a.mined,
            max_cascade: a.max_cascade,
            max_hidden: a.max_hidden,
            fallbacks: a.fallbacks,
        }
    }

    /// Per-event rates in the same layout as the analytic reports.
    pub fn report(&self) -> RevenueReport {
        let e: u64 = self.mined.iter().sum();
        let e = e.max(1) as f64;
        let r: Vec<f64> = self.valid.iter().map(|&v| v as f64 / e).collect();
        let mined: Vec<f64> = self.mined.iter().map(|&v| v as f64 / e).collect();
        RevenueReport::from_rates(r, &mined, self.r_tot)
    }

    pub fn orphan_ratio_h(&self) -> f64 {
        *self.orphan_ratio.last().unwrap()
    }
}

/// Draws the miner of the next block.
pub fn next_miner<R: rand::Rng>(cfg: &MinerConfig, rng: &mut R) -> usize {
    crate::race::next_miner(cfg, rng)
}

/// Applies one block event for a BSM race: the finder's own move, then every
/// other attacker's response until the public view settles.
pub fn bsm_step(race: &Race, w: &mut World, miner: usize, tip: usize) -> Result<Mined> {
    let ev = race.mine(w, miner, tip);
    if ev.cascade > race.m() * race.cfg.n_max + 1 {
        return Err(Error::InvariantViolation(format!("cascade of depth {}", ev.cascade)));
    }
    Ok(ev)
}

/// Picks the tip a block lands on among tied public chains.
pub fn resolve_tie<R: rand::Rng>(race: &Race, w: &World, miner: usize, rng: &mut R) -> usize {
    race.resolve_tie(w, miner, rng)
}

fn play_round<R: rand::Rng>(
    race: &Race,
    driver: Option<&Driver>,
    rng: &mut R,
    acc: &mut Acc,
) -> Result<RoundOutcome> {
    let miners = race.m() + 1;
    let mut w = race.start();
    let mut released = false;
    let mut valid = vec![0u64; miners];
    let mut mined = vec![0u64; miners];
    loop {
        if let Some(d) = driver {
            let s = MdpState::encode(&w, released);
            let legal = race.legal(&w, released, 0, d.h3_max);
            let a = match (d.decide)(&s) {
                Some(a) if legal.contains(&a) => a,
                _ => {
                    acc.fallbacks += 1;
                    MdpAction::Adopt
                }
            };
            if a != MdpAction::WAIT {
                race.apply(&mut w, 0, a);
            }
        }
        let miner = race.next_miner(rng);
        let tip = if race.on_public(&w, miner) {
            race.resolve_tie(&w, miner, rng)
        } else {
            0
        };
        let ev = bsm_step(race, &mut w, miner, tip)?;
        mined[miner] += 1;
        released = ev.released;
        acc.max_cascade = acc.max_cascade.max(ev.cascade);
        for (j, p) in w.private.iter().enumerate() {
            if let Some(p) = p {
                if race.strategies[j] == Strategy::Bsm {
                    acc.max_hidden = acc.max_hidden.max(p.hidden);
                }
            }
        }
        w.settle(&mut valid);
        if w.is_start() {
            break;
        }
    }
    acc.add_round(&valid, &mined);
    let orphaned = mined.iter().zip(&valid).map(|(m, v)| m - v).collect();
    Ok(RoundOutcome {
        valid,
        orphaned,
        events: mined.iter().sum(),
    })
}

/// Simulates `rounds` complete rounds split over fixed replication streams.
pub fn run(race: &Race, driver: Option<&Driver>, rounds: u64, seed: u64) -> Result<SimStats> {
    if rounds == 0 {
        return Err(Error::Config("rounds must be ≥ 1".into()));
    }
    if driver.is_some() && (race.m() != 2 || race.strategies[0] != Strategy::Controlled) {
        return Err(Error::ModelMismatch(
            "a driver controls attacker 0 of two and needs Strategy::Controlled".into(),
        ));
    }
    let miners = race.m() + 1;
    let parts: Vec<Result<Acc>> = (0..STREAMS)
        .into_par_iter()
        .map(|k| {
            let n = rounds / STREAMS + u64::from(k < rounds % STREAMS);
            let mut rng = RngStream::new(seed, k).rng();
            let mut acc = Acc::new(miners);
            for _ in 0..n {
                play_round(race, driver, &mut rng, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Acc::new(miners);
    for p in parts {
        total = total.merge(p?);
    }
    Ok(SimStats::from_acc(total))
}

/// Plays a single round with a given rng (for tracing and tests).
pub fn round<R: rand::Rng>(race: &Race, rng: &mut R) -> Result<RoundOutcome> {
    let mut acc = Acc::new(race.m() + 1);
    play_round(race, None, rng, &mut acc)
}

pub fn run_bsm(cfg: &MinerConfig, rounds: u64, seed: u64) -> Result<SimStats> {
    run(&Race::bsm(cfg.clone()), None, rounds, seed)
}

/// Bracket width at which the simulated threshold search stops.
pub const SIM_THRESHOLD_TOL: f64 = 0.002;

/// Symmetric threshold from simulation. Every point reuses `seed`, so the
/// curve is smooth in α (common random numbers). The attackers' mean
/// relative revenue is compared with α.
pub fn simulate_threshold(
    template: &MinerConfig,
    rounds: u64,
    seed: u64,
    bracket: (f64, f64),
) -> Result<ThresholdResult> {
    let m = template.m();
    if bracket.1 * m as f64 >= 1.0 || bracket.0 <= 0.0 {
        return Err(range("alpha", bracket.1));
    }
    let excess = |a: f64| -> Result<(f64, f64)> {
        let stats = run_bsm(&template.with_symmetric_alpha(a), rounds, seed)?;
        let mean = stats.r_hat[..m].iter().sum::<f64>() / m as f64;
        Ok((mean - a, mean))
    };
    bisect_threshold(excess, bracket.0, bracket.1, SIM_THRESHOLD_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn honest_only_round_is_one_block() {
        let cfg = MinerConfig::two(0.0, 0.0, 2).unwrap();
        let race = Race::bsm(cfg);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r = round(&race, &mut rng).unwrap();
        assert_eq!(r.valid, vec![0, 0, 1]);
        assert_eq!(r.events, 1);
    }

    #[test]
    fn zero_rounds_rejected() {
        let cfg = MinerConfig::two(0.3, 0.2, 2).unwrap();
        assert!(run_bsm(&cfg, 0, 1).is_err());
    }
}
