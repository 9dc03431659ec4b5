//! Block race between m withholding attackers and one honest miner.
//!
//! Chains are stored as owner sequences measured from the last block every
//! miner agrees on. Settling strips that common prefix and credits it.

use rand::Rng;

use crate::config::MinerConfig;
use crate::mdp::MdpAction;

pub type Owner = u8;
pub type Chain = Vec<Owner>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Honest,
    Bsm,
    /// never reacts on its own; actions come from outside
    Controlled,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Private {
    pub chain: Chain,
    /// l: blocks at the end of `chain` nobody else has seen
    pub hidden: usize,
}

impl Private {
    /// Length of the published part.
    pub fn base(&self) -> usize {
        self.chain.len() - self.hidden
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct World {
    /// longest public chains, sorted, all the same length
    pub public: Vec<Chain>,
    pub private: Vec<Option<Private>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Mined {
    /// the set of public tips changed
    pub released: bool,
    /// publication rounds in the reaction that followed
    pub cascade: usize,
}

impl World {
    pub fn start(m: usize) -> Self {
        World {
            public: vec![Vec::new()],
            private: vec![None; m],
        }
    }

    pub fn height(&self) -> usize {
        self.public[0].len()
    }

    pub fn is_start(&self) -> bool {
        self.public.len() == 1 && self.public[0].is_empty() && self.private.iter().all(Option::is_none)
    }

    pub fn is_tie(&self) -> bool {
        self.public.len() > 1
    }

    /// Adds a chain to the public view. Longer chains replace the tips,
    /// equal ones join them.
    pub fn publish(&mut self, chain: Chain) {
        let h = self.height();
        if chain.len() > h {
            self.public = vec![chain];
        } else if chain.len() == h {
            if let Err(pos) = self.public.binary_search(&chain) {
                self.public.insert(pos, chain);
            }
        }
    }

    /// Strips the prefix shared by every public and private chain and
    /// credits its blocks. Returns the number of blocks settled.
    pub fn settle(&mut self, credit: &mut [u64]) -> usize {
        let first = &self.public[0];
        let mut k = first.len();
        for c in self.public.iter().chain(self.private.iter().flatten().map(|p| &p.chain)) {
            k = k.min(c.len());
            k = k.min(c.iter().zip(first).take_while(|(a, b)| a == b).count());
        }
        if k == 0 {
            return 0;
        }
        for &o in &first[..k] {
            credit[o as usize] += 1;
        }
        for c in self.public.iter_mut() {
            c.drain(..k);
        }
        for p in self.private.iter_mut().flatten() {
            p.chain.drain(..k);
        }
        k
    }
}

/// Branch owner of each tied tip: the last attacker block after the point
/// where the tip leaves its closest sibling, or the honest miner if there is none.
pub fn labels(tips: &[Chain], henry: Owner) -> Vec<Owner> {
    tips.iter()
        .enumerate()
        .map(|(i, t)| {
            let k = tips
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, u)| t.iter().zip(u).take_while(|(a, b)| a == b).count())
                .max()
                .unwrap_or(0);
            t[k..].iter().rev().copied().find(|&o| o != henry).unwrap_or(henry)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Race {
    pub cfg: MinerConfig,
    pub strategies: Vec<Strategy>,
}

impl Race {
    pub fn new(cfg: MinerConfig, strategies: Vec<Strategy>) -> Self {
        assert_eq!(cfg.m(), strategies.len());
        Race { cfg, strategies }
    }

    pub fn bsm(cfg: MinerConfig) -> Self {
        let m = cfg.m();
        Race::new(cfg, vec![Strategy::Bsm; m])
    }

    pub fn m(&self) -> usize {
        self.cfg.m()
    }

    pub fn henry(&self) -> Owner {
        self.m() as Owner
    }

    pub fn start(&self) -> World {
        World::start(self.m())
    }

    /// Probability that a block by `miner` lands on each public tip.
    pub fn tip_weights(&self, tips: &[Chain], miner: usize) -> Vec<f64> {
        let n = tips.len();
        if n == 1 {
            return vec![1.0];
        }
        let m = self.m();
        let h = self.henry();
        let lab = labels(tips, h);
        if miner < m {
            let own = lab.iter().filter(|&&o| o as usize == miner).count();
            if own > 0 {
                return lab
                    .iter()
                    .map(|&o| if o as usize == miner { 1.0 / own as f64 } else { 0.0 })
                    .collect();
            }
        }
        let mut distinct = lab.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let uniform = vec![1.0 / n as f64; n];
        if distinct.len() != n {
            return uniform;
        }
        let has_h = lab.contains(&h);
        match (n, m, has_h) {
            (2, _, true) => {
                let i = *lab.iter().find(|&&o| o != h).unwrap() as usize;
                let g = self.cfg.gamma[i];
                lab.iter().map(|&o| if o == h { 1.0 - g } else { g }).collect()
            }
            (2, 2, false) => {
                let (b1, b2) = self.cfg.beta();
                lab.iter().map(|&o| if o == 0 { b1 } else { b2 }).collect()
            }
            (3, 2, true) => {
                let t = &self.cfg.theta;
                lab.iter()
                    .map(|&o| if o == h { 1.0 - t[0] - t[1] } else { t[o as usize] })
                    .collect()
            }
            _ => uniform,
        }
    }

    /// Whether a block by `miner` is placed on a public tip (as opposed to
    /// extending a private chain).
    pub fn on_public(&self, w: &World, miner: usize) -> bool {
        miner >= self.m() || w.private[miner].is_none()
    }

    /// BSM attackers respond to the public view until nothing changes:
    /// behind gives up, level or one ahead publishes everything, further
    /// ahead keeps waiting. All responses to one snapshot happen together.
    pub fn react(&self, w: &mut World) -> usize {
        let mut rounds = 0;
        loop {
            let h = w.height();
            let mut pubs: Vec<Chain> = Vec::new();
            let mut changed = false;
            for j in 0..self.m() {
                if self.strategies[j] != Strategy::Bsm {
                    continue;
                }
                let Some(len) = w.private[j].as_ref().map(|p| p.chain.len()) else {
                    continue;
                };
                if len < h {
                    w.private[j] = None;
                    changed = true;
                } else if len <= h + 1 {
                    pubs.push(w.private[j].take().unwrap().chain);
                    changed = true;
                }
            }
            if pubs.is_empty() {
                if !changed {
                    break;
                }
                continue;
            }
            rounds += 1;
            let mh = pubs.iter().map(Vec::len).max().unwrap();
            if mh > h {
                let mut tips: Vec<Chain> = pubs.into_iter().filter(|c| c.len() == mh).collect();
                tips.sort();
                tips.dedup();
                w.public = tips;
            } else {
                for c in pubs {
                    w.publish(c);
                }
            }
        }
        rounds
    }

    /// One block found by `miner`. `tip` picks the public tip when the block
    /// goes on the public view and is ignored otherwise.
    pub fn mine(&self, w: &mut World, miner: usize, tip: usize) -> Mined {
        let m = self.m();
        let n_max = self.cfg.n_max;
        if miner < m {
            if let Some(p) = w.private[miner].as_mut() {
                p.chain.push(miner as Owner);
                p.hidden += 1;
                if self.strategies[miner] == Strategy::Bsm && p.hidden >= n_max {
                    let c = w.private[miner].take().unwrap().chain;
                    w.publish(c);
                    let cascade = self.react(w);
                    return Mined {
                        released: true,
                        cascade,
                    };
                }
                return Mined::default();
            }
        }
        let mut chain = w.public[tip].clone();
        chain.push(miner as Owner);
        let publish_now = if miner >= m {
            true
        } else {
            match self.strategies[miner] {
                Strategy::Honest => true,
                Strategy::Bsm => w.is_tie() || n_max <= 1,
                Strategy::Controlled => {
                    w.is_tie() && !labels(&w.public, self.henry()).contains(&(miner as Owner))
                }
            }
        };
        if publish_now {
            w.public = vec![chain];
            let cascade = self.react(w);
            Mined {
                released: true,
                cascade,
            }
        } else {
            w.private[miner] = Some(Private { chain, hidden: 1 });
            Mined::default()
        }
    }

    /// Every possible next block with its probability. States are not settled.
    pub fn outcomes(&self, w: &World) -> Vec<(f64, World, Mined)> {
        let mut out = Vec::new();
        for miner in 0..=self.m() {
            let pm = self.cfg.power(miner);
            if pm <= 0.0 {
                continue;
            }
            if self.on_public(w, miner) {
                for (t, wt) in self.tip_weights(&w.public, miner).into_iter().enumerate() {
                    if wt > 0.0 {
                        let mut nw = w.clone();
                        let ev = self.mine(&mut nw, miner, t);
                        out.push((pm * wt, nw, ev));
                    }
                }
            } else {
                let mut nw = w.clone();
                let ev = self.mine(&mut nw, miner, 0);
                out.push((pm, nw, ev));
            }
        }
        out
    }

    /// Categorical draw of the next block's finder.
    pub fn next_miner<R: Rng>(&self, rng: &mut R) -> usize {
        next_miner(&self.cfg, rng)
    }

    /// Draws the tip a block lands on when several public chains are tied.
    pub fn resolve_tie<R: Rng>(&self, w: &World, miner: usize, rng: &mut R) -> usize {
        if w.public.len() == 1 {
            return 0;
        }
        let wts = self.tip_weights(&w.public, miner);
        pick(&wts, rng.random::<f64>())
    }

    pub fn sample<R: Rng>(&self, w: &mut World, rng: &mut R) -> (usize, Mined) {
        let miner = self.next_miner(rng);
        let tip = if self.on_public(w, miner) {
            self.resolve_tie(w, miner, rng)
        } else {
            0
        };
        (miner, self.mine(w, miner, tip))
    }

    /// Actions open to the controlled attacker `c`. `released` says whether
    /// the last block event changed the public tips (a same-height release
    /// can still compete). `h3_max` bounds the public height: at the cap
    /// only releases reaching it are allowed, above it only overrides.
    pub fn legal(&self, w: &World, released: bool, c: usize, h3_max: usize) -> Vec<MdpAction> {
        let Some(p) = w.private[c].as_ref() else {
            return vec![MdpAction::Release(0)];
        };
        let ph = w.height();
        let base = p.base();
        let mut acts = Vec::new();
        if p.hidden < self.cfg.n_max && (ph < h3_max || base >= ph) {
            acts.push(MdpAction::Release(0));
        }
        for k in 1..=p.hidden {
            let hp = base + k;
            if (ph > h3_max && hp <= ph) || (ph == h3_max && hp < ph) {
                continue;
            }
            if hp > ph || (hp == ph && (released || w.is_tie())) {
                acts.push(MdpAction::Release(k));
            }
        }
        acts.push(MdpAction::Adopt);
        acts
    }

    /// Applies a controlled action; BSM attackers respond to any release.
    pub fn apply(&self, w: &mut World, c: usize, a: MdpAction) {
        match a {
            MdpAction::Release(0) => {}
            MdpAction::Adopt => w.private[c] = None,
            MdpAction::Release(k) => {
                let p = w.private[c].as_mut().expect("release without private chain");
                let base = p.base();
                let part = p.chain[..base + k].to_vec();
                p.hidden -= k;
                if p.hidden == 0 {
                    w.private[c] = None;
                }
                w.publish(part);
                self.react(w);
            }
        }
    }
}

pub fn next_miner<R: Rng>(cfg: &MinerConfig, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &a) in cfg.alpha.iter().enumerate() {
        acc += a;
        if u < acc {
            return i;
        }
    }
    cfg.m()
}

fn pick(wts: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &x) in wts.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    wts.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(a1: f64, a2: f64, n: usize) -> Race {
        Race::bsm(MinerConfig::two(a1, a2, n).unwrap())
    }

    #[test]
    fn lead_two_releases_on_honest_block() {
        let r = two(0.3, 0.2, 4);
        let mut w = r.start();
        r.mine(&mut w, 0, 0);
        r.mine(&mut w, 0, 0);
        assert_eq!(w.private[0].as_ref().unwrap().hidden, 2);
        r.mine(&mut w, 2, 0);
        assert_eq!(w.public, vec![vec![0, 0]]);
        let mut credit = [0u64; 3];
        w.settle(&mut credit);
        assert_eq!(credit, [2, 0, 0]);
        assert!(w.is_start());
    }

    #[test]
    fn three_way_tie_at_n2() {
        let r = two(0.3, 0.2, 2);
        let mut w = r.start();
        r.mine(&mut w, 0, 0);
        r.mine(&mut w, 1, 0);
        r.mine(&mut w, 2, 0);
        assert_eq!(w.public.len(), 3);
        let lab = labels(&w.public, 2);
        let mut s = lab.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2]);
        let wts = r.tip_weights(&w.public, 2);
        assert!((wts.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn labels_follow_content() {
        // an honest block on top of Bob's block still belongs to Bob's branch
        let lab = labels(&[vec![1, 2], vec![2, 2]], 2);
        assert_eq!(lab, vec![1, 2]);
        let lab = labels(&[vec![2, 0], vec![2, 2]], 2);
        assert_eq!(lab, vec![0, 2]);
        let lab = labels(&[vec![0, 2], vec![2, 2]], 2);
        assert_eq!(lab, vec![0, 2]);
    }
}
