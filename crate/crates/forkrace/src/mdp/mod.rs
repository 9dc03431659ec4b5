//! Alice's strategic mining against a BSM Bob and honest Henry, with full
//! information. States are the 10-tuple
//! `(loc, fork, l1, l2, h1, h2, h3, μ1, μ2, μ3)`; transitions are generated by
//! running the race engine with Alice under outside control.

mod solve;
mod space;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::race::{labels, World};

pub use solve::{
    evaluate, policy_gain, solve_opt, value_iterate, OptResult, Policy, RhoSearch, Solution,
    SPAN_TOL,
};
pub use space::{
    enumerate_states, structural_space, MdpModel, Structural, TransitionEntry, DEFAULT_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Fork {
    /// nothing to race against
    Ir,
    /// the last event changed the public tips; an equal-length release competes
    R,
    F12,
    F13,
    F23,
    F123,
}

impl Fork {
    pub fn is_tie(self) -> bool {
        !matches!(self, Fork::Ir | Fork::R)
    }
}

impl fmt::Display for Fork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Fork::Ir => "ir",
            Fork::R => "r",
            Fork::F12 => "f12",
            Fork::F13 => "f13",
            Fork::F23 => "f23",
            Fork::F123 => "f123",
        };
        f.write_str(s)
    }
}

impl FromStr for Fork {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "ir" => Fork::Ir,
            "r" => Fork::R,
            "f12" => Fork::F12,
            "f13" => Fork::F13,
            "f23" => Fork::F23,
            "f123" => Fork::F123,
            _ => return Err(Error::Config(format!("unknown fork '{s}'"))),
        })
    }
}

/// `h_i` counts blocks from the settled root to where miner i's view of the
/// race starts (the published part of its chain); `μ_i` counts Henry's blocks
/// among them. `h3` is the public height and `loc` says whose blocks Henry's
/// chain holds (1 Alice, 2 Bob, 3 neither).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MdpState {
    pub loc: u8,
    pub fork: Fork,
    pub l1: usize,
    pub l2: usize,
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
    pub mu1: usize,
    pub mu2: usize,
    pub mu3: usize,
}

impl MdpState {
    pub fn start() -> Self {
        MdpState {
            loc: 3,
            fork: Fork::Ir,
            l1: 0,
            l2: 0,
            h1: 0,
            h2: 0,
            h3: 0,
            mu1: 0,
            mu2: 0,
            mu3: 0,
        }
    }

    /// Encodes a two-attacker world. Alice is attacker 0, Bob 1, Henry 2.
    pub fn encode(w: &World, released: bool) -> Self {
        const A: u8 = 0;
        const B: u8 = 1;
        const H: u8 = 2;
        let tips = &w.public;
        let lab = if tips.len() > 1 {
            labels(tips, H)
        } else {
            Vec::new()
        };
        let (fork, des) = if tips.len() > 1 {
            let has = |o| lab.contains(&o);
            let fork = match (has(A), has(B), has(H)) {
                (true, true, true) => Fork::F123,
                (true, true, false) => Fork::F12,
                (true, false, true) => Fork::F13,
                _ => Fork::F23,
            };
            let des = lab
                .iter()
                .position(|&o| o == H)
                .or_else(|| lab.iter().position(|&o| o == B))
                .unwrap_or(0);
            (fork, &tips[des])
        } else {
            (if released { Fork::R } else { Fork::Ir }, &tips[0])
        };
        let loc = if des.contains(&A) {
            1
        } else if des.contains(&B) {
            2
        } else {
            3
        };
        let count_h = |c: &[u8]| c.iter().filter(|&&o| o == H).count();
        let part = |i: u8| match &w.private[i as usize] {
            Some(p) => {
                let pc = &p.chain[..p.base()];
                (p.hidden, pc.len(), count_h(pc))
            }
            None => {
                let c = lab
                    .iter()
                    .position(|&o| o == i)
                    .map(|k| &tips[k])
                    .unwrap_or(des);
                (0, c.len(), count_h(c))
            }
        };
        let (l1, h1, mu1) = part(A);
        let (l2, h2, mu2) = part(B);
        MdpState {
            loc,
            fork,
            l1,
            l2,
            h1,
            h2,
            h3: w.height(),
            mu1,
            mu2,
            mu3: count_h(des),
        }
    }

    pub fn csv_header() -> &'static str {
        "loc,fork,l1,l2,h1,h2,h3,mu1,mu2,mu3"
    }
}

impl fmt::Display for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},{}",
            self.loc, self.fork, self.l1, self.l2, self.h1, self.h2, self.h3, self.mu1, self.mu2, self.mu3
        )
    }
}

/// `Release(0)` is waiting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MdpAction {
    Adopt,
    Release(usize),
}

impl MdpAction {
    pub const WAIT: MdpAction = MdpAction::Release(0);
}

impl fmt::Display for MdpAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdpAction::Adopt => f.write_str("adopt"),
            MdpAction::Release(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for MdpAction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        if s == "adopt" {
            return Ok(MdpAction::Adopt);
        }
        s.parse()
            .map(MdpAction::Release)
            .map_err(|_| Error::Config(format!("unknown action '{s}'")))
    }
}

/// Basic selfish mining written as an observation-level rule for Alice.
pub fn bsm_action(s: &MdpState, n_max: usize) -> MdpAction {
    if s.l1 == 0 {
        return MdpAction::WAIT;
    }
    let ha = s.h1 + s.l1;
    let rel = s.fork == Fork::R;
    if s.l1 >= n_max || s.fork.is_tie() || (rel && (ha == s.h3 || ha == s.h3 + 1)) {
        MdpAction::Release(s.l1)
    } else if rel && ha < s.h3 {
        MdpAction::Adopt
    } else {
        MdpAction::WAIT
    }
}

pub fn honest_action(s: &MdpState) -> MdpAction {
    if s.l1 == 0 {
        MdpAction::WAIT
    } else {
        MdpAction::Release(s.l1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        for a in [MdpAction::Adopt, MdpAction::Release(0), MdpAction::Release(3)] {
            assert_eq!(a.to_string().parse::<MdpAction>().unwrap(), a);
        }
        for f in [Fork::Ir, Fork::R, Fork::F12, Fork::F13, Fork::F23, Fork::F123] {
            assert_eq!(f.to_string().parse::<Fork>().unwrap(), f);
        }
    }

    #[test]
    fn start_encodes_to_zero_tuple() {
        assert_eq!(MdpState::encode(&World::start(2), false), MdpState::start());
    }
}
