//! Anytime AND-OR search with lower and upper value bounds at the fringe.
//! Each step expands the leaf whose discounted reach probability times
//! bound gap is largest, following the upper-bound action at belief nodes.

use std::time::Instant;

use crate::error::Result;

/// A discounted decision problem over opaque node ids.
pub trait SearchModel {
    fn discount(&self) -> f64;
    /// Zero actions marks a terminal node.
    fn num_actions(&mut self, b: usize) -> usize;
    /// Expected immediate reward and the (probability, successor) pairs.
    fn expand(&mut self, b: usize, a: usize) -> Result<(f64, Vec<(f64, usize)>)>;
    /// (lower, upper) bounds on the value of `b`.
    fn bounds(&mut self, b: usize) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub expansions: usize,
    /// wall-clock cap; `None` keeps the search deterministic
    pub ms: Option<u64>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            expansions: 2000,
            ms: Some(50),
        }
    }
}

impl Budget {
    pub fn expansions(n: usize) -> Self {
        Budget {
            expansions: n,
            ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    pub action: usize,
    pub lower: f64,
    pub upper: f64,
    pub expansions: usize,
}

struct OrNode {
    id: usize,
    lo: f64,
    up: f64,
    /// and-node indices, one per action; empty while on the fringe
    kids: Vec<usize>,
    terminal: bool,
    parent: Option<usize>,
    /// largest discounted reach × gap over the fringe below
    err: f64,
}

struct AndNode {
    reward: f64,
    kids: Vec<(f64, usize)>,
    lo: f64,
    up: f64,
    parent: usize,
}

struct Tree {
    or: Vec<OrNode>,
    and: Vec<AndNode>,
    lambda: f64,
}

impl Tree {
    fn leaf<M: SearchModel>(&mut self, m: &mut M, id: usize, parent: Option<usize>) -> usize {
        let terminal = m.num_actions(id) == 0;
        let (lo, up) = if terminal { (0.0, 0.0) } else { m.bounds(id) };
        let up = up.max(lo);
        self.or.push(OrNode {
            id,
            lo,
            up,
            kids: Vec::new(),
            terminal,
            parent,
            err: if terminal { 0.0 } else { up - lo },
        });
        self.or.len() - 1
    }

    fn best_upper(&self, n: usize) -> usize {
        let kids = &self.or[n].kids;
        let mut best = 0;
        for k in 1..kids.len() {
            if self.and[kids[k]].up > self.and[kids[best]].up {
                best = k;
            }
        }
        best
    }

    fn refresh_and(&mut self, a: usize) {
        let (mut lo, mut up) = (0.0, 0.0);
        for &(p, c) in &self.and[a].kids {
            lo += p * self.or[c].lo;
            up += p * self.or[c].up;
        }
        let node = &mut self.and[a];
        node.lo = node.reward + self.lambda * lo;
        node.up = node.reward + self.lambda * up;
    }

    fn refresh_or(&mut self, n: usize) {
        let lo = self.or[n].kids.iter().map(|&a| self.and[a].lo).fold(f64::NEG_INFINITY, f64::max);
        let up = self.or[n].kids.iter().map(|&a| self.and[a].up).fold(f64::NEG_INFINITY, f64::max);
        let star = self.or[n].kids[self.best_upper(n)];
        let err = self.and[star]
            .kids
            .iter()
            .map(|&(p, c)| self.lambda * p * self.or[c].err)
            .fold(0.0, f64::max);
        let node = &mut self.or[n];
        // bounds only tighten
        node.lo = node.lo.max(lo);
        node.up = node.up.min(up).max(node.lo);
        node.err = err;
    }

    fn expand<M: SearchModel>(&mut self, m: &mut M, n: usize) -> Result<()> {
        let id = self.or[n].id;
        let k = m.num_actions(id);
        for a in 0..k {
            let (reward, succ) = m.expand(id, a)?;
            let ai = self.and.len();
            self.and.push(AndNode {
                reward,
                kids: Vec::with_capacity(succ.len()),
                lo: 0.0,
                up: 0.0,
                parent: n,
            });
            for (p, s) in succ {
                let c = self.leaf(m, s, Some(ai));
                self.and[ai].kids.push((p, c));
            }
            self.refresh_and(ai);
            self.or[n].kids.push(ai);
        }
        self.refresh_or(n);
        Ok(())
    }

    fn select(&self) -> Option<usize> {
        let mut n = 0;
        loop {
            let node = &self.or[n];
            if node.terminal || node.err <= 0.0 {
                return None;
            }
            if node.kids.is_empty() {
                return Some(n);
            }
            let star = node.kids[self.best_upper(n)];
            let kids = &self.and[star].kids;
            let mut best = None;
            let mut best_err = 0.0;
            for &(p, c) in kids {
                let e = p * self.or[c].err;
                if e > best_err {
                    best_err = e;
                    best = Some(c);
                }
            }
            n = best?;
        }
    }

    fn backup(&mut self, mut n: usize) {
        while let Some(a) = self.or[n].parent {
            self.refresh_and(a);
            n = self.and[a].parent;
            self.refresh_or(n);
        }
    }
}

/// Picks an action for `root`: the child with the highest lower bound once
/// the budget runs out or the root gap closes.
pub fn aems2<M: SearchModel>(m: &mut M, root: usize, budget: Budget) -> Result<SearchOutcome> {
    let start = Instant::now();
    let mut t = Tree {
        or: Vec::new(),
        and: Vec::new(),
        lambda: m.discount(),
    };
    t.leaf(m, root, None);
    if t.or[0].terminal {
        return Ok(SearchOutcome {
            action: 0,
            lower: 0.0,
            upper: 0.0,
            expansions: 0,
        });
    }
    t.expand(m, 0)?;
    let mut expansions = 1;
    while expansions < budget.expansions {
        if let Some(ms) = budget.ms {
            if start.elapsed().as_millis() as u64 >= ms {
                break;
            }
        }
        if t.or[0].up - t.or[0].lo < 1e-12 {
            break;
        }
        let Some(n) = t.select() else { break };
        t.expand(m, n)?;
        t.backup(n);
        expansions += 1;
    }
    let kids = &t.or[0].kids;
    let mut action = 0;
    for k in 1..kids.len() {
        if t.and[kids[k]].lo > t.and[kids[action]].lo {
            action = k;
        }
    }
    Ok(SearchOutcome {
        action,
        lower: t.or[0].lo,
        upper: t.or[0].up,
        expansions,
    })
}
