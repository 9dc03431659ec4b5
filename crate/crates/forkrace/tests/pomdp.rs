use forkrace::mdp::{bsm_action, honest_action, MdpAction, MdpModel, MdpState};
use forkrace::pomdp::{
    aems2, blind_values, observe, qmdp_values, solve_pomdp, Belief, Budget, PomdpModel, PomdpOptions, SearchModel,
};
use forkrace::{Error, MinerConfig, Result, RngStream};
use rand::Rng;

fn pomdp(a1: f64, a2: f64, n: usize, p: f64) -> PomdpModel {
    PomdpModel::build(&MinerConfig::two(a1, a2, n).unwrap(), n + 1, p).unwrap()
}

#[test]
fn observation_drops_bob() {
    let s = MdpState {
        l2: 2,
        h2: 1,
        mu2: 1,
        ..MdpState::start()
    };
    assert_eq!(observe(&s), observe(&MdpState::start()));
    let t = MdpState { l1: 1, ..MdpState::start() };
    assert_ne!(observe(&t), observe(&MdpState::start()));
}

#[test]
fn actions_depend_only_on_observation() {
    for n in [2, 3] {
        let mdp = MdpModel::build_with(&MinerConfig::two(0.3, 0.3, n).unwrap(), n + 1, 0.9, 1_000_000).unwrap();
        assert!(PomdpModel::from_mdp(mdp).is_ok());
    }
}

#[test]
fn quiet_slot_update() {
    // waiting at the start and seeing nothing new: either no block or a hidden block by Bob
    let (a2, p) = (0.35, 0.6);
    let m = pomdp(0.2, a2, 2, p);
    let start = m.start();
    let o = observe(&MdpState::start());
    let b = m.belief_update(&start, MdpAction::WAIT, &o).unwrap();
    let bob = m.mdp.id(&MdpState { l2: 1, ..MdpState::start() }).unwrap();
    let here = b.get(0);
    let hidden = b.get(bob);
    assert!((here + hidden - 1.0).abs() < 1e-12);
    let want = (1.0 - p) / (a2 * p);
    assert!((here / hidden - want).abs() / want < 1e-5, "{} vs {want}", here / hidden);
}

#[test]
fn impossible_and_illegal() {
    let m = pomdp(0.2, 0.3, 2, 0.9);
    let weird = observe(&MdpState { h3: 9, ..MdpState::start() });
    assert!(matches!(
        m.belief_update(&m.start(), MdpAction::WAIT, &weird),
        Err(Error::ImpossibleObservation)
    ));
    assert!(matches!(
        m.belief_update(&m.start(), MdpAction::Release(1), &weird),
        Err(Error::IllegalAction { .. })
    ));
}

#[test]
fn filter_tracks_hidden_state() {
    let m = pomdp(0.3, 0.3, 2, 0.8);
    let mut rng = RngStream::new(17, 0).rng();
    let mut b = m.start();
    let mut s = 0usize;
    for step in 0..10_000 {
        assert!((b.mass() - 1.0).abs() < 1e-9, "step {step}");
        assert!(b.get(s) > 0.0, "true state lost at step {step}");
        let acts = m.actions(&b).to_vec();
        let a = acts[rng.random_range(0..acts.len())];
        let t = m.mdp.transitions(&m.mdp.states[s], a).unwrap();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = t.last().unwrap().next;
        for e in &t {
            acc += e.prob;
            if u < acc {
                next = e.next;
                break;
            }
        }
        s = m.mdp.id(&next).unwrap();
        b = m.belief_update(&b, a, &m.observation(s)).unwrap();
    }
}

#[test]
fn qmdp_dominates_blind_rules() {
    let m = pomdp(0.3, 0.3, 2, 0.9);
    for rho in [0.2, 0.3, 0.4] {
        let up = qmdp_values(&m.mdp, rho, 0.99);
        let bsm = blind_values(&m.mdp, rho, 0.99, |s| bsm_action(s, 2));
        let honest = blind_values(&m.mdp, rho, 0.99, honest_action);
        for s in 0..m.mdp.len() {
            assert!(up[s] >= bsm[s] - 1e-8 && up[s] >= honest[s] - 1e-8);
        }
        assert_eq!(Belief::point(3).dot(&up), up[3]);
        let mix = Belief {
            support: vec![(0, 0.25), (1, 0.75)],
        };
        assert!((mix.dot(&up) - (0.25 * up[0] + 0.75 * up[1])).abs() < 1e-12);
    }
}

/// Complete binary tree of fixed depth with rewards in [0, 1].
struct Toy {
    depth: usize,
    rewards: Vec<f64>,
    lambda: f64,
}

impl Toy {
    fn level(&self, b: usize) -> usize {
        // node ids are heap-ordered with four children per node (2 actions x 2 outcomes)
        let (mut d, mut first, mut width) = (0, 0, 1);
        while b >= first + width {
            first += width;
            width *= 4;
            d += 1;
        }
        d
    }

    fn exact(&self, b: usize) -> f64 {
        if self.level(b) == self.depth {
            return 0.0;
        }
        (0..2)
            .map(|a| {
                let r = self.rewards[2 * b + a];
                let kids = [4 * b + 2 * a + 1, 4 * b + 2 * a + 2];
                r + self.lambda * (0.3 * self.exact(kids[0]) + 0.7 * self.exact(kids[1]))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl SearchModel for Toy {
    fn discount(&self) -> f64 {
        self.lambda
    }

    fn num_actions(&mut self, b: usize) -> usize {
        if self.level(b) == self.depth {
            0
        } else {
            2
        }
    }

    fn expand(&mut self, b: usize, a: usize) -> Result<(f64, Vec<(f64, usize)>)> {
        Ok((self.rewards[2 * b + a], vec![(0.3, 4 * b + 2 * a + 1), (0.7, 4 * b + 2 * a + 2)]))
    }

    fn bounds(&mut self, b: usize) -> (f64, f64) {
        let left = (self.depth - self.level(b)) as f64;
        (0.0, left)
    }
}

#[test]
fn search_matches_expectimax() {
    let mut rng = RngStream::new(5, 0).rng();
    for _ in 0..20 {
        let depth = 3;
        let nodes = (4usize.pow(depth as u32 + 1) - 1) / 3;
        let mut toy = Toy {
            depth,
            rewards: (0..2 * nodes).map(|_| rng.random::<f64>()).collect(),
            lambda: 0.9,
        };
        let exact = toy.exact(0);
        let q = |toy: &Toy, a: usize| {
            toy.rewards[a] + toy.lambda * (0.3 * toy.exact(2 * a + 1) + 0.7 * toy.exact(2 * a + 2))
        };
        let best = if q(&toy, 0) >= q(&toy, 1) { 0 } else { 1 };
        let out = aems2(&mut toy, 0, Budget::expansions(10_000)).unwrap();
        assert!((out.lower - exact).abs() < 1e-9 && (out.upper - exact).abs() < 1e-9);
        assert_eq!(out.action, best);
        let small = aems2(&mut toy, 0, Budget::expansions(3)).unwrap();
        assert!(small.lower <= exact + 1e-12 && exact <= small.upper + 1e-12);
    }
}

#[test]
fn revenue_between_bounds() {
    let cfg = MinerConfig::two(0.3, 0.3, 2).unwrap();
    let opts = PomdpOptions {
        xi: 40_000,
        seed: 3,
        budget: Budget::expansions(300),
        ..Default::default()
    };
    let r = solve_pomdp(&cfg, &opts).unwrap();
    let slack = 3.0 * r.se;
    assert!(r.revenue >= r.honest.max(r.bsm) - slack, "{r:?}");
    assert!(r.revenue <= r.mdp_rho + slack, "{r:?}");
    assert!(r.rho <= r.upper && r.upper <= r.mdp_rho);
    assert!(r.cache_hits > r.cache_misses);
    let again = solve_pomdp(&cfg, &opts).unwrap();
    assert_eq!(format!("{r:?}"), format!("{again:?}"));
}

#[test]
fn bad_options() {
    let cfg = MinerConfig::two(0.3, 0.3, 2).unwrap();
    let bad = |o: PomdpOptions| matches!(solve_pomdp(&cfg, &o), Err(Error::Range { .. }));
    assert!(bad(PomdpOptions { epsilon: 0.0, ..Default::default() }));
    assert!(bad(PomdpOptions { xi: 0, ..Default::default() }));
    assert!(bad(PomdpOptions { p: 0.0, ..Default::default() }));
    assert!(bad(PomdpOptions { discount: 1.0, ..Default::default() }));
}
