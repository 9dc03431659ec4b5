use std::collections::{BTreeMap, HashSet};

use forkrace::mdp::{
    bsm_action, evaluate, honest_action, solve_opt, structural_space, value_iterate, MdpAction, MdpModel, MdpState,
    Policy, DEFAULT_LIMIT,
};
use forkrace::{Error, MinerConfig};

fn model(a1: f64, a2: f64, n: usize, h3: usize) -> MdpModel {
    MdpModel::build(&MinerConfig::two(a1, a2, n).unwrap(), h3).unwrap()
}

fn share(g: [f64; 3]) -> f64 {
    g[0] / (g[0] + g[1] + g[2])
}

#[test]
fn transitions_are_distributions() {
    for m in [model(0.2, 0.4, 2, 3), model(0.3, 0.25, 3, 4)] {
        for (i, s) in m.states.iter().enumerate() {
            for &a in &m.actions[i] {
                let t = m.transitions(s, a).unwrap();
                let p: f64 = t.iter().map(|e| e.prob).sum();
                assert!((p - 1.0).abs() < 1e-9, "{s} {a}: {p}");
                assert!(t.iter().all(|e| e.prob > 0.0 && m.id(&e.next).is_some()));
            }
        }
    }
}

#[test]
fn start_transitions() {
    let m = model(0.2, 0.4, 2, 3);
    let t = m.transitions(&MdpState::start(), MdpAction::WAIT).unwrap();
    let find = |f: &dyn Fn(&MdpState) -> bool| t.iter().filter(|e| f(&e.next)).map(|e| e.prob).sum::<f64>();
    assert!((find(&|s| s.l1 == 1) - 0.2).abs() < 1e-12);
    assert!((find(&|s| s.l2 == 1) - 0.4).abs() < 1e-12);
    // an honest block at the start settles at once
    let settled: f64 = t.iter().filter(|e| e.reward == [0, 0, 1]).map(|e| e.prob).sum();
    assert!((settled - 0.4).abs() < 1e-12);
    assert!(t.iter().all(|e| e.reward[0] == 0 && e.reward[1] == 0));
    assert!(matches!(
        m.transitions(&MdpState::start(), MdpAction::Release(2)),
        Err(Error::IllegalAction { .. })
    ));
}

#[test]
fn action_restrictions() {
    let n = 2;
    let h3 = 4;
    let m = model(0.3, 0.3, n, h3);
    for (i, s) in m.states.iter().enumerate() {
        assert!(m.actions[i].contains(&MdpAction::Adopt) || s.l1 == 0);
        if s.l1 == n {
            assert!(!m.actions[i].contains(&MdpAction::WAIT), "{s}");
        }
        if s.h3 >= h3 {
            for &a in &m.actions[i] {
                if let MdpAction::Release(k) = a {
                    assert!(s.h1 + k >= s.h3, "{s} {a}");
                }
            }
        }
    }
}

#[test]
fn state_counts_grow() {
    let count = |n: usize, h3: usize| model(0.3, 0.3, n, h3).len();
    assert!(count(1, 2) <= count(2, 3));
    assert!(count(2, 3) <= count(2, 4));
    assert!(count(2, 4) <= count(3, 4));
    let m = model(0.3, 0.3, 1, 2);
    assert!(m.id(&MdpState::start()).is_some());
}

/// Positions that share a tuple must have the same actions and the same
/// distribution over (next tuple, reward).
fn check_quotient(a1: f64, a2: f64, n: usize, h3: usize) {
    let cfg = MinerConfig::two(a1, a2, n).unwrap();
    let m = MdpModel::build(&cfg, h3).unwrap();
    let (nodes, edges) = structural_space(&cfg, h3, 1.0, DEFAULT_LIMIT).unwrap();
    let tuples: HashSet<MdpState> = nodes.iter().map(|x| x.encode()).collect();
    assert_eq!(tuples.len(), m.len());
    for (node, per) in nodes.iter().zip(&edges) {
        let s = node.encode();
        let i = m.id(&s).unwrap();
        let acts: Vec<MdpAction> = per.iter().map(|x| x.0).collect();
        assert_eq!(acts, m.actions[i], "{s}");
        for (a, outs) in per {
            let mut want: BTreeMap<(MdpState, [u32; 3]), f64> = BTreeMap::new();
            for &(p, j, r) in outs {
                *want.entry((nodes[j].encode(), r)).or_default() += p;
            }
            let mut got: BTreeMap<(MdpState, [u32; 3]), f64> = BTreeMap::new();
            for e in m.transitions(&s, *a).unwrap() {
                *got.entry((e.next, e.reward)).or_default() += e.prob;
            }
            assert_eq!(want.len(), got.len(), "{s} {a}");
            for (k, p) in want {
                assert!((got[&k] - p).abs() < 1e-12, "{s} {a}");
            }
        }
    }
}

#[test]
fn tuple_is_a_faithful_summary() {
    check_quotient(0.3, 0.2, 1, 2);
    check_quotient(0.2, 0.4, 2, 3);
    check_quotient(0.25, 0.3, 3, 4);
}

#[test]
fn optimum_for_table_config() {
    let m = model(0.2, 0.4, 2, 3);
    let opt = solve_opt(&m, 1e-7).unwrap();
    assert!((opt.rho - 0.2007619).abs() < 2e-6, "{}", opt.rho);
    assert!(opt.search.hi - opt.search.lo <= 1e-7);
    let honest = share(evaluate(&m, honest_action).unwrap().0);
    let bsm = share(evaluate(&m, |s| bsm_action(s, 2)).unwrap().0);
    assert!(opt.rho >= honest && opt.rho >= bsm);
}

#[test]
fn gain_decreases_in_rho() {
    let m = model(0.3, 0.3, 2, 3);
    let g: Vec<f64> = (0..=10).map(|k| value_iterate(&m, k as f64 / 10.0, 1e-10, None).unwrap().gain).collect();
    assert!(g.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{g:?}");
    assert!(g[0] > 0.0 && g[10] < 0.0);
}

#[test]
fn honest_alone_earns_its_power() {
    let m = MdpModel::build(&MinerConfig::two(0.3, 0.0, 2).unwrap(), 3).unwrap();
    let g = evaluate(&m, honest_action).unwrap().0;
    assert!((g[0] - 0.3).abs() < 1e-9);
    assert!((share(g) - 0.3).abs() < 1e-9);
}

#[test]
fn optimum_never_below_honest() {
    for (a1, a2) in [(0.1, 0.2), (0.25, 0.35), (0.4, 0.1)] {
        let m = model(a1, a2, 2, 3);
        let rho = solve_opt(&m, 1e-6).unwrap().rho;
        let honest = share(evaluate(&m, honest_action).unwrap().0);
        assert!(rho >= honest - 1e-6, "{a1} {a2}: {rho} < {honest}");
    }
}

#[test]
fn policy_csv_roundtrip() {
    let m = model(0.2, 0.4, 2, 3);
    let opt = solve_opt(&m, 1e-5).unwrap();
    let text = opt.policy.to_csv();
    let back = Policy::from_csv(&text).unwrap();
    assert_eq!(back.states, opt.policy.states);
    assert_eq!(back.actions, opt.policy.actions);
    assert!(Policy::from_csv("header\n1,2,3\n").is_err());
}

#[test]
fn build_errors() {
    let three = MinerConfig::symmetric(3, 0.1, 2).unwrap();
    assert!(matches!(MdpModel::build(&three, 3), Err(Error::ModelMismatch(_))));
    let two = MinerConfig::two(0.2, 0.2, 3).unwrap();
    assert!(matches!(MdpModel::build(&two, 3), Err(Error::Range { .. })));
    assert!(matches!(MdpModel::build_with(&two, 4, 1.0, 10), Err(Error::Capacity { .. })));
}
