//! Transcribed closed forms. Rates are per block event.

use crate::config::MinerConfig;
use crate::error::{range, Error, Result};
use crate::report::{RevenueReport, StationaryDistribution};

fn require(cfg: &MinerConfig, m: usize, n: usize) -> Result<()> {
    if cfg.m() != m || cfg.n_max != n {
        return Err(Error::ModelMismatch(format!(
            "model covers m={m}, N={n}; got m={}, N={}",
            cfg.m(),
            cfg.n_max
        )));
    }
    Ok(())
}

fn mined(cfg: &MinerConfig) -> Vec<f64> {
    let mut v = cfg.alpha.clone();
    v.push(cfg.alpha_h);
    v
}

/// Two attackers, private chains of at most two blocks.
pub fn two_attacker_n2(cfg: &MinerConfig) -> Result<RevenueReport> {
    require(cfg, 2, 2)?;
    let (a1, a2, ah) = (cfg.alpha[0], cfg.alpha[1], cfg.alpha_h);
    let (g1, g2) = (cfg.gamma[0], cfg.gamma[1]);
    let (t1, t2) = (cfg.theta[0], cfg.theta[1]);
    let p = pi000_n2(a1, a2, ah);
    let ra = p
        * (2.0 * a1 * a1 * (1.0 + ah)
            + (a2 + ah) * a1 * ah * g1
            + a1 * a2 * ah
            + 4.0 * a1 * a1 * a2 * (1.0 + ah)
            + 2.0 * a1 * a2 * ah * ah * t1);
    let rb = p
        * (2.0 * a2 * a2 * (1.0 + ah)
            + (a1 + ah) * a2 * ah * g2
            + a1 * a2 * ah
            + 4.0 * a2 * a2 * a1 * (1.0 + ah)
            + 2.0 * a1 * a2 * ah * ah * t2);
    let rh = p
        * (a1 * ah * ah * (2.0 - g1)
            + 2.0 * a1 * a2 * ah * ah * (2.0 - t1 - t2)
            + ah
            + a2 * ah * ah * (2.0 - g2)
            + a1 * a2 * ah * (2.0 - g1 - g2));
    let oh = p
        * ((a1 + (1.0 - a1) * g1) * a1 * ah
            + (a2 + (1.0 - a2) * g2) * a2 * ah
            + (a1 + a2 + (t1 + t2) * ah) * 2.0 * a1 * a2 * ah);
    let mut rep = RevenueReport::from_rates(vec![ra, rb, rh], &mined(cfg), 1.0 / p);
    rep.orphans_h = oh;
    Ok(rep)
}

fn pi000_n2(a1: f64, a2: f64, ah: f64) -> f64 {
    1.0 / (1.0 + a1 + a2 + a1 * ah + 2.0 * a1 * a2 + a2 * ah + 2.0 * a1 * a2 * ah)
}

/// Closed-form stationary distribution of the seven-state N=2 chain.
pub fn two_attacker_n2_stationary(cfg: &MinerConfig) -> Result<StationaryDistribution> {
    require(cfg, 2, 2)?;
    let (a1, a2, ah) = (cfg.alpha[0], cfg.alpha[1], cfg.alpha_h);
    let p = pi000_n2(a1, a2, ah);
    let pi = vec![
        p,
        a1 * p,
        a2 * p,
        2.0 * a1 * a2 * p,
        a1 * ah * p,
        a2 * ah * p,
        2.0 * a1 * a2 * ah * p,
    ];
    Ok(StationaryDistribution {
        states: N2_STATES.iter().map(|s| s.to_string()).collect(),
        pi,
    })
}

pub const N2_STATES: [&str; 7] = ["000", "100", "010", "110", "101", "011", "111"];

/// Homogeneous attackers with γ = 1/2 and θ = 1/3.
pub fn two_attacker_n2_symmetric(alpha: f64) -> Result<RevenueReport> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(range("alpha", alpha));
    }
    let a = alpha;
    let p = 1.0 / (1.0 + 4.0 * a - 4.0 * a.powi(3));
    let ri = p * a * (25.0 * a + 2.0 * a * a + 3.0 - 32.0 * a.powi(3)) / 6.0;
    let rh = p * (1.0 - 2.0 * a) * (1.0 + 3.0 * a - 7.0 / 3.0 * a * a - 16.0 / 3.0 * a.powi(3));
    let ah = 1.0 - 2.0 * a;
    Ok(RevenueReport::from_rates(vec![ri, ri, rh], &[a, a, ah], 1.0 / p))
}

/// Two attackers with private chains of up to four blocks, chain reactions included.
pub fn two_attacker_n4(cfg: &MinerConfig) -> Result<RevenueReport> {
    require(cfg, 2, 4)?;
    let (a1, a2, ah) = (cfg.alpha[0], cfg.alpha[1], cfg.alpha_h);
    let a3 = ah;
    let (g1, g2) = (cfg.gamma[0], cfg.gamma[1]);
    let (t1, t2) = (cfg.theta[0], cfg.theta[1]);
    let (b1, b2) = cfg.beta();
    let p = |x: f64, k: i32| x.powi(k);
    let d = 1.0 + a1 + a2 + a1 * a3 + p(a1, 2) + 2.0 * a2 * a1 + p(a2, 2) + p(a1, 3) + a2 * a3
        + 3.0 * a2 * p(a1, 2)
        + 2.0 * a1 * a2 * a3
        + 3.0 * a1 * p(a2, 2)
        + p(a2, 3)
        + p(a1, 3) * a3
        + 4.0 * p(a1, 3) * a2
        + 6.0 * p(a1, 2) * p(a2, 2)
        + 4.0 * a1 * p(a2, 3)
        + p(a2, 3) * a3
        + 5.0 * p(a1, 3) * a2 * a3
        + 10.0 * p(a1, 3) * p(a2, 2)
        + 6.0 * p(a1, 2) * p(a2, 2) * a3
        + 10.0 * p(a1, 2) * p(a2, 3)
        + 5.0 * a1 * p(a2, 3) * a3
        + p(a1, 3) * p(a2, 2) * a3
        + 20.0 * p(a1, 3) * p(a2, 3)
        + p(a1, 3) * p(a2, 2) * p(a3, 2)
        + 22.0 * p(a1, 3) * p(a2, 3) * a3
        + p(a1, 4) * p(a2, 3) * a3
        + 20.0 * p(a1, 3) * p(a2, 3) * p(a3, 2)
        + p(a1, 2) * p(a2, 3) * a3
        + p(a1, 2) * p(a2, 3) * p(a3, 2)
        + p(a1, 3) * p(a2, 4) * a3;
    let pi = 1.0 / d;
    let ra = pi
        * (4.0 * p(a1, 4) * (1.0 + ah)
            + 3.0 * p(a1, 3) * p(ah, 2)
            + 16.0 * p(a1, 4) * a2
            + 4.0 * p(a1, 2) * ah
            + 40.0 * p(a1, 4) * p(a2, 2) * (1.0 + 2.0 * a2)
            + a1 * a2 * ah * (1.0 + g1 + 2.0 * t1 * ah)
            + 10.0 * p(a1, 2) * a2 * ah
            + 20.0 * p(a1, 3) * a2 * ah * (3.0 * a2 + a1)
            + 15.0 * p(a1, 3) * a2 * p(ah, 2)
            + 4.0 * p(a1, 4) * p(a2, 2) * ah * (1.0 + ah)
            + 4.0 * p(a1, 4) * p(a2, 3) * p(ah, 2) * (b1 + 20.0)
            + 5.0 * p(a1, 5) * p(a2, 3) * ah
            + 4.0 * p(a1, 4) * p(a2, 3) * ah * (a2 + 21.0)
            + 3.0 * p(a1, 3) * p(a2, 4) * p(ah, 2) * b1
            + a1 * p(ah, 2) * g1
            + 12.0 * p(a1, 2) * p(a2, 2) * p(ah, 2) * b1
            + p(a1, 2) * p(a2, 2) * p(ah, 3) * b1 * (3.0 * a1 + 2.0 * a2)
            + 6.0 * p(a1, 3) * p(a2, 3) * p(ah, 2) * (10.0 * ah * b1 + 1.0));
    let rb = pi
        * (4.0 * p(a2, 4) * (1.0 + ah)
            + 3.0 * p(a2, 3) * p(ah, 2)
            + 16.0 * a1 * p(a2, 4)
            + 4.0 * p(a2, 2) * ah
            + 40.0 * p(a1, 2) * p(a2, 4) * (1.0 + 2.0 * a1)
            + a1 * a2 * ah * (1.0 + g2 + 2.0 * t2 * ah)
            + 10.0 * a1 * p(a2, 2) * ah
            + 20.0 * a1 * p(a2, 3) * ah * (3.0 * a1 + a2)
            + 15.0 * a1 * p(a2, 3) * p(ah, 2)
            + 4.0 * p(a1, 2) * p(a2, 4) * ah * (1.0 + ah)
            + 4.0 * p(a1, 3) * p(a2, 4) * p(ah, 2) * (b2 + 20.0)
            + 5.0 * p(a1, 3) * p(a2, 5) * ah
            + 4.0 * p(a1, 3) * p(a2, 4) * ah * (a1 + 21.0)
            + 3.0 * p(a1, 4) * p(a2, 3) * p(ah, 2) * b2
            + a2 * p(ah, 2) * g2
            + 12.0 * p(a1, 2) * p(a2, 2) * p(ah, 2) * b2
            + p(a1, 2) * p(a2, 2) * p(ah, 3) * b2 * (2.0 * a1 + 3.0 * a2)
            + 6.0 * p(a1, 3) * p(a2, 3) * p(ah, 2) * (10.0 * ah * b2 + 1.0));
    let rh = pi
        * (a1 * p(ah, 2) * (2.0 - g1)
            + a2 * p(ah, 2) * (2.0 - g2)
            + p(a1, 2) * p(a2, 3) * p(ah, 3) * (2.0 * b1 + b2)
            + 2.0 * a1 * a2 * p(ah, 2) * (2.0 - t1 - t2)
            + p(a1, 2) * p(a2, 2) * p(ah, 2) * (6.0 + 4.0 * a1 * a2)
            + p(a1, 3) * p(a2, 2) * p(ah, 3) * (b1 + 2.0 * b2)
            + a1 * a2 * ah * (2.0 - g1 - g2)
            + p(a1, 3) * p(a2, 3) * ah * (a1 + a2)
            + p(a1, 3) * p(a2, 4) * p(ah, 2) * (2.0 * b1 + b2)
            + ah
            + p(a1, 4) * p(a2, 3) * p(ah, 2) * (b1 + 2.0 * b2)
            + 20.0 * p(a1, 3) * p(a2, 3) * p(ah, 3)
            + 2.0 * p(a1, 4) * p(a2, 4) * ah);
    Ok(RevenueReport::from_rates(vec![ra, rb, rh], &mined(cfg), d))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// m attackers that each hold at most one private block; a second block is
/// published at once, an honest block forces every holder into a tie that
/// the next block settles (non-holders split uniformly over the branches).
///
/// Probabilities are normalized over all block events, tie states included,
/// so the rates are per event like the other models.
pub fn m_attacker(cfg: &MinerConfig) -> Result<RevenueReport> {
    let m = cfg.m();
    if m == 0 {
        return Err(Error::ModelMismatch("no attackers".into()));
    }
    if m > 24 {
        return Err(Error::ModelMismatch(format!("{m} attackers is too many subsets")));
    }
    let ah = cfg.alpha_h;
    let a = &cfg.alpha;
    let mut weights = Vec::with_capacity(1 << m);
    let mut total = 0.0;
    for mask in 1usize..(1 << m) {
        let k = mask.count_ones() as usize;
        let prod: f64 = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| a[j]).product();
        let w = factorial(k) * prod;
        total += w;
        weights.push((mask, k, w));
    }
    let pi0 = 1.0 / (1.0 + (1.0 + ah) * total);
    let mut r = vec![0.0; m + 1];
    for &(mask, k, w) in &weights {
        let pl = w * pi0;
        let held: f64 = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| a[j]).sum();
        let split = (1.0 - held) / (k as f64 + 1.0);
        for i in 0..m {
            r[i] += if mask >> i & 1 == 1 {
                pl * (2.0 * a[i] + ah * (2.0 * a[i] + split))
            } else {
                ah * pl * a[i]
            };
        }
        r[m] += ah * pl * (ah + split);
    }
    r[m] += pi0 * ah;
    Ok(RevenueReport::from_rates(r, &mined(cfg), 1.0 / pi0))
}

/// Simplified m-attacker forms for equal hash power α.
pub fn m_attacker_homogeneous(m: usize, alpha: f64) -> Result<RevenueReport> {
    if m == 0 {
        return Err(Error::ModelMismatch("no attackers".into()));
    }
    let ah = 1.0 - m as f64 * alpha;
    if !(0.0..=1.0).contains(&ah) || alpha < 0.0 {
        return Err(range("alpha", alpha));
    }
    let mut perm = 1.0;
    let mut sum_w = 0.0;
    let (mut ri, mut rh) = (0.0, ah);
    for k in 1..=m {
        perm *= (m - k + 1) as f64;
        let w = perm * alpha.powi(k as i32);
        let kf = k as f64;
        sum_w += w;
        rh += w * ah * (ah + (1.0 - kf * alpha) / (kf + 1.0));
        ri += w * (kf / m as f64 * (2.0 * alpha + ah * (1.0 + alpha) / (kf + 1.0)) + ah * alpha);
    }
    let pi0 = 1.0 / (1.0 + (1.0 + ah) * sum_w);
    let mut r = vec![ri * pi0; m];
    r.push(rh * pi0);
    let mut mined = vec![alpha; m];
    mined.push(ah);
    Ok(RevenueReport::from_rates(r, &mined, 1.0 / pi0))
}

/// One attacker with no cap on its private chain (the classic selfish-mining
/// chain), with tie share γ.
pub fn single_attacker(alpha: f64, gamma: f64) -> Result<RevenueReport> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(range("alpha", alpha));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(range("gamma", gamma));
    }
    let a = alpha;
    let b = 1.0 - a;
    let p0 = (1.0 - 2.0 * a) / (2.0 * a.powi(3) - 4.0 * a * a + 1.0);
    let p_tie = b * a * p0;
    let p1 = a * p0;
    let ratio = a / b;
    let p2 = ratio * p1;
    let beyond2 = p1 * ratio * ratio / (1.0 - ratio);
    let r_pool = p_tie * (2.0 * a + b * gamma) + 2.0 * b * p2 + b * beyond2;
    let r_h = p0 * b + p_tie * (b * gamma + 2.0 * b * (1.0 - gamma));
    Ok(RevenueReport::from_rates(vec![r_pool, r_h], &[a, b], 1.0 / p0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi000_symmetric_example() {
        let r = two_attacker_n2_symmetric(0.25).unwrap();
        assert!((1.0 / r.round_len - 1.0 / 1.9375).abs() < 1e-15);
    }

    #[test]
    fn symmetric_matches_general() {
        for a in [0.0, 0.1, 0.2, 0.3, 0.45] {
            let s = two_attacker_n2_symmetric(a).unwrap();
            let g = two_attacker_n2(&MinerConfig::two(a, a, 2).unwrap()).unwrap();
            for i in 0..3 {
                assert!((s.r[i] - g.r[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn honest_only() {
        for rep in [
            two_attacker_n2(&MinerConfig::two(0.0, 0.0, 2).unwrap()).unwrap(),
            two_attacker_n4(&MinerConfig::two(0.0, 0.0, 4).unwrap()).unwrap(),
        ] {
            assert!((rep.r_hat[2] - 1.0).abs() < 1e-15);
            assert!(rep.orphans_h.abs() < 1e-15);
        }
    }

    #[test]
    fn single_attacker_relative_revenue() {
        // compare against the published ratio form
        for (a, g) in [(0.2, 0.5), (0.3, 0.0), (0.4, 1.0)] {
            let r = single_attacker(a, g).unwrap();
            let num = a * (1.0 - a) * (1.0 - a) * (4.0 * a + g * (1.0 - 2.0 * a)) - a.powi(3);
            let den = 1.0 - a * (1.0 + (2.0 - a) * a);
            assert!((r.r_hat[0] - num / den).abs() < 1e-12, "{a} {g}");
        }
    }

    #[test]
    fn homogeneous_m_matches_general() {
        for m in [1, 2, 3, 5] {
            for a in [0.05, 0.1, 0.15] {
                let h = m_attacker_homogeneous(m, a).unwrap();
                let g = m_attacker(&MinerConfig::symmetric(m, a, 2).unwrap()).unwrap();
                for i in 0..=m {
                    assert!((h.r[i] - g.r[i]).abs() < 1e-12);
                }
            }
        }
    }
}
