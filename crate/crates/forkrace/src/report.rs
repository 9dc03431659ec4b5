use serde::Serialize;

use crate::error::{Error, Result};

/// Expected revenues. Rates are per block event (one block mined per event),
/// so `r_tot` is 1 for the analytic models; `per_round` rescales by the
/// expected round length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueReport {
    /// valid blocks per miner, attackers first and the honest miner last
    pub r: Vec<f64>,
    pub r_hat: Vec<f64>,
    /// orphaned blocks per miner, same layout as `r`
    pub orphans: Vec<f64>,
    pub orphans_h: f64,
    pub r_vld: f64,
    pub r_tot: f64,
    /// expected block events per mining round
    pub round_len: f64,
}

impl RevenueReport {
    /// Builds a per-event report from valid-block rates and each miner's
    /// hash power (blocks mined per event).
    pub fn from_rates(r: Vec<f64>, mined: &[f64], round_len: f64) -> Self {
        let r_vld: f64 = r.iter().sum();
        let r_tot: f64 = mined.iter().sum();
        let r_hat = r.iter().map(|x| if r_vld > 0.0 { x / r_vld } else { 0.0 }).collect();
        let orphans: Vec<f64> = r.iter().zip(mined).map(|(v, a)| (a - v).max(0.0)).collect();
        RevenueReport {
            orphans_h: *orphans.last().unwrap_or(&0.0),
            r,
            r_hat,
            orphans,
            r_vld,
            r_tot,
            round_len,
        }
    }

    pub fn per_round(&self) -> RevenueReport {
        let k = self.round_len;
        RevenueReport {
            r: self.r.iter().map(|x| x * k).collect(),
            r_hat: self.r_hat.clone(),
            orphans: self.orphans.iter().map(|x| x * k).collect(),
            orphans_h: self.orphans_h * k,
            r_vld: self.r_vld * k,
            r_tot: self.r_tot * k,
            round_len: k,
        }
    }

    pub fn honest(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// Fraction of the honest miner's blocks that end up orphaned.
    pub fn orphan_ratio_h(&self) -> f64 {
        let mined = self.honest() + self.orphans_h;
        if mined > 0.0 {
            self.orphans_h / mined
        } else {
            0.0
        }
    }

    pub fn check(&self) -> Result<()> {
        let s: f64 = self.r_hat.iter().sum();
        if self.r_vld > 0.0 && (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvariantViolation(format!("relative revenues sum to {s}")));
        }
        if self.r_hat.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
            return Err(Error::InvariantViolation("relative revenue outside [0,1]".into()));
        }
        if self.r_vld > self.r_tot + 1e-9 {
            return Err(Error::InvariantViolation(format!(
                "valid rate {} exceeds total {}",
                self.r_vld, self.r_tot
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub states: Vec<String>,
    pub pi: Vec<f64>,
}

impl StationaryDistribution {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.states.iter().position(|s| s == label).map(|i| self.pi[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub achieved_revenue: f64,
    pub iterations: usize,
}
