//! Revenue while difficulty adjusts. Period 1 runs at the initial
//! difficulty, so orphaned blocks stretch it; later periods are retargeted to
//! the valid-block rate.

use serde::Serialize;

use crate::error::{range, Error, Result};
use crate::report::RevenueReport;

/// Blocks per retarget period.
pub const PERIOD_BLOCKS: f64 = 2016.0;
/// Calendar length of one period at the target rate.
pub const DAYS_PER_PERIOD: f64 = 14.0;
/// The retarget step is clamped to a factor of four.
pub const MAX_RETARGET: f64 = 4.0;

/// Expected time units (one block mined per unit) to finish period 1.
pub fn expected_t1(rep: &RevenueReport, period_blocks: f64) -> Result<f64> {
    if rep.r_vld <= 0.0 {
        return Err(Error::DegenerateModel("no valid blocks".into()));
    }
    Ok(period_blocks * rep.r_tot / rep.r_vld)
}

/// True when the first retarget would exceed the 4x clamp.
pub fn exceeds_clamp(rep: &RevenueReport) -> bool {
    rep.r_tot > MAX_RETARGET * rep.r_vld
}

/// Valid blocks per time unit for every miner over `k` periods.
pub fn absolute_revenue(rep: &RevenueReport, k: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(range("K", 0.0));
    }
    let k = k as f64;
    let den = rep.r_tot + (k - 1.0) * rep.r_vld;
    Ok(rep.r.iter().map(|ri| k * ri / den).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Delay {
    Periods(u64),
    Never,
}

impl Delay {
    pub fn days(self) -> Option<f64> {
        match self {
            Delay::Periods(k) => Some(k as f64 * DAYS_PER_PERIOD),
            Delay::Never => None,
        }
    }
}

impl std::fmt::Display for Delay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Delay::Periods(k) => write!(f, "{k}"),
            Delay::Never => f.write_str("never"),
        }
    }
}

/// Smallest K with absolute revenue strictly above `alpha`, for miner `i`.
pub fn profitable_delay(rep: &RevenueReport, i: usize, alpha: f64) -> Delay {
    let ri = rep.r[i];
    let gain = ri - alpha * rep.r_vld;
    if gain <= 0.0 {
        return Delay::Never;
    }
    // K (R_i − α R_vld) > α (R_tot − R_vld)
    let x = alpha * (rep.r_tot - rep.r_vld) / gain;
    let mut k = (x.floor() as u64 + 1).max(1);
    // guard the boundary against rounding
    let above = |k: u64| k as f64 * ri > alpha * (rep.r_tot + (k as f64 - 1.0) * rep.r_vld);
    while k > 1 && above(k - 1) {
        k -= 1;
    }
    while !above(k) {
        k += 1;
    }
    Delay::Periods(k)
}

/// Linear scan version of `profitable_delay`, capped at `limit` periods.
pub fn profitable_delay_scan(rep: &RevenueReport, i: usize, alpha: f64, limit: u64) -> Delay {
    (1..=limit)
        .find(|&k| absolute_revenue(rep, k).map(|r| r[i] > alpha).unwrap_or(false))
        .map_or(Delay::Never, Delay::Periods)
}
