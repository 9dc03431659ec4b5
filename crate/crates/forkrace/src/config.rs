use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{range, Error, Result};

/// Sum-to-one tolerance applied when a config is built.
pub const NORM_TOL: f64 = 1e-12;

/// Hash powers and tie-breaking parameters for m attackers and one honest miner.
///
/// Attackers are indexed `0..m`; the honest miner ("Henry") is index `m`
/// wherever a per-miner vector is returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub alpha: Vec<f64>,
    pub alpha_h: f64,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub n_max: usize,
}

impl MinerConfig {
    pub fn new(
        alpha: Vec<f64>,
        alpha_h: f64,
        gamma: Vec<f64>,
        theta: Vec<f64>,
        n_max: usize,
    ) -> Result<Self> {
        let cfg = MinerConfig {
            alpha,
            alpha_h,
            gamma,
            theta,
            n_max,
        };
        validate(&cfg)?;
        Ok(cfg)
    }

    /// Two attackers with γ = 1/2, θ = 1/3 and the honest miner taking the rest.
    pub fn two(a1: f64, a2: f64, n_max: usize) -> Result<Self> {
        Self::new(
            vec![a1, a2],
            1.0 - a1 - a2,
            vec![0.5, 0.5],
            vec![1.0 / 3.0, 1.0 / 3.0],
            n_max,
        )
    }

    /// m attackers sharing the same hash power.
    pub fn symmetric(m: usize, alpha: f64, n_max: usize) -> Result<Self> {
        if m == 0 {
            return Err(range("m", 0.0));
        }
        let theta = if m == 2 { 1.0 / 3.0 } else { 1.0 / (m as f64 + 1.0) };
        Self::new(
            vec![alpha; m],
            1.0 - m as f64 * alpha,
            vec![0.5; m],
            vec![theta; m],
            n_max,
        )
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    /// Hash power of miner `i`, with `i == m` meaning the honest miner.
    pub fn power(&self, i: usize) -> f64 {
        if i == self.m() {
            self.alpha_h
        } else {
            self.alpha[i]
        }
    }

    /// Split of honest power between two attacker branches, (β1, β2).
    pub fn beta(&self) -> (f64, f64) {
        let g1 = self.gamma.first().copied().unwrap_or(0.0);
        let g2 = self.gamma.get(1).copied().unwrap_or(0.0);
        if g1 + g2 > 0.0 {
            (g1 / (g1 + g2), g2 / (g1 + g2))
        } else {
            (0.5, 0.5)
        }
    }

    pub fn with_n(&self, n_max: usize) -> Self {
        MinerConfig {
            n_max,
            ..self.clone()
        }
    }

    /// Returns a copy with every attacker's power set to `a` (honest miner takes the rest).
    pub fn with_symmetric_alpha(&self, a: f64) -> Self {
        let m = self.m();
        MinerConfig {
            alpha: vec![a; m],
            alpha_h: 1.0 - m as f64 * a,
            ..self.clone()
        }
    }

    pub fn swapped(&self) -> Self {
        let mut c = self.clone();
        c.alpha.reverse();
        c.gamma.reverse();
        c.theta.reverse();
        c
    }
}

pub fn validate(cfg: &MinerConfig) -> Result<&MinerConfig> {
    let m = cfg.m();
    if m == 0 {
        return Err(Error::Arity {
            name: "alpha".into(),
            got: 0,
            expected: 1,
        });
    }
    for (name, v) in [("gamma", &cfg.gamma), ("theta", &cfg.theta)] {
        if v.len() != m {
            return Err(Error::Arity {
                name: name.into(),
                got: v.len(),
                expected: m,
            });
        }
    }
    if cfg.n_max == 0 {
        return Err(range("n_max", 0.0));
    }
    let checks = cfg
        .alpha
        .iter()
        .map(|&x| ("alpha", x))
        .chain(std::iter::once(("alpha_h", cfg.alpha_h)))
        .chain(cfg.gamma.iter().map(|&x| ("gamma", x)))
        .chain(cfg.theta.iter().map(|&x| ("theta", x)));
    for (name, x) in checks {
        if !(0.0..=1.0).contains(&x) {
            return Err(range(name, x));
        }
    }
    let sum: f64 = cfg.alpha.iter().sum::<f64>() + cfg.alpha_h;
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(Error::Normalization { sum });
    }
    if m == 2 && cfg.theta[0] + cfg.theta[1] > 1.0 + NORM_TOL {
        return Err(range("theta_1 + theta_2", cfg.theta[0] + cfg.theta[1]));
    }
    Ok(cfg)
}

/// On-disk form. Everything except `alpha` is optional.
///
/// ```toml
/// alpha = [0.3, 0.3]
/// alpha_h = 0.4        # default: 1 - sum(alpha)
/// gamma = [0.5, 0.5]   # default: 0.5 each
/// theta = [0.333, 0.333]
/// n_max = 2
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha: Option<Vec<f64>>,
    pub alpha_h: Option<f64>,
    pub gamma: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub n_max: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<MinerConfig> {
        let alpha = self
            .alpha
            .clone()
            .ok_or_else(|| Error::Config("alpha is required".into()))?;
        let m = alpha.len();
        let alpha_h = self
            .alpha_h
            .unwrap_or_else(|| 1.0 - alpha.iter().sum::<f64>());
        let gamma = self.gamma.clone().unwrap_or_else(|| vec![0.5; m]);
        let theta = self.theta.clone().unwrap_or_else(|| {
            let t = if m == 2 { 1.0 / 3.0 } else { 1.0 / (m as f64 + 1.0) };
            vec![t; m]
        });
        MinerConfig::new(alpha, alpha_h, gamma, theta, self.n_max.unwrap_or(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_errors() {
        assert!(MinerConfig::two(0.3, 0.3, 2).is_ok());
        let e = MinerConfig::new(vec![0.3, 0.3], 0.5, vec![0.5; 2], vec![0.3; 2], 2);
        assert!(matches!(e, Err(Error::Normalization { .. })));
        let e = MinerConfig::new(vec![0.6], 0.4, vec![1.2], vec![0.3], 2);
        assert!(matches!(e, Err(Error::Range { .. })));
        let e = MinerConfig::new(vec![0.3, 0.3], 0.4, vec![0.5], vec![0.3; 2], 2);
        assert!(matches!(e, Err(Error::Arity { .. })));
        let e = MinerConfig::new(vec![0.3, 0.3], 0.4, vec![0.5; 2], vec![0.6, 0.6], 2);
        assert!(matches!(e, Err(Error::Range { .. })));
    }

    #[test]
    fn beta_fallback() {
        let c = MinerConfig::new(vec![0.3, 0.3], 0.4, vec![0.0, 0.0], vec![0.3; 2], 2).unwrap();
        assert_eq!(c.beta(), (0.5, 0.5));
        let c = MinerConfig::new(vec![0.3, 0.3], 0.4, vec![0.2, 0.6], vec![0.3; 2], 2).unwrap();
        let (b1, b2) = c.beta();
        assert!((b1 - 0.25).abs() < 1e-15 && (b1 + b2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn file_defaults() {
        let f = ConfigFile::parse("alpha = [0.25, 0.2]\nn_max = 4\n").unwrap();
        let c = f.build().unwrap();
        assert!((c.alpha_h - 0.55).abs() < 1e-15);
        assert_eq!(c.gamma, vec![0.5, 0.5]);
        assert_eq!(c.n_max, 4);
        assert!(ConfigFile::parse("alpha = [0.5]\nbogus = 1\n").is_err());
    }
}
