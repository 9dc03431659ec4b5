//! Command-line front end. Every subcommand writes one CSV table.

use std::collections::hash_map::DefaultHasher;
use std::ffi::OsString;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::analytic::{self, Model};
use crate::config::{ConfigFile, MinerConfig};
use crate::csv::{num, Table};
use crate::daa;
use crate::error::{Error, Result};
use crate::mdp::{self, bsm_action, honest_action, MdpModel, Policy};
use crate::pomdp::{self, Budget, PomdpOptions};
use crate::race::Race;
use crate::report::RevenueReport;
use crate::sim;

#[derive(Parser, Debug)]
#[command(name = "forkrace", version, about = "Selfish mining with several attackers")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Stationary revenues from a Markov model
    Analytic(Opts),
    /// Monte Carlo revenues with every attacker on BSM
    Simulate(Opts),
    /// Optimal relative revenue of attacker 1 with full information
    Mdp(Opts),
    /// Revenue of attacker 1 when attacker 2's state is hidden
    Pomdp(Opts),
    /// Revenue over K difficulty periods and the delay until profit
    Daa(Opts),
    /// Symmetric profitable threshold
    Threshold(Opts),
    /// Runs another subcommand over a grid of parameter values
    Sweep(SweepOpts),
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// TOML file with alpha, alpha_h, gamma, theta, n_max
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// attacker hash powers; one value with --m > 1 means all equal
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    #[arg(long, num_args = 1..)]
    pub gamma: Vec<f64>,
    #[arg(long, num_args = 1..)]
    pub theta: Vec<f64>,
    /// private chain cap N
    #[arg(long)]
    pub n: Option<usize>,
    /// number of attackers
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// n2 | n4 | m | engine | single, or sim for thresholds
    #[arg(long)]
    pub model: Option<String>,
    /// accepted for clarity; thresholds are always symmetric
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    /// block probability per slot
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// steps per planning episode
    #[arg(long, default_value_t = 1_000_000)]
    pub xi: u64,
    /// wall-clock cap per decision; unset keeps runs reproducible
    #[arg(long)]
    pub budget_ms: Option<u64>,
    #[arg(long, default_value_t = 2000)]
    pub expansions: usize,
    #[arg(long)]
    pub h3_max: Option<usize>,
    /// difficulty periods
    #[arg(long, num_args = 1.., default_value = "100")]
    pub k: Vec<u64>,
    /// write the optimal policy here (mdp)
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Analytic,
    Simulate,
    Mdp,
    Pomdp,
    Daa,
    Threshold,
}

#[derive(Args, Debug, Clone)]
pub struct SweepOpts {
    #[arg(long, value_enum)]
    pub target: Target,
    /// FIELD:START:STOP:STEP, at most twice
    #[arg(long)]
    pub sweep: Vec<String>,
    #[command(flatten)]
    pub opts: Opts,
}

/// Parsed configuration plus overrides, kept loose so sweeps can edit it.
#[derive(Debug, Clone)]
struct Params {
    file: ConfigFile,
    m: Option<usize>,
    o: Opts,
}

impl Params {
    fn new(o: &Opts) -> Result<Self> {
        let mut file = match &o.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        if !o.alpha.is_empty() {
            file.alpha = Some(o.alpha.clone());
            file.alpha_h = None;
        }
        if !o.gamma.is_empty() {
            file.gamma = Some(o.gamma.clone());
        }
        if !o.theta.is_empty() {
            file.theta = Some(o.theta.clone());
        }
        if let Some(n) = o.n {
            file.n_max = Some(n);
        }
        Ok(Params {
            file,
            m: o.m,
            o: o.clone(),
        })
    }

    fn m(&self) -> usize {
        self.m
            .or_else(|| self.file.alpha.as_ref().map(Vec::len).filter(|&l| l > 1))
            .unwrap_or(2)
    }

    fn widen(&self, v: &Option<Vec<f64>>) -> Option<Vec<f64>> {
        let m = self.m();
        v.as_ref().map(|x| if x.len() == 1 && m > 1 { vec![x[0]; m] } else { x.clone() })
    }

    fn config(&self) -> Result<MinerConfig> {
        let mut f = self.file.clone();
        if f.alpha.is_none() {
            return Err(Error::Config("--alpha (or a config file) is required".into()));
        }
        f.alpha = self.widen(&f.alpha);
        f.gamma = self.widen(&f.gamma);
        f.theta = self.widen(&f.theta);
        f.build()
    }

    /// Config for threshold searches, where α is a placeholder.
    fn template(&self) -> Result<MinerConfig> {
        let mut p = self.clone();
        let m = self.m();
        p.file.alpha = Some(vec![0.5 / m as f64; m]);
        p.file.alpha_h = None;
        p.config()
    }

    fn set(&mut self, field: &str, v: f64) -> Result<()> {
        let m = self.m();
        let idx = |s: &str| s.chars().last().and_then(|c| c.to_digit(10)).map(|d| d as usize - 1);
        let base = field.trim_end_matches(|c: char| c.is_ascii_digit() || c == '_');
        let slot = |cur: &mut Option<Vec<f64>>, fill: f64| -> Result<()> {
            let mut x = cur.clone().unwrap_or_else(|| vec![fill; m]);
            if x.len() == 1 {
                x = vec![x[0]; m];
            }
            match idx(field) {
                Some(i) if i < x.len() => x[i] = v,
                Some(_) => return Err(Error::Config(format!("no such attacker in '{field}'"))),
                None => x = vec![v; m],
            }
            *cur = Some(x);
            Ok(())
        };
        match base {
            "alpha" => {
                slot(&mut self.file.alpha, 0.0)?;
                self.file.alpha_h = None;
            }
            "gamma" => slot(&mut self.file.gamma, 0.5)?,
            "theta" => slot(&mut self.file.theta, 1.0 / (m as f64 + 1.0))?,
            "n" | "n_max" => self.file.n_max = Some(v.round() as usize),
            "m" => self.m = Some(v.round() as usize),
            "p" => self.o.p = Some(v),
            "k" => self.o.k = vec![v.round() as u64],
            "epsilon" => self.o.epsilon = Some(v),
            _ => return Err(Error::Config(format!("cannot sweep '{field}'"))),
        }
        Ok(())
    }
}

fn digest(p: &Params) -> String {
    let mut h = DefaultHasher::new();
    format!("{:?}{:?}", p.file, p.m).hash(&mut h);
    format!("{:016x}", h.finish())
}

fn cfg_header(m: usize) -> Vec<String> {
    let mut h = Vec::new();
    for name in ["alpha", "gamma", "theta"] {
        for i in 1..=m {
            h.push(format!("{name}_{i}"));
        }
        if name == "alpha" {
            h.push("alpha_h".into());
        }
    }
    h.push("N".into());
    h
}

fn cfg_row(c: &MinerConfig) -> Vec<String> {
    let mut r: Vec<String> = c.alpha.iter().map(|&x| num(x)).collect();
    r.push(num(c.alpha_h));
    r.extend(c.gamma.iter().map(|&x| num(x)));
    r.extend(c.theta.iter().map(|&x| num(x)));
    r.push(c.n_max.to_string());
    r
}

fn revenue_header(m: usize) -> Vec<String> {
    let mut h = Vec::new();
    for pre in ["R", "Rhat"] {
        for i in 1..=m {
            h.push(format!("{pre}_{i}"));
        }
        h.push(format!("{pre}_h"));
    }
    for x in ["O_h", "orphan_ratio_h", "R_vld", "R_tot", "round_len"] {
        h.push(x.into());
    }
    h
}

fn revenue_row(r: &RevenueReport) -> Vec<String> {
    let mut row: Vec<String> = r.r.iter().map(|&x| num(x)).collect();
    row.extend(r.r_hat.iter().map(|&x| num(x)));
    row.push(num(r.orphans_h));
    row.push(num(r.orphan_ratio_h()));
    row.push(num(r.r_vld));
    row.push(num(r.r_tot));
    row.push(num(r.round_len));
    row
}

fn model_of(p: &Params, cfg: &MinerConfig) -> Result<Model> {
    match &p.o.model {
        Some(s) => s.parse(),
        None => Ok(analytic::default_model(cfg)),
    }
}

fn run_analytic(p: &Params) -> Result<Table> {
    let cfg = p.config()?;
    let model = model_of(p, &cfg)?;
    let rep = analytic::revenue(model, &cfg)?;
    let mut h = vec!["model".to_string()];
    h.extend(cfg_header(cfg.m()));
    h.extend(revenue_header(cfg.m()));
    let mut t = Table::new(&h);
    let mut row = vec![model.to_string()];
    row.extend(cfg_row(&cfg));
    row.extend(revenue_row(&rep));
    t.push(row);
    Ok(t)
}

fn run_simulate(p: &Params) -> Result<Table> {
    let cfg = p.config()?;
    let m = cfg.m();
    let stats = sim::run(&Race::bsm(cfg.clone()), None, p.o.rounds, p.o.seed)?;
    let mut h = vec!["model".to_string()];
    h.extend(cfg_header(m));
    h.extend(revenue_header(m));
    for i in 1..=m {
        h.push(format!("se_{i}"));
    }
    h.push("se_h".into());
    h.push("rounds".into());
    let mut t = Table::new(&h);
    let mut row = vec!["sim".to_string()];
    row.extend(cfg_row(&cfg));
    row.extend(revenue_row(&stats.report()));
    row.extend(stats.se.iter().map(|&x| num(x)));
    row.push(stats.rounds.to_string());
    t.push(row);
    Ok(t)
}

fn run_threshold(p: &Params) -> Result<Table> {
    let tpl = p.template()?;
    let m = tpl.m();
    let name = p.o.model.clone().unwrap_or_else(|| analytic::default_model(&tpl).to_string());
    let res = if name == "sim" {
        let hi = (0.45f64).min(0.99 / m as f64);
        sim::simulate_threshold(&tpl, p.o.rounds, p.o.seed, (0.02, hi))?
    } else {
        analytic::find_threshold_symmetric(name.parse()?, &tpl)?
    };
    let mut t = Table::new(&["model", "m", "N", "gamma", "theta", "threshold", "revenue", "iterations"]);
    t.push(vec![
        name,
        m.to_string(),
        tpl.n_max.to_string(),
        num(tpl.gamma[0]),
        num(tpl.theta[0]),
        num(res.threshold),
        num(res.achieved_revenue),
        res.iterations.to_string(),
    ]);
    Ok(t)
}

fn share(g: [f64; 3]) -> f64 {
    let s = g[0] + g[1] + g[2];
    if s > 0.0 { g[0] / s } else { 0.0 }
}

fn run_mdp(p: &Params) -> Result<Table> {
    let cfg = p.config()?;
    let h3 = p.o.h3_max.unwrap_or(cfg.n_max + 1);
    let slot = p.o.p.unwrap_or(1.0);
    let model = MdpModel::build_with(&cfg, h3, slot, mdp::DEFAULT_LIMIT)?;
    let opt = mdp::solve_opt(&model, p.o.epsilon.unwrap_or(1e-6))?;
    let bsm = share(mdp::evaluate(&model, |s| bsm_action(s, cfg.n_max))?.0);
    let honest = share(mdp::evaluate(&model, honest_action)?.0);
    if let Some(path) = &p.o.policy_out {
        std::fs::write(path, Policy::to_csv(&opt.policy)).map_err(|e| Error::Config(e.to_string()))?;
    }
    let mut h = cfg_header(2);
    h.extend(["h3_max", "p", "rho", "bsm", "honest", "states", "iterations"].map(String::from));
    let mut t = Table::new(&h);
    let mut row = cfg_row(&cfg);
    row.extend([
        h3.to_string(),
        num(slot),
        num(opt.rho),
        num(bsm),
        num(honest),
        model.len().to_string(),
        opt.search.iterations.to_string(),
    ]);
    t.push(row);
    Ok(t)
}

fn run_pomdp(p: &Params) -> Result<Table> {
    let cfg = p.config()?;
    let opts = PomdpOptions {
        h3_max: p.o.h3_max,
        p: p.o.p.unwrap_or(0.9),
        epsilon: p.o.epsilon.unwrap_or(1e-5),
        xi: p.o.xi,
        seed: p.o.seed,
        budget: Budget {
            expansions: p.o.expansions,
            ms: p.o.budget_ms,
        },
        ..Default::default()
    };
    let r = pomdp::solve_pomdp(&cfg, &opts)?;
    let mut h = cfg_header(2);
    h.extend(
        [
            "p", "rho", "revenue", "se", "mdp_rho", "honest", "bsm", "iterations", "cache_hits",
            "cache_misses", "beliefs",
        ]
        .map(String::from),
    );
    let mut t = Table::new(&h);
    let mut row = cfg_row(&cfg);
    row.extend([
        num(opts.p),
        num(r.rho),
        num(r.revenue),
        num(r.se),
        num(r.mdp_rho),
        num(r.honest),
        num(r.bsm),
        r.iterations.to_string(),
        r.cache_hits.to_string(),
        r.cache_misses.to_string(),
        r.beliefs.to_string(),
    ]);
    t.push(row);
    if r.clamped > 0 {
        eprintln!("warning: measured revenue exceeded the upper bound {} time(s) and was clamped", r.clamped);
    }
    Ok(t)
}

fn run_daa(p: &Params) -> Result<Table> {
    let cfg = p.config()?;
    let m = cfg.m();
    let model = model_of(p, &cfg)?;
    let rep = analytic::revenue(model, &cfg)?;
    if daa::exceeds_clamp(&rep) {
        eprintln!("warning: total block rate exceeds 4x the valid rate; the retarget clamp would bind");
    }
    let mut h = vec!["model".to_string()];
    h.extend(cfg_header(m));
    h.push("K".into());
    for i in 1..=m {
        h.push(format!("Rtilde_{i}"));
    }
    h.push("Rtilde_h".into());
    h.extend(["Rhat_1", "T1", "Kstar", "days"].map(String::from));
    let mut t = Table::new(&h);
    let delay = daa::profitable_delay(&rep, 0, cfg.alpha[0]);
    let t1 = daa::expected_t1(&rep, daa::PERIOD_BLOCKS)?;
    for &k in &p.o.k {
        let abs = daa::absolute_revenue(&rep, k)?;
        let mut row = vec![model.to_string()];
        row.extend(cfg_row(&cfg));
        row.push(k.to_string());
        row.extend(abs.iter().map(|&x| num(x)));
        row.push(num(rep.r_hat[0]));
        row.push(num(t1));
        row.push(delay.to_string());
        row.push(delay.days().map_or("never".into(), num));
        t.push(row);
    }
    Ok(t)
}

fn run_target(target: Target, p: &Params) -> Result<Table> {
    match target {
        Target::Analytic => run_analytic(p),
        Target::Simulate => run_simulate(p),
        Target::Mdp => run_mdp(p),
        Target::Pomdp => run_pomdp(p),
        Target::Daa => run_daa(p),
        Target::Threshold => run_threshold(p),
    }
}

/// Grid values for one FIELD:START:STOP:STEP axis.
pub fn parse_axis(spec: &str) -> Result<(String, Vec<f64>)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("bad sweep '{spec}', expected FIELD:START:STOP:STEP"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let (start, stop, step) = (f(parts[1])?, f(parts[2])?, f(parts[3])?);
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((parts[0].to_string(), (0..=n).map(|i| start + i as f64 * step).collect()))
}

fn run_sweep(s: &SweepOpts) -> Result<Table> {
    if s.sweep.len() > 2 {
        return Err(Error::Config("at most two sweep axes".into()));
    }
    let base = Params::new(&s.opts)?;
    let axes: Vec<(String, Vec<f64>)> = s.sweep.iter().map(|a| parse_axis(a)).collect::<Result<_>>()?;
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for (_, vals) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| vals.iter().map(move |&v| [p.clone(), vec![v]].concat()))
            .collect();
    }
    let tables: Vec<Result<Table>> = points
        .par_iter()
        .map(|pt| {
            let mut p = base.clone();
            for ((field, _), &v) in axes.iter().zip(pt) {
                p.set(field, v)?;
            }
            run_target(s.target, &p)
        })
        .collect();
    let width = match tables.iter().find_map(|t| t.as_ref().ok()) {
        Some(t) => t.header.len(),
        None => return Err(tables.into_iter().next().unwrap().unwrap_err()),
    };
    let mut out: Option<Table> = None;
    for (pt, t) in points.iter().zip(tables) {
        let rows = match t {
            Ok(t) => {
                out.get_or_insert_with(|| {
                    let mut h: Vec<String> = axes.iter().map(|a| a.0.clone()).collect();
                    h.extend(t.header.iter().cloned());
                    Table::new(&h)
                });
                t.rows
            }
            // a point without a crossing still gets a row
            Err(e @ Error::NoCrossing { .. }) => {
                eprintln!("warning: {e} at {pt:?}");
                vec![vec!["nan".to_string(); width]]
            }
            Err(e) => return Err(e),
        };
        let o = out.as_mut().expect("header from the first successful point");
        for r in rows {
            let mut row: Vec<String> = pt.iter().map(|&v| num(v)).collect();
            row.extend(r);
            o.push(row);
        }
    }
    out.ok_or_else(|| Error::Config("empty sweep".into()))
}

/// Runs the command and returns the CSV table (without writing it).
pub fn execute(cmd: &Command) -> Result<(Table, Option<PathBuf>)> {
    let (mut table, p) = match cmd {
        Command::Sweep(s) => (run_sweep(s)?, Params::new(&s.opts)?),
        Command::Analytic(o) => {
            let p = Params::new(o)?;
            (run_analytic(&p)?, p)
        }
        Command::Simulate(o) => {
            let p = Params::new(o)?;
            (run_simulate(&p)?, p)
        }
        Command::Mdp(o) => {
            let p = Params::new(o)?;
            (run_mdp(&p)?, p)
        }
        Command::Pomdp(o) => {
            let p = Params::new(o)?;
            (run_pomdp(&p)?, p)
        }
        Command::Daa(o) => {
            let p = Params::new(o)?;
            (run_daa(&p)?, p)
        }
        Command::Threshold(o) => {
            let p = Params::new(o)?;
            (run_threshold(&p)?, p)
        }
    };
    table.comment(format!(
        "forkrace {} seed={} config={}",
        env!("CARGO_PKG_VERSION"),
        p.o.seed,
        digest(&p)
    ));
    Ok((table, p.o.out.clone()))
}

/// Exit status: 0 ok, 1 bad input, 2 a solver did not converge.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.cmd) {
        Ok((table, out)) => match table.write(out.as_deref()) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } | Error::NoCrossing { .. } => 2,
                _ => 1,
            }
        }
    }
}
