//! Monte Carlo hitting times for the microscopic Metropolis dynamics and for
//! reversible chains such as the lumped chain.
//!
//! Time is counted in proposed single-spin flips (one step of the discrete chain).
//! Replica `r` draws from its own stream `REPLICA_BASE + r` of the master seed, so
//! estimates do not depend on the number of threads.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meso::Partition;
use crate::model::{RandomField, SpinConfig, SystemParams};
use crate::potential::ReversibleChain;
use crate::rng::{stream, REPLICA_BASE};
use crate::util::{pairwise_sum, LnFactorial, Neumaier};

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000_000;
/// Fraction of truncated replicas above which an estimate is unusable.
pub const TRUNCATION_LIMIT: f64 = 0.01;
/// Burn-in length in sweeps for restricted Gibbs starts without exact sampling.
pub const BURN_IN_SWEEPS: usize = 50;

/// Microscopic system together with a block structure used to describe sets.
///
/// Sets and starting laws are given on block up-count vectors, indexed like the
/// lumped chain of the same partition (last block fastest).
#[derive(Clone, Debug)]
pub struct MicroSystem {
    pub field: RandomField,
    pub params: SystemParams,
    pub block_of: Vec<usize>,
    pub sizes: Vec<usize>,
    strides: Vec<usize>,
    /// Block-averaged fields.
    pub hbar: Vec<f64>,
    /// Field constant on every block.
    pub block_constant: bool,
}

impl MicroSystem {
    pub fn new(field: RandomField, params: SystemParams, partition: &Partition) -> Result<Self> {
        if field.n() != params.n || partition.n_sites != params.n {
            return Err(Error::InvalidParameter("field, partition and parameters disagree on N".into()));
        }
        let mut block_of = vec![usize::MAX; params.n];
        for (l, b) in partition.blocks.iter().enumerate() {
            for &i in b {
                block_of[i] = l;
            }
        }
        if block_of.contains(&usize::MAX) {
            return Err(Error::InvalidParameter("partition does not cover every site".into()));
        }
        let sizes = partition.sizes();
        let dim = sizes.len();
        let mut strides = vec![1usize; dim];
        for l in (0..dim.saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * (sizes[l + 1] + 1);
        }
        let block_constant = partition
            .blocks
            .iter()
            .all(|b| b.iter().all(|&i| field.h[i] == field.h[b[0]]));
        Ok(MicroSystem { field, params, block_of, sizes, strides, hbar: partition.hbar.clone(), block_constant })
    }

    pub fn n_block_states(&self) -> usize {
        self.sizes.iter().map(|s| s + 1).product()
    }

    pub fn index(&self, k: &[usize]) -> usize {
        k.iter().zip(&self.strides).map(|(a, b)| a * b).sum()
    }

    pub fn counts(&self, mut idx: usize) -> Vec<usize> {
        let mut k = vec![0; self.sizes.len()];
        for l in 0..k.len() {
            k[l] = idx / self.strides[l];
            idx %= self.strides[l];
        }
        k
    }

    /// Block up-counts of a configuration.
    pub fn block_counts(&self, sigma: &SpinConfig) -> Vec<usize> {
        let mut k = vec![0; self.sizes.len()];
        for (i, &s) in sigma.sigma.iter().enumerate() {
            if s == 1 {
                k[self.block_of[i]] += 1;
            }
        }
        k
    }

    /// `ln Q` of a block state with block-averaged fields.
    fn log_q(&self, lf: &LnFactorial, k: &[usize]) -> f64 {
        let nf = self.params.n as f64;
        let beta = self.params.beta;
        let up: usize = k.iter().sum();
        let m = (2.0 * up as f64 - nf) / nf;
        let mut s = Neumaier::default();
        s.add(0.5 * beta * nf * m * m);
        for l in 0..k.len() {
            s.add(lf.ln_binom(self.sizes[l], k[l]));
            s.add(beta * self.hbar[l] * (2.0 * k[l] as f64 - self.sizes[l] as f64));
        }
        s.sum()
    }

    /// Configuration with block counts `k`, up spins placed on the largest fields.
    fn lowest_config(&self, k: &[usize]) -> SpinConfig {
        let mut sigma = vec![-1i8; self.params.n];
        for l in 0..self.sizes.len() {
            let mut sites: Vec<usize> = (0..self.params.n).filter(|&i| self.block_of[i] == l).collect();
            sites.sort_by(|&a, &b| self.field.h[b].total_cmp(&self.field.h[a]));
            for &i in sites.iter().take(k[l]) {
                sigma[i] = 1;
            }
        }
        SpinConfig { sigma }
    }

    /// Configuration with block counts `k`, up spins placed uniformly in each block.
    fn uniform_config<R: Rng>(&self, k: &[usize], rng: &mut R) -> SpinConfig {
        let mut sigma = vec![-1i8; self.params.n];
        for l in 0..self.sizes.len() {
            let mut sites: Vec<usize> = (0..self.params.n).filter(|&i| self.block_of[i] == l).collect();
            // partial Fisher-Yates
            for j in 0..k[l] {
                let t = rng.random_range(j..sites.len());
                sites.swap(j, t);
                sigma[sites[j]] = 1;
            }
        }
        SpinConfig { sigma }
    }
}

#[derive(Clone, Debug)]
pub enum Source {
    Lumped(ReversibleChain),
    Microscopic(MicroSystem),
}

impl Source {
    /// Size of the index space in which start and target sets are given.
    pub fn n_states(&self) -> usize {
        match self {
            Source::Lumped(c) => c.n_states(),
            Source::Microscopic(m) => m.n_block_states(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Start {
    /// A fixed state of the index space. For the microscopic chain the up spins
    /// are placed uniformly at random inside each block.
    State(usize),
    /// A fixed microscopic configuration.
    Config(SpinConfig),
    /// Gibbs measure conditioned on a set of states.
    GibbsRestricted(Vec<usize>),
    /// Explicit law on states, e.g. the last-exit law `nu_{A,B}`.
    Law(Vec<(usize, f64)>),
}

#[derive(Clone, Debug)]
pub struct SimSpec {
    pub source: Source,
    pub start: Start,
    /// Indicator of the target set on the index space.
    pub target: Vec<bool>,
    pub replicas: usize,
    pub seed: u64,
    pub max_steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replica {
    pub replica: usize,
    pub steps: u64,
    pub truncated: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    #[serde(rename = "R")]
    pub replicas: usize,
    pub truncated: usize,
    /// False when more than 1% of the replicas were truncated.
    pub usable: bool,
}

impl McEstimate {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

pub fn write_replicas_csv<W: Write>(runs: &[Replica], mut w: W) -> Result<()> {
    writeln!(w, "replica,steps,truncated")?;
    for r in runs {
        writeln!(w, "{},{},{}", r.replica, r.steps, r.truncated)?;
    }
    Ok(())
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.source.n_states();
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("at least one replica is required".into()));
        }
        if self.target.len() != n {
            return Err(Error::InvalidParameter(format!("target indicator has length {} for {n} states", self.target.len())));
        }
        if !self.target.iter().any(|&b| b) {
            return Err(Error::InvalidParameter("empty target set".into()));
        }
        match &self.start {
            Start::State(x) if *x >= n => return Err(Error::InvalidParameter(format!("start state {x} out of range"))),
            Start::Config(s) => match &self.source {
                Source::Microscopic(m) if s.n() == m.params.n => {}
                _ => return Err(Error::InvalidParameter("configuration start needs a microscopic source of matching size".into())),
            },
            Start::GibbsRestricted(set) if set.is_empty() || set.iter().any(|&x| x >= n) => {
                return Err(Error::InvalidParameter("restricted start set is empty or out of range".into()))
            }
            Start::Law(law) if law.is_empty() || law.iter().any(|&(x, p)| x >= n || !(p >= 0.0)) => {
                return Err(Error::InvalidParameter("starting law is empty or invalid".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

fn sample_law<R: Rng>(law: &[(usize, f64)], rng: &mut R) -> usize {
    let total: f64 = law.iter().map(|p| p.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(x, p) in law {
        if u < p {
            return x;
        }
        u -= p;
    }
    law.last().map(|p| p.0).unwrap_or(0)
}

/// Law proportional to `exp(log_w)` on `set`.
fn law_from_logs(set: &[usize], log_w: impl Fn(usize) -> f64) -> Vec<(usize, f64)> {
    let top = set.iter().map(|&x| log_w(x)).fold(f64::NEG_INFINITY, f64::max);
    set.iter().map(|&x| (x, (log_w(x) - top).exp())).collect()
}

/// Per-state jump tables for a reversible chain.
struct JumpTable {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    cumulative: Vec<f64>,
    /// `ln(1 - jump mass)`, minus infinity when the chain never holds.
    log_hold: Vec<f64>,
}

impl JumpTable {
    fn new(chain: &ReversibleChain) -> Self {
        let n = chain.n_states();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut cumulative = Vec::new();
        let mut log_hold = Vec::with_capacity(n);
        offsets.push(0);
        for x in 0..n {
            let mut acc = 0.0;
            for &(y, e) in chain.neighbors(x) {
                acc += chain.transition(x, e);
                targets.push(y);
                cumulative.push(acc);
            }
            offsets.push(targets.len());
            log_hold.push(if acc >= 1.0 { f64::NEG_INFINITY } else { (-acc).ln_1p() });
        }
        JumpTable { offsets, targets, cumulative, log_hold }
    }
}

fn run_lumped(table: &JumpTable, mut x: usize, target: &[bool], max_steps: u64, rng: &mut ChaCha8Rng) -> (u64, bool) {
    let mut steps = 0u64;
    while !target[x] {
        let lh = table.log_hold[x];
        if lh > f64::NEG_INFINITY {
            // holding steps before the next jump are geometric
            let u: f64 = 1.0 - rng.random::<f64>();
            let wait = (u.ln() / lh).floor();
            if wait >= (max_steps - steps) as f64 {
                return (max_steps, true);
            }
            steps += wait as u64;
        }
        steps += 1;
        let range = table.offsets[x]..table.offsets[x + 1];
        let cum = &table.cumulative[range.clone()];
        let total = *cum.last().expect("state without neighbours outside the target");
        let u = rng.random::<f64>() * total;
        let j = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        x = table.targets[range.start + j];
        if steps >= max_steps && !target[x] {
            return (max_steps, true);
        }
    }
    (steps, false)
}

fn run_micro(sys: &MicroSystem, mut sigma: Vec<i8>, target: &[bool], max_steps: u64, rng: &mut ChaCha8Rng) -> (u64, bool) {
    let n = sys.params.n;
    let nf = n as f64;
    let beta = sys.params.beta;
    let mut k = vec![0usize; sys.sizes.len()];
    let mut up = 0usize;
    for (i, &s) in sigma.iter().enumerate() {
        if s == 1 {
            k[sys.block_of[i]] += 1;
            up += 1;
        }
    }
    let mut idx = sys.index(&k);
    let mut steps = 0u64;
    while !target[idx] {
        if steps >= max_steps {
            return (max_steps, true);
        }
        steps += 1;
        let i = rng.random_range(0..n);
        let s = sigma[i] as f64;
        let m = (2.0 * up as f64 - nf) / nf;
        let dh = 2.0 * s * (m + sys.field.h[i]) - 2.0 / nf;
        if dh > 0.0 && rng.random::<f64>() >= (-beta * dh).exp() {
            continue;
        }
        let l = sys.block_of[i];
        if sigma[i] == 1 {
            up -= 1;
            idx -= sys.strides[l];
        } else {
            up += 1;
            idx += sys.strides[l];
        }
        sigma[i] = -sigma[i];
    }
    (steps, false)
}

/// Restricted Metropolis run inside `allowed` for `sweeps * N` proposals.
fn burn_in(sys: &MicroSystem, sigma: &mut [i8], allowed: &[bool], sweeps: usize, rng: &mut ChaCha8Rng) {
    let n = sys.params.n;
    let nf = n as f64;
    let beta = sys.params.beta;
    let mut up = sigma.iter().filter(|&&s| s == 1).count();
    let k = sys.block_counts(&SpinConfig { sigma: sigma.to_vec() });
    let mut idx = sys.index(&k);
    for _ in 0..sweeps * n {
        let i = rng.random_range(0..n);
        let l = sys.block_of[i];
        let next = if sigma[i] == 1 { idx - sys.strides[l] } else { idx + sys.strides[l] };
        if !allowed[next] {
            continue;
        }
        let m = (2.0 * up as f64 - nf) / nf;
        let dh = 2.0 * sigma[i] as f64 * (m + sys.field.h[i]) - 2.0 / nf;
        if dh > 0.0 && rng.random::<f64>() >= (-beta * dh).exp() {
            continue;
        }
        if sigma[i] == 1 {
            up -= 1;
        } else {
            up += 1;
        }
        sigma[i] = -sigma[i];
        idx = next;
    }
}

/// Prepared simulation: jump tables and starting law are computed once.
pub struct Simulator<'a> {
    spec: &'a SimSpec,
    table: Option<JumpTable>,
    law: Option<Vec<(usize, f64)>>,
    allowed: Option<Vec<bool>>,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a SimSpec) -> Result<Self> {
        spec.validate()?;
        let table = match &spec.source {
            Source::Lumped(c) => Some(JumpTable::new(c)),
            Source::Microscopic(_) => None,
        };
        let mut allowed = None;
        let law = match (&spec.start, &spec.source) {
            (Start::Law(l), _) => Some(l.clone()),
            (Start::GibbsRestricted(set), Source::Lumped(c)) => Some(law_from_logs(set, |x| c.log_mu(x))),
            (Start::GibbsRestricted(set), Source::Microscopic(m)) => {
                let lf = LnFactorial::new(m.params.n);
                if !m.block_constant {
                    let mut a = vec![false; m.n_block_states()];
                    for &x in set {
                        a[x] = true;
                    }
                    allowed = Some(a);
                }
                Some(law_from_logs(set, |x| m.log_q(&lf, &m.counts(x))))
            }
            _ => None,
        };
        Ok(Simulator { spec, table, law, allowed })
    }

    /// One trajectory; deterministic in `(seed, replica)`.
    pub fn run(&self, replica: usize) -> Replica {
        let spec = self.spec;
        let mut rng = stream(spec.seed, REPLICA_BASE + replica as u64);
        let (steps, truncated) = match &spec.source {
            Source::Lumped(_) => {
                let x = match &spec.start {
                    Start::State(x) => *x,
                    _ => sample_law(self.law.as_ref().expect("law prepared"), &mut rng),
                };
                run_lumped(self.table.as_ref().expect("table prepared"), x, &spec.target, spec.max_steps, &mut rng)
            }
            Source::Microscopic(sys) => {
                let sigma = match &spec.start {
                    Start::Config(s) => s.sigma.clone(),
                    Start::State(x) => sys.uniform_config(&sys.counts(*x), &mut rng).sigma,
                    _ => {
                        let x = sample_law(self.law.as_ref().expect("law prepared"), &mut rng);
                        match &self.allowed {
                            None => sys.uniform_config(&sys.counts(x), &mut rng).sigma,
                            Some(allowed) => {
                                let mut s = sys.lowest_config(&sys.counts(x)).sigma;
                                burn_in(sys, &mut s, allowed, BURN_IN_SWEEPS * sys.params.n, &mut rng);
                                s
                            }
                        }
                    }
                };
                run_micro(sys, sigma, &spec.target, spec.max_steps, &mut rng)
            }
        };
        Replica { replica, steps, truncated }
    }
}

/// Hitting time of one replica.
pub fn simulate_hitting(spec: &SimSpec, replica: usize) -> Result<Replica> {
    Ok(Simulator::new(spec)?.run(replica))
}

/// All replicas, in replica order.
pub fn run_replicas(spec: &SimSpec) -> Result<Vec<Replica>> {
    let sim = Simulator::new(spec)?;
    Ok((0..spec.replicas).into_par_iter().map(|r| sim.run(r)).collect())
}

/// Mean and standard error of the replica hitting times.
pub fn summarize(runs: &[Replica]) -> Result<McEstimate> {
    if runs.is_empty() {
        return Err(Error::InvalidParameter("no replicas".into()));
    }
    let r = runs.len();
    let t: Vec<f64> = runs.iter().map(|x| x.steps as f64).collect();
    let mean = pairwise_sum(&t) / r as f64;
    let dev: Vec<f64> = t.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if r > 1 { pairwise_sum(&dev) / (r - 1) as f64 } else { 0.0 };
    let truncated = runs.iter().filter(|x| x.truncated).count();
    Ok(McEstimate {
        mean,
        stderr: (var / r as f64).sqrt(),
        replicas: r,
        truncated,
        usable: truncated as f64 <= TRUNCATION_LIMIT * r as f64,
    })
}

pub fn estimate_mean_time(spec: &SimSpec) -> Result<McEstimate> {
    summarize(&run_replicas(spec)?)
}
