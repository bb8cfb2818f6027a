//! Potential theory on finite reversible chains.
//!
//! Chains carry log stationary weights and log conductances
//! `ln c(x,y) = ln mu(x) + ln p(x,y)`; weights need not be normalized, so a
//! chain built from `Z mu` reports `ln(Z cap)`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::util::{LogSum, Neumaier};

#[derive(Clone, Debug)]
pub struct ReversibleChain {
    log_mu: Vec<f64>,
    edges: Vec<(usize, usize)>,
    log_c: Vec<f64>,
    offsets: Vec<usize>,
    adj: Vec<(usize, usize)>,
}

impl ReversibleChain {
    pub fn new(log_mu: Vec<f64>, edges: Vec<(usize, usize)>, log_c: Vec<f64>) -> Result<Self> {
        let n = log_mu.len();
        if edges.len() != log_c.len() {
            return Err(Error::InvalidParameter("edge and conductance counts differ".into()));
        }
        let mut deg = vec![0usize; n + 1];
        for (e, &(x, y)) in edges.iter().enumerate() {
            if x >= n || y >= n || x == y {
                return Err(Error::InvalidParameter(format!("bad edge {e}: ({x},{y})")));
            }
            if log_c[e].is_nan() || log_c[e] == f64::INFINITY {
                return Err(Error::InvalidParameter(format!("bad conductance on edge {e}")));
            }
            deg[x + 1] += 1;
            deg[y + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut adj = vec![(0, 0); 2 * edges.len()];
        for (e, &(x, y)) in edges.iter().enumerate() {
            adj[fill[x]] = (y, e);
            fill[x] += 1;
            adj[fill[y]] = (x, e);
            fill[y] += 1;
        }
        Ok(ReversibleChain { log_mu, edges, log_c, offsets: deg, adj })
    }

    pub fn n_states(&self) -> usize {
        self.log_mu.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn log_mu(&self, x: usize) -> f64 {
        self.log_mu[x]
    }

    pub fn log_mu_all(&self) -> &[f64] {
        &self.log_mu
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn log_conductance(&self, e: usize) -> f64 {
        self.log_c[e]
    }

    pub fn log_conductances(&self) -> &[f64] {
        &self.log_c
    }

    /// `(neighbour, edge index)` pairs of `x`.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn find_edge(&self, x: usize, y: usize) -> Option<usize> {
        self.neighbors(x).iter().find(|&&(z, _)| z == y).map(|&(_, e)| e)
    }

    /// Transition probability along edge `e` out of `x`.
    pub fn transition(&self, x: usize, e: usize) -> f64 {
        (self.log_c[e] - self.log_mu[x]).exp()
    }

    pub fn holding(&self, x: usize) -> f64 {
        1.0 - self.neighbors(x).iter().map(|&(_, e)| self.transition(x, e)).sum::<f64>()
    }

    /// Checks that every row has total jump probability at most `1 + tol`.
    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        for x in 0..self.n_states() {
            if self.holding(x) < -tol {
                return Err(Error::InvalidParameter(format!("row {x} has jump mass above 1")));
            }
        }
        Ok(())
    }

    /// Same chain with new log conductances.
    pub fn with_conductances(&self, log_c: Vec<f64>) -> Result<Self> {
        ReversibleChain::new(self.log_mu.clone(), self.edges.clone(), log_c)
    }

    /// True when edge `i` joins states `i` and `i+1` and there are no other edges.
    pub fn is_path(&self) -> bool {
        self.edges.len() + 1 == self.n_states()
            && self.edges.iter().enumerate().all(|(i, &(x, y))| (x.min(y), x.max(y)) == (i, i + 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Dense,
    ConjugateGradient,
    PathSeries,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Relative residual in the energy norm for the iterative solver.
    pub tol: f64,
    /// Largest number of unknowns solved by dense factorization.
    pub dense_limit: usize,
    pub max_iter: Option<usize>,
    /// Optional split of the state space; `true` marks the side of `A`.
    /// The unknown there is `1 - h`, which keeps full relative precision
    /// when `h` is close to one.
    pub side: Option<Vec<bool>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, dense_limit: 2000, max_iter: None, side: None }
    }
}

impl SolveOptions {
    pub fn with_side(side: Vec<bool>) -> Self {
        SolveOptions { side: Some(side), ..Default::default() }
    }
}

/// Equilibrium potential of `(A, B)` and derived quantities.
#[derive(Clone, Debug)]
pub struct PotentialSolution {
    pub log_h: Vec<f64>,
    /// `ln(1 - h)`.
    pub log_g: Vec<f64>,
    pub in_a: Vec<bool>,
    pub in_b: Vec<bool>,
    /// Best estimate of `ln cap`: the equilibrium-measure sum for direct solves, the
    /// Dirichlet form (error quadratic in the solver error) for iterative ones.
    pub log_cap: f64,
    /// `ln cap` from the equilibrium measure on `A`.
    pub log_cap_equilibrium: f64,
    /// `ln` of the Dirichlet form of `h`.
    pub log_cap_dirichlet: f64,
    /// `ln sum_x mu(x) h(x)`.
    pub log_mass: f64,
    /// Relative residual of the linear system in the energy norm.
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

impl PotentialSolution {
    pub fn h(&self, x: usize) -> f64 {
        self.log_h[x].exp()
    }

    pub fn one_minus_h(&self, x: usize) -> f64 {
        self.log_g[x].exp()
    }

    pub fn cap(&self) -> f64 {
        self.log_cap.exp()
    }

    /// `ln |h(x) - h(y)|`.
    pub fn log_abs_grad(&self, x: usize, y: usize) -> f64 {
        let (hx, hy) = (self.log_h[x], self.log_h[y]);
        let (gx, gy) = (self.log_g[x], self.log_g[y]);
        let half = -std::f64::consts::LN_2;
        if hx <= half && hy <= half {
            log_abs_diff(hx, hy)
        } else if gx <= half && gy <= half {
            log_abs_diff(gx, gy)
        } else {
            (self.h(x) - self.h(y)).abs().ln()
        }
    }

    /// Sign of `h(x) - h(y)`.
    pub fn grad_sign(&self, x: usize, y: usize) -> f64 {
        if self.log_h[x] > self.log_h[y] || self.log_g[x] < self.log_g[y] {
            1.0
        } else if self.log_h[x] < self.log_h[y] || self.log_g[x] > self.log_g[y] {
            -1.0
        } else {
            0.0
        }
    }

    /// `ln e_{A,B}(x) = ln(mu(x) P_x[tau_B < tau_A])` on `A`.
    pub fn log_equilibrium_measure(&self, chain: &ReversibleChain) -> Vec<(usize, f64)> {
        (0..chain.n_states())
            .filter(|&x| self.in_a[x])
            .map(|x| {
                let mut s = LogSum::default();
                for &(y, e) in chain.neighbors(x) {
                    if !self.in_a[y] {
                        s.add(chain.log_conductance(e) + self.log_g[y]);
                    }
                }
                (x, s.value())
            })
            .collect()
    }
}

/// `ln |e^a - e^b|`.
pub fn log_abs_diff(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (-(-(hi - lo)).exp_m1()).ln()
}

fn membership(n: usize, set: &[usize]) -> Result<Vec<bool>> {
    let mut m = vec![false; n];
    for &x in set {
        if x >= n {
            return Err(Error::InvalidParameter(format!("state {x} out of range")));
        }
        m[x] = true;
    }
    Ok(m)
}

pub fn solve_potential(chain: &ReversibleChain, a: &[usize], b: &[usize]) -> Result<PotentialSolution> {
    solve_potential_with(chain, a, b, &SolveOptions::default())
}

pub fn solve_potential_with(
    chain: &ReversibleChain,
    a: &[usize],
    b: &[usize],
    opts: &SolveOptions,
) -> Result<PotentialSolution> {
    let n = chain.n_states();
    let in_a = membership(n, a)?;
    let in_b = membership(n, b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("A and B must be non-empty".into()));
    }
    if (0..n).any(|x| in_a[x] && in_b[x]) {
        return Err(Error::InvalidParameter("A and B must be disjoint".into()));
    }
    if !connected(chain, &in_a, &in_b) {
        return Err(Error::Disconnected);
    }
    if chain.is_path() {
        if let Some(sol) = solve_path(chain, &in_a, &in_b)? {
            return Ok(sol);
        }
    }
    solve_linear(chain, in_a, in_b, opts)
}

fn connected(chain: &ReversibleChain, in_a: &[bool], in_b: &[bool]) -> bool {
    let mut seen = in_a.to_vec();
    let mut queue: VecDeque<usize> = (0..chain.n_states()).filter(|&x| in_a[x]).collect();
    while let Some(x) = queue.pop_front() {
        if in_b[x] {
            return true;
        }
        for &(y, e) in chain.neighbors(x) {
            if !seen[y] && chain.log_conductance(e) > f64::NEG_INFINITY {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Closed-form series solution on a birth-death chain with `A` and `B` on opposite sides.
fn solve_path(chain: &ReversibleChain, in_a: &[bool], in_b: &[bool]) -> Result<Option<PotentialSolution>> {
    let n = chain.n_states();
    let a_idx: Vec<usize> = (0..n).filter(|&x| in_a[x]).collect();
    let b_idx: Vec<usize> = (0..n).filter(|&x| in_b[x]).collect();
    let below = a_idx.last() < b_idx.first();
    let above = a_idx.first() > b_idx.last();
    if !below && !above {
        return Ok(None);
    }
    // map to coordinates where A lies below B
    let pos = |x: usize| if below { x } else { n - 1 - x };
    let state = |p: usize| if below { p } else { n - 1 - p };
    let edge_between = |p: usize| -> usize { if below { p } else { n - 2 - p } };
    let a = pos(if below { *a_idx.last().unwrap() } else { a_idx[0] });
    let b = pos(if below { b_idx[0] } else { *b_idx.last().unwrap() });
    // ln R(a, p) for p in a..=b
    let mut log_r_from_a = vec![f64::NEG_INFINITY; b - a + 1];
    let mut s = LogSum::default();
    for p in a..b {
        s.add(-chain.log_conductance(edge_between(p)));
        log_r_from_a[p + 1 - a] = s.value();
    }
    let mut log_r_to_b = vec![f64::NEG_INFINITY; b - a + 1];
    let mut s = LogSum::default();
    for p in (a..b).rev() {
        s.add(-chain.log_conductance(edge_between(p)));
        log_r_to_b[p - a] = s.value();
    }
    let total = log_r_from_a[b - a];
    let mut log_h = vec![f64::NEG_INFINITY; n];
    let mut log_g = vec![f64::NEG_INFINITY; n];
    for p in 0..n {
        let x = state(p);
        if p <= a {
            log_h[x] = 0.0;
        } else if p >= b {
            log_g[x] = 0.0;
        } else {
            log_h[x] = log_r_to_b[p - a] - total;
            log_g[x] = log_r_from_a[p - a] - total;
        }
    }
    let log_cap = -total;
    let mut mass = LogSum::default();
    for x in 0..n {
        mass.add(chain.log_mu(x) + log_h[x]);
    }
    let in_a_ext: Vec<bool> = in_a.to_vec();
    let mut sol = PotentialSolution {
        log_h,
        log_g,
        in_a: in_a_ext,
        in_b: in_b.to_vec(),
        log_cap,
        log_cap_equilibrium: log_cap,
        log_cap_dirichlet: f64::NAN,
        log_mass: mass.value(),
        residual: 0.0,
        method: SolveMethod::PathSeries,
        iterations: 0,
    };
    sol.log_cap_dirichlet = dirichlet_of_solution(chain, &sol);
    Ok(Some(sol))
}

fn dirichlet_of_solution(chain: &ReversibleChain, sol: &PotentialSolution) -> f64 {
    let mut s = LogSum::default();
    for (e, &(x, y)) in chain.edges().iter().enumerate() {
        s.add(chain.log_conductance(e) + 2.0 * sol.log_abs_grad(x, y));
    }
    s.value()
}

struct SparseSystem {
    /// Interior states in system order.
    states: Vec<usize>,
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<(usize, f64)>,
    rhs: Vec<f64>,
}

impl SparseSystem {
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, o)| {
            let mut s = self.diag[i] * x[i];
            for &(j, v) in &self.cols[self.offsets[i]..self.offsets[i + 1]] {
                s += v * x[j];
            }
            *o = s;
        });
    }
}

/// Dot product with a fixed reduction order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    parts.iter().sum()
}

/// Scaled log-conductance below which an edge is dropped from the linear system.
pub const NEGLIGIBLE_LOG_CONDUCTANCE: f64 = -80.0;

fn solve_linear(
    chain: &ReversibleChain,
    in_a: Vec<bool>,
    in_b: Vec<bool>,
    opts: &SolveOptions,
) -> Result<PotentialSolution> {
    let n = chain.n_states();
    let side: Vec<bool> = match &opts.side {
        Some(s) => {
            if s.len() != n {
                return Err(Error::InvalidParameter("side vector has wrong length".into()));
            }
            (0..n).map(|x| in_a[x] || (s[x] && !in_b[x])).collect()
        }
        None => in_a.clone(),
    };
    let fixed = |x: usize| in_a[x] || in_b[x];
    // scale conductances relative to the edges across the split
    let mut shift = f64::NEG_INFINITY;
    for (e, &(x, y)) in chain.edges().iter().enumerate() {
        if side[x] != side[y] && !(fixed(x) && fixed(y)) {
            shift = shift.max(chain.log_conductance(e));
        }
    }
    let max_lc = chain.log_conductances().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        shift = max_lc;
    }
    if max_lc - shift > 700.0 {
        return Err(Error::DynamicRange(max_lc - shift));
    }
    // edges this far below the cut cannot influence any reported quantity
    let c = |e: usize| {
        let l = chain.log_conductance(e) - shift;
        if l < NEGLIGIBLE_LOG_CONDUCTANCE { 0.0 } else { l.exp() }
    };
    let chi = |x: usize| if side[x] { 1.0 } else { 0.0 };
    let sgn = |x: usize| if side[x] { -1.0 } else { 1.0 };

    // interior states reachable from the boundary through positive conductances
    let mut reach = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&x| fixed(x)).collect();
    for &x in &queue {
        reach[x] = true;
    }
    while let Some(x) = queue.pop_front() {
        for &(y, e) in chain.neighbors(x) {
            if !reach[y] && c(e) > 0.0 {
                reach[y] = true;
                queue.push_back(y);
            }
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut states = Vec::new();
    for x in 0..n {
        if !fixed(x) && reach[x] {
            index[x] = states.len();
            states.push(x);
        }
    }
    let m = states.len();
    let mut diag = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut offsets = vec![0usize; m + 1];
    let mut cols = Vec::new();
    for (i, &x) in states.iter().enumerate() {
        let mut d = Neumaier::default();
        let mut f = Neumaier::default();
        for &(y, e) in chain.neighbors(x) {
            let ce = c(e);
            if ce == 0.0 {
                continue;
            }
            d.add(ce);
            if chi(x) != chi(y) {
                f.add(-sgn(x) * ce * (chi(x) - chi(y)));
            }
            if index[y] != usize::MAX {
                cols.push((index[y], -ce * sgn(x) * sgn(y)));
            }
        }
        diag[i] = d.sum();
        rhs[i] = f.sum();
        offsets[i + 1] = cols.len();
    }
    let sys = SparseSystem { states, diag, offsets, cols, rhs };

    let (w, method, iterations) = if m == 0 {
        (Vec::new(), SolveMethod::Dense, 0)
    } else if m <= opts.dense_limit {
        (dense_solve(&sys)?, SolveMethod::Dense, 1)
    } else {
        let max_iter = opts.max_iter.unwrap_or(((50.0 * (n as f64).sqrt()) as usize).max(1000));
        let (w, it) = pcg(&sys, opts.tol, max_iter)?;
        (w, SolveMethod::ConjugateGradient, it)
    };

    // relative residual in the energy norm
    let mut kw = vec![0.0; m];
    sys.matvec(&w, &mut kw);
    let rr: f64 = (0..m).map(|i| (sys.rhs[i] - kw[i]).powi(2) / sys.diag[i]).sum();
    let ff: f64 = (0..m).map(|i| sys.rhs[i].powi(2) / sys.diag[i]).sum();
    let residual = if ff > 0.0 { (rr / ff).sqrt() } else { 0.0 };

    let mut log_h = vec![f64::NEG_INFINITY; n];
    let mut log_g = vec![f64::NEG_INFINITY; n];
    for x in 0..n {
        let wx = if index[x] != usize::MAX { w[index[x]].clamp(0.0, 1.0) } else { 0.0 };
        if side[x] {
            log_g[x] = wx.ln();
            log_h[x] = (-wx).ln_1p();
        } else {
            log_h[x] = wx.ln();
            log_g[x] = (-wx).ln_1p();
        }
    }
    let mut sol = PotentialSolution {
        log_h,
        log_g,
        in_a,
        in_b,
        log_cap: f64::NAN,
        log_cap_equilibrium: f64::NAN,
        log_cap_dirichlet: f64::NAN,
        log_mass: f64::NAN,
        residual,
        method,
        iterations,
    };
    let mut cap = LogSum::default();
    for (_, le) in sol.log_equilibrium_measure(chain) {
        cap.add(le);
    }
    sol.log_cap_equilibrium = cap.value();
    sol.log_cap_dirichlet = dirichlet_of_solution(chain, &sol);
    sol.log_cap = if method == SolveMethod::ConjugateGradient { sol.log_cap_dirichlet } else { sol.log_cap_equilibrium };
    let mut mass = LogSum::default();
    for x in 0..n {
        mass.add(chain.log_mu(x) + sol.log_h[x]);
    }
    sol.log_mass = mass.value();
    Ok(sol)
}

fn dense_solve(sys: &SparseSystem) -> Result<Vec<f64>> {
    let m = sys.states.len();
    let mut k = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = sys.diag[i];
        for &(j, v) in &sys.cols[sys.offsets[i]..sys.offsets[i + 1]] {
            k[(i, j)] += v;
        }
    }
    let f = DVector::from_vec(sys.rhs.clone());
    if let Some(ch) = k.clone().cholesky() {
        return Ok(ch.solve(&f).iter().copied().collect());
    }
    k.lu()
        .solve(&f)
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::SolverFailure { iterations: 0, residual: f64::INFINITY })
}

/// Jacobi-preconditioned conjugate gradients.
fn pcg(sys: &SparseSystem, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let m = sys.states.len();
    let mut x = vec![0.0; m];
    let mut r = sys.rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&sys.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; m];
    let mut rz = dot(&r, &z);
    let norm0 = rz.sqrt();
    if norm0 == 0.0 {
        return Ok((x, 0));
    }
    for it in 1..=max_iter {
        sys.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        let alpha = rz / pq;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
        z.par_iter_mut().zip(r.par_iter().zip(&sys.diag)).for_each(|(z, (r, d))| *z = r / d);
        let rz_new = dot(&r, &z);
        if rz_new.sqrt() <= tol * norm0 {
            return Ok((x, it));
        }
        let beta = rz_new / rz;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        rz = rz_new;
    }
    Err(Error::SolverFailure { iterations: max_iter, residual: rz.sqrt() / norm0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMethod {
    Exact,
    Formula,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingTimeResult {
    /// Starting law on `A` as `(state, probability)`.
    pub nu: Vec<(usize, f64)>,
    pub mean: f64,
    pub log_mean: f64,
    pub method: TimeMethod,
    pub stderr: Option<f64>,
}

/// `E_nu tau_B` with `nu` the normalized equilibrium measure on `A`.
pub fn mean_hitting_time(chain: &ReversibleChain, sol: &PotentialSolution) -> HittingTimeResult {
    let nu = sol
        .log_equilibrium_measure(chain)
        .into_iter()
        .map(|(x, le)| (x, (le - sol.log_cap).exp()))
        .collect();
    let log_mean = sol.log_mass - sol.log_cap;
    HittingTimeResult { nu, mean: log_mean.exp(), log_mean, method: TimeMethod::Exact, stderr: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub edge: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct UnitFlow {
    pub edges: Vec<FlowEdge>,
}

impl UnitFlow {
    /// Outgoing flow edges per state.
    pub fn out_lists(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for (i, fe) in self.edges.iter().enumerate() {
            if fe.value > 0.0 {
                out[fe.from].push(i);
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> UnitFlow {
        UnitFlow { edges: self.edges.iter().map(|fe| FlowEdge { value: fe.value * s, ..*fe }).collect() }
    }
}

/// `f*(x,y) = c(x,y) (h(x) - h(y))_+ / cap`.
pub fn harmonic_flow(chain: &ReversibleChain, sol: &PotentialSolution) -> UnitFlow {
    let mut edges = Vec::new();
    for (e, &(x, y)) in chain.edges().iter().enumerate() {
        let s = sol.grad_sign(x, y);
        if s == 0.0 || (sol.in_a[x] && sol.in_a[y]) || (sol.in_b[x] && sol.in_b[y]) {
            continue;
        }
        let value = (chain.log_conductance(e) + sol.log_abs_grad(x, y) - sol.log_cap).exp();
        if value > 0.0 {
            let (from, to) = if s > 0.0 { (x, y) } else { (y, x) };
            edges.push(FlowEdge { from, to, edge: e, value });
        }
    }
    UnitFlow { edges }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowViolation {
    /// Flow value negative or not finite, or not on a chain edge.
    BadValue { edge: usize },
    /// Clause (i): both orientations of an edge carry flow.
    Antisymmetry { edge: usize },
    /// Clause (ii): inflow differs from outflow at an interior vertex.
    Kirchhoff { vertex: usize, residual: f64 },
    /// Clause (iii): total out of `A` or into `B` differs from one.
    Normalization { out_of_a: f64, into_b: f64 },
    /// Clause (iv): the support contains a directed cycle through `vertex`.
    Cycle { vertex: usize },
}

pub fn validate_flow(chain: &ReversibleChain, flow: &UnitFlow, a: &[usize], b: &[usize]) -> std::result::Result<(), FlowViolation> {
    validate_flow_tol(chain, flow, a, b, 1e-12)
}

pub fn validate_flow_tol(
    chain: &ReversibleChain,
    flow: &UnitFlow,
    a: &[usize],
    b: &[usize],
    tol: f64,
) -> std::result::Result<(), FlowViolation> {
    let n = chain.n_states();
    let mut in_a = vec![false; n];
    let mut in_b = vec![false; n];
    a.iter().for_each(|&x| in_a[x] = true);
    b.iter().for_each(|&x| in_b[x] = true);
    let mut dir = vec![0i8; chain.n_edges()];
    for fe in &flow.edges {
        if !(fe.value >= 0.0 && fe.value.is_finite()) || fe.edge >= chain.n_edges() {
            return Err(FlowViolation::BadValue { edge: fe.edge });
        }
        let (x, y) = chain.edge(fe.edge);
        let d = if (fe.from, fe.to) == (x, y) {
            1
        } else if (fe.from, fe.to) == (y, x) {
            -1
        } else {
            return Err(FlowViolation::BadValue { edge: fe.edge });
        };
        if fe.value > 0.0 {
            if dir[fe.edge] != 0 {
                return Err(FlowViolation::Antisymmetry { edge: fe.edge });
            }
            dir[fe.edge] = d;
        }
    }
    let mut net = vec![Neumaier::default(); n];
    for fe in &flow.edges {
        net[fe.from].add(fe.value);
        net[fe.to].add(-fe.value);
    }
    for x in 0..n {
        if !in_a[x] && !in_b[x] && net[x].sum().abs() > tol {
            return Err(FlowViolation::Kirchhoff { vertex: x, residual: net[x].sum() });
        }
    }
    let out_of_a: f64 = (0..n).filter(|&x| in_a[x]).map(|x| net[x].sum()).sum();
    let into_b: f64 = -(0..n).filter(|&x| in_b[x]).map(|x| net[x].sum()).sum::<f64>();
    if (out_of_a - 1.0).abs() > tol || (into_b - 1.0).abs() > tol {
        return Err(FlowViolation::Normalization { out_of_a, into_b });
    }
    // Kahn's algorithm on the support digraph
    let out = flow.out_lists(n);
    let mut indeg = vec![0usize; n];
    for fe in flow.edges.iter().filter(|fe| fe.value > 0.0) {
        indeg[fe.to] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&x| indeg[x] == 0).collect();
    let mut seen = 0;
    while let Some(x) = queue.pop_front() {
        seen += 1;
        for &i in &out[x] {
            let y = flow.edges[i].to;
            indeg[y] -= 1;
            if indeg[y] == 0 {
                queue.push_back(y);
            }
        }
    }
    if seen < n {
        let vertex = (0..n).find(|&x| indeg[x] > 0).unwrap();
        return Err(FlowViolation::Cycle { vertex });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BkMode {
    ExactEnumeration,
    MonteCarlo { paths: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BkBound {
    pub log_value: f64,
    /// Standard error relative to the value (Monte Carlo only).
    pub rel_stderr: Option<f64>,
    pub paths: usize,
    pub mode: BkMode,
}

pub const PATH_ENUMERATION_CAP: usize = 1_000_000;

struct FlowChain<'a> {
    flow: &'a UnitFlow,
    out: Vec<Vec<usize>>,
    out_total: Vec<f64>,
    /// `ln(f/c)` per flow edge.
    log_ratio: Vec<f64>,
    in_b: Vec<bool>,
    start: Vec<(usize, f64)>,
}

impl<'a> FlowChain<'a> {
    fn new(chain: &ReversibleChain, flow: &'a UnitFlow, a: &[usize], b: &[usize]) -> Self {
        let n = chain.n_states();
        let out = flow.out_lists(n);
        let out_total = out.iter().map(|l| l.iter().map(|&i| flow.edges[i].value).sum()).collect::<Vec<f64>>();
        let log_ratio = flow.edges.iter().map(|fe| fe.value.ln() - chain.log_conductance(fe.edge)).collect();
        let mut in_b = vec![false; n];
        b.iter().for_each(|&x| in_b[x] = true);
        let start = a.iter().filter(|&&x| out_total[x] > 0.0).map(|&x| (x, out_total[x])).collect();
        FlowChain { flow, out, out_total, log_ratio, in_b, start }
    }

    fn sample_path<R: Rng>(&self, r: &mut R) -> Result<f64> {
        let total: f64 = self.start.iter().map(|s| s.1).sum();
        let mut u = r.random::<f64>() * total;
        let mut x = self.start.last().map(|s| s.0).ok_or_else(|| Error::InvalidFlow("no flow leaves A".into()))?;
        for &(s, w) in &self.start {
            if u < w {
                x = s;
                break;
            }
            u -= w;
        }
        let mut acc = LogSum::default();
        let mut steps = 0usize;
        while !self.in_b[x] {
            let list = &self.out[x];
            if list.is_empty() {
                return Err(Error::InvalidFlow(format!("path stuck at state {x}")));
            }
            let mut u = r.random::<f64>() * self.out_total[x];
            let mut pick = *list.last().unwrap();
            for &i in list {
                let v = self.flow.edges[i].value;
                if u < v {
                    pick = i;
                    break;
                }
                u -= v;
            }
            acc.add(self.log_ratio[pick]);
            x = self.flow.edges[pick].to;
            steps += 1;
            if steps > 100_000_000 {
                return Err(Error::InvalidFlow("path does not terminate".into()));
            }
        }
        Ok(acc.value())
    }

    /// Enumerates all paths as `(ln probability, ln sum f/c)`; `None` if over the cap.
    fn enumerate(&self, cap: usize) -> Option<Vec<(f64, f64)>> {
        let total: f64 = self.start.iter().map(|s| s.1).sum();
        let mut out = Vec::new();
        let mut stack: Vec<(usize, f64, LogSum)> =
            self.start.iter().map(|&(x, w)| (x, (w / total).ln(), LogSum::default())).collect();
        while let Some((x, lp, acc)) = stack.pop() {
            if self.in_b[x] {
                out.push((lp, acc.value()));
                if out.len() > cap {
                    return None;
                }
                continue;
            }
            if self.out[x].is_empty() {
                return None;
            }
            for &i in &self.out[x] {
                let mut a2 = acc.clone();
                a2.add(self.log_ratio[i]);
                stack.push((self.flow.edges[i].to, lp + (self.flow.edges[i].value / self.out_total[x]).ln(), a2));
            }
            if stack.len() > 10 * cap {
                return None;
            }
        }
        Some(out)
    }
}

/// Berman-Konsowa bound `E^f[(sum_e f(e)/c(e))^-1] <= cap`.
pub fn bk_lower_bound(chain: &ReversibleChain, flow: &UnitFlow, a: &[usize], b: &[usize], mode: BkMode) -> Result<BkBound> {
    let fc = FlowChain::new(chain, flow, a, b);
    if let BkMode::ExactEnumeration = mode {
        if let Some(paths) = fc.enumerate(PATH_ENUMERATION_CAP) {
            let mut s = LogSum::default();
            for &(lp, lx) in &paths {
                s.add(lp - lx);
            }
            return Ok(BkBound { log_value: s.value(), rel_stderr: None, paths: paths.len(), mode });
        }
    }
    let (paths, seed) = match mode {
        BkMode::MonteCarlo { paths, seed } => (paths, seed),
        BkMode::ExactEnumeration => (20_000, 0),
    };
    let samples: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|i| fc.sample_path(&mut rng::stream(seed, rng::PATH_BASE + i as u64)).map(|lx| -lx))
        .collect::<Result<Vec<_>>>()?;
    let top = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vals: Vec<f64> = samples.iter().map(|v| (v - top).exp()).collect();
    let r = paths as f64;
    let mean = crate::util::pairwise_sum(&vals) / r;
    let dev: Vec<f64> = vals.iter().map(|v| (v - mean).powi(2)).collect();
    let var = crate::util::pairwise_sum(&dev) / (r - 1.0).max(1.0);
    Ok(BkBound {
        log_value: mean.ln() + top,
        rel_stderr: Some((var / r).sqrt() / mean),
        paths,
        mode: BkMode::MonteCarlo { paths, seed },
    })
}

/// Deterministic bound `1 / sum_e f(e)^2 / c(e)`; never above the Berman-Konsowa value.
pub fn thomson_lower_bound(chain: &ReversibleChain, flow: &UnitFlow) -> f64 {
    let mut s = LogSum::default();
    for fe in flow.edges.iter().filter(|fe| fe.value > 0.0) {
        s.add(2.0 * fe.value.ln() - chain.log_conductance(fe.edge));
    }
    -s.value()
}

/// `ln Phi(u)` for a test function with `u = 1` on `A` and `u = 0` on `B`.
pub fn dirichlet_upper_bound(chain: &ReversibleChain, u: &[f64], a: &[usize], b: &[usize]) -> Result<f64> {
    if u.len() != chain.n_states() {
        return Err(Error::InvalidParameter("test function has wrong length".into()));
    }
    if a.iter().any(|&x| u[x] != 1.0) || b.iter().any(|&x| u[x] != 0.0) {
        return Err(Error::InvalidParameter("test function violates boundary values".into()));
    }
    if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter("test function must take values in [0,1]".into()));
    }
    Ok(dirichlet_form(chain, u))
}

/// `ln sum_e c(e) (u(x) - u(y))^2`.
pub fn dirichlet_form(chain: &ReversibleChain, u: &[f64]) -> f64 {
    let mut s = LogSum::default();
    for (e, &(x, y)) in chain.edges().iter().enumerate() {
        let d = u[x] - u[y];
        if d != 0.0 {
            s.add(chain.log_conductance(e) + 2.0 * d.abs().ln());
        }
    }
    s.value()
}

/// Checks the Green function identities for `A = {a}` against a direct solve.
pub fn green_identity_check(chain: &ReversibleChain, a: usize, b: &[usize]) -> Result<f64> {
    let n = chain.n_states();
    if n > 2000 {
        return Err(Error::InvalidParameter("Green function check limited to 2000 states".into()));
    }
    let mut in_b = vec![false; n];
    b.iter().for_each(|&x| in_b[x] = true);
    let idx: Vec<usize> = (0..n).filter(|&x| !in_b[x]).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &x) in idx.iter().enumerate() {
        pos[x] = i;
    }
    let shift = chain.log_conductances().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m = idx.len();
    let mut l = DMatrix::<f64>::zeros(m, m);
    for (e, &(x, y)) in chain.edges().iter().enumerate() {
        let c = (chain.log_conductance(e) - shift).exp();
        for (u, v) in [(x, y), (y, x)] {
            if pos[u] != usize::MAX {
                l[(pos[u], pos[u])] += c;
                if pos[v] != usize::MAX {
                    l[(pos[u], pos[v])] -= c;
                }
            }
        }
    }
    let linv = l.try_inverse().ok_or(Error::SolverFailure { iterations: 0, residual: f64::INFINITY })?;
    // G(x,y) = Linv(x,y) mu(y), with mu in the same scale as the conductances
    let mu = |x: usize| (chain.log_mu(x) - shift).exp();
    let g = |x: usize, y: usize| linv[(pos[x], pos[y])] * mu(y);
    let sol = solve_potential(chain, &[a], b)?;
    let cap = (sol.log_cap - shift).exp();
    let mut worst = 0.0f64;
    for &x in &idx {
        for &y in &idx {
            let l1 = mu(x) * g(x, y);
            let l2 = mu(y) * g(y, x);
            worst = worst.max((l1 - l2).abs() / l1.abs().max(l2.abs()).max(f64::MIN_POSITIVE));
        }
        // G(a, x) = mu(x) h_{a,B}(x) / cap and h_{a,B}(x) = G(x, a) cap / mu(a)
        let pred = mu(x) * sol.h(x) / cap;
        worst = worst.max((g(a, x) - pred).abs() / pred.abs().max(g(a, x).abs()).max(f64::MIN_POSITIVE));
        let h2 = g(x, a) * cap / mu(a);
        worst = worst.max((h2 - sol.h(x)).abs() / sol.h(x).max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}
