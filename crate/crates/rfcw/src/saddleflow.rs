//! Near-saddle constructions on lumped chains: the approximately harmonic test
//! function, its generator residual, a unit flow through the saddle and the
//! Dirichlet upper bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meso::{LevelSets, LumpedChain, SaddleData};
use crate::potential::{dirichlet_upper_bound, FlowEdge, UnitFlow};
use crate::util::{normal_cdf, normal_diff, LogSum, Neumaier};

/// `sqrt(beta N |gamma_1|)`, the inverse width of the test function.
pub fn scale(saddle: &SaddleData, beta: f64, n_sites: usize) -> f64 {
    (beta * n_sites as f64 * saddle.gamma1().abs()).sqrt()
}

/// `(v, x - z*)`.
pub fn projection(saddle: &SaddleData, x: &[f64]) -> f64 {
    saddle.eigen.v.iter().zip(x.iter().zip(&saddle.z)).map(|(v, (x, z))| v * (x - z)).sum()
}

/// `g(x) = Phi(sqrt(beta N |gamma_1|) (v, x - z*))`.
pub fn test_function(saddle: &SaddleData, beta: f64, n_sites: usize, x: &[f64]) -> f64 {
    normal_cdf(scale(saddle, beta, n_sites) * projection(saddle, x))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rho: f64,
    /// Largest `|L g| / envelope` over the box.
    pub max_ratio: f64,
    pub points: usize,
}

/// Generator residual of `g` for the constant-rate Gaussian surrogate chain on the
/// box `|x_l - z_l| <= rho` of the lattice with block sizes `sizes`.
pub fn harmonic_residual(saddle: &SaddleData, beta: f64, sizes: &[usize], rho: f64) -> Result<ResidualReport> {
    let n_sites: usize = sizes.iter().sum();
    let nf = n_sites as f64;
    let dim = saddle.dim();
    if sizes.len() != dim {
        return Err(Error::InvalidParameter("block sizes do not match the saddle".into()));
    }
    let kappa = scale(saddle, beta, n_sites);
    let gamma = saddle.gamma1().abs();
    let a = saddle.hessian();
    let v = &saddle.eigen.v;
    let rv: f64 = saddle.r.iter().zip(v).map(|(r, v)| r * v).sum();
    let step = 2.0 / nf;
    // lattice ranges per coordinate
    let ranges: Vec<(i64, i64)> = (0..dim)
        .map(|l| {
            let s = sizes[l] as f64;
            let lo = (((saddle.z[l] - rho) * nf + s) / 2.0).ceil().max(0.0) as i64;
            let hi = (((saddle.z[l] + rho) * nf + s) / 2.0).floor().min(s) as i64;
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|&(lo, hi)| hi < lo) {
        return Err(Error::InvalidParameter(format!("box of half-width {rho} contains no lattice point")));
    }
    let proj = |y: &[f64]| -> f64 { y.iter().zip(v).map(|(y, v)| y * v).sum() };
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut max_ratio = 0.0f64;
    let mut points = 0usize;
    let mut y = vec![0.0; dim];
    loop {
        for l in 0..dim {
            y[l] = (2.0 * k[l] as f64 - sizes[l] as f64) / nf - saddle.z[l];
        }
        let ay: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| a[(i, j)] * y[j]).sum()).collect();
        let s0 = kappa * proj(&y);
        let mut lg = Neumaier::default();
        for l in 0..dim {
            let ds = kappa * step * v[l];
            let up = normal_diff(s0, s0 + ds);
            let down = -normal_diff(s0 - ds, s0);
            // Q(x - e)/Q(x) for Q = exp(-beta N (y, A y)/2)
            let ratio = (2.0 * beta * ay[l] - 2.0 * beta / nf * a[(l, l)]).exp();
            lg.add(saddle.r[l] * up);
            lg.add(saddle.r[l] * ratio * down);
        }
        let s: f64 = y.iter().zip(v).map(|(y, v)| y * v).sum();
        let envelope = (beta * gamma / (2.0 * std::f64::consts::PI * nf)).sqrt() * (-0.5 * kappa * kappa * s * s).exp() * rv;
        if envelope > 0.0 {
            max_ratio = max_ratio.max(lg.sum().abs() / envelope);
        }
        points += 1;
        let mut l = dim;
        loop {
            if l == 0 {
                return Ok(ResidualReport { rho, max_ratio, points });
            }
            l -= 1;
            k[l] += 1;
            if k[l] <= ranges[l].1 {
                break;
            }
            k[l] = ranges[l].0;
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Half-width of the slab around the saddle in units of `1/sqrt(beta N |gamma_1|)`.
    pub slab_width: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { slab_width: 0.35 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaddleFlow {
    pub flow: UnitFlow,
    /// Flow mass removed by clipping negative corrections, relative to the unit flow.
    pub clipped_mass: f64,
    /// Number of states in the slab around the saddle.
    pub slab_states: usize,
    pub slab_half_width: f64,
}

fn signed_projection(saddle: &SaddleData, lc: &LumpedChain, x: usize, forward: bool) -> f64 {
    let s = projection(saddle, &lc.coords(x));
    if forward {
        s
    } else {
        -s
    }
}

/// Neighbour of `x` one step along block `l` in the flow direction.
fn step(lc: &LumpedChain, x: usize, l: usize, forward: bool) -> Option<usize> {
    let mut k = lc.counts(x);
    if forward {
        if k[l] == lc.sizes[l] {
            return None;
        }
        k[l] += 1;
    } else {
        if k[l] == 0 {
            return None;
        }
        k[l] -= 1;
    }
    Some(lc.index(&k))
}

/// Shares proportional to the conductances of the given `(state, edge)` pairs.
fn split_by_conductance(ch: &crate::potential::ReversibleChain, list: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let top = list.iter().map(|&(_, e)| ch.log_conductance(e)).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = list.iter().map(|&(_, e)| (ch.log_conductance(e) - top).exp()).collect();
    let total: f64 = w.iter().sum();
    list.iter().zip(&w).map(|(&(y, e), w)| (y, e, w / total)).collect()
}

/// Unit flow from `A` to `B` through the saddle.
///
/// Inside a slab `|(v, x - z*)| <= w` the flow starts from conductance times the
/// Gaussian gradient profile and is corrected level by level so that Kirchhoff's
/// law holds exactly, distributing the imbalance with weights `v_check`. Flux
/// entering the slab is supplied from `A`, and flux leaving it is carried to `B`,
/// along coordinate-monotone paths that split in proportion to the conductances.
pub fn build_saddle_flow(saddle: &SaddleData, lc: &LumpedChain, sets: &LevelSets, opts: &FlowOptions) -> Result<SaddleFlow> {
    let ch = &lc.chain;
    let n = ch.n_states();
    let dim = lc.dim();
    let fwd = sets.forward();
    let levels = lc.levels();
    let kappa = scale(saddle, lc.beta, lc.n_sites);
    let w = opts.slab_width / kappa;
    let s: Vec<f64> = (0..n).map(|x| signed_projection(saddle, lc, x, fwd)).collect();
    let in_a: Vec<bool> = levels.iter().map(|&k| sets.in_a(k)).collect();
    let in_b: Vec<bool> = levels.iter().map(|&k| sets.in_b(k)).collect();
    let in_slab: Vec<bool> = (0..n).map(|x| !in_a[x] && !in_b[x] && s[x].abs() <= w).collect();
    let slab_states = in_slab.iter().filter(|&&b| b).count();
    if slab_states == 0 {
        return Err(Error::InvalidFlow("empty slab around the saddle".into()));
    }
    let edge_to = |x: usize, l: usize| -> Option<(usize, usize)> {
        let y = step(lc, x, l, fwd)?;
        Some((y, ch.find_edge(x, y)?))
    };
    let vv = &saddle.eigen.v;
    let nf = lc.n_sites as f64;
    // log of the starting profile on the edge x -> x + e_l
    let log_f0 = |x: usize, l: usize, e: usize| -> f64 {
        let mid = s[x] + vv[l] / nf;
        ch.log_conductance(e) + vv[l].ln() - 0.5 * kappa * kappa * mid * mid
    };
    let mut shift = f64::NEG_INFINITY;
    for x in (0..n).filter(|&x| in_slab[x]) {
        for l in 0..dim {
            if let Some((_, e)) = edge_to(x, l) {
                shift = shift.max(log_f0(x, l, e));
            }
        }
    }
    let f0 = |x: usize, l: usize, e: usize| (log_f0(x, l, e) - shift).exp();

    let mut value: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut inflow = vec![0.0f64; n];
    // entry edges into the slab from outside; their sources need supply from A
    let mut demand = vec![0.0f64; n];
    for x in (0..n).filter(|&x| !in_slab[x] && !in_b[x]) {
        for l in 0..dim {
            if let Some((y, e)) = edge_to(x, l) {
                if in_slab[y] {
                    let f = f0(x, l, e);
                    value.push((x, y, e, f));
                    inflow[y] += f;
                    demand[x] += f;
                }
            }
        }
    }
    // slab states in flow order
    let mut order: Vec<usize> = (0..n).filter(|&x| in_slab[x]).collect();
    order.sort_by_key(|&x| if fwd { levels[x] as i64 } else { -(levels[x] as i64) });
    let mut clipped = 0.0;
    let mut exit = vec![0.0f64; n];
    for &x in &order {
        let mut outs: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(dim);
        let mut wsum = 0.0;
        let mut out0 = 0.0;
        for l in 0..dim {
            if let Some((y, e)) = edge_to(x, l) {
                let f = f0(x, l, e);
                out0 += f;
                wsum += saddle.eigen.v_check[l];
                outs.push((l, y, e, f));
            }
        }
        if outs.is_empty() {
            return Err(Error::InvalidFlow(format!("slab state {x} has no forward edge")));
        }
        let excess = inflow[x] - out0;
        for o in outs.iter_mut() {
            o.3 += saddle.eigen.v_check[o.0] / wsum * excess;
        }
        let neg: f64 = outs.iter().filter(|o| o.3 < 0.0).map(|o| -o.3).sum();
        if neg > 0.0 {
            clipped += neg;
            let pos: f64 = outs.iter().map(|o| o.3.max(0.0)).sum();
            for o in outs.iter_mut() {
                o.3 = if pos > 0.0 { o.3.max(0.0) * inflow[x] / pos } else { 0.0 };
            }
            if pos == 0.0 && inflow[x] > 0.0 {
                // route everything along the direction of largest v_check
                let best = (0..outs.len()).max_by(|&i, &j| saddle.eigen.v_check[outs[i].0].total_cmp(&saddle.eigen.v_check[outs[j].0])).unwrap();
                outs[best].3 = inflow[x];
            }
        }
        for &(_, y, e, f) in &outs {
            if f > 0.0 {
                value.push((x, y, e, f));
                if in_slab[y] {
                    inflow[y] += f;
                } else if !in_b[y] {
                    exit[y] += f;
                }
            }
        }
    }
    // forward monotone routing from slab exits to B
    let mut carry = exit;
    let mut after: Vec<usize> = (0..n).filter(|&x| !in_slab[x] && !in_b[x] && carry[x] > 0.0).collect();
    after.sort_by_key(|&x| if fwd { levels[x] as i64 } else { -(levels[x] as i64) });
    let mut queue = std::collections::BTreeMap::new();
    for x in after {
        queue.insert((if fwd { levels[x] as i64 } else { -(levels[x] as i64) }, x), ());
    }
    while let Some((&(key, x), _)) = queue.iter().next() {
        queue.remove(&(key, x));
        let f = carry[x];
        let outs: Vec<(usize, usize)> = (0..dim).filter_map(|l| edge_to(x, l)).collect();
        if outs.is_empty() {
            return Err(Error::InvalidFlow(format!("state {x} cannot reach B")));
        }
        for (y, e, share) in split_by_conductance(ch, &outs) {
            let g = f * share;
            if g == 0.0 {
                continue;
            }
            value.push((x, y, e, g));
            if !in_b[y] {
                if carry[y] == 0.0 {
                    queue.insert((if fwd { levels[y] as i64 } else { -(levels[y] as i64) }, y), ());
                }
                carry[y] += g;
            }
        }
    }
    // backward monotone routing from entry sources to A, processed against the flow
    let back_edge = |y: usize, l: usize| -> Option<(usize, usize)> {
        let x = step(lc, y, l, !fwd)?;
        Some((x, ch.find_edge(x, y)?))
    };
    let mut queue = std::collections::BTreeMap::new();
    for x in (0..n).filter(|&x| demand[x] > 0.0 && !in_a[x]) {
        queue.insert((if fwd { -(levels[x] as i64) } else { levels[x] as i64 }, x), ());
    }
    while let Some((&(key, y), _)) = queue.iter().next() {
        queue.remove(&(key, y));
        let f = demand[y];
        let ins: Vec<(usize, usize)> = (0..dim).filter_map(|l| back_edge(y, l)).collect();
        if ins.is_empty() {
            return Err(Error::InvalidFlow(format!("state {y} cannot be reached from A")));
        }
        for (x, e, share) in split_by_conductance(ch, &ins) {
            let g = f * share;
            if g == 0.0 {
                continue;
            }
            value.push((x, y, e, g));
            if !in_a[x] {
                if demand[x] == 0.0 {
                    queue.insert((if fwd { -(levels[x] as i64) } else { levels[x] as i64 }, x), ());
                }
                demand[x] += g;
            }
        }
    }
    // merge parallel contributions and normalize
    value.sort_by_key(|t| t.2);
    let mut edges: Vec<FlowEdge> = Vec::new();
    for (from, to, e, f) in value {
        match edges.last_mut() {
            Some(last) if last.edge == e => last.value += f,
            _ => edges.push(FlowEdge { from, to, edge: e, value: f }),
        }
    }
    let total: f64 = edges.iter().filter(|fe| in_a[fe.from] && !in_a[fe.to]).map(|fe| fe.value).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidFlow("no flow leaves A".into()));
    }
    for fe in edges.iter_mut() {
        fe.value /= total;
    }
    Ok(SaddleFlow { flow: UnitFlow { edges }, clipped_mass: clipped / total, slab_states, slab_half_width: w })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct UpperBound {
    /// `ln Phi(g~)` on the lumped chain.
    pub log_phi: f64,
    /// `ln` of the finite-`n` closed form.
    pub log_closed_form: f64,
    pub wedge_half_width: f64,
}

/// Default plateau half-width `2 sqrt(ln N / (beta N |gamma_1|))`.
pub fn default_wedge(saddle: &SaddleData, beta: f64, n_sites: usize) -> f64 {
    let nf = n_sites as f64;
    2.0 * (nf.ln() / (beta * nf * saddle.gamma1().abs())).sqrt()
}

/// The test function oriented to equal one on `A`, with plateaus beyond the wedge.
pub fn oriented_test_function(saddle: &SaddleData, lc: &LumpedChain, sets: &LevelSets, wedge: f64) -> Vec<f64> {
    let fwd = sets.forward();
    let kappa = scale(saddle, lc.beta, lc.n_sites);
    (0..lc.n_states())
        .map(|x| {
            let k = lc.level(x);
            if sets.in_a(k) {
                return 1.0;
            }
            if sets.in_b(k) {
                return 0.0;
            }
            let s = signed_projection(saddle, lc, x, fwd);
            if s <= -wedge {
                1.0
            } else if s >= wedge {
                0.0
            } else {
                normal_cdf(-kappa * s)
            }
        })
        .collect()
}

/// Dirichlet form of the oriented test function on the lumped chain, with the
/// finite-`n` closed form for comparison.
pub fn upper_bound_via_g(
    saddle: &SaddleData,
    lc: &LumpedChain,
    sets: &LevelSets,
    land: &crate::landscape::Landscape1D,
    wedge: Option<f64>,
) -> Result<UpperBound> {
    let wedge = wedge.unwrap_or_else(|| default_wedge(saddle, lc.beta, lc.n_sites));
    let u = oriented_test_function(saddle, lc, sets, wedge);
    let (a, b, _) = sets.split(&lc.levels());
    let log_phi = dirichlet_upper_bound(&lc.chain, &u, &a, &b)?;
    Ok(UpperBound { log_phi, log_closed_form: crate::kramers::finite_n_log_zcap(saddle, land), wedge_half_width: wedge })
}

/// `ln sum_x Q(x)` over states whose level satisfies `pred`.
pub fn log_mass_where<F: Fn(usize) -> bool>(lc: &LumpedChain, pred: F) -> f64 {
    let mut s = LogSum::default();
    for x in 0..lc.n_states() {
        if pred(lc.level(x)) {
            s.add(lc.chain.log_mu(x));
        }
    }
    s.value()
}
