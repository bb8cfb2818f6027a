//! Block coarse graining: mesoscopic free energy, lumped chains and saddle data.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::Landscape1D;
use crate::model::{RandomField, SystemParams};
use crate::potential::ReversibleChain;
use crate::util::{bisect, LnFactorial, Neumaier};

/// Partition of the sites by equal-width field intervals; empty blocks are dropped.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Partition {
    pub n_sites: usize,
    pub requested: usize,
    pub intervals: Vec<(f64, f64)>,
    pub blocks: Vec<Vec<usize>>,
    pub rho: Vec<f64>,
    pub hbar: Vec<f64>,
    /// Residual fields `h_i - hbar` per site.
    pub htilde: Vec<f64>,
    pub h: Vec<f64>,
}

impl Partition {
    pub fn dim(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.htilde.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Block-constant field, for which lumping is exact.
    pub fn is_exact(&self) -> bool {
        self.max_residual() <= 1e-14
    }
}

pub fn build_partition(field: &RandomField, n: usize) -> Result<Partition> {
    if n == 0 {
        return Err(Error::InvalidParameter("block count must be at least 1".into()));
    }
    let (dlo, dhi) = field.dist.support();
    let lo = field.h.iter().fold(dlo, |a, &x| a.min(x));
    let hi = field.h.iter().fold(dhi, |a, &x| a.max(x));
    let width = (hi - lo) / n as f64;
    let mut blocks = vec![Vec::new(); n];
    for (i, &x) in field.h.iter().enumerate() {
        let k = if width > 0.0 { (((x - lo) / width).floor() as usize).min(n - 1) } else { 0 };
        blocks[k].push(i);
    }
    let n_sites = field.n();
    let mut out = Partition {
        n_sites,
        requested: n,
        intervals: Vec::new(),
        blocks: Vec::new(),
        rho: Vec::new(),
        hbar: Vec::new(),
        htilde: vec![0.0; n_sites],
        h: field.h.clone(),
    };
    for (k, b) in blocks.into_iter().enumerate() {
        if b.is_empty() {
            continue;
        }
        let mean = crate::util::neumaier_sum(b.iter().map(|&i| field.h[i])) / b.len() as f64;
        for &i in &b {
            out.htilde[i] = field.h[i] - mean;
        }
        out.intervals.push((lo + k as f64 * width, lo + (k + 1) as f64 * width));
        out.rho.push(b.len() as f64 / n_sites as f64);
        out.hbar.push(mean);
        out.blocks.push(b);
    }
    Ok(out)
}

/// Mesoscopic free energy on block magnetizations.
#[derive(Clone, Debug)]
pub struct MesoLandscape {
    pub partition: Partition,
    pub beta: f64,
    blocks: Vec<Landscape1D>,
}

impl MesoLandscape {
    pub fn new(partition: Partition, params: SystemParams) -> Self {
        let blocks = partition
            .blocks
            .iter()
            .map(|b| {
                let h: Vec<f64> = b.iter().map(|&i| partition.htilde[i]).collect();
                Landscape1D::from_fields(&h, params)
            })
            .collect();
        MesoLandscape { partition, beta: params.beta, blocks }
    }

    /// `-(sum x)^2/2 - sum x_l hbar_l + (1/beta) sum rho_l I_l(x_l / rho_l)`.
    pub fn free_energy(&self, x: &[f64]) -> Result<f64> {
        let p = &self.partition;
        if x.len() != p.dim() {
            return Err(Error::InvalidParameter("point has wrong dimension".into()));
        }
        let m = crate::util::neumaier_sum(x.iter().copied());
        let mut s = Neumaier::default();
        s.add(-0.5 * m * m);
        for l in 0..p.dim() {
            let (i, _, _) = self.blocks[l].legendre(x[l] / p.rho[l])?;
            s.add(-x[l] * p.hbar[l]);
            s.add(p.rho[l] * i / self.beta);
        }
        Ok(s.sum())
    }

    /// Minimizer of the free energy on `{sum x = m}`.
    pub fn min_energy_curve(&self, m: f64) -> Result<Vec<f64>> {
        min_energy_curve(&self.partition, self.beta, m)
    }
}

/// Point of the minimal energy curve: `x_l = (1/N) sum_{i in block l} tanh(beta (m + a + h_i))`
/// with `a` fixed by `sum x = m`.
pub fn min_energy_curve(partition: &Partition, beta: f64, m: f64) -> Result<Vec<f64>> {
    if !(m.abs() < 1.0) {
        return Err(Error::Domain(format!("|m| = {} must be below 1", m.abs())));
    }
    let nf = partition.n_sites as f64;
    let total = |a: f64| {
        crate::util::neumaier_sum(partition.h.iter().map(|h| (beta * (m + a + h)).tanh())) / nf - m
    };
    let hmax = partition.h.iter().fold(0.0f64, |a, h| a.max(h.abs()));
    let c = m.atanh() / beta - m;
    let a = bisect(total, c - hmax - 1.0, c + hmax + 1.0, 0.0, 300);
    Ok(partition
        .blocks
        .iter()
        .map(|b| crate::util::neumaier_sum(b.iter().map(|&i| (beta * (m + a + partition.h[i])).tanh())) / nf)
        .collect())
}

/// Lumped chain on the block-magnetization grid, states in row-major order of the
/// up-spin counts `k_l` (last block fastest).
#[derive(Clone, Debug)]
pub struct LumpedChain {
    pub sizes: Vec<usize>,
    pub n_sites: usize,
    pub beta: f64,
    pub hbar: Vec<f64>,
    /// False when the field is not block-constant; rates then hold only up to `1 + O(eps)`.
    pub exact: bool,
    strides: Vec<usize>,
    pub chain: ReversibleChain,
}

pub const MAX_LUMPED_STATES: usize = 20_000_000;

pub fn lumped_chain(partition: &Partition, params: &SystemParams) -> Result<LumpedChain> {
    if params.n != partition.n_sites {
        return Err(Error::InvalidParameter("partition and parameters disagree on N".into()));
    }
    let sizes = partition.sizes();
    let dim = sizes.len();
    let mut strides = vec![1usize; dim];
    for l in (0..dim.saturating_sub(1)).rev() {
        strides[l] = strides[l + 1] * (sizes[l + 1] + 1);
    }
    let total = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s + 1)).unwrap_or(usize::MAX);
    if total > MAX_LUMPED_STATES {
        return Err(Error::InvalidParameter(format!("lumped chain would have {total} states")));
    }
    let n = partition.n_sites;
    let nf = n as f64;
    let beta = params.beta;
    let lf = LnFactorial::new(n);
    let mut log_q = Vec::with_capacity(total);
    let mut edges = Vec::with_capacity(total * dim);
    let mut log_c = Vec::with_capacity(total * dim);
    let mut k = vec![0usize; dim];
    for idx in 0..total {
        let up: usize = k.iter().sum();
        let m = (2.0 * up as f64 - nf) / nf;
        let mut s = Neumaier::default();
        s.add(-nf * std::f64::consts::LN_2);
        s.add(0.5 * beta * nf * m * m);
        for l in 0..dim {
            s.add(lf.ln_binom(sizes[l], k[l]));
            s.add(beta * partition.hbar[l] * (2.0 * k[l] as f64 - sizes[l] as f64));
        }
        let lq = s.sum();
        log_q.push(lq);
        for l in 0..dim {
            if k[l] < sizes[l] {
                let dh = -2.0 * (m + 1.0 / nf + partition.hbar[l]);
                edges.push((idx, idx + strides[l]));
                log_c.push(lq + ((sizes[l] - k[l]) as f64 / nf).ln() - beta * dh.max(0.0));
            }
        }
        for l in (0..dim).rev() {
            k[l] += 1;
            if k[l] <= sizes[l] {
                break;
            }
            k[l] = 0;
        }
    }
    Ok(LumpedChain {
        sizes,
        n_sites: n,
        beta,
        hbar: partition.hbar.clone(),
        exact: partition.is_exact(),
        strides,
        chain: ReversibleChain::new(log_q, edges, log_c)?,
    })
}

impl LumpedChain {
    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_states(&self) -> usize {
        self.chain.n_states()
    }

    pub fn index(&self, k: &[usize]) -> usize {
        k.iter().zip(&self.strides).map(|(a, b)| a * b).sum()
    }

    pub fn counts(&self, mut idx: usize) -> Vec<usize> {
        let mut k = vec![0; self.dim()];
        for l in 0..self.dim() {
            k[l] = idx / self.strides[l];
            idx %= self.strides[l];
        }
        k
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let nf = self.n_sites as f64;
        self.counts(idx).iter().zip(&self.sizes).map(|(&k, &s)| (2.0 * k as f64 - s as f64) / nf).collect()
    }

    /// Total number of up spins.
    pub fn level(&self, idx: usize) -> usize {
        self.counts(idx).iter().sum()
    }

    pub fn magnetization(&self, idx: usize) -> f64 {
        (2.0 * self.level(idx) as f64 - self.n_sites as f64) / self.n_sites as f64
    }

    pub fn levels(&self) -> Vec<usize> {
        (0..self.n_states()).map(|x| self.level(x)).collect()
    }

    /// Nearest grid state to a point of block magnetizations.
    pub fn nearest_state(&self, x: &[f64]) -> usize {
        let nf = self.n_sites as f64;
        let k: Vec<usize> = x
            .iter()
            .zip(&self.sizes)
            .map(|(&v, &s)| (((v * nf + s as f64) / 2.0).round().max(0.0) as usize).min(s))
            .collect();
        self.index(&k)
    }

    pub fn states_where<F: Fn(usize) -> bool>(&self, pred: F) -> Vec<usize> {
        (0..self.n_states()).filter(|&x| pred(self.level(x))).collect()
    }

    /// Edge list `i j log_c`.
    pub fn write_edges<W: Write>(&self, mut w: W) -> Result<()> {
        for (e, &(x, y)) in self.chain.edges().iter().enumerate() {
            writeln!(w, "{x} {y} {:.17e}", self.chain.log_conductance(e))?;
        }
        Ok(())
    }

    /// Legend `index k_1..k_n x_1..x_n log_Q`.
    pub fn write_legend<W: Write>(&self, mut w: W) -> Result<()> {
        for idx in 0..self.n_states() {
            write!(w, "{idx}")?;
            for k in self.counts(idx) {
                write!(w, " {k}")?;
            }
            for x in self.coords(idx) {
                write!(w, " {x:.12}")?;
            }
            writeln!(w, " {:.17e}", self.chain.log_mu(idx))?;
        }
        Ok(())
    }
}

/// Well-to-well sets described by total up-spin counts.
///
/// `A` is the level of the starting minimum, extended away from the deeper
/// minima when they all lie on one side (this leaves capacity, potential and
/// hitting times unchanged); `B` collects the levels at and beyond each deeper minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSets {
    pub n_sites: usize,
    pub ka: usize,
    pub kz: usize,
    pub b_up: Option<usize>,
    pub b_down: Option<usize>,
}

impl LevelSets {
    pub fn new(n_sites: usize, ka: usize, kz: usize, kb: usize) -> Result<Self> {
        let ok = (ka < kz && kz < kb) || (kb < kz && kz < ka);
        if !ok || kb > n_sites || ka > n_sites {
            return Err(Error::Domain(format!("levels {ka}, {kz}, {kb} are not ordered start, saddle, target")));
        }
        let (b_up, b_down) = if kb > ka { (Some(kb), None) } else { (None, Some(kb)) };
        Ok(LevelSets { n_sites, ka, kz, b_up, b_down })
    }

    pub fn from_barrier(b: &crate::landscape::BarrierSpec, n_sites: usize) -> Result<Self> {
        use crate::landscape::grid_index;
        let ka = grid_index(b.start.m_star, n_sites);
        let kz = grid_index(b.saddle.m_star, n_sites);
        let mut sets = LevelSets { n_sites, ka, kz, b_up: None, b_down: None };
        for p in &b.deeper_set {
            let k = grid_index(p.m_star, n_sites);
            if p.m_star > b.start.m_star {
                sets.b_up = Some(sets.b_up.map_or(k, |x: usize| x.min(k)));
            } else {
                sets.b_down = Some(sets.b_down.map_or(k, |x: usize| x.max(k)));
            }
        }
        let forward = kz > ka;
        let kb = if forward { sets.b_up } else { sets.b_down };
        match kb {
            Some(kb) if (forward && kz < kb) || (!forward && kb < kz) => {}
            _ => return Err(Error::Domain("grid too coarse to separate start, saddle and target".into())),
        }
        if ka == kz {
            return Err(Error::Domain("grid too coarse to separate start and saddle".into()));
        }
        Ok(sets)
    }

    /// True when the saddle lies above the start.
    pub fn forward(&self) -> bool {
        self.kz > self.ka
    }

    pub fn in_a(&self, k: usize) -> bool {
        match (self.b_up, self.b_down) {
            (Some(_), None) => k <= self.ka,
            (None, Some(_)) => k >= self.ka,
            _ => k == self.ka,
        }
    }

    pub fn in_b(&self, k: usize) -> bool {
        self.b_up.is_some_and(|kb| k >= kb) || self.b_down.is_some_and(|kb| k <= kb)
    }

    /// States on the start side of the saddle level.
    pub fn a_side(&self, k: usize) -> bool {
        if self.forward() {
            k <= self.kz
        } else {
            k >= self.kz
        }
    }

    /// `(A, B, side)` for a chain whose states have the given levels.
    pub fn split(&self, levels: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<bool>) {
        let a = (0..levels.len()).filter(|&x| self.in_a(levels[x])).collect();
        let b = (0..levels.len()).filter(|&x| self.in_b(levels[x])).collect();
        let side = levels.iter().map(|&k| self.a_side(k)).collect();
        (a, b, side)
    }
}

/// Eigen-decomposition of `B = sqrt(r) A sqrt(r)` with `A = -1 1^T + diag(lambda_hat)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecularSolution {
    /// Eigenvalues in increasing order.
    pub gamma: Vec<f64>,
    /// Principal eigenvector pair: `A v_check = gamma_1 v`, `(v_check, v) = 1`.
    pub v: Vec<f64>,
    pub v_check: Vec<f64>,
}

/// Roots of `sum_k r_k / (d_k - gamma) = 1`, poles merged when they coincide.
pub fn secular_roots(d: &[f64], r: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let mut poles: Vec<(f64, f64)> = Vec::new();
    let mut roots = Vec::new();
    for &k in &order {
        if r[k] == 0.0 {
            roots.push(d[k]);
            continue;
        }
        match poles.last_mut() {
            Some(p) if (d[k] - p.0).abs() <= 1e-14 * p.0.abs().max(1.0) => {
                p.1 += r[k];
                roots.push(p.0);
            }
            _ => poles.push((d[k], r[k])),
        }
    }
    let f = |g: f64| 1.0 - poles.iter().map(|&(dk, rk)| rk / (dk - g)).sum::<f64>();
    if let Some(&(d1, _)) = poles.first() {
        let rsum: f64 = poles.iter().map(|p| p.1).sum();
        roots.push(bisect_decreasing(f, d1 - rsum - 1.0, d1));
    }
    for w in poles.windows(2) {
        roots.push(bisect_decreasing(f, w[0].0, w[1].0));
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Root of a decreasing function between two poles; endpoints are never evaluated.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn secular_solution(lambda_hat: &[f64], r: &[f64]) -> SecularSolution {
    let d: Vec<f64> = lambda_hat.iter().zip(r).map(|(l, r)| l * r).collect();
    let gamma = secular_roots(&d, r);
    let g1 = gamma[0];
    let phi: Vec<f64> = d.iter().map(|dk| dk - g1).collect();
    let norm = r.iter().zip(&phi).map(|(r, p)| r / (p * p)).sum::<f64>().sqrt();
    let v: Vec<f64> = phi.iter().map(|p| 1.0 / (p * norm)).collect();
    let v_check = v.iter().zip(r).map(|(v, r)| v * r).collect();
    SecularSolution { gamma, v, v_check }
}

pub fn hessian(lambda_hat: &[f64]) -> DMatrix<f64> {
    let n = lambda_hat.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { lambda_hat[i] - 1.0 } else { -1.0 })
}

/// `det A = (1 - sum 1/lambda) prod lambda`.
pub fn hessian_det(lambda_hat: &[f64]) -> f64 {
    (1.0 - lambda_hat.iter().map(|l| 1.0 / l).sum::<f64>()) * lambda_hat.iter().product::<f64>()
}

pub fn rate_matrix(lambda_hat: &[f64], r: &[f64]) -> DMatrix<f64> {
    let a = hessian(lambda_hat);
    let n = r.len();
    DMatrix::from_fn(n, n, |i, j| r[i].sqrt() * a[(i, j)] * r[j].sqrt())
}

/// Sorted eigenvalues of the rate matrix by dense symmetric decomposition.
pub fn dense_eigenvalues(lambda_hat: &[f64], r: &[f64]) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(rate_matrix(lambda_hat, r)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Hessian and rate data at a mesoscopic saddle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaddleData {
    pub z_star: f64,
    pub z: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub r: Vec<f64>,
    pub det_a: f64,
    /// `(beta/N) sum_i (1 - tanh^2(beta (z* + h_i)))`.
    pub condition: f64,
    pub eigen: SecularSolution,
}

impl SaddleData {
    pub fn gamma1(&self) -> f64 {
        self.eigen.gamma[0]
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        hessian(&self.lambda_hat)
    }

    /// Largest deviation between the secular roots and a dense eigensolve.
    pub fn dense_check(&self) -> f64 {
        dense_eigenvalues(&self.lambda_hat, &self.r)
            .iter()
            .zip(&self.eigen.gamma)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Saddle data at the mesoscopic point above the one-dimensional maximum `z*`.
///
/// The rate `r_l` is the up-rate of block `l` at the saddle,
/// `(rho_l - z_l)/2 * exp(-2 beta [-(z* + hbar_l)]_+)`.
pub fn meso_saddle(z_star: f64, partition: &Partition, beta: f64) -> Result<SaddleData> {
    let nf = partition.n_sites as f64;
    let mut z = Vec::new();
    let mut lambda_hat = Vec::new();
    let mut r = Vec::new();
    let mut cond = Neumaier::default();
    for (l, b) in partition.blocks.iter().enumerate() {
        let mut zl = Neumaier::default();
        let mut s = Neumaier::default();
        for &i in b {
            let t = (beta * (z_star + partition.h[i])).tanh();
            zl.add(t);
            s.add(1.0 - t * t);
        }
        let zl = zl.sum() / nf;
        let curv = beta * s.sum() / nf;
        cond.add(curv);
        z.push(zl);
        lambda_hat.push(1.0 / curv);
        let y = z_star + partition.hbar[l];
        r.push(0.5 * (partition.rho[l] - zl) * (-2.0 * beta * (-y).max(0.0)).exp());
    }
    let condition = cond.sum();
    if condition <= 1.0 {
        return Err(Error::NotASaddle(condition));
    }
    let eigen = secular_solution(&lambda_hat, &r);
    Ok(SaddleData { z_star, det_a: hessian_det(&lambda_hat), z, lambda_hat, r, condition, eigen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FieldDistribution;

    fn two_valued(n: usize, seed: u64) -> RandomField {
        crate::model::sample_field(&FieldDistribution::TwoValued { eps: 0.2, p: 0.5 }, n, seed).unwrap()
    }

    #[test]
    fn partition_basics() {
        let f = two_valued(30, 3);
        let p = build_partition(&f, 1).unwrap();
        assert_eq!(p.dim(), 1);
        assert!((p.hbar[0] - f.mean()).abs() < 1e-15);
        let p = build_partition(&f, 2).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(p.is_exact());
        assert!((p.rho.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let u = crate::model::sample_field(&FieldDistribution::Uniform { lo: -1.0, hi: 1.0 }, 500, 1).unwrap();
        for n in [1, 3, 7] {
            let p = build_partition(&u, n).unwrap();
            assert!(p.max_residual() <= 2.0 / n as f64);
            assert_eq!(p.blocks.iter().map(|b| b.len()).sum::<usize>(), 500);
        }
    }

    #[test]
    fn n1_free_energy_reduces() {
        let u = crate::model::sample_field(&FieldDistribution::Uniform { lo: -0.5, hi: 0.5 }, 60, 2).unwrap();
        let params = SystemParams::new(60, 1.4).unwrap();
        let ml = MesoLandscape::new(build_partition(&u, 1).unwrap(), params);
        let l = Landscape1D::new(&u, params);
        for m in [-0.7, -0.1, 0.3, 0.9] {
            assert!((ml.free_energy(&[m]).unwrap() - l.free_energy(m).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_symmetric_split() {
        let f = RandomField::from_values(vec![0.0; 20], FieldDistribution::Uniform { lo: -1.0, hi: 1.0 }, 0).unwrap();
        let params = SystemParams::new(20, 1.7).unwrap();
        let mut p = build_partition(&f, 1).unwrap();
        // two equal halves
        p.blocks = vec![(0..10).collect(), (10..20).collect()];
        p.rho = vec![0.5, 0.5];
        p.hbar = vec![0.0, 0.0];
        p.intervals = vec![(-1.0, 0.0), (0.0, 1.0)];
        let ml = MesoLandscape::new(p.clone(), params);
        let l = Landscape1D::new(&f, params);
        for m in [-0.4, 0.2, 0.8] {
            assert!((ml.free_energy(&[m / 2.0, m / 2.0]).unwrap() - l.free_energy(m).unwrap()).abs() < 1e-12);
            let x = min_energy_curve(&p, 1.7, m).unwrap();
            assert!((x[0] - m / 2.0).abs() < 1e-12 && (x[1] - m / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_lumped_chain() {
        let f = RandomField::from_values(vec![0.0; 2], FieldDistribution::Constant { c: 0.0 }, 0).unwrap();
        let params = SystemParams::new(2, 1.0).unwrap();
        let lc = lumped_chain(&build_partition(&f, 1).unwrap(), &params).unwrap();
        assert_eq!(lc.n_states(), 3);
        let e = std::f64::consts::E;
        for (x, want) in [(0, e / 4.0), (1, 0.5), (2, e / 4.0)] {
            assert!((lc.chain.log_mu(x).exp() - want).abs() < 1e-15);
        }
        assert!((lc.chain.transition(0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        // Q(0) p(0,1) = Q(1) p(1,0) = 1/4
        assert!((lc.chain.log_conductance(0).exp() - 0.25).abs() < 1e-15);
        lc.chain.check_stochastic(1e-12).unwrap();
    }

    #[test]
    fn saddle_zero_field() {
        let f = RandomField::from_values(vec![0.0; 50], FieldDistribution::Constant { c: 0.0 }, 0).unwrap();
        let s = meso_saddle(0.0, &build_partition(&f, 1).unwrap(), 2.0).unwrap();
        assert!((s.lambda_hat[0] - 0.5).abs() < 1e-15);
        assert!((s.r[0] - 0.5).abs() < 1e-15);
        assert!((s.gamma1() + 0.25).abs() < 1e-14);
        assert!(meso_saddle(0.0, &build_partition(&f, 1).unwrap(), 0.5).is_err());
    }

    #[test]
    fn det_identity() {
        let l = [0.4, 0.7];
        assert!((hessian_det(&l) + 0.82).abs() < 1e-14);
        assert!((hessian(&l).determinant() + 0.82).abs() < 1e-14);
    }

    #[test]
    fn secular_with_repeated_poles() {
        let lambda = [0.5, 0.5, 0.9];
        let r = [0.3, 0.3, 0.2];
        let s = secular_solution(&lambda, &r);
        let dense = dense_eigenvalues(&lambda, &r);
        for (a, b) in s.gamma.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvector_pair() {
        let lambda = [0.3, 0.6, 1.1, 2.0];
        let r = [0.2, 0.4, 0.1, 0.3];
        let s = secular_solution(&lambda, &r);
        let a = hessian(&lambda);
        for i in 0..4 {
            let av: f64 = (0..4).map(|j| a[(i, j)] * s.v_check[j]).sum();
            assert!((av - s.gamma[0] * s.v[i]).abs() < 1e-12);
        }
        let dot: f64 = s.v.iter().zip(&s.v_check).map(|(a, b)| a * b).sum();
        assert!((dot - 1.0).abs() < 1e-13);
        assert!(s.v.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn saddle_components_sum() {
        let f = two_valued(200, 5);
        let params = SystemParams::new(200, 1.5).unwrap();
        let l = Landscape1D::new(&f, params);
        let z = l
            .critical_points()
            .unwrap()
            .into_iter()
            .find(|p| p.kind == crate::landscape::PointKind::Maximum)
            .unwrap();
        let p = build_partition(&f, 2).unwrap();
        let s = meso_saddle(z.m_star, &p, 1.5).unwrap();
        assert!((s.z.iter().sum::<f64>() - z.m_star).abs() < 1e-12);
        assert!(s.dense_check() < 1e-12);
        let x = min_energy_curve(&p, 1.5, z.m_star).unwrap();
        for (a, b) in x.iter().zip(&s.z) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
